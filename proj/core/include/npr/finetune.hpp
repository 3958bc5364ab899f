#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "npr/model.hpp"
#include "npr/training.hpp"

namespace npr {

/// A low-rank target materialized as a plain dense net: every hidden
/// transition A_i (B_i h) becomes one weight matrix W_i = A_i B_i.  Outputs
/// agree with the factored form to floating-point roundoff.
struct UnfoldedNet {
  MlpSpec spec;
  ParamVector params;
};

UnfoldedNet unfold_theta(const LowRankMlpSpec& spec, std::span<const double> theta);

/// Decode-then-unfold for one initial condition: theta = hyper(discretize(ic)),
/// then the materialization above.  The hypernetwork plays no further role.
UnfoldedNet unfold(const HypernetSpec& spec, std::span<const double> hyper_params,
                   const ICSample& ic, int d_enc);

/// Plain PINN training of a dense net for one fixed initial condition:
/// Adam at a constant rate on the residual loss (plus soft IC/BC terms at
/// unit weight when the corresponding hard constraint is disabled), fresh
/// collocation draws every step from a dedicated stream family.
struct FinetuneConfig {
  IbvpSpec problem;
  ConstraintConfig constraints;  // t_final / bc kind are taken from `problem`
  ICSample ic;
  long long n_steps = 200;
  int batch_pde = 512;
  int batch_ic = 64;
  int batch_bc = 64;
  double lr = 1e-3;
  LossKind loss = LossKind::mae;
  AdamConfig adam;
  std::uint64_t seed = 0;
  long long progress_every = 0;  // 0: record only the final step
};

void validate(const FinetuneConfig& cfg);  // throws ConfigError

struct FinetuneResult {
  ParamVector params;
  long long steps_done = 0;
  std::vector<StepStats> history;
};

FinetuneResult finetune(const MlpSpec& spec, std::span<const double> start,
                        const FinetuneConfig& cfg);

}  // namespace npr
