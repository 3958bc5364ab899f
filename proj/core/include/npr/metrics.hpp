#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "npr/reference.hpp"
#include "npr/training.hpp"

namespace npr {

/// Grid-error summary of |got - want| over nt*nx samples:
///   l1   = sum(d) / (nt*nx)
///   l2   = sqrt(sum(d^2)) / (nt*nx)
///   linf = max(d)
/// plus the conventional rms = sqrt(mean(d^2)), which uses a different
/// normalization than l2 (larger by a factor sqrt(nt*nx)).
struct ErrorMetrics {
  double l1 = 0.0;
  double l2 = 0.0;
  double linf = 0.0;
  double rms = 0.0;
};

ErrorMetrics compute_metrics(const FieldGrid& got, const FieldGrid& want);  // throws ConfigError

/// Tabulates the model on an (nt, nx) grid over [0, t_final] x [0, 1].
/// The sensor vector is decoded once per initial condition; grid nodes then
/// cost one target-network pass each.
FieldGrid model_field(const ModelSpec& model, std::span<const double> params, const ICSample& ic,
                      int d_enc, const ConstraintConfig& constraints, int nt, int nx);

/// Reference solution on the same grid: FD solve for heat, closed form for
/// Burgers (affine initial data only).
FieldGrid reference_field(const IbvpSpec& problem, const ICSample& ic, int nt, int nx,
                          int fd_substeps = 4);

FieldGrid abs_diff(const FieldGrid& a, const FieldGrid& b);  // throws ConfigError on mismatch

struct EvalConfig {
  ModelSpec model;
  IbvpSpec problem;
  ConstraintConfig constraints;  // t_final / bc kind are taken from `problem`
  IcFamily ics;
  int d_enc = 32;
  int n_ics = 12;
  int nt = 500;  // grid of the error normalization as reported
  int nx = 500;
  int fd_substeps = 4;
  std::uint64_t seed = 0;
};

void validate(const EvalConfig& cfg);  // throws ConfigError

/// The held-out evaluation draws: a dedicated stream per index, disjoint from
/// every training stream, so the set is fixed by (seed, n_ics) alone.
std::vector<ICSample> eval_ics(const EvalConfig& cfg);

struct IcEval {
  ICSample ic;
  ErrorMetrics err;
};

struct EvalReport {
  std::vector<IcEval> per_ic;
  ErrorMetrics mean;        // component-wise mean over ICs
  double linf_worst = 0.0;  // max over ICs
};

EvalReport evaluate(const EvalConfig& cfg, std::span<const double> params);

/// Model / reference / |difference| triple for one IC (figure export).
struct IcFields {
  FieldGrid model;
  FieldGrid reference;
  FieldGrid diff;
};
IcFields evaluate_fields(const EvalConfig& cfg, std::span<const double> params,
                         const ICSample& ic);

/// One row per IC plus a final aggregate row.
void write_metrics_csv(const std::string& path, const EvalReport& report);  // throws IoError

}  // namespace npr
