#pragma once

#include <span>
#include <utility>
#include <vector>

#include "npr/constraints.hpp"
#include "npr/mlp.hpp"
#include "npr/model.hpp"
#include "npr/problems.hpp"
#include "npr/tape.hpp"

namespace npr {

/// Branch/trunk operator net: u(t, x) = branch(sensors) . trunk(t, x), with
/// the same hard-constraint wrappers as the hypernetwork model.
struct DeepONetSpec {
  MlpSpec branch;  // d_input = sensor count, d_output = p_lat
  MlpSpec trunk;   // d_input = 2, d_output = p_lat
  int p_lat = 32;
};

void validate(const DeepONetSpec& spec);  // throws ConfigError

DeepONetSpec make_deeponet_spec(int d_enc, int branch_hidden, int trunk_hidden, int p_lat = 32,
                                int n_hidden = 4);

/// (trunk count, branch count); the flat parameter vector stores the branch
/// block first, then the trunk block.
std::pair<std::size_t, std::size_t> deeponet_param_counts(const DeepONetSpec& spec);
std::size_t deeponet_total_params(const DeepONetSpec& spec);

ParamVector init_deeponet(const DeepONetSpec& spec, Rng& rng);

template <class T>
T deeponet_eval(const DeepONetSpec& spec, std::span<const double> params,
                std::span<const double> sensors, const T& t, const T& x,
                const ConstraintConfig& cfg, const ICSample& u0) {
  const auto [n_trunk, n_branch] = deeponet_param_counts(spec);
  if (params.size() != n_trunk + n_branch)
    throw ConfigError("deeponet eval: parameter length mismatch");
  const std::vector<double> lat =
      forward_dense<double>(spec.branch, params.subspan(0, n_branch), sensors);
  const std::vector<T> in = {t, x};
  const std::vector<T> tr =
      forward_dense<T>(spec.trunk, params.subspan(n_branch), std::span<const T>(in));
  T dot{};
  for (std::size_t i = 0; i < lat.size(); ++i) dot = dot + lat[i] * tr[i];
  return apply_hard_constraints(dot, t, x, cfg, u0);
}

/// Tape recording: branch once per element, trunk per seeded pass, dot as one
/// fused node.  params holds [branch | trunk] as tape leaves.
ModelDerivs record_deeponet_derivs(Tape& tape, const DeepONetSpec& spec, VarRange params,
                                   std::span<const double> sensors, double t, double x,
                                   const ConstraintConfig& cfg, const ICSample& u0);

Var record_deeponet_value(Tape& tape, const DeepONetSpec& spec, VarRange params,
                          std::span<const double> sensors, double t, double x,
                          const ConstraintConfig& cfg, const ICSample& u0);

}  // namespace npr
