#pragma once

#include <span>
#include <vector>

#include "npr/constraints.hpp"
#include "npr/mlp.hpp"
#include "npr/problems.hpp"
#include "npr/tape.hpp"

namespace npr {

/// Hypernetwork H mapping a sensor vector to the flat parameters theta of a
/// low-rank target network; the target maps (t, x) to the solution value.
struct HypernetSpec {
  MlpSpec hyper;          // d_input = sensor count, d_output = target parameter count
  LowRankMlpSpec target;  // d_input = 2, d_output = 1
};

void validate(const HypernetSpec& spec);  // throws ConfigError

/// Builder wiring hyper.d_output to the target's parameter count.
HypernetSpec make_hypernet_spec(int d_enc, int target_hidden, int rank, int hyper_hidden = 64,
                                int n_hidden = 4);

/// theta = hyper(sensors): one dense forward; theta is reusable across (t, x).
ParamVector decode_theta(const HypernetSpec& spec, std::span<const double> hyper_params,
                         std::span<const double> sensors);

/// Constrained target evaluation with plain theta; T is double or Jet2.
template <class T>
T target_eval(const LowRankMlpSpec& spec, std::span<const double> theta, const T& t, const T& x,
              const ConstraintConfig& cfg, const ICSample& u0) {
  const std::vector<T> in = {t, x};
  const T raw = forward_lowrank(spec, theta, std::span<const T>(in))[0];
  return apply_hard_constraints(raw, t, x, cfg, u0);
}

/// Full pipeline on plain scalars: hyper forward, decode, constrained target.
double npr_eval(const HypernetSpec& spec, std::span<const double> hyper_params,
                std::span<const double> sensors, double t, double x, const ConstraintConfig& cfg,
                const ICSample& u0);

/// Constrained plain dense net on (t, x): the solution ansatz used when the
/// parameters themselves are trained for one fixed initial condition.
template <class T>
T dense_eval(const MlpSpec& spec, std::span<const double> params, const T& t, const T& x,
             const ConstraintConfig& cfg, const ICSample& u0) {
  const std::vector<T> in = {t, x};
  const T raw = forward_dense(spec, params, std::span<const T>(in))[0];
  return apply_hard_constraints(raw, t, x, cfg, u0);
}

// ---- tape recorders (the training path) --------------------------------------

/// Records a dense MLP forward whose parameters live on the tape (canonical
/// layout inside `params`).  With input_is_constant the input adjoints are
/// skipped (sensor vectors).  Returns the contiguous output range.
VarRange record_mlp(Tape& tape, const MlpSpec& spec, VarRange params, VarRange input,
                    bool input_is_constant);

/// Records the low-rank target at inputs (t, x) with theta as tape variables;
/// returns the raw, unconstrained output.  (t, x) may carry any payload mix;
/// they are copied to adjacent slots if the caller's handles are not adjacent.
Var record_target(Tape& tape, const LowRankMlpSpec& spec, VarRange theta, Var t, Var x);

/// Wraps a raw output in the hard-constraint blends; u0's jet at the current
/// x is computed off-tape and injected as a constant.
Var record_constraints(Tape& tape, Var raw, Var t, Var x, const ConstraintConfig& cfg,
                       const ICSample& u0);

/// u and its derivative coefficients as real-payload tape variables,
/// all differentiable with respect to the upstream parameters.
struct ModelDerivs {
  Var u, u_t, u_x, u_xx;
};

/// Per-element recording: sensors -> theta (recorded once), then a t-seeded
/// pass for u_t and an x-seeded pass for (u, u_x, u_xx), both constrained.
/// phi holds the hypernetwork parameters as tape leaves.
ModelDerivs record_npr_derivs(Tape& tape, const HypernetSpec& spec, VarRange phi,
                              std::span<const double> sensors, double t, double x,
                              const ConstraintConfig& cfg, const ICSample& u0);

/// Value-only recording at (t, x) on the real path (soft IC/BC losses).
Var record_npr_value(Tape& tape, const HypernetSpec& spec, VarRange phi,
                     std::span<const double> sensors, double t, double x,
                     const ConstraintConfig& cfg, const ICSample& u0);

/// Same two seeded passes for a plain dense net whose own parameters are the
/// tape leaves (fine-tuning and single-instance training).
ModelDerivs record_dense_derivs(Tape& tape, const MlpSpec& spec, VarRange params, double t,
                                double x, const ConstraintConfig& cfg, const ICSample& u0);

Var record_dense_value(Tape& tape, const MlpSpec& spec, VarRange params, double t, double x,
                       const ConstraintConfig& cfg, const ICSample& u0);

}  // namespace npr
