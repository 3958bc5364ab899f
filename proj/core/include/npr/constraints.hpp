#pragma once

#include "npr/problems.hpp"

namespace npr {

/// How the raw network output is reparametrized so the IC/BC hold by
/// construction.  With hardcode_ic the model at t=0 reproduces u0 exactly and
/// no IC loss term is needed; hardcode_bc does the same on the boundary.
struct ConstraintConfig {
  double t_final = 1.0;
  bool hardcode_ic = true;
  bool hardcode_bc = true;
  BcKind bc_kind = BcKind::dirichlet_both_ends;
};

/// (t/T) raw + ((T-t)/T) u0x: exactly u0x at t=0, exactly raw at t=T.
template <class T>
T hard_ic(const T& raw, const T& u0x, const T& t, double t_final) {
  return (t / t_final) * raw + ((t_final - t) / t_final) * u0x;
}

/// (1-beta) raw + beta u_b; beta = 1 pins the output to the boundary value.
template <class T>
T hard_bc(const T& raw, double u_b_at_t, double beta) {
  return (1.0 - beta) * raw + beta * u_b_at_t;
}

/// Dirichlet at both ends: raw x(1-x) + the linear interpolant of the
/// boundary values.  Exact at x=0 and x=1 for any raw.
template <class T>
T bc_blend_both_ends(const T& raw, const T& x, double u_left, double u_right) {
  return raw * x * (1.0 - x) + (u_right - u_left) * x + u_left;
}

/// Dirichlet at x=0 only: x raw + (1-x) u_left.
template <class T>
T bc_blend_left(const T& raw, const T& x, double u_left) {
  return x * raw + (1.0 - x) * u_left;
}

/// Full wrapper: BC blend inside, IC blend outside, so t=0 recovers u0(x)
/// exactly and the constrained boundary stays on the boundary data for all t.
/// Boundary data is time-independent here (both equations pin u to the IC's
/// endpoint values).
template <class T>
T apply_hard_constraints(const T& raw, const T& t, const T& x, const ConstraintConfig& cfg,
                         const ICSample& u0) {
  T v = raw;
  if (cfg.hardcode_bc) {
    const double left = eval_ic(u0, 0.0);
    if (cfg.bc_kind == BcKind::dirichlet_both_ends)
      v = bc_blend_both_ends(v, x, left, eval_ic(u0, 1.0));
    else
      v = bc_blend_left(v, x, left);
  }
  if (cfg.hardcode_ic) v = hard_ic(v, eval_ic(u0, x), t, cfg.t_final);
  return v;
}

}  // namespace npr
