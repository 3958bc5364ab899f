#pragma once

#include <functional>
#include <vector>

#include "npr/tape.hpp"

namespace npr {

/// Flat parameter storage shared by every network in this library.
using ParamVector = std::vector<double>;

/// Record f on a fresh tape and return d(loss)/d(params) at `at`.
/// Throws NumericError if the recorded loss is not finite.
inline ParamVector grad(const std::function<Var(Tape&, VarRange)>& f, const ParamVector& at) {
  Tape tape;
  const VarRange params = tape.leaves(at);
  const Var loss = f(tape, params);
  tape.backward(loss);
  ParamVector g(at.size());
  tape.copy_adjoints(params, g);
  return g;
}

/// Output of the two seeded passes over a scalar field net(t, x).
/// All four variables remain differentiable w.r.t. whatever tape leaves the
/// callback consumed (network parameters in particular).
struct DirectionalDerivs {
  Var u;     // value, from the x-seeded pass
  Var u_t;   // first time derivative
  Var u_x;   // first space derivative
  Var u_xx;  // second space derivative
};

/// Evaluate net_eval twice — once with t seeded, once with x seeded — and
/// extract the directional coefficients as real-payload variables.
inline DirectionalDerivs directional_derivs(
    Tape& tape, const std::function<Var(Tape&, Var, Var)>& net_eval, double t, double x) {
  const Var t_seeded = tape.seeded(t);
  const Var x_const = tape.constant(x);
  const Var along_t = net_eval(tape, t_seeded, x_const);
  const Var u_t = tape.extract_d1(along_t);

  const Var t_const = tape.constant(t);
  const Var x_seeded = tape.seeded(x);
  const Var along_x = net_eval(tape, t_const, x_seeded);
  return DirectionalDerivs{
      tape.extract_val(along_x),
      u_t,
      tape.extract_d1(along_x),
      tape.extract_d2(along_x),
  };
}

}  // namespace npr
