#pragma once

#include <cmath>
#include <cstddef>
#include <type_traits>
#include <vector>

#include "npr/errors.hpp"
#include "npr/jet.hpp"
#include "npr/rng.hpp"

namespace npr {

enum class Equation { heat, burgers };
enum class BcKind { dirichlet_both_ends, dirichlet_left };

/// 1-D problem on x in [0,1], t in [0, t_final].
struct IbvpSpec {
  Equation equation = Equation::burgers;
  double t_final = 1.0;
  double kappa = 0.05;  // heat diffusivity; unused for burgers
};

void validate(const IbvpSpec& spec);  // throws ConfigError

inline BcKind bc_kind(const IbvpSpec& spec) {
  return spec.equation == Equation::heat ? BcKind::dirichlet_both_ends : BcKind::dirichlet_left;
}

/// One sinusoid amp * sin(omega x + phase), or cos when is_cos is set.
struct TrigTerm {
  double amp = 0.0;
  double omega = 0.0;
  double phase = 0.0;
  bool is_cos = false;
};

/// Initial condition u0 in closed form (affine part + sinusoids) or as a table
/// of equidistant samples on [0,1] with linear interpolation.  The kind tag
/// records which family produced it; evaluation always uses all active parts.
enum class IcKind { fourier, affine, tabulated, expression };

struct ICSample {
  IcKind kind = IcKind::affine;
  double slope = 0.0;
  double intercept = 0.0;
  std::vector<TrigTerm> terms;
  std::vector<double> table;  // tabulated only; includes both endpoints
};

/// u0 = a0 + sum_{i=1..n} a_i sin(2 pi i x) + b_i cos(2 pi i x), all
/// coefficients uniform in [-c, c]; with shrink_high_modes mode i draws from
/// [-c/i, c/i] instead.  Draw order: a0, then (a_i, b_i) per mode.
ICSample sample_fourier_ic(int n, double c, Rng& rng, bool shrink_high_modes = false);

/// u0 = a x + b, a ~ U[a_low, a_high], b ~ U[b_low, b_high]; a drawn first.
ICSample sample_affine_ic(double a_low, double a_high, double b_low, double b_high, Rng& rng);

ICSample constant_ic(double value);
ICSample tabulated_ic(std::vector<double> values);

template <class T>
T eval_ic(const ICSample& ic, const T& x) {
  if (!ic.table.empty()) {
    const std::size_t n = ic.table.size();
    if (n == 1) return T{} + ic.table[0];
    double xv;
    if constexpr (std::is_same_v<T, Jet2>) xv = x.val;
    else xv = x;
    const auto cells = static_cast<double>(n - 1);
    int i = static_cast<int>(xv * cells);
    if (i < 0) i = 0;
    if (i > static_cast<int>(n) - 2) i = static_cast<int>(n) - 2;
    const T frac = x * cells - static_cast<double>(i);
    // convex form: exact at frac == 0 and frac == 1
    return (1.0 - frac) * ic.table[static_cast<std::size_t>(i)] +
           frac * ic.table[static_cast<std::size_t>(i) + 1];
  }
  T acc = ic.slope * x + ic.intercept;
  for (const TrigTerm& term : ic.terms) {
    const T arg = term.omega * x + term.phase;
    if constexpr (std::is_same_v<T, Jet2>) {
      acc = acc + term.amp * (term.is_cos ? cos(arg) : sin(arg));
    } else {
      acc = acc + term.amp * (term.is_cos ? std::cos(arg) : std::sin(arg));
    }
  }
  return acc;
}

/// Equidistant samples values[j] = u0(x_j), x_j = j/(d_enc-1), endpoints included.
std::vector<double> discretize(const ICSample& ic, int d_enc);

/// PDE residual: zero everywhere iff u solves the equation.
///   heat:    u_t - kappa * u_xx
///   burgers: u_t + u * u_x
template <class T>
T residual(const IbvpSpec& spec, const T& u, const T& u_t, const T& u_x, const T& u_xx) {
  if (spec.equation == Equation::heat) return u_t - spec.kappa * u_xx;
  return u_t + u * u_x;
}

struct PointTX {
  double t = 0.0;
  double x = 0.0;
};

/// n i.i.d. points uniform over [0, t_final] x [0, 1]; t drawn before x.
std::vector<PointTX> sample_collocation(int n, double t_final, Rng& rng);

}  // namespace npr
