#pragma once

#include <cstddef>
#include <vector>

#include "npr/errors.hpp"
#include "npr/problems.hpp"

namespace npr {

/// Solution samples u(t_i, x_j) on an equidistant grid including endpoints:
/// t_i = i * t_final / (nt - 1), x_j = j / (nx - 1).
struct FieldGrid {
  int nt = 0;
  int nx = 0;
  std::vector<double> t_vals;
  std::vector<double> x_vals;
  std::vector<double> values;  // row-major: values[i * nx + j] = u(t_i, x_j)

  double at(int i, int j) const { return values[static_cast<std::size_t>(i) * nx + j]; }
  double& at(int i, int j) { return values[static_cast<std::size_t>(i) * nx + j]; }
};

FieldGrid make_grid(int nt, int nx, double t_final = 1.0);

/// Heat equation u_t = kappa u_xx with u(t,0) = u0(0), u(t,1) = u0(1):
/// Crank-Nicolson stepping on the output grid's x nodes, `substeps` internal
/// steps per output interval, tridiagonal solves; the first internal step is
/// split into two backward-Euler half-steps to damp the non-smooth startup.
FieldGrid heat_fd_solve(const ICSample& ic, double kappa, int nt, int nx, int substeps = 4,
                        double t_final = 1.0);

/// Pre-shock closed form for u_t + u u_x = 0 with u0 = a x + b:
/// u(t, x) = min((a x + b) / (a t + 1), b).
double burgers_exact(double a, double b, double t, double x);

FieldGrid burgers_exact_field(double a, double b, int nt, int nx, double t_final = 1.0);

}  // namespace npr
