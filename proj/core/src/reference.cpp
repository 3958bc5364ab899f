#include "npr/reference.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace npr {

FieldGrid make_grid(int nt, int nx, double t_final) {
  if (nt < 2 || nx < 2) throw ConfigError("grid: need nt, nx >= 2");
  FieldGrid g;
  g.nt = nt;
  g.nx = nx;
  g.t_vals.resize(static_cast<std::size_t>(nt));
  g.x_vals.resize(static_cast<std::size_t>(nx));
  for (int i = 0; i < nt; ++i) g.t_vals[static_cast<std::size_t>(i)] = t_final * i / (nt - 1);
  for (int j = 0; j < nx; ++j) g.x_vals[static_cast<std::size_t>(j)] = static_cast<double>(j) / (nx - 1);
  g.values.assign(static_cast<std::size_t>(nt) * nx, 0.0);
  return g;
}

namespace {

// Solves the constant tridiagonal system (I + c * tri(-1, 2, -1)) u = rhs on
// the interior nodes 0..m-1 (Thomas algorithm, factorization precomputed).
struct TriSolver {
  std::vector<double> denom;  // forward-elimination pivots
  double off = 0.0;           // the constant off-diagonal entry (-c)

  TriSolver(int m, double c) : denom(static_cast<std::size_t>(m)), off(-c) {
    const double diag = 1.0 + 2.0 * c;
    double d = diag;
    for (int i = 0; i < m; ++i) {
      denom[static_cast<std::size_t>(i)] = 1.0 / d;
      d = diag - off * off / d;
    }
  }

  void solve(std::vector<double>& rhs) const {
    const int m = static_cast<int>(denom.size());
    for (int i = 1; i < m; ++i)
      rhs[static_cast<std::size_t>(i)] -= off * denom[static_cast<std::size_t>(i - 1)] *
                                          rhs[static_cast<std::size_t>(i - 1)];
    rhs[static_cast<std::size_t>(m - 1)] *= denom[static_cast<std::size_t>(m - 1)];
    for (int i = m - 2; i >= 0; --i)
      rhs[static_cast<std::size_t>(i)] =
          (rhs[static_cast<std::size_t>(i)] - off * rhs[static_cast<std::size_t>(i + 1)]) *
          denom[static_cast<std::size_t>(i)];
  }
};

}  // namespace

FieldGrid heat_fd_solve(const ICSample& ic, double kappa, int nt, int nx, int substeps,
                        double t_final) {
  if (substeps < 1) throw ConfigError("heat solve: substeps must be >= 1");
  if (kappa <= 0.0) throw ConfigError("heat solve: kappa must be > 0");
  FieldGrid g = make_grid(nt, nx, t_final);

  std::vector<double> u(static_cast<std::size_t>(nx));
  for (int j = 0; j < nx; ++j)
    u[static_cast<std::size_t>(j)] = eval_ic(ic, g.x_vals[static_cast<std::size_t>(j)]);
  const double left = u[0];
  const double right = u[static_cast<std::size_t>(nx - 1)];
  std::copy(u.begin(), u.end(), g.values.begin());

  const double dx = 1.0 / (nx - 1);
  const double dt = t_final / ((nt - 1) * static_cast<double>(substeps));
  const double mu = kappa * dt / (dx * dx);
  const int m = nx - 2;  // interior nodes
  if (m < 1) throw ConfigError("heat solve: need at least one interior node");

  // the CN implicit half and a backward-Euler half-step share this matrix
  const TriSolver cn(m, mu / 2.0);

  std::vector<double> rhs(static_cast<std::size_t>(m));
  bool startup = true;
  for (int i = 1; i < nt; ++i) {
    for (int s = 0; s < substeps; ++s) {
      if (startup) {
        // two backward-Euler half-steps in place of the first CN step
        for (int half = 0; half < 2; ++half) {
          for (int k = 0; k < m; ++k) rhs[static_cast<std::size_t>(k)] = u[static_cast<std::size_t>(k + 1)];
          rhs[0] += (mu / 2.0) * left;
          rhs[static_cast<std::size_t>(m - 1)] += (mu / 2.0) * right;
          cn.solve(rhs);
          for (int k = 0; k < m; ++k) u[static_cast<std::size_t>(k + 1)] = rhs[static_cast<std::size_t>(k)];
        }
        startup = false;
        continue;
      }
      // explicit half: (I + (mu/2) tri(1, -2, 1)) u + boundary terms
      for (int k = 0; k < m; ++k) {
        const double uk = u[static_cast<std::size_t>(k + 1)];
        const double um = u[static_cast<std::size_t>(k)];
        const double up = u[static_cast<std::size_t>(k + 2)];
        rhs[static_cast<std::size_t>(k)] = uk + (mu / 2.0) * (um - 2.0 * uk + up);
      }
      rhs[0] += (mu / 2.0) * left;
      rhs[static_cast<std::size_t>(m - 1)] += (mu / 2.0) * right;
      cn.solve(rhs);
      for (int k = 0; k < m; ++k) u[static_cast<std::size_t>(k + 1)] = rhs[static_cast<std::size_t>(k)];
    }
    for (int k = 0; k < m; ++k) {
      const double v = u[static_cast<std::size_t>(k + 1)];
      if (!std::isfinite(v))
        throw NumericError("heat solve: non-finite value at output row " + std::to_string(i));
    }
    std::copy(u.begin(), u.end(), g.values.begin() + static_cast<std::size_t>(i) * nx);
  }
  return g;
}

double burgers_exact(double a, double b, double t, double x) {
  const double denom = a * t + 1.0;
  if (denom <= 0.0)
    throw NumericError("burgers exact: characteristic crossing (a t + 1 <= 0), shock region");
  return std::min((a * x + b) / denom, b);
}

FieldGrid burgers_exact_field(double a, double b, int nt, int nx, double t_final) {
  FieldGrid g = make_grid(nt, nx, t_final);
  for (int i = 0; i < nt; ++i)
    for (int j = 0; j < nx; ++j)
      g.at(i, j) = burgers_exact(a, b, g.t_vals[static_cast<std::size_t>(i)],
                                 g.x_vals[static_cast<std::size_t>(j)]);
  return g;
}

}  // namespace npr
