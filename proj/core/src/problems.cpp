#include "npr/problems.hpp"

#include <numbers>
#include <utility>

namespace npr {

void validate(const IbvpSpec& spec) {
  if (spec.t_final <= 0.0) throw ConfigError("ibvp: t_final must be > 0");
  if (spec.equation == Equation::heat && spec.kappa <= 0.0)
    throw ConfigError("ibvp: heat needs kappa > 0");
}

ICSample sample_fourier_ic(int n, double c, Rng& rng, bool shrink_high_modes) {
  if (n < 1) throw ConfigError("fourier ic: need n >= 1 modes");
  if (c < 0.0) throw ConfigError("fourier ic: amplitude bound must be >= 0");
  ICSample ic;
  ic.kind = IcKind::fourier;
  ic.intercept = rng.next_uniform(-c, c);
  ic.terms.reserve(2 * static_cast<std::size_t>(n));
  for (int i = 1; i <= n; ++i) {
    const double bound = shrink_high_modes ? c / i : c;
    const double omega = 2.0 * std::numbers::pi * i;
    ic.terms.push_back({rng.next_uniform(-bound, bound), omega, 0.0, false});
    ic.terms.push_back({rng.next_uniform(-bound, bound), omega, 0.0, true});
  }
  return ic;
}

ICSample sample_affine_ic(double a_low, double a_high, double b_low, double b_high, Rng& rng) {
  if (a_low > a_high || b_low > b_high) throw ConfigError("affine ic: empty coefficient range");
  ICSample ic;
  ic.kind = IcKind::affine;
  ic.slope = rng.next_uniform(a_low, a_high);
  ic.intercept = rng.next_uniform(b_low, b_high);
  return ic;
}

ICSample constant_ic(double value) {
  ICSample ic;
  ic.kind = IcKind::affine;
  ic.intercept = value;
  return ic;
}

ICSample tabulated_ic(std::vector<double> values) {
  if (values.empty()) throw ConfigError("tabulated ic: need at least one sample");
  ICSample ic;
  ic.kind = IcKind::tabulated;
  ic.table = std::move(values);
  return ic;
}

std::vector<double> discretize(const ICSample& ic, int d_enc) {
  if (d_enc < 2) throw ConfigError("discretize: need at least 2 sensors");
  // tabulated on the same grid: the samples are the values, no interpolation
  if (ic.table.size() == static_cast<std::size_t>(d_enc)) return ic.table;
  std::vector<double> values(static_cast<std::size_t>(d_enc));
  for (int j = 0; j < d_enc; ++j)
    values[static_cast<std::size_t>(j)] = eval_ic(ic, static_cast<double>(j) / (d_enc - 1));
  return values;
}

std::vector<PointTX> sample_collocation(int n, double t_final, Rng& rng) {
  if (n < 1) throw ConfigError("collocation: need n >= 1");
  std::vector<PointTX> pts(static_cast<std::size_t>(n));
  for (auto& p : pts) {
    p.t = rng.next_uniform(0.0, t_final);
    p.x = rng.next_unit();
  }
  return pts;
}

}  // namespace npr
