#include "npr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "npr/model.hpp"
#include "npr/threads.hpp"

namespace npr {

namespace {

void require_same_grid(const FieldGrid& a, const FieldGrid& b) {
  if (a.nt != b.nt || a.nx != b.nx)
    throw ConfigError("field grids differ: " + std::to_string(a.nt) + "x" + std::to_string(a.nx) +
                      " vs " + std::to_string(b.nt) + "x" + std::to_string(b.nx));
}

}  // namespace

ErrorMetrics compute_metrics(const FieldGrid& got, const FieldGrid& want) {
  require_same_grid(got, want);
  const std::size_t n = got.values.size();
  double sum = 0.0, sum_sq = 0.0, mx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = std::abs(got.values[i] - want.values[i]);
    sum += d;
    sum_sq += d * d;
    mx = std::max(mx, d);
  }
  ErrorMetrics m;
  m.l1 = sum / static_cast<double>(n);
  m.l2 = std::sqrt(sum_sq) / static_cast<double>(n);
  m.linf = mx;
  m.rms = std::sqrt(sum_sq / static_cast<double>(n));
  return m;
}

FieldGrid model_field(const ModelSpec& model, std::span<const double> params, const ICSample& ic,
                      int d_enc, const ConstraintConfig& constraints, int nt, int nx) {
  FieldGrid g = make_grid(nt, nx, constraints.t_final);
  const std::vector<double> sensors = discretize(ic, d_enc);
  if (model.kind == ModelKind::npr) {
    // decode once, then every node is a plain target pass
    const ParamVector theta = decode_theta(model.npr, params, sensors);
    for (int i = 0; i < nt; ++i)
      for (int j = 0; j < nx; ++j)
        g.at(i, j) = target_eval<double>(model.npr.target, theta, g.t_vals[i], g.x_vals[j],
                                         constraints, ic);
  } else {
    for (int i = 0; i < nt; ++i)
      for (int j = 0; j < nx; ++j)
        g.at(i, j) = model_eval(model, params, sensors, g.t_vals[i], g.x_vals[j], constraints, ic);
  }
  return g;
}

FieldGrid reference_field(const IbvpSpec& problem, const ICSample& ic, int nt, int nx,
                          int fd_substeps) {
  if (problem.equation == Equation::heat)
    return heat_fd_solve(ic, problem.kappa, nt, nx, fd_substeps, problem.t_final);
  if (!ic.terms.empty() || !ic.table.empty())
    throw ConfigError("closed-form reference needs affine initial data");
  return burgers_exact_field(ic.slope, ic.intercept, nt, nx, problem.t_final);
}

FieldGrid abs_diff(const FieldGrid& a, const FieldGrid& b) {
  require_same_grid(a, b);
  FieldGrid d = a;
  for (std::size_t i = 0; i < d.values.size(); ++i)
    d.values[i] = std::abs(a.values[i] - b.values[i]);
  return d;
}

void validate(const EvalConfig& cfg) {
  validate(cfg.model);
  validate(cfg.problem);
  if (cfg.d_enc < 2) throw ConfigError("d_enc must be at least 2");
  if (cfg.model.kind == ModelKind::npr && cfg.model.npr.hyper.d_input != cfg.d_enc)
    throw ConfigError("hypernetwork input width must equal d_enc");
  if (cfg.model.kind == ModelKind::deeponet && cfg.model.deeponet.branch.d_input != cfg.d_enc)
    throw ConfigError("branch input width must equal d_enc");
  if (cfg.n_ics < 1) throw ConfigError("n_ics must be at least 1");
  if (cfg.nt < 2 || cfg.nx < 2) throw ConfigError("evaluation grid needs nt, nx >= 2");
  if (cfg.fd_substeps < 1) throw ConfigError("fd_substeps must be at least 1");
  if (cfg.problem.equation == Equation::burgers && cfg.ics.kind != IcFamilyKind::affine &&
      !(cfg.ics.kind == IcFamilyKind::fixed && cfg.ics.fixed.terms.empty() &&
        cfg.ics.fixed.table.empty()))
    throw ConfigError("closed-form reference needs affine initial data");
}

std::vector<ICSample> eval_ics(const EvalConfig& cfg) {
  std::vector<ICSample> out;
  out.reserve(static_cast<std::size_t>(cfg.n_ics));
  for (int i = 0; i < cfg.n_ics; ++i) {
    Rng es(derive_stream(cfg.seed, rng_tag::eval, 0, static_cast<std::uint64_t>(i)));
    out.push_back(draw_ic(cfg.ics, es));
  }
  return out;
}

EvalReport evaluate(const EvalConfig& cfg, std::span<const double> params) {
  validate(cfg);
  ConstraintConfig cc = cfg.constraints;
  cc.t_final = cfg.problem.t_final;
  cc.bc_kind = bc_kind(cfg.problem);

  const std::vector<ICSample> ics = eval_ics(cfg);
  EvalReport report;
  report.per_ic.resize(ics.size());
  parallel_chunks(static_cast<int>(ics.size()), [&](int i) {
    const std::size_t k = static_cast<std::size_t>(i);
    const FieldGrid got = model_field(cfg.model, params, ics[k], cfg.d_enc, cc, cfg.nt, cfg.nx);
    const FieldGrid want =
        reference_field(cfg.problem, ics[k], cfg.nt, cfg.nx, cfg.fd_substeps);
    report.per_ic[k] = {ics[k], compute_metrics(got, want)};
  });

  for (const IcEval& e : report.per_ic) {
    report.mean.l1 += e.err.l1;
    report.mean.l2 += e.err.l2;
    report.mean.linf += e.err.linf;
    report.mean.rms += e.err.rms;
    report.linf_worst = std::max(report.linf_worst, e.err.linf);
  }
  const double n = static_cast<double>(report.per_ic.size());
  report.mean.l1 /= n;
  report.mean.l2 /= n;
  report.mean.linf /= n;
  report.mean.rms /= n;
  return report;
}

IcFields evaluate_fields(const EvalConfig& cfg, std::span<const double> params,
                         const ICSample& ic) {
  validate(cfg);
  ConstraintConfig cc = cfg.constraints;
  cc.t_final = cfg.problem.t_final;
  cc.bc_kind = bc_kind(cfg.problem);
  IcFields f;
  f.model = model_field(cfg.model, params, ic, cfg.d_enc, cc, cfg.nt, cfg.nx);
  f.reference = reference_field(cfg.problem, ic, cfg.nt, cfg.nx, cfg.fd_substeps);
  f.diff = abs_diff(f.model, f.reference);
  return f;
}

void write_metrics_csv(const std::string& path, const EvalReport& report) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f.precision(17);
  f << "ic, l1, l2, linf, rms\n";
  for (std::size_t i = 0; i < report.per_ic.size(); ++i) {
    const ErrorMetrics& m = report.per_ic[i].err;
    f << i << ", " << m.l1 << ", " << m.l2 << ", " << m.linf << ", " << m.rms << "\n";
  }
  f << "mean, " << report.mean.l1 << ", " << report.mean.l2 << ", " << report.mean.linf << ", "
    << report.mean.rms << "\n";
  if (!f) throw IoError("write failed for " + path);
}

}  // namespace npr
