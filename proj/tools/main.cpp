// Command line front end: train / eval / finetune / render.
// Exit codes: 0 ok, 2 bad configuration, 3 numeric divergence, 4 I/O trouble.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "npr/checkpoint.hpp"
#include "npr/errors.hpp"
#include "npr/field_io.hpp"
#include "npr/finetune.hpp"
#include "npr/ic_expr.hpp"
#include "npr/metrics.hpp"
#include "npr/run_config.hpp"

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config_path;
  std::string checkpoint_path;
  std::string out;
  std::string grid;       // "NTxNX"
  std::string ic_expr;
  std::string model_kind; // overrides model.kind in the config
  std::string render_in;  // field CSV for `render`
  long long steps = 0;
  std::uint64_t seed = 0;
  bool steps_set = false;
  bool seed_set = false;
  bool deterministic = false;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::pair<int, int> parse_grid(const std::string& text) {
  int nt = 0, nx = 0;
  char extra = 0;
  if (std::sscanf(text.c_str(), "%dx%d%c", &nt, &nx, &extra) != 2 || nt < 2 || nx < 2)
    throw npr::ConfigError("--grid wants NTxNX with both at least 2, got '" + text + "'");
  return {nt, nx};
}

// Config file -> RunConfig, with command line overrides folded in.  A model
// kind override has to land before parsing (the spec fields depend on it), so
// it is patched into the JSON text.
npr::RunConfig load_config(const Options& opt) {
  npr::RunConfig rc;
  if (opt.model_kind.empty()) {
    rc = npr::load_run_config(opt.config_path);
  } else {
    std::ifstream in(opt.config_path, std::ios::binary);
    if (!in) throw npr::IoError("cannot open config file: " + opt.config_path);
    std::ostringstream text;
    text << in.rdbuf();
    auto j = nlohmann::json::parse(text.str(), nullptr, false);
    if (j.is_discarded())
      throw npr::ConfigError("config file " + opt.config_path + " is not valid JSON");
    j["model"]["kind"] = opt.model_kind;
    rc = npr::parse_run_config(j.dump());
  }
  if (opt.seed_set) rc.train.seed = opt.seed;
  if (opt.steps_set) rc.train.n_steps = opt.steps;
  if (!opt.out.empty()) rc.out_dir = opt.out;
  if (!opt.grid.empty()) {
    auto [nt, nx] = parse_grid(opt.grid);
    rc.eval_nt = nt;
    rc.eval_nx = nx;
  }
  npr::validate(rc.train);
  return rc;
}

const char* kind_label(npr::ModelKind k) {
  switch (k) {
    case npr::ModelKind::npr: return "npr";
    case npr::ModelKind::deeponet: return "deeponet";
    default: return "dense_pinn";
  }
}

void print_metrics_row(const char* label, const npr::ErrorMetrics& m) {
  std::printf("%-8s %12.5e %12.5e %12.5e %12.5e\n", label, m.l1, m.l2, m.linf, m.rms);
}

void print_report(const npr::EvalReport& rep) {
  std::printf("%-8s %12s %12s %12s %12s\n", "ic", "l1", "l2", "linf", "rms");
  for (std::size_t i = 0; i < rep.per_ic.size(); ++i) {
    char label[16];
    std::snprintf(label, sizeof label, "%02zu", i);
    print_metrics_row(label, rep.per_ic[i].err);
  }
  print_metrics_row("mean", rep.mean);
  std::printf("worst linf over ics: %.5e\n", rep.linf_worst);
}

std::string ic_tag(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "ic%02zu", i);
  return buf;
}

int cmd_train(const Options& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  npr::RunConfig rc = load_config(opt);
  fs::create_directories(rc.out_dir);

  std::printf("training %s model, %zu parameters, %lld steps, seed %llu\n",
              kind_label(rc.train.model.kind), npr::model_param_count(rc.train.model),
              rc.train.n_steps, static_cast<unsigned long long>(rc.train.seed));
  npr::ProgressSink sink = [&](const npr::StepStats& s) {
    std::printf("step %6lld/%lld  lr %.3e  loss %.6e  (pde %.3e ic %.3e bc %.3e)\n", s.step,
                rc.train.n_steps, s.lr, s.loss_total, s.loss_pde, s.loss_ic, s.loss_bc);
    std::fflush(stdout);
  };
  npr::TrainResult res = npr::train(rc.train, sink);

  npr::Checkpoint cp;
  cp.model = rc.train.model;
  cp.seed = rc.train.seed;
  cp.steps = res.steps_done;
  cp.params = res.params;
  const std::string ckpt = rc.out_dir + "/model.ckpt";
  const std::string progress = rc.out_dir + "/progress.csv";
  npr::save_checkpoint(ckpt, cp);
  npr::write_progress_csv(progress, res.history);

  if (!res.history.empty()) {
    const auto& last = res.history.back();
    std::printf("final losses: total %.6e  pde %.6e  ic %.6e  bc %.6e\n", last.loss_total,
                last.loss_pde, last.loss_ic, last.loss_bc);
  }
  std::printf("wrote %s and %s in %.1f s\n", ckpt.c_str(), progress.c_str(), seconds_since(t0));
  return 0;
}

int cmd_eval(const Options& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  npr::Checkpoint cp = npr::load_checkpoint(opt.checkpoint_path);
  npr::RunConfig rc = load_config(opt);
  npr::EvalConfig ec = npr::eval_config_from(rc, cp.model);
  npr::validate(ec);
  fs::create_directories(rc.out_dir);

  // One pass per IC: grids feed both the metric rows and the exported files.
  const std::vector<npr::ICSample> ics = npr::eval_ics(ec);
  npr::EvalReport rep;
  for (std::size_t i = 0; i < ics.size(); ++i) {
    npr::IcFields f = npr::evaluate_fields(ec, cp.params, ics[i]);
    npr::IcEval row;
    row.ic = ics[i];
    row.err = npr::compute_metrics(f.model, f.reference);
    rep.per_ic.push_back(row);
    const std::string base = rc.out_dir + "/" + ic_tag(i);
    npr::write_field_csv(base + "_model.csv", f.model);
    npr::write_field_csv(base + "_reference.csv", f.reference);
    npr::write_field_csv(base + "_diff.csv", f.diff);
  }
  for (const auto& row : rep.per_ic) {
    rep.mean.l1 += row.err.l1;
    rep.mean.l2 += row.err.l2;
    rep.mean.linf += row.err.linf;
    rep.mean.rms += row.err.rms;
    rep.linf_worst = std::max(rep.linf_worst, row.err.linf);
  }
  rep.mean.l1 /= rep.per_ic.size();
  rep.mean.l2 /= rep.per_ic.size();
  rep.mean.linf /= rep.per_ic.size();
  rep.mean.rms /= rep.per_ic.size();
  const std::string metrics = rc.out_dir + "/metrics.csv";
  npr::write_metrics_csv(metrics, rep);

  print_report(rep);
  std::printf("wrote %s and %zu field grids (%dx%d) in %.1f s\n", metrics.c_str(),
              3 * ics.size(), ec.nt, ec.nx, seconds_since(t0));
  return 0;
}

int cmd_finetune(const Options& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  npr::Checkpoint cp = npr::load_checkpoint(opt.checkpoint_path);
  if (cp.model.kind != npr::ModelKind::npr)
    throw npr::ConfigError("fine-tuning starts from an npr checkpoint, this one is " +
                           std::string(kind_label(cp.model.kind)));
  npr::RunConfig rc = load_config(opt);
  const npr::ICSample ic = npr::parse_ic_expr(opt.ic_expr);
  fs::create_directories(rc.out_dir);

  const int d_enc = cp.model.npr.hyper.d_input;
  npr::UnfoldedNet net = npr::unfold(cp.model.npr, cp.params, ic, d_enc);
  npr::ModelSpec dense;
  dense.kind = npr::ModelKind::dense_pinn;
  dense.dense = net.spec;

  npr::FinetuneConfig fc;
  fc.problem = rc.train.problem;
  fc.constraints = rc.train.constraints;
  fc.ic = ic;
  fc.loss = rc.train.loss;
  fc.adam = rc.train.adam;
  fc.seed = rc.train.seed;
  if (opt.steps_set) fc.n_steps = opt.steps;

  const npr::FieldGrid ref =
      npr::reference_field(rc.train.problem, ic, rc.eval_nt, rc.eval_nx, rc.eval_fd_substeps);
  const npr::FieldGrid before_field = npr::model_field(dense, net.params, ic, d_enc,
                                                       rc.train.constraints, rc.eval_nt, rc.eval_nx);
  const npr::ErrorMetrics before = npr::compute_metrics(before_field, ref);

  std::printf("fine-tuning unfolded net (%zu parameters) for %lld steps on u0 = %s\n",
              net.params.size(), fc.n_steps, opt.ic_expr.c_str());
  npr::FinetuneResult res = npr::finetune(net.spec, net.params, fc);
  const npr::FieldGrid after_field = npr::model_field(dense, res.params, ic, d_enc,
                                                      rc.train.constraints, rc.eval_nt, rc.eval_nx);
  const npr::ErrorMetrics after = npr::compute_metrics(after_field, ref);

  npr::Checkpoint out;
  out.model = dense;
  out.seed = fc.seed;
  out.steps = res.steps_done;
  out.params = res.params;
  const std::string ckpt = rc.out_dir + "/finetuned.ckpt";
  npr::save_checkpoint(ckpt, out);

  const std::string metrics = rc.out_dir + "/finetune_metrics.csv";
  {
    std::ofstream f(metrics, std::ios::binary);
    if (!f) throw npr::IoError("cannot write " + metrics);
    f.precision(17);
    f << "when, l1, l2, linf, rms\n";
    f << "before, " << before.l1 << ", " << before.l2 << ", " << before.linf << ", " << before.rms
      << "\n";
    f << "after, " << after.l1 << ", " << after.l2 << ", " << after.linf << ", " << after.rms
      << "\n";
    if (!f) throw npr::IoError("cannot write " + metrics);
  }
  npr::write_field_csv(rc.out_dir + "/finetuned_model.csv", after_field);
  npr::write_field_csv(rc.out_dir + "/finetuned_reference.csv", ref);
  npr::write_field_csv(rc.out_dir + "/finetuned_diff.csv", npr::abs_diff(after_field, ref));

  std::printf("%-8s %12s %12s %12s %12s\n", "", "l1", "l2", "linf", "rms");
  print_metrics_row("before", before);
  print_metrics_row("after", after);
  if (after.l2 > 0.0)
    std::printf("l2 reduction: %.2fx\n", before.l2 / after.l2);
  std::printf("wrote %s, metrics and three field grids in %.1f s\n", ckpt.c_str(),
              seconds_since(t0));
  return 0;
}

int cmd_render(const Options& opt) {
  const npr::FieldGrid g = npr::read_field_csv(opt.render_in);
  std::string out = opt.out;
  if (out.empty()) out = fs::path(opt.render_in).replace_extension(".pgm").string();
  npr::write_pgm_heatmap(out, g);
  std::printf("wrote %s (%dx%d) and %s.range.txt\n", out.c_str(), g.nx, g.nt, out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  Options opt;
  CLI::App app{"physics-informed operator learning for 1-D initial-boundary-value problems"};
  app.require_subcommand(1);

  auto add_common = [&](CLI::App* cmd, bool needs_config) {
    auto* cfg = cmd->add_option("--config", opt.config_path, "run configuration (JSON)");
    if (needs_config) cfg->required();
    cmd->add_option("--out", opt.out, "output directory (overrides the config)");
    cmd->add_flag("--deterministic", opt.deterministic, "single worker, fixed draws");
    cmd->add_option("--seed", opt.seed, "override the config seed")
        ->each([&](const std::string&) { opt.seed_set = true; });
  };

  CLI::App* train = app.add_subcommand("train", "train a model and write a checkpoint");
  add_common(train, true);
  train->add_option("--steps", opt.steps, "override train.n_steps")
      ->each([&](const std::string&) { opt.steps_set = true; });
  train->add_option("--model", opt.model_kind, "override model.kind")
      ->check(CLI::IsMember({"npr", "deeponet"}));

  CLI::App* eval = app.add_subcommand("eval", "held-out IC metrics and field grids");
  add_common(eval, true);
  eval->add_option("--checkpoint", opt.checkpoint_path, "trained model")->required();
  eval->add_option("--grid", opt.grid, "evaluation grid, NTxNX");

  CLI::App* finetune = app.add_subcommand("finetune", "unfold a checkpoint and adapt it to one IC");
  add_common(finetune, true);
  finetune->add_option("--checkpoint", opt.checkpoint_path, "trained npr model")->required();
  finetune->add_option("--ic", opt.ic_expr, "initial condition, e.g. \"5*x + 3*sin(4*pi*x)\"")
      ->required();
  finetune->add_option("--steps", opt.steps, "fine-tune steps (default 200)")
      ->each([&](const std::string&) { opt.steps_set = true; });
  finetune->add_option("--grid", opt.grid, "before/after metric grid, NTxNX");

  CLI::App* render = app.add_subcommand("render", "field CSV to grayscale PGM heatmap");
  render->add_option("input", opt.render_in, "field CSV")->required();
  render->add_option("--out", opt.out, "output PGM path (default: input with .pgm)");

  try {
    app.parse(argc, argv);
    if (opt.deterministic) setenv("NPR_THREADS", "1", 1);
    if (train->parsed()) return cmd_train(opt);
    if (eval->parsed()) return cmd_eval(opt);
    if (finetune->parsed()) return cmd_finetune(opt);
    return cmd_render(opt);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const npr::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const npr::NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return 3;
  } catch (const npr::IoError& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
