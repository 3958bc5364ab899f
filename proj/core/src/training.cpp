#include "npr/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "npr/threads.hpp"

namespace npr {

// ---- model dispatch -----------------------------------------------------------

void validate(const ModelSpec& spec) {
  switch (spec.kind) {
    case ModelKind::npr:
      validate(spec.npr);
      return;
    case ModelKind::deeponet:
      validate(spec.deeponet);
      return;
    case ModelKind::dense_pinn:
      validate(spec.dense);
      if (spec.dense.d_input != 2 || spec.dense.d_output != 1)
        throw ConfigError("dense model: needs d_input 2 ((t, x)) and d_output 1");
      return;
  }
  throw ConfigError("unknown model kind");
}

std::size_t model_param_count(const ModelSpec& spec) {
  switch (spec.kind) {
    case ModelKind::npr: return dense_param_count(spec.npr.hyper);
    case ModelKind::deeponet: return deeponet_total_params(spec.deeponet);
    case ModelKind::dense_pinn: return dense_param_count(spec.dense);
  }
  throw ConfigError("unknown model kind");
}

ParamVector init_model_params(const ModelSpec& spec, std::uint64_t seed) {
  Rng rng(derive_stream(seed, rng_tag::init));
  switch (spec.kind) {
    case ModelKind::npr: return init_dense(spec.npr.hyper, rng, 0.01);
    case ModelKind::deeponet: return init_deeponet(spec.deeponet, rng);
    case ModelKind::dense_pinn: return init_dense(spec.dense, rng);
  }
  throw ConfigError("unknown model kind");
}

ModelDerivs record_model_derivs(Tape& tape, const ModelSpec& spec, VarRange phi,
                                std::span<const double> sensors, double t, double x,
                                const ConstraintConfig& cfg, const ICSample& u0) {
  switch (spec.kind) {
    case ModelKind::npr: return record_npr_derivs(tape, spec.npr, phi, sensors, t, x, cfg, u0);
    case ModelKind::deeponet:
      return record_deeponet_derivs(tape, spec.deeponet, phi, sensors, t, x, cfg, u0);
    case ModelKind::dense_pinn:
      return record_dense_derivs(tape, spec.dense, phi, t, x, cfg, u0);
  }
  throw ConfigError("unknown model kind");
}

Var record_model_value(Tape& tape, const ModelSpec& spec, VarRange phi,
                       std::span<const double> sensors, double t, double x,
                       const ConstraintConfig& cfg, const ICSample& u0) {
  switch (spec.kind) {
    case ModelKind::npr: return record_npr_value(tape, spec.npr, phi, sensors, t, x, cfg, u0);
    case ModelKind::deeponet:
      return record_deeponet_value(tape, spec.deeponet, phi, sensors, t, x, cfg, u0);
    case ModelKind::dense_pinn:
      return record_dense_value(tape, spec.dense, phi, t, x, cfg, u0);
  }
  throw ConfigError("unknown model kind");
}

double model_eval(const ModelSpec& spec, std::span<const double> params,
                  std::span<const double> sensors, double t, double x,
                  const ConstraintConfig& cfg, const ICSample& u0) {
  switch (spec.kind) {
    case ModelKind::npr: return npr_eval(spec.npr, params, sensors, t, x, cfg, u0);
    case ModelKind::deeponet:
      return deeponet_eval<double>(spec.deeponet, params, sensors, t, x, cfg, u0);
    case ModelKind::dense_pinn: return dense_eval<double>(spec.dense, params, t, x, cfg, u0);
  }
  throw ConfigError("unknown model kind");
}

// ---- optimizer ------------------------------------------------------------------

void AdamState::apply(std::span<double> params, std::span<const double> grad, double lr,
                      const AdamConfig& cfg) {
  if (params.size() != m.size() || grad.size() != m.size())
    throw ConfigError("adam: parameter / gradient / state size mismatch");
  ++t;
  const double corr1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double corr2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < m.size(); ++i) {
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
    params[i] -= lr * (m[i] / corr1) / (std::sqrt(v[i] / corr2) + cfg.eps);
  }
}

double lr_at(long long step, long long n_steps, double lr_peak, double warmup_frac) {
  if (n_steps < 1 || step < 0 || step >= n_steps)
    throw ConfigError("lr schedule: step outside [0, n_steps)");
  const long long warm =
      std::max<long long>(1, std::llround(warmup_frac * static_cast<double>(n_steps)));
  if (step < warm) return lr_peak * static_cast<double>(step + 1) / static_cast<double>(warm);
  return lr_peak * static_cast<double>(n_steps - step) / static_cast<double>(n_steps - warm);
}

// ---- balanced loss weights --------------------------------------------------------

LossWeights update_loss_weights(const LossWeights& prev, double g_pde, double g_ic, double g_bc,
                                bool ic_active, bool bc_active) {
  const double total = g_pde + (ic_active ? g_ic : 0.0) + (bc_active ? g_bc : 0.0);
  if (!(total > 0.0) || !std::isfinite(total)) return prev;
  LossWeights w = prev;
  if (g_pde > 0.0) w.pde = total / g_pde;
  if (ic_active && g_ic > 0.0) w.ic = total / g_ic;
  if (bc_active && g_bc > 0.0) w.bc = total / g_bc;
  return w;
}

// ---- training -------------------------------------------------------------------

ICSample draw_ic(const IcFamily& family, Rng& rng) {
  switch (family.kind) {
    case IcFamilyKind::fourier:
      return sample_fourier_ic(family.fourier_modes, family.fourier_amp, rng,
                               family.shrink_high_modes);
    case IcFamilyKind::affine:
      return sample_affine_ic(family.affine_a_low, family.affine_a_high, family.affine_b_low,
                              family.affine_b_high, rng);
    case IcFamilyKind::fixed: return family.fixed;
  }
  throw ConfigError("unknown ic family");
}

void validate(const TrainConfig& cfg) {
  validate(cfg.model);
  validate(cfg.problem);
  if (cfg.d_enc < 2) throw ConfigError("train: d_enc must be >= 2");
  if (cfg.model.kind == ModelKind::npr && cfg.model.npr.hyper.d_input != cfg.d_enc)
    throw ConfigError("train: hyper d_input must equal d_enc");
  if (cfg.model.kind == ModelKind::deeponet && cfg.model.deeponet.branch.d_input != cfg.d_enc)
    throw ConfigError("train: branch d_input must equal d_enc");
  if (cfg.model.kind == ModelKind::dense_pinn && cfg.ics.kind != IcFamilyKind::fixed)
    throw ConfigError("train: a dense model fits one IC; use the fixed ic family");
  if (cfg.n_steps < 0) throw ConfigError("train: n_steps must be >= 0");
  if (cfg.batch_pde < 1) throw ConfigError("train: batch_pde must be >= 1");
  if (!cfg.constraints.hardcode_ic && cfg.batch_ic < 1)
    throw ConfigError("train: soft-IC term needs batch_ic >= 1");
  if (!cfg.constraints.hardcode_bc && cfg.batch_bc < 1)
    throw ConfigError("train: soft-BC term needs batch_bc >= 1");
  if (cfg.lr_peak < 0.0) throw ConfigError("train: lr_peak must be >= 0");
  if (cfg.warmup_frac < 0.0 || cfg.warmup_frac > 1.0)
    throw ConfigError("train: warmup_frac must lie in [0, 1]");
  if (cfg.weight_update_every < 0) throw ConfigError("train: weight_update_every must be >= 0");
  if (cfg.n_chunks < 1) throw ConfigError("train: n_chunks must be >= 1");
  if (cfg.progress_every < 0) throw ConfigError("train: progress_every must be >= 0");
}

Var record_residual(Tape& tape, const IbvpSpec& prob, const ModelDerivs& d) {
  if (prob.equation == Equation::heat)
    return tape.sub(d.u_t, tape.axpb(d.u_xx, prob.kappa, 0.0));
  return tape.add(d.u_t, tape.mul(d.u, d.u_x));
}

namespace {

enum class Term { pde, ic, bc };

struct ChunkState {
  Tape tape;
  VarRange phi;
  std::size_t base_mark = 0;
  double loss_sum = 0.0;
  ParamVector grad;
};

Var record_element_loss(ChunkState& cs, const TrainConfig& cfg, Term term, std::uint64_t tag,
                        long long step, int element) {
  Rng es(derive_stream(cfg.seed, tag, static_cast<std::uint64_t>(step),
                       static_cast<std::uint64_t>(element)));
  const ICSample ic = draw_ic(cfg.ics, es);
  std::vector<double> sensors;
  if (cfg.model.kind != ModelKind::dense_pinn) sensors = discretize(ic, cfg.d_enc);

  Var gap;  // residual or constraint violation
  if (term == Term::pde) {
    const double t = es.next_uniform(0.0, cfg.problem.t_final);
    const double x = es.next_unit();
    const ModelDerivs d =
        record_model_derivs(cs.tape, cfg.model, cs.phi, sensors, t, x, cfg.constraints, ic);
    gap = record_residual(cs.tape, cfg.problem, d);
  } else if (term == Term::ic) {
    const double x = es.next_unit();
    const Var u =
        record_model_value(cs.tape, cfg.model, cs.phi, sensors, 0.0, x, cfg.constraints, ic);
    gap = cs.tape.axpb(u, 1.0, -eval_ic(ic, x));
  } else {
    const double t = es.next_uniform(0.0, cfg.problem.t_final);
    const double xb =
        (cfg.constraints.bc_kind == BcKind::dirichlet_both_ends && element % 2 == 1) ? 1.0 : 0.0;
    const Var u =
        record_model_value(cs.tape, cfg.model, cs.phi, sensors, t, xb, cfg.constraints, ic);
    gap = cs.tape.axpb(u, 1.0, -eval_ic(ic, xb));
  }
  return cfg.loss == LossKind::mae ? cs.tape.abs(gap) : cs.tape.mul(gap, gap);
}

/// One loss term over the fixed chunk grid: records, backwards with
/// seed_scale per element, sums the per-chunk loss values.  With collect_grad
/// the leaf adjoints are moved into each chunk's grad buffer and cleared.
/// Returns the term's mean loss (chunk-ordered reduction).
double process_term(std::vector<ChunkState>& chunks, const TrainConfig& cfg, Term term,
                    std::uint64_t tag, long long step, int batch, int element_offset,
                    double seed_scale, bool collect_grad) {
  const int n_chunks = static_cast<int>(chunks.size());
  parallel_chunks(n_chunks, [&](int c) {
    ChunkState& cs = chunks[c];
    cs.loss_sum = 0.0;
    const int begin = static_cast<int>(static_cast<long long>(batch) * c / n_chunks);
    const int end = static_cast<int>(static_cast<long long>(batch) * (c + 1) / n_chunks);
    for (int e = begin; e < end; ++e) {
      cs.tape.rollback(cs.base_mark);
      const Var loss = record_element_loss(cs, cfg, term, tag, step, element_offset + e);
      cs.loss_sum += cs.tape.value(loss);
      cs.tape.backward(loss, seed_scale);
    }
    if (collect_grad) {
      cs.tape.copy_adjoints(cs.phi, cs.grad);
      cs.tape.clear_adjoints(cs.phi);
    }
  });
  double sum = 0.0;
  for (const ChunkState& cs : chunks) sum += cs.loss_sum;
  return sum / batch;
}

/// Chunk-ordered gradient reduction into `out`.
void reduce_chunk_grads(const std::vector<ChunkState>& chunks, ParamVector& out) {
  std::fill(out.begin(), out.end(), 0.0);
  for (const ChunkState& cs : chunks)
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += cs.grad[i];
}

double l2_norm(const ParamVector& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

TrainResult train(const TrainConfig& requested, const ProgressSink& sink) {
  TrainConfig cfg = requested;
  cfg.constraints.t_final = cfg.problem.t_final;
  cfg.constraints.bc_kind = bc_kind(cfg.problem);
  validate(cfg);

  TrainResult result;
  result.params = init_model_params(cfg.model, cfg.seed);
  if (cfg.n_steps == 0) return result;

  const std::size_t n_params = result.params.size();
  const bool ic_active = !cfg.constraints.hardcode_ic;
  const bool bc_active = !cfg.constraints.hardcode_bc;
  // element index blocks stay fixed whether or not the soft terms are active
  const int off_ic = cfg.batch_pde;
  const int off_bc = cfg.batch_pde + cfg.batch_ic;

  std::vector<ChunkState> chunks(static_cast<std::size_t>(cfg.n_chunks));
  for (ChunkState& cs : chunks) {
    cs.tape.reserve(n_params + 16384);
    cs.phi = cs.tape.leaves(result.params);
    cs.base_mark = cs.tape.mark();
    cs.grad.assign(n_params, 0.0);
  }

  AdamState adam(n_params);
  ParamVector grad(n_params);

  for (long long step = 0; step < cfg.n_steps; ++step) {
    try {
      if (cfg.weight_update_every > 0 && step % cfg.weight_update_every == 0) {
        // fresh batch, used only to measure per-term gradient norms
        double g_pde = 0.0, g_ic = 0.0, g_bc = 0.0;
        process_term(chunks, cfg, Term::pde, rng_tag::refresh, step, cfg.batch_pde, 0,
                     1.0 / cfg.batch_pde, true);
        reduce_chunk_grads(chunks, grad);
        g_pde = l2_norm(grad);
        if (ic_active) {
          process_term(chunks, cfg, Term::ic, rng_tag::refresh, step, cfg.batch_ic, off_ic,
                       1.0 / cfg.batch_ic, true);
          reduce_chunk_grads(chunks, grad);
          g_ic = l2_norm(grad);
        }
        if (bc_active) {
          process_term(chunks, cfg, Term::bc, rng_tag::refresh, step, cfg.batch_bc, off_bc,
                       1.0 / cfg.batch_bc, true);
          reduce_chunk_grads(chunks, grad);
          g_bc = l2_norm(grad);
        }
        result.weights =
            update_loss_weights(result.weights, g_pde, g_ic, g_bc, ic_active, bc_active);
        result.refreshes.push_back({step, g_pde, g_ic, g_bc, result.weights});
      }

      const double lr = lr_at(step, cfg.n_steps, cfg.lr_peak, cfg.warmup_frac);
      const double loss_pde =
          process_term(chunks, cfg, Term::pde, rng_tag::train, step, cfg.batch_pde, 0,
                       result.weights.pde / cfg.batch_pde, false);
      double loss_ic = 0.0, loss_bc = 0.0;
      if (ic_active)
        loss_ic = process_term(chunks, cfg, Term::ic, rng_tag::train, step, cfg.batch_ic, off_ic,
                               result.weights.ic / cfg.batch_ic, false);
      if (bc_active)
        loss_bc = process_term(chunks, cfg, Term::bc, rng_tag::train, step, cfg.batch_bc, off_bc,
                               result.weights.bc / cfg.batch_bc, false);
      parallel_chunks(cfg.n_chunks, [&](int c) {
        chunks[static_cast<std::size_t>(c)].tape.copy_adjoints(
            chunks[static_cast<std::size_t>(c)].phi, chunks[static_cast<std::size_t>(c)].grad);
        chunks[static_cast<std::size_t>(c)].tape.clear_adjoints(
            chunks[static_cast<std::size_t>(c)].phi);
      });
      reduce_chunk_grads(chunks, grad);

      const double total = result.weights.pde * loss_pde +
                           (ic_active ? result.weights.ic * loss_ic : 0.0) +
                           (bc_active ? result.weights.bc * loss_bc : 0.0);
      if (!std::isfinite(total)) throw NumericError("non-finite loss");

      adam.apply(result.params, grad, lr, cfg.adam);
      for (ChunkState& cs : chunks) cs.tape.set_values(cs.phi, result.params);
      result.steps_done = step + 1;

      const bool due = step == cfg.n_steps - 1 ||
                       (cfg.progress_every > 0 && step % cfg.progress_every == 0);
      if (due) {
        const StepStats row{step, lr, result.weights, loss_pde, loss_ic, loss_bc, total};
        result.history.push_back(row);
        if (sink) sink(row);
      }
    } catch (const NumericError& e) {
      throw NumericError("training diverged at step " + std::to_string(step) + " (" +
                         e.what() + ")");
    }
  }
  return result;
}

void write_progress_csv(const std::string& path, const std::vector<StepStats>& rows) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f << "step, lr, lambda_pde, lambda_ic, lambda_bc, loss_pde, loss_ic, loss_bc, loss_total\n";
  f.precision(17);
  for (const StepStats& r : rows)
    f << r.step << ", " << r.lr << ", " << r.weights.pde << ", " << r.weights.ic << ", "
      << r.weights.bc << ", " << r.loss_pde << ", " << r.loss_ic << ", " << r.loss_bc << ", "
      << r.loss_total << "\n";
  if (!f) throw IoError("write failed for " + path);
}

}  // namespace npr
