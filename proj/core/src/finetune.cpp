#include "npr/finetune.hpp"

#include <cmath>
#include <string>

namespace npr {

UnfoldedNet unfold_theta(const LowRankMlpSpec& spec, std::span<const double> theta) {
  validate(spec);
  if (theta.size() != lowrank_param_count(spec))
    throw ConfigError("unfold: parameter length mismatch");

  UnfoldedNet out;
  out.spec = spec.base;
  out.params.assign(dense_param_count(out.spec), 0.0);

  const LowRankLayout src = lowrank_layout(spec);
  const std::vector<DenseStageRef> dst = dense_layout(out.spec);
  const int d = spec.base.d_hidden;
  const int r = spec.rank;

  // input and read-out stages have identical shapes: copy straight through
  const auto copy_stage = [&](const DenseStageRef& from, const DenseStageRef& to) {
    const std::size_t nw = static_cast<std::size_t>(from.d_out) * from.d_in;
    for (std::size_t i = 0; i < nw; ++i) out.params[to.w + i] = theta[from.w + i];
    for (int i = 0; i < from.d_out; ++i)
      out.params[to.b + static_cast<std::size_t>(i)] = theta[from.b + static_cast<std::size_t>(i)];
  };
  copy_stage(src.input, dst.front());
  copy_stage(src.output, dst.back());

  // hidden transitions: W = A B materialized row by row
  for (std::size_t k = 0; k < src.hidden.size(); ++k) {
    const FactoredStageRef& f = src.hidden[k];
    const DenseStageRef& t = dst[k + 1];
    for (int i = 0; i < d; ++i) {
      const double* arow = theta.data() + f.a + static_cast<std::size_t>(i) * r;
      double* wrow = out.params.data() + t.w + static_cast<std::size_t>(i) * d;
      for (int j = 0; j < d; ++j) {
        double acc = 0.0;
        for (int q = 0; q < r; ++q)
          acc += arow[q] * theta[f.b_mat + static_cast<std::size_t>(q) * d + j];
        wrow[j] = acc;
      }
      out.params[t.b + static_cast<std::size_t>(i)] = theta[f.bias + static_cast<std::size_t>(i)];
    }
  }
  return out;
}

UnfoldedNet unfold(const HypernetSpec& spec, std::span<const double> hyper_params,
                   const ICSample& ic, int d_enc) {
  const std::vector<double> sensors = discretize(ic, d_enc);
  const ParamVector theta = decode_theta(spec, hyper_params, sensors);
  return unfold_theta(spec.target, theta);
}

void validate(const FinetuneConfig& cfg) {
  validate(cfg.problem);
  if (cfg.n_steps < 0) throw ConfigError("finetune: n_steps must be >= 0");
  if (cfg.batch_pde < 1) throw ConfigError("finetune: batch_pde must be >= 1");
  if (!cfg.constraints.hardcode_ic && cfg.batch_ic < 1)
    throw ConfigError("finetune: soft-IC term needs batch_ic >= 1");
  if (!cfg.constraints.hardcode_bc && cfg.batch_bc < 1)
    throw ConfigError("finetune: soft-BC term needs batch_bc >= 1");
  if (cfg.lr < 0.0) throw ConfigError("finetune: lr must be >= 0");
  if (cfg.progress_every < 0) throw ConfigError("finetune: progress_every must be >= 0");
}

FinetuneResult finetune(const MlpSpec& spec, std::span<const double> start,
                        const FinetuneConfig& requested) {
  FinetuneConfig cfg = requested;
  cfg.constraints.t_final = cfg.problem.t_final;
  cfg.constraints.bc_kind = bc_kind(cfg.problem);
  validate(cfg);
  validate(spec);
  if (start.size() != dense_param_count(spec))
    throw ConfigError("finetune: parameter length mismatch");

  FinetuneResult result;
  result.params.assign(start.begin(), start.end());
  if (cfg.n_steps == 0) return result;

  const std::size_t n_params = result.params.size();
  const bool ic_active = !cfg.constraints.hardcode_ic;
  const bool bc_active = !cfg.constraints.hardcode_bc;
  const int off_ic = cfg.batch_pde;
  const int off_bc = cfg.batch_pde + cfg.batch_ic;

  Tape tape;
  tape.reserve(n_params + 16384);
  const VarRange phi = tape.leaves(result.params);
  const std::size_t base = tape.mark();

  AdamState adam(n_params);
  ParamVector grad(n_params);

  for (long long step = 0; step < cfg.n_steps; ++step) {
    double loss_pde = 0.0, loss_ic = 0.0, loss_bc = 0.0;

    const auto run_term = [&](int batch, int offset, int term) {
      double sum = 0.0;
      for (int e = 0; e < batch; ++e) {
        Rng es(derive_stream(cfg.seed, rng_tag::finetune, static_cast<std::uint64_t>(step),
                             static_cast<std::uint64_t>(offset + e)));
        tape.rollback(base);
        Var gap;
        if (term == 0) {
          const double t = es.next_uniform(0.0, cfg.problem.t_final);
          const double x = es.next_unit();
          const ModelDerivs d =
              record_dense_derivs(tape, spec, phi, t, x, cfg.constraints, cfg.ic);
          gap = record_residual(tape, cfg.problem, d);
        } else if (term == 1) {
          const double x = es.next_unit();
          const Var u = record_dense_value(tape, spec, phi, 0.0, x, cfg.constraints, cfg.ic);
          gap = tape.axpb(u, 1.0, -eval_ic(cfg.ic, x));
        } else {
          const double t = es.next_uniform(0.0, cfg.problem.t_final);
          const double xb =
              (cfg.constraints.bc_kind == BcKind::dirichlet_both_ends && (offset + e) % 2 == 1)
                  ? 1.0
                  : 0.0;
          const Var u = record_dense_value(tape, spec, phi, t, xb, cfg.constraints, cfg.ic);
          gap = tape.axpb(u, 1.0, -eval_ic(cfg.ic, xb));
        }
        const Var loss = cfg.loss == LossKind::mae ? tape.abs(gap) : tape.mul(gap, gap);
        sum += tape.value(loss);
        tape.backward(loss, 1.0 / batch);
      }
      return sum / batch;
    };

    try {
      loss_pde = run_term(cfg.batch_pde, 0, 0);
      if (ic_active) loss_ic = run_term(cfg.batch_ic, off_ic, 1);
      if (bc_active) loss_bc = run_term(cfg.batch_bc, off_bc, 2);
      tape.copy_adjoints(phi, grad);
      tape.clear_adjoints(phi);

      const double total = loss_pde + loss_ic + loss_bc;
      if (!std::isfinite(total)) throw NumericError("non-finite loss");

      adam.apply(result.params, grad, cfg.lr, cfg.adam);
      tape.set_values(phi, result.params);
      result.steps_done = step + 1;

      const bool due = step == cfg.n_steps - 1 ||
                       (cfg.progress_every > 0 && step % cfg.progress_every == 0);
      if (due)
        result.history.push_back(
            {step, cfg.lr, LossWeights{}, loss_pde, loss_ic, loss_bc, total});
    } catch (const NumericError& e) {
      throw NumericError("fine-tune diverged at step " + std::to_string(step) + " (" + e.what() +
                         ")");
    }
  }
  return result;
}

}  // namespace npr
