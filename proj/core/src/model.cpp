#include "npr/model.hpp"

#include <string>

namespace npr {

void validate(const HypernetSpec& spec) {
  validate(spec.hyper);
  validate(spec.target);
  if (spec.target.base.d_input != 2 || spec.target.base.d_output != 1)
    throw ConfigError("hypernet: target must map (t, x) to a scalar");
  const std::size_t p = lowrank_param_count(spec.target);
  if (static_cast<std::size_t>(spec.hyper.d_output) != p)
    throw ConfigError("hypernet: hyper.d_output " + std::to_string(spec.hyper.d_output) +
                      " must equal the target parameter count " + std::to_string(p));
}

HypernetSpec make_hypernet_spec(int d_enc, int target_hidden, int rank, int hyper_hidden,
                                int n_hidden) {
  HypernetSpec spec;
  spec.target.base =
      MlpSpec{2, 1, n_hidden, target_hidden, Activation::sin};
  spec.target.rank = rank;
  spec.hyper = MlpSpec{d_enc, static_cast<int>(lowrank_param_count(spec.target)), n_hidden,
                       hyper_hidden, Activation::sin};
  validate(spec);
  return spec;
}

ParamVector decode_theta(const HypernetSpec& spec, std::span<const double> hyper_params,
                         std::span<const double> sensors) {
  return forward_dense<double>(spec.hyper, hyper_params, sensors);
}

double npr_eval(const HypernetSpec& spec, std::span<const double> hyper_params,
                std::span<const double> sensors, double t, double x, const ConstraintConfig& cfg,
                const ICSample& u0) {
  const ParamVector theta = decode_theta(spec, hyper_params, sensors);
  return target_eval<double>(spec.target, theta, t, x, cfg, u0);
}

// ---- tape recorders -----------------------------------------------------------

namespace {

// Affine sub-stage: one fused node per output neuron, outputs contiguous.
enum class InputKind { constant, scan, real, jet };

VarRange record_affine_block(Tape& tape, VarRange params, std::size_t w_off, std::size_t b_off,
                             int d_in, int d_out, VarRange h, InputKind kind) {
  VarRange out{0, d_out};
  for (int o = 0; o < d_out; ++o) {
    const VarRange w{params.first + static_cast<VarId>(w_off + static_cast<std::size_t>(o) * d_in),
                     d_in};
    const Var bias{params.first + static_cast<VarId>(b_off + static_cast<std::size_t>(o))};
    Var a;
    switch (kind) {
      case InputKind::constant: a = tape.affine_real(w, h, bias, true); break;
      case InputKind::scan: a = tape.affine(w, h, bias); break;
      case InputKind::real: a = tape.affine_real(w, h, bias, false); break;
      case InputKind::jet: a = tape.affine_jet(w, h, bias); break;
    }
    if (o == 0) out.first = a.id;
  }
  return out;
}

// B h with no bias (the narrow half of a factored stage).
VarRange record_matvec_block(Tape& tape, VarRange params, std::size_t w_off, int d_in, int d_out,
                             VarRange h, InputKind kind) {
  VarRange out{0, d_out};
  for (int o = 0; o < d_out; ++o) {
    const VarRange w{params.first + static_cast<VarId>(w_off + static_cast<std::size_t>(o) * d_in),
                     d_in};
    const Var a = kind == InputKind::jet ? tape.affine_jet(w, h, Var{})
                                         : tape.affine_real(w, h, Var{}, false);
    if (o == 0) out.first = a.id;
  }
  return out;
}

// Activation over a contiguous block; sub-stages stay one node wide so the
// result is contiguous too (relu = (v + |v|)/2 needs three passes).
VarRange record_activation_block(Tape& tape, Activation act, VarRange a) {
  VarRange out{0, a.count};
  switch (act) {
    case Activation::sin:
      for (std::int32_t o = 0; o < a.count; ++o) {
        const Var y = tape.sin(a[o]);
        if (o == 0) out.first = y.id;
      }
      return out;
    case Activation::tanh:
      for (std::int32_t o = 0; o < a.count; ++o) {
        const Var y = tape.tanh(a[o]);
        if (o == 0) out.first = y.id;
      }
      return out;
    case Activation::relu: {
      VarRange abs{0, a.count};
      for (std::int32_t o = 0; o < a.count; ++o) {
        const Var y = tape.abs(a[o]);
        if (o == 0) abs.first = y.id;
      }
      VarRange sum{0, a.count};
      for (std::int32_t o = 0; o < a.count; ++o) {
        const Var y = tape.add(a[o], abs[o]);
        if (o == 0) sum.first = y.id;
      }
      for (std::int32_t o = 0; o < a.count; ++o) {
        const Var y = tape.axpb(sum[o], 0.5, 0.0);
        if (o == 0) out.first = y.id;
      }
      return out;
    }
  }
  throw ConfigError("unknown activation");
}

InputKind payload_kind(const Tape& tape, VarRange h) {
  return tape.is_jet(Var{h.first}) ? InputKind::jet : InputKind::real;
}

}  // namespace

VarRange record_mlp(Tape& tape, const MlpSpec& spec, VarRange params, VarRange input,
                    bool input_is_constant) {
  if (params.count != static_cast<std::int32_t>(dense_param_count(spec)))
    throw ConfigError("record_mlp: parameter range length mismatch");
  if (input.count != spec.d_input) throw ConfigError("record_mlp: input range length mismatch");
  VarRange h = input;
  bool first = true;
  for (const DenseStageRef& s : dense_layout(spec)) {
    // the first stage may see a mixed (t, x) payload, so scan it; later stage
    // inputs all share one payload kind
    const InputKind kind =
        first ? (input_is_constant ? InputKind::constant : InputKind::scan) : payload_kind(tape, h);
    VarRange a = record_affine_block(tape, params, s.w, s.b, s.d_in, s.d_out, h, kind);
    h = s.activated ? record_activation_block(tape, spec.activation, a) : a;
    first = false;
  }
  return h;
}

Var record_target(Tape& tape, const LowRankMlpSpec& spec, VarRange theta, Var t, Var x) {
  if (theta.count != static_cast<std::int32_t>(lowrank_param_count(spec)))
    throw ConfigError("record_target: theta range length mismatch");
  VarRange in{t.id, 2};
  if (x.id != t.id + 1) {  // one-node copies keep the pair adjacent
    const Var t2 = tape.axpb(t, 1.0, 0.0);
    (void)tape.axpb(x, 1.0, 0.0);
    in = VarRange{t2.id, 2};
  }
  const LowRankLayout lay = lowrank_layout(spec);
  const Activation act = spec.base.activation;

  VarRange a = record_affine_block(tape, theta, lay.input.w, lay.input.b, lay.input.d_in,
                                   lay.input.d_out, in, InputKind::scan);
  VarRange h = record_activation_block(tape, act, a);
  const InputKind kind = payload_kind(tape, h);
  for (const FactoredStageRef& s : lay.hidden) {
    const VarRange mid = record_matvec_block(tape, theta, s.b_mat, s.d_hidden, s.rank, h, kind);
    a = record_affine_block(tape, theta, s.a, s.bias, s.rank, s.d_hidden, mid, kind);
    h = record_activation_block(tape, act, a);
  }
  a = record_affine_block(tape, theta, lay.output.w, lay.output.b, lay.output.d_in,
                          lay.output.d_out, h, kind);
  return Var{a.first};
}

Var record_constraints(Tape& tape, Var raw, Var t, Var x, const ConstraintConfig& cfg,
                       const ICSample& u0) {
  Var v = raw;
  if (cfg.hardcode_bc) {
    const double left = eval_ic(u0, 0.0);
    if (cfg.bc_kind == BcKind::dirichlet_both_ends) {
      const double right = eval_ic(u0, 1.0);
      const Var bump = tape.mul(x, tape.axpb(x, -1.0, 1.0));  // x (1 - x)
      v = tape.add(tape.mul(v, bump), tape.axpb(x, right - left, left));
    } else {
      v = tape.add(tape.mul(x, v), tape.axpb(x, -left, left));
    }
  }
  if (cfg.hardcode_ic) {
    const double T = cfg.t_final;
    const double xv = tape.value(x);
    const Jet2 u0j = tape.is_jet(x) ? eval_ic(u0, Jet2::seed(xv))
                                    : Jet2::constant(eval_ic(u0, xv));
    const Var ic_part = tape.mul_const_jet(tape.axpb(t, -1.0 / T, 1.0), u0j);
    v = tape.add(tape.mul(v, tape.axpb(t, 1.0 / T, 0.0)), ic_part);
  }
  return v;
}

ModelDerivs record_npr_derivs(Tape& tape, const HypernetSpec& spec, VarRange phi,
                              std::span<const double> sensors, double t, double x,
                              const ConstraintConfig& cfg, const ICSample& u0) {
  const VarRange sens = tape.constants(sensors);
  const VarRange theta = record_mlp(tape, spec.hyper, phi, sens, true);

  const Var t1 = tape.seeded(t);
  const Var x1 = tape.constant(x);
  const Var u1 = record_constraints(tape, record_target(tape, spec.target, theta, t1, x1), t1, x1,
                                    cfg, u0);
  const Var u_t = tape.extract_d1(u1);

  const Var t2 = tape.constant(t);
  const Var x2 = tape.seeded(x);
  const Var u2 = record_constraints(tape, record_target(tape, spec.target, theta, t2, x2), t2, x2,
                                    cfg, u0);
  return {tape.extract_val(u2), u_t, tape.extract_d1(u2), tape.extract_d2(u2)};
}

Var record_npr_value(Tape& tape, const HypernetSpec& spec, VarRange phi,
                     std::span<const double> sensors, double t, double x,
                     const ConstraintConfig& cfg, const ICSample& u0) {
  const VarRange sens = tape.constants(sensors);
  const VarRange theta = record_mlp(tape, spec.hyper, phi, sens, true);
  const Var tt = tape.constant(t);
  const Var xx = tape.constant(x);
  return record_constraints(tape, record_target(tape, spec.target, theta, tt, xx), tt, xx, cfg,
                            u0);
}

ModelDerivs record_dense_derivs(Tape& tape, const MlpSpec& spec, VarRange params, double t,
                                double x, const ConstraintConfig& cfg, const ICSample& u0) {
  const Var t1 = tape.seeded(t);
  const Var x1 = tape.constant(x);
  Var raw = record_mlp(tape, spec, params, VarRange{t1.id, 2}, false)[0];
  const Var u1 = record_constraints(tape, raw, t1, x1, cfg, u0);
  const Var u_t = tape.extract_d1(u1);

  const Var t2 = tape.constant(t);
  const Var x2 = tape.seeded(x);
  raw = record_mlp(tape, spec, params, VarRange{t2.id, 2}, false)[0];
  const Var u2 = record_constraints(tape, raw, t2, x2, cfg, u0);
  return {tape.extract_val(u2), u_t, tape.extract_d1(u2), tape.extract_d2(u2)};
}

Var record_dense_value(Tape& tape, const MlpSpec& spec, VarRange params, double t, double x,
                       const ConstraintConfig& cfg, const ICSample& u0) {
  const Var tt = tape.constant(t);
  const Var xx = tape.constant(x);
  const Var raw = record_mlp(tape, spec, params, VarRange{tt.id, 2}, false)[0];
  return record_constraints(tape, raw, tt, xx, cfg, u0);
}

}  // namespace npr
