#include "npr/deeponet.hpp"

namespace npr {

void validate(const DeepONetSpec& spec) {
  validate(spec.branch);
  validate(spec.trunk);
  if (spec.p_lat < 1) throw ConfigError("deeponet: p_lat must be >= 1");
  if (spec.branch.d_output != spec.p_lat || spec.trunk.d_output != spec.p_lat)
    throw ConfigError("deeponet: branch and trunk must both output p_lat values");
  if (spec.trunk.d_input != 2) throw ConfigError("deeponet: trunk input must be (t, x)");
}

DeepONetSpec make_deeponet_spec(int d_enc, int branch_hidden, int trunk_hidden, int p_lat,
                                int n_hidden) {
  DeepONetSpec spec;
  spec.p_lat = p_lat;
  spec.branch = MlpSpec{d_enc, p_lat, n_hidden, branch_hidden, Activation::sin};
  spec.trunk = MlpSpec{2, p_lat, n_hidden, trunk_hidden, Activation::sin};
  validate(spec);
  return spec;
}

std::pair<std::size_t, std::size_t> deeponet_param_counts(const DeepONetSpec& spec) {
  return {dense_param_count(spec.trunk), dense_param_count(spec.branch)};
}

std::size_t deeponet_total_params(const DeepONetSpec& spec) {
  const auto [n_trunk, n_branch] = deeponet_param_counts(spec);
  return n_trunk + n_branch;
}

ParamVector init_deeponet(const DeepONetSpec& spec, Rng& rng) {
  ParamVector p = init_dense(spec.branch, rng);
  const ParamVector tr = init_dense(spec.trunk, rng);
  p.insert(p.end(), tr.begin(), tr.end());
  return p;
}

namespace {

struct Blocks {
  VarRange branch;
  VarRange trunk;
};

Blocks split_params(const DeepONetSpec& spec, VarRange params) {
  const auto [n_trunk, n_branch] = deeponet_param_counts(spec);
  if (params.count != static_cast<std::int32_t>(n_trunk + n_branch))
    throw ConfigError("deeponet recording: parameter range length mismatch");
  return {VarRange{params.first, static_cast<std::int32_t>(n_branch)},
          VarRange{params.first + static_cast<std::int32_t>(n_branch),
                   static_cast<std::int32_t>(n_trunk)}};
}

}  // namespace

ModelDerivs record_deeponet_derivs(Tape& tape, const DeepONetSpec& spec, VarRange params,
                                   std::span<const double> sensors, double t, double x,
                                   const ConstraintConfig& cfg, const ICSample& u0) {
  const Blocks blk = split_params(spec, params);
  const VarRange sens = tape.constants(sensors);
  const VarRange lat = record_mlp(tape, spec.branch, blk.branch, sens, true);

  const Var t1 = tape.seeded(t);
  const Var x1 = tape.constant(x);
  const VarRange tr1 = record_mlp(tape, spec.trunk, blk.trunk, VarRange{t1.id, 2}, false);
  const Var raw1 = tape.affine_jet(lat, tr1, Var{});
  const Var u1 = record_constraints(tape, raw1, t1, x1, cfg, u0);
  const Var u_t = tape.extract_d1(u1);

  const Var t2 = tape.constant(t);
  const Var x2 = tape.seeded(x);
  const VarRange tr2 = record_mlp(tape, spec.trunk, blk.trunk, VarRange{t2.id, 2}, false);
  const Var raw2 = tape.affine_jet(lat, tr2, Var{});
  const Var u2 = record_constraints(tape, raw2, t2, x2, cfg, u0);
  return {tape.extract_val(u2), u_t, tape.extract_d1(u2), tape.extract_d2(u2)};
}

Var record_deeponet_value(Tape& tape, const DeepONetSpec& spec, VarRange params,
                          std::span<const double> sensors, double t, double x,
                          const ConstraintConfig& cfg, const ICSample& u0) {
  const Blocks blk = split_params(spec, params);
  const VarRange sens = tape.constants(sensors);
  const VarRange lat = record_mlp(tape, spec.branch, blk.branch, sens, true);
  const Var tt = tape.constant(t);
  const Var xx = tape.constant(x);
  const VarRange tr = record_mlp(tape, spec.trunk, blk.trunk, VarRange{tt.id, 2}, false);
  const Var raw = tape.affine_real(lat, tr, Var{}, false);
  return record_constraints(tape, raw, tt, xx, cfg, u0);
}

}  // namespace npr
