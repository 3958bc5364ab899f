#include "npr/mlp.hpp"

#include <cmath>
#include <string>

namespace npr {

void validate(const MlpSpec& spec) {
  if (spec.d_input < 1 || spec.d_output < 1 || spec.d_hidden < 1)
    throw ConfigError("mlp spec: dimensions must be >= 1");
  if (spec.n_hidden < 1) throw ConfigError("mlp spec: n_hidden must be >= 1");
}

void validate(const LowRankMlpSpec& spec) {
  validate(spec.base);
  if (spec.rank < 1 || spec.rank > spec.base.d_hidden)
    throw ConfigError("low-rank spec: rank must satisfy 1 <= rank <= d_hidden (got rank " +
                      std::to_string(spec.rank) + ", d_hidden " +
                      std::to_string(spec.base.d_hidden) + ")");
}

std::size_t dense_param_count(const MlpSpec& spec) {
  const auto din = static_cast<std::size_t>(spec.d_input);
  const auto dout = static_cast<std::size_t>(spec.d_output);
  const auto dh = static_cast<std::size_t>(spec.d_hidden);
  const auto nh = static_cast<std::size_t>(spec.n_hidden);
  return din * dh + dh + (nh - 1) * (dh * dh + dh) + dh * dout + dout;
}

std::size_t lowrank_param_count(const LowRankMlpSpec& spec) {
  const auto din = static_cast<std::size_t>(spec.base.d_input);
  const auto dout = static_cast<std::size_t>(spec.base.d_output);
  const auto dh = static_cast<std::size_t>(spec.base.d_hidden);
  const auto nh = static_cast<std::size_t>(spec.base.n_hidden);
  const auto r = static_cast<std::size_t>(spec.rank);
  return din * dh + dh + (nh - 1) * (2 * r * dh + dh) + dh * dout + dout;
}

std::vector<DenseStageRef> dense_layout(const MlpSpec& spec) {
  validate(spec);
  std::vector<DenseStageRef> stages;
  stages.reserve(static_cast<std::size_t>(spec.n_hidden) + 1);
  std::size_t off = 0;
  int din = spec.d_input;
  for (int l = 0; l < spec.n_hidden; ++l) {
    DenseStageRef s{off, off + static_cast<std::size_t>(spec.d_hidden) * din, din, spec.d_hidden, true};
    off = s.b + static_cast<std::size_t>(spec.d_hidden);
    stages.push_back(s);
    din = spec.d_hidden;
  }
  DenseStageRef out{off, off + static_cast<std::size_t>(spec.d_output) * din, din, spec.d_output, false};
  stages.push_back(out);
  return stages;
}

LowRankLayout lowrank_layout(const LowRankMlpSpec& spec) {
  validate(spec);
  const auto dh = static_cast<std::size_t>(spec.base.d_hidden);
  const auto r = static_cast<std::size_t>(spec.rank);
  LowRankLayout lay;
  std::size_t off = 0;
  lay.input = DenseStageRef{off, off + dh * static_cast<std::size_t>(spec.base.d_input),
                            spec.base.d_input, spec.base.d_hidden, true};
  off = lay.input.b + dh;
  lay.hidden.reserve(static_cast<std::size_t>(spec.base.n_hidden) - 1);
  for (int l = 1; l < spec.base.n_hidden; ++l) {
    FactoredStageRef s;
    s.a = off;
    s.b_mat = s.a + dh * r;
    s.bias = s.b_mat + r * dh;
    s.d_hidden = spec.base.d_hidden;
    s.rank = spec.rank;
    off = s.bias + dh;
    lay.hidden.push_back(s);
  }
  lay.output = DenseStageRef{off, off + static_cast<std::size_t>(spec.base.d_output) * dh,
                             spec.base.d_hidden, spec.base.d_output, false};
  return lay;
}

namespace {

// weights ~ U(-s, s), s = sqrt(6/(fan_in+fan_out)); draw order follows the layout
void fill_matrix(ParamVector& p, Rng& rng, std::size_t off, std::size_t n, int fan_in, int fan_out,
                 double scale) {
  const double s = scale * std::sqrt(6.0 / (fan_in + fan_out));
  for (std::size_t i = 0; i < n; ++i) p[off + i] = rng.next_uniform(-s, s);
}

}  // namespace

ParamVector init_dense(const MlpSpec& spec, Rng& rng, double final_weight_scale) {
  ParamVector p(dense_param_count(spec), 0.0);
  const auto stages = dense_layout(spec);
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const DenseStageRef& s = stages[i];
    const double scale = (i + 1 == stages.size()) ? final_weight_scale : 1.0;
    fill_matrix(p, rng, s.w, static_cast<std::size_t>(s.d_out) * s.d_in, s.d_in, s.d_out, scale);
  }
  return p;
}

ParamVector init_lowrank(const LowRankMlpSpec& spec, Rng& rng) {
  ParamVector p(lowrank_param_count(spec), 0.0);
  const LowRankLayout lay = lowrank_layout(spec);
  fill_matrix(p, rng, lay.input.w, static_cast<std::size_t>(lay.input.d_out) * lay.input.d_in,
              lay.input.d_in, lay.input.d_out, 1.0);
  for (const FactoredStageRef& s : lay.hidden) {
    const auto dh = static_cast<std::size_t>(s.d_hidden);
    const auto r = static_cast<std::size_t>(s.rank);
    fill_matrix(p, rng, s.a, dh * r, s.rank, s.d_hidden, 1.0);
    fill_matrix(p, rng, s.b_mat, r * dh, s.d_hidden, s.rank, 1.0);
  }
  fill_matrix(p, rng, lay.output.w, static_cast<std::size_t>(lay.output.d_out) * lay.output.d_in,
              lay.output.d_in, lay.output.d_out, 1.0);
  return p;
}

}  // namespace npr
