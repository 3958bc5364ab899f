#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <type_traits>
#include <vector>

#include "npr/errors.hpp"
#include "npr/jet.hpp"
#include "npr/rng.hpp"

namespace npr {

using ParamVector = std::vector<double>;

enum class Activation { sin, tanh, relu };

/// Plain MLP: n_hidden layers of width d_hidden, activated; linear read-out.
struct MlpSpec {
  int d_input = 2;
  int d_output = 1;
  int n_hidden = 4;
  int d_hidden = 32;
  Activation activation = Activation::sin;
};

/// Same shape, but every hidden-to-hidden weight matrix W_i is kept as a
/// product A_i * B_i (A_i: d_hidden x rank, B_i: rank x d_hidden) and never
/// materialized during the forward pass.
struct LowRankMlpSpec {
  MlpSpec base;
  int rank = 4;
};

void validate(const MlpSpec& spec);         // throws ConfigError
void validate(const LowRankMlpSpec& spec);  // throws ConfigError

std::size_t dense_param_count(const MlpSpec& spec);
std::size_t lowrank_param_count(const LowRankMlpSpec& spec);

/// One affine stage y = W h + b inside the flat parameter vector:
/// W is d_out x d_in row-major at [w, w + d_out*d_in), b is d_out at [b, b + d_out).
struct DenseStageRef {
  std::size_t w = 0;
  std::size_t b = 0;
  int d_in = 0;
  int d_out = 0;
  bool activated = true;
};

/// One factored hidden stage y = act(A (B h) + bias).
struct FactoredStageRef {
  std::size_t a = 0;      // A: d_hidden x rank, row-major
  std::size_t b_mat = 0;  // B: rank x d_hidden, row-major
  std::size_t bias = 0;   // d_hidden
  int d_hidden = 0;
  int rank = 0;
};

/// Canonical layout: input stage, hidden transitions in order, output stage.
/// Offsets tile [0, count) exactly; every consumer (forward passes, init,
/// unfolding, checkpoints) walks parameters through these refs.
std::vector<DenseStageRef> dense_layout(const MlpSpec& spec);

struct LowRankLayout {
  DenseStageRef input;
  std::vector<FactoredStageRef> hidden;
  DenseStageRef output;
};
LowRankLayout lowrank_layout(const LowRankMlpSpec& spec);

/// Scaled-uniform init: weights ~ U(-s, s) with s = sqrt(6 / (fan_in + fan_out)),
/// biases zero.  final_weight_scale multiplies the read-out weights only; a
/// small value there makes the freshly initialized net output near zero.
ParamVector init_dense(const MlpSpec& spec, Rng& rng, double final_weight_scale = 1.0);
ParamVector init_lowrank(const LowRankMlpSpec& spec, Rng& rng);

template <class T>
inline T apply_activation(Activation act, const T& v) {
  if constexpr (std::is_same_v<T, Jet2>) {
    switch (act) {
      case Activation::sin: return sin(v);
      case Activation::tanh: return tanh(v);
      case Activation::relu: return v.val > 0.0 ? v : Jet2{};
    }
  } else {
    switch (act) {
      case Activation::sin: return std::sin(v);
      case Activation::tanh: return std::tanh(v);
      case Activation::relu: return v > 0.0 ? v : T{};
    }
  }
  throw ConfigError("unknown activation");
}

namespace detail {

template <class T>
inline void dense_stage_forward(std::span<const double> params, const DenseStageRef& s,
                                Activation act, const std::vector<T>& in, std::vector<T>& out) {
  out.assign(static_cast<std::size_t>(s.d_out), T{});
  for (int o = 0; o < s.d_out; ++o) {
    const double* w = params.data() + s.w + static_cast<std::size_t>(o) * s.d_in;
    T acc = T{} + params[s.b + static_cast<std::size_t>(o)];
    for (int j = 0; j < s.d_in; ++j) acc = acc + w[j] * in[static_cast<std::size_t>(j)];
    out[static_cast<std::size_t>(o)] = s.activated ? apply_activation(act, acc) : acc;
  }
}

template <class T>
inline void factored_stage_forward(std::span<const double> params, const FactoredStageRef& s,
                                   Activation act, const std::vector<T>& in, std::vector<T>& mid,
                                   std::vector<T>& out) {
  mid.assign(static_cast<std::size_t>(s.rank), T{});
  for (int r = 0; r < s.rank; ++r) {
    const double* brow = params.data() + s.b_mat + static_cast<std::size_t>(r) * s.d_hidden;
    T acc = T{};
    for (int j = 0; j < s.d_hidden; ++j) acc = acc + brow[j] * in[static_cast<std::size_t>(j)];
    mid[static_cast<std::size_t>(r)] = acc;
  }
  out.assign(static_cast<std::size_t>(s.d_hidden), T{});
  for (int o = 0; o < s.d_hidden; ++o) {
    const double* arow = params.data() + s.a + static_cast<std::size_t>(o) * s.rank;
    T acc = T{} + params[s.bias + static_cast<std::size_t>(o)];
    for (int r = 0; r < s.rank; ++r) acc = acc + arow[r] * mid[static_cast<std::size_t>(r)];
    out[static_cast<std::size_t>(o)] = apply_activation(act, acc);
  }
}

}  // namespace detail

/// Forward pass with plain parameters; T is double or Jet2.
template <class T>
std::vector<T> forward_dense(const MlpSpec& spec, std::span<const double> params,
                             std::span<const T> input) {
  if (params.size() != dense_param_count(spec)) throw ConfigError("dense forward: parameter length mismatch");
  if (input.size() != static_cast<std::size_t>(spec.d_input)) throw ConfigError("dense forward: input length mismatch");
  std::vector<T> h(input.begin(), input.end());
  std::vector<T> next;
  for (const DenseStageRef& s : dense_layout(spec)) {
    detail::dense_stage_forward(params, s, spec.activation, h, next);
    h.swap(next);
  }
  return h;
}

template <class T>
std::vector<T> forward_lowrank(const LowRankMlpSpec& spec, std::span<const double> params,
                               std::span<const T> input) {
  if (params.size() != lowrank_param_count(spec)) throw ConfigError("low-rank forward: parameter length mismatch");
  if (input.size() != static_cast<std::size_t>(spec.base.d_input)) throw ConfigError("low-rank forward: input length mismatch");
  const LowRankLayout lay = lowrank_layout(spec);
  std::vector<T> h(input.begin(), input.end());
  std::vector<T> next, mid;
  detail::dense_stage_forward(params, lay.input, spec.base.activation, h, next);
  h.swap(next);
  for (const FactoredStageRef& s : lay.hidden) {
    detail::factored_stage_forward(params, s, spec.base.activation, h, mid, next);
    h.swap(next);
  }
  detail::dense_stage_forward(params, lay.output, spec.base.activation, h, next);
  h.swap(next);
  return h;
}

}  // namespace npr
