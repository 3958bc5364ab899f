#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "npr/constraints.hpp"
#include "npr/deeponet.hpp"
#include "npr/errors.hpp"
#include "npr/mlp.hpp"
#include "npr/model.hpp"
#include "npr/problems.hpp"
#include "npr/rng.hpp"
#include "npr/tape.hpp"

namespace npr {

// ---- model dispatch -----------------------------------------------------------

enum class ModelKind { npr, deeponet, dense_pinn };

/// One trainable model; the field matching `kind` is the active one.
/// dense_pinn is a plain net on (t, x) tied to a single initial condition.
struct ModelSpec {
  ModelKind kind = ModelKind::npr;
  HypernetSpec npr;
  DeepONetSpec deeponet;
  MlpSpec dense{2, 1, 4, 32, Activation::sin};
};

void validate(const ModelSpec& spec);  // throws ConfigError

std::size_t model_param_count(const ModelSpec& spec);

/// Initialization stream is derive_stream(seed, rng_tag::init).  The
/// hypernetwork read-out is scaled down so the initial target parameters are
/// near zero and the constrained model starts close to the IC blend.
ParamVector init_model_params(const ModelSpec& spec, std::uint64_t seed);

ModelDerivs record_model_derivs(Tape& tape, const ModelSpec& spec, VarRange phi,
                                std::span<const double> sensors, double t, double x,
                                const ConstraintConfig& cfg, const ICSample& u0);

Var record_model_value(Tape& tape, const ModelSpec& spec, VarRange phi,
                       std::span<const double> sensors, double t, double x,
                       const ConstraintConfig& cfg, const ICSample& u0);

double model_eval(const ModelSpec& spec, std::span<const double> params,
                  std::span<const double> sensors, double t, double x,
                  const ConstraintConfig& cfg, const ICSample& u0);

/// Equation residual as a tape node: heat u_t - kappa u_xx, inviscid
/// transport u_t + u u_x.
Var record_residual(Tape& tape, const IbvpSpec& prob, const ModelDerivs& d);

// ---- optimizer ------------------------------------------------------------------

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected first/second moment estimates; apply() advances one step.
struct AdamState {
  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
  ParamVector m, v;
  long long t = 0;

  void apply(std::span<double> params, std::span<const double> grad, double lr,
             const AdamConfig& cfg = {});
};

/// Linear warmup from 0 to lr_peak over the first warmup_frac of training,
/// then linear decay back to 0 at n_steps.  step is 0-based.
double lr_at(long long step, long long n_steps, double lr_peak, double warmup_frac);

// ---- balanced loss weights --------------------------------------------------------

struct LossWeights {
  double pde = 1.0;
  double ic = 1.0;
  double bc = 1.0;
};

/// Gradient-norm balancing: with M the sum of the active per-term gradient
/// norms, each active weight becomes M / g_i, so every weighted term pulls
/// with the same gradient magnitude (lambda_i * g_i == M).  Terms with zero
/// norm keep their previous weight.
LossWeights update_loss_weights(const LossWeights& prev, double g_pde, double g_ic, double g_bc,
                                bool ic_active, bool bc_active);

// ---- training -------------------------------------------------------------------

enum class LossKind { mae, mse };

/// Which initial conditions the model is trained to cover.
enum class IcFamilyKind { fourier, affine, fixed };

struct IcFamily {
  IcFamilyKind kind = IcFamilyKind::fourier;
  int fourier_modes = 3;
  double fourier_amp = 2.0;
  bool shrink_high_modes = false;
  double affine_a_low = -1.0, affine_a_high = 0.0;
  double affine_b_low = 1.0, affine_b_high = 2.0;
  ICSample fixed;  // kind == fixed: every element uses this IC
};

ICSample draw_ic(const IcFamily& family, Rng& rng);

struct TrainConfig {
  ModelSpec model;
  IbvpSpec problem;
  ConstraintConfig constraints;  // t_final / bc_kind are overwritten from `problem`
  IcFamily ics;
  int d_enc = 32;

  long long n_steps = 65536;
  int batch_pde = 2048;
  int batch_ic = 256;  // soft-IC term, active only when hardcode_ic is off
  int batch_bc = 256;  // soft-BC term, active only when hardcode_bc is off
  double lr_peak = 1e-3;
  double warmup_frac = 0.1;
  int weight_update_every = 100;  // 0 disables refreshes
  LossKind loss = LossKind::mae;
  AdamConfig adam;
  std::uint64_t seed = 0;
  int progress_every = 100;  // stats row cadence; 0 keeps only the final row
  int n_chunks = 16;         // fixed gradient-accumulation chunking
};

void validate(const TrainConfig& cfg);  // throws ConfigError

struct StepStats {
  long long step = 0;
  double lr = 0.0;
  LossWeights weights;
  double loss_pde = 0.0;
  double loss_ic = 0.0;
  double loss_bc = 0.0;
  double loss_total = 0.0;
};

/// Gradient norms measured on the discarded refresh batch at `step`.
struct RefreshStats {
  long long step = 0;
  double g_pde = 0.0, g_ic = 0.0, g_bc = 0.0;
  LossWeights weights;
};

struct TrainResult {
  ParamVector params;
  LossWeights weights;
  long long steps_done = 0;
  std::vector<StepStats> history;      // sampled every progress_every steps
  std::vector<RefreshStats> refreshes; // one row per weight refresh
};

using ProgressSink = std::function<void(const StepStats&)>;

/// Self-supervised training; per-step batches are derived from (seed, purpose,
/// step, element) streams, so the run is reproducible for any worker count.
/// Throws NumericError when the loss stops being finite, naming the step.
TrainResult train(const TrainConfig& cfg, const ProgressSink& sink = {});

void write_progress_csv(const std::string& path, const std::vector<StepStats>& rows);

}  // namespace npr
