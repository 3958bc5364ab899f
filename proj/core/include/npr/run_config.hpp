#pragma once

#include <string>

#include "npr/metrics.hpp"
#include "npr/training.hpp"

namespace npr {

/// Everything one run needs, loadable from a JSON file.  Missing fields fall
/// back to the stock hyperparameters (65536 steps, collocation batch 2048,
/// peak rate 1e-3 with 10% linear warmup then linear decay, MAE loss, Adam
/// 0.9/0.999, 32 sensors, width-64 4-layer hypernetwork, width-32 rank-4
/// target, 500x500 12-IC evaluation); the IC family defaults per equation
/// (transport: affine a in [-1,0], b in [1,2]; heat: 3 Fourier modes, amp 2).
struct RunConfig {
  TrainConfig train;
  int eval_n_ics = 12;
  int eval_nt = 500;
  int eval_nx = 500;
  int eval_fd_substeps = 4;
  std::string out_dir = "out";
};

/// Stock configuration for the given equation text ("burgers" or "heat").
RunConfig default_run_config(const std::string& equation = "burgers");

RunConfig parse_run_config(const std::string& json_text);  // throws ConfigError w/ field paths
RunConfig load_run_config(const std::string& path);        // adds IoError for file problems

/// Evaluation view of a run configuration; the model spec comes from the
/// checkpoint being evaluated, everything else from the config.
EvalConfig eval_config_from(const RunConfig& rc, const ModelSpec& model);

}  // namespace npr
