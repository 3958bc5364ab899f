#include "npr/run_config.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace npr {

namespace {

using nlohmann::json;

[[noreturn]] void bad_field(const std::string& path, const std::string& why) {
  throw ConfigError("config field " + path + ": " + why);
}

void require_object(const json& j, const std::string& path) {
  if (!j.is_object()) bad_field(path, "expected an object");
}

void reject_unknown(const json& j, const std::string& path,
                    std::initializer_list<const char*> known) {
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* k : known)
      if (key == k) ok = true;
    if (!ok) bad_field(path + "." + key, "unknown field");
  }
}

double num_or(const json& j, const std::string& path, const char* key, double def) {
  if (!j.contains(key)) return def;
  if (!j.at(key).is_number()) bad_field(path + "." + key, "expected a number");
  return j.at(key).get<double>();
}

long long int_or(const json& j, const std::string& path, const char* key, long long def) {
  if (!j.contains(key)) return def;
  if (!j.at(key).is_number_integer()) bad_field(path + "." + key, "expected an integer");
  return j.at(key).get<long long>();
}

bool bool_or(const json& j, const std::string& path, const char* key, bool def) {
  if (!j.contains(key)) return def;
  if (!j.at(key).is_boolean()) bad_field(path + "." + key, "expected true or false");
  return j.at(key).get<bool>();
}

std::string str_or(const json& j, const std::string& path, const char* key,
                   const std::string& def) {
  if (!j.contains(key)) return def;
  if (!j.at(key).is_string()) bad_field(path + "." + key, "expected a string");
  return j.at(key).get<std::string>();
}

Activation activation_or(const json& j, const std::string& path, const char* key,
                         Activation def) {
  const std::string s = str_or(j, path, key, "");
  if (s.empty()) return def;
  if (s == "sin") return Activation::sin;
  if (s == "tanh") return Activation::tanh;
  if (s == "relu") return Activation::relu;
  bad_field(path + "." + key, "expected one of sin, tanh, relu");
}

void parse_problem(const json& j, IbvpSpec& out) {
  require_object(j, "problem");
  reject_unknown(j, "problem", {"equation", "kappa", "t_final"});
  const std::string eq = str_or(j, "problem", "equation", "burgers");
  if (eq == "burgers")
    out.equation = Equation::burgers;
  else if (eq == "heat")
    out.equation = Equation::heat;
  else
    bad_field("problem.equation", "expected burgers or heat");
  out.kappa = num_or(j, "problem", "kappa", out.kappa);
  out.t_final = num_or(j, "problem", "t_final", out.t_final);
}

void parse_model(const json& j, TrainConfig& tc) {
  require_object(j, "model");
  reject_unknown(j, "model",
                 {"kind", "target_hidden", "rank", "hyper_hidden", "n_hidden", "activation",
                  "branch_hidden", "trunk_hidden", "p_lat", "dense_hidden"});
  const std::string kind = str_or(j, "model", "kind", "npr");
  const Activation act = activation_or(j, "model", "activation", Activation::sin);
  const int n_hidden = static_cast<int>(int_or(j, "model", "n_hidden", 4));
  if (kind == "npr") {
    tc.model.kind = ModelKind::npr;
    tc.model.npr = make_hypernet_spec(tc.d_enc, static_cast<int>(int_or(j, "model", "target_hidden", 32)),
                                      static_cast<int>(int_or(j, "model", "rank", 4)),
                                      static_cast<int>(int_or(j, "model", "hyper_hidden", 64)), n_hidden);
    tc.model.npr.hyper.activation = act;
    tc.model.npr.target.base.activation = act;
  } else if (kind == "deeponet") {
    tc.model.kind = ModelKind::deeponet;
    tc.model.deeponet = make_deeponet_spec(
        tc.d_enc, static_cast<int>(int_or(j, "model", "branch_hidden", 64)),
        static_cast<int>(int_or(j, "model", "trunk_hidden", 64)),
        static_cast<int>(int_or(j, "model", "p_lat", 32)), n_hidden);
    tc.model.deeponet.branch.activation = act;
    tc.model.deeponet.trunk.activation = act;
  } else if (kind == "dense_pinn") {
    tc.model.kind = ModelKind::dense_pinn;
    tc.model.dense = MlpSpec{2, 1, n_hidden,
                             static_cast<int>(int_or(j, "model", "dense_hidden", 32)), act};
  } else {
    bad_field("model.kind", "expected npr, deeponet or dense_pinn");
  }
}

void parse_ics(const json& j, IcFamily& out) {
  require_object(j, "ics");
  reject_unknown(j, "ics",
                 {"family", "modes", "amp", "shrink_high_modes", "a_low", "a_high", "b_low",
                  "b_high"});
  const std::string fam = str_or(j, "ics", "family", "");
  if (fam == "fourier")
    out.kind = IcFamilyKind::fourier;
  else if (fam == "affine")
    out.kind = IcFamilyKind::affine;
  else if (!fam.empty())
    bad_field("ics.family", "expected fourier or affine");
  out.fourier_modes = static_cast<int>(int_or(j, "ics", "modes", out.fourier_modes));
  out.fourier_amp = num_or(j, "ics", "amp", out.fourier_amp);
  out.shrink_high_modes = bool_or(j, "ics", "shrink_high_modes", out.shrink_high_modes);
  out.affine_a_low = num_or(j, "ics", "a_low", out.affine_a_low);
  out.affine_a_high = num_or(j, "ics", "a_high", out.affine_a_high);
  out.affine_b_low = num_or(j, "ics", "b_low", out.affine_b_low);
  out.affine_b_high = num_or(j, "ics", "b_high", out.affine_b_high);
}

void parse_train(const json& j, TrainConfig& tc) {
  require_object(j, "train");
  reject_unknown(j, "train",
                 {"d_enc", "n_steps", "batch_pde", "batch_ic", "batch_bc", "lr_peak",
                  "warmup_frac", "weight_update_every", "loss", "seed", "progress_every",
                  "n_chunks", "beta1", "beta2", "eps"});
  tc.d_enc = static_cast<int>(int_or(j, "train", "d_enc", tc.d_enc));
  tc.n_steps = int_or(j, "train", "n_steps", tc.n_steps);
  tc.batch_pde = static_cast<int>(int_or(j, "train", "batch_pde", tc.batch_pde));
  tc.batch_ic = static_cast<int>(int_or(j, "train", "batch_ic", tc.batch_ic));
  tc.batch_bc = static_cast<int>(int_or(j, "train", "batch_bc", tc.batch_bc));
  tc.lr_peak = num_or(j, "train", "lr_peak", tc.lr_peak);
  tc.warmup_frac = num_or(j, "train", "warmup_frac", tc.warmup_frac);
  tc.weight_update_every = int_or(j, "train", "weight_update_every", tc.weight_update_every);
  const std::string loss = str_or(j, "train", "loss", "");
  if (loss == "mae")
    tc.loss = LossKind::mae;
  else if (loss == "mse")
    tc.loss = LossKind::mse;
  else if (!loss.empty())
    bad_field("train.loss", "expected mae or mse");
  tc.seed = static_cast<std::uint64_t>(int_or(j, "train", "seed", static_cast<long long>(tc.seed)));
  tc.progress_every = int_or(j, "train", "progress_every", tc.progress_every);
  tc.n_chunks = static_cast<int>(int_or(j, "train", "n_chunks", tc.n_chunks));
  tc.adam.beta1 = num_or(j, "train", "beta1", tc.adam.beta1);
  tc.adam.beta2 = num_or(j, "train", "beta2", tc.adam.beta2);
  tc.adam.eps = num_or(j, "train", "eps", tc.adam.eps);
}

void parse_constraints(const json& j, ConstraintConfig& out) {
  require_object(j, "constraints");
  reject_unknown(j, "constraints", {"hardcode_ic", "hardcode_bc"});
  out.hardcode_ic = bool_or(j, "constraints", "hardcode_ic", out.hardcode_ic);
  out.hardcode_bc = bool_or(j, "constraints", "hardcode_bc", out.hardcode_bc);
}

void parse_eval(const json& j, RunConfig& rc) {
  require_object(j, "eval");
  reject_unknown(j, "eval", {"n_ics", "nt", "nx", "fd_substeps"});
  rc.eval_n_ics = static_cast<int>(int_or(j, "eval", "n_ics", rc.eval_n_ics));
  rc.eval_nt = static_cast<int>(int_or(j, "eval", "nt", rc.eval_nt));
  rc.eval_nx = static_cast<int>(int_or(j, "eval", "nx", rc.eval_nx));
  rc.eval_fd_substeps = static_cast<int>(int_or(j, "eval", "fd_substeps", rc.eval_fd_substeps));
}

void family_defaults_for(Equation eq, IcFamily& out) {
  if (eq == Equation::burgers) {
    out.kind = IcFamilyKind::affine;
    out.affine_a_low = -1.0;
    out.affine_a_high = 0.0;
    out.affine_b_low = 1.0;
    out.affine_b_high = 2.0;
  } else {
    out.kind = IcFamilyKind::fourier;
    out.fourier_modes = 3;
    out.fourier_amp = 2.0;
  }
}

}  // namespace

RunConfig default_run_config(const std::string& equation) {
  std::ostringstream text;
  text << "{\"problem\": {\"equation\": \"" << equation << "\"}}";
  return parse_run_config(text.str());
}

RunConfig parse_run_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  require_object(root, "(root)");
  reject_unknown(root, "(root)",
                 {"problem", "model", "ics", "train", "constraints", "eval", "out_dir"});

  RunConfig rc;
  if (root.contains("problem")) parse_problem(root.at("problem"), rc.train.problem);
  family_defaults_for(rc.train.problem.equation, rc.train.ics);
  if (root.contains("train")) parse_train(root.at("train"), rc.train);
  // model construction needs the final d_enc, so it runs after "train"
  if (root.contains("model"))
    parse_model(root.at("model"), rc.train);
  else
    rc.train.model.npr = make_hypernet_spec(rc.train.d_enc, 32, 4, 64, 4);
  if (root.contains("ics")) parse_ics(root.at("ics"), rc.train.ics);
  if (root.contains("constraints")) parse_constraints(root.at("constraints"), rc.train.constraints);
  if (root.contains("eval")) parse_eval(root.at("eval"), rc);
  rc.out_dir = str_or(root, "(root)", "out_dir", rc.out_dir);

  rc.train.constraints.t_final = rc.train.problem.t_final;
  rc.train.constraints.bc_kind = bc_kind(rc.train.problem);
  validate(rc.train);
  if (rc.eval_n_ics < 1) bad_field("eval.n_ics", "must be at least 1");
  if (rc.eval_nt < 2 || rc.eval_nx < 2) bad_field("eval.nt/nx", "grid needs at least 2 nodes");
  if (rc.eval_fd_substeps < 1) bad_field("eval.fd_substeps", "must be at least 1");
  return rc;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open config " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_run_config(buf.str());
}

EvalConfig eval_config_from(const RunConfig& rc, const ModelSpec& model) {
  EvalConfig ec;
  ec.model = model;
  ec.problem = rc.train.problem;
  ec.constraints = rc.train.constraints;
  ec.ics = rc.train.ics;
  ec.d_enc = rc.train.d_enc;
  ec.n_ics = rc.eval_n_ics;
  ec.nt = rc.eval_nt;
  ec.nx = rc.eval_nx;
  ec.fd_substeps = rc.eval_fd_substeps;
  ec.seed = rc.train.seed;
  return ec;
}

}  // namespace npr
