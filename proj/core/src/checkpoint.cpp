#include "npr/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "json.hpp"

namespace npr {

namespace {

using nlohmann::json;

std::uint64_t fnv1a(const unsigned char* data, std::size_t n) {
  std::uint64_t h = 14695981039346656037ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 1099511628211ULL;
  }
  return h;
}

std::string to_hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::vector<unsigned char> params_to_bytes(const ParamVector& p) {
  std::vector<unsigned char> out(p.size() * 8);
  for (std::size_t i = 0; i < p.size(); ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, &p[i], 8);
    for (int b = 0; b < 8; ++b) out[i * 8 + b] = static_cast<unsigned char>(bits >> (8 * b));
  }
  return out;
}

ParamVector bytes_to_params(const std::vector<unsigned char>& bytes) {
  ParamVector p(bytes.size() / 8);
  for (std::size_t i = 0; i < p.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b)
      bits |= static_cast<std::uint64_t>(bytes[i * 8 + b]) << (8 * b);
    std::memcpy(&p[i], &bits, 8);
  }
  return p;
}

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::sin: return "sin";
    case Activation::tanh: return "tanh";
    case Activation::relu: return "relu";
  }
  throw ConfigError("unknown activation");
}

Activation activation_from(const std::string& s) {
  if (s == "sin") return Activation::sin;
  if (s == "tanh") return Activation::tanh;
  if (s == "relu") return Activation::relu;
  throw ConfigError("unknown activation '" + s + "'");
}

const char* kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::npr: return "npr";
    case ModelKind::deeponet: return "deeponet";
    case ModelKind::dense_pinn: return "dense_pinn";
  }
  throw ConfigError("unknown model kind");
}

ModelKind kind_from(const std::string& s) {
  if (s == "npr") return ModelKind::npr;
  if (s == "deeponet") return ModelKind::deeponet;
  if (s == "dense_pinn") return ModelKind::dense_pinn;
  throw ConfigError("unknown model kind '" + s + "'");
}

json mlp_to_json(const MlpSpec& s) {
  return {{"d_input", s.d_input},
          {"d_output", s.d_output},
          {"n_hidden", s.n_hidden},
          {"d_hidden", s.d_hidden},
          {"activation", activation_name(s.activation)}};
}

MlpSpec mlp_from_json(const json& j) {
  MlpSpec s;
  s.d_input = j.at("d_input").get<int>();
  s.d_output = j.at("d_output").get<int>();
  s.n_hidden = j.at("n_hidden").get<int>();
  s.d_hidden = j.at("d_hidden").get<int>();
  s.activation = activation_from(j.at("activation").get<std::string>());
  return s;
}

json model_to_json(const ModelSpec& m) {
  json j;
  j["kind"] = kind_name(m.kind);
  switch (m.kind) {
    case ModelKind::npr:
      j["hyper"] = mlp_to_json(m.npr.hyper);
      j["target"] = mlp_to_json(m.npr.target.base);
      j["rank"] = m.npr.target.rank;
      break;
    case ModelKind::deeponet:
      j["branch"] = mlp_to_json(m.deeponet.branch);
      j["trunk"] = mlp_to_json(m.deeponet.trunk);
      j["p_lat"] = m.deeponet.p_lat;
      break;
    case ModelKind::dense_pinn: j["dense"] = mlp_to_json(m.dense); break;
  }
  return j;
}

ModelSpec model_from_json(const json& j) {
  ModelSpec m;
  m.kind = kind_from(j.at("kind").get<std::string>());
  switch (m.kind) {
    case ModelKind::npr:
      m.npr.hyper = mlp_from_json(j.at("hyper"));
      m.npr.target.base = mlp_from_json(j.at("target"));
      m.npr.target.rank = j.at("rank").get<int>();
      break;
    case ModelKind::deeponet:
      m.deeponet.branch = mlp_from_json(j.at("branch"));
      m.deeponet.trunk = mlp_from_json(j.at("trunk"));
      m.deeponet.p_lat = j.at("p_lat").get<int>();
      break;
    case ModelKind::dense_pinn: m.dense = mlp_from_json(j.at("dense")); break;
  }
  return m;
}

}  // namespace

void validate(const Checkpoint& cp) {
  if (cp.format_version != 1)
    throw ConfigError("unsupported checkpoint format version " +
                      std::to_string(cp.format_version));
  validate(cp.model);
  if (cp.params.size() != model_param_count(cp.model))
    throw ConfigError("checkpoint parameter count does not match its specs");
  if (cp.steps < 0) throw ConfigError("checkpoint step count must be >= 0");
}

void save_checkpoint(const std::string& path, const Checkpoint& cp) {
  try {
    validate(cp);
  } catch (const ConfigError& e) {
    throw IoError(std::string("refusing to write checkpoint: ") + e.what());
  }
  const std::vector<unsigned char> block = params_to_bytes(cp.params);

  json manifest;
  manifest["format_version"] = cp.format_version;
  manifest["model"] = model_to_json(cp.model);
  manifest["seed"] = cp.seed;
  manifest["steps"] = cp.steps;
  manifest["n_params"] = cp.params.size();
  manifest["checksum_fnv1a"] = to_hex(fnv1a(block.data(), block.size()));

  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + tmp + " for writing");
    f << manifest.dump() << "\n";
    f.write(reinterpret_cast<const char*>(block.data()),
            static_cast<std::streamsize>(block.size()));
    if (!f) throw IoError("write failed for " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp + " to " + path + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(f, line)) throw IoError(path + ": missing manifest line");

  Checkpoint cp;
  std::size_t n_params = 0;
  std::string want_sum;
  try {
    const json manifest = json::parse(line);
    cp.format_version = manifest.at("format_version").get<int>();
    cp.model = model_from_json(manifest.at("model"));
    cp.seed = manifest.at("seed").get<std::uint64_t>();
    cp.steps = manifest.at("steps").get<long long>();
    n_params = manifest.at("n_params").get<std::size_t>();
    want_sum = manifest.at("checksum_fnv1a").get<std::string>();
  } catch (const json::exception& e) {
    throw IoError(path + ": bad manifest (" + e.what() + ")");
  } catch (const ConfigError& e) {
    throw IoError(path + ": bad manifest (" + e.what() + ")");
  }

  std::vector<unsigned char> block(n_params * 8);
  f.read(reinterpret_cast<char*>(block.data()), static_cast<std::streamsize>(block.size()));
  if (static_cast<std::size_t>(f.gcount()) != block.size())
    throw IoError(path + ": parameter block truncated");
  f.peek();
  if (!f.eof()) throw IoError(path + ": trailing bytes after parameter block");
  if (to_hex(fnv1a(block.data(), block.size())) != want_sum)
    throw IoError(path + ": checksum mismatch, file damaged");

  cp.params = bytes_to_params(block);
  try {
    validate(cp);
  } catch (const ConfigError& e) {
    throw IoError(path + ": inconsistent checkpoint (" + e.what() + ")");
  }
  return cp;
}

}  // namespace npr
