#include <charconv>
#include <cmath>
#include <functional>
#include <map>

#include <openssl/evp.h>

#include "sola/error.hpp"
#include "sola/trainer.hpp"

namespace sola {

Regime parse_regime(const std::string& s) {
  if (s == "unsupervised") return Regime::kUnsupervised;
  if (s == "semi-supervised" || s == "semisupervised") return Regime::kSemiSupervised;
  throw ParameterError("unknown regime '" + s + "' (unsupervised, semi-supervised)");
}

std::string to_string(Regime r) {
  return r == Regime::kUnsupervised ? "unsupervised" : "semi-supervised";
}

std::string sha1_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha1(), nullptr) != 1) {
    throw Error("SHA-1 digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 15]);
  }
  return out;
}

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError(key, "config key '" + key + "': cannot parse '" + text + "'");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError(key, "config key '" + key + "': expected true or false, got '" + text + "'");
}

template <typename F>
auto parse_enum(const std::string& key, const std::string& text, F parse) {
  try {
    return parse(text);
  } catch (const ParameterError& e) {
    throw ConfigError(key, "config key '" + key + "': " + e.what());
  }
}

struct Field {
  std::function<void(TrainConfig&, const std::string&, const std::string&)> set;
  std::function<nlohmann::json(const TrainConfig&)> get;
};

#define SOLA_NUM(name, member, type)                                                          \
  {                                                                                           \
    name, {                                                                                   \
      [](TrainConfig& c, const std::string& k, const std::string& v) {                        \
        c.member = parse_number<type>(k, v);                                                  \
      },                                                                                      \
          [](const TrainConfig& c) { return nlohmann::json(c.member); }                       \
    }                                                                                         \
  }

#define SOLA_ENUM(name, member, parser)                                                       \
  {                                                                                           \
    name, {                                                                                   \
      [](TrainConfig& c, const std::string& k, const std::string& v) {                        \
        c.member = parse_enum(k, v, parser);                                                  \
      },                                                                                      \
          [](const TrainConfig& c) { return nlohmann::json(to_string(c.member)); }            \
    }                                                                                         \
  }

#define SOLA_BOOL(name, member)                                                               \
  {                                                                                           \
    name, {                                                                                   \
      [](TrainConfig& c, const std::string& k, const std::string& v) {                        \
        c.member = parse_bool(k, v);                                                          \
      },                                                                                      \
          [](const TrainConfig& c) { return nlohmann::json(c.member); }                       \
    }                                                                                         \
  }

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      SOLA_ENUM("regime", regime, parse_regime),
      SOLA_NUM("epochs", epochs, int),
      SOLA_NUM("batch_size", batch_size, int),
      SOLA_NUM("lr", adam.lr, double),
      SOLA_NUM("adam_beta1", adam.beta1, double),
      SOLA_NUM("adam_beta2", adam.beta2, double),
      SOLA_NUM("adam_eps", adam.eps, double),
      SOLA_NUM("tau_gumbel", tau_gumbel, double),
      SOLA_NUM("tau_gumbel_final", tau_gumbel_final, double),
      SOLA_NUM("tau_ntxent", tau_ntxent, double),
      SOLA_NUM("lambda_cl", weights.cl, double),
      SOLA_NUM("lambda_sim", weights.sim, double),
      SOLA_NUM("lambda_cls", weights.cls, double),
      SOLA_NUM("seed", seed, std::uint64_t),
      SOLA_ENUM("partition_algo", partition.algo, parse_partition_algo),
      SOLA_NUM("partition_seed", partition.seed, std::uint64_t),
      SOLA_NUM("louvain_resolution", partition.louvain.resolution, double),
      SOLA_NUM("louvain_restarts", partition.louvain.restarts, int),
      SOLA_ENUM("gn_target", partition.gn.target, parse_gn_target),
      SOLA_NUM("gn_k", partition.gn.k, int),
      SOLA_NUM("layers", encoder.layers, int),
      SOLA_NUM("hidden_dim", encoder.hidden, int),
      SOLA_NUM("projection_dim", encoder.projection_dim, int),
      SOLA_ENUM("graph_readout", encoder.graph_readout, parse_readout),
      SOLA_ENUM("subgraph_readout", encoder.subgraph_readout, parse_readout),
      SOLA_BOOL("standardize", encoder.standardize),
      SOLA_NUM("neg_ratio", neg_ratio, double),
      SOLA_NUM("identity_prior", identity_prior, double),
      SOLA_BOOL("share_encoder", share_encoder),
      SOLA_NUM("label_fraction", label_fraction, double),
      SOLA_NUM("finetune_epochs", finetune_epochs, int),
      SOLA_NUM("probe_folds", probe_folds, int),
      SOLA_NUM("probe_l2", probe_l2, double),
      SOLA_NUM("probe_max_iter", probe_max_iter, int),
  };
  return table;
}

#undef SOLA_NUM
#undef SOLA_ENUM
#undef SOLA_BOOL

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError(key, "config key '" + key + "': " + what);
}

}  // namespace

void TrainConfig::set(const std::string& key, const std::string& value) {
  for (const auto& [name, field] : fields()) {
    if (name == key) {
      field.set(*this, key, value);
      return;
    }
  }
  throw ConfigError(key, "unknown config key '" + key + "'");
}

std::vector<std::string> TrainConfig::keys() {
  std::vector<std::string> out;
  for (const auto& f : fields()) out.push_back(f.first);
  return out;
}

void TrainConfig::validate() const {
  require(epochs >= 0, "epochs", "must be >= 0");
  require(batch_size >= 2, "batch_size", "must be >= 2");
  require(adam.lr > 0.0, "lr", "must be positive");
  require(adam.beta1 >= 0.0 && adam.beta1 < 1.0, "adam_beta1", "must be in [0, 1)");
  require(adam.beta2 >= 0.0 && adam.beta2 < 1.0, "adam_beta2", "must be in [0, 1)");
  require(adam.eps > 0.0, "adam_eps", "must be positive");
  require(tau_gumbel > 0.0, "tau_gumbel", "must be positive");
  require(tau_gumbel_final > 0.0, "tau_gumbel_final", "must be positive");
  require(tau_ntxent > 0.0, "tau_ntxent", "must be positive");
  require(weights.cl >= 0.0, "lambda_cl", "must be >= 0");
  require(weights.sim >= 0.0, "lambda_sim", "must be >= 0");
  require(weights.cls >= 0.0, "lambda_cls", "must be >= 0");
  require(partition.louvain.resolution > 0.0, "louvain_resolution", "must be positive");
  require(partition.louvain.restarts >= 1, "louvain_restarts", "must be >= 1");
  require(partition.gn.k >= 1, "gn_k", "must be >= 1");
  require(encoder.layers >= 1, "layers", "must be >= 1");
  require(encoder.hidden >= 1, "hidden_dim", "must be >= 1");
  require(encoder.projection_dim >= 1, "projection_dim", "must be >= 1");
  require(neg_ratio >= 0.0, "neg_ratio", "must be >= 0");
  require(std::isfinite(identity_prior), "identity_prior", "must be finite");
  require(label_fraction > 0.0 && label_fraction <= 1.0, "label_fraction", "must be in (0, 1]");
  require(finetune_epochs >= 0, "finetune_epochs", "must be >= 0");
  require(probe_folds >= 2, "probe_folds", "must be >= 2");
  require(probe_l2 >= 0.0, "probe_l2", "must be >= 0");
  require(probe_max_iter >= 1, "probe_max_iter", "must be >= 1");
}

nlohmann::json TrainConfig::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [name, field] : fields()) j[name] = field.get(*this);
  return j;
}

std::string TrainConfig::hash() const { return sha1_hex(to_json().dump()); }

TrainConfig train_config_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("", "training config must be a JSON object");
  TrainConfig c;
  for (const auto& [key, value] : doc.items()) {
    c.set(key, value.is_string() ? value.get<std::string>() : value.dump());
  }
  c.validate();
  return c;
}

}  // namespace sola
