#pragma once

#include <cctype>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include <json.hpp>

#include "fstc/embed.hpp"
#include "fstc/error.hpp"
#include "fstc/io.hpp"
#include "fstc/topics.hpp"
#include "fstc/wordvec.hpp"

namespace fstc::service {

// Per-batch pipeline settings. `k` is always the batch's category count.
struct BatchConfig {
  double alpha_sif = SifConfig{}.alpha_sif;
  std::optional<double> alpha_lda;  // 50 / k when unset
  double beta_lda = 0.01;
  std::size_t lda_iterations = 1000;
  std::uint64_t lda_seed = 7;
  std::size_t page_size = 12;

  LdaConfig lda(std::size_t k) const {
    LdaConfig c;
    c.k = k;
    c.alpha_lda = alpha_lda;
    c.beta_lda = beta_lda;
    c.iterations = lda_iterations;
    c.seed = lda_seed;
    return c;
  }

  void validate() const {
    SifConfig{alpha_sif}.validate();
    lda(2).validate();
    if (page_size == 0) throw Error("service", "page_size must be positive");
  }

  friend bool operator==(const BatchConfig&, const BatchConfig&) = default;
};

inline io::json to_json(const BatchConfig& c) {
  io::json j{{"alpha_sif", c.alpha_sif}};
  j["alpha_lda"] = c.alpha_lda ? io::json(*c.alpha_lda) : io::json(nullptr);
  j["beta_lda"] = c.beta_lda;
  j["lda_iterations"] = c.lda_iterations;
  j["lda_seed"] = c.lda_seed;
  j["page_size"] = c.page_size;
  return j;
}

/// Applies the keys present in `j` on top of `base`. Unknown keys are errors.
inline BatchConfig merge_batch_config(BatchConfig base, const io::json& j) {
  if (j.is_null()) return base;
  if (!j.is_object()) throw Error("service", "config must be an object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "alpha_sif") base.alpha_sif = value.get<double>();
      else if (key == "alpha_lda") base.alpha_lda = value.is_null() ? std::nullopt : std::optional<double>(value.get<double>());
      else if (key == "beta_lda") base.beta_lda = value.get<double>();
      else if (key == "lda_iterations") base.lda_iterations = value.get<std::size_t>();
      else if (key == "lda_seed") base.lda_seed = value.get<std::uint64_t>();
      else if (key == "page_size") base.page_size = value.get<std::size_t>();
      else throw Error("service", "unknown config key '" + key + "'");
    }
  } catch (const io::json::exception& e) {
    throw Error("service", std::string("bad config value: ") + e.what());
  }
  base.validate();
  return base;
}

struct ServiceConfig {
  std::filesystem::path vectors;
  VectorFormat vector_format = VectorFormat::plain;
  std::filesystem::path data_dir = "fstc-data";
  std::string listen = "127.0.0.1:8080";
  BatchConfig batch;
  // Batches above this size are embedded and fitted by a background job.
  std::size_t inline_limit = 5000;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

inline std::optional<std::string> process_env(const std::string& name) {
  if (const char* v = std::getenv(name.c_str())) return std::string(v);
  return std::nullopt;
}

/// Reads an optional JSON config file, then applies FSTC_* environment
/// overrides (FSTC_VECTORS, FSTC_ALPHA_SIF, FSTC_LDA_SEED, ...).
inline ServiceConfig load_service_config(const std::optional<std::filesystem::path>& file,
                                         const EnvLookup& env = process_env) {
  io::json j = io::json::object();
  if (file) j = io::read_json(*file);
  if (!j.is_object()) throw Error("service", "config file must hold a JSON object");

  static const char* const kKeys[] = {"vectors",        "vector_format", "data_dir", "listen",   "inline_limit",
                                      "alpha_sif",      "alpha_lda",     "beta_lda", "lda_seed", "lda_iterations",
                                      "page_size"};
  for (const char* key : kKeys) {
    std::string name = "FSTC_";
    for (const char* p = key; *p; ++p) name += static_cast<char>(std::toupper(static_cast<unsigned char>(*p)));
    auto v = env(name);
    if (!v) continue;
    const std::string k = key;
    if (k == "vectors" || k == "vector_format" || k == "data_dir" || k == "listen") {
      j[k] = *v;
    } else {
      try {
        j[k] = io::json::parse(*v);
      } catch (const io::json::exception&) {
        throw Error("service", "environment variable " + name + " is not a number");
      }
    }
  }

  ServiceConfig cfg;
  io::json batch_keys = io::json::object();
  for (const auto& [key, value] : j.items()) {
    if (key == "vectors") cfg.vectors = value.get<std::string>();
    else if (key == "vector_format") {
      auto f = parse_vector_format(value.get<std::string>());
      if (!f) throw Error("service", "vector_format must be 'plain' or 'headered'");
      cfg.vector_format = *f;
    } else if (key == "data_dir") cfg.data_dir = value.get<std::string>();
    else if (key == "listen") cfg.listen = value.get<std::string>();
    else if (key == "inline_limit") cfg.inline_limit = value.get<std::size_t>();
    else batch_keys[key] = value;
  }
  cfg.batch = merge_batch_config(cfg.batch, batch_keys);
  return cfg;
}

}  // namespace fstc::service
