#pragma once

// JSON records and aligned text tables for the artifacts the CLI and the
// service write. Output is deterministic: no timestamps, stable key order.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "fstc/classify.hpp"
#include "fstc/corpus.hpp"
#include "fstc/embed.hpp"
#include "fstc/error.hpp"
#include "fstc/evalharness.hpp"
#include "fstc/topics.hpp"

namespace fstc::io {

using json = nlohmann::ordered_json;

inline json to_json(const DocumentEmbedding& e) {
  return json{{"id", e.doc_id},
              {"embedded_token_count", e.embedded_token_count},
              {"is_empty", e.is_empty()},
              {"vector", e.vector}};
}

inline DocumentEmbedding embedding_from_json(const json& j) {
  DocumentEmbedding e;
  e.doc_id = j.at("id").get<std::string>();
  e.embedded_token_count = j.at("embedded_token_count").get<std::size_t>();
  e.vector = j.at("vector").get<std::vector<double>>();
  return e;
}

inline json to_json(const Prediction& p) {
  return json{{"id", p.doc_id}, {"category", p.category}, {"score", p.score}, {"margin", p.margin}};
}

inline Prediction prediction_from_json(const json& j) {
  return {j.at("id").get<std::string>(), j.at("category").get<std::string>(), j.at("score").get<double>(),
          j.at("margin").get<double>()};
}

inline json to_json(const Selection& s) {
  json j = json::object();
  for (const auto& c : s) j[c.category] = c.doc_ids;
  return j;
}

/// `{"category": ["id", ...], ...}`; a bare string is accepted for a single id.
/// Object key order is the category order.
inline Selection selection_from_json(const json& j) {
  if (!j.is_object()) throw Error("classify", "selection must be an object of category -> document ids");
  Selection s;
  for (const auto& [category, ids] : j.items()) {
    CategorySelection c{category, {}};
    if (ids.is_string()) {
      c.doc_ids.push_back(ids.get<std::string>());
    } else if (ids.is_array()) {
      for (const auto& id : ids) {
        if (!id.is_string()) throw Error("classify", "document ids must be strings");
        c.doc_ids.push_back(id.get<std::string>());
      }
    } else {
      throw Error("classify", "selection for '" + category + "' must be a list of ids");
    }
    s.push_back(std::move(c));
  }
  return s;
}

inline json to_json(const LdaConfig& c) {
  return json{{"k", c.k},
              {"alpha_lda", c.alpha()},
              {"beta_lda", c.beta_lda},
              {"lda_iterations", c.iterations},
              {"lda_seed", c.seed}};
}

inline json to_json(const CandidateRanking& r, const std::unordered_map<std::string, std::size_t>* token_counts = nullptr) {
  json topics = json::array();
  for (std::size_t t = 0; t < r.topics.size(); ++t) {
    json list = json::array();
    for (const auto& c : r.topics[t]) {
      json e{{"id", c.doc_id}, {"theta", c.probability}};
      if (token_counts) e["token_count"] = token_counts->at(c.doc_id);
      list.push_back(std::move(e));
    }
    topics.push_back(json{{"topic", t}, {"candidates", std::move(list)}});
  }
  return json{{"page_size", r.page_size}, {"topics", std::move(topics)}, {"unrankable", r.unrankable}};
}

inline CandidateRanking ranking_from_json(const json& j) {
  CandidateRanking r;
  r.page_size = j.at("page_size").get<std::size_t>();
  for (const auto& t : j.at("topics")) {
    auto& list = r.topics.emplace_back();
    for (const auto& c : t.at("candidates")) list.push_back({c.at("id").get<std::string>(), c.at("theta").get<double>()});
  }
  r.unrankable = j.at("unrankable").get<std::vector<std::string>>();
  return r;
}

inline json to_json(const EvalReport& r) {
  json j{{"dataset_id", r.dataset_id},
         {"categories", r.categories},
         {"documents", r.documents},
         {"mode", to_string(r.mode)},
         {"combinations_evaluated", r.combinations_evaluated},
         {"total_combinations", r.total_combinations},
         {"seed", r.seed}};
  if (r.failure) {
    j["failure"] = "lda_missing_category";
    j["max_accuracy"] = nullptr;
    return j;
  }
  j["failure"] = nullptr;
  j["best_combination"] = to_json(r.best_combination);
  j["max_accuracy"] = *r.max_accuracy;
  j["max_accuracy_include_reps"] = *r.max_accuracy_include_reps;
  j["best_correct"] = r.best_correct;
  j["predicted"] = r.predicted;
  return j;
}

inline json to_json(const LengthBiasResult& r, bool include_rows = true) {
  json j{{"dataset_id", r.dataset_id},
         {"categories", r.categories},
         {"mode", to_string(r.mode)},
         {"combinations_evaluated", r.combinations_evaluated},
         {"total_combinations", r.total_combinations},
         {"correlation", r.correlation}};
  if (include_rows) {
    json rows = json::array();
    for (const auto& row : r.rows) {
      rows.push_back(json{{"rep_a", row.rep_a},
                          {"rep_b", row.rep_b},
                          {"len_a", row.len_a},
                          {"len_b", row.len_b},
                          {"predicted_a", row.predicted_a},
                          {"predicted_b", row.predicted_b},
                          {"x", row.x},
                          {"y", row.y}});
    }
    j["rows"] = std::move(rows);
  }
  return j;
}

inline std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? sep : "") + parts[i];
  return out;
}

inline std::string format_accuracy(const std::optional<double>& a, int precision = 4) {
  if (!a) return "--";
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << *a;
  return os.str();
}

// Aligned-column table; the first row is the header.
inline std::string format_table(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& r : rows) {
    width.resize(std::max(width.size(), r.size()), 0);
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  }
  std::ostringstream os;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t c = 0; c < rows[i].size(); ++c) {
      os << rows[i][c];
      if (c + 1 < rows[i].size()) os << std::string(width[c] - rows[i][c].size() + 2, ' ');
    }
    os << '\n';
    if (i == 0) {
      std::size_t total = 0;
      for (auto w : width) total += w + 2;
      os << std::string(total > 2 ? total - 2 : 0, '-') << '\n';
    }
  }
  return os.str();
}

inline std::string eval_table(const std::vector<EvalReport>& reports) {
  std::vector<std::vector<std::string>> rows{{"Categories", "# docs", "Mode", "Evaluated", "Total", "Max acc."}};
  for (const auto& r : reports) {
    rows.push_back({join(r.categories, ", "), std::to_string(r.documents), std::string(to_string(r.mode)),
                    std::to_string(r.combinations_evaluated), std::to_string(r.total_combinations),
                    format_accuracy(r.max_accuracy)});
  }
  return format_table(rows);
}

inline std::string length_bias_table(const LengthBiasResult& r) {
  std::ostringstream corr;
  corr << std::fixed << std::setprecision(4) << r.correlation;
  return format_table({{"Categories", "Mode", "Combinations", "Pearson r"},
                       {join(r.categories, ", "), std::string(to_string(r.mode)),
                        std::to_string(r.combinations_evaluated), corr.str()}});
}

/// Writes to a sibling temp file, then renames over the target.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("io", "cannot write " + tmp.string());
    out << contents;
    out.flush();
    if (!out) throw Error("io", "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io", "cannot read " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline json read_json(const std::filesystem::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw Error("io", path.string() + ": " + e.what());
  }
}

}  // namespace fstc::io
