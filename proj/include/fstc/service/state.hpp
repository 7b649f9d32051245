#pragma once

// Durable per-batch state. Each batch owns one directory:
//
//   state.json         status, categories, config, selections (format_version)
//   documents.jsonl    id, raw text, cleaned tokens
//   embeddings.jsonl   document embeddings
//   candidates.json    per-topic LDA ranking
//   predictions.json   predictions and unclassifiable ids
//
// Every file is replaced atomically (temp file + rename).

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fstc/classify.hpp"
#include "fstc/corpus.hpp"
#include "fstc/embed.hpp"
#include "fstc/error.hpp"
#include "fstc/io.hpp"
#include "fstc/service/config.hpp"
#include "fstc/topics.hpp"

namespace fstc::service {

inline constexpr int kStateFormatVersion = 1;

enum class BatchStatus { ingested, embedded, candidates_ready, labeled, classified };

inline std::string_view to_string(BatchStatus s) {
  switch (s) {
    case BatchStatus::ingested: return "ingested";
    case BatchStatus::embedded: return "embedded";
    case BatchStatus::candidates_ready: return "candidates_ready";
    case BatchStatus::labeled: return "labeled";
    case BatchStatus::classified: return "classified";
  }
  return "?";
}

inline BatchStatus parse_status(std::string_view s) {
  for (auto st : {BatchStatus::ingested, BatchStatus::embedded, BatchStatus::candidates_ready, BatchStatus::labeled,
                  BatchStatus::classified})
    if (to_string(st) == s) return st;
  throw Error("service", "unknown batch status '" + std::string(s) + "'");
}

struct BatchState {
  std::string batch_id;
  std::vector<std::string> categories;
  BatchStatus status = BatchStatus::ingested;
  BatchConfig config;
  std::vector<Document> documents;
  std::vector<DocumentEmbedding> embeddings;
  std::size_t oov_occurrences = 0;
  std::optional<CandidateRanking> ranking;
  Selection selections;
  std::vector<Prediction> predictions;
  std::vector<std::string> unclassifiable;
  std::optional<std::string> job_error;  // set when a background job failed
};

// Which files a mutation touched.
enum StatePart : unsigned {
  kMeta = 1u << 0,
  kDocuments = 1u << 1,
  kEmbeddings = 1u << 2,
  kCandidates = 1u << 3,
  kPredictions = 1u << 4,
  kAllParts = 0x1f,
};

inline io::json meta_json(const BatchState& s) {
  io::json j{{"format_version", kStateFormatVersion},
             {"batch_id", s.batch_id},
             {"categories", s.categories},
             {"status", to_string(s.status)},
             {"config", to_json(s.config)},
             {"oov_occurrences", s.oov_occurrences},
             {"selections", io::to_json(s.selections)}};
  j["job_error"] = s.job_error ? io::json(*s.job_error) : io::json(nullptr);
  return j;
}

inline std::string documents_jsonl(const BatchState& s) {
  std::string out;
  for (const auto& d : s.documents)
    out += io::json{{"id", d.id}, {"text", d.raw_text}, {"tokens", d.tokens}}.dump() + "\n";
  return out;
}

inline std::string embeddings_jsonl(const BatchState& s) {
  std::string out;
  for (const auto& e : s.embeddings) out += io::to_json(e).dump() + "\n";
  return out;
}

inline io::json predictions_json(const BatchState& s) {
  io::json preds = io::json::array();
  for (const auto& p : s.predictions) preds.push_back(io::to_json(p));
  return io::json{{"predictions", std::move(preds)}, {"unclassifiable", s.unclassifiable}};
}

/// Everything that defines a batch, as one JSON value. Used to compare states.
inline io::json full_state_json(const BatchState& s) {
  io::json j = meta_json(s);
  j["documents"] = documents_jsonl(s);
  j["embeddings"] = embeddings_jsonl(s);
  j["candidates"] = s.ranking ? io::to_json(*s.ranking) : io::json(nullptr);
  j["predictions"] = predictions_json(s);
  return j;
}

class BatchStore {
 public:
  explicit BatchStore(std::filesystem::path root) : root_(std::move(root)) {
    std::filesystem::create_directories(root_);
  }

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path dir(const std::string& batch_id) const { return root_ / batch_id; }

  std::vector<std::string> list() const {
    std::vector<std::string> ids;
    for (const auto& entry : std::filesystem::directory_iterator(root_))
      if (entry.is_directory() && std::filesystem::exists(entry.path() / "state.json"))
        ids.push_back(entry.path().filename().string());
    std::sort(ids.begin(), ids.end());
    return ids;
  }

  void save(const BatchState& s, unsigned parts) const {
    const auto d = dir(s.batch_id);
    std::filesystem::create_directories(d);
    // Bulk files first; state.json is the commit point for a status change.
    if (parts & kDocuments) io::write_file_atomic(d / "documents.jsonl", documents_jsonl(s));
    if (parts & kEmbeddings) io::write_file_atomic(d / "embeddings.jsonl", embeddings_jsonl(s));
    if (parts & kCandidates) {
      io::write_file_atomic(d / "candidates.json", s.ranking ? io::to_json(*s.ranking).dump() : "null");
    }
    if (parts & kPredictions) io::write_file_atomic(d / "predictions.json", predictions_json(s).dump());
    if (parts & kMeta) io::write_file_atomic(d / "state.json", meta_json(s).dump(2));
  }

  BatchState load(const std::string& batch_id) const {
    const auto d = dir(batch_id);
    BatchState s;
    try {
      const auto meta = io::read_json(d / "state.json");
      if (meta.at("format_version").get<int>() != kStateFormatVersion)
        throw Error("service", "batch " + batch_id + ": unsupported state format");
      s.batch_id = meta.at("batch_id").get<std::string>();
      s.categories = meta.at("categories").get<std::vector<std::string>>();
      s.status = parse_status(meta.at("status").get<std::string>());
      s.config = merge_batch_config(BatchConfig{}, meta.at("config"));
      s.oov_occurrences = meta.at("oov_occurrences").get<std::size_t>();
      s.selections = io::selection_from_json(meta.at("selections"));
      if (!meta.at("job_error").is_null()) s.job_error = meta.at("job_error").get<std::string>();

      for_each_line(d / "documents.jsonl", [&](const io::json& j) {
        s.documents.push_back(
            {j.at("id").get<std::string>(), j.at("text").get<std::string>(), j.at("tokens").get<std::vector<std::string>>()});
      });
      if (std::filesystem::exists(d / "embeddings.jsonl"))
        for_each_line(d / "embeddings.jsonl", [&](const io::json& j) { s.embeddings.push_back(io::embedding_from_json(j)); });
      if (std::filesystem::exists(d / "candidates.json")) {
        auto c = io::read_json(d / "candidates.json");
        if (!c.is_null()) s.ranking = io::ranking_from_json(c);
      }
      if (std::filesystem::exists(d / "predictions.json")) {
        auto p = io::read_json(d / "predictions.json");
        for (const auto& e : p.at("predictions")) s.predictions.push_back(io::prediction_from_json(e));
        s.unclassifiable = p.at("unclassifiable").get<std::vector<std::string>>();
      }
    } catch (const io::json::exception& e) {
      throw Error("service", "batch " + batch_id + ": corrupt state: " + e.what());
    }
    return s;
  }

 private:
  template <class Fn>
  static void for_each_line(const std::filesystem::path& path, Fn&& fn) {
    std::istringstream in(io::read_file(path));
    std::string line;
    while (std::getline(in, line))
      if (!line.empty()) fn(io::json::parse(line));
  }

  std::filesystem::path root_;
};

}  // namespace fstc::service
