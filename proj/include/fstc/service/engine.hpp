#pragma once

#include <algorithm>
#include <cstdio>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "fstc/classify.hpp"
#include "fstc/corpus.hpp"
#include "fstc/embed.hpp"
#include "fstc/error.hpp"
#include "fstc/io.hpp"
#include "fstc/service/config.hpp"
#include "fstc/service/state.hpp"
#include "fstc/topics.hpp"
#include "fstc/wordvec.hpp"

namespace fstc::service {

enum class ErrorCode { bad_request, not_found, conflict, unprocessable };

inline int http_status(ErrorCode c) {
  switch (c) {
    case ErrorCode::bad_request: return 400;
    case ErrorCode::not_found: return 404;
    case ErrorCode::conflict: return 409;
    case ErrorCode::unprocessable: return 422;
  }
  return 500;
}

inline std::string_view to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::bad_request: return "bad_request";
    case ErrorCode::not_found: return "not_found";
    case ErrorCode::conflict: return "conflict";
    case ErrorCode::unprocessable: return "unprocessable";
  }
  return "internal";
}

class ServiceError : public Error {
 public:
  ServiceError(ErrorCode code, const std::string& message, io::json detail = nullptr)
      : Error("service", message), code_(code), message_(message), detail_(std::move(detail)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& message() const noexcept { return message_; }
  const io::json& detail() const noexcept { return detail_; }

  io::json body() const { return io::json{{"code", to_string(code_)}, {"message", message_}, {"detail", detail_}}; }

 private:
  ErrorCode code_;
  std::string message_;
  io::json detail_;
};

inline constexpr std::size_t kExcerptChars = 400;
// Selected representatives whose token counts differ by more than this factor
// trigger a warning.
inline constexpr double kLengthImbalanceRatio = 3.0;

inline std::string excerpt(const std::string& text) {
  if (text.size() <= kExcerptChars) return text;
  std::size_t cut = kExcerptChars;
  while (cut > 0 && (static_cast<unsigned char>(text[cut]) & 0xC0) == 0x80) --cut;  // keep UTF-8 intact
  return text.substr(0, cut);
}

struct SubmitResult {
  io::json batch;
  std::vector<std::string> warnings;
};

/// The classification workflow over persisted batches: create (embed + LDA),
/// surface candidates, accept labels, classify, report.
///
/// Mutations of one batch are serialized by its lock; reads share it.
class Engine {
 public:
  Engine(ServiceConfig cfg, std::shared_ptr<const WordVectorTable> vectors)
      : cfg_(std::move(cfg)), vectors_(std::move(vectors)), store_(cfg_.data_dir) {
    if (!vectors_) throw Error("service", "word vectors are required");
    for (const auto& id : store_.list()) {
      auto entry = std::make_shared<Entry>();
      entry->state = store_.load(id);
      batches_.emplace(id, entry);
      next_id_ = std::max(next_id_, sequence_of(id) + 1);
      if (entry->state.status < BatchStatus::candidates_ready && !entry->state.job_error) start_job(entry);
    }
  }

  ~Engine() { wait_for_jobs(); }

  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  const ServiceConfig& config() const { return cfg_; }

  void wait_for_jobs() {
    std::vector<std::jthread> jobs;
    {
      std::lock_guard lock(jobs_mutex_);
      jobs.swap(jobs_);
    }
    jobs.clear();  // joins
  }

  std::string create_batch(const Dataset& upload, const std::vector<std::string>& categories,
                           const io::json& overrides = nullptr) {
    if (categories.size() < 2) throw ServiceError(ErrorCode::bad_request, "at least 2 categories are required");
    std::unordered_set<std::string> unique(categories.begin(), categories.end());
    if (unique.size() != categories.size()) throw ServiceError(ErrorCode::bad_request, "category names must be unique");

    BatchConfig bc;
    try {
      bc = merge_batch_config(cfg_.batch, overrides);
    } catch (const Error& e) {
      throw ServiceError(ErrorCode::bad_request, e.what());
    }

    std::size_t non_empty = 0;
    for (const auto& d : upload.documents) non_empty += d.doc.token_count() > 0;
    if (non_empty < categories.size()) {
      throw ServiceError(ErrorCode::unprocessable,
                         "need at least " + std::to_string(categories.size()) + " non-empty documents",
                         io::json{{"non_empty_documents", non_empty}});
    }

    auto entry = std::make_shared<Entry>();
    BatchState& s = entry->state;
    s.categories = categories;
    s.config = bc;
    s.documents = upload.plain_documents();
    {
      std::lock_guard lock(map_mutex_);
      char buf[32];
      std::snprintf(buf, sizeof buf, "batch-%06zu", next_id_++);
      s.batch_id = buf;
      batches_.emplace(s.batch_id, entry);
    }
    store_.save(s, kAllParts);

    if (s.documents.size() > cfg_.inline_limit) {
      start_job(entry);
    } else {
      run_pipeline(*entry);
    }
    return s.batch_id;
  }

  io::json get_batch(const std::string& id) const {
    auto entry = find(id);
    std::shared_lock lock(entry->mutex);
    return summary(entry->state);
  }

  BatchState snapshot(const std::string& id) const {
    auto entry = find(id);
    std::shared_lock lock(entry->mutex);
    return entry->state;
  }

  io::json get_candidates(const std::string& id, std::size_t page) const {
    auto entry = find(id);
    std::shared_lock lock(entry->mutex);
    const BatchState& s = entry->state;
    require_at_least(s, BatchStatus::candidates_ready);
    const auto& r = *s.ranking;
    if (page >= r.page_count()) {
      throw ServiceError(ErrorCode::not_found, "page " + std::to_string(page) + " is beyond every topic ranking",
                         io::json{{"page_count", r.page_count()}});
    }
    const auto docs = document_index(s);
    io::json topics = io::json::array();
    for (std::size_t t = 0; t < r.topics.size(); ++t) {
      io::json list = io::json::array();
      for (const auto& c : r.page(t, page)) {
        const Document& d = *docs.at(c.doc_id);
        list.push_back(io::json{{"id", d.id},
                                {"excerpt", excerpt(d.raw_text)},
                                {"text", d.raw_text},
                                {"theta", c.probability},
                                {"token_count", d.token_count()}});
      }
      topics.push_back(io::json{{"topic", t}, {"total", r.topics[t].size()}, {"candidates", std::move(list)}});
    }
    return io::json{{"batch_id", s.batch_id},
                    {"page", page},
                    {"page_size", r.page_size},
                    {"page_count", r.page_count()},
                    {"topics", std::move(topics)},
                    {"unrankable", r.unrankable}};
  }

  SubmitResult submit_labels(const std::string& id, const Selection& selections) {
    auto entry = find(id);
    std::unique_lock lock(entry->mutex);
    BatchState& s = entry->state;
    require_at_least(s, BatchStatus::candidates_ready);

    std::map<std::string, const CategorySelection*> by_category;
    for (const auto& sel : selections) {
      if (std::find(s.categories.begin(), s.categories.end(), sel.category) == s.categories.end())
        throw ServiceError(ErrorCode::unprocessable, "unknown category '" + sel.category + "'",
                           io::json{{"category", sel.category}});
      if (!by_category.emplace(sel.category, &sel).second)
        throw ServiceError(ErrorCode::unprocessable, "category '" + sel.category + "' given twice");
    }
    for (const auto& c : s.categories) {
      auto it = by_category.find(c);
      if (it == by_category.end() || it->second->doc_ids.empty())
        throw ServiceError(ErrorCode::unprocessable, "category '" + c + "' unlabeled", io::json{{"category", c}});
    }

    const auto docs = document_index(s);
    const auto emb = index_embeddings(s.embeddings);
    std::unordered_map<std::string, std::string> owner;
    Selection ordered;
    std::size_t min_len = std::numeric_limits<std::size_t>::max(), max_len = 0;
    for (const auto& c : s.categories) {
      const auto& sel = *by_category.at(c);
      for (const auto& doc_id : sel.doc_ids) {
        if (!docs.contains(doc_id))
          throw ServiceError(ErrorCode::unprocessable, "unknown document '" + doc_id + "'", io::json{{"id", doc_id}});
        auto [it, inserted] = owner.emplace(doc_id, c);
        if (!inserted)
          throw ServiceError(ErrorCode::unprocessable, "document '" + doc_id + "' selected for two categories",
                             io::json{{"id", doc_id}, {"categories", {it->second, c}}});
        if (emb.at(doc_id)->is_empty())
          throw ServiceError(ErrorCode::unprocessable, "document '" + doc_id + "' has no usable words",
                             io::json{{"id", doc_id}});
        const std::size_t len = docs.at(doc_id)->token_count();
        min_len = std::min(min_len, len);
        max_len = std::max(max_len, len);
      }
      ordered.push_back(sel);
    }

    SubmitResult result;
    if (static_cast<double>(max_len) > kLengthImbalanceRatio * static_cast<double>(min_len)) {
      result.warnings.push_back("length_imbalance: selected representatives range from " + std::to_string(min_len) +
                                " to " + std::to_string(max_len) +
                                " tokens; pick representatives of similar length");
    }

    s.selections = std::move(ordered);
    s.status = BatchStatus::labeled;
    s.predictions.clear();
    s.unclassifiable.clear();
    store_.save(s, kPredictions | kMeta);
    result.batch = summary(s);
    result.batch["warnings"] = result.warnings;
    return result;
  }

  io::json run_classification(const std::string& id) {
    auto entry = find(id);
    std::unique_lock lock(entry->mutex);
    BatchState& s = entry->state;
    if (s.status != BatchStatus::labeled) {
      throw ServiceError(ErrorCode::conflict, "batch is " + std::string(to_string(s.status)) + ", expected labeled",
                         io::json{{"status", to_string(s.status)}});
    }
    const auto protos = build_prototypes(s.selections, s.embeddings);
    auto result = classify_batch(s.embeddings, protos);
    s.predictions = std::move(result.predictions);
    s.unclassifiable = std::move(result.unclassifiable);
    s.status = BatchStatus::classified;
    store_.save(s, kPredictions | kMeta);
    return classification_summary(s);
  }

  io::json get_predictions(const std::string& id, const std::optional<std::string>& category,
                           std::optional<std::size_t> page = std::nullopt, std::size_t page_size = 50) const {
    auto entry = find(id);
    std::shared_lock lock(entry->mutex);
    const BatchState& s = entry->state;
    if (s.status != BatchStatus::classified) {
      throw ServiceError(ErrorCode::conflict, "batch is " + std::string(to_string(s.status)) + ", expected classified",
                         io::json{{"status", to_string(s.status)}});
    }
    if (category && std::find(s.categories.begin(), s.categories.end(), *category) == s.categories.end())
      throw ServiceError(ErrorCode::bad_request, "unknown category '" + *category + "'");
    if (page_size == 0) throw ServiceError(ErrorCode::bad_request, "page_size must be positive");

    std::vector<const Prediction*> rows;
    for (const auto& p : s.predictions)
      if (!category || p.category == *category) rows.push_back(&p);
    std::sort(rows.begin(), rows.end(), [](const Prediction* a, const Prediction* b) {
      if (a->score != b->score) return a->score > b->score;
      return a->doc_id < b->doc_id;
    });
    std::size_t begin = 0, end = rows.size();
    if (page) {
      begin = std::min(rows.size(), *page * page_size);
      end = std::min(rows.size(), begin + page_size);
    }
    const auto docs = document_index(s);
    io::json list = io::json::array();
    for (std::size_t i = begin; i < end; ++i) {
      auto j = io::to_json(*rows[i]);
      j["excerpt"] = excerpt(docs.at(rows[i]->doc_id)->raw_text);
      list.push_back(std::move(j));
    }
    io::json out{{"batch_id", s.batch_id}, {"total", rows.size()}, {"predictions", std::move(list)}};
    out["category"] = category ? io::json(*category) : io::json(nullptr);
    out["page"] = page ? io::json(*page) : io::json(nullptr);
    out["summary"] = classification_summary(s);
    return out;
  }

 private:
  struct Entry {
    mutable std::shared_mutex mutex;
    BatchState state;
  };

  static std::size_t sequence_of(const std::string& id) {
    const auto dash = id.rfind('-');
    try {
      return dash == std::string::npos ? 0 : std::stoul(id.substr(dash + 1));
    } catch (const std::exception&) {
      return 0;
    }
  }

  std::shared_ptr<Entry> find(const std::string& id) const {
    std::lock_guard lock(map_mutex_);
    auto it = batches_.find(id);
    if (it == batches_.end()) throw ServiceError(ErrorCode::not_found, "unknown batch '" + id + "'");
    return it->second;
  }

  static void require_at_least(const BatchState& s, BatchStatus status) {
    if (s.job_error) throw ServiceError(ErrorCode::conflict, "batch processing failed: " + *s.job_error);
    if (s.status < status) {
      throw ServiceError(ErrorCode::conflict,
                         "batch is " + std::string(to_string(s.status)) + ", needs " + std::string(to_string(status)),
                         io::json{{"status", to_string(s.status)}});
    }
  }

  static std::unordered_map<std::string, const Document*> document_index(const BatchState& s) {
    std::unordered_map<std::string, const Document*> idx;
    for (const auto& d : s.documents) idx.emplace(d.id, &d);
    return idx;
  }

  static io::json summary(const BatchState& s) {
    std::size_t empty = 0;
    for (const auto& d : s.documents) empty += d.token_count() == 0;
    io::json j{{"batch_id", s.batch_id},
               {"categories", s.categories},
               {"status", to_string(s.status)},
               {"documents", s.documents.size()},
               {"empty_documents", empty},
               {"oov_occurrences", s.oov_occurrences},
               {"config", to_json(s.config)},
               {"selections", io::to_json(s.selections)}};
    j["job_error"] = s.job_error ? io::json(*s.job_error) : io::json(nullptr);
    if (s.ranking) {
      io::json sizes = io::json::array();
      for (const auto& t : s.ranking->topics) sizes.push_back(t.size());
      j["topics"] = io::json{{"k", s.ranking->topics.size()},
                             {"sizes", sizes},
                             {"page_count", s.ranking->page_count()},
                             {"unrankable", s.ranking->unrankable.size()}};
    }
    if (s.status == BatchStatus::classified) j["classification"] = classification_summary(s);
    return j;
  }

  static io::json classification_summary(const BatchState& s) {
    io::json counts = io::json::object();
    for (const auto& c : s.categories) counts[c] = 0;
    for (const auto& p : s.predictions) counts[p.category] = counts[p.category].get<std::size_t>() + 1;
    std::size_t reps = 0;
    for (const auto& sel : s.selections) reps += sel.doc_ids.size();
    return io::json{{"counts", counts},
                     {"predicted", s.predictions.size()},
                     {"representatives", reps},
                     {"unclassifiable", s.unclassifiable},
                     {"total_documents", s.documents.size()}};
  }

  // Embedding and LDA run without the batch lock; the results are committed
  // under it. Only one pipeline ever runs per batch.
  void run_pipeline(Entry& entry) {
    std::vector<Document> docs;
    BatchConfig bc;
    std::size_t k = 0;
    {
      std::shared_lock lock(entry.mutex);
      docs = entry.state.documents;
      bc = entry.state.config;
      k = entry.state.categories.size();
    }
    try {
      auto embedded = embed_batch(docs, *vectors_, build_unigram_model(docs), SifConfig{bc.alpha_sif});
      {
        std::unique_lock lock(entry.mutex);
        entry.state.embeddings = std::move(embedded.embeddings);
        entry.state.oov_occurrences = embedded.skips.total;
        entry.state.status = BatchStatus::embedded;
        store_.save(entry.state, kEmbeddings | kMeta);
      }
      auto ranking = rank_candidates(fit_lda(docs, bc.lda(k)), bc.page_size);
      std::unique_lock lock(entry.mutex);
      entry.state.ranking = std::move(ranking);
      entry.state.status = BatchStatus::candidates_ready;
      store_.save(entry.state, kCandidates | kMeta);
    } catch (const std::exception& e) {
      std::unique_lock lock(entry.mutex);
      entry.state.job_error = e.what();
      store_.save(entry.state, kMeta);
      throw ServiceError(ErrorCode::unprocessable, e.what());
    }
  }

  void start_job(std::shared_ptr<Entry> entry) {
    std::lock_guard lock(jobs_mutex_);
    jobs_.emplace_back([this, entry] {
      try {
        run_pipeline(*entry);
      } catch (const std::exception&) {
        // Recorded in the batch's job_error.
      }
    });
  }

  ServiceConfig cfg_;
  std::shared_ptr<const WordVectorTable> vectors_;
  BatchStore store_;
  mutable std::mutex map_mutex_;
  std::map<std::string, std::shared_ptr<Entry>> batches_;
  std::size_t next_id_ = 1;
  std::mutex jobs_mutex_;
  std::vector<std::jthread> jobs_;
};

}  // namespace fstc::service
