#pragma once

// Maximum-achievable one-shot accuracy studies.
//
// Every one-shot combination picks one document per category as that
// category's prototype. Because a one-document prototype is the document's own
// embedding, classifying the rest only needs cosine(doc, candidate) for every
// candidate. Those values are computed once with the same kernel
// classify_batch uses, so the fast path reproduces the reference path bit for
// bit; per-combination cost drops to O(n * k) lookups.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "fstc/classify.hpp"
#include "fstc/corpus.hpp"
#include "fstc/embed.hpp"
#include "fstc/error.hpp"
#include "fstc/parallel.hpp"
#include "fstc/topics.hpp"

namespace fstc {

enum class AccuracyConvention { include_reps, exclude_reps };

inline std::string_view to_string(AccuracyConvention c) {
  return c == AccuracyConvention::include_reps ? "include_reps" : "exclude_reps";
}

/// exclude_reps: correct / predicted.
/// include_reps: (correct + reps) / (predicted + reps); representatives carry
/// human labels and count as correct.
inline double accuracy(std::span<const Prediction> predictions,
                       const std::unordered_map<std::string, std::string>& gold, const Selection& representatives,
                       AccuracyConvention convention) {
  std::size_t correct = 0;
  for (const auto& p : predictions) {
    auto it = gold.find(p.doc_id);
    if (it == gold.end()) throw Error("evalharness", "no gold label for document '" + p.doc_id + "'");
    if (it->second == p.category) ++correct;
  }
  std::size_t reps = 0;
  if (convention == AccuracyConvention::include_reps)
    for (const auto& s : representatives) reps += s.doc_ids.size();
  const std::size_t denom = predictions.size() + reps;
  if (denom == 0) throw Error("evalharness", "accuracy: zero denominator");
  return static_cast<double>(correct + reps) / static_cast<double>(denom);
}

inline std::unordered_map<std::string, std::string> gold_labels(const Dataset& ds) {
  std::unordered_map<std::string, std::string> gold;
  for (const auto& d : ds.documents)
    if (d.gold_label) gold.emplace(d.doc.id, *d.gold_label);
  return gold;
}

enum class SearchMode { exhaustive, sampled, lda_restricted };
enum class EvalFailure { lda_missing_category };

inline std::string_view to_string(SearchMode m) {
  switch (m) {
    case SearchMode::exhaustive: return "exhaustive";
    case SearchMode::sampled: return "sampled";
    case SearchMode::lda_restricted: return "lda_restricted";
  }
  return "?";
}

struct SearchOptions {
  std::uint64_t budget = 500'000;
  std::uint64_t seed = 7;
  std::size_t threads = 0;  // 0: hardware concurrency
  // Above this the candidate x document similarity table is not materialized
  // and similarities are recomputed per combination.
  std::size_t max_table_bytes = std::size_t{2} << 30;
};

struct EvalReport {
  std::string dataset_id;
  std::vector<std::string> categories;
  std::size_t documents = 0;  // labeled documents with a non-empty embedding
  SearchMode mode = SearchMode::exhaustive;
  std::uint64_t combinations_evaluated = 0;
  std::uint64_t total_combinations = 0;  // saturates at UINT64_MAX
  Selection best_combination;
  std::optional<double> max_accuracy;              // exclude_reps; absent on failure
  std::optional<double> max_accuracy_include_reps;  // same combination, include_reps
  std::size_t best_correct = 0;
  std::size_t predicted = 0;
  std::uint64_t seed = 0;
  std::optional<EvalFailure> failure;
};

namespace detail {

inline std::uint64_t saturating_mul(std::uint64_t a, std::uint64_t b) {
  if (a != 0 && b > std::numeric_limits<std::uint64_t>::max() / a) return std::numeric_limits<std::uint64_t>::max();
  return a * b;
}

// Unbiased integer in [0, n).
inline std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t threshold = (0 - n) % n;
  for (;;) {
    const std::uint64_t r = rng();
    if (r >= threshold) return r % n;
  }
}

using Combination = std::vector<std::uint32_t>;  // one pool position per category

struct CombinationHash {
  std::size_t operator()(const Combination& c) const noexcept {
    std::size_t h = 1469598103934665603ull;
    for (auto v : c) h = (h ^ v) * 1099511628211ull;
    return h;
  }
};

/// Shared state for one-shot searches over a labeled batch.
class OneShotEngine {
 public:
  // `allowed` restricts candidate pools; nullptr means every evaluable document.
  OneShotEngine(const Dataset& ds, std::span<const DocumentEmbedding> embeddings,
                const std::unordered_set<std::string>* allowed, const SearchOptions& opts)
      : opts_(opts) {
    categories_ = ds.categories;
    if (categories_.size() < 2) throw Error("evalharness", "at least 2 categories are required");
    std::unordered_map<std::string, std::size_t> cat_index;
    for (std::size_t c = 0; c < categories_.size(); ++c) cat_index.emplace(categories_[c], c);

    const auto idx = index_embeddings(embeddings);
    pools_.resize(categories_.size());
    for (const auto& d : ds.documents) {
      if (!d.gold_label) throw Error("evalharness", "document '" + d.doc.id + "' has no gold label");
      auto e = idx.find(d.doc.id);
      if (e == idx.end()) throw Error("evalharness", "no embedding for document '" + d.doc.id + "'");
      if (e->second->is_empty()) continue;
      const auto doc = static_cast<std::uint32_t>(docs_.size());
      docs_.push_back(e->second);
      ids_.push_back(d.doc.id);
      token_counts_.push_back(d.doc.token_count());
      labels_.push_back(static_cast<std::uint32_t>(cat_index.at(*d.gold_label)));
      if (!allowed || allowed->contains(d.doc.id)) pools_[labels_.back()].push_back(doc);
    }
    // Pools sorted by id so positional order is lexicographic doc-id order.
    for (auto& pool : pools_)
      std::sort(pool.begin(), pool.end(), [&](std::uint32_t a, std::uint32_t b) { return ids_[a] < ids_[b]; });

    total_ = 1;
    for (const auto& pool : pools_) total_ = saturating_mul(total_, pool.size());
  }

  const std::vector<std::string>& categories() const { return categories_; }
  const std::vector<std::vector<std::uint32_t>>& pools() const { return pools_; }
  std::uint64_t total_combinations() const { return total_; }
  std::size_t evaluable_docs() const { return docs_.size(); }
  std::size_t predicted_per_combination() const { return docs_.size() - categories_.size(); }
  const std::string& id(std::uint32_t doc) const { return ids_[doc]; }
  std::size_t token_count(std::uint32_t doc) const { return token_counts_[doc]; }
  bool any_pool_empty() const {
    return std::any_of(pools_.begin(), pools_.end(), [](const auto& p) { return p.empty(); });
  }

  // Builds the candidate x document cosine table when it fits in memory.
  void prepare() {
    std::vector<std::uint32_t> candidates;
    for (const auto& pool : pools_) candidates.insert(candidates.end(), pool.begin(), pool.end());
    const std::size_t n = docs_.size();
    if (candidates.size() * n * sizeof(double) > opts_.max_table_bytes) return;
    row_of_.assign(n, kNoRow);
    for (std::size_t r = 0; r < candidates.size(); ++r) row_of_[candidates[r]] = static_cast<std::uint32_t>(r);
    table_.assign(candidates.size() * n, 0.0);
    parallel_for_chunks(candidates.size(), opts_.threads, [&](std::size_t begin, std::size_t end, std::size_t) {
      for (std::size_t r = begin; r < end; ++r) {
        const auto& proto = docs_[candidates[r]]->vector;
        for (std::size_t j = 0; j < n; ++j) table_[r * n + j] = cosine_similarity(docs_[j]->vector, proto);
      }
    });
    tabulated_ = true;
  }

  std::vector<std::uint32_t> decode(std::uint64_t index) const {
    std::vector<std::uint32_t> reps(pools_.size());
    for (std::size_t c = pools_.size(); c-- > 0;) {
      reps[c] = static_cast<std::uint32_t>(index % pools_[c].size());
      index /= pools_[c].size();
    }
    return reps;
  }

  /// Classifies every evaluable non-representative document against the
  /// chosen representatives (pool positions). Returns the number of correct
  /// predictions; per-category prediction counts go to `predicted` if given.
  std::size_t evaluate(const Combination& combo, std::vector<std::size_t>* predicted,
                       std::vector<double>& scratch) const {
    const std::size_t k = pools_.size(), n = docs_.size();
    std::vector<std::uint32_t> reps(k);
    for (std::size_t c = 0; c < k; ++c) reps[c] = pools_[c][combo[c]];

    const double* rows[16];
    std::vector<const double*> rows_heap;
    const double** row = rows;
    if (k > 16) {
      rows_heap.resize(k);
      row = rows_heap.data();
    }
    if (tabulated_) {
      for (std::size_t c = 0; c < k; ++c) row[c] = table_.data() + std::size_t{row_of_[reps[c]]} * n;
    } else {
      scratch.resize(k * n);
      for (std::size_t c = 0; c < k; ++c) {
        const auto& proto = docs_[reps[c]]->vector;
        for (std::size_t j = 0; j < n; ++j) scratch[c * n + j] = cosine_similarity(docs_[j]->vector, proto);
        row[c] = scratch.data() + c * n;
      }
    }

    if (predicted) predicted->assign(k, 0);
    std::size_t correct = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (std::find(reps.begin(), reps.end(), static_cast<std::uint32_t>(j)) != reps.end()) continue;
      std::size_t best = 0;
      for (std::size_t c = 1; c < k; ++c)
        if (row[c][j] > row[best][j]) best = c;
      if (best == labels_[j]) ++correct;
      if (predicted) ++(*predicted)[best];
    }
    return correct;
  }

  Selection to_selection(const Combination& combo) const {
    Selection s;
    for (std::size_t c = 0; c < combo.size(); ++c) s.push_back({categories_[c], {ids_[pools_[c][combo[c]]]}});
    return s;
  }

  /// Distinct uniformly drawn combinations, in draw order.
  std::vector<Combination> sample(std::uint64_t count, std::uint64_t seed) const {
    std::mt19937_64 rng(seed);
    std::unordered_set<Combination, CombinationHash> seen;
    std::vector<Combination> out;
    out.reserve(count);
    while (out.size() < count) {
      Combination c(pools_.size());
      for (std::size_t i = 0; i < c.size(); ++i) c[i] = static_cast<std::uint32_t>(uniform_index(rng, pools_[i].size()));
      if (seen.insert(c).second) out.push_back(std::move(c));
    }
    return out;
  }

 private:
  static constexpr std::uint32_t kNoRow = std::numeric_limits<std::uint32_t>::max();

  SearchOptions opts_;
  std::vector<std::string> categories_;
  std::vector<const DocumentEmbedding*> docs_;
  std::vector<std::string> ids_;
  std::vector<std::size_t> token_counts_;
  std::vector<std::uint32_t> labels_;
  std::vector<std::vector<std::uint32_t>> pools_;
  std::uint64_t total_ = 0;
  bool tabulated_ = false;
  std::vector<std::uint32_t> row_of_;
  std::vector<double> table_;
};

struct Best {
  std::size_t correct = 0;
  Combination combo;  // empty until something was evaluated

  // Higher accuracy wins; equal accuracy goes to the lexicographically
  // smaller combination so the result is independent of scheduling.
  void offer(std::size_t c, const Combination& candidate) {
    if (combo.empty() || c > correct || (c == correct && candidate < combo)) {
      correct = c;
      combo = candidate;
    }
  }
};

// Evaluates `count` combinations produced by `nth(i)` across workers.
template <class Nth>
Best search(const OneShotEngine& engine, std::uint64_t count, std::size_t threads, Nth&& nth) {
  const std::size_t workers = std::min<std::size_t>(resolve_threads(threads), std::max<std::uint64_t>(count, 1));
  std::vector<Best> partial(workers);
  parallel_for_chunks(count, workers, [&](std::size_t begin, std::size_t end, std::size_t w) {
    std::vector<double> scratch;
    for (std::size_t i = begin; i < end; ++i) {
      const Combination combo = nth(i);
      partial[w].offer(engine.evaluate(combo, nullptr, scratch), combo);
    }
  });
  Best best;
  for (const auto& p : partial)
    if (!p.combo.empty()) best.offer(p.correct, p.combo);
  return best;
}

inline void fill_result(EvalReport& r, const OneShotEngine& engine, const Best& best) {
  const std::size_t predicted = engine.predicted_per_combination();
  if (predicted == 0) throw Error("evalharness", "accuracy: zero denominator");
  r.best_combination = engine.to_selection(best.combo);
  r.best_correct = best.correct;
  r.predicted = predicted;
  const std::size_t k = engine.categories().size();
  r.max_accuracy = static_cast<double>(best.correct) / static_cast<double>(predicted);
  r.max_accuracy_include_reps = static_cast<double>(best.correct + k) / static_cast<double>(predicted + k);
}

}  // namespace detail

/// Best one-shot accuracy over all (or, above the budget, a uniform sample of)
/// one-document-per-category representative choices.
inline EvalReport search_max_one_shot(const Dataset& ds, std::span<const DocumentEmbedding> embeddings,
                                      const SearchOptions& opts = {}) {
  if (opts.budget == 0) throw Error("evalharness", "budget must be positive");
  detail::OneShotEngine engine(ds, embeddings, nullptr, opts);
  if (engine.any_pool_empty()) throw Error("evalharness", "a category has no documents with an embedding");

  EvalReport r;
  r.dataset_id = ds.id;
  r.categories = ds.categories;
  r.documents = engine.evaluable_docs();
  r.total_combinations = engine.total_combinations();
  r.seed = opts.seed;
  engine.prepare();

  detail::Best best;
  if (r.total_combinations <= opts.budget) {
    r.mode = SearchMode::exhaustive;
    r.combinations_evaluated = r.total_combinations;
    best = detail::search(engine, r.total_combinations, opts.threads, [&](std::uint64_t i) { return engine.decode(i); });
  } else {
    r.mode = SearchMode::sampled;
    r.combinations_evaluated = opts.budget;
    const auto samples = engine.sample(opts.budget, opts.seed);
    best = detail::search(engine, samples.size(), opts.threads, [&](std::uint64_t i) { return samples[i]; });
  }
  detail::fill_result(r, engine, best);
  return r;
}

/// Union of each topic's first page of LDA candidates.
inline std::unordered_set<std::string> first_page_pool(const CandidateRanking& ranking) {
  std::unordered_set<std::string> pool;
  for (std::size_t t = 0; t < ranking.topics.size(); ++t)
    for (const auto& c : ranking.first_page(t)) pool.insert(c.doc_id);
  return pool;
}

/// Best one-shot accuracy when representatives may only come from the first
/// `page_size` documents of each LDA topic, each used for its gold category.
inline EvalReport search_lda_restricted(const Dataset& ds, std::span<const DocumentEmbedding> embeddings,
                                        const TopicModel& model, std::size_t page_size = 12,
                                        const SearchOptions& opts = {}) {
  if (model.theta.cols() != ds.categories.size()) {
    throw Error("evalharness", "topic count " + std::to_string(model.theta.cols()) + " differs from category count " +
                                   std::to_string(ds.categories.size()));
  }
  const auto pool = first_page_pool(rank_candidates(model, page_size));
  detail::OneShotEngine engine(ds, embeddings, &pool, opts);

  EvalReport r;
  r.dataset_id = ds.id;
  r.categories = ds.categories;
  r.documents = engine.evaluable_docs();
  r.mode = SearchMode::lda_restricted;
  r.seed = model.config.seed;
  if (engine.any_pool_empty()) {
    r.failure = EvalFailure::lda_missing_category;
    return r;
  }
  r.total_combinations = engine.total_combinations();
  r.combinations_evaluated = r.total_combinations;
  engine.prepare();
  const auto best =
      detail::search(engine, r.total_combinations, opts.threads, [&](std::uint64_t i) { return engine.decode(i); });
  detail::fill_result(r, engine, best);
  return r;
}

/// Reference path: rebuilds prototypes and reclassifies from scratch.
inline double replay_accuracy(const Dataset& ds, std::span<const DocumentEmbedding> embeddings,
                              const Selection& combination,
                              AccuracyConvention convention = AccuracyConvention::exclude_reps) {
  const auto protos = build_prototypes(combination, embeddings);
  const auto result = classify_batch(embeddings, protos);
  return accuracy(result.predictions, gold_labels(ds), combination, convention);
}

inline double pearson_correlation(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw Error("evalharness", "correlation needs two equal series of length >= 2");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw Error("evalharness", "correlation undefined: degenerate variance");
  return sxy / std::sqrt(sxx * syy);
}

struct LengthBiasRow {
  std::string rep_a, rep_b;
  std::size_t len_a = 0, len_b = 0;
  std::size_t predicted_a = 0, predicted_b = 0;
  double x = 0.0;  // len_a / (len_a + len_b)
  double y = 0.0;  // predicted_a / (predicted_a + predicted_b)
};

struct LengthBiasResult {
  std::string dataset_id;
  std::vector<std::string> categories;
  SearchMode mode = SearchMode::exhaustive;
  std::uint64_t combinations_evaluated = 0;
  std::uint64_t total_combinations = 0;
  double correlation = 0.0;
  std::vector<LengthBiasRow> rows;
};

/// Correlation between a representative's share of the combined
/// representative length and its category's share of the predictions.
inline LengthBiasResult length_bias_analysis(const Dataset& ds, std::span<const DocumentEmbedding> embeddings,
                                             const SearchOptions& opts = {}) {
  if (ds.categories.size() != 2) {
    throw Error("evalharness", "length bias analysis needs exactly 2 categories, dataset has " +
                                   std::to_string(ds.categories.size()));
  }
  detail::OneShotEngine engine(ds, embeddings, nullptr, opts);
  if (engine.any_pool_empty()) throw Error("evalharness", "a category has no documents with an embedding");
  if (engine.predicted_per_combination() == 0) throw Error("evalharness", "no documents left to predict");

  LengthBiasResult r;
  r.dataset_id = ds.id;
  r.categories = ds.categories;
  r.total_combinations = engine.total_combinations();
  engine.prepare();

  std::vector<detail::Combination> samples;
  if (r.total_combinations <= opts.budget) {
    r.combinations_evaluated = r.total_combinations;
  } else {
    r.mode = SearchMode::sampled;
    samples = engine.sample(opts.budget, opts.seed);
    r.combinations_evaluated = samples.size();
  }
  r.rows.resize(r.combinations_evaluated);
  parallel_for_chunks(r.rows.size(), opts.threads, [&](std::size_t begin, std::size_t end, std::size_t) {
    std::vector<double> scratch;
    std::vector<std::size_t> predicted;
    for (std::size_t i = begin; i < end; ++i) {
      const auto combo = samples.empty() ? engine.decode(i) : samples[i];
      engine.evaluate(combo, &predicted, scratch);
      auto& row = r.rows[i];
      const auto a = engine.pools()[0][combo[0]], b = engine.pools()[1][combo[1]];
      row.rep_a = engine.id(a);
      row.rep_b = engine.id(b);
      row.len_a = engine.token_count(a);
      row.len_b = engine.token_count(b);
      row.predicted_a = predicted[0];
      row.predicted_b = predicted[1];
      row.x = static_cast<double>(row.len_a) / static_cast<double>(row.len_a + row.len_b);
      row.y = static_cast<double>(row.predicted_a) / static_cast<double>(row.predicted_a + row.predicted_b);
    }
  });

  std::vector<double> xs(r.rows.size()), ys(r.rows.size());
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    xs[i] = r.rows[i].x;
    ys[i] = r.rows[i].y;
  }
  r.correlation = pearson_correlation(xs, ys);
  return r;
}

}  // namespace fstc
