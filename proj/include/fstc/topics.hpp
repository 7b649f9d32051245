#pragma once

// Latent Dirichlet allocation fitted by collapsed Gibbs sampling, and the
// per-topic document rankings used to surface labeling candidates.
//
//   theta[d][t] = (n_dt + alpha) / (len_d + K * alpha)
//   phi[t][w]   = (n_tw + beta)  / (n_t   + V * beta)
//
// Both are read off the final sample. Sampling is single-threaded and fully
// determined by (document order, config).

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "fstc/corpus.hpp"
#include "fstc/error.hpp"

namespace fstc {

struct LdaConfig {
  std::size_t k = 2;
  std::optional<double> alpha_lda;  // defaults to 50 / k
  double beta_lda = 0.01;
  std::size_t iterations = 1000;
  std::uint64_t seed = 7;

  double alpha() const { return alpha_lda.value_or(50.0 / static_cast<double>(k)); }

  void validate(std::size_t min_topics = 2) const {
    if (k < min_topics) throw Error("topics", "k must be at least " + std::to_string(min_topics));
    if (!(alpha() > 0.0)) throw Error("topics", "alpha_lda must be positive");
    if (!(beta_lda > 0.0)) throw Error("topics", "beta_lda must be positive");
    if (iterations < 1) throw Error("topics", "iterations must be at least 1");
  }
};

inline bool operator==(const LdaConfig& a, const LdaConfig& b) {
  return a.k == b.k && a.alpha() == b.alpha() && a.beta_lda == b.beta_lda && a.iterations == b.iterations &&
         a.seed == b.seed;
}

// Row-major dense matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  const std::vector<double>& data() const noexcept { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> data_;
};

struct TopicModel {
  LdaConfig config;
  std::vector<std::string> doc_ids;     // documents that were modeled, batch order
  std::vector<std::string> vocabulary;  // word id -> token
  Matrix theta;                         // doc_ids.size() x k
  Matrix phi;                           // k x vocabulary.size()
  std::vector<std::vector<std::uint32_t>> assignments;
  std::vector<std::string> unrankable;  // empty documents left out of the fit

  friend bool operator==(const TopicModel&, const TopicModel&) = default;
};

namespace detail {

// Uniform double in [0, 1) from the top 53 bits; keeps runs identical across
// standard library implementations.
inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

class GibbsSampler {
 public:
  GibbsSampler(std::span<const Document> docs, const LdaConfig& cfg)
      : cfg_(cfg), k_(cfg.k), alpha_(cfg.alpha()), beta_(cfg.beta_lda), rng_(cfg.seed) {
    std::unordered_map<std::string, std::uint32_t> word_ids;
    for (const auto& d : docs) {
      if (d.tokens.empty()) {
        unrankable_.push_back(d.id);
        continue;
      }
      doc_ids_.push_back(d.id);
      auto& words = words_.emplace_back();
      words.reserve(d.tokens.size());
      for (const auto& t : d.tokens) {
        auto [it, inserted] = word_ids.try_emplace(t, static_cast<std::uint32_t>(vocabulary_.size()));
        if (inserted) vocabulary_.push_back(t);
        words.push_back(it->second);
      }
    }
    if (vocabulary_.empty()) throw Error("topics", "empty vocabulary");
    if (doc_ids_.size() < k_) {
      throw Error("topics", "need at least " + std::to_string(k_) + " non-empty documents, have " +
                                std::to_string(doc_ids_.size()));
    }

    const std::size_t v = vocabulary_.size();
    n_dt_.assign(words_.size() * k_, 0);
    n_tw_.assign(k_ * v, 0);
    n_t_.assign(k_, 0);
    weights_.resize(k_);
    z_.resize(words_.size());
    for (std::size_t d = 0; d < words_.size(); ++d) {
      z_[d].resize(words_[d].size());
      for (std::size_t i = 0; i < words_[d].size(); ++i) {
        auto t = static_cast<std::uint32_t>(unit_uniform(rng_) * static_cast<double>(k_));
        if (t >= k_) t = static_cast<std::uint32_t>(k_ - 1);
        z_[d][i] = t;
        add(d, words_[d][i], t, +1);
      }
    }
  }

  void sweep() {
    const double v_beta = static_cast<double>(vocabulary_.size()) * beta_;
    for (std::size_t d = 0; d < words_.size(); ++d) {
      for (std::size_t i = 0; i < words_[d].size(); ++i) {
        const std::uint32_t w = words_[d][i];
        add(d, w, z_[d][i], -1);
        double total = 0.0;
        for (std::size_t t = 0; t < k_; ++t) {
          total += (static_cast<double>(n_dt_[d * k_ + t]) + alpha_) *
                   (static_cast<double>(n_tw_[t * vocabulary_.size() + w]) + beta_) /
                   (static_cast<double>(n_t_[t]) + v_beta);
          weights_[t] = total;
        }
        const double u = unit_uniform(rng_) * total;
        std::size_t t = 0;
        while (t + 1 < k_ && weights_[t] <= u) ++t;
        z_[d][i] = static_cast<std::uint32_t>(t);
        add(d, w, z_[d][i], +1);
      }
    }
  }

  /// Recounts from the assignments and checks every tally plus the
  /// conservation identities sum_t n_dt = len_d and sum_w n_tw = n_t.
  bool counts_consistent() const {
    const std::size_t v = vocabulary_.size();
    std::vector<long> dt(words_.size() * k_, 0), tw(k_ * v, 0), tt(k_, 0);
    for (std::size_t d = 0; d < words_.size(); ++d) {
      for (std::size_t i = 0; i < words_[d].size(); ++i) {
        ++dt[d * k_ + z_[d][i]];
        ++tw[z_[d][i] * v + words_[d][i]];
        ++tt[z_[d][i]];
      }
    }
    if (dt != n_dt_ || tw != n_tw_ || tt != n_t_) return false;
    for (std::size_t d = 0; d < words_.size(); ++d) {
      long sum = 0;
      for (std::size_t t = 0; t < k_; ++t) sum += n_dt_[d * k_ + t];
      if (sum != static_cast<long>(words_[d].size())) return false;
    }
    for (std::size_t t = 0; t < k_; ++t) {
      long sum = 0;
      for (std::size_t w = 0; w < v; ++w) sum += n_tw_[t * v + w];
      if (sum != n_t_[t]) return false;
    }
    return true;
  }

  TopicModel model() const {
    TopicModel m;
    m.config = cfg_;
    m.doc_ids = doc_ids_;
    m.vocabulary = vocabulary_;
    m.unrankable = unrankable_;
    m.assignments = z_;
    const std::size_t v = vocabulary_.size();
    m.theta = Matrix(words_.size(), k_);
    for (std::size_t d = 0; d < words_.size(); ++d) {
      const double denom = static_cast<double>(words_[d].size()) + static_cast<double>(k_) * alpha_;
      for (std::size_t t = 0; t < k_; ++t) m.theta(d, t) = (static_cast<double>(n_dt_[d * k_ + t]) + alpha_) / denom;
    }
    m.phi = Matrix(k_, v);
    for (std::size_t t = 0; t < k_; ++t) {
      const double denom = static_cast<double>(n_t_[t]) + static_cast<double>(v) * beta_;
      for (std::size_t w = 0; w < v; ++w) m.phi(t, w) = (static_cast<double>(n_tw_[t * v + w]) + beta_) / denom;
    }
    return m;
  }

 private:
  void add(std::size_t d, std::uint32_t w, std::uint32_t t, long delta) {
    n_dt_[d * k_ + t] += delta;
    n_tw_[t * vocabulary_.size() + w] += delta;
    n_t_[t] += delta;
  }

  LdaConfig cfg_;
  std::size_t k_;
  double alpha_, beta_;
  std::mt19937_64 rng_;
  std::vector<std::string> doc_ids_, vocabulary_, unrankable_;
  std::vector<std::vector<std::uint32_t>> words_, z_;
  std::vector<long> n_dt_, n_tw_, n_t_;
  std::vector<double> weights_;
};

}  // namespace detail

inline TopicModel fit_lda(std::span<const Document> docs, const LdaConfig& cfg) {
  cfg.validate();
  detail::GibbsSampler sampler(docs, cfg);
  for (std::size_t it = 0; it < cfg.iterations; ++it) sampler.sweep();
  return sampler.model();
}

/// Index of the largest entry; the lowest index wins ties.
inline std::size_t argmax_topic(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t t = 1; t < row.size(); ++t)
    if (row[t] > row[best]) best = t;
  return best;
}

/// Topic of each modeled document, aligned with model.doc_ids.
inline std::vector<std::size_t> assign_topics(const TopicModel& model) {
  std::vector<std::size_t> out(model.doc_ids.size());
  for (std::size_t d = 0; d < out.size(); ++d) out[d] = argmax_topic(model.theta.row(d));
  return out;
}

struct Candidate {
  std::string doc_id;
  double probability = 0.0;

  friend bool operator==(const Candidate&, const Candidate&) = default;
};

struct CandidateRanking {
  std::size_t page_size = 12;
  std::vector<std::vector<Candidate>> topics;  // each sorted by probability desc, then doc id
  std::vector<std::string> unrankable;

  std::span<const Candidate> page(std::size_t topic, std::size_t page_index) const {
    const auto& list = topics.at(topic);
    const std::size_t begin = std::min(list.size(), page_index * page_size);
    const std::size_t end = std::min(list.size(), begin + page_size);
    return {list.data() + begin, end - begin};
  }
  std::span<const Candidate> first_page(std::size_t topic) const { return page(topic, 0); }

  std::size_t page_count() const {
    std::size_t longest = 0;
    for (const auto& t : topics) longest = std::max(longest, t.size());
    return (longest + page_size - 1) / page_size;
  }
};

inline void sort_candidates(std::vector<Candidate>& list) {
  std::sort(list.begin(), list.end(), [](const Candidate& a, const Candidate& b) {
    if (a.probability != b.probability) return a.probability > b.probability;
    return a.doc_id < b.doc_id;
  });
}

inline CandidateRanking rank_candidates(const TopicModel& model, std::size_t page_size = 12) {
  if (page_size == 0) throw Error("topics", "page_size must be positive");
  CandidateRanking r;
  r.page_size = page_size;
  r.unrankable = model.unrankable;
  r.topics.resize(model.theta.cols());
  const auto topic_of = assign_topics(model);
  for (std::size_t d = 0; d < topic_of.size(); ++d) {
    r.topics[topic_of[d]].push_back({model.doc_ids[d], model.theta(d, topic_of[d])});
  }
  for (auto& list : r.topics) sort_candidates(list);
  return r;
}

}  // namespace fstc
