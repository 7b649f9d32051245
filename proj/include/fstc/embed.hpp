#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "fstc/corpus.hpp"
#include "fstc/error.hpp"
#include "fstc/wordvec.hpp"

namespace fstc {

struct SifConfig {
  double alpha_sif = 1e-3;

  void validate() const {
    if (!(alpha_sif > 0.0)) throw Error("embed", "alpha_sif must be positive");
  }
};

/// Smooth inverse frequency weight a / (a + p). Equals 1 at p = 0 and
/// decreases strictly with p.
inline double sif_weight(double p, const SifConfig& cfg) { return cfg.alpha_sif / (cfg.alpha_sif + p); }

struct DocumentEmbedding {
  std::string doc_id;
  std::vector<double> vector;
  std::size_t embedded_token_count = 0;

  bool is_empty() const noexcept { return embedded_token_count == 0; }
};

// Out-of-vocabulary occurrences per token. Ordered so reports are stable.
struct SkipReport {
  std::map<std::string, std::size_t> oov_counts;
  std::size_t total = 0;

  void add(const std::string& token, std::size_t n = 1) {
    oov_counts[token] += n;
    total += n;
  }
  void merge(const SkipReport& other) {
    for (const auto& [t, n] : other.oov_counts) add(t, n);
  }
};

/// v_d = (1/|d|) * sum over token occurrences of sif_weight(p(w)) * v_w.
/// |d| counts only occurrences that have a vector; the rest go to `skips`.
inline DocumentEmbedding embed_document(const Document& doc, const WordVectorTable& table,
                                        const UnigramModel& unigram, const SifConfig& cfg,
                                        SkipReport* skips = nullptr) {
  DocumentEmbedding out{doc.id, std::vector<double>(table.dim(), 0.0), 0};
  for (const auto& token : doc.tokens) {
    auto vec = table.lookup(token);
    if (!vec) {
      if (skips) skips->add(token);
      continue;
    }
    auto p = unigram.probability(token);
    if (!p) throw Error("embed", "no probability estimate for token '" + token + "' in document " + doc.id);
    const double w = sif_weight(*p, cfg);
    for (std::size_t i = 0; i < out.vector.size(); ++i) out.vector[i] += w * (*vec)[i];
    ++out.embedded_token_count;
  }
  if (out.embedded_token_count > 0) {
    const double inv = 1.0 / static_cast<double>(out.embedded_token_count);
    for (auto& x : out.vector) x *= inv;
  }
  return out;
}

struct EmbeddedBatch {
  std::vector<DocumentEmbedding> embeddings;
  SkipReport skips;
};

inline EmbeddedBatch embed_batch(std::span<const Document> docs, const WordVectorTable& table,
                                 const UnigramModel& unigram, const SifConfig& cfg) {
  cfg.validate();
  EmbeddedBatch out;
  out.embeddings.reserve(docs.size());
  for (const auto& d : docs) out.embeddings.push_back(embed_document(d, table, unigram, cfg, &out.skips));
  return out;
}

}  // namespace fstc
