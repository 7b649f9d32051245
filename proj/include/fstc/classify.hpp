#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "fstc/embed.hpp"
#include "fstc/error.hpp"

namespace fstc {

inline double dot(std::span<const double> u, std::span<const double> v) {
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
  return s;
}

inline double norm(std::span<const double> u) { return std::sqrt(dot(u, u)); }

/// dot(u, v) / (|u| |v|). Both vectors must be non-zero and equally long.
inline double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw Error("classify", "cosine_similarity: length mismatch");
  const double nu = norm(u), nv = norm(v);
  if (nu == 0.0 || nv == 0.0) throw Error("classify", "cosine_similarity: zero-norm vector");
  return dot(u, v) / (nu * nv);
}

// Human-chosen representatives for one category.
struct CategorySelection {
  std::string category;
  std::vector<std::string> doc_ids;

  friend bool operator==(const CategorySelection&, const CategorySelection&) = default;
};

// Category order matters: it breaks similarity ties.
using Selection = std::vector<CategorySelection>;

struct Prototype {
  std::string category;
  std::vector<std::string> representative_doc_ids;
  std::vector<double> vector;  // mean of the representatives' embeddings
};

struct PrototypeSet {
  std::vector<Prototype> prototypes;

  std::unordered_set<std::string> representative_ids() const {
    std::unordered_set<std::string> ids;
    for (const auto& p : prototypes) ids.insert(p.representative_doc_ids.begin(), p.representative_doc_ids.end());
    return ids;
  }
};

inline std::unordered_map<std::string, const DocumentEmbedding*> index_embeddings(
    std::span<const DocumentEmbedding> embeddings) {
  std::unordered_map<std::string, const DocumentEmbedding*> idx;
  idx.reserve(embeddings.size());
  for (const auto& e : embeddings) idx.emplace(e.doc_id, &e);
  return idx;
}

/// Averages each category's representative embeddings, unnormalized. A single
/// representative is copied verbatim.
inline PrototypeSet build_prototypes(const Selection& selection, std::span<const DocumentEmbedding> embeddings) {
  if (selection.size() < 2) throw Error("classify", "at least 2 categories are required");
  const auto idx = index_embeddings(embeddings);
  std::unordered_map<std::string, std::string> owner;
  std::unordered_set<std::string> names;

  PrototypeSet out;
  for (const auto& sel : selection) {
    if (!names.insert(sel.category).second) throw Error("classify", "category '" + sel.category + "' listed twice");
    if (sel.doc_ids.empty()) throw Error("classify", "category '" + sel.category + "' has no representatives");
    Prototype proto{sel.category, sel.doc_ids, {}};
    for (const auto& id : sel.doc_ids) {
      auto [it, inserted] = owner.emplace(id, sel.category);
      if (!inserted) {
        throw Error("classify", "document '" + id + "' selected for both '" + it->second + "' and '" +
                                    sel.category + "'");
      }
      auto e = idx.find(id);
      if (e == idx.end()) throw Error("classify", "unknown document '" + id + "'");
      if (e->second->is_empty()) throw Error("classify", "document '" + id + "' has an empty embedding");
      if (proto.vector.empty()) {
        proto.vector = e->second->vector;
      } else {
        for (std::size_t i = 0; i < proto.vector.size(); ++i) proto.vector[i] += e->second->vector[i];
      }
    }
    if (sel.doc_ids.size() > 1) {
      const double n = static_cast<double>(sel.doc_ids.size());
      for (auto& x : proto.vector) x /= n;
    }
    out.prototypes.push_back(std::move(proto));
  }
  return out;
}

struct Prediction {
  std::string doc_id;
  std::string category;
  double score = 0.0;   // cosine to the winning prototype
  double margin = 0.0;  // winner minus runner-up

  friend bool operator==(const Prediction&, const Prediction&) = default;
};

struct ClassificationResult {
  std::vector<Prediction> predictions;
  std::vector<std::string> unclassifiable;  // empty embeddings
};

/// Assigns every non-excluded document to the prototype with the highest
/// cosine similarity; the earlier category wins exact ties. Representatives
/// are always excluded, on top of anything in `exclude`.
inline ClassificationResult classify_batch(std::span<const DocumentEmbedding> embeddings,
                                           const PrototypeSet& prototypes,
                                           const std::unordered_set<std::string>& exclude = {}) {
  const auto reps = prototypes.representative_ids();
  ClassificationResult out;
  std::vector<double> sims(prototypes.prototypes.size());
  for (const auto& e : embeddings) {
    if (reps.contains(e.doc_id) || exclude.contains(e.doc_id)) continue;
    if (e.is_empty()) {
      out.unclassifiable.push_back(e.doc_id);
      continue;
    }
    std::size_t best = 0;
    for (std::size_t c = 0; c < sims.size(); ++c) {
      sims[c] = cosine_similarity(e.vector, prototypes.prototypes[c].vector);
      if (sims[c] > sims[best]) best = c;
    }
    double runner_up = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < sims.size(); ++c)
      if (c != best && sims[c] > runner_up) runner_up = sims[c];
    out.predictions.push_back({e.doc_id, prototypes.prototypes[best].category, sims[best], sims[best] - runner_up});
  }
  return out;
}

}  // namespace fstc
