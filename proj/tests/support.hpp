#pragma once

// Helpers shared by the unit and acceptance suites.

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "fstc/corpus.hpp"
#include "fstc/embed.hpp"

namespace fstc::testing {

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("fstc-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++) + "-" +
             std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

  std::filesystem::path write(const std::string& name, const std::string& contents) const {
    auto p = path_ / name;
    std::ofstream(p, std::ios::binary) << contents;
    return p;
  }

 private:
  std::filesystem::path path_;
};

inline Document make_doc(std::string id, std::vector<std::string> tokens) {
  return Document{std::move(id), "", std::move(tokens)};
}

inline DocumentEmbedding make_embedding(std::string id, std::vector<double> v) {
  bool zero = true;
  for (double x : v) zero = zero && x == 0.0;
  return DocumentEmbedding{std::move(id), std::move(v), zero ? 0u : 1u};
}

// A small labeled instance with random embeddings, `per_category[c]`
// documents in category c. Document ids are zero-padded so lexicographic and
// numeric order agree.
struct RandomInstance {
  Dataset dataset;
  std::vector<DocumentEmbedding> embeddings;
};

inline RandomInstance random_instance(std::mt19937_64& rng, const std::vector<std::size_t>& per_category,
                                      std::size_t dim, double empty_fraction = 0.0) {
  RandomInstance inst;
  inst.dataset.id = "random";
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> len(1, 40);
  std::vector<std::vector<double>> centers(per_category.size(), std::vector<double>(dim));
  for (auto& c : centers)
    for (auto& x : c) x = gauss(rng);
  std::size_t next = 0;
  for (std::size_t c = 0; c < per_category.size(); ++c) {
    inst.dataset.categories.push_back("cat" + std::to_string(c));
  }
  // Interleave categories so document order is not grouped by label.
  std::vector<std::size_t> order;
  for (std::size_t c = 0; c < per_category.size(); ++c)
    for (std::size_t i = 0; i < per_category[c]; ++i) order.push_back(c);
  std::shuffle(order.begin(), order.end(), rng);
  // Categories must appear in first-appearance order; rename accordingly.
  std::vector<int> rename(per_category.size(), -1);
  int seen = 0;
  for (auto c : order)
    if (rename[c] < 0) rename[c] = seen++;
  for (auto c : order) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "d%04zu", next++);
    LabeledDocument ld;
    ld.doc.id = buf;
    ld.doc.tokens.assign(static_cast<std::size_t>(len(rng)), "w");
    ld.gold_label = "cat" + std::to_string(rename[c]);
    std::vector<double> v(dim);
    const bool empty = unit(rng) < empty_fraction;
    for (std::size_t i = 0; i < dim; ++i) v[i] = empty ? 0.0 : centers[c][i] + 1.5 * gauss(rng);
    inst.embeddings.push_back(make_embedding(ld.doc.id, v));
    inst.dataset.documents.push_back(std::move(ld));
  }
  return inst;
}

}  // namespace fstc::testing

namespace fstc::testing {

// Letters-only word: the tokenizer splits on digits.
inline std::string word(const std::string& prefix, std::size_t i) {
  std::string w = prefix;
  w += static_cast<char>('a' + (i / 26) % 26);
  w += static_cast<char>('a' + i % 26);
  return w;
}

// A labeled corpus whose categories use partly distinct vocabularies, with
// matching word vectors: category words cluster around a per-category center,
// shared words are noise. `overlap` in [0, 1] is the share of shared words
// in each document.
struct SyntheticCorpus {
  std::string jsonl;
  std::string vectors_text;  // plain format
  std::vector<std::string> categories;
};

inline SyntheticCorpus synthetic_corpus(std::uint64_t seed, const std::vector<std::size_t>& per_category,
                                        std::size_t dim = 16, double overlap = 0.3, std::size_t min_len = 4,
                                        std::size_t max_len = 60) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> len(min_len, max_len);
  SyntheticCorpus out;
  const std::size_t words_per_cat = 40, shared_words = 60;

  char buf[40];
  auto emit_vector = [&](const std::string& w, const std::vector<double>& center, double noise) {
    out.vectors_text += w;
    for (std::size_t i = 0; i < dim; ++i) {
      std::snprintf(buf, sizeof buf, " %.6f", center[i] + noise * g(rng));
      out.vectors_text += buf;
    }
    out.vectors_text += '\n';
  };
  std::vector<double> zero(dim, 0.0);
  for (std::size_t c = 0; c < per_category.size(); ++c) {
    out.categories.push_back(word("topic", c));
    std::vector<double> center(dim);
    for (auto& x : center) x = g(rng);
    for (std::size_t w = 0; w < words_per_cat; ++w) emit_vector(word("cat" + word("", c), w), center, 0.8);
  }
  for (std::size_t w = 0; w < shared_words; ++w) emit_vector(word("shared", w), zero, 1.0);

  std::vector<std::size_t> order;
  for (std::size_t c = 0; c < per_category.size(); ++c)
    for (std::size_t i = 0; i < per_category[c]; ++i) order.push_back(c);
  // Keep categories in first-appearance order 0, 1, 2...
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t c = 0; c < per_category.size(); ++c)
    std::iter_swap(order.begin() + static_cast<long>(c), std::find(order.begin() + static_cast<long>(c), order.end(), c));

  std::size_t id = 0;
  for (auto c : order) {
    std::string text;
    const std::size_t n = len(rng);
    for (std::size_t i = 0; i < n; ++i) {
      text += (u(rng) < overlap ? word("shared", rng() % shared_words)
                                : word("cat" + word("", c), rng() % words_per_cat));
      text += i % 7 == 6 ? ". " : " ";
    }
    std::snprintf(buf, sizeof buf, "doc%05zu", id++);
    out.jsonl += "{\"id\": \"" + std::string(buf) + "\", \"text\": \"" + text + "\", \"label\": \"" +
                 out.categories[c] + "\"}\n";
  }
  return out;
}

}  // namespace fstc::testing
