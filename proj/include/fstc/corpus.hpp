#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "fstc/error.hpp"
#include "fstc/stopwords.hpp"
#include "fstc/wordvec.hpp"

namespace fstc {

struct Document {
  std::string id;
  std::string raw_text;
  std::vector<std::string> tokens;  // cleaned, lowercase, stop words removed

  std::size_t token_count() const noexcept { return tokens.size(); }
};

struct LabeledDocument {
  Document doc;
  std::optional<std::string> gold_label;  // absent for unlabeled batches
};

struct Dataset {
  std::string id;
  std::vector<LabeledDocument> documents;
  std::vector<std::string> categories;  // distinct labels, order of first appearance

  std::vector<Document> plain_documents() const {
    std::vector<Document> out;
    out.reserve(documents.size());
    for (const auto& d : documents) out.push_back(d.doc);
    return out;
  }
};

struct CleaningRules {
  // Tokens shorter than this are dropped. Production code always uses 2;
  // unit tests lower it to exercise counting on single-letter tokens.
  std::size_t min_token_length = 2;
};

inline bool is_ascii_letter(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }

/// Lowercases, splits on every non-letter byte, then drops short tokens and
/// stop words. Surviving tokens keep their order.
inline std::vector<std::string> clean_tokenize(std::string_view raw_text, const StopWords& stopwords,
                                               CleaningRules rules = {}) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (current.size() >= rules.min_token_length && !current.empty() && !stopwords.contains(current)) {
      tokens.push_back(current);
    }
    current.clear();
  };
  for (char c : raw_text) {
    if (is_ascii_letter(c)) {
      current.push_back(static_cast<char>(c | 0x20));
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

class UnigramModel {
 public:
  UnigramModel() = default;

  UnigramModel(const std::unordered_map<std::string, std::size_t>& counts) {
    for (const auto& [token, count] : counts) total_tokens_ += count;
    if (total_tokens_ == 0) throw Error("corpus", "unigram model needs at least one token");
    for (const auto& [token, count] : counts) {
      if (count > 0) probs_.emplace(token, static_cast<double>(count) / static_cast<double>(total_tokens_));
    }
  }

  std::optional<double> probability(std::string_view token) const {
    auto it = probs_.find(token);
    if (it == probs_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t total_tokens() const noexcept { return total_tokens_; }
  std::size_t vocabulary_size() const noexcept { return probs_.size(); }
  const auto& probabilities() const noexcept { return probs_; }

 private:
  std::unordered_map<std::string, double, detail::StringHash, std::equal_to<>> probs_;
  std::size_t total_tokens_ = 0;
};

/// p(w) = count(w) / total token count over the whole batch.
inline UnigramModel build_unigram_model(std::span<const Document> docs) {
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& d : docs)
    for (const auto& t : d.tokens) ++counts[t];
  if (counts.empty()) throw Error("corpus", "cannot estimate word probabilities from an empty corpus");
  return UnigramModel(counts);
}

// External frequency file: one `token count` pair per line.
inline UnigramModel load_unigram_counts(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("corpus", "cannot open frequency file " + path.string());
  std::unordered_map<std::string, std::size_t> counts;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto fields = detail::split_fields(line);
    if (fields.empty()) continue;
    std::size_t count = 0;
    if (fields.size() != 2 ||
        std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), count).ec != std::errc{}) {
      throw Error("corpus", path.string() + ":" + std::to_string(line_no) + ": expected 'token count'");
    }
    counts.try_emplace(std::string(fields[0]), count);
  }
  return UnigramModel(counts);
}

/// Parses line-delimited JSON records `{"id": ..., "text": ..., "label": ...}`.
/// `label` is optional. Documents that clean to nothing are kept with
/// token_count() == 0.
inline Dataset parse_dataset(std::istream& in, std::string dataset_id,
                             const StopWords& stopwords = english_stopwords(), CleaningRules rules = {}) {
  Dataset ds;
  ds.id = std::move(dataset_id);
  std::unordered_set<std::string> seen_ids;
  std::unordered_set<std::string> seen_labels;
  std::string line;
  std::size_t line_no = 0;

  auto fail = [&](const std::string& what) {
    throw Error("corpus", ds.id + ":" + std::to_string(line_no) + ": " + what);
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      fail("malformed record");
    }
    if (!rec.is_object()) fail("record is not an object");
    if (!rec.contains("id") || !rec["id"].is_string()) fail("missing string field 'id'");
    if (!rec.contains("text") || !rec["text"].is_string()) fail("missing string field 'text'");

    LabeledDocument ld;
    ld.doc.id = rec["id"].get<std::string>();
    ld.doc.raw_text = rec["text"].get<std::string>();
    if (rec.contains("label") && !rec["label"].is_null()) {
      if (!rec["label"].is_string()) fail("field 'label' must be a string");
      ld.gold_label = rec["label"].get<std::string>();
      if (seen_labels.insert(*ld.gold_label).second) ds.categories.push_back(*ld.gold_label);
    }
    if (!seen_ids.insert(ld.doc.id).second) fail("duplicate id '" + ld.doc.id + "'");
    ld.doc.tokens = clean_tokenize(ld.doc.raw_text, stopwords, rules);
    ds.documents.push_back(std::move(ld));
  }
  return ds;
}

inline Dataset load_labeled_dataset(const std::filesystem::path& path,
                                    const StopWords& stopwords = english_stopwords(), CleaningRules rules = {}) {
  std::ifstream in(path);
  if (!in) throw Error("corpus", "cannot open dataset " + path.string());
  return parse_dataset(in, path.stem().string(), stopwords, rules);
}

}  // namespace fstc
