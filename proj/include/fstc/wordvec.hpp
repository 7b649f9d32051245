#pragma once

#include <charconv>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fstc/error.hpp"

namespace fstc {

/// Text layouts accepted for pre-trained embedding files.
///   plain:    `token v1 v2 ... vD` per line
///   headered: first line `count dim`, then plain records
enum class VectorFormat { plain, headered };

inline std::optional<VectorFormat> parse_vector_format(std::string_view name) {
  if (name == "plain") return VectorFormat::plain;
  if (name == "headered") return VectorFormat::headered;
  return std::nullopt;
}

struct LoadReport {
  std::string source_id;
  std::size_t tokens = 0;
  std::size_t dim = 0;
  std::size_t duplicates_skipped = 0;
  std::vector<std::string> warnings;

  // One structured log line: `event=vectors_loaded source=... tokens=... ...`
  std::string to_log_line() const {
    std::ostringstream os;
    os << "event=vectors_loaded source=" << source_id << " tokens=" << tokens << " dim=" << dim
       << " duplicates_skipped=" << duplicates_skipped;
    for (const auto& w : warnings) os << " warning=\"" << w << '"';
    return os.str();
  }
};

namespace detail {

struct StringHash {
  using is_transparent = void;
  std::size_t operator()(std::string_view s) const noexcept { return std::hash<std::string_view>{}(s); }
};

inline bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' || c == '\f'; }

// Splits on runs of whitespace.
inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_space(line[i])) ++i;
    std::size_t j = i;
    while (j < line.size() && !is_space(line[j])) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline bool parse_double(std::string_view s, double& out) {
  // from_chars rejects a leading '+', which some writers emit.
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

}  // namespace detail

/// Immutable token -> vector map. Vectors live in one contiguous buffer;
/// concurrent reads are safe once constructed.
class WordVectorTable {
 public:
  WordVectorTable() = default;

  /// Builds a table from in-memory entries. Duplicates keep the first entry.
  WordVectorTable(std::size_t dim, const std::vector<std::pair<std::string, std::vector<double>>>& entries,
                  std::string source_id = "memory")
      : dim_(dim), source_id_(std::move(source_id)) {
    if (dim == 0) throw Error("wordvec", "dimension must be positive");
    for (const auto& [token, vec] : entries) {
      if (vec.size() != dim) throw Error("wordvec", "vector for '" + token + "' has wrong length");
      insert(token, vec);
    }
  }

  std::optional<std::span<const double>> lookup(std::string_view token) const {
    auto it = index_.find(token);
    if (it == index_.end()) return std::nullopt;
    return std::span<const double>(data_.data() + it->second * dim_, dim_);
  }

  bool contains(std::string_view token) const { return index_.find(token) != index_.end(); }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return index_.size(); }
  const std::string& source_id() const noexcept { return source_id_; }

  static WordVectorTable load(const std::filesystem::path& path, VectorFormat format, LoadReport* report = nullptr);

 private:
  // Returns false when the token is already present.
  bool insert(std::string_view token, std::span<const double> vec) {
    if (index_.find(token) != index_.end()) return false;
    index_.emplace(std::string(token), index_.size());
    data_.insert(data_.end(), vec.begin(), vec.end());
    return true;
  }

  std::size_t dim_ = 0;
  std::string source_id_;
  std::unordered_map<std::string, std::size_t, detail::StringHash, std::equal_to<>> index_;
  std::vector<double> data_;
};

inline WordVectorTable WordVectorTable::load(const std::filesystem::path& path, VectorFormat format,
                                             LoadReport* report) {
  std::ifstream in(path);
  if (!in) throw Error("wordvec", "cannot open vector file " + path.string());

  WordVectorTable table;
  table.source_id_ = path.filename().string();
  LoadReport local;
  local.source_id = table.source_id_;

  std::size_t declared_count = 0, declared_dim = 0;
  bool has_header = false;
  std::string line;
  std::size_t line_no = 0;
  std::vector<double> values;

  while (std::getline(in, line)) {
    ++line_no;
    auto fields = detail::split_fields(line);
    if (fields.empty()) continue;

    if (format == VectorFormat::headered && !has_header) {
      has_header = true;
      if (fields.size() != 2) {
        throw Error("wordvec", path.string() + ":" + std::to_string(line_no) + ": expected header 'count dim'");
      }
      auto c = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), declared_count);
      auto d = std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), declared_dim);
      if (c.ec != std::errc{} || d.ec != std::errc{}) {
        throw Error("wordvec", path.string() + ":" + std::to_string(line_no) + ": malformed header");
      }
      continue;
    }

    if (fields.size() < 2) {
      throw Error("wordvec", path.string() + ":" + std::to_string(line_no) + ": record has no vector values");
    }
    const std::size_t n = fields.size() - 1;
    if (table.dim_ == 0) {
      table.dim_ = n;
    } else if (n != table.dim_) {
      throw Error("wordvec", path.string() + ":" + std::to_string(line_no) + ": vector length " +
                                 std::to_string(n) + " differs from " + std::to_string(table.dim_));
    }
    values.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (!detail::parse_double(fields[i + 1], values[i])) {
        throw Error("wordvec", path.string() + ":" + std::to_string(line_no) + ": bad number '" +
                                   std::string(fields[i + 1]) + "'");
      }
    }
    if (!table.insert(fields[0], values)) ++local.duplicates_skipped;
  }

  if (table.size() == 0) throw Error("wordvec", path.string() + ": no vector records");

  if (has_header) {
    const std::size_t records = table.size() + local.duplicates_skipped;
    if (declared_count != records || declared_dim != table.dim_) {
      local.warnings.push_back("header declares " + std::to_string(declared_count) + "x" +
                               std::to_string(declared_dim) + " but file holds " + std::to_string(records) + "x" +
                               std::to_string(table.dim_));
    }
  }

  local.tokens = table.size();
  local.dim = table.dim_;
  if (report) *report = std::move(local);
  return table;
}

}  // namespace fstc
