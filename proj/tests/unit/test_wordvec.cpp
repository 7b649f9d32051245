#include <gtest/gtest.h>

#include <bit>
#include <cstdio>
#include <random>

#include "fstc/wordvec.hpp"
#include "support.hpp"

using fstc::VectorFormat;
using fstc::WordVectorTable;
using fstc::testing::TempDir;

TEST(LoadVectors, PlainSingleRecord) {
  TempDir dir;
  auto t = WordVectorTable::load(dir.write("v.txt", "cat 1.0 0.0 0.5\n"), VectorFormat::plain);
  EXPECT_EQ(t.dim(), 3u);
  EXPECT_EQ(t.size(), 1u);
  auto v = t.lookup("cat");
  ASSERT_TRUE(v);
  EXPECT_EQ(std::vector<double>(v->begin(), v->end()), (std::vector<double>{1.0, 0.0, 0.5}));
}

TEST(LoadVectors, Headered) {
  TempDir dir;
  fstc::LoadReport report;
  auto t = WordVectorTable::load(dir.write("v.vec", "2 3\na 1 0 0\nb 0 1 0\n"), VectorFormat::headered, &report);
  EXPECT_EQ(t.dim(), 3u);
  EXPECT_EQ(t.size(), 2u);
  EXPECT_TRUE(report.warnings.empty());
}

TEST(LoadVectors, HeaderMismatchIsOnlyAWarning) {
  TempDir dir;
  fstc::LoadReport report;
  auto t = WordVectorTable::load(dir.write("v.vec", "5 3\na 1 0 0\nb 0 1 0\n"), VectorFormat::headered, &report);
  EXPECT_EQ(t.size(), 2u);
  ASSERT_EQ(report.warnings.size(), 1u);
  EXPECT_NE(report.to_log_line().find("warning="), std::string::npos);
}

TEST(LoadVectors, InconsistentLengthNamesLine) {
  TempDir dir;
  auto path = dir.write("v.txt", "a 1 2 3\nb 1 2 3 4\n");
  try {
    WordVectorTable::load(path, VectorFormat::plain);
    FAIL() << "expected an error";
  } catch (const fstc::Error& e) {
    EXPECT_EQ(e.module(), "wordvec");
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
  }
}

TEST(LoadVectors, Errors) {
  TempDir dir;
  EXPECT_THROW(WordVectorTable::load(dir / "missing.txt", VectorFormat::plain), fstc::Error);
  EXPECT_THROW(WordVectorTable::load(dir.write("empty.txt", "\n\n"), VectorFormat::plain), fstc::Error);
  EXPECT_THROW(WordVectorTable::load(dir.write("nan.txt", "a 1 x\n"), VectorFormat::plain), fstc::Error);
  EXPECT_THROW(WordVectorTable::load(dir.write("hdr.txt", "a 1 2\n"), VectorFormat::headered), fstc::Error);
}

TEST(LoadVectors, DuplicatesKeepFirstAndAreCounted) {
  TempDir dir;
  fstc::LoadReport report;
  auto t = WordVectorTable::load(dir.write("v.txt", "a 1 2\nb 3 4\na 9 9\n"), VectorFormat::plain, &report);
  EXPECT_EQ(t.size(), 2u);
  EXPECT_EQ(report.duplicates_skipped, 1u);
  EXPECT_EQ((*t.lookup("a"))[0], 1.0);
}

TEST(Lookup, AbsentAndCaseSensitive) {
  WordVectorTable t(3, {{"cat", {1, 0, 0.5}}});
  EXPECT_TRUE(t.lookup("cat"));
  EXPECT_FALSE(t.lookup("dog"));
  EXPECT_FALSE(t.lookup("CAT"));
}

// Any well-formed file round-trips bitwise, and two loads agree.
TEST(LoadVectors, RoundTripProperty) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> val(-1e3, 1e3);
  std::uniform_int_distribution<int> dim_dist(1, 12);
  for (int trial = 0; trial < 20; ++trial) {
    TempDir dir;
    const int dim = dim_dist(rng);
    std::vector<std::vector<double>> vecs(50, std::vector<double>(dim));
    std::string text;
    char buf[64];
    for (std::size_t i = 0; i < vecs.size(); ++i) {
      text += "tok" + std::to_string(i);
      for (auto& x : vecs[i]) {
        x = val(rng) * std::pow(10.0, static_cast<int>(rng() % 9) - 4);
        std::snprintf(buf, sizeof buf, " %.17g", x);
        text += buf;
      }
      text += '\n';
    }
    auto path = dir.write("v.txt", text);
    auto a = WordVectorTable::load(path, VectorFormat::plain);
    auto b = WordVectorTable::load(path, VectorFormat::plain);
    for (std::size_t i = 0; i < vecs.size(); ++i) {
      auto va = a.lookup("tok" + std::to_string(i));
      auto vb = b.lookup("tok" + std::to_string(i));
      ASSERT_TRUE(va && vb);
      for (int k = 0; k < dim; ++k) {
        EXPECT_EQ(std::bit_cast<std::uint64_t>((*va)[k]), std::bit_cast<std::uint64_t>(vecs[i][k]));
        EXPECT_EQ(std::bit_cast<std::uint64_t>((*vb)[k]), std::bit_cast<std::uint64_t>(vecs[i][k]));
      }
    }
  }
}

TEST(VectorFormat, Parse) {
  EXPECT_EQ(fstc::parse_vector_format("plain"), VectorFormat::plain);
  EXPECT_EQ(fstc::parse_vector_format("headered"), VectorFormat::headered);
  EXPECT_FALSE(fstc::parse_vector_format("binary"));
}
