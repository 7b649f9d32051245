#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <set>
#include <sstream>
#include <string>

#include "fstc/io.hpp"
#include "support.hpp"

using fstc::io::json;
using fstc::testing::TempDir;

namespace {

struct Run {
  int status = -1;
  std::string output;  // stdout and stderr
};

Run run(const std::string& args) {
  Run r;
  const std::string cmd = std::string(FSTC_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.output.append(buf, n);
  const int raw = ::pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    corpus_ = fstc::testing::synthetic_corpus(5, {14, 12}, 16, 0.8, 2, 50);
    data_ = dir_.write("news.jsonl", corpus_.jsonl).string();
    vectors_ = dir_.write("vectors.txt", corpus_.vectors_text).string();
  }

  std::string common() const { return "--data " + data_ + " --vectors " + vectors_; }
  std::string out(const std::string& name) const { return (dir_ / name).string(); }

  TempDir dir_;
  fstc::testing::SyntheticCorpus corpus_;
  std::string data_, vectors_;
};

}  // namespace

TEST_F(Cli, EmbedWritesOneRecordPerDocument) {
  auto r = run("embed " + common() + " --out " + out("emb.jsonl"));
  ASSERT_EQ(r.status, 0) << r.output;
  EXPECT_NE(r.output.find("event=vectors_loaded"), std::string::npos);
  std::istringstream in(fstc::io::read_file(out("emb.jsonl")));
  std::size_t lines = 0;
  for (std::string line; std::getline(in, line); ++lines) EXPECT_EQ(json::parse(line)["vector"].size(), 16u);
  EXPECT_EQ(lines, 26u);
}

TEST_F(Cli, LdaRanksEveryTopic) {
  auto r = run("lda --data " + data_ + " --iterations 100 --page-size 5 --out " + out("cand.json"));
  ASSERT_EQ(r.status, 0) << r.output;
  auto j = fstc::io::read_json(out("cand.json"));
  EXPECT_EQ(j["config"]["k"], 2);
  EXPECT_EQ(j["ranking"]["page_size"], 5);
  std::size_t total = 0;
  for (const auto& t : j["ranking"]["topics"]) total += t["candidates"].size();
  EXPECT_EQ(total, 26u);
  EXPECT_TRUE(std::filesystem::exists(out("cand.txt")));
}

TEST_F(Cli, ClassifyEmitsEveryNonRepresentative) {
  auto labels = dir_.write("labels.json", json{{corpus_.categories[0], {"doc00000"}},
                                               {corpus_.categories[1], {"doc00001", "doc00002"}}}
                                              .dump());
  auto r = run("classify " + common() + " --labels " + labels.string() + " --out " + out("preds.jsonl"));
  ASSERT_EQ(r.status, 0) << r.output;
  std::istringstream in(fstc::io::read_file(out("preds.jsonl")));
  std::set<std::string> ids;
  for (std::string line; std::getline(in, line);) ids.insert(json::parse(line)["id"].get<std::string>());
  EXPECT_EQ(ids.size(), 23u);
  EXPECT_FALSE(ids.count("doc00000"));
  EXPECT_NE(r.output.find("accuracy"), std::string::npos);
}

TEST_F(Cli, EvalBruteforceReportAndTable) {
  auto r = run("eval-bruteforce " + common() + " --budget 500000 --seed 7 --out " + out("report.json"));
  ASSERT_EQ(r.status, 0) << r.output;
  auto j = fstc::io::read_json(out("report.json"));
  EXPECT_EQ(j["mode"], "exhaustive");
  EXPECT_EQ(j["total_combinations"], 14 * 12);
  EXPECT_EQ(j["combinations_evaluated"], 14 * 12);
  EXPECT_NE(r.output.find("Max acc."), std::string::npos);
  EXPECT_NE(r.output.find("exhaustive"), std::string::npos);
  EXPECT_EQ(fstc::io::read_file(out("report.txt")).find("Categories"), 0u);

  auto sampled = run("eval-bruteforce " + common() + " --budget 50 --out " + out("sampled.json"));
  ASSERT_EQ(sampled.status, 0) << sampled.output;
  auto s = fstc::io::read_json(out("sampled.json"));
  EXPECT_EQ(s["mode"], "sampled");
  EXPECT_EQ(s["combinations_evaluated"], 50);
  EXPECT_LE(s["max_accuracy"].get<double>(), j["max_accuracy"].get<double>());
}

TEST_F(Cli, RerunsAreByteIdentical) {
  const std::vector<std::pair<std::string, std::string>> runs{
      {"eval-bruteforce " + common() + " --threads 1", "bf"},
      {"eval-lda " + common() + " --iterations 80 --threads 1", "lda"},
      {"eval-lengthbias " + common() + " --rows --threads 1", "lb"},
      {"lda --data " + data_ + " --iterations 80", "cand"},
  };
  for (const auto& [args, name] : runs) {
    ASSERT_EQ(run(args + " --out " + out(name + "1.json")).status, 0) << args;
    auto again = args;
    if (const auto at = again.find("--threads 1"); at != std::string::npos) again.replace(at, 11, "--threads 4");
    ASSERT_EQ(run(again + " --out " + out(name + "2.json")).status, 0) << again;
    EXPECT_EQ(fstc::io::read_file(out(name + "1.json")), fstc::io::read_file(out(name + "2.json"))) << name;
    EXPECT_EQ(fstc::io::read_file(out(name + "1.txt")), fstc::io::read_file(out(name + "2.txt"))) << name;
  }
}

TEST_F(Cli, LengthBiasNeedsTwoCategories) {
  auto three = fstc::testing::synthetic_corpus(9, {4, 4, 4});
  auto data = dir_.write("three.jsonl", three.jsonl);
  auto vectors = dir_.write("three.txt", three.vectors_text);
  auto r = run("eval-lengthbias --data " + data.string() + " --vectors " + vectors.string());
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.output.find("evalharness"), std::string::npos);

  auto ok = run("eval-lengthbias " + common() + " --out " + out("lb.json"));
  ASSERT_EQ(ok.status, 0) << ok.output;
  auto j = fstc::io::read_json(out("lb.json"));
  EXPECT_GE(j["correlation"].get<double>(), -1.0);
  EXPECT_LE(j["correlation"].get<double>(), 1.0);
  EXPECT_FALSE(j.contains("rows"));
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run("").status, 1);
  EXPECT_EQ(run("frobnicate").status, 1);
  EXPECT_EQ(run("embed --vectors " + vectors_).status, 1);
  EXPECT_EQ(run("embed " + common() + " --bogus 1").status, 1);
  EXPECT_EQ(run("embed " + common() + " --alpha-sif abc").status, 1);

  auto missing = run("embed --data " + out("nope.jsonl") + " --vectors " + vectors_);
  EXPECT_EQ(missing.status, 2);
  EXPECT_NE(missing.output.find("corpus:"), std::string::npos);
  auto bad_vectors = run("embed --data " + data_ + " --vectors " + dir_.write("bad.txt", "a 1 2\nb 1\n").string());
  EXPECT_EQ(bad_vectors.status, 2);
  EXPECT_NE(bad_vectors.output.find("wordvec:"), std::string::npos);
  EXPECT_EQ(run("eval-lda " + common() + " --k 3 --iterations 10").status, 2);
}

TEST_F(Cli, HelpListsFlagsWithDefaults) {
  const std::vector<std::pair<std::string, std::vector<std::string>>> expected{
      {"embed", {"--data", "--vectors", "--vector-format", "--alpha-sif", "--out"}},
      {"lda", {"--data", "--k", "--alpha-lda", "--beta-lda", "--iterations", "--seed", "--page-size", "--out"}},
      {"classify", {"--data", "--labels", "--vectors", "--out"}},
      {"eval-bruteforce", {"--data", "--vectors", "--budget", "--threads", "--seed", "--out"}},
      {"eval-lda", {"--data", "--vectors", "--k", "--iterations", "--page-size", "--budget", "--seed", "--out"}},
      {"eval-lengthbias", {"--data", "--vectors", "--budget", "--threads", "--seed", "--out"}},
      {"serve", {"--vectors", "--listen", "--data-dir", "--config"}},
  };
  for (const auto& [sub, flags] : expected) {
    auto r = run(sub + " --help");
    EXPECT_EQ(r.status, 0) << sub;
    for (const auto& f : flags) EXPECT_NE(r.output.find(f), std::string::npos) << sub << " " << f;
  }
  EXPECT_NE(run("eval-bruteforce --help").output.find("[500000]"), std::string::npos);
  EXPECT_NE(run("lda --help").output.find("[1000]"), std::string::npos);
}
