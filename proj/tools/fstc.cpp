#include <cstdint>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <CLI11.hpp>

#include "fstc/classify.hpp"
#include "fstc/corpus.hpp"
#include "fstc/embed.hpp"
#include "fstc/evalharness.hpp"
#include "fstc/io.hpp"
#include "fstc/service/http.hpp"
#include "fstc/topics.hpp"
#include "fstc/wordvec.hpp"

namespace fs = std::filesystem;
using fstc::io::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

struct Options {
  std::string data;
  std::string vectors;
  std::string vector_format = "plain";
  std::string frequencies;
  std::string labels;
  std::string out;
  double alpha_sif = fstc::SifConfig{}.alpha_sif;
  std::size_t k = 0;
  std::optional<double> alpha_lda;
  double beta_lda = 0.01;
  std::size_t iterations = 1000;
  std::uint64_t seed = 7;
  std::size_t page_size = 12;
  std::uint64_t budget = 500'000;
  std::size_t threads = 0;
  bool rows = false;
  std::string listen = "127.0.0.1:8080";
  std::string config;
  std::string data_dir;
};

fstc::WordVectorTable load_vectors(const Options& o) {
  auto format = fstc::parse_vector_format(o.vector_format);
  if (!format) throw fstc::Error("wordvec", "unknown vector format '" + o.vector_format + "'");
  fstc::LoadReport report;
  auto table = fstc::WordVectorTable::load(o.vectors, *format, &report);
  std::cerr << report.to_log_line() << '\n';
  return table;
}

fstc::UnigramModel unigram_for(const Options& o, const std::vector<fstc::Document>& docs) {
  if (!o.frequencies.empty()) return fstc::load_unigram_counts(o.frequencies);
  return fstc::build_unigram_model(docs);
}

fstc::EmbeddedBatch embed_dataset(const Options& o, const fstc::Dataset& ds) {
  const auto table = load_vectors(o);
  const auto docs = ds.plain_documents();
  fstc::SifConfig sif{o.alpha_sif};
  sif.validate();
  auto batch = fstc::embed_batch(docs, table, unigram_for(o, docs), sif);
  std::cerr << "embed: " << docs.size() << " documents, " << batch.skips.total << " out-of-vocabulary occurrences\n";
  return batch;
}

fstc::SearchOptions search_options(const Options& o) {
  fstc::SearchOptions s;
  s.budget = o.budget;
  s.seed = o.seed;
  s.threads = o.threads;
  return s;
}

fstc::LdaConfig lda_config(const Options& o, std::size_t k) {
  fstc::LdaConfig c;
  c.k = k;
  c.alpha_lda = o.alpha_lda;
  c.beta_lda = o.beta_lda;
  c.iterations = o.iterations;
  c.seed = o.seed;
  c.validate();
  return c;
}

// report.json -> report.txt, next to the JSON artifact.
fs::path table_path(const fs::path& out) {
  auto p = out;
  if (p.extension() == ".txt") return p += ".table";
  return p.replace_extension(".txt");
}

void emit(const Options& o, const std::string& artifact, const std::string& table) {
  std::cout << table;
  if (o.out.empty()) return;
  fstc::io::write_file_atomic(o.out, artifact);
  fstc::io::write_file_atomic(table_path(o.out), table);
}

int run_embed(const Options& o) {
  const auto ds = fstc::load_labeled_dataset(o.data);
  const auto batch = embed_dataset(o, ds);
  std::string lines;
  std::size_t empty = 0;
  for (const auto& e : batch.embeddings) {
    lines += fstc::io::to_json(e).dump() + "\n";
    empty += e.is_empty();
  }
  const auto table = fstc::io::format_table(
      {{"Dataset", "# docs", "Empty", "OOV occurrences", "alpha_sif"},
       {ds.id, std::to_string(batch.embeddings.size()), std::to_string(empty), std::to_string(batch.skips.total),
        json(o.alpha_sif).dump()}});
  emit(o, lines, table);
  return kExitOk;
}

int run_lda(const Options& o) {
  const auto ds = fstc::load_labeled_dataset(o.data);
  const std::size_t k = o.k ? o.k : ds.categories.size();
  if (k == 0) throw fstc::Error("topics", "--k is required when the data carries no labels");
  const auto docs = ds.plain_documents();
  const auto cfg = lda_config(o, k);
  const auto model = fstc::fit_lda(docs, cfg);
  const auto ranking = fstc::rank_candidates(model, o.page_size);

  std::unordered_map<std::string, std::size_t> lengths;
  for (const auto& d : docs) lengths.emplace(d.id, d.token_count());
  json report{{"dataset_id", ds.id}, {"config", fstc::io::to_json(cfg)}, {"ranking", fstc::io::to_json(ranking, &lengths)}};

  std::vector<std::vector<std::string>> rows{{"Topic", "Rank", "Document", "theta", "Tokens"}};
  for (std::size_t t = 0; t < ranking.topics.size(); ++t) {
    std::size_t rank = 0;
    for (const auto& c : ranking.first_page(t)) {
      rows.push_back({std::to_string(t), std::to_string(++rank), c.doc_id, fstc::io::format_accuracy(c.probability),
                      std::to_string(lengths.at(c.doc_id))});
    }
  }
  emit(o, report.dump(2) + "\n", fstc::io::format_table(rows));
  return kExitOk;
}

int run_classify(const Options& o) {
  const auto ds = fstc::load_labeled_dataset(o.data);
  const auto selection = fstc::io::selection_from_json(fstc::io::read_json(o.labels));
  const auto batch = embed_dataset(o, ds);
  const auto protos = fstc::build_prototypes(selection, batch.embeddings);
  const auto result = fstc::classify_batch(batch.embeddings, protos);

  std::string lines;
  for (const auto& p : result.predictions) lines += fstc::io::to_json(p).dump() + "\n";
  for (const auto& id : result.unclassifiable)
    lines += json{{"id", id}, {"category", nullptr}, {"score", nullptr}, {"margin", nullptr}}.dump() + "\n";

  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& p : result.predictions) ++counts[p.category];
  std::vector<std::vector<std::string>> rows{{"Category", "Representatives", "Predicted"}};
  for (const auto& c : selection)
    rows.push_back({c.category, std::to_string(c.doc_ids.size()), std::to_string(counts[c.category])});
  rows.push_back({"(unclassifiable)", "", std::to_string(result.unclassifiable.size())});
  auto table = fstc::io::format_table(rows);

  const auto gold = fstc::gold_labels(ds);
  if (gold.size() == ds.documents.size() && !result.predictions.empty()) {
    const auto acc = fstc::accuracy(result.predictions, gold, selection, fstc::AccuracyConvention::exclude_reps);
    table += "accuracy " + fstc::io::format_accuracy(acc) + "\n";
  }
  emit(o, lines, table);
  return kExitOk;
}

int run_eval_bruteforce(const Options& o) {
  const auto ds = fstc::load_labeled_dataset(o.data);
  const auto batch = embed_dataset(o, ds);
  const auto report = fstc::search_max_one_shot(ds, batch.embeddings, search_options(o));
  emit(o, fstc::io::to_json(report).dump(2) + "\n", fstc::io::eval_table({report}));
  return kExitOk;
}

int run_eval_lda(const Options& o) {
  const auto ds = fstc::load_labeled_dataset(o.data);
  const std::size_t k = o.k ? o.k : ds.categories.size();
  const auto batch = embed_dataset(o, ds);
  const auto cfg = lda_config(o, k);
  const auto model = fstc::fit_lda(ds.plain_documents(), cfg);
  const auto report = fstc::search_lda_restricted(ds, batch.embeddings, model, o.page_size, search_options(o));
  auto j = fstc::io::to_json(report);
  j["lda"] = fstc::io::to_json(cfg);
  j["page_size"] = o.page_size;
  emit(o, j.dump(2) + "\n", fstc::io::eval_table({report}));
  return kExitOk;
}

int run_eval_lengthbias(const Options& o) {
  const auto ds = fstc::load_labeled_dataset(o.data);
  if (ds.categories.size() != 2)
    throw fstc::Error("evalharness", "length bias analysis needs exactly 2 categories, got " +
                                         std::to_string(ds.categories.size()));
  const auto batch = embed_dataset(o, ds);
  const auto result = fstc::length_bias_analysis(ds, batch.embeddings, search_options(o));
  emit(o, fstc::io::to_json(result, o.rows).dump(2) + "\n", fstc::io::length_bias_table(result));
  return kExitOk;
}

int run_serve(const Options& o, const CLI::App& cmd) {
  auto cfg = fstc::service::load_service_config(o.config.empty() ? std::nullopt : std::optional<fs::path>(o.config));
  if (cmd.count("--vectors")) cfg.vectors = o.vectors;
  if (cmd.count("--vector-format")) {
    auto f = fstc::parse_vector_format(o.vector_format);
    if (!f) throw fstc::Error("wordvec", "unknown vector format '" + o.vector_format + "'");
    cfg.vector_format = *f;
  }
  if (cmd.count("--listen")) cfg.listen = o.listen;
  if (cmd.count("--data-dir")) cfg.data_dir = o.data_dir;
  if (cmd.count("--alpha-sif")) cfg.batch.alpha_sif = o.alpha_sif;
  if (cmd.count("--alpha-lda")) cfg.batch.alpha_lda = o.alpha_lda;
  if (cmd.count("--beta-lda")) cfg.batch.beta_lda = o.beta_lda;
  if (cmd.count("--iterations")) cfg.batch.lda_iterations = o.iterations;
  if (cmd.count("--seed")) cfg.batch.lda_seed = o.seed;
  if (cmd.count("--page-size")) cfg.batch.page_size = o.page_size;
  cfg.batch.validate();
  if (cfg.vectors.empty()) throw fstc::Error("service", "no word vectors configured (--vectors or FSTC_VECTORS)");

  fstc::LoadReport report;
  auto table = std::make_shared<const fstc::WordVectorTable>(
      fstc::WordVectorTable::load(cfg.vectors, cfg.vector_format, &report));
  std::cerr << report.to_log_line() << '\n';

  const auto [host, port] = fstc::service::parse_listen(cfg.listen);
  fstc::service::Engine engine(cfg, table);
  httplib::Server server;
  fstc::service::register_routes(server, engine);
  if (!server.bind_to_port(host, port)) throw fstc::Error("service", "cannot listen on " + cfg.listen);
  std::cerr << "serving on " << cfg.listen << ", data in " << cfg.data_dir.string() << '\n';
  server.listen_after_bind();
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Few-shot text classification: embeddings, LDA candidates, classification and evaluation."};
  app.require_subcommand(1, 1);
  Options o;

  auto add_data = [&](CLI::App* c) { c->add_option("--data", o.data, "Dataset (JSONL: id, text, label)")->required(); };
  auto add_vectors = [&](CLI::App* c, bool required = true) {
    auto* opt = c->add_option("--vectors", o.vectors, "Word vector file (whitespace-separated text)");
    if (required) opt->required();
    c->add_option("--vector-format", o.vector_format, "plain | headered (first line: count dim)")
        ->capture_default_str();
    c->add_option("--alpha-sif", o.alpha_sif, "SIF smoothing parameter")->capture_default_str();
  };
  auto add_frequencies = [&](CLI::App* c) {
    c->add_option("--frequencies", o.frequencies, "Word frequency file ('word count' lines); default: the data itself");
  };
  auto add_lda = [&](CLI::App* c) {
    c->add_option("--k", o.k, "Topic count (default: number of labels in the data)");
    c->add_option("--alpha-lda", o.alpha_lda, "Document-topic prior (default: 50/k)");
    c->add_option("--beta-lda", o.beta_lda, "Topic-word prior")->capture_default_str();
    c->add_option("--iterations", o.iterations, "Gibbs sweeps")->capture_default_str();
    c->add_option("--page-size", o.page_size, "Candidates per page")->capture_default_str();
  };
  auto add_search = [&](CLI::App* c) {
    c->add_option("--budget", o.budget, "Exhaustive search limit; larger spaces are sampled")->capture_default_str();
    c->add_option("--threads", o.threads, "Worker threads (0: all cores)")->capture_default_str();
  };
  auto add_common = [&](CLI::App* c) {
    c->add_option("--seed", o.seed, "Random seed")->capture_default_str();
    c->add_option("--out", o.out, "Output artifact");
  };

  auto* embed = app.add_subcommand("embed", "Write SIF document embeddings as JSONL");
  add_data(embed);
  add_vectors(embed);
  add_frequencies(embed);
  embed->add_option("--out", o.out, "Output artifact");

  auto* lda = app.add_subcommand("lda", "Fit LDA and rank candidate representatives per topic");
  add_data(lda);
  add_lda(lda);
  add_common(lda);

  auto* classify = app.add_subcommand("classify", "Classify documents against labeled representatives");
  add_data(classify);
  classify->add_option("--labels", o.labels, "Selection JSON: {category: [doc ids]}")->required();
  add_vectors(classify);
  add_frequencies(classify);
  classify->add_option("--out", o.out, "Output artifact");

  auto* bruteforce = app.add_subcommand("eval-bruteforce", "Maximum one-shot accuracy over all representative choices");
  add_data(bruteforce);
  add_vectors(bruteforce);
  add_frequencies(bruteforce);
  add_search(bruteforce);
  add_common(bruteforce);

  auto* eval_lda = app.add_subcommand("eval-lda", "Maximum one-shot accuracy over LDA first-page candidates");
  add_data(eval_lda);
  add_vectors(eval_lda);
  add_frequencies(eval_lda);
  add_lda(eval_lda);
  add_search(eval_lda);
  add_common(eval_lda);

  auto* lengthbias = app.add_subcommand("eval-lengthbias", "Correlate representative length with prediction share");
  add_data(lengthbias);
  add_vectors(lengthbias);
  add_frequencies(lengthbias);
  add_search(lengthbias);
  add_common(lengthbias);
  lengthbias->add_flag("--rows", o.rows, "Include per-combination rows in the report");

  auto* serve = app.add_subcommand("serve", "Run the HTTP labeling service");
  add_vectors(serve, false);
  add_lda(serve);
  serve->add_option("--seed", o.seed, "LDA seed")->capture_default_str();
  serve->add_option("--listen", o.listen, "host:port")->capture_default_str();
  serve->add_option("--data-dir", o.data_dir, "Batch state directory (default: fstc-data)");
  serve->add_option("--config", o.config, "JSON config file; FSTC_* environment variables override it");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*embed) return run_embed(o);
    if (*lda) return run_lda(o);
    if (*classify) return run_classify(o);
    if (*bruteforce) return run_eval_bruteforce(o);
    if (*eval_lda) return run_eval_lda(o);
    if (*lengthbias) return run_eval_lengthbias(o);
    if (*serve) return run_serve(o, *serve);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
