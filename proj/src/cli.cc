// Apache License, Version 2.0, refer to LICENSE.txt

#include "topika/cli.hh"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>
#include <openssl/evp.h>
#include <spdlog/spdlog.h>

#include "topika/algorithm.hh"
#include "topika/benchmark.hh"
#include "topika/collapsed_inference.hh"
#include "topika/corpus.hh"
#include "topika/evaluation.hh"
#include "topika/hyperopt.hh"
#include "topika/model_io.hh"
#include "topika/seeding.hh"
#include "topika/training.hh"

namespace topika {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string hex(const unsigned char* bytes, unsigned size) {
  std::string s;
  for (unsigned i = 0; i < size; ++i) s += fmt::format("{:02x}", bytes[i]);
  return s;
}

std::string sha1_of_string(const std::string& text) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned size = 0;
  EVP_Digest(text.data(), text.size(), md, &size, EVP_sha1(), nullptr);
  return hex(md, size);
}

// Tracks files a command writes; they are listed in the manifest.
class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

  fs::path path(const std::string& name) const { return dir_ / name; }

  std::ofstream open(const std::string& name, std::ios::openmode mode = std::ios::out) {
    std::ofstream out(path(name), mode);
    if (!out) throw std::runtime_error("cannot write " + path(name).string());
    note(name);
    return out;
  }

  void note(const std::string& name) {
    if (std::find(names_.begin(), names_.end(), name) == names_.end()) names_.push_back(name);
  }

  void close(std::ofstream& out, const std::string& name) const {
    out.close();
    if (!out) throw std::runtime_error("failed writing " + path(name).string());
  }

  const std::vector<std::string>& names() const { return names_; }

 private:
  fs::path dir_;
  std::vector<std::string> names_;
};

json input_hashes(const RunConfig& rc) {
  json inputs = json::object();
  auto add = [&](const std::string& key, const fs::path& p) {
    if (!p.empty()) inputs[key] = {{"path", p.string()}, {"sha1", git_blob_sha1(p)}};
  };
  add("docword", rc.docword);
  add("vocab", rc.vocab);
  add("labels", rc.labels);
  for (std::size_t i = 0; i < rc.model.size(); ++i) add("model" + std::to_string(i), rc.model[i]);
  return inputs;
}

// Hash of everything that determines a run's results: command, configuration
// (without output locations) and input contents.
std::string run_hash(const RunConfig& rc, const std::string& config_text, const json& inputs) {
  std::istringstream lines(config_text);
  std::string line, kept;
  while (std::getline(lines, line)) {
    if (line.rfind("out=", 0) == 0 || line.rfind("results=", 0) == 0) continue;
    kept += line + '\n';
  }
  json hashes = json::object();
  for (const auto& [key, value] : inputs.items()) hashes[key] = value["sha1"];
  return sha1_of_string(rc.command + '\n' + kept + hashes.dump());
}

void write_manifest(Outputs& outputs, const RunConfig& rc, const std::string& config_text,
                    const json& inputs, json extra = json::object()) {
  {
    std::ofstream cfg = outputs.open("run.toml");
    cfg << config_text;
    outputs.close(cfg, "run.toml");
  }
  json m;
  m["tool"] = "topika";
  m["command"] = rc.command;
  m["reproduce"] = "topika " + rc.command + " --config run.toml";
  m["config"] = config_text;
  m["inputs"] = inputs;
  m["run_hash"] = run_hash(rc, config_text, inputs);
  for (auto& [key, value] : extra.items()) m[key] = value;
  outputs.note("manifest.json");
  m["outputs"] = outputs.names();
  std::ofstream out = outputs.open("manifest.json");
  out << m.dump(2) << '\n';
  outputs.close(out, "manifest.json");
}

Algorithm single_algorithm(const RunConfig& rc) {
  if (rc.algo.size() != 1) {
    throw ConfigError(rc.command + " takes exactly one --algo (got " +
                      std::to_string(rc.algo.size()) + ")");
  }
  return parse_algorithm(rc.algo.front());
}

std::vector<Estimator> estimators_for(const RunConfig& rc, Algorithm alg) {
  std::vector<Estimator> out;
  for (const std::string& name : rc.estimator) out.push_back(parse_estimator(name));
  if (out.empty()) out.push_back(default_estimator(alg));
  return out;
}

TrainConfig train_config(const RunConfig& rc, Algorithm alg) {
  TrainConfig cfg;
  cfg.algorithm = alg;
  cfg.K = rc.topics;
  cfg.h.alpha = rc.alpha;
  cfg.h.eta = rc.eta;
  cfg.estimator = estimators_for(rc, alg).front();
  cfg.max_iterations = rc.iters;
  cfg.eval_every = rc.eval_every;
  cfg.patience = rc.patience;
  cfg.minka = rc.minka;
  cfg.minka_start = rc.minka_start;
  cfg.workers = rc.workers;
  cfg.sync_every = rc.sync_every;
  cfg.seed = rc.seed;
  return cfg;
}

void require(const fs::path& p, const char* flag) {
  if (p.empty()) throw ConfigError(std::string(flag) + " is required");
}

Corpus load_input(const RunConfig& rc) {
  require(rc.docword, "--docword");
  Corpus c = load_uci_bow(rc.docword, rc.vocab);
  spdlog::info("loaded {}: D={} W={} tokens={}", rc.docword.string(), c.num_docs(), c.vocab_size(),
               c.total_tokens());
  return c;
}

std::uint64_t fold_seed(const RunConfig& rc) { return derive_seed(rc.seed, "fold"); }

SplitCorpus make_split(const Corpus& corpus, const RunConfig& rc, bool need_heldout) {
  std::size_t test = rc.test_docs, validation = rc.validation_docs;
  if (need_heldout) {
    if (test == 0) test = std::max<std::size_t>(1, corpus.num_docs() / 10);
    if (validation == 0) validation = std::max<std::size_t>(1, corpus.num_docs() / 10);
  }
  return split_corpus(corpus, test, validation, derive_seed(rc.seed, "split"));
}

void write_split(Outputs& outputs, const SplitCorpus& split) {
  auto ids = [&](const std::string& name, const std::vector<std::size_t>& v) {
    std::ofstream out = outputs.open(name);
    for (std::size_t id : v) out << id + 1 << '\n';  // 1-based, like UCI document ids
    outputs.close(out, name);
  };
  auto part = [&](const std::string& name, const Corpus& c, const std::vector<std::size_t>& v) {
    write_uci_bow(outputs.path(name + ".docword.txt"), c);
    outputs.note(name + ".docword.txt");
    ids(name + ".ids", v);
  };
  part("train", split.train, split.train_ids);
  if (split.validation.num_docs()) part("validation", split.validation, split.validation_ids);
  if (split.test.num_docs()) part("test", split.test, split.test_ids);
}

void append_results(const fs::path& path, const json& metrics) {
  const bool fresh = !fs::exists(path) || fs::file_size(path) == 0;
  std::ofstream out(path, std::ios::app);
  if (!out) throw std::runtime_error("cannot append to " + path.string());
  if (fresh) {
    bool first = true;
    for (const auto& [key, value] : metrics.items()) {
      out << (first ? "" : ",") << key;
      first = false;
    }
    out << '\n';
  }
  bool first = true;
  for (const auto& [key, value] : metrics.items()) {
    out << (first ? "" : ",");
    if (value.is_string()) {
      out << value.get<std::string>();
    } else if (value.is_number_float()) {
      out << fmt::format("{}", value.get<double>());
    } else if (!value.is_null()) {
      out << value.dump();
    }
    first = false;
  }
  out << '\n';
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

// Tiny random corpus for the exact-posterior check: 1-3 documents, 2-4 word
// types and at most 10 tokens.
Corpus tiny_corpus(Rng& rng) {
  std::uniform_int_distribution<std::uint32_t> docs_d(1, 3), words_d(2, 4), tokens_d(3, 10);
  const std::uint32_t D = docs_d(rng), W = words_d(rng);
  const std::uint32_t N = std::max(D, tokens_d(rng));
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> cells;
  std::uniform_int_distribution<std::uint32_t> doc(0, D - 1), word(0, W - 1);
  for (std::uint32_t t = 0; t < N; ++t) ++cells[{t < D ? t : doc(rng), word(rng)}];
  std::vector<Entry> entries;
  for (const auto& [key, count] : cells) entries.push_back({key.first, key.second, count});
  return Corpus(D, W, std::move(entries));
}

}  // namespace

std::string config_toml(const RunConfig& rc) {
  std::string out;
  auto str = [&](const char* key, const std::string& v) {
    if (!v.empty()) out += fmt::format("{}={}\n", key, json(v).dump());
  };
  auto list = [&](const char* key, const auto& values) {
    if (values.empty()) return;
    out += fmt::format("{}=[", key);
    for (std::size_t i = 0; i < values.size(); ++i) {
      out += (i ? "," : "") + json(values[i]).dump();
    }
    out += "]\n";
  };
  auto num = [&](const char* key, auto v) { out += fmt::format("{}={}\n", key, v); };
  str("docword", rc.docword.string());
  str("vocab", rc.vocab.string());
  str("labels", rc.labels.string());
  str("out", rc.out.string());
  str("results", rc.results.string());
  std::vector<std::string> models;
  for (const fs::path& p : rc.model) models.push_back(p.string());
  list("model", models);
  list("algo", rc.algo);
  list("estimator", rc.estimator);
  num("topics", rc.topics);
  num("alpha", rc.alpha);
  num("eta", rc.eta);
  num("iters", rc.iters);
  num("seed", rc.seed);
  num("minka", rc.minka);
  num("minka-start", rc.minka_start);
  num("workers", rc.workers);
  num("sync-every", rc.sync_every);
  num("samples", rc.samples);
  list("grid-alpha", rc.grid_alpha);
  list("grid-eta", rc.grid_eta);
  if (rc.threshold) num("threshold", *rc.threshold);
  num("test-docs", rc.test_docs);
  num("validation-docs", rc.validation_docs);
  num("eval-every", rc.eval_every);
  num("patience", rc.patience);
  num("runs", rc.runs);
  num("grid-threads", rc.grid_threads);
  num("top-words", rc.top_words);
  num("oracle-instances", rc.oracle_instances);
  num("oracle-sweeps", rc.oracle_sweeps);
  return out;
}

std::string git_blob_sha1(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  const auto size = fs::file_size(path);
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr);
  const std::string header = "blob " + std::to_string(size) + '\0';
  EVP_DigestUpdate(ctx, header.data(), header.size());
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  return hex(md, len);
}

void cmd_train(const RunConfig& rc, const std::string& config_text) {
  const Algorithm alg = single_algorithm(rc);
  const TrainConfig cfg = train_config(rc, alg);
  cfg.validate();
  require(rc.out, "--out");
  const json inputs = input_hashes(rc);
  const Corpus corpus = load_input(rc);
  Outputs outputs(rc.out);

  const bool split_requested = rc.test_docs > 0 || rc.validation_docs > 0;
  SplitCorpus split;
  std::optional<FoldInSplit> validation;
  if (split_requested) {
    split = make_split(corpus, rc, false);
    write_split(outputs, split);
    if (split.validation.num_docs()) {
      validation = fold_in_split(split.validation, derive_seed(fold_seed(rc), "validation"));
    }
  }
  const Corpus& train_corpus = split_requested ? split.train : corpus;

  const TrainResult result = train(train_corpus, validation ? &*validation : nullptr, cfg);
  spdlog::info("{}: {} iterations in {:.2f}s (converged={}, early stop={})", to_string(alg),
               result.iterations, result.seconds, result.converged, result.stopped_early);

  const ModelDump dump = make_dump(result.counts, result.h, alg, cfg.prediction_estimator(),
                                   result.iterations, cfg.seed);
  write_model(outputs.path("model.txt"), dump);
  outputs.note("model.txt");
  {
    std::ofstream out = outputs.open("trace.csv");
    write_trace_csv(out, result, cfg);
    outputs.close(out, "trace.csv");
  }
  {
    std::ofstream out = outputs.open("top_words.csv");
    write_top_words(out, dump.phi, train_corpus.vocab(), rc.top_words);
    outputs.close(out, "top_words.csv");
  }
  write_manifest(outputs, rc, config_text, inputs,
                 {{"iterations", result.iterations},
                  {"converged", result.converged},
                  {"final_alpha", result.h.alpha},
                  {"final_eta", result.h.eta}});
}

void cmd_evaluate(const RunConfig& rc, const std::string& config_text) {
  if (rc.model.empty()) throw ConfigError("--model is required");
  if (rc.samples < 1) throw ConfigError("--samples must be >= 1");
  if (rc.model.size() > 1 && rc.samples != 1 && rc.samples != rc.model.size()) {
    throw ConfigError("--samples must match the number of --model dumps");
  }
  require(rc.out, "--out");
  const auto start = Clock::now();
  const json inputs = input_hashes(rc);

  std::vector<ModelDump> models;
  for (const fs::path& p : rc.model) models.push_back(read_model(p));
  const ModelDump& first = models.front();
  const Estimator est =
      rc.estimator.empty() ? first.estimator : parse_estimator(rc.estimator.front());
  for (const ModelDump& m : models) {
    if (m.W != first.W || m.K != first.K) throw ConfigError("model dumps disagree on W or K");
    if (est != m.estimator && !m.word_topic_counts) {
      throw ConfigError("estimator " + std::string(to_string(est)) +
                        " requested but the model dump was written with " +
                        std::string(to_string(m.estimator)) + " and carries no counts");
    }
    if (est == Estimator::kMap && (m.alpha <= 1.0 || m.eta <= 1.0)) {
      throw ConfigError("MAP estimator requires alpha > 1 and eta > 1 in the model");
    }
  }

  const Corpus corpus = load_input(rc);
  if (corpus.vocab_size() != first.W) {
    throw ConfigError("vocabulary size mismatch: corpus W=" + std::to_string(corpus.vocab_size()) +
                      ", model W=" + std::to_string(first.W));
  }
  const FoldInSplit fold = fold_in_split(corpus, derive_seed(fold_seed(rc), "test"));
  std::vector<double> nj(corpus.num_docs());
  for (std::size_t j = 0; j < nj.size(); ++j) {
    nj[j] = static_cast<double>(fold.observed_half.doc_length(j));
  }

  const FoldInConfig fold_cfg;
  const std::size_t per_model = models.size() == 1 ? rc.samples : 1;
  std::vector<TopicEstimates> samples;
  std::vector<Matrix> factors;
  for (const ModelDump& m : models) {
    const Hyperparams h = m.hyperparams();
    const auto counts = m.counts();
    const Matrix factor = counts ? fold_in_word_factor(m.algorithm, *counts, h) : m.phi;
    const Matrix phi = counts ? estimate(est, *counts, h).phi : m.phi;
    for (std::size_t s = 0; s < per_model; ++s) {
      const std::uint64_t seed =
          s == 0 ? derive_seed(m.seed, "heldout") : derive_seed(m.seed, "heldout", s);
      const Matrix nkj = fold_in_counts(fold.observed_half, factor, m.algorithm, h, fold_cfg, seed);
      samples.push_back({phi, estimate_theta(est, nkj, nj, h.alpha), est});
    }
    factors.push_back(factor);
  }
  const PerplexityReport report = perplexity(fold.heldout_half, samples);

  json metrics;
  metrics["algorithm"] = to_string(first.algorithm);
  metrics["K"] = first.K;
  metrics["alpha"] = first.alpha;
  metrics["eta"] = first.eta;
  metrics["seed"] = first.seed;
  metrics["estimator"] = to_string(est);
  metrics["samples"] = report.samples;
  metrics["perplexity"] = report.perplexity;
  metrics["log_likelihood"] = report.log_likelihood;
  metrics["heldout_tokens"] = report.heldout_tokens;
  metrics["auc"] = nullptr;
  metrics["map"] = nullptr;
  metrics["classes_scored"] = nullptr;

  if (!rc.labels.empty()) {
    const std::vector<int> labels = load_labels(rc.labels);
    if (labels.size() != corpus.num_docs()) {
      throw ConfigError("labels file has " + std::to_string(labels.size()) + " lines for " +
                        std::to_string(corpus.num_docs()) + " documents");
    }
    // Theta of whole documents; a seeded half of them defines class centroids
    // and the other half is scored.
    const ModelDump& m = first;
    const Matrix nkj = fold_in_counts(corpus, factors.front(), m.algorithm, m.hyperparams(),
                                      fold_cfg, derive_seed(m.seed, "classify"));
    std::vector<double> full(corpus.num_docs());
    for (std::size_t j = 0; j < full.size(); ++j) full[j] = static_cast<double>(corpus.doc_length(j));
    const Matrix theta = estimate_theta(est, nkj, full, m.alpha);

    std::vector<std::size_t> order(corpus.num_docs());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(rc.seed, "classify-split"));
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t half = order.size() / 2;
    auto take = [&](std::size_t from, std::size_t to, Matrix& th, std::vector<int>& lab) {
      th = Matrix(to - from, first.K);
      for (std::size_t i = from; i < to; ++i) {
        std::copy_n(theta.row(order[i]).begin(), first.K, th.row(i - from).begin());
        lab.push_back(labels[order[i]]);
      }
    };
    Matrix train_theta, test_theta;
    std::vector<int> train_labels, test_labels;
    take(0, half, train_theta, train_labels);
    take(half, order.size(), test_theta, test_labels);
    const ClassificationReport cls =
        classify_and_score(train_theta, train_labels, test_theta, test_labels);
    metrics["auc"] = cls.mean_auc;
    metrics["map"] = cls.mean_average_precision;
    metrics["classes_scored"] = cls.classes.size();
  }
  metrics["seconds"] = since(start);

  Outputs outputs(rc.out);
  {
    std::ofstream out = outputs.open("metrics.json");
    out << metrics.dump(2) << '\n';
    outputs.close(out, "metrics.json");
  }
  const fs::path results = rc.results.empty() ? outputs.path("results.csv") : rc.results;
  append_results(results, metrics);
  if (rc.results.empty()) outputs.note("results.csv");
  write_manifest(outputs, rc, config_text, inputs);
  std::cout << metrics.dump() << '\n';
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  return fields;
}

// Cells of `algorithm` recorded in an earlier grid.csv.
std::vector<GridCell> completed_cells(const fs::path& csv, Algorithm algorithm,
                                      const std::vector<Estimator>& estimators) {
  std::vector<GridCell> cells;
  std::ifstream in(csv);
  std::string line;
  if (!std::getline(in, line)) return cells;
  while (std::getline(in, line)) {
    const auto f = split_csv(line);
    if (f.size() != 10 || f[0] != to_string(algorithm) || f[6] == "invalid") continue;
    const Estimator est = parse_estimator(f[1]);
    const auto slot = std::find(estimators.begin(), estimators.end(), est);
    if (slot == estimators.end()) continue;
    const double alpha = std::stod(f[2]), eta = std::stod(f[3]);
    auto cell = std::find_if(cells.begin(), cells.end(),
                             [&](const GridCell& c) { return c.alpha == alpha && c.eta == eta; });
    if (cell == cells.end()) {
      cells.push_back({alpha, eta, true, {}, std::vector<GridScore>(estimators.size()),
                       std::stoul(f[8]), std::stod(f[9])});
      for (std::size_t i = 0; i < estimators.size(); ++i) {
        cells.back().scores[i] = {estimators[i], std::nan(""), std::nan("")};
      }
      cell = cells.end() - 1;
    }
    cell->scores[static_cast<std::size_t>(slot - estimators.begin())] = {est, std::stod(f[6]),
                                                                         std::stod(f[7])};
  }
  std::erase_if(cells, [](const GridCell& c) {
    return std::any_of(c.scores.begin(), c.scores.end(),
                       [](const GridScore& s) { return std::isnan(s.validation_perplexity); });
  });
  return cells;
}

}  // namespace

void cmd_grid(const RunConfig& rc, const std::string& config_text) {
  require(rc.out, "--out");
  std::vector<Algorithm> algorithms;
  for (const std::string& name : rc.algo) algorithms.push_back(parse_algorithm(name));
  GridSpec grid;
  grid.alpha_values = rc.grid_alpha;
  grid.eta_values = rc.grid_eta;
  for (Algorithm alg : algorithms) {
    grid.alphas_for(alg);
    grid.etas_for(alg);
    TrainConfig probe = train_config(rc, alg);
    probe.h.alpha = grid.alphas_for(alg).front();
    probe.h.eta = grid.etas_for(alg).front();
    probe.validate();
  }
  const json inputs = input_hashes(rc);
  const Corpus corpus = load_input(rc);
  Outputs outputs(rc.out);
  const SplitCorpus split = make_split(corpus, rc, true);
  write_split(outputs, split);

  const std::string hash = run_hash(rc, config_text, inputs);
  bool resume = false;
  if (fs::exists(outputs.path("manifest.json")) && fs::exists(outputs.path("grid.csv"))) {
    std::ifstream in(outputs.path("manifest.json"));
    const json previous = json::parse(in, nullptr, false);
    resume = !previous.is_discarded() && previous.value("run_hash", "") == hash;
  }
  if (!resume) {
    std::ofstream fresh = outputs.open("grid.csv");
    fresh << kGridCsvHeader << '\n';
    outputs.close(fresh, "grid.csv");
  }
  // Manifest first, so an interrupted run can be resumed.
  write_manifest(outputs, rc, config_text, inputs);

  json best = json::array();
  std::vector<GridResult> results;
  for (Algorithm alg : algorithms) {
    const TrainConfig base = train_config(rc, alg);
    GridOptions options;
    options.estimators = estimators_for(rc, alg);
    options.threads = rc.grid_threads;
    options.fold_seed = fold_seed(rc);
    if (resume) {
      options.completed = completed_cells(outputs.path("grid.csv"), alg, options.estimators);
      spdlog::info("{}: resuming with {} completed cells", to_string(alg), options.completed.size());
    }
    std::ofstream progress(outputs.path("grid.csv"), std::ios::app);
    options.on_cell = [&](const GridCell& cell) {
      write_grid_rows(progress, alg, options.estimators, cell, base);
      progress.flush();
      spdlog::info("{} alpha={} eta={}: {}", to_string(alg), cell.alpha, cell.eta,
                   cell.valid ? fmt::format("validation perplexity {:.2f}",
                                            cell.scores.front().validation_perplexity)
                              : "invalid (" + cell.error + ")");
    };
    results.push_back(grid_search(alg, split, grid, base, options));
    for (Estimator est : results.back().estimators) {
      const auto b = results.back().best(est);
      json entry{{"algorithm", to_string(alg)}, {"estimator", to_string(est)}};
      if (b) {
        const GridCell& c = results.back().cells[*b];
        const auto& score = *std::find_if(c.scores.begin(), c.scores.end(),
                                          [&](const GridScore& s) { return s.estimator == est; });
        entry["alpha"] = c.alpha;
        entry["eta"] = c.eta;
        entry["K"] = rc.topics;
        entry["seed"] = rc.seed;
        entry["validation_perplexity"] = score.validation_perplexity;
        entry["test_perplexity"] = score.test_perplexity;
      } else {
        entry["error"] = "no valid cell";
      }
      best.push_back(entry);
    }
  }

  {
    std::ofstream out = outputs.open("grid.csv");
    bool header = true;
    for (std::size_t i = 0; i < results.size(); ++i) {
      write_grid_csv(out, results[i], train_config(rc, algorithms[i]), header);
      header = false;
    }
    outputs.close(out, "grid.csv");
  }
  {
    std::ofstream out = outputs.open("best.json");
    out << best.dump(2) << '\n';
    outputs.close(out, "best.json");
  }
  write_manifest(outputs, rc, config_text, inputs);
  std::cout << best.dump() << '\n';
}

void cmd_bench(const RunConfig& rc, const std::string& config_text) {
  require(rc.out, "--out");
  if (!rc.threshold) throw ConfigError("--threshold is required for bench");
  std::vector<TrainConfig> configs;
  for (const std::string& name : rc.algo) {
    configs.push_back(train_config(rc, parse_algorithm(name)));
    configs.back().validate();
  }
  const json inputs = input_hashes(rc);
  const Corpus corpus = load_input(rc);
  Outputs outputs(rc.out);
  const SplitCorpus split = make_split(corpus, rc, true);
  const FoldInSplit validation =
      fold_in_split(split.validation, derive_seed(fold_seed(rc), "validation"));

  const auto timings = timing_benchmark(configs, split.train, validation, *rc.threshold, rc.runs);
  std::ofstream out = outputs.open("bench.csv");
  out << "algorithm,threshold,timed_out,seconds,sweeps,seconds_per_sweep,runs\n";
  for (const TimingResult& t : timings) {
    const std::string row =
        fmt::format("{},{},{},{},{},{},{}", to_string(t.algorithm), *rc.threshold, t.timed_out,
                    t.seconds, t.sweeps, t.seconds_per_sweep, rc.runs);
    out << row << '\n';
    std::cout << row << '\n';
  }
  outputs.close(out, "bench.csv");
  write_manifest(outputs, rc, config_text, inputs);
}

bool cmd_oracle_check(const RunConfig& rc, const std::string& config_text) {
  Hyperparams h;
  h.alpha = rc.alpha;
  h.eta = rc.eta;
  h.validate();
  Rng rng(derive_seed(rc.seed, "oracle-instances"));
  json rows = json::array();
  bool ok = true;
  for (std::size_t i = 0; i < rc.oracle_instances; ++i) {
    const Corpus c = tiny_corpus(rng);
    const CallenResult exact = callen_oracle(c, 2, h);
    const Matrix empirical = cgs_marginals(c, 2, h, 1000, rc.oracle_sweeps, derive_seed(rc.seed, "oracle", i));
    double diff = 0.0;
    for (std::size_t t = 0; t < exact.marginals.rows(); ++t) {
      for (std::size_t k = 0; k < 2; ++k) {
        diff = std::max(diff, std::abs(exact.marginals(t, k) - empirical(t, k)));
      }
    }
    const bool pass = exact.identity_residual < 1e-10 && diff < 0.01;
    ok = ok && pass;
    rows.push_back({{"instance", i},
                    {"docs", c.num_docs()},
                    {"words", c.vocab_size()},
                    {"tokens", c.total_tokens()},
                    {"identity_residual", exact.identity_residual},
                    {"max_marginal_difference", diff},
                    {"pass", pass}});
    std::cout << fmt::format("instance {:2d} D={} W={} N={:2d} residual={:.3e} cgs_diff={:.4f} {}\n",
                             i, c.num_docs(), c.vocab_size(), c.total_tokens(),
                             exact.identity_residual, diff, pass ? "ok" : "FAIL");
  }
  if (!rc.out.empty()) {
    Outputs outputs(rc.out);
    std::ofstream out = outputs.open("oracle.json");
    out << json{{"pass", ok}, {"instances", rows}}.dump(2) << '\n';
    outputs.close(out, "oracle.json");
    write_manifest(outputs, rc, config_text, input_hashes(rc));
  }
  return ok;
}

int run_cli(int argc, const char* const* argv) {
  RunConfig rc;
  CLI::App app{"Topic models: ML, MAP, VB, CVB, CVB0, CGS and parallel CVB0"};
  app.set_config("--config", "", "TOML/INI file with the same keys as the flags");
  app.require_subcommand(1, 1);

  const std::vector<std::string> algorithm_names{"ml", "map", "vb", "cvb", "cvb0", "cgs", "pcvb0"};
  const std::vector<std::string> estimator_names{"collapsed", "map", "vb_alternative"};
  app.add_option("--docword", rc.docword, "UCI docword file")->check(CLI::ExistingFile);
  app.add_option("--vocab", rc.vocab, "UCI vocabulary file")->check(CLI::ExistingFile);
  app.add_option("--labels", rc.labels, "one integer class per document")->check(CLI::ExistingFile);
  app.add_option("--out", rc.out, "output directory");
  app.add_option("--results", rc.results, "metrics CSV to append to (default <out>/results.csv)");
  app.add_option("--model", rc.model, "model dump(s) to evaluate")->check(CLI::ExistingFile)->delimiter(',');
  app.add_option("--algo", rc.algo, "algorithm(s)")
      ->check(CLI::IsMember(algorithm_names))
      ->delimiter(',')
      ->capture_default_str();
  app.add_option("--estimator", rc.estimator, "prediction estimator(s)")
      ->check(CLI::IsMember(estimator_names))
      ->delimiter(',');
  app.add_option("--topics", rc.topics, "number of topics K")->capture_default_str();
  app.add_option("--alpha", rc.alpha, "document-topic Dirichlet strength")->capture_default_str();
  app.add_option("--eta", rc.eta, "topic-word Dirichlet strength")->capture_default_str();
  app.add_option("--iters", rc.iters, "maximum sweeps")->capture_default_str();
  app.add_option("--seed", rc.seed, "root seed")->capture_default_str();
  app.add_flag("--minka", rc.minka, "learn alpha and eta with Minka's fixed point");
  app.add_option("--minka-start", rc.minka_start, "first sweep after which Minka updates run")
      ->capture_default_str();
  app.add_option("--workers", rc.workers, "parallel CVB0 workers (capped by TOPIKA_THREADS)")
      ->capture_default_str();
  app.add_option("--sync-every", rc.sync_every, "tokens per worker between merges")
      ->capture_default_str();
  app.add_option("--samples", rc.samples, "samples averaged for perplexity")->capture_default_str();
  app.add_option("--grid-alpha", rc.grid_alpha, "alpha grid")->delimiter(',')->capture_default_str();
  app.add_option("--grid-eta", rc.grid_eta, "eta grid")->delimiter(',')->capture_default_str();
  app.add_option("--threshold", rc.threshold, "perplexity threshold for bench");
  app.add_option("--test-docs", rc.test_docs, "documents held out for testing")->capture_default_str();
  app.add_option("--validation-docs", rc.validation_docs, "documents held out for validation")
      ->capture_default_str();
  app.add_option("--eval-every", rc.eval_every, "sweeps between validation evaluations")
      ->capture_default_str();
  app.add_option("--patience", rc.patience, "evaluations without improvement before stopping")
      ->capture_default_str();
  app.add_option("--runs", rc.runs, "bench repetitions per algorithm")->capture_default_str();
  app.add_option("--grid-threads", rc.grid_threads, "grid cells trained concurrently")
      ->capture_default_str();
  app.add_option("--top-words", rc.top_words, "words per topic in top_words.csv")
      ->capture_default_str();
  app.add_option("--oracle-instances", rc.oracle_instances, "random instances for oracle-check")
      ->capture_default_str();
  app.add_option("--oracle-sweeps", rc.oracle_sweeps, "CGS sweeps per oracle instance")
      ->capture_default_str();

  const std::pair<const char*, const char*> commands[] = {
      {"train", "train a model; writes model.txt, trace.csv, manifest.json"},
      {"evaluate", "fold-in perplexity (and AUC/mAP with --labels) of model dump(s)"},
      {"grid", "grid search over alpha and eta; writes grid.csv and best.json"},
      {"bench", "time each --algo to a perplexity --threshold"},
      {"oracle-check", "compare CGS marginals with exact enumeration on tiny corpora"},
  };
  for (const auto& [name, help] : commands) {
    app.add_subcommand(name, help)->fallthrough()->callback([&rc, n = name] { rc.command = n; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  const std::string config_text = config_toml(rc);
  try {
    if (rc.command == "train") cmd_train(rc, config_text);
    else if (rc.command == "evaluate") cmd_evaluate(rc, config_text);
    else if (rc.command == "grid") cmd_grid(rc, config_text);
    else if (rc.command == "bench") cmd_bench(rc, config_text);
    else if (!cmd_oracle_check(rc, config_text)) return kExitCheckFailed;
  } catch (const ConfigError& e) {
    spdlog::error("configuration error: {}", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitFailure;
  }
  return 0;
}

}  // namespace topika
