// Apache License, Version 2.0, refer to LICENSE.txt

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "support/synthetic.hh"
#include "topika/cli.hh"
#include "topika/model_io.hh"

using namespace topika;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("topika-cli-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "topika");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string write_corpus(const TempDir& dir, std::size_t D = 40) {
  const auto synth = testing::make_lda_corpus(D, 25, 3, 30, 0.3, 0.2, 31);
  const std::string path = dir / "docword.txt";
  write_uci_bow(fs::path(path), synth.corpus);
  return path;
}

}  // namespace

TEST_CASE("git blob hash") {
  TempDir dir;
  std::ofstream(dir / "hello.txt") << "hello\n";
  CHECK(git_blob_sha1(dir / "hello.txt") == "ce013625030ba8dba906f756967f9e9ca394464a");
}

TEST_CASE("train ML writes a dump and a monotone trace") {
  TempDir dir;
  const std::string docword = write_corpus(dir, 12);
  REQUIRE(run({"train", "--docword", docword, "--algo", "ml", "--topics", "2", "--iters", "20",
               "--out", dir / "run"}) == 0);
  CHECK(fs::exists(dir / "run/model.txt"));
  CHECK(fs::exists(dir / "run/manifest.json"));
  std::ifstream trace(dir / "run/trace.csv");
  std::string line;
  std::getline(trace, line);
  CHECK(line == "iteration,objective,validation_perplexity,alpha,eta,seconds");
  double previous = -1e300;
  int rows = 0;
  while (std::getline(trace, line)) {
    const double objective = std::stod(line.substr(line.find(',') + 1));
    CHECK(objective >= previous - 1e-9 * std::abs(previous));
    previous = objective;
    ++rows;
  }
  CHECK(rows >= 1);
  CHECK(rows <= 20);
}

TEST_CASE("identical configurations give identical dumps") {
  TempDir dir;
  const std::string docword = write_corpus(dir);
  for (const char* algo : {"cvb0", "cgs"}) {
    for (const char* out : {"a", "b"}) {
      REQUIRE(run({"train", "--docword", docword, "--algo", algo, "--topics", "3", "--iters", "15",
                   "--seed", "9", "--validation-docs", "5", "--out", dir / out}) == 0);
    }
    CHECK(slurp(dir / "a/model.txt") == slurp(dir / "b/model.txt"));
  }
}

TEST_CASE("a manifest's run.toml reproduces the run") {
  TempDir dir;
  const std::string docword = write_corpus(dir);
  REQUIRE(run({"train", "--docword", docword, "--algo", "vb", "--alpha", "0.3", "--eta", "0.05",
               "--topics", "3", "--iters", "10", "--out", dir / "first"}) == 0);
  const nlohmann::json manifest = nlohmann::json::parse(slurp(dir / "first/manifest.json"));
  CHECK(manifest["inputs"]["docword"]["sha1"] == git_blob_sha1(docword));
  REQUIRE(run({"train", "--config", dir / "first/run.toml", "--out", dir / "second"}) == 0);
  CHECK(slurp(dir / "first/model.txt") == slurp(dir / "second/model.txt"));
}

TEST_CASE("flags override the config file") {
  TempDir dir;
  const std::string docword = write_corpus(dir);
  std::ofstream(dir / "cfg.toml") << "docword=\"" << docword << "\"\ntopics=4\niters=3\nalpha=0.9\n";
  REQUIRE(run({"train", "--config", dir / "cfg.toml", "--alpha", "0.2", "--out", dir / "o"}) == 0);
  const ModelDump m = read_model(fs::path(dir / "o/model.txt"));
  CHECK(m.K == 4);
  CHECK(m.alpha == 0.2);
}

TEST_CASE("MAP with eta below one is rejected before training") {
  TempDir dir;
  const std::string docword = write_corpus(dir);
  CHECK(run({"train", "--docword", docword, "--algo", "map", "--alpha", "1.5", "--eta", "0.5",
             "--out", dir / "o"}) == kExitConfig);
  CHECK_FALSE(fs::exists(dir / "o/model.txt"));
  RunConfig rc;
  rc.command = "train";
  rc.docword = docword;
  rc.algo = {"map"};
  rc.alpha = 1.5;
  rc.eta = 0.5;
  rc.out = dir / "o";
  try {
    cmd_train(rc, "");
    FAIL("expected a configuration error");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("eta > 1") != std::string::npos);
  }
}

TEST_CASE("evaluate a uniform dump gives perplexity W") {
  TempDir dir;
  const std::string docword = write_corpus(dir);
  ModelDump m;
  m.W = 25;
  m.K = 2;
  m.D = 0;
  m.alpha = 0.5;
  m.eta = 0.5;
  m.phi = Matrix(25, 2, 1.0 / 25.0);
  m.theta = Matrix(0, 2);
  write_model(fs::path(dir / "uniform.txt"), m);
  REQUIRE(run({"evaluate", "--model", dir / "uniform.txt", "--docword", docword, "--out", dir / "e"}) == 0);
  const auto metrics = nlohmann::json::parse(slurp(dir / "e/metrics.json"));
  CHECK(metrics["perplexity"].get<double>() == doctest::Approx(25.0).epsilon(1e-12));
  CHECK(fs::exists(dir / "e/results.csv"));
}

TEST_CASE("evaluate is deterministic and checks the vocabulary") {
  TempDir dir;
  const std::string docword = write_corpus(dir);
  REQUIRE(run({"train", "--docword", docword, "--topics", "3", "--iters", "10", "--out", dir / "t"}) == 0);
  std::ofstream(dir / "labels.txt") << [] {
    std::string s;
    for (int i = 0; i < 40; ++i) s += std::to_string(i % 2) + "\n";
    return s;
  }();
  for (const char* out : {"e1", "e2"}) {
    REQUIRE(run({"evaluate", "--model", dir / "t/model.txt", "--docword", docword, "--labels",
                 dir / "labels.txt", "--out", dir / out}) == 0);
  }
  auto a = nlohmann::json::parse(slurp(dir / "e1/metrics.json"));
  auto b = nlohmann::json::parse(slurp(dir / "e2/metrics.json"));
  CHECK(a["auc"].is_number());
  a.erase("seconds");
  b.erase("seconds");
  CHECK(a == b);

  std::ofstream(dir / "small.txt") << "1\n3\n1\n1 1 1\n";
  CHECK(run({"evaluate", "--model", dir / "t/model.txt", "--docword", dir / "small.txt", "--out",
             dir / "e3"}) == kExitConfig);
  CHECK(run({"evaluate", "--model", dir / "t/model.txt", "--docword", docword, "--estimator", "map",
             "--out", dir / "e4"}) == kExitConfig);
}

TEST_CASE("a 1 x 1 grid equals train followed by evaluate") {
  TempDir dir;
  const std::string docword = write_corpus(dir, 60);
  const std::vector<std::string> common{"--docword", docword, "--algo", "cvb0", "--topics", "3",
                                        "--iters", "30", "--test-docs", "10", "--validation-docs", "10",
                                        "--seed", "5"};
  auto with = [&](std::vector<std::string> head, std::vector<std::string> tail) {
    head.insert(head.end(), common.begin(), common.end());
    head.insert(head.end(), tail.begin(), tail.end());
    return head;
  };
  REQUIRE(run(with({"grid"}, {"--grid-alpha", "0.2", "--grid-eta", "0.1", "--out", dir / "g"})) == 0);
  REQUIRE(run(with({"train"}, {"--alpha", "0.2", "--eta", "0.1", "--out", dir / "t"})) == 0);
  REQUIRE(run({"evaluate", "--model", dir / "t/model.txt", "--docword", dir / "t/test.docword.txt",
               "--seed", "5", "--out", dir / "e"}) == 0);
  const auto best = nlohmann::json::parse(slurp(dir / "g/best.json"));
  const auto metrics = nlohmann::json::parse(slurp(dir / "e/metrics.json"));
  CHECK(best[0]["test_perplexity"].get<double>() ==
        doctest::Approx(metrics["perplexity"].get<double>()).epsilon(1e-10));

  // Rerunning the same grid reuses the recorded cells, timings included.
  const std::string before = slurp(dir / "g/grid.csv");
  REQUIRE(run(with({"grid"}, {"--grid-alpha", "0.2", "--grid-eta", "0.1", "--out", dir / "g"})) == 0);
  CHECK(slurp(dir / "g/grid.csv") == before);
}

TEST_CASE("grid table covers every cell") {
  TempDir dir;
  const std::string docword = write_corpus(dir, 50);
  REQUIRE(run({"grid", "--docword", docword, "--algo", "cvb0,map", "--topics", "2", "--iters", "8",
               "--grid-alpha", "0.1,0.5", "--grid-eta", "0.1,0.5,1", "--out", dir / "g"}) == 0);
  std::ifstream in(dir / "g/grid.csv");
  std::string line;
  int rows = 0;
  std::getline(in, line);
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 12);
  CHECK(slurp(dir / "g/grid.csv").find("map,map,1.1,1.5") != std::string::npos);
}

TEST_CASE("bench writes a timing table") {
  TempDir dir;
  const std::string docword = write_corpus(dir, 50);
  REQUIRE(run({"bench", "--docword", docword, "--algo", "cvb0,cgs", "--topics", "2", "--iters", "6",
               "--threshold", "1e9", "--runs", "1", "--out", dir / "b"}) == 0);
  const std::string table = slurp(dir / "b/bench.csv");
  CHECK(table.find("cvb0,1000000000,false") != std::string::npos);
  CHECK(table.find("cgs,") != std::string::npos);
  CHECK(run({"bench", "--docword", docword, "--out", dir / "b2"}) == kExitConfig);
}

TEST_CASE("oracle-check") {
  TempDir dir;
  CHECK(run({"oracle-check", "--oracle-instances", "3", "--oracle-sweeps", "100000", "--out", dir / "o"}) == 0);
  const auto report = nlohmann::json::parse(slurp(dir / "o/oracle.json"));
  CHECK(report["pass"] == true);
}

TEST_CASE("command line errors") {
  CHECK(run({}) != 0);
  CHECK(run({"train", "--algo", "lsi"}) != 0);
  CHECK(run({"train", "--docword", "/nonexistent/file"}) != 0);
}
