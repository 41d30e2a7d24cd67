// Apache License, Version 2.0, refer to LICENSE.txt

#include "topika/model_io.hh"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

namespace topika {

Hyperparams ModelDump::hyperparams() const {
  Hyperparams h;
  h.alpha = alpha;
  h.eta = eta;
  return h;
}

std::optional<CountMatrices> ModelDump::counts() const {
  if (!word_topic_counts) return std::nullopt;
  CountMatrices cm = CountMatrices::zeros(W, K, 0);
  cm.n_wk = *word_topic_counts;
  cm.refresh_totals();
  return cm;
}

ModelDump make_dump(const CountMatrices& counts, const Hyperparams& h, Algorithm algorithm,
                    Estimator estimator, std::size_t iterations, std::uint64_t seed) {
  const TopicEstimates est = estimate(estimator, counts, h);
  ModelDump m;
  m.W = counts.W;
  m.K = counts.K;
  m.D = counts.D;
  m.alpha = h.alpha;
  m.eta = h.eta;
  m.estimator = estimator;
  m.algorithm = algorithm;
  m.iterations = iterations;
  m.seed = seed;
  m.phi = est.phi;
  m.theta = est.theta;
  m.word_topic_counts = counts.n_wk;
  return m;
}

namespace {

void write_rows(std::ostream& out, const Matrix& m, bool transpose) {
  const std::size_t rows = transpose ? m.cols() : m.rows();
  const std::size_t cols = transpose ? m.rows() : m.cols();
  std::string line;
  for (std::size_t r = 0; r < rows; ++r) {
    line.clear();
    for (std::size_t c = 0; c < cols; ++c) {
      if (c) line += ' ';
      fmt::format_to(std::back_inserter(line), "{}", transpose ? m(c, r) : m(r, c));
    }
    line += '\n';
    out << line;
  }
}

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::string next_line() {
    std::string line;
    if (!std::getline(in_, line)) fail("unexpected end of model dump");
    ++line_no_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  }

  std::string field(const std::string& key) {
    const std::string line = next_line();
    if (line.rfind(key + ' ', 0) != 0) fail("expected '" + key + " <value>'");
    return line.substr(key.size() + 1);
  }

  template <typename T>
  T number(const std::string& key) {
    const std::string text = field(key);
    T value{};
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size()) fail("bad value for " + key);
    return value;
  }

  void expect(const std::string& tag) {
    if (next_line() != tag) fail("expected section '" + tag + "'");
  }

  void rows(Matrix& m, std::size_t rows, std::size_t cols, bool transpose) {
    for (std::size_t r = 0; r < rows; ++r) {
      const std::string line = next_line();
      const char* p = line.data();
      const char* end = p + line.size();
      for (std::size_t c = 0; c < cols; ++c) {
        while (p < end && *p == ' ') ++p;
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(p, end, v);
        if (ec != std::errc()) fail("expected " + std::to_string(cols) + " numbers");
        (transpose ? m(c, r) : m(r, c)) = v;
        p = ptr;
      }
      while (p < end && *p == ' ') ++p;
      if (p != end) fail("trailing data after " + std::to_string(cols) + " numbers");
    }
  }

  bool at_end() {
    std::string line;
    while (in_.peek() != std::char_traits<char>::eof()) {
      std::getline(in_, line);
      ++line_no_;
      if (line.find_first_not_of(" \t\r") != std::string::npos) {
        pending_ = line;
        return false;
      }
    }
    return true;
  }

  const std::string& pending() const { return pending_; }

  [[noreturn]] void fail(const std::string& what) const {
    throw std::runtime_error("model dump line " + std::to_string(line_no_) + ": " + what);
  }

 private:
  std::istream& in_;
  std::size_t line_no_ = 0;
  std::string pending_;
};

}  // namespace

void write_model(std::ostream& out, const ModelDump& m) {
  out << "topika-model 1\n";
  out << "W " << m.W << "\nK " << m.K << "\nD " << m.D << '\n';
  out << fmt::format("alpha {}\neta {}\n", m.alpha, m.eta);
  out << "estimator " << to_string(m.estimator) << '\n';
  out << "algorithm " << to_string(m.algorithm) << '\n';
  out << "iterations " << m.iterations << "\nseed " << m.seed << '\n';
  out << "phi\n";
  write_rows(out, m.phi, false);
  out << "theta\n";
  write_rows(out, m.theta, true);
  if (m.word_topic_counts) {
    out << "word_topic_counts\n";
    write_rows(out, *m.word_topic_counts, false);
  }
}

void write_model(const std::filesystem::path& path, const ModelDump& model) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_model(out, model);
  out.flush();
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

ModelDump read_model(std::istream& in) {
  Reader r(in);
  if (r.next_line() != "topika-model 1") r.fail("not a topika model dump");
  ModelDump m;
  m.W = r.number<std::size_t>("W");
  m.K = r.number<std::size_t>("K");
  m.D = r.number<std::size_t>("D");
  m.alpha = r.number<double>("alpha");
  m.eta = r.number<double>("eta");
  try {
    m.estimator = parse_estimator(r.field("estimator"));
    m.algorithm = parse_algorithm(r.field("algorithm"));
  } catch (const ConfigError& ex) {
    r.fail(ex.what());
  }
  m.iterations = r.number<std::size_t>("iterations");
  m.seed = r.number<std::uint64_t>("seed");
  if (m.W == 0 || m.K == 0) r.fail("W and K must be positive");
  r.expect("phi");
  m.phi = Matrix(m.W, m.K);
  r.rows(m.phi, m.W, m.K, false);
  r.expect("theta");
  m.theta = Matrix(m.D, m.K);
  r.rows(m.theta, m.K, m.D, true);
  if (!r.at_end()) {
    if (r.pending() != "word_topic_counts") r.fail("unexpected section '" + r.pending() + "'");
    Matrix counts(m.W, m.K);
    r.rows(counts, m.W, m.K, false);
    m.word_topic_counts = std::move(counts);
  }
  return m;
}

ModelDump read_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model dump " + path.string());
  return read_model(in);
}

void write_top_words(std::ostream& out, const Matrix& phi, const std::vector<std::string>& vocab,
                     std::size_t M) {
  out << "topic,rank,word,probability\n";
  std::vector<std::size_t> order(phi.rows());
  for (std::size_t k = 0; k < phi.cols(); ++k) {
    std::iota(order.begin(), order.end(), 0);
    const std::size_t m = std::min(M, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m), order.end(),
                      [&](auto a, auto b) { return phi(a, k) > phi(b, k) || (phi(a, k) == phi(b, k) && a < b); });
    for (std::size_t r = 0; r < m; ++r) {
      const std::size_t w = order[r];
      out << k << ',' << r + 1 << ',' << (vocab.empty() ? std::to_string(w) : vocab[w]) << ','
          << fmt::format("{}", phi(w, k)) << '\n';
    }
  }
}

}  // namespace topika
