// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "topika/algorithm.hh"
#include "topika/matrix.hh"
#include "topika/model_state.hh"

namespace topika {

// Text dump of a trained model:
//
//   topika-model 1
//   W <W>
//   ...                      (K, D, alpha, eta, estimator, algorithm, iterations, seed)
//   phi                      W lines of K values
//   theta                    K lines of D values
//   word_topic_counts        optional, W lines of K values
//
// Values are written in shortest round-trip form, so reading a dump back gives
// bit-identical matrices.
struct ModelDump {
  std::size_t W = 0;
  std::size_t K = 0;
  std::size_t D = 0;
  double alpha = 0.0;
  double eta = 0.0;
  Estimator estimator = Estimator::kCollapsed;
  Algorithm algorithm = Algorithm::kCVB0;
  std::size_t iterations = 0;
  std::uint64_t seed = 0;
  Matrix phi;    // W x K
  Matrix theta;  // D x K in memory, written as K x D
  std::optional<Matrix> word_topic_counts;  // W x K

  Hyperparams hyperparams() const;
  // Training counts with n_wk and n_k filled in (document side empty), for
  // fold-in. nullopt when the dump carries no counts.
  std::optional<CountMatrices> counts() const;
};

ModelDump make_dump(const CountMatrices& counts, const Hyperparams& h, Algorithm algorithm,
                    Estimator estimator, std::size_t iterations, std::uint64_t seed);

void write_model(std::ostream& out, const ModelDump& model);
void write_model(const std::filesystem::path& path, const ModelDump& model);
// Throws std::runtime_error naming the offending line on malformed input.
ModelDump read_model(std::istream& in);
ModelDump read_model(const std::filesystem::path& path);

// CSV with columns topic, rank, word, probability; the M most probable words
// of each topic. Word ids are used when `vocab` is empty.
void write_top_words(std::ostream& out, const Matrix& phi, const std::vector<std::string>& vocab,
                     std::size_t M);

}  // namespace topika
