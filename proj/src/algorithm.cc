// Apache License, Version 2.0, refer to LICENSE.txt

#include "topika/algorithm.hh"

#include <array>
#include <utility>

namespace topika {

namespace {

constexpr std::array<std::pair<Algorithm, std::string_view>, 7> kAlgorithmNames{{
    {Algorithm::kML, "ml"},
    {Algorithm::kMAP, "map"},
    {Algorithm::kVB, "vb"},
    {Algorithm::kCVB, "cvb"},
    {Algorithm::kCVB0, "cvb0"},
    {Algorithm::kCGS, "cgs"},
    {Algorithm::kParallelCVB0, "pcvb0"},
}};

constexpr std::array<std::pair<Estimator, std::string_view>, 3> kEstimatorNames{{
    {Estimator::kCollapsed, "collapsed"},
    {Estimator::kMap, "map"},
    {Estimator::kVbAlternative, "vb_alternative"},
}};

}  // namespace

std::string_view to_string(Algorithm a) {
  for (auto [alg, name] : kAlgorithmNames) {
    if (alg == a) return name;
  }
  return "?";
}

Algorithm parse_algorithm(std::string_view name) {
  for (auto [alg, n] : kAlgorithmNames) {
    if (n == name) return alg;
  }
  throw ConfigError("unknown algorithm '" + std::string(name) +
                    "' (expected ml, map, vb, cvb, cvb0, cgs or pcvb0)");
}

std::string_view to_string(Estimator e) {
  for (auto [est, name] : kEstimatorNames) {
    if (est == e) return name;
  }
  return "?";
}

Estimator parse_estimator(std::string_view name) {
  for (auto [est, n] : kEstimatorNames) {
    if (n == name) return est;
  }
  throw ConfigError("unknown estimator '" + std::string(name) + "'");
}

}  // namespace topika
