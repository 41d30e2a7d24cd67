// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace topika {

enum class Algorithm { kML, kMAP, kVB, kCVB, kCVB0, kCGS, kParallelCVB0 };

// Point-estimate formula used for prediction.
enum class Estimator { kCollapsed, kMap, kVbAlternative };

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// CLI spellings: ml, map, vb, cvb, cvb0, cgs, pcvb0.
std::string_view to_string(Algorithm a);
Algorithm parse_algorithm(std::string_view name);

std::string_view to_string(Estimator e);
Estimator parse_estimator(std::string_view name);

inline bool is_batch(Algorithm a) {
  return a == Algorithm::kML || a == Algorithm::kMAP || a == Algorithm::kVB;
}
inline bool is_collapsed(Algorithm a) { return !is_batch(a); }

// Estimator used for prediction unless overridden (VB may also use kVbAlternative).
inline Estimator default_estimator(Algorithm a) {
  return a == Algorithm::kMAP ? Estimator::kMap : Estimator::kCollapsed;
}

}  // namespace topika
