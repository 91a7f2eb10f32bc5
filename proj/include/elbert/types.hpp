#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <span>
#include <vector>

#include "elbert/error.hpp"

namespace elbert {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

/// Index of the largest entry; ties resolve to the lowest index.
inline int argmax(std::span<const double> v) {
  if (v.empty()) throw InputError("argmax of empty vector");
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

/// A classifier output distribution over C classes, tagged with the
/// encoder pass (1-based layer index) that produced it.
struct ProbDist {
  std::vector<double> probs;
  int layer = 0;

  int num_classes() const { return static_cast<int>(probs.size()); }
  int predicted_label() const { return argmax(probs); }
};

/// Entries in [0,1] and summing to 1 within 1e-6.
inline bool is_valid_prob_dist(const ProbDist& p) {
  if (p.probs.size() < 2) return false;
  double sum = 0.0;
  for (double x : p.probs) {
    if (!(x >= 0.0 && x <= 1.0)) return false;
    sum += x;
  }
  return std::abs(sum - 1.0) <= 1e-6;
}

inline void validate_prob_dist(const ProbDist& p) {
  if (!is_valid_prob_dist(p)) {
    throw InputError("invalid probability distribution (entries must lie in [0,1] and sum to 1)");
  }
}

}  // namespace elbert
