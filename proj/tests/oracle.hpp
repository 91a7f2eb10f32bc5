#pragma once

// Straight-line reference simulator for the two-stage exit mechanism,
// written independently of the engine: no ring buffer, no early state;
// every step re-derives stage-2 from the full prefix of distributions.

#include <cmath>
#include <vector>

#include "elbert/exit_policy.hpp"
#include "elbert/rng.hpp"
#include "elbert/types.hpp"

namespace oracle {

struct Exit {
  bool fired = false;
  int layer = 0;
  elbert::ExitReason reason = elbert::ExitReason::kExhausted;
};

inline double normalized_entropy(const std::vector<double>& p) {
  double num = 0.0;
  for (double x : p) {
    if (x > 0.0) num += x * std::log(x);
  }
  double den = 0.0;
  const double u = 1.0 / static_cast<double>(p.size());
  for (size_t j = 0; j < p.size(); ++j) den += u * std::log(u);
  return num / den;
}

inline int argmax_of(const std::vector<double>& p) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(p.size()); ++i) {
    if (p[i] > p[best]) best = i;
  }
  return best;
}

// Decides the exit for a stream of per-layer distributions (layer 1..k).
inline Exit simulate(const std::vector<std::vector<double>>& stream,
                     const elbert::ExitConfig& cfg) {
  const int n = static_cast<int>(stream.size());
  for (int i = 0; i < n; ++i) {
    if (cfg.stage1_enabled && normalized_entropy(stream[i]) < cfg.delta) {
      return {true, i + 1, elbert::ExitReason::kStage1};
    }
    if (!cfg.stage2_enabled) continue;
    const int w = cfg.window_size;
    if (i + 1 < w) continue;
    // window = distributions for layers i-w+2 .. i+1
    bool fire = false;
    elbert::ExitReason reason = elbert::ExitReason::kExhausted;
    switch (cfg.criterion) {
      case elbert::Stage2Criterion::kMonotoneProb: {
        const int cls = argmax_of(stream[i]);
        bool up = true, down = true;
        for (int j = i - w + 2; j <= i; ++j) {
          if (stream[j][cls] < stream[j - 1][cls]) up = false;
          if (stream[j][cls] > stream[j - 1][cls]) down = false;
        }
        fire = up || down;
        reason = elbert::ExitReason::kStage2MonotoneProb;
        break;
      }
      case elbert::Stage2Criterion::kMaxRange: {
        double lo = 2.0, hi = -1.0;
        for (int j = i - w + 1; j <= i; ++j) {
          const double m = stream[j][argmax_of(stream[j])];
          if (m < lo) lo = m;
          if (m > hi) hi = m;
        }
        fire = (hi - lo) < cfg.range_epsilon;
        reason = elbert::ExitReason::kStage2MaxRange;
        break;
      }
      case elbert::Stage2Criterion::kStableLabel: {
        bool same = true;
        const int first = argmax_of(stream[i - w + 1]);
        for (int j = i - w + 2; j <= i; ++j) {
          if (argmax_of(stream[j]) != first) same = false;
        }
        fire = same;
        reason = elbert::ExitReason::kStage2StableLabel;
        break;
      }
    }
    if (fire) return {true, i + 1, reason};
  }
  return {false, n, elbert::ExitReason::kExhausted};
}

// Random distribution over `classes` entries; occasionally near one-hot or
// near-uniform so threshold edges get exercised.
inline std::vector<double> random_dist(elbert::Rng& rng, int classes) {
  std::vector<double> p(classes);
  const double mode = rng.uniform();
  if (mode < 0.15) {
    // near one-hot
    const int hot = static_cast<int>(rng.below(classes));
    double rest = 1e-6 * rng.uniform();
    for (int i = 0; i < classes; ++i) p[i] = rest / classes;
    p[hot] += 1.0 - rest;
  } else if (mode < 0.3) {
    // near uniform
    double sum = 0.0;
    for (auto& x : p) sum += (x = 1.0 + 1e-3 * rng.uniform());
    for (auto& x : p) x /= sum;
  } else {
    double sum = 0.0;
    for (auto& x : p) sum += (x = rng.uniform() + 1e-9);
    for (auto& x : p) x /= sum;
  }
  return p;
}

inline elbert::ExitConfig random_config(elbert::Rng& rng) {
  elbert::ExitConfig cfg;
  cfg.delta = rng.uniform();
  cfg.window_size = 2 + static_cast<int>(rng.below(7));
  switch (rng.below(3)) {
    case 0: cfg.criterion = elbert::Stage2Criterion::kMonotoneProb; break;
    case 1: cfg.criterion = elbert::Stage2Criterion::kMaxRange; break;
    default: cfg.criterion = elbert::Stage2Criterion::kStableLabel; break;
  }
  cfg.range_epsilon = 0.01 + 0.2 * rng.uniform();
  cfg.stage1_enabled = rng.below(4) != 0;
  cfg.stage2_enabled = rng.below(4) != 0;
  return cfg;
}

}  // namespace oracle
