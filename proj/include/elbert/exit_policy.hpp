#pragma once

#include <string>
#include <vector>

#include "elbert/error.hpp"
#include "elbert/types.hpp"

namespace elbert {

/// Second-stage window criteria, in their canonical order:
/// 1) the newest prediction's class probability moves monotonically,
/// 2) the range of per-layer max probabilities stays below epsilon,
/// 3) the argmax label never changes.
enum class Stage2Criterion { kMonotoneProb, kMaxRange, kStableLabel };

enum class ExitReason {
  kStage1,
  kStage2MonotoneProb,
  kStage2MaxRange,
  kStage2StableLabel,
  kExhausted,
};

std::string to_string(Stage2Criterion c);
std::string to_string(ExitReason r);
Stage2Criterion criterion_from_string(const std::string& s);
ExitReason exit_reason_from_string(const std::string& s);

struct ExitConfig {
  double delta = 0.5;       // first-stage puzzlement threshold in [0, 1]
  int window_size = 8;      // N
  Stage2Criterion criterion = Stage2Criterion::kMonotoneProb;
  double range_epsilon = 0.05;
  bool stage1_enabled = true;
  bool stage2_enabled = true;

  void validate() const {
    if (!(delta >= 0.0 && delta <= 1.0)) throw ConfigError("delta must lie in [0, 1]");
    if (stage2_enabled && window_size < 2) {
      throw ConfigError("window_size must be >= 2 when stage 2 is enabled");
    }
    if (window_size < 1) throw ConfigError("window_size must be positive");
    if (!(range_epsilon > 0.0)) throw ConfigError("range_epsilon must be > 0");
  }
};

/// Where (and why) an input left the encoder loop. fired=false only with
/// kExhausted: all layers ran and no criterion triggered.
struct ExitDecision {
  bool fired = false;
  int layer = 0;
  ExitReason reason = ExitReason::kExhausted;
};

/// Ring buffer over the most recent N distributions with their argmax
/// labels. Layer indices must arrive consecutively.
class ConfidenceWindow {
 public:
  explicit ConfidenceWindow(int capacity);

  void push(const ProbDist& p);
  bool full() const { return size_ == capacity_; }
  int size() const { return size_; }
  int capacity() const { return capacity_; }

  /// i = 0 is the oldest retained entry, i = size()-1 the newest.
  const ProbDist& dist_at(int i) const;
  int label_at(int i) const;

 private:
  struct Entry {
    ProbDist dist;
    int label = 0;
  };
  int index(int i) const { return (head_ + i) % capacity_; }

  std::vector<Entry> buf_;
  int capacity_;
  int head_ = 0;  // position of the oldest entry
  int size_ = 0;
  int last_layer_ = 0;
};

/// Normalized entropy of p, in [0, 1]: 1 for uniform, 0 for one-hot.
/// Invariant to the logarithm base and to permutations of the entries.
/// The 0*log(0) terms are taken as 0.
double puzzlement(const ProbDist& p);

/// True iff puzzlement(p) < delta (strict).
bool stage1_check(const ProbDist& p, const ExitConfig& cfg);

/// Evaluates the configured criterion over exactly the last N entries.
/// Always false until the window holds N observations.
bool stage2_check(const ConfidenceWindow& w, const ExitConfig& cfg);

/// Consumes one distribution per encoder pass and reports the first firing
/// decision. Stage 1 takes precedence; stage 2 is consulted only when
/// stage 1 does not fire. One engine instance serves one input stream.
class ExitEngine {
 public:
  explicit ExitEngine(const ExitConfig& cfg);

  /// Distributions must arrive with layer indices 1, 2, ... and observing
  /// after a fired decision is a usage error.
  ExitDecision observe(const ProbDist& p);

  bool fired() const { return fired_; }
  int layers_seen() const { return last_layer_; }

 private:
  ExitConfig cfg_;
  ConfidenceWindow window_;
  int last_layer_ = 0;
  bool fired_ = false;
};

}  // namespace elbert
