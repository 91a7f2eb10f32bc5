#include "elbert/exit_policy.hpp"

#include <cmath>

namespace elbert {

std::string to_string(Stage2Criterion c) {
  switch (c) {
    case Stage2Criterion::kMonotoneProb: return "monotone";
    case Stage2Criterion::kMaxRange: return "max-range";
    case Stage2Criterion::kStableLabel: return "stable-label";
  }
  return "?";
}

std::string to_string(ExitReason r) {
  switch (r) {
    case ExitReason::kStage1: return "stage1";
    case ExitReason::kStage2MonotoneProb: return "stage2-monotone";
    case ExitReason::kStage2MaxRange: return "stage2-max-range";
    case ExitReason::kStage2StableLabel: return "stage2-stable-label";
    case ExitReason::kExhausted: return "exhausted";
  }
  return "?";
}

Stage2Criterion criterion_from_string(const std::string& s) {
  if (s == "monotone") return Stage2Criterion::kMonotoneProb;
  if (s == "max-range") return Stage2Criterion::kMaxRange;
  if (s == "stable-label") return Stage2Criterion::kStableLabel;
  throw ConfigError("unknown criterion: " + s +
                    " (expected monotone | max-range | stable-label)");
}

ExitReason exit_reason_from_string(const std::string& s) {
  if (s == "stage1") return ExitReason::kStage1;
  if (s == "stage2-monotone") return ExitReason::kStage2MonotoneProb;
  if (s == "stage2-max-range") return ExitReason::kStage2MaxRange;
  if (s == "stage2-stable-label") return ExitReason::kStage2StableLabel;
  if (s == "exhausted") return ExitReason::kExhausted;
  throw ConfigError("unknown exit reason: " + s);
}

ConfidenceWindow::ConfidenceWindow(int capacity) : capacity_(capacity) {
  if (capacity < 1) throw ConfigError("window capacity must be positive");
  buf_.resize(capacity);
}

void ConfidenceWindow::push(const ProbDist& p) {
  if (size_ > 0 && p.layer != last_layer_ + 1) {
    throw UsageError("window expects consecutive layer indices, got " +
                     std::to_string(p.layer) + " after " +
                     std::to_string(last_layer_));
  }
  Entry e{p, p.predicted_label()};
  if (size_ < capacity_) {
    buf_[index(size_)] = std::move(e);
    ++size_;
  } else {
    buf_[head_] = std::move(e);
    head_ = (head_ + 1) % capacity_;
  }
  last_layer_ = p.layer;
}

const ProbDist& ConfidenceWindow::dist_at(int i) const {
  if (i < 0 || i >= size_) throw UsageError("window index out of range");
  return buf_[index(i)].dist;
}

int ConfidenceWindow::label_at(int i) const {
  if (i < 0 || i >= size_) throw UsageError("window index out of range");
  return buf_[index(i)].label;
}

namespace {

inline double plogp(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

}  // namespace

double puzzlement(const ProbDist& p) {
  validate_prob_dist(p);
  const int c = p.num_classes();
  const double u = 1.0 / static_cast<double>(c);
  double num = 0.0;
  double den = 0.0;
  // The denominator accumulates the uniform distribution through the same
  // operations as the numerator, so a uniform input yields exactly 1.0.
  for (int j = 0; j < c; ++j) {
    num += plogp(p.probs[j]);
    den += plogp(u);
  }
  return num / den + 0.0;  // normalize -0.0 from one-hot inputs
}

bool stage1_check(const ProbDist& p, const ExitConfig& cfg) {
  return puzzlement(p) < cfg.delta;
}

namespace {

bool monotone_prob(const ConfidenceWindow& w) {
  const int n = w.size();
  const int cls = w.label_at(n - 1);
  bool non_decreasing = true;
  bool non_increasing = true;
  for (int i = 1; i < n; ++i) {
    const double prev = w.dist_at(i - 1).probs[cls];
    const double cur = w.dist_at(i).probs[cls];
    if (cur < prev) non_decreasing = false;
    if (cur > prev) non_increasing = false;
  }
  return non_decreasing || non_increasing;
}

bool max_range(const ConfidenceWindow& w, double epsilon) {
  double lo = 1.0;
  double hi = 0.0;
  for (int i = 0; i < w.size(); ++i) {
    const auto& probs = w.dist_at(i).probs;
    double m = probs[argmax(probs)];
    lo = std::min(lo, m);
    hi = std::max(hi, m);
  }
  return (hi - lo) < epsilon;
}

bool stable_label(const ConfidenceWindow& w) {
  const int first = w.label_at(0);
  for (int i = 1; i < w.size(); ++i) {
    if (w.label_at(i) != first) return false;
  }
  return true;
}

}  // namespace

bool stage2_check(const ConfidenceWindow& w, const ExitConfig& cfg) {
  if (w.size() < cfg.window_size) return false;
  switch (cfg.criterion) {
    case Stage2Criterion::kMonotoneProb: return monotone_prob(w);
    case Stage2Criterion::kMaxRange: return max_range(w, cfg.range_epsilon);
    case Stage2Criterion::kStableLabel: return stable_label(w);
  }
  return false;
}

namespace {

ExitReason stage2_reason(Stage2Criterion c) {
  switch (c) {
    case Stage2Criterion::kMonotoneProb: return ExitReason::kStage2MonotoneProb;
    case Stage2Criterion::kMaxRange: return ExitReason::kStage2MaxRange;
    case Stage2Criterion::kStableLabel: return ExitReason::kStage2StableLabel;
  }
  return ExitReason::kExhausted;
}

}  // namespace

ExitEngine::ExitEngine(const ExitConfig& cfg) : cfg_(cfg), window_(cfg.window_size) {
  cfg_.validate();
}

ExitDecision ExitEngine::observe(const ProbDist& p) {
  if (fired_) throw UsageError("observe() after the exit decision fired");
  if (p.layer != last_layer_ + 1) {
    throw UsageError("out-of-order layer index " + std::to_string(p.layer) +
                     " (expected " + std::to_string(last_layer_ + 1) + ")");
  }
  validate_prob_dist(p);
  last_layer_ = p.layer;
  window_.push(p);

  if (cfg_.stage1_enabled && stage1_check(p, cfg_)) {
    fired_ = true;
    return {true, p.layer, ExitReason::kStage1};
  }
  if (cfg_.stage2_enabled && stage2_check(window_, cfg_)) {
    fired_ = true;
    return {true, p.layer, stage2_reason(cfg_.criterion)};
  }
  return {false, p.layer, ExitReason::kExhausted};
}

}  // namespace elbert
