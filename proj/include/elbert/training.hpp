#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "elbert/config.hpp"
#include "elbert/model.hpp"
#include "elbert/parameters.hpp"
#include "elbert/types.hpp"

namespace elbert {

/// -log p(gold) is capped here when p(gold) underflows; the loss surface is
/// flat past the cap, so the capped tap contributes zero gradient.
inline constexpr double kLossCeiling = 50.0;

struct LossReport {
  std::vector<double> layer_losses;  // L_1..L_M
  std::vector<double> weights;       // w_1..w_M, summing to M
  double total = 0.0;                // sum of w_i * L_i
};

struct TrainConfig {
  double learning_rate = 1e-3;  // desk-scale default
  int batch_size = 32;
  int epochs = 10;
  std::uint64_t seed = 0;
  double t_init = 4.0;

  void validate() const {
    if (learning_rate < 0.0) throw ConfigError("learning_rate must be >= 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
  }
};

struct EncodedExample {
  std::vector<int> ids;
  int label = 0;
};

/// Cross-entropy against the gold class: -log p(gold), capped at
/// kLossCeiling.
double exit_loss(const ProbDist& p, int gold);

/// Per-layer loss weights from the trainable variables t_1..t_{M-1}:
/// w_i = sigmoid(t_i) for i < M and w_M = M - sum of the sigmoids, so the
/// weights always sum to M. w_M may go negative; no clamping is applied.
std::vector<double> layer_weights(std::span<const double> t, int depth);

/// Weighted total loss over a full-depth trace.
LossReport total_loss(const LayerTrace& trace, int gold, std::span<const double> t,
                      int depth);

/// Analytic gradients of the mean total loss over one batch, accumulated
/// into `grads` (same shapes as the parameters, including exit_t).
/// Returns the batch-mean LossReport.
LossReport batch_gradients(const Parameters& params, const ModelConfig& cfg,
                           std::span<const EncodedExample> batch, Parameters& grads);

/// Adam with bias correction; exit_t steps with the same rule and rate as
/// the model weights.
class AdamOptimizer {
 public:
  AdamOptimizer(const Parameters& like, double learning_rate, double beta1 = 0.9,
                double beta2 = 0.999, double epsilon = 1e-8);

  void step(Parameters& params, const Parameters& grads);
  std::int64_t steps() const { return steps_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::int64_t steps_ = 0;
  Parameters m_, v_;
};

struct EpochMetrics {
  int epoch = 0;                     // 1-based
  double mean_loss = 0.0;            // mean per-sample total loss
  std::vector<double> layer_losses;  // mean per-layer losses
  std::vector<double> weights;       // w vector at epoch end
};

struct TrainResult {
  Parameters params;
  std::vector<EpochMetrics> history;
};

/// Single-threaded mini-batch training; fully determined by (dataset order,
/// seed). Every sample always runs all depth layers.
TrainResult train(const std::vector<EncodedExample>& dataset, Parameters params,
                  const ModelConfig& cfg, const TrainConfig& tcfg);

/// One line per epoch: epoch, mean total loss, per-layer mean losses, w
/// vector; comma separated, with a leading header line.
std::string metrics_csv(const std::vector<EpochMetrics>& history, int depth);

/// Central finite-difference check of the analytic gradient on one sample.
/// Audits >= min_coords randomly chosen coordinates plus every exit_t entry
/// and returns the worst error |analytic - numeric| scaled by
/// max(|analytic|, |numeric|, 1e-4).
double gradient_audit(const Parameters& params, const ModelConfig& cfg,
                      const EncodedExample& sample, double h,
                      int min_coords = 200, std::uint64_t seed = 12345);

}  // namespace elbert
