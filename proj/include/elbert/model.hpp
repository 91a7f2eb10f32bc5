#pragma once

#include <span>
#include <vector>

#include "elbert/config.hpp"
#include "elbert/exit_policy.hpp"
#include "elbert/parameters.hpp"
#include "elbert/types.hpp"

namespace elbert {

/// Per-token activations after `layer` encoder passes (0 = embedding output).
struct HiddenState {
  Mat x;  // seq_len x hidden_dim
  int layer = 0;
};

/// One layer's attention: per head a row-stochastic seq_len x seq_len matrix
/// (rows are query positions).
using AttentionTensor = std::vector<Mat>;

/// Everything recorded while an input flows through the executed layers.
struct LayerTrace {
  std::vector<int> token_ids;
  std::vector<ProbDist> dists;         // layers 1..k
  std::vector<AttentionTensor> attns;  // layers 1..k

  int executed_layers() const { return static_cast<int>(dists.size()); }
};

/// Forward intermediates of one shared-block application, retained for
/// backpropagation.
struct EncoderCache {
  Mat h_in;
  Mat q, k, v;            // seq x hidden, after bias
  AttentionTensor attn;   // per head seq x seq, post softmax
  Mat ctx;                // concatenated head outputs
  Mat res1;               // h_in + attention output (layer-norm 1 input)
  Mat ln1_xhat;
  Vec ln1_invstd;
  Mat u;                  // layer-norm 1 output
  Mat ffn_pre;            // seq x ffn
  Mat ffn_act;            // gelu(ffn_pre)
  Mat res2;               // u + ffn output (layer-norm 2 input)
  Mat ln2_xhat;
  Vec ln2_invstd;
  Mat h_out;
};

/// Token lookup -> factorized projection -> learned positional add.
/// Position 0 is expected to carry the [cls] id.
HiddenState embed(std::span<const int> token_ids, const Parameters& params,
                  const ModelConfig& cfg);

/// One application of the shared encoder block. Every call uses the same
/// parameter set regardless of h.layer.
std::pair<HiddenState, AttentionTensor> encoder_step(const HiddenState& h,
                                                     const Parameters& params,
                                                     const ModelConfig& cfg);

/// Shared-block forward used by both inference and training. When `cache`
/// is non-null all intermediates are retained.
Mat encoder_forward(const Mat& h_in, const Parameters& params,
                    const ModelConfig& cfg, EncoderCache* cache,
                    AttentionTensor* attn_out);

/// Softmax classifier over the position-0 ([cls]) representation.
ProbDist classify(const HiddenState& h, const Parameters& params);

/// Classifier logits alongside the distribution (training needs both).
struct ClassifierOutput {
  Vec logits;
  ProbDist dist;
};
ClassifierOutput classify_detail(const Mat& h, int layer, const Parameters& params);

/// Runs all depth layers, classifying after each pass.
LayerTrace forward_full(std::span<const int> token_ids, const Parameters& params,
                        const ModelConfig& cfg);

struct AdaptiveResult {
  int predicted_label = 0;
  ExitDecision decision;
  LayerTrace trace;  // exactly decision.layer entries
};

/// Runs encoder passes one at a time, consulting the exit engine after each
/// classification; stops at the first firing decision.
AdaptiveResult forward_adaptive(std::span<const int> token_ids,
                                const Parameters& params, const ModelConfig& cfg,
                                const ExitConfig& exit_cfg);

/// Analytic multiply-accumulate counts at the configured sequence length.
struct FlopsEstimate {
  double encoder_pass_macs = 0.0;
  double classifier_macs = 0.0;
  double classifier_ratio() const { return classifier_macs / encoder_pass_macs; }
};
FlopsEstimate flops_estimate(const ModelConfig& cfg);

}  // namespace elbert
