#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "elbert/config.hpp"
#include "elbert/types.hpp"

namespace elbert {

/// All trainable weights. One encoder block is stored once and reused at
/// every depth, so the count of every array below is independent of
/// ModelConfig::depth; only exit_t (depth-1 scalars) grows with it.
struct Parameters {
  Mat tok_embed;   // vocab_size x embed_dim
  Mat embed_proj;  // embed_dim x hidden_dim
  Mat pos_embed;   // max_seq_len x hidden_dim

  Mat attn_wq, attn_wk, attn_wv, attn_wo;  // hidden x hidden
  Vec attn_bq, attn_bk, attn_bv, attn_bo;  // hidden
  Vec ln1_gamma, ln1_beta;                 // hidden
  Mat ffn_w1;                              // hidden x ffn
  Vec ffn_b1;                              // ffn
  Mat ffn_w2;                              // ffn x hidden
  Vec ffn_b2;                              // hidden
  Vec ln2_gamma, ln2_beta;                 // hidden

  Mat cls_w;  // hidden x num_classes
  Vec cls_b;  // num_classes

  Vec exit_t;  // depth-1 trainable per-layer loss-weight variables
};

/// Random initialization: weights ~ N(0, 0.02), biases and LN betas 0,
/// LN gammas 1, every exit_t entry = t_init.
Parameters init_parameters(const ModelConfig& cfg, uint64_t seed, double t_init = 4.0);

/// Same shapes as `like`, all zeros. Used for gradients and moments.
Parameters zeros_like(const Parameters& like);

struct ArrayRef {
  std::string name;
  double* data;
  std::int64_t size;
};

/// Flat views over every array in checkpoint order. The order is part of
/// the checkpoint contract (see docs/formats.md).
std::vector<ArrayRef> parameter_arrays(Parameters& p);
std::vector<ArrayRef> parameter_arrays(const Parameters& p);

/// Total scalar count, optionally excluding exit_t.
std::int64_t parameter_count(const Parameters& p, bool include_exit_t = true);

bool all_finite(const Parameters& p);

/// Single-file checkpoint: "ELBERT1" magic, key=value config lines, then
/// named little-endian float64 arrays.
void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg,
                     const Parameters& params);
std::pair<ModelConfig, Parameters> load_checkpoint(const std::filesystem::path& path);

/// Header and per-array byte sizes without materializing the weights.
struct CheckpointInfo {
  ModelConfig cfg;
  std::vector<std::pair<std::string, std::uint64_t>> array_bytes;
};
CheckpointInfo inspect_checkpoint(const std::filesystem::path& path);

}  // namespace elbert
