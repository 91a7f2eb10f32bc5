#pragma once

#include <cstdint>

#include "elbert/error.hpp"

namespace elbert {

/// Hyperparameters of the parameter-shared encoder. `depth` controls how
/// many times the single shared block is applied; it does not change the
/// weight count.
struct ModelConfig {
  int depth = 6;         // encoder applications M
  int hidden_dim = 64;   // d
  int num_heads = 4;
  int ffn_dim = 256;
  int vocab_size = 80;
  int max_seq_len = 24;
  int num_classes = 2;   // C
  int embed_dim = 32;    // factorized embedding width; set equal to hidden_dim to disable

  int head_dim() const { return hidden_dim / num_heads; }

  void validate() const {
    if (depth < 1) throw ConfigError("depth must be >= 1");
    if (hidden_dim < 1) throw ConfigError("hidden_dim must be positive");
    if (num_heads < 1 || hidden_dim % num_heads != 0) {
      throw ConfigError("num_heads must be positive and divide hidden_dim");
    }
    if (ffn_dim < 1) throw ConfigError("ffn_dim must be positive");
    if (vocab_size < 4) throw ConfigError("vocab_size must cover the reserved ids");
    if (max_seq_len < 2) throw ConfigError("max_seq_len must be >= 2");
    if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
    if (embed_dim < 1) throw ConfigError("embed_dim must be positive");
  }
};

}  // namespace elbert
