#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "elbert/exit_policy.hpp"
#include "elbert/model.hpp"
#include "elbert/types.hpp"

namespace elbert {

/// Per-layer cumulative [cls] attention: at layer i, the running mean over
/// layers 1..i of the head-averaged [cls]-query rows. Each vector is a
/// convex combination of row-stochastic rows, so it sums to 1.
struct AttentionProfile {
  std::vector<std::string> tokens;
  std::vector<std::vector<double>> cumulative;  // layer 1..k, each seq_len long
  std::vector<int> predicted_labels;            // per executed layer
  ExitDecision exit;
};

/// `tokens` may be empty, in which case ids render as "#<id>".
AttentionProfile cumulative_attention(const LayerTrace& trace,
                                      const ExitDecision& decision,
                                      std::vector<std::string> tokens = {});

/// JSON: {tokens, layers:[{index, scores, predicted_label}], exit:{layer, reason}}.
void export_profile(const AttentionProfile& profile, const std::filesystem::path& path);
AttentionProfile import_profile(const std::filesystem::path& path);

/// Static per-layer bar charts of the cumulative scores.
void render_profile_svg(const AttentionProfile& profile, const std::filesystem::path& path);

}  // namespace elbert
