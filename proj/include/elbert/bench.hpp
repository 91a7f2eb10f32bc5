#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "elbert/config.hpp"
#include "elbert/exit_policy.hpp"
#include "elbert/model.hpp"
#include "elbert/parameters.hpp"
#include "elbert/training.hpp"

namespace elbert {

/// One operating point of the accuracy-versus-computation curve.
struct CurvePoint {
  double delta = 0.0;
  double accuracy = 0.0;
  double mean_cost_ratio = 0.0;          // mean exit layer / depth
  std::vector<long> exit_histogram;      // counts per layer 1..depth
  std::string criterion;                 // stage-2 criterion label
};

struct SweepConfig {
  std::vector<double> delta_grid = default_delta_grid();
  ExitConfig exit_template;

  /// 0.0 plus 0.1..1.0 in steps of 0.1.
  static std::vector<double> default_delta_grid();
  void validate() const;
};

/// Adaptive inference over the dataset, one example at a time (inference
/// batch size is fixed at 1).
CurvePoint evaluate(const Parameters& params, const ModelConfig& cfg,
                    const std::vector<EncodedExample>& dataset,
                    const ExitConfig& exit_cfg);

/// One CurvePoint per grid delta; stage-2 settings come from the template.
std::vector<CurvePoint> sweep(const Parameters& params, const ModelConfig& cfg,
                              const std::vector<EncodedExample>& dataset,
                              const SweepConfig& sweep_cfg);

struct BaselinePoint {
  int depth = 0;
  double accuracy = 0.0;
  double cost_ratio = 0.0;  // depth / full depth
};

/// Fixed-depth truncated models: every input exits at exactly the given
/// depth, no criteria consulted.
std::vector<BaselinePoint> truncated_baseline(const Parameters& params,
                                              const ModelConfig& cfg,
                                              const std::vector<EncodedExample>& dataset,
                                              const std::vector<int>& depths);

enum class CurveFormat { kCsv, kJson };

/// CSV header: delta,accuracy,cost_ratio,exit_l1..exit_lM. JSON: array of
/// objects carrying the criterion label as well.
void export_curves(const std::vector<CurvePoint>& points,
                   const std::filesystem::path& path, CurveFormat format);
std::vector<CurvePoint> import_curves(const std::filesystem::path& path,
                                      CurveFormat format);

/// Per-delta medians across repeated runs (median accuracy and median cost
/// taken independently). All runs must share one delta grid.
struct MedianPoint {
  double delta = 0.0;
  double median_accuracy = 0.0;
  double median_cost_ratio = 0.0;
};
std::vector<MedianPoint> median_summary(const std::vector<std::vector<CurvePoint>>& runs);

}  // namespace elbert
