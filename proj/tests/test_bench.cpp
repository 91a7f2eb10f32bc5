#include "elbert/bench.hpp"

#include <algorithm>
#include <filesystem>

#include "doctest.h"
#include "elbert/data.hpp"
#include "elbert/io.hpp"
#include "elbert/rng.hpp"

using namespace elbert;
namespace fs = std::filesystem;

namespace {

ModelConfig bench_config() {
  ModelConfig cfg;
  cfg.depth = 4;
  cfg.hidden_dim = 16;
  cfg.num_heads = 2;
  cfg.ffn_dim = 32;
  cfg.vocab_size = 30;
  cfg.max_seq_len = 8;
  cfg.num_classes = 2;
  cfg.embed_dim = 8;
  return cfg;
}

std::vector<EncodedExample> random_dataset(const ModelConfig& cfg, int n, uint64_t seed) {
  Rng rng(seed);
  std::vector<EncodedExample> out;
  for (int i = 0; i < n; ++i) {
    EncodedExample ex;
    ex.ids.push_back(Vocab::kCls);
    for (int j = 1; j < cfg.max_seq_len; ++j) {
      ex.ids.push_back(static_cast<int>(rng.below(cfg.vocab_size)));
    }
    ex.label = static_cast<int>(rng.below(cfg.num_classes));
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace

TEST_CASE("evaluate with disabled stages reports full cost and full accuracy") {
  auto cfg = bench_config();
  auto params = init_parameters(cfg, 22);
  auto dataset = random_dataset(cfg, 40, 1);
  ExitConfig off;
  off.stage1_enabled = false;
  off.stage2_enabled = false;

  auto point = evaluate(params, cfg, dataset, off);
  CHECK(point.mean_cost_ratio == 1.0);
  long total = 0;
  for (long c : point.exit_histogram) total += c;
  CHECK(total == 40);
  CHECK(point.exit_histogram.back() == 40);

  long correct = 0;
  for (const auto& ex : dataset) {
    auto trace = forward_full(ex.ids, params, cfg);
    if (trace.dists.back().predicted_label() == ex.label) ++correct;
  }
  CHECK(point.accuracy == doctest::Approx(correct / 40.0));
}

TEST_CASE("evaluate at delta 1 exits every input at layer 1") {
  auto cfg = bench_config();
  auto params = init_parameters(cfg, 23);
  auto dataset = random_dataset(cfg, 25, 2);
  ExitConfig eager;
  eager.delta = 1.0;
  eager.stage2_enabled = false;
  auto point = evaluate(params, cfg, dataset, eager);
  CHECK(point.mean_cost_ratio == doctest::Approx(1.0 / cfg.depth));
  CHECK(point.exit_histogram.front() == 25);
}

TEST_CASE("evaluate matches a per-example replay oracle") {
  auto cfg = bench_config();
  auto params = init_parameters(cfg, 24);
  auto dataset = random_dataset(cfg, 50, 3);
  ExitConfig exit_cfg;
  exit_cfg.delta = 0.6;
  exit_cfg.window_size = 2;
  exit_cfg.criterion = Stage2Criterion::kStableLabel;

  auto point = evaluate(params, cfg, dataset, exit_cfg);

  long correct = 0;
  std::vector<long> hist(cfg.depth, 0);
  long layer_sum = 0;
  for (const auto& ex : dataset) {
    auto res = forward_adaptive(ex.ids, params, cfg, exit_cfg);
    if (res.predicted_label == ex.label) ++correct;
    ++hist[res.decision.layer - 1];
    layer_sum += res.decision.layer;
  }
  CHECK(point.accuracy == doctest::Approx(correct / 50.0));
  CHECK(point.exit_histogram == hist);
  CHECK(point.mean_cost_ratio ==
        doctest::Approx(static_cast<double>(layer_sum) / (cfg.depth * 50.0)));
}

TEST_CASE("evaluate is order independent") {
  auto cfg = bench_config();
  auto params = init_parameters(cfg, 25);
  auto dataset = random_dataset(cfg, 30, 4);
  ExitConfig exit_cfg;
  exit_cfg.delta = 0.5;
  auto a = evaluate(params, cfg, dataset, exit_cfg);
  Rng rng(9);
  rng.shuffle(dataset);
  auto b = evaluate(params, cfg, dataset, exit_cfg);
  CHECK(a.accuracy == b.accuracy);
  CHECK(a.exit_histogram == b.exit_histogram);
  CHECK(a.mean_cost_ratio == b.mean_cost_ratio);
}

TEST_CASE("evaluate rejects label/class mismatches") {
  auto cfg = bench_config();
  auto params = init_parameters(cfg, 26);
  auto dataset = random_dataset(cfg, 5, 5);
  dataset[3].label = 7;
  CHECK_THROWS_AS(evaluate(params, cfg, dataset, ExitConfig{}), ConfigError);
}

TEST_CASE("sweep covers the grid and cost is non-increasing") {
  auto cfg = bench_config();
  auto params = init_parameters(cfg, 27);
  auto dataset = random_dataset(cfg, 30, 6);
  SweepConfig sc;
  sc.exit_template.window_size = 3;
  auto points = sweep(params, cfg, dataset, sc);
  REQUIRE(points.size() == 11);
  CHECK(points.front().delta == 0.0);
  CHECK(points.back().delta == doctest::Approx(1.0));
  for (size_t i = 1; i < points.size(); ++i) {
    CHECK(points[i].mean_cost_ratio <= points[i - 1].mean_cost_ratio);
  }
  // endpoints equal standalone evaluate calls
  ExitConfig at0 = sc.exit_template;
  at0.delta = 0.0;
  auto p0 = evaluate(params, cfg, dataset, at0);
  CHECK(points.front().accuracy == p0.accuracy);
  CHECK(points.front().mean_cost_ratio == p0.mean_cost_ratio);
  ExitConfig at1 = sc.exit_template;
  at1.delta = 1.0;
  auto p1 = evaluate(params, cfg, dataset, at1);
  CHECK(points.back().accuracy == p1.accuracy);

  SUBCASE("single-point grid with stage 2 disabled") {
    SweepConfig single;
    single.delta_grid = {0.0};
    single.exit_template.stage2_enabled = false;
    auto one = sweep(params, cfg, dataset, single);
    REQUIRE(one.size() == 1);
    CHECK(one.front().mean_cost_ratio == 1.0);
  }
}

TEST_CASE("truncated baseline: forced depths match trace slicing") {
  auto cfg = bench_config();
  auto params = init_parameters(cfg, 28);
  auto dataset = random_dataset(cfg, 30, 7);
  auto baseline = truncated_baseline(params, cfg, dataset, {1, 2, 4});
  REQUIRE(baseline.size() == 3);
  CHECK(baseline[0].cost_ratio == doctest::Approx(0.25));
  CHECK(baseline[2].cost_ratio == doctest::Approx(1.0));

  // oracle: read predictions at each depth off the full trace (prefix
  // equality makes this equivalent to truncated execution)
  for (size_t b = 0; b < baseline.size(); ++b) {
    long correct = 0;
    for (const auto& ex : dataset) {
      auto trace = forward_full(ex.ids, params, cfg);
      if (trace.dists[baseline[b].depth - 1].predicted_label() == ex.label) ++correct;
    }
    CHECK(baseline[b].accuracy == doctest::Approx(correct / 30.0));
  }

  // depth M equals evaluate with stages disabled, exactly
  ExitConfig off;
  off.stage1_enabled = false;
  off.stage2_enabled = false;
  CHECK(baseline[2].accuracy == evaluate(params, cfg, dataset, off).accuracy);

  CHECK_THROWS_AS(truncated_baseline(params, cfg, dataset, {0}), ConfigError);
  CHECK_THROWS_AS(truncated_baseline(params, cfg, dataset, {5}), ConfigError);
}

TEST_CASE("curve export round trips through csv and json") {
  std::vector<CurvePoint> points(2);
  points[0] = {0.1, 0.925, 0.5, {3, 1, 0, 4}, "monotone"};
  points[1] = {0.2, 0.9, 0.25, {8, 0, 0, 0}, "monotone"};

  auto csv_path = fs::temp_directory_path() / "elbert_curves.csv";
  export_curves(points, csv_path, CurveFormat::kCsv);
  auto csv_back = import_curves(csv_path, CurveFormat::kCsv);
  REQUIRE(csv_back.size() == 2);
  for (size_t i = 0; i < 2; ++i) {
    CHECK(csv_back[i].delta == points[i].delta);
    CHECK(csv_back[i].accuracy == points[i].accuracy);
    CHECK(csv_back[i].mean_cost_ratio == points[i].mean_cost_ratio);
    CHECK(csv_back[i].exit_histogram == points[i].exit_histogram);
  }
  const std::string csv = read_file(csv_path);
  CHECK(csv.rfind("delta,accuracy,cost_ratio,exit_l1,exit_l2,exit_l3,exit_l4\n", 0) == 0);

  auto json_path = fs::temp_directory_path() / "elbert_curves.json";
  export_curves(points, json_path, CurveFormat::kJson);
  auto json_back = import_curves(json_path, CurveFormat::kJson);
  REQUIRE(json_back.size() == 2);
  CHECK(json_back[1].criterion == "monotone");
  CHECK(json_back[1].exit_histogram == points[1].exit_histogram);
  CHECK(json_back[0].accuracy == points[0].accuracy);

  std::vector<CurvePoint> single{points[0]};
  export_curves(single, csv_path, CurveFormat::kCsv);
  const std::string two_lines = read_file(csv_path);
  CHECK(std::count(two_lines.begin(), two_lines.end(), '\n') == 2);

  fs::remove(csv_path);
  fs::remove(json_path);
}

TEST_CASE("median summary over repeated runs") {
  std::vector<std::vector<CurvePoint>> runs(3);
  for (int r = 0; r < 3; ++r) {
    runs[r] = {{0.1, 0.90 + 0.01 * r, 0.50 + 0.10 * r, {1}, "monotone"},
               {0.2, 0.80 + 0.01 * r, 0.40 + 0.10 * r, {1}, "monotone"}};
  }
  auto medians = median_summary(runs);
  REQUIRE(medians.size() == 2);
  CHECK(medians[0].delta == 0.1);
  CHECK(medians[0].median_accuracy == doctest::Approx(0.91));
  CHECK(medians[0].median_cost_ratio == doctest::Approx(0.60));
  CHECK(medians[1].median_accuracy == doctest::Approx(0.81));
}
