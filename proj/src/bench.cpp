#include "elbert/bench.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "elbert/io.hpp"

namespace elbert {

using nlohmann::json;

std::vector<double> SweepConfig::default_delta_grid() {
  std::vector<double> grid{0.0};
  for (int i = 1; i <= 10; ++i) grid.push_back(i * 0.1);
  return grid;
}

void SweepConfig::validate() const {
  if (delta_grid.empty()) throw ConfigError("delta grid must be non-empty");
  for (size_t i = 0; i < delta_grid.size(); ++i) {
    if (!(delta_grid[i] >= 0.0 && delta_grid[i] <= 1.0)) {
      throw ConfigError("delta grid values must lie in [0, 1]");
    }
    if (i > 0 && delta_grid[i] < delta_grid[i - 1]) {
      throw ConfigError("delta grid must be sorted ascending");
    }
  }
}

namespace {

void check_labels(const ModelConfig& cfg, const std::vector<EncodedExample>& dataset) {
  if (dataset.empty()) throw InputError("empty evaluation dataset");
  for (const auto& ex : dataset) {
    if (ex.label < 0 || ex.label >= cfg.num_classes) {
      throw ConfigError("dataset label " + std::to_string(ex.label) +
                        " does not fit a model with " +
                        std::to_string(cfg.num_classes) + " classes");
    }
  }
}

}  // namespace

CurvePoint evaluate(const Parameters& params, const ModelConfig& cfg,
                    const std::vector<EncodedExample>& dataset,
                    const ExitConfig& exit_cfg) {
  check_labels(cfg, dataset);
  exit_cfg.validate();
  CurvePoint point;
  point.delta = exit_cfg.delta;
  point.criterion = to_string(exit_cfg.criterion);
  point.exit_histogram.assign(cfg.depth, 0);
  long correct = 0;
  long layer_sum = 0;
  for (const auto& ex : dataset) {
    AdaptiveResult result = forward_adaptive(ex.ids, params, cfg, exit_cfg);
    if (result.predicted_label == ex.label) ++correct;
    const int layer = result.decision.layer;
    ++point.exit_histogram[layer - 1];
    layer_sum += layer;
  }
  const double n = static_cast<double>(dataset.size());
  point.accuracy = correct / n;
  point.mean_cost_ratio = static_cast<double>(layer_sum) / (cfg.depth * n);
  return point;
}

std::vector<CurvePoint> sweep(const Parameters& params, const ModelConfig& cfg,
                              const std::vector<EncodedExample>& dataset,
                              const SweepConfig& sweep_cfg) {
  sweep_cfg.validate();
  std::vector<CurvePoint> points;
  points.reserve(sweep_cfg.delta_grid.size());
  for (double delta : sweep_cfg.delta_grid) {
    ExitConfig cfg_at = sweep_cfg.exit_template;
    cfg_at.delta = delta;
    points.push_back(evaluate(params, cfg, dataset, cfg_at));
  }
  return points;
}

std::vector<BaselinePoint> truncated_baseline(const Parameters& params,
                                              const ModelConfig& cfg,
                                              const std::vector<EncodedExample>& dataset,
                                              const std::vector<int>& depths) {
  check_labels(cfg, dataset);
  for (int depth : depths) {
    if (depth < 1 || depth > cfg.depth) {
      throw ConfigError("baseline depth " + std::to_string(depth) +
                        " outside [1, " + std::to_string(cfg.depth) + "]");
    }
  }
  std::vector<BaselinePoint> out;
  out.reserve(depths.size());
  for (int depth : depths) {
    long correct = 0;
    for (const auto& ex : dataset) {
      HiddenState h = embed(ex.ids, params, cfg);
      for (int i = 0; i < depth; ++i) {
        h = encoder_step(h, params, cfg).first;
      }
      if (classify(h, params).predicted_label() == ex.label) ++correct;
    }
    BaselinePoint p;
    p.depth = depth;
    p.accuracy = static_cast<double>(correct) / static_cast<double>(dataset.size());
    p.cost_ratio = static_cast<double>(depth) / static_cast<double>(cfg.depth);
    out.push_back(p);
  }
  return out;
}

namespace {

std::string csv_of(const std::vector<CurvePoint>& points) {
  std::ostringstream os;
  os.precision(17);
  const size_t depth = points.front().exit_histogram.size();
  os << "delta,accuracy,cost_ratio";
  for (size_t i = 1; i <= depth; ++i) os << ",exit_l" << i;
  os << "\n";
  for (const auto& p : points) {
    os << p.delta << "," << p.accuracy << "," << p.mean_cost_ratio;
    for (long c : p.exit_histogram) os << "," << c;
    os << "\n";
  }
  return os.str();
}

std::vector<CurvePoint> curves_from_csv(const std::string& content) {
  std::istringstream is(content);
  std::string line;
  if (!std::getline(is, line)) throw ParseError("empty curve file");
  std::vector<CurvePoint> points;
  long line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() < 4) throw ParseError("short curve row", line_no);
    CurvePoint p;
    try {
      p.delta = std::stod(cells[0]);
      p.accuracy = std::stod(cells[1]);
      p.mean_cost_ratio = std::stod(cells[2]);
      for (size_t i = 3; i < cells.size(); ++i) {
        p.exit_histogram.push_back(std::stol(cells[i]));
      }
    } catch (const std::exception&) {
      throw ParseError("malformed curve row", line_no);
    }
    points.push_back(std::move(p));
  }
  return points;
}

json json_of(const std::vector<CurvePoint>& points) {
  json arr = json::array();
  for (const auto& p : points) {
    arr.push_back({{"delta", p.delta},
                   {"accuracy", p.accuracy},
                   {"cost_ratio", p.mean_cost_ratio},
                   {"exit_histogram", p.exit_histogram},
                   {"criterion", p.criterion}});
  }
  return arr;
}

std::vector<CurvePoint> curves_from_json(const std::string& content) {
  json arr = json::parse(content);
  if (!arr.is_array()) throw ParseError("curve JSON must be an array");
  std::vector<CurvePoint> points;
  for (const auto& obj : arr) {
    CurvePoint p;
    p.delta = obj.at("delta").get<double>();
    p.accuracy = obj.at("accuracy").get<double>();
    p.mean_cost_ratio = obj.at("cost_ratio").get<double>();
    p.exit_histogram = obj.at("exit_histogram").get<std::vector<long>>();
    p.criterion = obj.at("criterion").get<std::string>();
    points.push_back(std::move(p));
  }
  return points;
}

}  // namespace

void export_curves(const std::vector<CurvePoint>& points,
                   const std::filesystem::path& path, CurveFormat format) {
  if (points.empty()) throw InputError("no curve points to export");
  atomic_write(path, [&](std::ostream& os) {
    if (format == CurveFormat::kCsv) {
      os << csv_of(points);
    } else {
      os << json_of(points).dump(2) << "\n";
    }
  });
}

std::vector<CurvePoint> import_curves(const std::filesystem::path& path,
                                      CurveFormat format) {
  const std::string content = read_file(path);
  try {
    return format == CurveFormat::kCsv ? curves_from_csv(content)
                                       : curves_from_json(content);
  } catch (const json::exception& e) {
    throw ParseError(std::string("curve JSON: ") + e.what());
  }
}

std::vector<MedianPoint> median_summary(const std::vector<std::vector<CurvePoint>>& runs) {
  if (runs.empty()) throw InputError("no runs to summarize");
  const size_t npoints = runs.front().size();
  for (const auto& run : runs) {
    if (run.size() != npoints) throw InputError("runs disagree on grid size");
  }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  };
  std::vector<MedianPoint> out;
  out.reserve(npoints);
  for (size_t i = 0; i < npoints; ++i) {
    std::vector<double> accs, costs;
    for (const auto& run : runs) {
      if (run[i].delta != runs.front()[i].delta) {
        throw InputError("runs disagree on the delta grid");
      }
      accs.push_back(run[i].accuracy);
      costs.push_back(run[i].mean_cost_ratio);
    }
    out.push_back({runs.front()[i].delta, median(accs), median(costs)});
  }
  return out;
}

}  // namespace elbert
