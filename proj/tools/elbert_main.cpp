// elbert: train / sweep / infer / viz entry point.
//
// Exit codes: 0 success, 2 usage or configuration problems, 3 numeric
// failures during a pass.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "elbert/attnviz.hpp"
#include "elbert/bench.hpp"
#include "elbert/data.hpp"
#include "elbert/io.hpp"
#include "elbert/model.hpp"
#include "elbert/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Flat key=value config files ('#' starts a comment). Unknown keys are
// rejected so typos fail loudly. CLI flags override file values.

const std::vector<std::string> kKnownKeys = {
    "depth",        "hidden_dim",  "num_heads", "ffn_dim",
    "embed_dim",    "vocab_size",  "max_seq_len", "num_classes",
    "learning_rate", "batch_size", "epochs",    "seed",       "t_init",
    "train_tsv",    "synth_train", "synth_test", "synth_negation_rate",
    "synth_seed",   "synth_min_len", "synth_max_len",
    "delta",        "window",      "criterion", "range_epsilon", "stages"};

std::map<std::string, std::string> parse_config_file(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw elbert::IoError("cannot open config: " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  long line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    // trim
    const auto begin = line.find_first_not_of(" \t\r");
    if (begin == std::string::npos) continue;
    const auto end = line.find_last_not_of(" \t\r");
    line = line.substr(begin, end - begin + 1);
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw elbert::ParseError("expected key=value in config", line_no);
    }
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    if (std::find(kKnownKeys.begin(), kKnownKeys.end(), key) == kKnownKeys.end()) {
      throw elbert::ConfigError("unknown config key: " + key);
    }
    kv[key] = value;
  }
  return kv;
}

int to_int(const std::map<std::string, std::string>& kv, const std::string& key,
           int fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  try {
    return std::stoi(it->second);
  } catch (const std::exception&) {
    throw elbert::ConfigError("config key " + key + " is not an integer: " + it->second);
  }
}

double to_double(const std::map<std::string, std::string>& kv, const std::string& key,
                 double fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  try {
    return std::stod(it->second);
  } catch (const std::exception&) {
    throw elbert::ConfigError("config key " + key + " is not a number: " + it->second);
  }
}

std::string to_str(const std::map<std::string, std::string>& kv, const std::string& key,
                   const std::string& fallback) {
  auto it = kv.find(key);
  return it == kv.end() ? fallback : it->second;
}

void apply_stages(elbert::ExitConfig& cfg, const std::string& stages) {
  if (stages == "s1") {
    cfg.stage1_enabled = true;
    cfg.stage2_enabled = false;
  } else if (stages == "s2") {
    cfg.stage1_enabled = false;
    cfg.stage2_enabled = true;
  } else if (stages == "s1s2") {
    cfg.stage1_enabled = true;
    cfg.stage2_enabled = true;
  } else if (stages == "none") {
    cfg.stage1_enabled = false;
    cfg.stage2_enabled = false;
  } else {
    throw elbert::ConfigError("unknown stages value: " + stages +
                              " (expected s1 | s2 | s1s2 | none)");
  }
}

// Shared exit-policy flags, resolved as config-file defaults overridden by
// explicitly passed CLI flags.
struct ExitFlags {
  double delta = 0.5;
  int window = 8;
  std::string criterion = "monotone";
  double range_epsilon = 0.05;
  std::string stages = "s1s2";

  CLI::Option* delta_opt = nullptr;
  CLI::Option* window_opt = nullptr;
  CLI::Option* criterion_opt = nullptr;
  CLI::Option* epsilon_opt = nullptr;
  CLI::Option* stages_opt = nullptr;

  void attach(CLI::App* app) {
    delta_opt = app->add_option("--delta", delta, "first-stage puzzlement threshold");
    window_opt = app->add_option("--window", window, "second-stage window size");
    criterion_opt = app->add_option("--criterion", criterion,
                                    "second-stage criterion: monotone | max-range | stable-label");
    epsilon_opt = app->add_option("--range-epsilon", range_epsilon,
                                  "max-range criterion threshold");
    stages_opt = app->add_option("--stages", stages, "enabled stages: s1 | s2 | s1s2 | none");
  }

  elbert::ExitConfig resolve(const std::map<std::string, std::string>& file_cfg) const {
    elbert::ExitConfig cfg;
    cfg.delta = delta_opt->count() ? delta : to_double(file_cfg, "delta", delta);
    cfg.window_size = window_opt->count() ? window : to_int(file_cfg, "window", window);
    cfg.criterion = elbert::criterion_from_string(
        criterion_opt->count() ? criterion : to_str(file_cfg, "criterion", criterion));
    cfg.range_epsilon = epsilon_opt->count()
                            ? range_epsilon
                            : to_double(file_cfg, "range_epsilon", range_epsilon);
    apply_stages(cfg, stages_opt->count() ? stages : to_str(file_cfg, "stages", stages));
    cfg.validate();
    return cfg;
  }
};

elbert::ModelConfig model_config_from(const std::map<std::string, std::string>& kv) {
  elbert::ModelConfig cfg;
  cfg.depth = to_int(kv, "depth", cfg.depth);
  cfg.hidden_dim = to_int(kv, "hidden_dim", cfg.hidden_dim);
  cfg.num_heads = to_int(kv, "num_heads", cfg.num_heads);
  cfg.ffn_dim = to_int(kv, "ffn_dim", cfg.ffn_dim);
  cfg.embed_dim = to_int(kv, "embed_dim", cfg.embed_dim);
  cfg.vocab_size = to_int(kv, "vocab_size", cfg.vocab_size);
  cfg.max_seq_len = to_int(kv, "max_seq_len", cfg.max_seq_len);
  cfg.num_classes = to_int(kv, "num_classes", cfg.num_classes);
  cfg.validate();
  return cfg;
}

std::vector<elbert::EncodedExample> encode_all(const std::vector<elbert::Example>& examples,
                                               const elbert::Vocab& vocab,
                                               const elbert::ModelConfig& cfg) {
  std::vector<elbert::EncodedExample> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) {
    out.push_back({elbert::encode(ex.text, vocab, cfg.max_seq_len), ex.label});
  }
  return out;
}

elbert::Vocab vocab_for_checkpoint(const fs::path& checkpoint,
                                   const std::string& vocab_override) {
  fs::path vocab_path = vocab_override.empty()
                            ? checkpoint.parent_path() / "vocab.txt"
                            : fs::path(vocab_override);
  return elbert::load_vocab(vocab_path);
}

// ---------------------------------------------------------------------------

int cmd_train(const std::string& config_path, std::optional<uint64_t> seed_flag,
              const std::string& out_dir) {
  if (config_path.empty()) throw elbert::ConfigError("train requires --config");
  auto kv = parse_config_file(config_path);
  auto cfg = model_config_from(kv);

  elbert::TrainConfig tc;
  tc.learning_rate = to_double(kv, "learning_rate", tc.learning_rate);
  tc.batch_size = to_int(kv, "batch_size", tc.batch_size);
  tc.epochs = to_int(kv, "epochs", tc.epochs);
  tc.seed = static_cast<uint64_t>(to_int(kv, "seed", 0));
  tc.t_init = to_double(kv, "t_init", tc.t_init);
  if (seed_flag) tc.seed = *seed_flag;
  tc.validate();

  const fs::path out(out_dir);
  fs::create_directories(out);

  // Dataset: an explicit TSV wins over synthetic generation.
  std::vector<elbert::Example> train_examples;
  const std::string train_tsv = to_str(kv, "train_tsv", "");
  if (!train_tsv.empty()) {
    train_examples = elbert::load_tsv(train_tsv);
  } else {
    const int n_train = to_int(kv, "synth_train", 0);
    if (n_train <= 0) {
      throw elbert::ConfigError("config needs train_tsv or synth_train > 0");
    }
    auto spec = elbert::SynthSpec::defaults();
    spec.negation_rate = to_double(kv, "synth_negation_rate", spec.negation_rate);
    spec.min_len = to_int(kv, "synth_min_len", spec.min_len);
    spec.max_len = to_int(kv, "synth_max_len", spec.max_len);
    spec.seed = static_cast<uint64_t>(to_int(kv, "synth_seed", static_cast<int>(tc.seed)));
    const int n_test = to_int(kv, "synth_test", 0);
    auto all = elbert::generate_synthetic(spec, n_train + n_test);
    auto examples = elbert::to_examples(all);
    train_examples.assign(examples.begin(), examples.begin() + n_train);
    elbert::save_tsv(out / "train.tsv", train_examples);
    if (n_test > 0) {
      std::vector<elbert::Example> test_examples(examples.begin() + n_train, examples.end());
      elbert::save_tsv(out / "test.tsv", test_examples);
    }
  }
  if (train_examples.empty()) throw elbert::InputError("training dataset is empty");

  std::vector<std::string> texts;
  texts.reserve(train_examples.size());
  for (const auto& ex : train_examples) texts.push_back(ex.text);
  auto vocab = elbert::build_vocab(texts, cfg.vocab_size);
  auto dataset = encode_all(train_examples, vocab, cfg);

  auto params = elbert::init_parameters(cfg, tc.seed, tc.t_init);
  auto result = elbert::train(dataset, std::move(params), cfg, tc);
  for (const auto& m : result.history) {
    std::printf("epoch %3d  loss %.6f\n", m.epoch, m.mean_loss);
  }

  elbert::save_checkpoint(out / "model.ckpt", cfg, result.params);
  elbert::save_vocab(out / "vocab.txt", vocab);
  elbert::atomic_write(out / "metrics.csv", [&](std::ostream& os) {
    os << elbert::metrics_csv(result.history, cfg.depth);
  });
  std::printf("wrote %s\n", (out / "model.ckpt").string().c_str());
  return 0;
}

int cmd_sweep(const std::vector<std::string>& checkpoints, const std::string& data_path,
              const std::string& grid_arg, const ExitFlags& exit_flags,
              const std::map<std::string, std::string>& file_cfg,
              const std::string& vocab_override, const std::string& out_dir,
              bool json_out) {
  if (checkpoints.empty()) throw elbert::ConfigError("sweep requires --checkpoint");
  if (data_path.empty()) throw elbert::ConfigError("sweep requires --data");

  elbert::SweepConfig sc;
  sc.exit_template = exit_flags.resolve(file_cfg);
  if (!grid_arg.empty()) {
    sc.delta_grid.clear();
    std::istringstream gs(grid_arg);
    std::string cell;
    while (std::getline(gs, cell, ',')) sc.delta_grid.push_back(std::stod(cell));
  }
  sc.validate();

  const fs::path out(out_dir);
  fs::create_directories(out);
  auto examples = elbert::load_tsv(data_path);

  std::vector<std::vector<elbert::CurvePoint>> runs;
  for (size_t r = 0; r < checkpoints.size(); ++r) {
    auto [cfg, params] = elbert::load_checkpoint(checkpoints[r]);
    auto vocab = vocab_for_checkpoint(checkpoints[r], vocab_override);
    auto dataset = encode_all(examples, vocab, cfg);
    runs.push_back(elbert::sweep(params, cfg, dataset, sc));

    const std::string stem = checkpoints.size() == 1 ? "curves"
                                                     : "curves_run" + std::to_string(r);
    elbert::export_curves(runs.back(), out / (stem + ".csv"), elbert::CurveFormat::kCsv);
    elbert::export_curves(runs.back(), out / (stem + ".json"), elbert::CurveFormat::kJson);
  }

  if (json_out) {
    json doc = json::array();
    for (const auto& p : runs.front()) {
      doc.push_back({{"delta", p.delta},
                     {"accuracy", p.accuracy},
                     {"cost_ratio", p.mean_cost_ratio},
                     {"criterion", p.criterion}});
    }
    std::cout << doc.dump(2) << "\n";
  } else {
    std::printf("criterion: %s\n", runs.front().front().criterion.c_str());
    std::printf("%8s %10s %10s\n", "delta", "accuracy", "cost");
    for (const auto& p : runs.front()) {
      std::printf("%8.2f %10.4f %10.4f\n", p.delta, p.accuracy, p.mean_cost_ratio);
    }
  }

  if (runs.size() > 1) {
    auto medians = elbert::median_summary(runs);
    elbert::atomic_write(out / "median.csv", [&](std::ostream& os) {
      os << "delta,median_accuracy,median_cost_ratio\n";
      os.precision(17);
      for (const auto& m : medians) {
        os << m.delta << "," << m.median_accuracy << "," << m.median_cost_ratio << "\n";
      }
    });
    std::printf("median of %zu runs -> %s\n", runs.size(),
                (out / "median.csv").string().c_str());
  }
  return 0;
}

int cmd_infer(const std::string& checkpoint, const std::string& text,
              const ExitFlags& exit_flags,
              const std::map<std::string, std::string>& file_cfg,
              const std::string& vocab_override, bool json_out) {
  if (checkpoint.empty()) throw elbert::ConfigError("infer requires --checkpoint");
  if (text.empty()) throw elbert::InputError("infer requires non-empty --text");

  auto [cfg, params] = elbert::load_checkpoint(checkpoint);
  auto vocab = vocab_for_checkpoint(checkpoint, vocab_override);
  auto exit_cfg = exit_flags.resolve(file_cfg);
  auto ids = elbert::encode(text, vocab, cfg.max_seq_len);
  auto result = elbert::forward_adaptive(ids, params, cfg, exit_cfg);

  std::vector<double> puzzlements;
  for (const auto& d : result.trace.dists) puzzlements.push_back(elbert::puzzlement(d));

  if (json_out) {
    json doc = {{"label", result.predicted_label},
                {"exit_layer", result.decision.layer},
                {"reason", elbert::to_string(result.decision.reason)},
                {"puzzlement", puzzlements},
                {"probs", result.trace.dists.back().probs}};
    std::cout << doc.dump(2) << "\n";
  } else {
    std::printf("label: %d\n", result.predicted_label);
    std::printf("exit layer: %d (%s)\n", result.decision.layer,
                elbert::to_string(result.decision.reason).c_str());
    for (size_t i = 0; i < puzzlements.size(); ++i) {
      std::printf("puzzlement[layer %zu] = %.6f\n", i + 1, puzzlements[i]);
    }
  }
  return 0;
}

int cmd_viz(const std::string& checkpoint, const std::string& text,
            const ExitFlags& exit_flags,
            const std::map<std::string, std::string>& file_cfg,
            const std::string& vocab_override, const std::string& out_dir, bool svg) {
  if (checkpoint.empty()) throw elbert::ConfigError("viz requires --checkpoint");
  if (text.empty()) throw elbert::InputError("viz requires non-empty --text");

  auto [cfg, params] = elbert::load_checkpoint(checkpoint);
  auto vocab = vocab_for_checkpoint(checkpoint, vocab_override);
  auto exit_cfg = exit_flags.resolve(file_cfg);
  auto ids = elbert::encode(text, vocab, cfg.max_seq_len);
  auto result = elbert::forward_adaptive(ids, params, cfg, exit_cfg);

  std::vector<std::string> tokens;
  for (int id : ids) tokens.push_back(vocab.token_of(id));
  auto profile = elbert::cumulative_attention(result.trace, result.decision, tokens);

  const fs::path out(out_dir);
  fs::create_directories(out);
  elbert::export_profile(profile, out / "profile.json");
  std::printf("wrote %s\n", (out / "profile.json").string().c_str());
  if (svg) {
    elbert::render_profile_svg(profile, out / "profile.svg");
    std::printf("wrote %s\n", (out / "profile.svg").string().c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"parameter-shared transformer classifier with two-stage early exit"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", vocab_override, data_path, text, grid_arg;
  std::vector<std::string> checkpoints;
  std::optional<uint64_t> seed_flag;
  bool json_out = false, svg = false;

  auto add_shared = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key=value config file");
    sub->add_option("--seed", seed_flag, "RNG seed override");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_flag("--json", json_out, "machine-readable stdout");
  };

  auto* train = app.add_subcommand("train", "fine-tune on a dataset, writing a checkpoint");
  add_shared(train);

  ExitFlags sweep_exit, infer_exit, viz_exit;

  auto* sweep = app.add_subcommand("sweep", "delta sweep producing accuracy/cost curves");
  add_shared(sweep);
  sweep->add_option("--checkpoint", checkpoints, "checkpoint file (repeat for medians)");
  sweep->add_option("--data", data_path, "evaluation TSV");
  sweep->add_option("--grid", grid_arg, "comma-separated delta grid");
  sweep->add_option("--vocab", vocab_override, "vocab file (default: next to checkpoint)");
  sweep_exit.attach(sweep);

  auto* infer = app.add_subcommand("infer", "classify one input adaptively");
  add_shared(infer);
  infer->add_option("--checkpoint", checkpoints, "checkpoint file");
  infer->add_option("--text", text, "input text");
  infer->add_option("--vocab", vocab_override, "vocab file (default: next to checkpoint)");
  infer_exit.attach(infer);

  auto* viz = app.add_subcommand("viz", "export cumulative [cls] attention profiles");
  add_shared(viz);
  viz->add_option("--checkpoint", checkpoints, "checkpoint file");
  viz->add_option("--text", text, "input text");
  viz->add_option("--vocab", vocab_override, "vocab file (default: next to checkpoint)");
  viz->add_flag("--svg", svg, "also render per-layer bar charts");
  viz_exit.attach(viz);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    std::map<std::string, std::string> file_cfg;
    if (!config_path.empty()) file_cfg = parse_config_file(config_path);

    if (train->parsed()) return cmd_train(config_path, seed_flag, out_dir);
    if (sweep->parsed()) {
      return cmd_sweep(checkpoints, data_path, grid_arg, sweep_exit, file_cfg,
                       vocab_override, out_dir, json_out);
    }
    if (infer->parsed()) {
      return cmd_infer(checkpoints.empty() ? "" : checkpoints.front(), text, infer_exit,
                       file_cfg, vocab_override, json_out);
    }
    if (viz->parsed()) {
      return cmd_viz(checkpoints.empty() ? "" : checkpoints.front(), text, viz_exit,
                     file_cfg, vocab_override, out_dir, svg);
    }
  } catch (const elbert::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const elbert::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
