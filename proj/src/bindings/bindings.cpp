#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "elbert/attnviz.hpp"
#include "elbert/bench.hpp"
#include "elbert/data.hpp"
#include "elbert/model.hpp"
#include "elbert/training.hpp"

namespace py = pybind11;
using namespace elbert;

namespace {

std::vector<std::vector<std::vector<double>>> attn_to_lists(const AttentionTensor& attn) {
  std::vector<std::vector<std::vector<double>>> out;
  for (const Mat& head : attn) {
    std::vector<std::vector<double>> rows;
    for (Eigen::Index r = 0; r < head.rows(); ++r) {
      rows.emplace_back(head.row(r).begin(), head.row(r).end());
    }
    out.push_back(std::move(rows));
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "parameter-shared transformer classifier with two-stage early exit";

  py::register_exception<Error>(m, "ElbertError");

  py::class_<ModelConfig>(m, "ModelConfig")
      .def(py::init<>())
      .def_readwrite("depth", &ModelConfig::depth)
      .def_readwrite("hidden_dim", &ModelConfig::hidden_dim)
      .def_readwrite("num_heads", &ModelConfig::num_heads)
      .def_readwrite("ffn_dim", &ModelConfig::ffn_dim)
      .def_readwrite("vocab_size", &ModelConfig::vocab_size)
      .def_readwrite("max_seq_len", &ModelConfig::max_seq_len)
      .def_readwrite("num_classes", &ModelConfig::num_classes)
      .def_readwrite("embed_dim", &ModelConfig::embed_dim)
      .def("validate", &ModelConfig::validate);

  py::enum_<Stage2Criterion>(m, "Stage2Criterion")
      .value("MONOTONE_PROB", Stage2Criterion::kMonotoneProb)
      .value("MAX_RANGE", Stage2Criterion::kMaxRange)
      .value("STABLE_LABEL", Stage2Criterion::kStableLabel);

  py::enum_<ExitReason>(m, "ExitReason")
      .value("STAGE1", ExitReason::kStage1)
      .value("STAGE2_MONOTONE_PROB", ExitReason::kStage2MonotoneProb)
      .value("STAGE2_MAX_RANGE", ExitReason::kStage2MaxRange)
      .value("STAGE2_STABLE_LABEL", ExitReason::kStage2StableLabel)
      .value("EXHAUSTED", ExitReason::kExhausted);

  py::class_<ExitConfig>(m, "ExitConfig")
      .def(py::init<>())
      .def_readwrite("delta", &ExitConfig::delta)
      .def_readwrite("window_size", &ExitConfig::window_size)
      .def_readwrite("criterion", &ExitConfig::criterion)
      .def_readwrite("range_epsilon", &ExitConfig::range_epsilon)
      .def_readwrite("stage1_enabled", &ExitConfig::stage1_enabled)
      .def_readwrite("stage2_enabled", &ExitConfig::stage2_enabled)
      .def("validate", &ExitConfig::validate);

  py::class_<ExitDecision>(m, "ExitDecision")
      .def_readonly("fired", &ExitDecision::fired)
      .def_readonly("layer", &ExitDecision::layer)
      .def_readonly("reason", &ExitDecision::reason)
      .def("__repr__", [](const ExitDecision& d) {
        return "ExitDecision(fired=" + std::string(d.fired ? "True" : "False") +
               ", layer=" + std::to_string(d.layer) + ", reason=" + to_string(d.reason) + ")";
      });

  py::class_<ProbDist>(m, "ProbDist")
      .def(py::init([](std::vector<double> probs, int layer) {
             return ProbDist{std::move(probs), layer};
           }),
           py::arg("probs"), py::arg("layer"))
      .def_readwrite("probs", &ProbDist::probs)
      .def_readwrite("layer", &ProbDist::layer)
      .def("predicted_label", &ProbDist::predicted_label);

  m.def("puzzlement",
        [](const std::vector<double>& probs) { return puzzlement({probs, 1}); },
        "normalized entropy in [0, 1]");

  py::class_<ExitEngine>(m, "ExitEngine")
      .def(py::init<const ExitConfig&>())
      .def("observe",
           [](ExitEngine& e, const std::vector<double>& probs, int layer) {
             return e.observe({probs, layer});
           },
           py::arg("probs"), py::arg("layer"))
      .def_property_readonly("fired", &ExitEngine::fired);

  py::class_<Parameters>(m, "Parameters")
      .def("count", [](const Parameters& p) { return parameter_count(p, true); })
      .def("count_excluding_exit_t",
           [](const Parameters& p) { return parameter_count(p, false); })
      .def_property_readonly("exit_t", [](const Parameters& p) {
        return std::vector<double>(p.exit_t.data(), p.exit_t.data() + p.exit_t.size());
      });

  m.def("init_parameters", &init_parameters, py::arg("cfg"), py::arg("seed"),
        py::arg("t_init") = 4.0);
  m.def("save_checkpoint", &save_checkpoint);
  m.def("load_checkpoint", &load_checkpoint);

  m.def("layer_weights",
        [](const std::vector<double>& t, int depth) { return layer_weights(t, depth); });
  m.def("exit_loss",
        [](const std::vector<double>& probs, int gold) { return exit_loss({probs, 1}, gold); });

  m.def("flops_estimate", [](const ModelConfig& cfg) {
    auto est = flops_estimate(cfg);
    return py::make_tuple(est.encoder_pass_macs, est.classifier_macs);
  });

  m.def("forward_full",
        [](const std::vector<int>& ids, const Parameters& params, const ModelConfig& cfg) {
          auto trace = forward_full(ids, params, cfg);
          py::list dists;
          for (const auto& d : trace.dists) dists.append(py::make_tuple(d.layer, d.probs));
          return dists;
        });

  m.def("forward_adaptive",
        [](const std::vector<int>& ids, const Parameters& params, const ModelConfig& cfg,
           const ExitConfig& exit_cfg) {
          auto result = forward_adaptive(ids, params, cfg, exit_cfg);
          py::dict out;
          out["label"] = result.predicted_label;
          out["decision"] = result.decision;
          py::list dists;
          for (const auto& d : result.trace.dists) {
            dists.append(py::make_tuple(d.layer, d.probs));
          }
          out["dists"] = dists;
          out["attention"] = attn_to_lists(result.trace.attns.back());
          return out;
        });

  py::class_<EncodedExample>(m, "EncodedExample")
      .def(py::init([](std::vector<int> ids, int label) {
             return EncodedExample{std::move(ids), label};
           }),
           py::arg("ids"), py::arg("label"))
      .def_readwrite("ids", &EncodedExample::ids)
      .def_readwrite("label", &EncodedExample::label);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("t_init", &TrainConfig::t_init);

  m.def("train",
        [](const std::vector<EncodedExample>& dataset, const Parameters& params,
           const ModelConfig& cfg, const TrainConfig& tc) {
          auto result = train(dataset, params, cfg, tc);
          py::list history;
          for (const auto& e : result.history) {
            py::dict row;
            row["epoch"] = e.epoch;
            row["mean_loss"] = e.mean_loss;
            row["layer_losses"] = e.layer_losses;
            row["weights"] = e.weights;
            history.append(row);
          }
          return py::make_tuple(result.params, history);
        });

  m.def("gradient_audit", &gradient_audit, py::arg("params"), py::arg("cfg"),
        py::arg("sample"), py::arg("h"), py::arg("min_coords") = 200,
        py::arg("seed") = 12345);

  py::class_<Vocab>(m, "Vocab")
      .def("id_of", &Vocab::id_of)
      .def("token_of", &Vocab::token_of, py::return_value_policy::copy)
      .def("__len__", &Vocab::size);

  m.def("build_vocab", &build_vocab);
  m.def("encode", &encode);
  m.def("load_tsv", [](const std::filesystem::path& p) {
    std::vector<std::pair<int, std::string>> out;
    for (const auto& ex : load_tsv(p)) out.emplace_back(ex.label, ex.text);
    return out;
  });

  py::class_<SynthSpec>(m, "SynthSpec")
      .def_static("defaults", &SynthSpec::defaults)
      .def_readwrite("negation_rate", &SynthSpec::negation_rate)
      .def_readwrite("min_len", &SynthSpec::min_len)
      .def_readwrite("max_len", &SynthSpec::max_len)
      .def_readwrite("seed", &SynthSpec::seed);

  m.def("generate_synthetic", [](const SynthSpec& spec, int n) {
    py::list out;
    for (const auto& ex : generate_synthetic(spec, n)) {
      py::dict row;
      row["text"] = ex.text;
      row["label"] = ex.label;
      row["hard"] = ex.hard;
      row["keyword"] = ex.keyword;
      out.append(row);
    }
    return out;
  });

  py::class_<CurvePoint>(m, "CurvePoint")
      .def_readonly("delta", &CurvePoint::delta)
      .def_readonly("accuracy", &CurvePoint::accuracy)
      .def_readonly("mean_cost_ratio", &CurvePoint::mean_cost_ratio)
      .def_readonly("exit_histogram", &CurvePoint::exit_histogram)
      .def_readonly("criterion", &CurvePoint::criterion);

  py::class_<SweepConfig>(m, "SweepConfig")
      .def(py::init<>())
      .def_readwrite("delta_grid", &SweepConfig::delta_grid)
      .def_readwrite("exit_template", &SweepConfig::exit_template);

  m.def("evaluate", &evaluate);
  m.def("sweep", &sweep);
  m.def("truncated_baseline", [](const Parameters& params, const ModelConfig& cfg,
                                 const std::vector<EncodedExample>& dataset,
                                 const std::vector<int>& depths) {
    py::list out;
    for (const auto& b : truncated_baseline(params, cfg, dataset, depths)) {
      out.append(py::make_tuple(b.depth, b.accuracy, b.cost_ratio));
    }
    return out;
  });
}
