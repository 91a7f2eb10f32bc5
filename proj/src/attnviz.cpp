#include "elbert/attnviz.hpp"

#include <sstream>

#include <nlohmann/json.hpp>

#include "elbert/io.hpp"

namespace elbert {

using nlohmann::json;

AttentionProfile cumulative_attention(const LayerTrace& trace,
                                      const ExitDecision& decision,
                                      std::vector<std::string> tokens) {
  const int k = trace.executed_layers();
  if (k < 1) throw InputError("cumulative_attention: trace has no layers");
  if (static_cast<int>(trace.attns.size()) != k) {
    throw InputError("cumulative_attention: attention/distribution count mismatch");
  }
  const Eigen::Index seq = trace.attns.front().front().rows();

  AttentionProfile profile;
  profile.exit = decision;
  if (tokens.empty()) {
    for (int id : trace.token_ids) tokens.push_back("#" + std::to_string(id));
  }
  if (static_cast<Eigen::Index>(tokens.size()) != seq) {
    throw InputError("cumulative_attention: token count does not match sequence length");
  }
  profile.tokens = std::move(tokens);

  Vec running = Vec::Zero(seq);
  for (int layer = 0; layer < k; ++layer) {
    const AttentionTensor& heads = trace.attns[layer];
    Vec cls_row = Vec::Zero(seq);
    for (const Mat& head : heads) {
      cls_row += head.row(0).transpose();
    }
    cls_row /= static_cast<double>(heads.size());
    running += cls_row;
    Vec cumulative = running / static_cast<double>(layer + 1);
    profile.cumulative.emplace_back(cumulative.data(), cumulative.data() + seq);
    profile.predicted_labels.push_back(trace.dists[layer].predicted_label());
  }
  return profile;
}

void export_profile(const AttentionProfile& profile, const std::filesystem::path& path) {
  json layers = json::array();
  for (size_t i = 0; i < profile.cumulative.size(); ++i) {
    layers.push_back({{"index", i + 1},
                      {"scores", profile.cumulative[i]},
                      {"predicted_label", profile.predicted_labels[i]}});
  }
  json doc = {{"tokens", profile.tokens},
              {"layers", layers},
              {"exit", {{"layer", profile.exit.layer},
                        {"reason", to_string(profile.exit.reason)}}}};
  atomic_write(path, [&](std::ostream& os) { os << doc.dump(2) << "\n"; });
}

AttentionProfile import_profile(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ParseError(std::string("profile JSON: ") + e.what());
  }
  AttentionProfile profile;
  profile.tokens = doc.at("tokens").get<std::vector<std::string>>();
  for (const auto& layer : doc.at("layers")) {
    profile.cumulative.push_back(layer.at("scores").get<std::vector<double>>());
    profile.predicted_labels.push_back(layer.at("predicted_label").get<int>());
  }
  profile.exit.layer = doc.at("exit").at("layer").get<int>();
  profile.exit.reason = exit_reason_from_string(doc.at("exit").at("reason").get<std::string>());
  profile.exit.fired = profile.exit.reason != ExitReason::kExhausted;
  return profile;
}

namespace {

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

void render_profile_svg(const AttentionProfile& profile, const std::filesystem::path& path) {
  const int n_layers = static_cast<int>(profile.cumulative.size());
  if (n_layers == 0) throw InputError("empty profile");
  const int n_tokens = static_cast<int>(profile.tokens.size());

  const double bar_w = 26.0;
  const double row_h = 120.0;
  const double left = 60.0;
  const double top = 30.0;
  const double chart_h = 70.0;
  const double width = left + n_tokens * bar_w + 20.0;
  const double height = top + n_layers * row_h;

  double max_score = 0.0;
  for (const auto& layer : profile.cumulative) {
    for (double v : layer) max_score = std::max(max_score, v);
  }
  if (max_score <= 0.0) max_score = 1.0;

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
     << "\" height=\"" << height << "\" font-family=\"monospace\" font-size=\"10\">\n";
  for (int layer = 0; layer < n_layers; ++layer) {
    const double y0 = top + layer * row_h;
    os << "  <text x=\"4\" y=\"" << y0 + 12 << "\">layer " << layer + 1
       << " pred=" << profile.predicted_labels[layer];
    if (layer + 1 == profile.exit.layer) {
      os << " exit:" << escape_xml(to_string(profile.exit.reason));
    }
    os << "</text>\n";
    const auto& scores = profile.cumulative[layer];
    for (int tok = 0; tok < n_tokens; ++tok) {
      const double h = chart_h * (scores[tok] / max_score);
      const double x = left + tok * bar_w;
      os << "  <rect x=\"" << x << "\" y=\"" << y0 + chart_h - h
         << "\" width=\"" << bar_w - 4 << "\" height=\"" << h
         << "\" fill=\"#4477aa\"/>\n";
      os << "  <text x=\"" << x + (bar_w - 4) / 2 << "\" y=\"" << y0 + chart_h + 12
         << "\" text-anchor=\"end\" transform=\"rotate(-60 " << x + (bar_w - 4) / 2
         << " " << y0 + chart_h + 12 << ")\">" << escape_xml(profile.tokens[tok])
         << "</text>\n";
    }
  }
  os << "</svg>\n";
  atomic_write(path, [&](std::ostream& o) { o << os.str(); });
}

}  // namespace elbert
