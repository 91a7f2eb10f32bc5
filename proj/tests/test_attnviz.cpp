#include "elbert/attnviz.hpp"

#include <filesystem>

#include "doctest.h"
#include "elbert/io.hpp"
#include "elbert/rng.hpp"

using namespace elbert;
namespace fs = std::filesystem;

namespace {

Mat stochastic_rows(Rng& rng, int n) {
  Mat m(n, n);
  for (int r = 0; r < n; ++r) {
    double sum = 0.0;
    for (int c = 0; c < n; ++c) sum += (m(r, c) = rng.uniform() + 1e-6);
    m.row(r) /= sum;
  }
  return m;
}

LayerTrace synthetic_trace(int layers, int heads, int seq, uint64_t seed) {
  Rng rng(seed);
  LayerTrace trace;
  for (int i = 0; i < seq; ++i) trace.token_ids.push_back(i);
  for (int l = 0; l < layers; ++l) {
    AttentionTensor heads_attn;
    for (int h = 0; h < heads; ++h) heads_attn.push_back(stochastic_rows(rng, seq));
    trace.attns.push_back(std::move(heads_attn));
    const double p0 = 0.2 + 0.6 * rng.uniform();
    trace.dists.push_back({{p0, 1.0 - p0}, l + 1});
  }
  return trace;
}

}  // namespace

TEST_CASE("single-layer cumulative equals the head mean of the cls row") {
  auto trace = synthetic_trace(1, 3, 4, 1);
  auto profile = cumulative_attention(trace, {false, 1, ExitReason::kExhausted});
  REQUIRE(profile.cumulative.size() == 1);
  for (int tok = 0; tok < 4; ++tok) {
    double expected = 0.0;
    for (int h = 0; h < 3; ++h) expected += trace.attns[0][h](0, tok);
    expected /= 3.0;
    CHECK(std::abs(profile.cumulative[0][tok] - expected) <= 1e-12);
  }
}

TEST_CASE("two crafted layers average to (a + b) / 2") {
  LayerTrace trace;
  trace.token_ids = {0, 1};
  Mat a(2, 2), b(2, 2);
  a << 0.75, 0.25, 0.5, 0.5;
  b << 0.25, 0.75, 0.5, 0.5;
  trace.attns.push_back({a});
  trace.attns.push_back({b});
  trace.dists.push_back({{0.6, 0.4}, 1});
  trace.dists.push_back({{0.3, 0.7}, 2});

  auto profile = cumulative_attention(trace, {true, 2, ExitReason::kStage1});
  REQUIRE(profile.cumulative.size() == 2);
  CHECK(std::abs(profile.cumulative[0][0] - 0.75) <= 1e-12);
  CHECK(std::abs(profile.cumulative[1][0] - 0.5) <= 1e-12);
  CHECK(std::abs(profile.cumulative[1][1] - 0.5) <= 1e-12);
  CHECK(profile.predicted_labels == std::vector<int>{0, 1});
  CHECK(profile.exit.layer == 2);
}

TEST_CASE("cumulative vectors stay row stochastic") {
  auto trace = synthetic_trace(6, 4, 9, 2);
  auto profile = cumulative_attention(trace, {false, 6, ExitReason::kExhausted});
  for (const auto& layer : profile.cumulative) {
    double sum = 0.0;
    for (double v : layer) {
      CHECK(v >= 0.0);
      sum += v;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-6);
  }
}

TEST_CASE("profile json round trip") {
  auto trace = synthetic_trace(3, 2, 5, 3);
  std::vector<std::string> tokens{"[cls]", "a", "b", "c", "d"};
  auto profile = cumulative_attention(trace, {true, 3, ExitReason::kStage2MonotoneProb}, tokens);

  auto path = fs::temp_directory_path() / "elbert_profile.json";
  export_profile(profile, path);
  auto back = import_profile(path);

  CHECK(back.tokens == profile.tokens);
  REQUIRE(back.cumulative.size() == profile.cumulative.size());
  for (size_t l = 0; l < back.cumulative.size(); ++l) {
    REQUIRE(back.cumulative[l].size() == profile.cumulative[l].size());
    CHECK(back.cumulative[l].size() == back.tokens.size());
    for (size_t i = 0; i < back.cumulative[l].size(); ++i) {
      CHECK(back.cumulative[l][i] == profile.cumulative[l][i]);
    }
  }
  CHECK(back.predicted_labels == profile.predicted_labels);
  CHECK(back.exit.layer == 3);
  CHECK(back.exit.reason == ExitReason::kStage2MonotoneProb);
  fs::remove(path);
}

TEST_CASE("default tokens render ids and svg output is written") {
  auto trace = synthetic_trace(2, 2, 3, 4);
  auto profile = cumulative_attention(trace, {false, 2, ExitReason::kExhausted});
  CHECK(profile.tokens == std::vector<std::string>{"#0", "#1", "#2"});

  auto path = fs::temp_directory_path() / "elbert_profile.svg";
  render_profile_svg(profile, path);
  const std::string svg = read_file(path);
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("layer 2") != std::string::npos);
  fs::remove(path);
}

TEST_CASE("token count mismatches are rejected") {
  auto trace = synthetic_trace(1, 1, 3, 5);
  CHECK_THROWS_AS(cumulative_attention(trace, {false, 1, ExitReason::kExhausted},
                                       {"only", "two"}),
                  InputError);
}
