#include "elbert/data.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "elbert/io.hpp"

using namespace elbert;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name) {
  return fs::temp_directory_path() / ("elbert_data_test_" + name);
}

}  // namespace

TEST_CASE("build_vocab ranks by frequency then lexicographically") {
  auto vocab = build_vocab({"a b", "a"}, 16);
  CHECK(vocab.id_of("a") == Vocab::kNumReserved);
  CHECK(vocab.id_of("b") == Vocab::kNumReserved + 1);
  CHECK(vocab.id_of("zzz") == Vocab::kUnk);

  auto tied = build_vocab({"x m"}, 16);
  CHECK(tied.id_of("m") == Vocab::kNumReserved);
  CHECK(tied.id_of("x") == Vocab::kNumReserved + 1);

  CHECK_THROWS_AS(build_vocab({}, 16), InputError);
}

TEST_CASE("build_vocab truncates to the configured size") {
  std::vector<std::string> corpus{"a a a b b c d e f"};
  auto vocab = build_vocab(corpus, 5);  // room for two real tokens
  CHECK(vocab.size() == 5);
  CHECK(vocab.id_of("a") == 3);
  CHECK(vocab.id_of("b") == 4);
  CHECK(vocab.id_of("c") == Vocab::kUnk);
}

TEST_CASE("encode prepends cls, pads, truncates, and never overflows the vocab") {
  auto vocab = build_vocab({"good movie bad"}, 16);
  auto ids = encode("good movie", vocab, 6);
  REQUIRE(ids.size() == 6);
  CHECK(ids[0] == Vocab::kCls);
  CHECK(ids[1] == vocab.id_of("good"));
  CHECK(ids[2] == vocab.id_of("movie"));
  CHECK(ids[3] == Vocab::kPad);
  CHECK(ids[5] == Vocab::kPad);

  auto empty = encode("   ", vocab, 4);
  CHECK(empty == std::vector<int>{Vocab::kCls, 0, 0, 0});

  auto truncated = encode("good movie good movie good movie good", vocab, 4);
  CHECK(truncated.size() == 4);

  auto with_unk = encode("GOOD unknownword", vocab, 4);
  CHECK(with_unk[1] == vocab.id_of("good"));  // lowercased
  CHECK(with_unk[2] == Vocab::kUnk);
  for (int id : with_unk) CHECK(id < vocab.size());
}

TEST_CASE("load_tsv parses, validates, and preserves embedded tabs") {
  auto path = temp_path("basic.tsv");
  {
    std::ofstream os(path);
    os << "1\thello world\n";
    os << "0\ta\tb\tc\n";
  }
  auto examples = load_tsv(path);
  REQUIRE(examples.size() == 2);
  CHECK(examples[0].label == 1);
  CHECK(examples[0].text == "hello world");
  CHECK(examples[1].text == "a\tb\tc");
  fs::remove(path);
}

TEST_CASE("load_tsv on an empty file returns an empty list") {
  auto path = temp_path("empty.tsv");
  std::ofstream(path).close();
  CHECK(load_tsv(path).empty());
  fs::remove(path);
}

TEST_CASE("load_tsv reports malformed lines with their numbers") {
  auto path = temp_path("bad.tsv");
  {
    std::ofstream os(path);
    os << "1\tok line\n";
    os << "no tab here\n";
  }
  try {
    load_tsv(path);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    CHECK(e.line() == 2);
  }
  {
    std::ofstream os(path);
    os << "x7\ttext\n";
  }
  CHECK_THROWS_AS(load_tsv(path), ParseError);
  {
    std::ofstream os(path);
    os << "-1\ttext\n";
  }
  CHECK_THROWS_AS(load_tsv(path), ParseError);
  fs::remove(path);
}

TEST_CASE("tsv round trip is byte identical") {
  auto path = temp_path("round.tsv");
  const std::string original = "1\thello world\n0\ta\tb\tc\n3\tlast\n";
  {
    std::ofstream os(path);
    os << original;
  }
  auto examples = load_tsv(path);
  auto out = temp_path("round_out.tsv");
  save_tsv(out, examples);
  CHECK(read_file(out) == original);
  fs::remove(path);
  fs::remove(out);
}

TEST_CASE("vocab file round trip keeps ids") {
  auto vocab = build_vocab({"delta alpha beta alpha"}, 16);
  auto path = temp_path("vocab.txt");
  save_vocab(path, vocab);
  auto loaded = load_vocab(path);
  CHECK(loaded.size() == vocab.size());
  for (const auto& tok : vocab.tokens()) {
    CHECK(loaded.id_of(tok) == vocab.id_of(tok));
  }
  fs::remove(path);
}

TEST_CASE("generate_synthetic honors the negation semantics") {
  auto spec = SynthSpec::defaults();
  spec.seed = 4;

  SUBCASE("rate 0 means label equals keyword polarity") {
    spec.negation_rate = 0.0;
    auto examples = generate_synthetic(spec, 200);
    for (const auto& ex : examples) {
      CHECK_FALSE(ex.hard);
      const bool positive_kw =
          std::find(spec.positive_keywords.begin(), spec.positive_keywords.end(),
                    ex.keyword) != spec.positive_keywords.end();
      CHECK(ex.label == (positive_kw ? 1 : 0));
      CHECK(ex.text.find(ex.keyword) != std::string::npos);
    }
  }

  SUBCASE("same spec and seed reproduce the corpus") {
    auto a = generate_synthetic(spec, 50);
    auto b = generate_synthetic(spec, 50);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].text == b[i].text);
      CHECK(a[i].label == b[i].label);
      CHECK(a[i].hard == b[i].hard);
    }
  }

  SUBCASE("negated fraction concentrates around the rate") {
    spec.negation_rate = 0.3;
    auto examples = generate_synthetic(spec, 2000);
    long hard = 0;
    for (const auto& ex : examples) hard += ex.hard ? 1 : 0;
    const double fraction = static_cast<double>(hard) / 2000.0;
    CHECK(fraction > 0.27);
    CHECK(fraction < 0.33);
  }

  SUBCASE("sentence lengths stay in range and every sentence has a keyword") {
    auto examples = generate_synthetic(spec, 300);
    for (const auto& ex : examples) {
      auto toks = tokenize(ex.text);
      CHECK(toks.size() >= static_cast<size_t>(spec.min_len));
      CHECK(toks.size() <= static_cast<size_t>(spec.max_len));
      CHECK(std::find(toks.begin(), toks.end(), ex.keyword) != toks.end());
    }
  }
}

TEST_CASE("synthetic spec validation") {
  auto spec = SynthSpec::defaults();
  spec.positive_keywords.push_back(spec.negative_keywords.front());
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = SynthSpec::defaults();
  spec.negation_rate = 1.5;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = SynthSpec::defaults();
  CHECK_THROWS_AS(generate_synthetic(spec, 0), InputError);
}
