#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "elbert/io.hpp"
#include "elbert/model.hpp"
#include "elbert/parameters.hpp"

using namespace elbert;
namespace fs = std::filesystem;

namespace {

ModelConfig ckpt_config(int depth = 3) {
  ModelConfig cfg;
  cfg.depth = depth;
  cfg.hidden_dim = 8;
  cfg.num_heads = 2;
  cfg.ffn_dim = 16;
  cfg.vocab_size = 12;
  cfg.max_seq_len = 5;
  cfg.num_classes = 2;
  cfg.embed_dim = 4;
  return cfg;
}

}  // namespace

TEST_CASE("checkpoint round trip is bit exact") {
  auto cfg = ckpt_config();
  auto params = init_parameters(cfg, 321, 4.0);
  auto path = fs::temp_directory_path() / "elbert_ckpt_roundtrip.bin";
  save_checkpoint(path, cfg, params);

  auto [cfg2, params2] = load_checkpoint(path);
  CHECK(cfg2.depth == cfg.depth);
  CHECK(cfg2.hidden_dim == cfg.hidden_dim);
  CHECK(cfg2.embed_dim == cfg.embed_dim);

  auto a = parameter_arrays(params);
  auto b = parameter_arrays(params2);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].name == b[i].name);
    REQUIRE(a[i].size == b[i].size);
    for (std::int64_t j = 0; j < a[i].size; ++j) {
      CHECK(a[i].data[j] == b[i].data[j]);
    }
  }

  // predictions survive the round trip bitwise
  std::vector<int> ids{2, 7, 4};
  auto t1 = forward_full(ids, params, cfg);
  auto t2 = forward_full(ids, params2, cfg2);
  for (int l = 0; l < cfg.depth; ++l) {
    for (size_t c = 0; c < t1.dists[l].probs.size(); ++c) {
      CHECK(t1.dists[l].probs[c] == t2.dists[l].probs[c]);
    }
  }
  fs::remove(path);
}

TEST_CASE("checkpoint header starts with the magic and config lines") {
  auto cfg = ckpt_config();
  auto params = init_parameters(cfg, 5);
  auto path = fs::temp_directory_path() / "elbert_ckpt_header.bin";
  save_checkpoint(path, cfg, params);
  const std::string content = read_file(path);
  CHECK(content.rfind("ELBERT1\ndepth=3\nhidden_dim=8\nnum_heads=2\nffn_dim=16\n"
                      "vocab_size=12\nmax_seq_len=5\nnum_classes=2\nembed_dim=4\n"
                      "arrays=22\n", 0) == 0);
  fs::remove(path);
}

TEST_CASE("serialized model bytes are depth invariant apart from exit_t") {
  auto path6 = fs::temp_directory_path() / "elbert_ckpt_d6.bin";
  auto path24 = fs::temp_directory_path() / "elbert_ckpt_d24.bin";
  save_checkpoint(path6, ckpt_config(6), init_parameters(ckpt_config(6), 9));
  save_checkpoint(path24, ckpt_config(24), init_parameters(ckpt_config(24), 9));

  auto sum_bytes = [](const fs::path& p) {
    std::uint64_t total = 0;
    for (const auto& [name, bytes] : inspect_checkpoint(p).array_bytes) {
      if (name != "exit_t") total += bytes;
    }
    return total;
  };
  CHECK(sum_bytes(path6) == sum_bytes(path24));

  auto exit_t_bytes = [](const fs::path& p) {
    for (const auto& [name, bytes] : inspect_checkpoint(p).array_bytes) {
      if (name == "exit_t") return bytes;
    }
    return std::uint64_t{0};
  };
  CHECK(exit_t_bytes(path6) == 5 * 8);
  CHECK(exit_t_bytes(path24) == 23 * 8);
  fs::remove(path6);
  fs::remove(path24);
}

TEST_CASE("loader rejects corrupted checkpoints") {
  auto cfg = ckpt_config();
  auto params = init_parameters(cfg, 8);
  auto path = fs::temp_directory_path() / "elbert_ckpt_bad.bin";

  save_checkpoint(path, cfg, params);
  {
    std::string content = read_file(path);
    content[0] = 'X';  // break the magic
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os << content;
  }
  CHECK_THROWS_AS(load_checkpoint(path), ParseError);

  save_checkpoint(path, cfg, params);
  {
    std::string content = read_file(path);
    content.resize(content.size() - 16);  // truncate the last array
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os << content;
  }
  CHECK_THROWS_AS(load_checkpoint(path), ParseError);

  CHECK_THROWS_AS(load_checkpoint(fs::temp_directory_path() / "missing.bin"), IoError);
  fs::remove(path);
}

TEST_CASE("atomic write never leaves a partial target") {
  auto path = fs::temp_directory_path() / "elbert_atomic.txt";
  atomic_write(path, [](std::ostream& os) { os << "first"; });
  CHECK(read_file(path) == "first");
  CHECK_THROWS_AS(
      atomic_write(path, [](std::ostream&) { throw IoError("simulated failure"); }),
      IoError);
  CHECK(read_file(path) == "first");  // old content intact
  fs::remove(path);
}
