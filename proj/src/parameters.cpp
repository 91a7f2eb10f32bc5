#include "elbert/parameters.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "elbert/io.hpp"
#include "elbert/rng.hpp"

namespace elbert {

namespace {

constexpr double kInitStd = 0.02;
constexpr char kMagic[] = "ELBERT1";

void fill_normal(Mat& m, Rng& rng, double stddev) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      m(i, j) = rng.normal(0.0, stddev);
    }
  }
}

}  // namespace

namespace {

Parameters allocate_parameters(const ModelConfig& cfg) {
  Parameters p;
  const int d = cfg.hidden_dim;
  p.tok_embed = Mat::Zero(cfg.vocab_size, cfg.embed_dim);
  p.embed_proj = Mat::Zero(cfg.embed_dim, d);
  p.pos_embed = Mat::Zero(cfg.max_seq_len, d);
  p.attn_wq = Mat::Zero(d, d);
  p.attn_wk = Mat::Zero(d, d);
  p.attn_wv = Mat::Zero(d, d);
  p.attn_wo = Mat::Zero(d, d);
  p.attn_bq = Vec::Zero(d);
  p.attn_bk = Vec::Zero(d);
  p.attn_bv = Vec::Zero(d);
  p.attn_bo = Vec::Zero(d);
  p.ln1_gamma = Vec::Ones(d);
  p.ln1_beta = Vec::Zero(d);
  p.ffn_w1 = Mat::Zero(d, cfg.ffn_dim);
  p.ffn_b1 = Vec::Zero(cfg.ffn_dim);
  p.ffn_w2 = Mat::Zero(cfg.ffn_dim, d);
  p.ffn_b2 = Vec::Zero(d);
  p.ln2_gamma = Vec::Ones(d);
  p.ln2_beta = Vec::Zero(d);
  p.cls_w = Mat::Zero(d, cfg.num_classes);
  p.cls_b = Vec::Zero(cfg.num_classes);
  p.exit_t = Vec::Zero(cfg.depth - 1);
  return p;
}

}  // namespace

Parameters init_parameters(const ModelConfig& cfg, uint64_t seed, double t_init) {
  cfg.validate();
  Parameters p = allocate_parameters(cfg);

  // Weight draws depend only on array shapes, never on depth, so two
  // configs differing only in depth share every model weight bit for bit.
  Rng rng(seed);
  fill_normal(p.tok_embed, rng, kInitStd);
  fill_normal(p.embed_proj, rng, kInitStd);
  fill_normal(p.pos_embed, rng, kInitStd);
  fill_normal(p.attn_wq, rng, kInitStd);
  fill_normal(p.attn_wk, rng, kInitStd);
  fill_normal(p.attn_wv, rng, kInitStd);
  fill_normal(p.attn_wo, rng, kInitStd);
  fill_normal(p.ffn_w1, rng, kInitStd);
  fill_normal(p.ffn_w2, rng, kInitStd);
  fill_normal(p.cls_w, rng, kInitStd);

  p.exit_t = Vec::Constant(cfg.depth - 1, t_init);
  return p;
}

Parameters zeros_like(const Parameters& like) {
  Parameters z;
  Parameters& out = z;
  out.tok_embed = Mat::Zero(like.tok_embed.rows(), like.tok_embed.cols());
  out.embed_proj = Mat::Zero(like.embed_proj.rows(), like.embed_proj.cols());
  out.pos_embed = Mat::Zero(like.pos_embed.rows(), like.pos_embed.cols());
  out.attn_wq = Mat::Zero(like.attn_wq.rows(), like.attn_wq.cols());
  out.attn_wk = Mat::Zero(like.attn_wk.rows(), like.attn_wk.cols());
  out.attn_wv = Mat::Zero(like.attn_wv.rows(), like.attn_wv.cols());
  out.attn_wo = Mat::Zero(like.attn_wo.rows(), like.attn_wo.cols());
  out.attn_bq = Vec::Zero(like.attn_bq.size());
  out.attn_bk = Vec::Zero(like.attn_bk.size());
  out.attn_bv = Vec::Zero(like.attn_bv.size());
  out.attn_bo = Vec::Zero(like.attn_bo.size());
  out.ln1_gamma = Vec::Zero(like.ln1_gamma.size());
  out.ln1_beta = Vec::Zero(like.ln1_beta.size());
  out.ffn_w1 = Mat::Zero(like.ffn_w1.rows(), like.ffn_w1.cols());
  out.ffn_b1 = Vec::Zero(like.ffn_b1.size());
  out.ffn_w2 = Mat::Zero(like.ffn_w2.rows(), like.ffn_w2.cols());
  out.ffn_b2 = Vec::Zero(like.ffn_b2.size());
  out.ln2_gamma = Vec::Zero(like.ln2_gamma.size());
  out.ln2_beta = Vec::Zero(like.ln2_beta.size());
  out.cls_w = Mat::Zero(like.cls_w.rows(), like.cls_w.cols());
  out.cls_b = Vec::Zero(like.cls_b.size());
  out.exit_t = Vec::Zero(like.exit_t.size());
  return z;
}

std::vector<ArrayRef> parameter_arrays(Parameters& p) {
  return {
      {"tok_embed", p.tok_embed.data(), p.tok_embed.size()},
      {"embed_proj", p.embed_proj.data(), p.embed_proj.size()},
      {"pos_embed", p.pos_embed.data(), p.pos_embed.size()},
      {"attn_wq", p.attn_wq.data(), p.attn_wq.size()},
      {"attn_bq", p.attn_bq.data(), p.attn_bq.size()},
      {"attn_wk", p.attn_wk.data(), p.attn_wk.size()},
      {"attn_bk", p.attn_bk.data(), p.attn_bk.size()},
      {"attn_wv", p.attn_wv.data(), p.attn_wv.size()},
      {"attn_bv", p.attn_bv.data(), p.attn_bv.size()},
      {"attn_wo", p.attn_wo.data(), p.attn_wo.size()},
      {"attn_bo", p.attn_bo.data(), p.attn_bo.size()},
      {"ln1_gamma", p.ln1_gamma.data(), p.ln1_gamma.size()},
      {"ln1_beta", p.ln1_beta.data(), p.ln1_beta.size()},
      {"ffn_w1", p.ffn_w1.data(), p.ffn_w1.size()},
      {"ffn_b1", p.ffn_b1.data(), p.ffn_b1.size()},
      {"ffn_w2", p.ffn_w2.data(), p.ffn_w2.size()},
      {"ffn_b2", p.ffn_b2.data(), p.ffn_b2.size()},
      {"ln2_gamma", p.ln2_gamma.data(), p.ln2_gamma.size()},
      {"ln2_beta", p.ln2_beta.data(), p.ln2_beta.size()},
      {"cls_w", p.cls_w.data(), p.cls_w.size()},
      {"cls_b", p.cls_b.data(), p.cls_b.size()},
      {"exit_t", p.exit_t.data(), p.exit_t.size()},
  };
}

std::vector<ArrayRef> parameter_arrays(const Parameters& p) {
  return parameter_arrays(const_cast<Parameters&>(p));
}

std::int64_t parameter_count(const Parameters& p, bool include_exit_t) {
  std::int64_t n = 0;
  for (const auto& a : parameter_arrays(p)) {
    if (!include_exit_t && a.name == "exit_t") continue;
    n += a.size;
  }
  return n;
}

bool all_finite(const Parameters& p) {
  for (const auto& a : parameter_arrays(p)) {
    for (std::int64_t i = 0; i < a.size; ++i) {
      if (!std::isfinite(a.data[i])) return false;
    }
  }
  return true;
}

namespace {

void write_f64_le(std::ostream& os, const double* v, std::int64_t n) {
  std::vector<unsigned char> buf(static_cast<size_t>(n) * 8);
  for (std::int64_t i = 0; i < n; ++i) {
    uint64_t bits;
    std::memcpy(&bits, &v[i], 8);
    for (int b = 0; b < 8; ++b) {
      buf[static_cast<size_t>(i) * 8 + b] = static_cast<unsigned char>((bits >> (8 * b)) & 0xff);
    }
  }
  os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

void read_f64_le(std::istream& is, double* v, std::int64_t n) {
  std::vector<unsigned char> buf(static_cast<size_t>(n) * 8);
  is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (is.gcount() != static_cast<std::streamsize>(buf.size())) {
    throw ParseError("checkpoint truncated inside an array payload");
  }
  for (std::int64_t i = 0; i < n; ++i) {
    uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
      bits |= static_cast<uint64_t>(buf[static_cast<size_t>(i) * 8 + b]) << (8 * b);
    }
    std::memcpy(&v[i], &bits, 8);
  }
}

// Config lines in fixed order; the loader accepts them in any order but
// the writer always emits this sequence.
void write_header(std::ostream& os, const ModelConfig& cfg, int num_arrays) {
  os << kMagic << "\n";
  os << "depth=" << cfg.depth << "\n";
  os << "hidden_dim=" << cfg.hidden_dim << "\n";
  os << "num_heads=" << cfg.num_heads << "\n";
  os << "ffn_dim=" << cfg.ffn_dim << "\n";
  os << "vocab_size=" << cfg.vocab_size << "\n";
  os << "max_seq_len=" << cfg.max_seq_len << "\n";
  os << "num_classes=" << cfg.num_classes << "\n";
  os << "embed_dim=" << cfg.embed_dim << "\n";
  os << "arrays=" << num_arrays << "\n";
}

ModelConfig parse_header(std::istream& is, int* num_arrays) {
  std::string line;
  if (!std::getline(is, line) || line != kMagic) {
    throw ParseError("not a checkpoint: missing ELBERT1 magic");
  }
  std::map<std::string, long> kv;
  while (std::getline(is, line)) {
    auto pos = line.find('=');
    if (pos == std::string::npos) throw ParseError("bad header line: " + line);
    std::string key = line.substr(0, pos);
    long value = 0;
    try {
      value = std::stol(line.substr(pos + 1));
    } catch (const std::exception&) {
      throw ParseError("non-integer header value: " + line);
    }
    kv[key] = value;
    if (key == "arrays") break;
  }
  const char* required[] = {"depth",      "hidden_dim",  "num_heads",
                            "ffn_dim",    "vocab_size",  "max_seq_len",
                            "num_classes", "embed_dim",  "arrays"};
  for (const char* k : required) {
    if (!kv.count(k)) throw ParseError(std::string("missing header field: ") + k);
  }
  ModelConfig cfg;
  cfg.depth = static_cast<int>(kv["depth"]);
  cfg.hidden_dim = static_cast<int>(kv["hidden_dim"]);
  cfg.num_heads = static_cast<int>(kv["num_heads"]);
  cfg.ffn_dim = static_cast<int>(kv["ffn_dim"]);
  cfg.vocab_size = static_cast<int>(kv["vocab_size"]);
  cfg.max_seq_len = static_cast<int>(kv["max_seq_len"]);
  cfg.num_classes = static_cast<int>(kv["num_classes"]);
  cfg.embed_dim = static_cast<int>(kv["embed_dim"]);
  cfg.validate();
  *num_arrays = static_cast<int>(kv["arrays"]);
  return cfg;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg,
                     const Parameters& params) {
  auto arrays = parameter_arrays(params);
  atomic_write(
      path,
      [&](std::ostream& os) {
        write_header(os, cfg, static_cast<int>(arrays.size()));
        for (const auto& a : arrays) {
          os << a.name << " " << a.size << "\n";
          write_f64_le(os, a.data, a.size);
        }
      },
      /*binary=*/true);
}

std::pair<ModelConfig, Parameters> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path.string());
  int num_arrays = 0;
  ModelConfig cfg = parse_header(is, &num_arrays);
  Parameters params = allocate_parameters(cfg);
  auto arrays = parameter_arrays(params);
  if (num_arrays != static_cast<int>(arrays.size())) {
    throw ParseError("unexpected array count: " + std::to_string(num_arrays));
  }
  for (auto& a : arrays) {
    std::string line;
    if (!std::getline(is, line)) throw ParseError("checkpoint truncated before array " + a.name);
    std::istringstream ls(line);
    std::string name;
    std::int64_t count = -1;
    ls >> name >> count;
    if (name != a.name || count != a.size) {
      throw ParseError("array mismatch: expected " + a.name + " " +
                       std::to_string(a.size) + ", got " + line);
    }
    read_f64_le(is, a.data, a.size);
  }
  if (is.peek() != EOF) throw ParseError("trailing bytes after the last array");
  if (!all_finite(params)) throw ParseError("checkpoint contains non-finite values");
  return {cfg, std::move(params)};
}

CheckpointInfo inspect_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path.string());
  int num_arrays = 0;
  CheckpointInfo info;
  info.cfg = parse_header(is, &num_arrays);
  for (int i = 0; i < num_arrays; ++i) {
    std::string line;
    if (!std::getline(is, line)) throw ParseError("checkpoint truncated in array table");
    std::istringstream ls(line);
    std::string name;
    std::int64_t count = -1;
    ls >> name >> count;
    if (name.empty() || count < 0) throw ParseError("bad array line: " + line);
    info.array_bytes.emplace_back(name, static_cast<std::uint64_t>(count) * 8);
    is.seekg(count * 8, std::ios::cur);
    if (!is) throw ParseError("checkpoint truncated inside array " + name);
  }
  return info;
}

}  // namespace elbert
