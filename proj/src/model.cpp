#include "elbert/model.hpp"

#include <cmath>

namespace elbert {

namespace {

constexpr double kLayerNormEps = 1e-12;

double gelu(double x) {
  return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2));
}

/// y = gamma .* (x - mean) / sqrt(var + eps) + beta, per row.
Mat layer_norm(const Mat& x, const Vec& gamma, const Vec& beta, Mat* xhat_out,
               Vec* invstd_out) {
  const Eigen::Index rows = x.rows();
  const Eigen::Index cols = x.cols();
  Mat y(rows, cols);
  if (xhat_out) xhat_out->resize(rows, cols);
  if (invstd_out) invstd_out->resize(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const double mean = x.row(r).mean();
    const double var = (x.row(r).array() - mean).square().sum() / static_cast<double>(cols);
    const double invstd = 1.0 / std::sqrt(var + kLayerNormEps);
    for (Eigen::Index c = 0; c < cols; ++c) {
      const double xhat = (x(r, c) - mean) * invstd;
      if (xhat_out) (*xhat_out)(r, c) = xhat;
      y(r, c) = gamma(c) * xhat + beta(c);
    }
    if (invstd_out) (*invstd_out)(r) = invstd;
  }
  return y;
}

void softmax_rows_inplace(Mat& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const double mx = m.row(r).maxCoeff();
    m.row(r) = (m.row(r).array() - mx).exp();
    m.row(r) /= m.row(r).sum();
  }
}

}  // namespace

HiddenState embed(std::span<const int> token_ids, const Parameters& params,
                  const ModelConfig& cfg) {
  if (token_ids.empty()) throw InputError("embed: empty token sequence");
  if (static_cast<int>(token_ids.size()) > cfg.max_seq_len) {
    throw InputError("embed: sequence longer than max_seq_len");
  }
  const Eigen::Index s = static_cast<Eigen::Index>(token_ids.size());
  Mat looked_up(s, cfg.embed_dim);
  for (Eigen::Index i = 0; i < s; ++i) {
    const int id = token_ids[i];
    if (id < 0 || id >= cfg.vocab_size) {
      throw InputError("embed: token id " + std::to_string(id) +
                       " outside vocabulary of size " + std::to_string(cfg.vocab_size));
    }
    looked_up.row(i) = params.tok_embed.row(id);
  }
  HiddenState h;
  h.x.noalias() = looked_up * params.embed_proj;
  h.x += params.pos_embed.topRows(s);
  h.layer = 0;
  return h;
}

Mat encoder_forward(const Mat& h_in, const Parameters& params,
                    const ModelConfig& cfg, EncoderCache* cache,
                    AttentionTensor* attn_out) {
  const Eigen::Index s = h_in.rows();
  const int heads = cfg.num_heads;
  const int hd = cfg.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

  Mat q = (h_in * params.attn_wq).rowwise() + params.attn_bq.transpose();
  Mat k = (h_in * params.attn_wk).rowwise() + params.attn_bk.transpose();
  Mat v = (h_in * params.attn_wv).rowwise() + params.attn_bv.transpose();

  AttentionTensor attn(heads);
  Mat ctx(s, cfg.hidden_dim);
  for (int hh = 0; hh < heads; ++hh) {
    auto qh = q.middleCols(hh * hd, hd);
    auto kh = k.middleCols(hh * hd, hd);
    auto vh = v.middleCols(hh * hd, hd);
    Mat scores = (qh * kh.transpose()) * scale;
    softmax_rows_inplace(scores);
    ctx.middleCols(hh * hd, hd).noalias() = scores * vh;
    attn[hh] = std::move(scores);
  }

  Mat attn_proj = (ctx * params.attn_wo).rowwise() + params.attn_bo.transpose();
  Mat res1 = h_in + attn_proj;
  Mat ln1_xhat;
  Vec ln1_invstd;
  Mat u = layer_norm(res1, params.ln1_gamma, params.ln1_beta,
                     cache ? &ln1_xhat : nullptr, cache ? &ln1_invstd : nullptr);

  Mat ffn_pre = (u * params.ffn_w1).rowwise() + params.ffn_b1.transpose();
  Mat ffn_act = ffn_pre.unaryExpr([](double x) { return gelu(x); });
  Mat res2 = u + ((ffn_act * params.ffn_w2).rowwise() + params.ffn_b2.transpose());
  Mat ln2_xhat;
  Vec ln2_invstd;
  Mat h_out = layer_norm(res2, params.ln2_gamma, params.ln2_beta,
                         cache ? &ln2_xhat : nullptr, cache ? &ln2_invstd : nullptr);

  if (attn_out) {
    if (cache) *attn_out = attn;
    else *attn_out = std::move(attn);
  }
  if (cache) {
    cache->h_in = h_in;
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->attn = std::move(attn);
    cache->ctx = std::move(ctx);
    cache->res1 = std::move(res1);
    cache->ln1_xhat = std::move(ln1_xhat);
    cache->ln1_invstd = std::move(ln1_invstd);
    cache->u = std::move(u);
    cache->ffn_pre = std::move(ffn_pre);
    cache->ffn_act = std::move(ffn_act);
    cache->res2 = std::move(res2);
    cache->ln2_xhat = std::move(ln2_xhat);
    cache->ln2_invstd = std::move(ln2_invstd);
    cache->h_out = h_out;
  }
  return h_out;
}

std::pair<HiddenState, AttentionTensor> encoder_step(const HiddenState& h,
                                                     const Parameters& params,
                                                     const ModelConfig& cfg) {
  if (h.layer >= cfg.depth) {
    throw UsageError("encoder_step: layer index " + std::to_string(h.layer) +
                     " already at depth " + std::to_string(cfg.depth));
  }
  HiddenState next;
  AttentionTensor attn;
  next.x = encoder_forward(h.x, params, cfg, nullptr, &attn);
  next.layer = h.layer + 1;
  if (!next.x.allFinite()) {
    throw NumericError("non-finite activations after encoder pass", next.layer);
  }
  return {std::move(next), std::move(attn)};
}

ClassifierOutput classify_detail(const Mat& h, int layer, const Parameters& params) {
  Vec logits = params.cls_w.transpose() * h.row(0).transpose();
  logits += params.cls_b;
  const double mx = logits.maxCoeff();
  Vec e = (logits.array() - mx).exp();
  const double sum = e.sum();
  ClassifierOutput out;
  out.logits = std::move(logits);
  out.dist.layer = layer;
  out.dist.probs.resize(e.size());
  for (Eigen::Index i = 0; i < e.size(); ++i) out.dist.probs[i] = e(i) / sum;
  return out;
}

ProbDist classify(const HiddenState& h, const Parameters& params) {
  return classify_detail(h.x, h.layer, params).dist;
}

LayerTrace forward_full(std::span<const int> token_ids, const Parameters& params,
                        const ModelConfig& cfg) {
  LayerTrace trace;
  trace.token_ids.assign(token_ids.begin(), token_ids.end());
  HiddenState h = embed(token_ids, params, cfg);
  for (int i = 1; i <= cfg.depth; ++i) {
    auto [next, attn] = encoder_step(h, params, cfg);
    h = std::move(next);
    trace.dists.push_back(classify(h, params));
    trace.attns.push_back(std::move(attn));
  }
  return trace;
}

AdaptiveResult forward_adaptive(std::span<const int> token_ids,
                                const Parameters& params, const ModelConfig& cfg,
                                const ExitConfig& exit_cfg) {
  exit_cfg.validate();
  AdaptiveResult result;
  result.trace.token_ids.assign(token_ids.begin(), token_ids.end());
  ExitEngine engine(exit_cfg);
  HiddenState h = embed(token_ids, params, cfg);
  ExitDecision decision{false, 0, ExitReason::kExhausted};
  for (int i = 1; i <= cfg.depth; ++i) {
    auto [next, attn] = encoder_step(h, params, cfg);
    h = std::move(next);
    ProbDist dist = classify(h, params);
    decision = engine.observe(dist);
    result.trace.dists.push_back(std::move(dist));
    result.trace.attns.push_back(std::move(attn));
    if (decision.fired) break;
  }
  if (!decision.fired) decision.layer = cfg.depth;
  result.decision = decision;
  result.predicted_label = result.trace.dists.back().predicted_label();
  return result;
}

FlopsEstimate flops_estimate(const ModelConfig& cfg) {
  cfg.validate();
  const double s = cfg.max_seq_len;
  const double d = cfg.hidden_dim;
  const double f = cfg.ffn_dim;
  const double c = cfg.num_classes;
  FlopsEstimate est;
  // Query/key/value/output projections, score and context products, FFN.
  est.encoder_pass_macs = 4.0 * s * d * d + 2.0 * s * s * d + 2.0 * s * d * f;
  est.classifier_macs = d * c;
  return est;
}

}  // namespace elbert
