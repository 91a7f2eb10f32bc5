#include "elbert/training.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <sstream>

#include "elbert/rng.hpp"

namespace elbert {

namespace {

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

double sigmoid_prime(double t) {
  const double s = sigmoid(t);
  return s * (1.0 - s);
}

double gelu_prime(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
  const double pdf = std::exp(-0.5 * x * x) * 0.3989422804014327;
  return cdf + x * pdf;
}

}  // namespace

double exit_loss(const ProbDist& p, int gold) {
  validate_prob_dist(p);
  if (gold < 0 || gold >= p.num_classes()) {
    throw InputError("gold label " + std::to_string(gold) + " outside [0, " +
                     std::to_string(p.num_classes()) + ")");
  }
  const double raw = -std::log(p.probs[gold]);
  return std::min(raw, kLossCeiling);  // -log(0) = inf caps cleanly
}

std::vector<double> layer_weights(std::span<const double> t, int depth) {
  if (depth < 1) throw ConfigError("depth must be >= 1");
  if (static_cast<int>(t.size()) != depth - 1) {
    throw UsageError("expected " + std::to_string(depth - 1) +
                     " exit-weight variables, got " + std::to_string(t.size()));
  }
  std::vector<double> w(depth);
  double sum = 0.0;
  for (int i = 0; i + 1 < depth; ++i) {
    w[i] = sigmoid(t[i]);
    sum += w[i];
  }
  w[depth - 1] = static_cast<double>(depth) - sum;
  return w;
}

LossReport total_loss(const LayerTrace& trace, int gold, std::span<const double> t,
                      int depth) {
  if (trace.executed_layers() != depth) {
    throw UsageError("total_loss requires a full-depth trace (" +
                     std::to_string(trace.executed_layers()) + " of " +
                     std::to_string(depth) + " layers)");
  }
  LossReport report;
  report.weights = layer_weights(t, depth);
  report.layer_losses.resize(depth);
  report.total = 0.0;
  for (int i = 0; i < depth; ++i) {
    report.layer_losses[i] = exit_loss(trace.dists[i], gold);
    report.total += report.weights[i] * report.layer_losses[i];
  }
  return report;
}

namespace {

/// All per-layer activations of one training forward (always full depth).
struct SampleForward {
  Mat looked_up;  // seq x embed_dim token rows
  Mat h0;
  std::vector<EncoderCache> layers;
  std::vector<ClassifierOutput> taps;
};

SampleForward forward_training(const Parameters& params, const ModelConfig& cfg,
                               const EncodedExample& ex) {
  SampleForward fwd;
  HiddenState h = embed(ex.ids, params, cfg);
  const Eigen::Index s = h.x.rows();
  fwd.looked_up.resize(s, cfg.embed_dim);
  for (Eigen::Index i = 0; i < s; ++i) {
    fwd.looked_up.row(i) = params.tok_embed.row(ex.ids[i]);
  }
  fwd.h0 = std::move(h.x);
  fwd.layers.resize(cfg.depth);
  fwd.taps.reserve(cfg.depth);
  const Mat* cur = &fwd.h0;
  for (int i = 0; i < cfg.depth; ++i) {
    encoder_forward(*cur, params, cfg, &fwd.layers[i], nullptr);
    cur = &fwd.layers[i].h_out;
    if (!cur->allFinite()) {
      throw NumericError("non-finite activations in training forward", i + 1);
    }
    fwd.taps.push_back(classify_detail(*cur, i + 1, params));
  }
  return fwd;
}

/// dy -> dx for y = gamma .* xhat + beta, accumulating gamma/beta grads.
Mat layer_norm_backward(const Mat& dy, const Mat& xhat, const Vec& invstd,
                        const Vec& gamma, Vec& g_gamma, Vec& g_beta) {
  const Eigen::Index rows = dy.rows();
  const Eigen::Index cols = dy.cols();
  Mat dx(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    double mean_dxhat = 0.0;
    double mean_dxhat_xhat = 0.0;
    for (Eigen::Index c = 0; c < cols; ++c) {
      const double dxhat = dy(r, c) * gamma(c);
      mean_dxhat += dxhat;
      mean_dxhat_xhat += dxhat * xhat(r, c);
      g_gamma(c) += dy(r, c) * xhat(r, c);
      g_beta(c) += dy(r, c);
    }
    mean_dxhat /= static_cast<double>(cols);
    mean_dxhat_xhat /= static_cast<double>(cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
      const double dxhat = dy(r, c) * gamma(c);
      dx(r, c) = invstd(r) * (dxhat - mean_dxhat - xhat(r, c) * mean_dxhat_xhat);
    }
  }
  return dx;
}

/// dh_out -> dh_in through one shared-block application, accumulating all
/// block parameter gradients.
Mat encoder_backward(const Mat& dh_out, const EncoderCache& cache,
                     const Parameters& params, const ModelConfig& cfg,
                     Parameters& g) {
  const int heads = cfg.num_heads;
  const int hd = cfg.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  const Eigen::Index s = dh_out.rows();

  Mat dres2 = layer_norm_backward(dh_out, cache.ln2_xhat, cache.ln2_invstd,
                                  params.ln2_gamma, g.ln2_gamma, g.ln2_beta);

  // res2 = u + gelu(u*W1 + b1)*W2 + b2
  Mat du = dres2;
  g.ffn_w2.noalias() += cache.ffn_act.transpose() * dres2;
  g.ffn_b2 += dres2.colwise().sum().transpose();
  Mat dact = dres2 * params.ffn_w2.transpose();
  Mat dpre = (dact.array() *
              cache.ffn_pre.unaryExpr([](double x) { return gelu_prime(x); }).array())
                 .matrix();
  g.ffn_w1.noalias() += cache.u.transpose() * dpre;
  g.ffn_b1 += dpre.colwise().sum().transpose();
  du.noalias() += dpre * params.ffn_w1.transpose();

  Mat dres1 = layer_norm_backward(du, cache.ln1_xhat, cache.ln1_invstd,
                                  params.ln1_gamma, g.ln1_gamma, g.ln1_beta);

  // res1 = h_in + ctx*Wo + bo
  Mat dh_in = dres1;
  g.attn_wo.noalias() += cache.ctx.transpose() * dres1;
  g.attn_bo += dres1.colwise().sum().transpose();
  Mat dctx = dres1 * params.attn_wo.transpose();

  Mat dq = Mat::Zero(s, cfg.hidden_dim);
  Mat dk = Mat::Zero(s, cfg.hidden_dim);
  Mat dv = Mat::Zero(s, cfg.hidden_dim);
  for (int hh = 0; hh < heads; ++hh) {
    const Mat& attn = cache.attn[hh];
    auto vh = cache.v.middleCols(hh * hd, hd);
    auto qh = cache.q.middleCols(hh * hd, hd);
    auto kh = cache.k.middleCols(hh * hd, hd);
    Mat dctx_h = dctx.middleCols(hh * hd, hd);

    Mat dattn = dctx_h * vh.transpose();
    dv.middleCols(hh * hd, hd).noalias() += attn.transpose() * dctx_h;

    // softmax rows: ds = a .* (da - <da, a>)
    Mat dscores(s, s);
    for (Eigen::Index r = 0; r < s; ++r) {
      const double dot = dattn.row(r).cwiseProduct(attn.row(r)).sum();
      dscores.row(r) =
          (attn.row(r).array() * (dattn.row(r).array() - dot)).matrix();
    }
    dscores *= scale;
    dq.middleCols(hh * hd, hd).noalias() += dscores * kh;
    dk.middleCols(hh * hd, hd).noalias() += dscores.transpose() * qh;
  }

  g.attn_wq.noalias() += cache.h_in.transpose() * dq;
  g.attn_bq += dq.colwise().sum().transpose();
  dh_in.noalias() += dq * params.attn_wq.transpose();
  g.attn_wk.noalias() += cache.h_in.transpose() * dk;
  g.attn_bk += dk.colwise().sum().transpose();
  dh_in.noalias() += dk * params.attn_wk.transpose();
  g.attn_wv.noalias() += cache.h_in.transpose() * dv;
  g.attn_bv += dv.colwise().sum().transpose();
  dh_in.noalias() += dv * params.attn_wv.transpose();
  return dh_in;
}

/// Accumulates scale * d(total loss)/d(params) for one sample.
/// Returns the per-layer (clipped) losses.
std::vector<double> sample_gradients(const Parameters& params, const ModelConfig& cfg,
                                     const EncodedExample& ex,
                                     std::span<const double> weights, double scale,
                                     Parameters& g) {
  SampleForward fwd = forward_training(params, cfg, ex);
  const int depth = cfg.depth;
  const Eigen::Index s = fwd.h0.rows();

  std::vector<double> losses(depth);
  std::vector<Vec> dlogits(depth);
  for (int i = 0; i < depth; ++i) {
    const ProbDist& dist = fwd.taps[i].dist;
    losses[i] = exit_loss(dist, ex.label);
    Vec dl = Vec::Zero(cfg.num_classes);
    if (losses[i] < kLossCeiling) {  // capped taps sit on a flat region
      for (int c = 0; c < cfg.num_classes; ++c) dl(c) = dist.probs[c];
      dl(ex.label) -= 1.0;
      dl *= weights[i] * scale;
    }
    dlogits[i] = std::move(dl);
  }

  Mat dh = Mat::Zero(s, cfg.hidden_dim);
  for (int i = depth - 1; i >= 0; --i) {
    const Mat& h_out = fwd.layers[i].h_out;
    g.cls_w.noalias() += h_out.row(0).transpose() * dlogits[i].transpose();
    g.cls_b += dlogits[i];
    dh.row(0) += (params.cls_w * dlogits[i]).transpose();
    dh = encoder_backward(dh, fwd.layers[i], params, cfg, g);
  }

  // Embedding: h0 = looked_up * embed_proj + pos_embed rows.
  g.pos_embed.topRows(s) += dh;
  g.embed_proj.noalias() += fwd.looked_up.transpose() * dh;
  Mat dlooked = dh * params.embed_proj.transpose();
  for (Eigen::Index i = 0; i < s; ++i) {
    g.tok_embed.row(ex.ids[i]) += dlooked.row(i);
  }

  // dL/dt_i = sigmoid'(t_i) * (L_i - L_M); the losses are constants here.
  for (int j = 0; j + 1 < depth; ++j) {
    g.exit_t(j) += scale * sigmoid_prime(params.exit_t(j)) *
                   (losses[j] - losses[depth - 1]);
  }
  return losses;
}

void set_zero(Parameters& p) {
  for (auto& a : parameter_arrays(p)) {
    std::fill(a.data, a.data + a.size, 0.0);
  }
}

}  // namespace

LossReport batch_gradients(const Parameters& params, const ModelConfig& cfg,
                           std::span<const EncodedExample> batch, Parameters& grads) {
  if (batch.empty()) throw InputError("empty batch");
  std::vector<double> t(params.exit_t.data(), params.exit_t.data() + params.exit_t.size());
  LossReport report;
  report.weights = layer_weights(t, cfg.depth);
  report.layer_losses.assign(cfg.depth, 0.0);
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (const auto& ex : batch) {
    auto losses = sample_gradients(params, cfg, ex, report.weights, scale, grads);
    for (int i = 0; i < cfg.depth; ++i) report.layer_losses[i] += losses[i];
  }
  for (int i = 0; i < cfg.depth; ++i) {
    report.layer_losses[i] *= scale;
    report.total += report.weights[i] * report.layer_losses[i];
  }
  return report;
}

AdamOptimizer::AdamOptimizer(const Parameters& like, double learning_rate,
                             double beta1, double beta2, double epsilon)
    : lr_(learning_rate),
      beta1_(beta1),
      beta2_(beta2),
      eps_(epsilon),
      m_(zeros_like(like)),
      v_(zeros_like(like)) {}

void AdamOptimizer::step(Parameters& params, const Parameters& grads) {
  ++steps_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  auto pa = parameter_arrays(params);
  auto ga = parameter_arrays(grads);
  auto ma = parameter_arrays(m_);
  auto va = parameter_arrays(v_);
  for (size_t a = 0; a < pa.size(); ++a) {
    double* p = pa[a].data;
    const double* grad = ga[a].data;
    double* m = ma[a].data;
    double* v = va[a].data;
    for (std::int64_t i = 0; i < pa[a].size; ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * grad[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * grad[i] * grad[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

TrainResult train(const std::vector<EncodedExample>& dataset, Parameters params,
                  const ModelConfig& cfg, const TrainConfig& tcfg) {
  cfg.validate();
  tcfg.validate();
  if (dataset.empty()) throw InputError("empty training dataset");
  for (const auto& ex : dataset) {
    if (ex.label < 0 || ex.label >= cfg.num_classes) {
      throw InputError("training label " + std::to_string(ex.label) +
                       " outside [0, " + std::to_string(cfg.num_classes) + ")");
    }
  }

  const int n = static_cast<int>(dataset.size());
  AdamOptimizer opt(params, tcfg.learning_rate);
  Rng shuffle_rng(tcfg.seed);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Parameters grads = zeros_like(params);

  TrainResult result;
  bool warned_negative_wm = false;
  for (int epoch = 1; epoch <= tcfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    std::vector<double> layer_sums(cfg.depth, 0.0);
    std::vector<EncodedExample> batch;
    for (int start = 0; start < n; start += tcfg.batch_size) {
      const int end = std::min(n, start + tcfg.batch_size);
      batch.clear();
      for (int i = start; i < end; ++i) batch.push_back(dataset[order[i]]);
      set_zero(grads);
      LossReport report = batch_gradients(params, cfg, batch, grads);
      opt.step(params, grads);
      const double bsz = static_cast<double>(end - start);
      loss_sum += report.total * bsz;
      for (int i = 0; i < cfg.depth; ++i) layer_sums[i] += report.layer_losses[i] * bsz;
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.mean_loss = loss_sum / n;
    m.layer_losses.resize(cfg.depth);
    for (int i = 0; i < cfg.depth; ++i) m.layer_losses[i] = layer_sums[i] / n;
    std::vector<double> t(params.exit_t.data(), params.exit_t.data() + params.exit_t.size());
    m.weights = layer_weights(t, cfg.depth);
    if (!warned_negative_wm && m.weights.back() < 0.0) {
      std::cerr << "warning: final-layer loss weight went negative ("
                << m.weights.back() << ") at epoch " << epoch << "\n";
      warned_negative_wm = true;
    }
    result.history.push_back(std::move(m));
  }
  result.params = std::move(params);
  return result;
}

std::string metrics_csv(const std::vector<EpochMetrics>& history, int depth) {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,mean_loss";
  for (int i = 1; i <= depth; ++i) os << ",loss_l" << i;
  for (int i = 1; i <= depth; ++i) os << ",w" << i;
  os << "\n";
  for (const auto& m : history) {
    os << m.epoch << "," << m.mean_loss;
    for (double v : m.layer_losses) os << "," << v;
    for (double v : m.weights) os << "," << v;
    os << "\n";
  }
  return os.str();
}

double gradient_audit(const Parameters& params, const ModelConfig& cfg,
                      const EncodedExample& sample, double h, int min_coords,
                      std::uint64_t seed) {
  if (!(h > 0.0)) throw ConfigError("perturbation h must be positive");

  Parameters grads = zeros_like(params);
  std::vector<EncodedExample> one{sample};
  batch_gradients(params, cfg, one, grads);

  Parameters work = params;  // perturbed in place, coordinate by coordinate
  auto loss_at = [&]() {
    SampleForward fwd = forward_training(work, cfg, sample);
    std::vector<double> t(work.exit_t.data(), work.exit_t.data() + work.exit_t.size());
    auto w = layer_weights(t, cfg.depth);
    double total = 0.0;
    for (int i = 0; i < cfg.depth; ++i) {
      total += w[i] * exit_loss(fwd.taps[i].dist, sample.label);
    }
    return total;
  };

  auto work_arrays = parameter_arrays(work);
  auto grad_arrays = parameter_arrays(grads);
  std::int64_t total_size = 0;
  for (const auto& a : work_arrays) total_size += a.size;

  // Flat coordinate ids: every exit_t entry first, then random draws.
  std::vector<std::int64_t> coords;
  std::int64_t exit_t_offset = 0;
  for (const auto& a : work_arrays) {
    if (a.name == "exit_t") break;
    exit_t_offset += a.size;
  }
  for (std::int64_t i = 0; i < params.exit_t.size(); ++i) {
    coords.push_back(exit_t_offset + i);
  }
  Rng rng(seed);
  const std::int64_t want = static_cast<std::int64_t>(min_coords) + params.exit_t.size();
  while (static_cast<std::int64_t>(coords.size()) < want) {
    coords.push_back(static_cast<std::int64_t>(rng.below(static_cast<uint64_t>(total_size))));
  }

  auto locate = [&](std::int64_t flat) -> std::pair<double*, double*> {
    for (size_t a = 0; a < work_arrays.size(); ++a) {
      if (flat < work_arrays[a].size) {
        return {work_arrays[a].data + flat, grad_arrays[a].data + flat};
      }
      flat -= work_arrays[a].size;
    }
    throw UsageError("flat coordinate out of range");
  };

  double worst = 0.0;
  for (std::int64_t flat : coords) {
    auto [wp, gp] = locate(flat);
    const double saved = *wp;
    *wp = saved + h;
    const double plus = loss_at();
    *wp = saved - h;
    const double minus = loss_at();
    *wp = saved;
    const double numeric = (plus - minus) / (2.0 * h);
    const double analytic = *gp;
    const double err = std::abs(analytic - numeric) /
                       std::max({std::abs(analytic), std::abs(numeric), 1e-4});
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace elbert
