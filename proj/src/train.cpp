#include <cmath>
#include <string>

#include "depthprune/error.hpp"
#include "depthprune/toy_model.hpp"
#include "model_ops.hpp"

namespace depthprune {

namespace {

struct NormCache {
  Matrix x;
  Eigen::VectorXd r;
};

struct LayerCache {
  NormCache n1;
  Matrix a, q, k, v;
  std::vector<Matrix> probs;  // per head, T x T
  Matrix o;
  NormCache n2;
  Matrix b, u, act;
};

Matrix norm_forward(const Matrix& x, const RowVector& g, double eps, NormCache& c) {
  c.x = x;
  c.r = detail::rms_inverse(x, eps);
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index t = 0; t < x.rows(); ++t) y.row(t) = (x.row(t) * c.r[t]).cwiseProduct(g);
  return y;
}

/// Backward of y = g * x * r(x). Accumulates dg, returns dx.
Matrix norm_backward(const NormCache& c, const RowVector& g, const Matrix& dy, RowVector& dg) {
  const double d = static_cast<double>(c.x.cols());
  Matrix dx(c.x.rows(), c.x.cols());
  for (Eigen::Index t = 0; t < c.x.rows(); ++t) {
    const double r = c.r[t];
    dg += dy.row(t).cwiseProduct(c.x.row(t)) * r;
    const RowVector gdy = dy.row(t).cwiseProduct(g);
    const double proj = gdy.dot(c.x.row(t));
    dx.row(t) = r * gdy - (r * r * r / d) * proj * c.x.row(t);
  }
  return dx;
}

ToyModel zeros_like(const ToyModel& m) {
  ToyModel z = m;
  for (auto& ref : parameters(z)) std::fill(ref.data, ref.data + ref.size, 0.0);
  return z;
}

/// Forward and backward over one row; adds the row's summed NLL (divided by
/// `denom`) into `loss` and its gradient into `grad`.
void row_loss_and_gradient(const ToyModel& model, std::span<const std::uint32_t> tokens,
                           double denom, double& loss, ToyModel& grad) {
  const auto& cfg = model.config;
  const auto t_len = static_cast<Eigen::Index>(tokens.size());
  const auto dh = static_cast<Eigen::Index>(cfg.head_dim());
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const std::size_t n_layers = model.layers.size();

  Matrix x = detail::embed(model, tokens);
  std::vector<LayerCache> caches(n_layers);
  for (std::size_t li = 0; li < n_layers; ++li) {
    const LayerWeights& w = model.layers[li];
    LayerCache& c = caches[li];
    c.a = norm_forward(x, w.attn_norm, cfg.norm_eps, c.n1);
    c.q = c.a * w.wq;
    c.k = c.a * w.wk;
    c.v = c.a * w.wv;
    c.o.resize(t_len, x.cols());
    c.probs.resize(cfg.head_count);
    for (std::size_t h = 0; h < cfg.head_count; ++h) {
      const Eigen::Index c0 = static_cast<Eigen::Index>(h) * dh;
      Matrix p = c.q.middleCols(c0, dh) * c.k.middleCols(c0, dh).transpose() * scale;
      for (Eigen::Index t = 0; t < t_len; ++t) {
        const double mx = p.row(t).head(t + 1).maxCoeff();
        double sum = 0.0;
        for (Eigen::Index s = 0; s <= t; ++s) {
          p(t, s) = std::exp(p(t, s) - mx);
          sum += p(t, s);
        }
        for (Eigen::Index s = 0; s <= t; ++s) p(t, s) /= sum;
        for (Eigen::Index s = t + 1; s < t_len; ++s) p(t, s) = 0.0;
      }
      c.o.middleCols(c0, dh) = p * c.v.middleCols(c0, dh);
      c.probs[h] = std::move(p);
    }
    x += c.o * w.wo;
    c.b = norm_forward(x, w.mlp_norm, cfg.norm_eps, c.n2);
    c.u = c.b * w.w1;
    c.act = detail::silu(c.u);
    x += c.act * w.w2;
  }
  NormCache nf;
  const Matrix f = norm_forward(x, model.final_norm, cfg.norm_eps, nf);
  const Matrix logits = f * model.lm_head;

  Matrix dlogits = Matrix::Zero(logits.rows(), logits.cols());
  for (Eigen::Index t = 0; t + 1 < t_len; ++t) {
    const double mx = logits.row(t).maxCoeff();
    RowVector p = (logits.row(t).array() - mx).exp();
    const double z = p.sum();
    p /= z;
    const auto target = static_cast<Eigen::Index>(tokens[static_cast<std::size_t>(t) + 1]);
    loss += -(logits(t, target) - mx - std::log(z)) / denom;
    p[target] -= 1.0;
    dlogits.row(t) = p / denom;
  }

  grad.lm_head.noalias() += f.transpose() * dlogits;
  Matrix dx = norm_backward(nf, model.final_norm, dlogits * model.lm_head.transpose(),
                            grad.final_norm);

  for (std::size_t li = n_layers; li-- > 0;) {
    const LayerWeights& w = model.layers[li];
    LayerWeights& gw = grad.layers[li];
    const LayerCache& c = caches[li];

    // MLP branch.
    gw.w2.noalias() += c.act.transpose() * dx;
    const Matrix dact = dx * w.w2.transpose();
    const Matrix du = dact.binaryExpr(c.u, [](double g, double u) {
      const double s = detail::sigmoid(u);
      return g * s * (1.0 + u * (1.0 - s));
    });
    gw.w1.noalias() += c.b.transpose() * du;
    dx += norm_backward(c.n2, w.mlp_norm, du * w.w1.transpose(), gw.mlp_norm);

    // Attention branch.
    gw.wo.noalias() += c.o.transpose() * dx;
    const Matrix d_o = dx * w.wo.transpose();
    Matrix dq(t_len, d_o.cols());
    Matrix dk(t_len, d_o.cols());
    Matrix dv(t_len, d_o.cols());
    for (std::size_t h = 0; h < cfg.head_count; ++h) {
      const Eigen::Index c0 = static_cast<Eigen::Index>(h) * dh;
      const Matrix& p = c.probs[h];
      const Matrix doh = d_o.middleCols(c0, dh);
      const Matrix dp = doh * c.v.middleCols(c0, dh).transpose();
      dv.middleCols(c0, dh) = p.transpose() * doh;
      Matrix ds = p.cwiseProduct(dp);
      for (Eigen::Index t = 0; t < t_len; ++t) {
        const double row_sum = ds.row(t).sum();
        ds.row(t) -= p.row(t) * row_sum;
      }
      ds *= scale;
      dq.middleCols(c0, dh) = ds * c.k.middleCols(c0, dh);
      dk.middleCols(c0, dh) = ds.transpose() * c.q.middleCols(c0, dh);
    }
    gw.wq.noalias() += c.a.transpose() * dq;
    gw.wk.noalias() += c.a.transpose() * dk;
    gw.wv.noalias() += c.a.transpose() * dv;
    const Matrix da = dq * w.wq.transpose() + dk * w.wk.transpose() + dv * w.wv.transpose();
    dx += norm_backward(c.n1, w.attn_norm, da, gw.attn_norm);
  }

  for (Eigen::Index t = 0; t < t_len; ++t) {
    grad.embedding.row(tokens[static_cast<std::size_t>(t)]) += dx.row(t);
    grad.positions.row(t) += dx.row(t);
  }
}

}  // namespace

LossAndGradient loss_and_gradient(const ToyModel& model, const CalibrationSet& data) {
  data.validate(model.config.vocab_size);
  if (data.seq_len() > model.config.max_positions) {
    throw DataError("sequence longer than the model's positions");
  }
  LossAndGradient out{0.0, zeros_like(model)};
  const double denom = static_cast<double>(data.size() * (data.seq_len() - 1));
  for (const auto& row : data.sequences) {
    row_loss_and_gradient(model, row, denom, out.loss, out.gradient);
  }
  return out;
}

TrainResult train_micro(const ToyModel& model, const CalibrationSet& corpus,
                        const TrainConfig& config) {
  if (!(config.learning_rate > 0.0) || !std::isfinite(config.learning_rate)) {
    throw ConfigError("learning rate must be positive and finite");
  }
  TrainResult result{model, 0.0, 0.0, {}};
  result.initial_loss = mean_nll(model, corpus);
  result.final_loss = result.initial_loss;
  if (config.steps == 0) return result;

  const std::size_t rows = corpus.size();
  const std::size_t per_step =
      config.batch_rows == 0 ? rows : std::min(config.batch_rows, rows);
  std::size_t cursor = 0;
  for (std::size_t step = 0; step < config.steps; ++step) {
    CalibrationSet batch;
    for (std::size_t i = 0; i < per_step; ++i) {
      batch.sequences.push_back(corpus.sequences[cursor]);
      cursor = (cursor + 1) % rows;
    }
    auto lg = loss_and_gradient(result.model, batch);
    if (!std::isfinite(lg.loss)) {
      throw TrainError("loss became non-finite at step " + std::to_string(step));
    }
    result.step_losses.push_back(lg.loss);
    auto params = parameters(result.model);
    auto grads = parameters(lg.gradient);
    for (std::size_t p = 0; p < params.size(); ++p) {
      for (std::size_t i = 0; i < params[p].size; ++i) {
        params[p].data[i] -= config.learning_rate * grads[p].data[i];
      }
    }
  }
  result.final_loss = mean_nll(result.model, corpus);
  if (!std::isfinite(result.final_loss)) throw TrainError("final loss is non-finite");
  return result;
}

}  // namespace depthprune
