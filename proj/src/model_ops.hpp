#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "depthprune/toy_model.hpp"

namespace depthprune::detail {

/// Per-row 1 / sqrt(mean(x^2) + eps).
inline Eigen::VectorXd rms_inverse(const Matrix& x, double eps) {
  const double d = static_cast<double>(x.cols());
  Eigen::VectorXd r(x.rows());
  for (Eigen::Index t = 0; t < x.rows(); ++t) {
    r[t] = 1.0 / std::sqrt(x.row(t).squaredNorm() / d + eps);
  }
  return r;
}

inline Matrix rmsnorm(const Matrix& x, const RowVector& scale, double eps) {
  const Eigen::VectorXd r = rms_inverse(x, eps);
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index t = 0; t < x.rows(); ++t) y.row(t) = (x.row(t) * r[t]).cwiseProduct(scale);
  return y;
}

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

inline Matrix silu(const Matrix& u) {
  return u.unaryExpr([](double v) { return v * sigmoid(v); });
}

/// Causal multi-head self-attention over a T x D normalized input; returns
/// the output projection.
Matrix causal_attention(const LayerWeights& w, const Matrix& a, std::size_t heads);

Matrix mlp(const LayerWeights& w, const Matrix& b);

/// Applies one block in place: x += attn; x += mlp.
void apply_block(const LayerWeights& w, const ModelConfig& cfg, Matrix& x);

/// Token plus position embedding for one row.
Matrix embed(const ToyModel& model, std::span<const std::uint32_t> tokens);

Matrix head_logits(const ToyModel& model, const Matrix& x);

/// Layer indices the plan keeps, in original order.
std::vector<std::size_t> active_layers(const ToyModel& model, const PruningPlan& plan);
std::vector<std::size_t> all_layers(const ToyModel& model);

/// Adds -log softmax(logits[t])[tokens[t+1]] for every t < T-1 to `nll_sum`.
void accumulate_nll(const Matrix& logits, std::span<const std::uint32_t> tokens, double& nll_sum);

}  // namespace depthprune::detail
