#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "depthprune/boundary_set.hpp"
#include "depthprune/calibration.hpp"
#include "depthprune/scoring.hpp"
#include "depthprune/tensor.hpp"

namespace depthprune {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::RowVectorXd;

struct ModelConfig {
  std::size_t vocab_size = 256;
  std::size_t hidden_dim = 64;
  std::size_t layer_count = 12;
  std::size_t head_count = 4;
  /// 0 selects 4 * hidden_dim.
  std::size_t mlp_dim = 0;
  std::size_t max_positions = 512;
  double norm_eps = 1e-5;

  std::size_t ffn_dim() const noexcept { return mlp_dim == 0 ? 4 * hidden_dim : mlp_dim; }
  std::size_t head_dim() const noexcept { return hidden_dim / head_count; }

  /// Throws ConfigError on zero sizes or head_count not dividing hidden_dim.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

/// One pre-norm residual block:
///   x <- x + Attn(rmsnorm(x) * attn_norm)
///   x <- x + W2 silu(W1 (rmsnorm(x) * mlp_norm))
/// Projections act on row vectors (x * W).
struct LayerWeights {
  RowVector attn_norm;
  Matrix wq, wk, wv, wo;  // D x D
  RowVector mlp_norm;
  Matrix w1;  // D x F
  Matrix w2;  // F x D

  bool operator==(const LayerWeights&) const = default;
};

/// Decoder-only transformer with learned additive positions and an untied
/// LM head.
struct ToyModel {
  ModelConfig config;
  std::uint64_t seed = 0;
  Matrix embedding;   // V x D
  Matrix positions;   // max_positions x D
  std::vector<LayerWeights> layers;
  RowVector final_norm;  // D
  Matrix lm_head;        // D x V
  /// Original index of each retained layer; 0..L-1 for an unpruned model.
  std::vector<std::size_t> source_layers;

  std::size_t layer_count() const noexcept { return layers.size(); }

  bool operator==(const ToyModel&) const = default;
};

/// Mutable view of one parameter tensor, in a fixed documented order.
struct ParamRef {
  std::string name;
  double* data;
  std::size_t size;
};

std::vector<ParamRef> parameters(ToyModel& model);
std::size_t parameter_count(const ToyModel& model);

/// Deterministic initialisation: a mt19937_64 seeded with `seed` draws, in
/// order, embedding, positions, then per layer wq wk wv wo w1 w2, then
/// lm_head; each value is (2u - 1) / sqrt(D) with u = (draw >> 11) * 2^-53,
/// rounded to the nearest float32. Norm scales start at 1.
ToyModel init_model(const ModelConfig& config, std::uint64_t seed);
ToyModel init_model(std::size_t vocab, std::size_t hidden, std::size_t layers, std::size_t heads,
                    std::uint64_t seed);

/// Sets every projection and norm scale of one layer to zero, making it an
/// exact identity on the residual stream.
void zero_layer(ToyModel& model, std::size_t layer);

/// SHA-256 over the config and every parameter.
std::string model_checksum(const ToyModel& model);

/// Residual-stream update F(x) of a single layer applied to a T x D state.
Matrix layer_delta(const ToyModel& model, std::size_t layer, const Matrix& x);

struct CaptureResult {
  BoundarySet boundaries;
  TensorF logits;  // [N, S, V]
};

/// Causal forward over every calibration row, recording the embedding output
/// and the output of each layer.
CaptureResult forward_capture(const ToyModel& model, const CalibrationSet& calib);

/// Forward that skips the layers the plan prunes. Throws PlanError when the
/// plan was built for a different layer count.
TensorF prune_and_forward(const ToyModel& model, const PruningPlan& plan,
                          const CalibrationSet& data);

/// Copy of the model with the pruned layers removed.
ToyModel apply_plan(const ToyModel& model, const PruningPlan& plan);

/// exp of the mean next-token negative log-likelihood over positions 1..S-1.
double perplexity(const ToyModel& model, const CalibrationSet& data);
double perplexity(const ToyModel& model, const PruningPlan& plan, const CalibrationSet& data);

/// Mean next-token cross-entropy (natural log), the log of perplexity.
double mean_nll(const ToyModel& model, const CalibrationSet& data);

/// Greedy autoregressive continuation of each prompt using a KV cache.
/// Returns prompt followed by the generated ids for every row.
std::vector<std::vector<std::uint32_t>> generate_greedy(
    const ToyModel& model, const PruningPlan& plan,
    const std::vector<std::vector<std::uint32_t>>& prompts, std::size_t gen_tokens);

/// Logits produced by the incremental (KV-cached) path for every position of
/// every row, for checking it against the full forward.
TensorF incremental_logits(const ToyModel& model, const PruningPlan& plan,
                           const CalibrationSet& data);

struct BenchConfig {
  std::size_t gen_tokens = 256;
  std::size_t batch = 16;
  std::size_t prompt_tokens = 4;
  std::size_t repeats = 10;
  std::uint64_t prompt_seed = 0;
};

struct BenchResult {
  std::vector<double> dense_tokens_per_sec;
  std::vector<double> pruned_tokens_per_sec;
  double dense_mean = 0.0;
  double pruned_mean = 0.0;
  /// pruned_mean / dense_mean.
  double speedup = 0.0;
  /// Sample standard deviation of the per-repeat speedup ratios.
  double speedup_stddev = 0.0;
  std::size_t kept_layers = 0;
};

/// Times greedy generation for the pruned model and a dense baseline,
/// alternating the two within each repeat.
BenchResult bench_throughput(const ToyModel& model, const PruningPlan& plan,
                             const BenchConfig& config);

/// Benchmarks several plans against one dense baseline measured in the same
/// repeats. Each repeat runs the dense model and every plan once, rotating
/// the order between repeats.
std::vector<BenchResult> bench_sweep(const ToyModel& model, const std::vector<PruningPlan>& plans,
                                     const BenchConfig& config);

struct TrainConfig {
  std::size_t steps = 0;
  double learning_rate = 0.1;
  /// Rows per step, taken round-robin; 0 uses every row each step.
  std::size_t batch_rows = 0;
};

struct TrainResult {
  ToyModel model;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  std::vector<double> step_losses;
};

/// Plain gradient descent on mean next-token cross-entropy. Throws
/// TrainError if the loss becomes non-finite.
TrainResult train_micro(const ToyModel& model, const CalibrationSet& corpus,
                        const TrainConfig& config);

/// Mean next-token loss over every row of `data` and its analytic gradient,
/// laid out like the model.
struct LossAndGradient {
  double loss = 0.0;
  ToyModel gradient;
};
LossAndGradient loss_and_gradient(const ToyModel& model, const CalibrationSet& data);

}  // namespace depthprune
