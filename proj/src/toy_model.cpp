#include "depthprune/toy_model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "depthprune/error.hpp"
#include "depthprune/hash.hpp"
#include "model_ops.hpp"

namespace depthprune {

void ModelConfig::validate() const {
  if (vocab_size == 0 || hidden_dim == 0 || head_count == 0 || max_positions == 0) {
    throw ConfigError("vocab_size, hidden_dim, head_count and max_positions must be positive");
  }
  if (hidden_dim % head_count != 0) {
    throw ConfigError("hidden_dim " + std::to_string(hidden_dim) + " is not divisible by " +
                      std::to_string(head_count) + " heads");
  }
  if (!(norm_eps > 0.0)) throw ConfigError("norm_eps must be positive");
}

std::vector<ParamRef> parameters(ToyModel& model) {
  std::vector<ParamRef> out;
  auto add = [&](std::string name, auto& m) {
    out.push_back(ParamRef{std::move(name), m.data(), static_cast<std::size_t>(m.size())});
  };
  add("embedding", model.embedding);
  add("positions", model.positions);
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    auto& l = model.layers[i];
    const std::string p = "layer." + std::to_string(i) + ".";
    add(p + "attn_norm", l.attn_norm);
    add(p + "wq", l.wq);
    add(p + "wk", l.wk);
    add(p + "wv", l.wv);
    add(p + "wo", l.wo);
    add(p + "mlp_norm", l.mlp_norm);
    add(p + "w1", l.w1);
    add(p + "w2", l.w2);
  }
  add("final_norm", model.final_norm);
  add("lm_head", model.lm_head);
  return out;
}

std::size_t parameter_count(const ToyModel& model) {
  auto refs = parameters(const_cast<ToyModel&>(model));
  return std::accumulate(refs.begin(), refs.end(), std::size_t{0},
                         [](std::size_t acc, const ParamRef& r) { return acc + r.size; });
}

ToyModel init_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  const auto d = static_cast<Eigen::Index>(config.hidden_dim);
  const auto v = static_cast<Eigen::Index>(config.vocab_size);
  const auto f = static_cast<Eigen::Index>(config.ffn_dim());
  const double bound = 1.0 / std::sqrt(static_cast<double>(config.hidden_dim));

  std::mt19937_64 gen(seed);
  auto fill = [&](Matrix& m, Eigen::Index rows, Eigen::Index cols) {
    m.resize(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;
      m.data()[i] = static_cast<double>(static_cast<float>((2.0 * u - 1.0) * bound));
    }
  };

  ToyModel model;
  model.config = config;
  model.config.mlp_dim = config.ffn_dim();
  model.seed = seed;
  fill(model.embedding, v, d);
  fill(model.positions, static_cast<Eigen::Index>(config.max_positions), d);
  model.layers.resize(config.layer_count);
  for (auto& l : model.layers) {
    l.attn_norm = RowVector::Ones(d);
    l.mlp_norm = RowVector::Ones(d);
    fill(l.wq, d, d);
    fill(l.wk, d, d);
    fill(l.wv, d, d);
    fill(l.wo, d, d);
    fill(l.w1, d, f);
    fill(l.w2, f, d);
  }
  model.final_norm = RowVector::Ones(d);
  fill(model.lm_head, d, v);
  model.source_layers.resize(config.layer_count);
  std::iota(model.source_layers.begin(), model.source_layers.end(), std::size_t{0});
  return model;
}

ToyModel init_model(std::size_t vocab, std::size_t hidden, std::size_t layers, std::size_t heads,
                    std::uint64_t seed) {
  ModelConfig cfg;
  cfg.vocab_size = vocab;
  cfg.hidden_dim = hidden;
  cfg.layer_count = layers;
  cfg.head_count = heads;
  return init_model(cfg, seed);
}

void zero_layer(ToyModel& model, std::size_t layer) {
  if (layer >= model.layers.size()) throw LayerIndexError("no layer " + std::to_string(layer));
  auto& l = model.layers[layer];
  for (Matrix* m : {&l.wq, &l.wk, &l.wv, &l.wo, &l.w1, &l.w2}) m->setZero();
  l.attn_norm.setZero();
  l.mlp_norm.setZero();
}

std::string model_checksum(const ToyModel& model) {
  Sha256 h;
  const auto& c = model.config;
  for (std::size_t v : {c.vocab_size, c.hidden_dim, model.layers.size(), c.head_count,
                        c.ffn_dim(), c.max_positions}) {
    h.update_u64(v);
  }
  h.update_f64(c.norm_eps);
  for (const auto& ref : parameters(const_cast<ToyModel&>(model))) {
    h.update(ref.name);
    h.update_f64(std::span<const double>(ref.data, ref.size));
  }
  return h.hex_digest();
}

namespace detail {

Matrix causal_attention(const LayerWeights& w, const Matrix& a, std::size_t heads) {
  const Eigen::Index t_len = a.rows();
  const Eigen::Index d = a.cols();
  const Eigen::Index dh = d / static_cast<Eigen::Index>(heads);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const Matrix q = a * w.wq;
  const Matrix k = a * w.wk;
  const Matrix v = a * w.wv;
  Matrix o(t_len, d);
  Matrix scores(t_len, t_len);
  for (std::size_t h = 0; h < heads; ++h) {
    const Eigen::Index c0 = static_cast<Eigen::Index>(h) * dh;
    scores.noalias() = q.middleCols(c0, dh) * k.middleCols(c0, dh).transpose();
    for (Eigen::Index t = 0; t < t_len; ++t) {
      auto row = scores.row(t);
      double mx = -std::numeric_limits<double>::infinity();
      for (Eigen::Index s = 0; s <= t; ++s) mx = std::max(mx, row[s] * scale);
      double sum = 0.0;
      for (Eigen::Index s = 0; s <= t; ++s) {
        row[s] = std::exp(row[s] * scale - mx);
        sum += row[s];
      }
      for (Eigen::Index s = 0; s <= t; ++s) row[s] /= sum;
      for (Eigen::Index s = t + 1; s < t_len; ++s) row[s] = 0.0;
    }
    o.middleCols(c0, dh).noalias() = scores * v.middleCols(c0, dh);
  }
  return o * w.wo;
}

Matrix mlp(const LayerWeights& w, const Matrix& b) { return silu(b * w.w1) * w.w2; }

void apply_block(const LayerWeights& w, const ModelConfig& cfg, Matrix& x) {
  x += causal_attention(w, rmsnorm(x, w.attn_norm, cfg.norm_eps), cfg.head_count);
  x += mlp(w, rmsnorm(x, w.mlp_norm, cfg.norm_eps));
}

Matrix embed(const ToyModel& model, std::span<const std::uint32_t> tokens) {
  const auto t_len = static_cast<Eigen::Index>(tokens.size());
  Matrix x(t_len, model.embedding.cols());
  for (Eigen::Index t = 0; t < t_len; ++t) {
    x.row(t) = model.embedding.row(tokens[t]) + model.positions.row(t);
  }
  return x;
}

Matrix head_logits(const ToyModel& model, const Matrix& x) {
  return rmsnorm(x, model.final_norm, model.config.norm_eps) * model.lm_head;
}

std::vector<std::size_t> all_layers(const ToyModel& model) {
  std::vector<std::size_t> idx(model.layers.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

std::vector<std::size_t> active_layers(const ToyModel& model, const PruningPlan& plan) {
  if (plan.total_layers != model.layers.size()) {
    throw PlanError("plan covers " + std::to_string(plan.total_layers) + " layers but model has " +
                    std::to_string(model.layers.size()));
  }
  for (std::size_t p : plan.pruned_indices) {
    if (p >= model.layers.size()) throw PlanError("plan prunes missing layer " + std::to_string(p));
  }
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    if (!plan.is_pruned(i)) idx.push_back(i);
  }
  return idx;
}

void accumulate_nll(const Matrix& logits, std::span<const std::uint32_t> tokens,
                    double& nll_sum) {
  for (Eigen::Index t = 0; t + 1 < logits.rows(); ++t) {
    const auto row = logits.row(t);
    const double mx = row.maxCoeff();
    double z = 0.0;
    for (Eigen::Index c = 0; c < row.size(); ++c) z += std::exp(row[c] - mx);
    nll_sum += -(row[tokens[t + 1]] - mx - std::log(z));
  }
}

}  // namespace detail

Matrix layer_delta(const ToyModel& model, std::size_t layer, const Matrix& x) {
  if (layer >= model.layers.size()) throw LayerIndexError("no layer " + std::to_string(layer));
  Matrix y = x;
  detail::apply_block(model.layers[layer], model.config, y);
  return y - x;
}

namespace {

void check_data(const ToyModel& model, const CalibrationSet& data) {
  data.validate(model.config.vocab_size);
  if (data.seq_len() > model.config.max_positions) {
    throw DataError("sequence length " + std::to_string(data.seq_len()) +
                    " exceeds the model's " + std::to_string(model.config.max_positions) +
                    " positions");
  }
}

/// Runs every row through `layers`; calls `on_boundary(row, b, x)` for each
/// boundary b (0 = embedding) when capturing and `on_logits(row, logits)`.
template <typename OnBoundary, typename OnLogits>
void run_rows(const ToyModel& model, const std::vector<std::size_t>& layers,
              const CalibrationSet& data, OnBoundary on_boundary, OnLogits on_logits) {
  for (std::size_t r = 0; r < data.size(); ++r) {
    Matrix x = detail::embed(model, data.sequences[r]);
    on_boundary(r, 0, x);
    for (std::size_t b = 0; b < layers.size(); ++b) {
      detail::apply_block(model.layers[layers[b]], model.config, x);
      on_boundary(r, b + 1, x);
    }
    on_logits(r, detail::head_logits(model, x));
  }
}

TensorF logits_tensor(const ToyModel& model, const std::vector<std::size_t>& layers,
                      const CalibrationSet& data) {
  const std::size_t n = data.size();
  const std::size_t s = data.seq_len();
  const std::size_t v = model.config.vocab_size;
  std::vector<double> out(n * s * v);
  run_rows(
      model, layers, data, [](std::size_t, std::size_t, const Matrix&) {},
      [&](std::size_t r, const Matrix& logits) {
        std::copy(logits.data(), logits.data() + logits.size(), out.begin() + r * s * v);
      });
  return TensorF({n, s, v}, std::move(out));
}

double nll_over(const ToyModel& model, const std::vector<std::size_t>& layers,
                const CalibrationSet& data) {
  double nll = 0.0;
  run_rows(
      model, layers, data, [](std::size_t, std::size_t, const Matrix&) {},
      [&](std::size_t r, const Matrix& logits) {
        detail::accumulate_nll(logits, data.sequences[r], nll);
      });
  return nll / static_cast<double>(data.size() * (data.seq_len() - 1));
}

}  // namespace

CaptureResult forward_capture(const ToyModel& model, const CalibrationSet& calib) {
  check_data(model, calib);
  const std::size_t n = calib.size();
  const std::size_t s = calib.seq_len();
  const std::size_t d = model.config.hidden_dim;
  const std::size_t v = model.config.vocab_size;
  const std::size_t per_row = s * d;

  std::vector<std::vector<double>> bounds(model.layers.size() + 1,
                                          std::vector<double>(n * per_row));
  std::vector<double> logits(n * s * v);
  run_rows(
      model, detail::all_layers(model), calib,
      [&](std::size_t r, std::size_t b, const Matrix& x) {
        std::copy(x.data(), x.data() + x.size(), bounds[b].begin() + r * per_row);
      },
      [&](std::size_t r, const Matrix& l) {
        std::copy(l.data(), l.data() + l.size(), logits.begin() + r * s * v);
      });

  std::vector<TensorF> tensors;
  tensors.reserve(bounds.size());
  for (auto& b : bounds) tensors.emplace_back(std::vector<std::size_t>{n, s, d}, std::move(b));
  return CaptureResult{
      BoundarySet(std::move(tensors), model_checksum(model), calib.fingerprint()),
      TensorF({n, s, v}, std::move(logits))};
}

TensorF prune_and_forward(const ToyModel& model, const PruningPlan& plan,
                          const CalibrationSet& data) {
  const auto layers = detail::active_layers(model, plan);
  check_data(model, data);
  return logits_tensor(model, layers, data);
}

ToyModel apply_plan(const ToyModel& model, const PruningPlan& plan) {
  const auto layers = detail::active_layers(model, plan);
  ToyModel out = model;
  out.layers.clear();
  out.source_layers.clear();
  for (std::size_t i : layers) {
    out.layers.push_back(model.layers[i]);
    out.source_layers.push_back(model.source_layers.at(i));
  }
  out.config.layer_count = out.layers.size();
  return out;
}

double mean_nll(const ToyModel& model, const CalibrationSet& data) {
  check_data(model, data);
  return nll_over(model, detail::all_layers(model), data);
}

double perplexity(const ToyModel& model, const CalibrationSet& data) {
  return std::exp(mean_nll(model, data));
}

double perplexity(const ToyModel& model, const PruningPlan& plan, const CalibrationSet& data) {
  const auto layers = detail::active_layers(model, plan);
  check_data(model, data);
  return std::exp(nll_over(model, layers, data));
}

namespace {

/// KV-cached decoder state for a batch of rows.
class IncrementalDecoder {
 public:
  IncrementalDecoder(const ToyModel& model, std::vector<std::size_t> layers, std::size_t batch,
                     std::size_t max_len)
      : model_(model), layers_(std::move(layers)), batch_(batch) {
    const auto d = static_cast<Eigen::Index>(model.config.hidden_dim);
    keys_.assign(layers_.size() * batch, Matrix(static_cast<Eigen::Index>(max_len), d));
    values_.assign(layers_.size() * batch, Matrix(static_cast<Eigen::Index>(max_len), d));
  }

  /// Feeds token ids at position `pos` (one per row); returns B x V logits.
  Matrix step(const std::vector<std::uint32_t>& ids, std::size_t pos) {
    const auto& cfg = model_.config;
    const auto d = static_cast<Eigen::Index>(cfg.hidden_dim);
    const auto dh = static_cast<Eigen::Index>(cfg.head_dim());
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    const auto b_rows = static_cast<Eigen::Index>(batch_);
    const auto p = static_cast<Eigen::Index>(pos);

    Matrix x(b_rows, d);
    for (Eigen::Index b = 0; b < b_rows; ++b) {
      x.row(b) = model_.embedding.row(ids[static_cast<std::size_t>(b)]) + model_.positions.row(p);
    }
    Eigen::VectorXd weights(p + 1);
    for (std::size_t li = 0; li < layers_.size(); ++li) {
      const LayerWeights& w = model_.layers[layers_[li]];
      const Matrix a = detail::rmsnorm(x, w.attn_norm, cfg.norm_eps);
      const Matrix q = a * w.wq;
      const Matrix k = a * w.wk;
      const Matrix v = a * w.wv;
      Matrix o(b_rows, d);
      for (Eigen::Index b = 0; b < b_rows; ++b) {
        Matrix& kc = keys_[li * batch_ + static_cast<std::size_t>(b)];
        Matrix& vc = values_[li * batch_ + static_cast<std::size_t>(b)];
        kc.row(p) = k.row(b);
        vc.row(p) = v.row(b);
        for (std::size_t h = 0; h < cfg.head_count; ++h) {
          const Eigen::Index c0 = static_cast<Eigen::Index>(h) * dh;
          weights.noalias() =
              kc.block(0, c0, p + 1, dh) * q.row(b).segment(c0, dh).transpose() * scale;
          const double mx = weights.maxCoeff();
          weights = (weights.array() - mx).exp();
          weights /= weights.sum();
          o.row(b).segment(c0, dh).noalias() = weights.transpose() * vc.block(0, c0, p + 1, dh);
        }
      }
      x += o * w.wo;
      x += detail::mlp(w, detail::rmsnorm(x, w.mlp_norm, cfg.norm_eps));
    }
    return detail::head_logits(model_, x);
  }

 private:
  const ToyModel& model_;
  std::vector<std::size_t> layers_;
  std::size_t batch_;
  std::vector<Matrix> keys_;
  std::vector<Matrix> values_;
};

std::vector<std::vector<std::uint32_t>> generate_with(
    const ToyModel& model, const std::vector<std::size_t>& layers,
    const std::vector<std::vector<std::uint32_t>>& prompts, std::size_t gen_tokens) {
  if (prompts.empty() || prompts.front().empty()) throw ConfigError("empty prompt batch");
  const std::size_t plen = prompts.front().size();
  for (const auto& p : prompts) {
    if (p.size() != plen) throw ConfigError("prompts must share one length");
    for (auto id : p) {
      if (id >= model.config.vocab_size) throw DataError("prompt id out of vocabulary");
    }
  }
  const std::size_t total = plen + gen_tokens;
  if (total > model.config.max_positions) {
    throw ConfigError("prompt + generated tokens (" + std::to_string(total) +
                      ") exceed max_positions " + std::to_string(model.config.max_positions));
  }
  IncrementalDecoder dec(model, layers, prompts.size(), total);
  auto seqs = prompts;
  std::vector<std::uint32_t> ids(prompts.size());
  for (std::size_t pos = 0; pos + 1 < total; ++pos) {
    for (std::size_t b = 0; b < seqs.size(); ++b) ids[b] = seqs[b][pos];
    const Matrix logits = dec.step(ids, pos);
    if (pos + 1 < plen) continue;
    for (std::size_t b = 0; b < seqs.size(); ++b) {
      Eigen::Index best = 0;
      logits.row(static_cast<Eigen::Index>(b)).maxCoeff(&best);
      seqs[b].push_back(static_cast<std::uint32_t>(best));
    }
  }
  return seqs;
}

}  // namespace

std::vector<std::vector<std::uint32_t>> generate_greedy(
    const ToyModel& model, const PruningPlan& plan,
    const std::vector<std::vector<std::uint32_t>>& prompts, std::size_t gen_tokens) {
  return generate_with(model, detail::active_layers(model, plan), prompts, gen_tokens);
}

TensorF incremental_logits(const ToyModel& model, const PruningPlan& plan,
                           const CalibrationSet& data) {
  const auto layers = detail::active_layers(model, plan);
  check_data(model, data);
  const std::size_t n = data.size();
  const std::size_t s = data.seq_len();
  const std::size_t v = model.config.vocab_size;
  IncrementalDecoder dec(model, layers, n, s);
  std::vector<double> out(n * s * v);
  std::vector<std::uint32_t> ids(n);
  for (std::size_t pos = 0; pos < s; ++pos) {
    for (std::size_t r = 0; r < n; ++r) ids[r] = data.sequences[r][pos];
    const Matrix logits = dec.step(ids, pos);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < v; ++c) {
        out[(r * s + pos) * v + c] =
            logits(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
      }
    }
  }
  return TensorF({n, s, v}, std::move(out));
}

std::vector<BenchResult> bench_sweep(const ToyModel& model, const std::vector<PruningPlan>& plans,
                                     const BenchConfig& config) {
  if (config.repeats < 1) throw ConfigError("repeats must be >= 1");
  if (config.batch < 1 || config.prompt_tokens < 1 || config.gen_tokens < 1) {
    throw ConfigError("batch, prompt_tokens and gen_tokens must be positive");
  }
  // Slot 0 is the dense baseline.
  std::vector<std::vector<std::size_t>> stacks{detail::all_layers(model)};
  for (const auto& plan : plans) stacks.push_back(detail::active_layers(model, plan));

  std::mt19937_64 gen(config.prompt_seed);
  std::vector<std::vector<std::uint32_t>> prompts(config.batch,
                                                  std::vector<std::uint32_t>(config.prompt_tokens));
  for (auto& p : prompts) {
    for (auto& id : p) id = static_cast<std::uint32_t>(gen() % model.config.vocab_size);
  }

  const double tokens = static_cast<double>(config.batch * config.gen_tokens);
  auto timed = [&](const std::vector<std::size_t>& layers) {
    const auto t0 = std::chrono::steady_clock::now();
    auto out = generate_with(model, layers, prompts, config.gen_tokens);
    const auto t1 = std::chrono::steady_clock::now();
    const double secs = std::chrono::duration<double>(t1 - t0).count();
    return tokens / std::max(secs, 1e-12);
  };

  // Warm-up, not recorded.
  timed(stacks.front());

  const std::size_t slots = stacks.size();
  std::vector<std::vector<double>> rates(slots);
  for (std::size_t r = 0; r < config.repeats; ++r) {
    for (std::size_t i = 0; i < slots; ++i) {
      const std::size_t slot = (i + r) % slots;
      rates[slot].push_back(timed(stacks[slot]));
    }
  }

  auto mean = [](const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  std::vector<BenchResult> results;
  for (std::size_t s = 1; s < slots; ++s) {
    BenchResult res;
    res.kept_layers = stacks[s].size();
    res.dense_tokens_per_sec = rates[0];
    res.pruned_tokens_per_sec = rates[s];
    res.dense_mean = mean(rates[0]);
    res.pruned_mean = mean(rates[s]);
    res.speedup = res.pruned_mean / res.dense_mean;
    std::vector<double> ratios;
    for (std::size_t r = 0; r < config.repeats; ++r) ratios.push_back(rates[s][r] / rates[0][r]);
    if (ratios.size() > 1) {
      const double m = mean(ratios);
      double ss = 0.0;
      for (double x : ratios) ss += (x - m) * (x - m);
      res.speedup_stddev = std::sqrt(ss / static_cast<double>(ratios.size() - 1));
    }
    results.push_back(std::move(res));
  }
  return results;
}

BenchResult bench_throughput(const ToyModel& model, const PruningPlan& plan,
                             const BenchConfig& config) {
  return bench_sweep(model, {plan}, config).front();
}

}  // namespace depthprune
