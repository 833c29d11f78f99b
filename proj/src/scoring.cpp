#include "depthprune/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "depthprune/error.hpp"

namespace depthprune {

namespace {

void check_unit_interval(double v, const char* what) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw ValueError(std::string(what) + " = " + std::to_string(v) + " outside [0, 1]");
  }
}

bool is_sorted_unique(std::span<const std::size_t> v) {
  return std::adjacent_find(v.begin(), v.end(), std::greater_equal<>()) == v.end();
}

}  // namespace

bool PruningPlan::is_pruned(std::size_t layer) const {
  return std::binary_search(pruned_indices.begin(), pruned_indices.end(), layer);
}

PruningPlan identity_plan(std::size_t total_layers) { return explicit_plan(total_layers, {}); }

PruningPlan explicit_plan(std::size_t total_layers, std::vector<std::size_t> pruned) {
  std::sort(pruned.begin(), pruned.end());
  if (!is_sorted_unique(pruned)) throw PlanError("duplicate layer in explicit prune set");
  if (!pruned.empty() && pruned.back() >= total_layers) {
    throw PlanError("prune set names layer " + std::to_string(pruned.back()) +
                    " but the model has " + std::to_string(total_layers));
  }
  PruningPlan plan;
  plan.total_layers = total_layers;
  plan.keep_count = total_layers - pruned.size();
  plan.ranking = pruned;
  for (std::size_t i = 0; i < total_layers; ++i) {
    if (!std::binary_search(pruned.begin(), pruned.end(), i)) plan.ranking.push_back(i);
  }
  plan.pruned_indices = std::move(pruned);
  return plan;
}

double normalize_diff(double l_diff) {
  if (!std::isfinite(l_diff)) throw ValueError("normalize_diff: non-finite input");
  if (l_diff < 0.0) throw ValueError("normalize_diff: negative difference magnitude");
  return 1.0 / (1.0 + std::exp(-l_diff));
}

double normalize_sim(double l_sim) {
  if (!(l_sim >= 0.0 && l_sim <= 2.0)) {
    throw ValueError("normalize_sim: " + std::to_string(l_sim) + " outside [0, 2]");
  }
  return l_sim / 2.0;
}

double fuse(double i_diff, double i_sim, double alpha) {
  check_unit_interval(alpha, "alpha");
  check_unit_interval(i_diff, "i_diff");
  check_unit_interval(i_sim, "i_sim");
  return alpha * i_diff + (1.0 - alpha) * i_sim;
}

LayerScore score_layer(const RawLayerMetrics& raw, double alpha) {
  LayerScore s;
  s.layer_index = raw.layer_index;
  s.l_sim = raw.l_sim;
  s.l_diff = raw.l_diff;
  s.i_sim = normalize_sim(raw.l_sim);
  s.i_diff = normalize_diff(raw.l_diff);
  s.importance = fuse(s.i_diff, s.i_sim, alpha);
  s.alpha = alpha;
  s.metric_kind = raw.metric_kind;
  return s;
}

std::vector<std::size_t> rank_layers(std::span<const LayerScore> scores) {
  if (scores.empty()) throw PlanError("cannot rank an empty score list");
  const std::size_t n = scores.size();
  std::vector<const LayerScore*> by_layer(n, nullptr);
  for (const auto& s : scores) {
    if (s.layer_index >= n) {
      throw PlanError("layer index " + std::to_string(s.layer_index) + " out of range for " +
                      std::to_string(n) + " scores");
    }
    if (by_layer[s.layer_index] != nullptr) {
      throw PlanError("duplicate score for layer " + std::to_string(s.layer_index));
    }
    by_layer[s.layer_index] = &s;
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const LayerScore& sa = *by_layer[a];
    const LayerScore& sb = *by_layer[b];
    if (sa.importance != sb.importance) return sa.importance < sb.importance;
    if (sa.l_diff != sb.l_diff) return sa.l_diff < sb.l_diff;
    return a < b;
  });
  return order;
}

PruneSelection select_prune_set(std::span<const std::size_t> ranking, std::size_t k,
                                std::span<const std::size_t> excluded) {
  const std::size_t total = ranking.size();
  if (k > total) {
    throw PlanError("cannot prune " + std::to_string(k) + " of " + std::to_string(total) +
                    " layers");
  }
  PruneSelection sel;
  sel.total_layers = total;
  for (std::size_t layer : ranking) {
    if (sel.pruned_indices.size() == k) break;
    if (std::find(excluded.begin(), excluded.end(), layer) != excluded.end()) continue;
    sel.pruned_indices.push_back(layer);
  }
  if (sel.pruned_indices.size() < k) {
    throw PlanError("only " + std::to_string(sel.pruned_indices.size()) +
                    " candidate layers remain after exclusions, k = " + std::to_string(k));
  }
  std::sort(sel.pruned_indices.begin(), sel.pruned_indices.end());
  return sel;
}

std::vector<RawLayerMetrics> compute_raw_metrics(const BoundarySet& boundaries,
                                                 MetricKind kind) {
  std::vector<RawLayerMetrics> raw;
  raw.reserve(boundaries.layer_count());
  for (std::size_t i = 0; i < boundaries.layer_count(); ++i) {
    raw.push_back(layer_raw_metrics(boundaries, i, kind));
  }
  return raw;
}

PruningPlan plan_from_metrics(std::span<const RawLayerMetrics> raw, const PlanRequest& request,
                              std::string calibration_fingerprint) {
  check_unit_interval(request.alpha, "alpha");
  const std::size_t total = raw.size();
  std::vector<std::size_t> excluded = request.excluded;
  std::sort(excluded.begin(), excluded.end());
  excluded.erase(std::unique(excluded.begin(), excluded.end()), excluded.end());
  if (!excluded.empty() && excluded.back() >= total) {
    throw PlanError("excluded layer " + std::to_string(excluded.back()) + " out of range");
  }

  PruningPlan plan;
  plan.total_layers = total;
  plan.alpha = request.alpha;
  plan.metric_kind = request.metric_kind;
  plan.calibration_fingerprint = std::move(calibration_fingerprint);
  plan.excluded = excluded;
  plan.per_layer_scores.reserve(total);
  for (const auto& r : raw) {
    if (r.metric_kind != request.metric_kind) {
      throw PlanError("raw metrics were computed with a different difference metric");
    }
    plan.per_layer_scores.push_back(score_layer(r, request.alpha));
    if (plan.per_layer_scores.back().i_diff == 1.0) ++plan.saturation_count;
  }
  plan.ranking = rank_layers(plan.per_layer_scores);
  for (std::size_t p = 1; p < total; ++p) {
    if (plan.per_layer_scores[plan.ranking[p - 1]].importance ==
        plan.per_layer_scores[plan.ranking[p]].importance) {
      ++plan.tie_break_events;
    }
  }
  plan.pruned_indices = select_prune_set(plan.ranking, request.k, excluded).pruned_indices;
  plan.keep_count = total - plan.pruned_indices.size();
  return plan;
}

PruningPlan build_plan(const BoundarySet& boundaries, const PlanRequest& request) {
  const auto raw = compute_raw_metrics(boundaries, request.metric_kind);
  return plan_from_metrics(raw, request, boundaries.content_fingerprint());
}

PruningPlan build_plan(const BoundarySet& boundaries, double alpha, MetricKind kind,
                       std::size_t k) {
  return build_plan(boundaries, PlanRequest{alpha, kind, k, {}});
}

void validate_plan(const PruningPlan& plan) {
  const std::size_t total = plan.total_layers;
  if (total == 0) throw PlanError("plan has zero layers");

  std::vector<std::size_t> sorted_rank = plan.ranking;
  std::sort(sorted_rank.begin(), sorted_rank.end());
  for (std::size_t i = 0; i < sorted_rank.size(); ++i) {
    if (sorted_rank[i] != i) throw PlanError("ranking is not a permutation of 0..L-1");
  }
  if (sorted_rank.size() != total) throw PlanError("ranking length != total_layers");

  const auto& pruned = plan.pruned_indices;
  if (!is_sorted_unique(pruned)) throw PlanError("pruned_indices not sorted and unique");
  if (!pruned.empty() && pruned.back() >= total) throw PlanError("pruned index out of range");
  if (plan.keep_count + pruned.size() != total) throw PlanError("keep_count != L - k");

  if (!is_sorted_unique(plan.excluded)) throw PlanError("excluded not sorted and unique");
  if (!plan.excluded.empty() && plan.excluded.back() >= total) {
    throw PlanError("excluded index out of range");
  }

  const auto expected = select_prune_set(plan.ranking, pruned.size(), plan.excluded);
  if (expected.pruned_indices != pruned) {
    throw PlanError("pruned_indices are not the leading candidates of the ranking");
  }

  if (plan.per_layer_scores.empty()) return;
  if (plan.per_layer_scores.size() != total) throw PlanError("one score per layer required");
  for (std::size_t i = 0; i < total; ++i) {
    const LayerScore& s = plan.per_layer_scores[i];
    if (s.layer_index != i) throw PlanError("scores must be ordered by layer index");
    if (!(s.l_sim >= 0.0 && s.l_sim <= 2.0) || !(s.l_diff >= 0.0) || !std::isfinite(s.l_diff)) {
      throw PlanError("raw metric out of range for layer " + std::to_string(i));
    }
    if (s.i_sim != s.l_sim / 2.0) throw PlanError("i_sim != l_sim / 2 at layer " + std::to_string(i));
    if (std::abs(s.i_diff - 1.0 / (1.0 + std::exp(-s.l_diff))) > 1e-15) {
      throw PlanError("i_diff inconsistent with l_diff at layer " + std::to_string(i));
    }
    if (std::abs(s.importance - (s.alpha * s.i_diff + (1.0 - s.alpha) * s.i_sim)) > 1e-15) {
      throw PlanError("importance inconsistent with fusion at layer " + std::to_string(i));
    }
    if (s.alpha != plan.alpha || s.metric_kind != plan.metric_kind) {
      throw PlanError("layer score alpha/metric differs from plan");
    }
  }
  for (std::size_t p = 1; p < total; ++p) {
    if (plan.per_layer_scores[plan.ranking[p - 1]].importance >
        plan.per_layer_scores[plan.ranking[p]].importance) {
      throw PlanError("importance decreases along the ranking");
    }
  }
}

std::size_t prune_count_from_ratio(double ratio, std::size_t total_layers) {
  if (!(ratio > 0.0 && ratio <= 1.0)) throw ValueError("ratio must lie in (0, 1]");
  // The small slack keeps ratios like 0.29 * 100 from flooring to 28.
  return static_cast<std::size_t>(std::floor(ratio * static_cast<double>(total_layers) + 1e-9));
}

}  // namespace depthprune
