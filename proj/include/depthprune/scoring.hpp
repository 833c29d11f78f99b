#pragma once

#include <cstddef>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "depthprune/boundary_set.hpp"
#include "depthprune/metrics.hpp"

namespace depthprune {

/// Normalized and fused importance of one layer.
struct LayerScore {
  std::size_t layer_index = 0;
  double l_sim = 0.0;
  double l_diff = 0.0;
  double i_sim = 0.0;
  double i_diff = 0.0;
  double importance = 0.0;
  double alpha = 0.0;
  MetricKind metric_kind = MetricKind::kMssd;

  bool operator==(const LayerScore&) const = default;
};

/// Which layers to remove and why. `ranking` orders every layer by
/// ascending importance; `pruned_indices` is the first `k` candidates of it,
/// sorted ascending. Layers listed in `excluded` are never pruned.
struct PruningPlan {
  std::size_t total_layers = 0;
  std::size_t keep_count = 0;
  std::vector<std::size_t> pruned_indices;
  std::vector<std::size_t> ranking;
  std::vector<std::size_t> excluded;
  double alpha = 0.0;
  MetricKind metric_kind = MetricKind::kMssd;
  std::string calibration_fingerprint;
  std::vector<LayerScore> per_layer_scores;
  /// Adjacent ranking pairs with bit-equal importance, ordered by the
  /// l_diff / layer-index tie-break.
  std::size_t tie_break_events = 0;
  /// Layers whose sigmoid-normalized difference rounded to exactly 1.0.
  std::size_t saturation_count = 0;

  std::size_t k() const noexcept { return pruned_indices.size(); }
  bool is_pruned(std::size_t layer) const;

  bool operator==(const PruningPlan&) const = default;
};

/// Plan that removes nothing from an L-layer model.
PruningPlan identity_plan(std::size_t total_layers);

/// Plan that removes exactly `pruned` (no scores attached).
PruningPlan explicit_plan(std::size_t total_layers, std::vector<std::size_t> pruned);

/// Logistic map of a non-negative difference magnitude into [0.5, 1].
double normalize_diff(double l_diff);
/// Halves a dissimilarity in [0, 2].
double normalize_sim(double l_sim);
/// alpha * i_diff + (1 - alpha) * i_sim.
double fuse(double i_diff, double i_sim, double alpha);

LayerScore score_layer(const RawLayerMetrics& raw, double alpha);

/// Ascending importance; ties by raw l_diff, then by layer index.
std::vector<std::size_t> rank_layers(std::span<const LayerScore> scores);

struct PruneSelection {
  std::vector<std::size_t> pruned_indices;  // sorted ascending
  std::size_t total_layers = 0;
};

/// First `k` entries of `ranking` that are not excluded, sorted ascending.
PruneSelection select_prune_set(std::span<const std::size_t> ranking, std::size_t k,
                                std::span<const std::size_t> excluded = {});

struct PlanRequest {
  double alpha = 0.5;
  MetricKind metric_kind = MetricKind::kMssd;
  std::size_t k = 0;
  std::vector<std::size_t> excluded;
};

/// Raw metrics for every layer; the alpha-independent part of build_plan.
std::vector<RawLayerMetrics> compute_raw_metrics(const BoundarySet& boundaries, MetricKind kind);

/// Scores, ranks and selects from precomputed raw metrics.
PruningPlan plan_from_metrics(std::span<const RawLayerMetrics> raw, const PlanRequest& request,
                              std::string calibration_fingerprint);

PruningPlan build_plan(const BoundarySet& boundaries, const PlanRequest& request);
PruningPlan build_plan(const BoundarySet& boundaries, double alpha, MetricKind kind,
                       std::size_t k);

/// Checks every plan invariant; throws PlanError naming the first violation.
void validate_plan(const PruningPlan& plan);

/// floor(ratio * L) for ratio in (0, 1].
std::size_t prune_count_from_ratio(double ratio, std::size_t total_layers);

}  // namespace depthprune
