#pragma once

#include <cstddef>
#include <string_view>

#include "depthprune/boundary_set.hpp"
#include "depthprune/tensor.hpp"

namespace depthprune {

enum class MetricKind { kMssd, kMasd };

std::string_view metric_name(MetricKind kind);
/// Accepts "mssd" / "masd"; throws ValueError otherwise.
MetricKind parse_metric(std::string_view name);

/// Rows whose L2 norm falls below this are treated as direction-less.
inline constexpr double kDegenerateNorm = 1e-12;

struct CosineResult {
  double dissimilarity = 0.0;
  std::size_t degenerate_count = 0;
};

/// 1 - mean_j cos(h_in_j, h_out_j). A token whose input or output row is
/// degenerate contributes cos = 0 and is counted. Result lies in [0, 2].
CosineResult cosine_dissimilarity(const TokenMatrix& h_in, const TokenMatrix& h_out);

/// Mean over tokens of the squared L2 norm of the per-token difference.
double mssd(const TokenMatrix& h_in, const TokenMatrix& h_out);

/// Mean absolute elementwise difference, i.e. per-token L1 norm divided by
/// B*S*D.
double masd(const TokenMatrix& h_in, const TokenMatrix& h_out);

struct RawLayerMetrics {
  std::size_t layer_index = 0;
  double l_sim = 0.0;
  double l_diff = 0.0;
  MetricKind metric_kind = MetricKind::kMssd;
  std::size_t degenerate_token_count = 0;

  bool operator==(const RawLayerMetrics&) const = default;
};

RawLayerMetrics layer_raw_metrics(const BoundarySet& boundaries, std::size_t layer,
                                  MetricKind kind);

}  // namespace depthprune
