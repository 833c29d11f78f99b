#include "depthprune/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "depthprune/error.hpp"

namespace depthprune {

namespace {

void check_pair(const TokenMatrix& h_in, const TokenMatrix& h_out, const char* op) {
  if (!h_in.same_shape(h_out)) {
    throw ShapeError(std::string(op) + ": shapes " + std::to_string(h_in.rows()) + "x" +
                     std::to_string(h_in.cols()) + " and " + std::to_string(h_out.rows()) + "x" +
                     std::to_string(h_out.cols()) + " differ");
  }
  if (h_in.rows() == 0) throw EmptyInputError(std::string(op) + ": no tokens");
}

}  // namespace

std::string_view metric_name(MetricKind kind) {
  return kind == MetricKind::kMssd ? "mssd" : "masd";
}

MetricKind parse_metric(std::string_view name) {
  if (name == "mssd") return MetricKind::kMssd;
  if (name == "masd") return MetricKind::kMasd;
  throw ValueError("unknown metric '" + std::string(name) + "' (expected mssd or masd)");
}

CosineResult cosine_dissimilarity(const TokenMatrix& h_in, const TokenMatrix& h_out) {
  check_pair(h_in, h_out, "cosine_dissimilarity");
  const double floor_sq = kDegenerateNorm * kDegenerateNorm;
  CosineResult result;
  double cos_sum = 0.0;
  for (std::size_t j = 0; j < h_in.rows(); ++j) {
    const double aa = row_dot(h_in, h_in, j);
    const double bb = row_dot(h_out, h_out, j);
    if (aa < floor_sq || bb < floor_sq) {
      ++result.degenerate_count;
      continue;
    }
    // sqrt(aa*bb) rather than |a|*|b| keeps cos(a, a) exactly 1.
    const double cos = row_dot(h_in, h_out, j) / std::sqrt(aa * bb);
    cos_sum += std::clamp(cos, -1.0, 1.0);
  }
  const double mean_cos = cos_sum / static_cast<double>(h_in.rows());
  result.dissimilarity = std::clamp(1.0 - mean_cos, 0.0, 2.0);
  return result;
}

double mssd(const TokenMatrix& h_in, const TokenMatrix& h_out) {
  check_pair(h_in, h_out, "mssd");
  auto a = h_in.data();
  auto b = h_out.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = b[i] - a[i];
    acc += d * d;
  }
  return acc / static_cast<double>(h_in.rows());
}

double masd(const TokenMatrix& h_in, const TokenMatrix& h_out) {
  check_pair(h_in, h_out, "masd");
  if (h_in.cols() == 0) throw EmptyInputError("masd: zero hidden width");
  auto a = h_in.data();
  auto b = h_out.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(b[i] - a[i]);
  return acc / static_cast<double>(a.size());
}

RawLayerMetrics layer_raw_metrics(const BoundarySet& boundaries, std::size_t layer,
                                  MetricKind kind) {
  if (layer >= boundaries.layer_count()) {
    throw LayerIndexError("layer " + std::to_string(layer) + " out of range (L = " +
                          std::to_string(boundaries.layer_count()) + ")");
  }
  const TokenMatrix h_in = flatten_tokens(boundaries.boundary(layer));
  const TokenMatrix h_out = flatten_tokens(boundaries.boundary(layer + 1));
  const CosineResult cos = cosine_dissimilarity(h_in, h_out);

  RawLayerMetrics m;
  m.layer_index = layer;
  m.l_sim = cos.dissimilarity;
  m.degenerate_token_count = cos.degenerate_count;
  m.metric_kind = kind;
  m.l_diff = kind == MetricKind::kMssd ? mssd(h_in, h_out) : masd(h_in, h_out);
  return m;
}

}  // namespace depthprune
