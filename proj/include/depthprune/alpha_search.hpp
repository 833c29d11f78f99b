#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "depthprune/boundary_set.hpp"
#include "depthprune/scoring.hpp"

namespace depthprune {

struct SearchConfig {
  double epsilon = 0.01;
  std::size_t max_iterations = 20;
  std::size_t k = 0;
  MetricKind metric_kind = MetricKind::kMssd;
  std::vector<std::size_t> excluded;

  void validate() const;
};

struct SearchStep {
  double left = 0.0;
  double right = 0.0;
  double m1 = 0.0;
  double m2 = 0.0;
  double ppl1 = 0.0;
  double ppl2 = 0.0;
  double best_alpha = 0.0;
  double best_ppl = 0.0;

  bool operator==(const SearchStep&) const = default;
};

struct SearchTrace {
  std::vector<SearchStep> iterations;
  /// NaN when no iteration ran (interval already within epsilon).
  double best_alpha = std::numeric_limits<double>::quiet_NaN();
  double best_ppl = std::numeric_limits<double>::infinity();
  std::size_t evaluations = 0;
  /// Interval remaining when the loop stopped.
  double final_left = 0.0;
  double final_right = 1.0;
};

using AlphaObjective = std::function<double(double alpha)>;

/// Ternary search over alpha in [0, 1]. Each iteration evaluates the two
/// third-points, keeps the running best, and discards the third next to the
/// worse point (the left third only when ppl1 > ppl2). Stops once the
/// interval is within epsilon or max_iterations is reached.
SearchTrace ternary_search(const AlphaObjective& objective, const SearchConfig& config);

/// One line per iteration: index, left, right, m1, m2, ppl1, ppl2, running
/// best alpha and ppl, tab-separated with round-trip precision.
void write_trace(const SearchTrace& trace, std::ostream& out);
std::string format_trace(const SearchTrace& trace);
SearchTrace parse_trace(std::istream& in);

}  // namespace depthprune
