#pragma once

#include <cstddef>
#include <functional>

#include "depthprune/alpha_search.hpp"
#include "depthprune/toy_model.hpp"

namespace depthprune {

using CaptureFn = std::function<CaptureResult(const ToyModel&, const CalibrationSet&)>;

struct AlphaSearchResult {
  PruningPlan plan;  // plan at the best alpha
  SearchTrace trace;
  /// Distinct prune sets whose perplexity was actually computed.
  std::size_t ppl_computations = 0;
};

/// Searches alpha against perplexity of the pruned model. Boundaries are
/// captured once on `scoring` and reused; perplexity is measured on `search`
/// and memoized by the realized prune set.
AlphaSearchResult search_alpha_for_model(const ToyModel& model, const CalibrationSet& scoring,
                                         const CalibrationSet& search,
                                         const SearchConfig& config,
                                         const CaptureFn& capture = forward_capture);

}  // namespace depthprune
