#include "depthprune/model_search.hpp"

#include <map>
#include <vector>

namespace depthprune {

AlphaSearchResult search_alpha_for_model(const ToyModel& model, const CalibrationSet& scoring,
                                         const CalibrationSet& search,
                                         const SearchConfig& config, const CaptureFn& capture) {
  config.validate();
  search.validate(model.config.vocab_size);
  const CaptureResult captured = capture(model, scoring);
  const BoundarySet& boundaries = captured.boundaries;
  const auto raw = compute_raw_metrics(boundaries, config.metric_kind);
  const std::string fingerprint = boundaries.content_fingerprint();

  auto plan_at = [&](double alpha) {
    return plan_from_metrics(raw, PlanRequest{alpha, config.metric_kind, config.k, config.excluded},
                             fingerprint);
  };

  std::map<std::vector<std::size_t>, double> ppl_by_prune_set;
  auto objective = [&](double alpha) {
    const PruningPlan plan = plan_at(alpha);
    auto it = ppl_by_prune_set.find(plan.pruned_indices);
    if (it == ppl_by_prune_set.end()) {
      it = ppl_by_prune_set.emplace(plan.pruned_indices, perplexity(model, plan, search)).first;
    }
    return it->second;
  };

  AlphaSearchResult result;
  result.trace = ternary_search(objective, config);
  // With no iterations (epsilon >= 1) fall back to the midpoint.
  const double best = result.trace.iterations.empty() ? 0.5 : result.trace.best_alpha;
  result.plan = plan_at(best);
  result.ppl_computations = ppl_by_prune_set.size();
  return result;
}

}  // namespace depthprune
