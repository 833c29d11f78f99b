#include "depthprune/alpha_search.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "depthprune/error.hpp"

namespace depthprune {

void SearchConfig::validate() const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ConfigError("epsilon must be > 0");
  if (max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
}

SearchTrace ternary_search(const AlphaObjective& objective, const SearchConfig& config) {
  config.validate();
  SearchTrace trace;
  double left = 0.0;
  double right = 1.0;

  auto evaluate = [&](double alpha) {
    const double v = objective(alpha);
    ++trace.evaluations;
    if (std::isnan(v)) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.17g", alpha);
      throw SearchError(std::string("objective returned NaN at alpha = ") + buf);
    }
    return v;
  };

  while (right - left > config.epsilon && trace.iterations.size() < config.max_iterations) {
    SearchStep step;
    step.left = left;
    step.right = right;
    step.m1 = left + (right - left) / 3.0;
    step.m2 = right - (right - left) / 3.0;
    step.ppl1 = evaluate(step.m1);
    step.ppl2 = evaluate(step.m2);

    if (step.ppl1 < trace.best_ppl) {
      trace.best_ppl = step.ppl1;
      trace.best_alpha = step.m1;
    }
    if (step.ppl2 < trace.best_ppl) {
      trace.best_ppl = step.ppl2;
      trace.best_alpha = step.m2;
    }
    step.best_alpha = trace.best_alpha;
    step.best_ppl = trace.best_ppl;

    if (step.ppl1 > step.ppl2) {
      left = step.m1;
    } else {
      right = step.m2;
    }
    trace.iterations.push_back(step);
  }
  trace.final_left = left;
  trace.final_right = right;
  return trace;
}

void write_trace(const SearchTrace& trace, std::ostream& out) {
  out << "# iter\tleft\tright\tm1\tm2\tppl1\tppl2\tbest_alpha\tbest_ppl\n";
  char buf[512];
  for (std::size_t i = 0; i < trace.iterations.size(); ++i) {
    const SearchStep& s = trace.iterations[i];
    std::snprintf(buf, sizeof buf, "%zu\t%.17g\t%.17g\t%.17g\t%.17g\t%.17g\t%.17g\t%.17g\t%.17g\n",
                  i + 1, s.left, s.right, s.m1, s.m2, s.ppl1, s.ppl2, s.best_alpha, s.best_ppl);
    out << buf;
  }
}

std::string format_trace(const SearchTrace& trace) {
  std::ostringstream os;
  write_trace(trace, os);
  return os.str();
}

SearchTrace parse_trace(std::istream& in) {
  SearchTrace trace;
  std::string line;
  std::size_t expected = 1;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    std::istringstream ls(line);
    std::size_t index = 0;
    SearchStep s;
    if (!(ls >> index >> s.left >> s.right >> s.m1 >> s.m2 >> s.ppl1 >> s.ppl2 >> s.best_alpha >>
          s.best_ppl)) {
      throw FormatError("malformed trace line: " + line);
    }
    if (index != expected++) throw FormatError("trace iterations out of order at: " + line);
    trace.iterations.push_back(s);
  }
  trace.evaluations = 2 * trace.iterations.size();
  if (!trace.iterations.empty()) {
    const SearchStep& last = trace.iterations.back();
    trace.best_alpha = last.best_alpha;
    trace.best_ppl = last.best_ppl;
    trace.final_left = last.ppl1 > last.ppl2 ? last.m1 : last.left;
    trace.final_right = last.ppl1 > last.ppl2 ? last.right : last.m2;
  }
  return trace;
}

}  // namespace depthprune
