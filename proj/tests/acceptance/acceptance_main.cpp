// Acceptance suite: one PASS/FAIL line per criterion, exit 1 if any fails.
// An optional argument runs only criteria whose name contains it.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "depthprune/alpha_search.hpp"
#include "depthprune/error.hpp"
#include "depthprune/hash.hpp"
#include "depthprune/ingest.hpp"
#include "depthprune/metrics.hpp"
#include "depthprune/model_search.hpp"
#include "depthprune/scoring.hpp"
#include "depthprune/toy_model.hpp"
#include "oracle.hpp"
#include "support.hpp"

using namespace depthprune;
using testing_support::random_matrix;
using testing_support::rel_err;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& why) {
    if (!ok && pass) {
      pass = false;
      detail = why;
    }
  }
};

std::string fmt(const char* f, double a = 0, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// 8 x 256 rows used for perplexity, mirroring the alpha-search subset.
const CalibrationSet& search_calibration() {
  static const CalibrationSet c =
      calibration_from_bytes(synthetic_corpus(11, 8 * 256), 256, 8);
  return c;
}

// ---------------------------------------------------------------------------

Outcome metric_oracle_equivalence() {
  Outcome o;
  std::mt19937_64 rng(1001);
  std::uniform_int_distribution<std::size_t> rows_d(1, 64), cols_d(1, 128);
  std::uniform_real_distribution<double> log_scale(-3.0, 3.0);
  std::bernoulli_distribution zero_row(0.05);
  double worst = 0.0;
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < 1000; ++i) {
    const std::size_t r = rows_d(rng), c = cols_d(rng);
    TokenMatrix a = random_matrix(rng, r, c, std::pow(10.0, log_scale(rng)));
    TokenMatrix b = random_matrix(rng, r, c, std::pow(10.0, log_scale(rng)));
    for (std::size_t j = 0; j < r; ++j) {
      if (zero_row(rng)) {
        for (double& v : a.mutable_row(j)) v = 0.0;
      }
    }
    const auto ra = oracle::to_rows(a), rb = oracle::to_rows(b);
    std::size_t degenerate = 0;
    const auto cos = cosine_dissimilarity(a, b);
    const double e1 = rel_err(cos.dissimilarity, oracle::cosine_dissimilarity(ra, rb, &degenerate));
    const double e2 = rel_err(mssd(a, b), oracle::mssd(ra, rb));
    const double e3 = rel_err(masd(a, b), oracle::masd(ra, rb));
    worst = std::max({worst, e1, e2, e3});
    o.require(cos.degenerate_count == degenerate, "degenerate count differs from oracle");
  }
  const double secs = seconds_since(t0);
  o.require(worst <= 1e-10, fmt("max relative error %.3g > 1e-10", worst));
  o.require(secs < 10.0, fmt("runtime %.2f s >= 10 s", secs));
  if (o.pass) o.detail = fmt("1000 cases, max rel err %.3g, %.2f s", worst, secs);
  return o;
}

Outcome scale_covariance() {
  Outcome o;
  std::mt19937_64 rng(1002);
  std::uniform_int_distribution<std::size_t> rows_d(1, 32), cols_d(1, 64);
  std::uniform_real_distribution<double> log_c(-3.0, 3.0);
  double w_cos = 0, w_mssd = 0, w_masd = 0;
  for (int i = 0; i < 200; ++i) {
    const std::size_t r = rows_d(rng), c = cols_d(rng);
    const TokenMatrix a = random_matrix(rng, r, c), b = random_matrix(rng, r, c);
    const double k = std::pow(10.0, log_c(rng));
    TokenMatrix ka = a, kb = b;
    for (double& v : ka.mutable_data()) v *= k;
    for (double& v : kb.mutable_data()) v *= k;
    w_cos = std::max(w_cos, std::fabs(cosine_dissimilarity(ka, kb).dissimilarity -
                                      cosine_dissimilarity(a, b).dissimilarity));
    w_mssd = std::max(w_mssd, rel_err(mssd(ka, kb), k * k * mssd(a, b)));
    w_masd = std::max(w_masd, rel_err(masd(ka, kb), k * masd(a, b)));
  }
  o.require(w_cos <= 1e-12, fmt("cosine moved by %.3g > 1e-12", w_cos));
  o.require(w_mssd <= 1e-10, fmt("mssd c^2 rel err %.3g > 1e-10", w_mssd));
  o.require(w_masd <= 1e-10, fmt("masd c rel err %.3g > 1e-10", w_masd));
  if (o.pass) o.detail = fmt("200 cases, cos %.2g, mssd %.2g, masd %.2g", w_cos, w_mssd, w_masd);
  return o;
}

Outcome outlier_sensitivity() {
  // Dyadic values keep every sum exact, so masd equality is checked with ==.
  Outcome o;
  std::mt19937_64 rng(1003);
  std::uniform_int_distribution<std::size_t> rows_d(1, 16), cols_d(2, 32);
  std::uniform_int_distribution<int> exp_d(-10, 4), int_d(-16, 16);
  double min_ratio = INFINITY;
  for (int i = 0; i < 100; ++i) {
    const std::size_t r = rows_d(rng), c = cols_d(rng);
    const double eps = std::ldexp(1.0, exp_d(rng));
    TokenMatrix base(r, c);
    for (double& v : base.mutable_data()) v = int_d(rng) * eps;
    TokenMatrix spread = base, peak = base;
    for (double& v : spread.mutable_data()) v += eps;
    std::uniform_int_distribution<std::size_t> pick(0, r * c - 1);
    peak.mutable_data()[pick(rng)] += static_cast<double>(r * c) * eps;
    const double m_spread = masd(base, spread), m_peak = masd(base, peak);
    o.require(m_spread == m_peak, fmt("masd differs: %.17g vs %.17g", m_spread, m_peak));
    const double s_spread = mssd(base, spread), s_peak = mssd(base, peak);
    o.require(s_peak > s_spread, fmt("mssd not larger for concentrated mass: %.17g <= %.17g",
                                     s_peak, s_spread));
    min_ratio = std::min(min_ratio, s_peak / s_spread);
  }
  if (o.pass) o.detail = fmt("100 cases, masd equal, min mssd ratio %.3g", min_ratio);
  return o;
}

Outcome alpha_zero_equivalence() {
  Outcome o;
  auto argsort = [](const std::vector<double>& key) {
    std::vector<std::size_t> idx(key.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return key[a] < key[b]; });
    return idx;
  };
  std::mt19937_64 rng(1004);
  std::uniform_int_distribution<std::size_t> layers_d(1, 40);
  std::uniform_real_distribution<double> sim(0.0, 2.0), diff(0.0, 60.0);
  for (int i = 0; i < 100; ++i) {
    const std::size_t n = layers_d(rng);
    std::vector<RawLayerMetrics> raw(n);
    std::vector<double> l_sim(n);
    for (std::size_t j = 0; j < n; ++j) {
      raw[j].layer_index = j;
      raw[j].l_sim = l_sim[j] = sim(rng);
      raw[j].l_diff = diff(rng);
    }
    const auto plan = plan_from_metrics(raw, PlanRequest{0.0, MetricKind::kMssd, n / 2, {}}, "r");
    o.require(plan.ranking == argsort(l_sim), "random vector " + std::to_string(i) + " differs");
  }
  const auto& b = testing_support::seed42_capture().boundaries;
  for (auto kind : {MetricKind::kMssd, MetricKind::kMasd}) {
    const auto plan = build_plan(b, 0.0, kind, 4);
    const auto ref = oracle::plan(b, 0.0, kind == MetricKind::kMssd, 4);
    o.require(plan.ranking == argsort(ref.l_sim), "seed-42 ranking differs from argsort l_sim");
  }
  if (o.pass) o.detail = "100 random vectors and seed-42 fixture (both metrics) match exactly";
  return o;
}

Outcome end_to_end_oracle() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const ToyModel& model = testing_support::seed42_model();
  const auto cap = forward_capture(model, testing_support::seed42_calibration());
  const BoundarySet& b = cap.boundaries;

  // Boundaries of the first row against the straight-line forward.
  const auto& row = testing_support::seed42_calibration().sequences[0];
  oracle::Rows x(256, std::vector<double>(64));
  for (std::size_t t = 0; t < 256; ++t) {
    for (std::size_t d = 0; d < 64; ++d) {
      x[t][d] = model.embedding(row[t], static_cast<long>(d)) + model.positions(static_cast<long>(t), static_cast<long>(d));
    }
  }
  double worst_state = 0.0;
  for (std::size_t i = 0; i <= 12; ++i) {
    const auto h = b.boundary(i).data();
    for (std::size_t t = 0; t < 256; ++t) {
      for (std::size_t d = 0; d < 64; ++d) {
        worst_state = std::max(worst_state, std::fabs(h[t * 64 + d] - x[t][d]));
      }
    }
    if (i == 12) break;
    const auto upd = oracle::layer_update(model, i, x);
    for (std::size_t t = 0; t < 256; ++t) {
      for (std::size_t d = 0; d < 64; ++d) x[t][d] += upd[t][d];
    }
  }
  o.require(worst_state <= 1e-9, fmt("boundary differs from oracle forward by %.3g", worst_state));

  double worst = 0.0;
  int plans = 0;
  for (auto kind : {MetricKind::kMssd, MetricKind::kMasd}) {
    for (double alpha : {0.0, 0.5, 1.0}) {
      for (std::size_t k : {2u, 4u, 6u}) {
        const PruningPlan p = build_plan(b, alpha, kind, k);
        const auto ref = oracle::plan(b, alpha, kind == MetricKind::kMssd, k);
        ++plans;
        const std::string tag = std::string(metric_name(kind)) + fmt(" alpha=%g k=%g", alpha, double(k));
        o.require(p.pruned_indices == ref.pruned, "prune set differs at " + tag);
        o.require(p.ranking == ref.ranking, "ranking differs at " + tag);
        for (std::size_t i = 0; i < 12; ++i) {
          const auto& s = p.per_layer_scores[i];
          worst = std::max({worst, rel_err(s.l_sim, ref.l_sim[i]), rel_err(s.l_diff, ref.l_diff[i]),
                            rel_err(s.i_sim, ref.i_sim[i]), rel_err(s.i_diff, ref.i_diff[i]),
                            rel_err(s.importance, ref.importance[i])});
        }
      }
    }
  }
  const double secs = seconds_since(t0);
  o.require(worst <= 1e-10, fmt("score rel err %.3g > 1e-10", worst));
  o.require(secs < 60.0, fmt("runtime %.1f s >= 60 s", secs));
  if (o.pass) {
    o.detail = fmt("%g plans exact, score rel err %.2g, %.1f s", plans, worst, secs);
  }
  return o;
}

Outcome ternary_search_conformance() {
  Outcome o;
  auto check_evals = [&](const SearchTrace& t) {
    o.require(t.evaluations == 2 * t.iterations.size(), "evaluations != 2 x iterations");
  };
  auto same = [&](const SearchTrace& t, const oracle::Replay& r, const std::string& tag) {
    bool ok = t.iterations.size() == r.steps.size() && t.best_alpha == r.best_alpha &&
              t.best_ppl == r.best_f && t.evaluations == static_cast<std::size_t>(r.calls);
    for (std::size_t i = 0; ok && i < r.steps.size(); ++i) {
      const auto& a = t.iterations[i];
      const auto& e = r.steps[i];
      ok = a.left == e.left && a.right == e.right && a.m1 == e.m1 && a.m2 == e.m2 &&
           a.ppl1 == e.f1 && a.ppl2 == e.f2 && a.best_alpha == e.best_alpha && a.best_ppl == e.best_f;
    }
    o.require(ok, "trace differs from hand-stepped replay (" + tag + ")");
  };

  std::mt19937_64 rng(1006);
  std::uniform_real_distribution<double> cd(0.05, 0.95), u(0.0, 1.0);
  SearchConfig fine;
  fine.epsilon = 0.001;
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const double c = cd(rng);
    const auto t = ternary_search([&](double a) { return (a - c) * (a - c); }, fine);
    worst = std::max(worst, std::fabs(t.best_alpha - c));
    check_evals(t);
  }
  o.require(worst <= 0.02, fmt("quadratic best_alpha off by %.3g > 0.02", worst));

  SearchConfig coarse;
  for (int i = 0; i < 20; ++i) {
    std::vector<double> cuts{u(rng), u(rng), u(rng), u(rng)};
    std::sort(cuts.begin(), cuts.end());
    std::vector<double> level(5);
    for (double& l : level) l = std::round(100.0 + 50.0 * u(rng));
    auto f = [&](double a) {
      std::size_t k = 0;
      while (k < cuts.size() && a >= cuts[k]) ++k;
      return level[k];
    };
    const auto t = ternary_search(f, coarse);
    same(t, oracle::ternary(f, coarse.epsilon, 20), "synthetic step " + std::to_string(i));
    check_evals(t);
  }

  // Recorded objectives of the seed-42 model: alpha -> PPL of the pruned model.
  // At k=4 MSSD the prune set does not move with alpha; k=6 MASD gives steps.
  const CaptureFn cached = [](const ToyModel&, const CalibrationSet&) {
    return testing_support::seed42_capture();
  };
  std::string recorded;
  for (auto [k, kind] : {std::pair{std::size_t{4}, MetricKind::kMssd}, {6, MetricKind::kMasd}}) {
    SearchConfig cfg;
    cfg.k = k;
    cfg.metric_kind = kind;
    const auto r = search_alpha_for_model(testing_support::seed42_model(),
                                          testing_support::seed42_calibration(),
                                          search_calibration(), cfg, cached);
    std::map<double, double> table;
    std::set<double> levels;
    for (const auto& s : r.trace.iterations) {
      table[s.m1] = s.ppl1;
      table[s.m2] = s.ppl2;
      levels.insert(s.ppl1);
      levels.insert(s.ppl2);
    }
    const auto replay = oracle::ternary([&](double a) { return table.at(a); }, 0.01, 20);
    const std::string tag = "seed-42 k=" + std::to_string(k) + " " + std::string(metric_name(kind));
    same(r.trace, replay, tag);
    check_evals(r.trace);
    std::ostringstream os;
    write_trace(r.trace, os);
    std::istringstream is(os.str());
    same(parse_trace(is), replay, tag + " trace log");
    recorded += fmt("; k=%g: alpha* %.4f, %g PPL levels", double(k), r.trace.best_alpha,
                    double(levels.size()));
  }
  if (o.pass) {
    o.detail = fmt("quadratic max |a*-c| %.2g; 20 step objectives replay", worst) + recorded;
  }
  return o;
}

Outcome perplexity_contracts() {
  Outcome o;
  ToyModel uniform = testing_support::seed42_model();
  uniform.lm_head.setZero();
  const double pu = perplexity(uniform, search_calibration());
  o.require(rel_err(pu, 256.0) <= 1e-9, fmt("uniform PPL %.17g != 256", pu));

  const ToyModel& m = testing_support::seed42_model();
  const double dense = perplexity(m, search_calibration());
  const auto k0 = build_plan(testing_support::seed42_capture().boundaries, 0.5, MetricKind::kMssd, 0);
  o.require(perplexity(m, k0, search_calibration()) == dense, "k=0 plan PPL not bit-identical");
  o.require(perplexity(m, identity_plan(12), search_calibration()) == dense,
            "identity plan PPL not bit-identical");

  std::vector<std::size_t> all(12);
  std::iota(all.begin(), all.end(), std::size_t{0});
  const CalibrationSet small = calibration_from_bytes(synthetic_corpus(17, 8 * 32), 32, 8);
  const double e_small = rel_err(perplexity(m, small), oracle::perplexity(m, small, all));
  const double e_full = rel_err(dense, oracle::perplexity(m, search_calibration(), all));
  const auto p4 = build_plan(testing_support::seed42_capture().boundaries, 0.5, MetricKind::kMssd, 4);
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < 12; ++i) {
    if (!p4.is_pruned(i)) kept.push_back(i);
  }
  const double e_pruned =
      rel_err(perplexity(m, p4, search_calibration()), oracle::perplexity(m, search_calibration(), kept));
  const double worst = std::max({e_small, e_full, e_pruned});
  o.require(worst <= 1e-9, fmt("PPL vs log-softmax oracle rel err %.3g > 1e-9", worst));
  if (o.pass) {
    o.detail = fmt("uniform %.12g, dense PPL %.6f, oracle rel err %.2g", pu, dense, worst);
  }
  return o;
}

Outcome identity_layer_pruning() {
  Outcome o;
  const ToyModel& base = testing_support::seed42_model();
  const std::size_t at = 5;

  // Insert a zero-weight block at position `at`, giving a 13-layer model.
  ToyModel m = base;
  LayerWeights zero = base.layers[0];
  m.layers.insert(m.layers.begin() + at, zero);
  m.config.layer_count = 13;
  m.source_layers.resize(13);
  std::iota(m.source_layers.begin(), m.source_layers.end(), std::size_t{0});
  zero_layer(m, at);

  // Also zero an existing layer in place.
  ToyModel z = base;
  zero_layer(z, 8);

  const auto& calib = testing_support::seed42_calibration();
  const auto& data = search_calibration();
  for (auto [model, layer] : {std::pair<const ToyModel*, std::size_t>{&m, at}, {&z, 8}}) {
    const auto cap = forward_capture(*model, calib);
    const std::size_t n = model->layer_count();
    for (double alpha : {0.0, 0.5, 1.0}) {
      for (auto kind : {MetricKind::kMssd, MetricKind::kMasd}) {
        const auto p = build_plan(cap.boundaries, alpha, kind, 1);
        o.require(p.ranking.front() == layer,
                  fmt("alpha %g: zero layer %g not ranked first", alpha, double(layer)));
      }
    }
    const double dense = perplexity(*model, data);
    o.require(perplexity(*model, explicit_plan(n, {layer}), data) == dense,
              "pruning the zero layer changed PPL");
    o.require(perplexity(apply_plan(*model, explicit_plan(n, {layer})), data) == dense,
              "apply_plan without the zero layer changed PPL");
  }
  o.require(perplexity(m, data) == perplexity(base, data), "inserted zero layer changed PPL");
  if (o.pass) o.detail = "inserted and in-place zero layers rank first at alpha 0, 0.5, 1; PPL bit-identical";
  return o;
}

Outcome throughput_trend() {
  Outcome o;
  const ToyModel& m = testing_support::seed42_model();
  const auto& b = testing_support::seed42_capture().boundaries;
  std::vector<PruningPlan> plans;
  for (std::size_t k : {0u, 2u, 4u}) plans.push_back(build_plan(b, 0.5, MetricKind::kMssd, k));
  BenchConfig cfg;
  cfg.gen_tokens = 256;
  cfg.batch = 16;
  cfg.prompt_tokens = 4;
  cfg.repeats = 10;
  const auto r = bench_sweep(m, plans, cfg);
  const double s0 = r[0].speedup, s2 = r[1].speedup, s4 = r[2].speedup;
  o.require(s0 < s2 && s2 < s4, fmt("speedup not increasing: k0 %.3f, k2 %.3f, k4 %.3f", s0, s2, s4));
  o.require(s4 > 1.10, fmt("k=4 speedup %.3f <= 1.10", s4));
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "speedup k0 %.3f (sd %.3f), k2 %.3f (sd %.3f), k4 %.3f (sd %.3f); dense %.0f tok/s; "
                "paper-scale 1.49x at 32.6%% is context only",
                s0, r[0].speedup_stddev, s2, r[1].speedup_stddev, s4, r[2].speedup_stddev,
                r[0].dense_mean);
  o.detail = o.pass ? std::string(buf) : o.detail + "; " + buf;
  return o;
}

Outcome gradient_check() {
  Outcome o;
  const CalibrationSet data = calibration_from_bytes(synthetic_corpus(7, 2 * 16), 16, 2);
  const auto samples = oracle::gradient_check(testing_support::seed42_model(), data, 20, 1010);
  double worst = 0.0;
  std::string where;
  std::set<std::string> tensors;
  for (const auto& s : samples) {
    tensors.insert(s.name);
    if (s.rel_err > worst) {
      worst = s.rel_err;
      where = s.name + "[" + std::to_string(s.index) + "]";
    }
  }
  o.require(worst <= 1e-4, fmt("rel err %.3g > 1e-4", worst) + " at " + where);
  if (o.pass) o.detail = fmt("20 parameters over %g tensors, max rel err %.2g", double(tensors.size()), worst);
  return o;
}

template <class E, class F>
bool throws(F&& f) {
  try {
    f();
  } catch (const E&) {
    return true;
  } catch (...) {
    return false;
  }
  return false;
}

std::string slurp(const fs::path& p) {
  const auto bytes = read_file_bytes(p);
  return std::string(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

void spit(const fs::path& p, const std::string& s) {
  write_file_bytes(p, std::span<const std::byte>(reinterpret_cast<const std::byte*>(s.data()), s.size()));
}

Outcome format_round_trips() {
  Outcome o;
  testing_support::TempDir dir("acceptance");
  const auto& b = testing_support::seed42_capture().boundaries;

  write_dump(b, dir / "dump");
  const BoundarySet back = read_dump(dir / "dump");
  bool exact = back.layer_count() == b.layer_count();
  for (std::size_t i = 0; exact && i <= b.layer_count(); ++i) {
    const auto x = b.boundary(i).data(), y = back.boundary(i).data();
    for (std::size_t k = 0; exact && k < x.size(); ++k) {
      exact = static_cast<float>(x[k]) == static_cast<float>(y[k]) &&
              y[k] == static_cast<double>(static_cast<float>(y[k]));
    }
  }
  o.require(exact, "dump payload not bit-exact after round trip");
  write_dump(back, dir / "dump2");
  for (std::size_t i = 0; i <= b.layer_count(); ++i) {
    const std::string name = boundary_file_name(i);
    o.require(slurp(dir / "dump" / name) == slurp(dir / "dump2" / name), name + " not byte-identical");
  }
  o.require(slurp(dir / "dump" / "manifest.json") == slurp(dir / "dump2" / "manifest.json"),
            "manifest not byte-identical");

  int plans = 0;
  for (double alpha : {0.0, 0.25, 1.0 / 3.0, 1.0}) {
    for (std::size_t k : {0u, 3u, 12u}) {
      const PruningPlan p = build_plan(b, alpha, MetricKind::kMasd, k);
      const std::string text = serialize_plan(p);
      o.require(parse_plan(text) == p, "plan round trip not equal");
      o.require(serialize_plan(parse_plan(text)) == text, "plan re-serialization differs");
      ++plans;
    }
  }
  const PruningPlan p = build_plan(b, 0.5, MetricKind::kMssd, 4);
  write_plan(p, dir / "plan.json");
  o.require(read_plan(dir / "plan.json") == p, "plan file round trip not equal");

  write_checkpoint(testing_support::seed42_model(), dir / "ckpt");
  o.require(read_checkpoint(dir / "ckpt") == testing_support::seed42_model(),
            "checkpoint round trip not equal");

  // Corrupted fixtures.
  const fs::path victim = dir / "dump" / boundary_file_name(3);
  const std::string good = slurp(victim);
  std::string s = good;
  s[0] = 'X';
  spit(victim, s);
  o.require(throws<FormatError>([&] { read_dump(dir / "dump"); }), "bad magic not FormatError");
  spit(victim, good.substr(0, good.size() - 100));
  o.require(throws<FormatError>([&] { read_dump(dir / "dump"); }), "truncation not FormatError");
  s = good;
  s[good.size() / 2] ^= 0x40;
  spit(victim, s);
  o.require(throws<IntegrityError>([&] { read_dump(dir / "dump"); }), "bit flip not IntegrityError");
  spit(victim, good);
  {
    // Rewrite boundary 3 with a different shape and a matching hash.
    write_sdt(victim, TensorF({2, 4, 8}));
    std::string manifest = slurp(dir / "dump" / "manifest.json");
    const auto& m = read_dump_manifest(dir / "dump2");
    const std::string old_hash = m.files[3].hash;
    const std::string new_hash = sha256_hex(read_file_bytes(victim));
    manifest.replace(manifest.find(old_hash), old_hash.size(), new_hash);
    spit(dir / "dump" / "manifest.json", manifest);
    o.require(throws<ShapeError>([&] { read_dump(dir / "dump"); }), "shape mismatch not ShapeError");
  }
  std::string pj = serialize_plan(p);
  std::string bad_version = pj;
  bad_version.replace(bad_version.find("\"version\": 1"), 12, "\"version\": 2");
  o.require(throws<VersionError>([&] { parse_plan(bad_version); }), "plan version not VersionError");
  PruningPlan skew = p;
  skew.pruned_indices = {skew.ranking[0], skew.ranking[1], skew.ranking[2], skew.ranking[6]};
  std::sort(skew.pruned_indices.begin(), skew.pruned_indices.end());
  o.require(throws<PlanError>([&] { parse_plan(serialize_plan(skew)); }),
            "non-prefix prune set not PlanError");
  o.require(throws<FormatError>([&] { parse_plan(pj.substr(0, pj.size() / 2)); }),
            "truncated plan not FormatError");
  if (o.pass) o.detail = fmt("dump (13 boundaries), %g plans, checkpoint bit-exact; 7 corruptions classified", plans);
  return o;
}

struct Criterion {
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {"metric-oracle-equivalence", metric_oracle_equivalence},
      {"scale-covariance", scale_covariance},
      {"outlier-sensitivity", outlier_sensitivity},
      {"alpha0-shortgpt-equivalence", alpha_zero_equivalence},
      {"end-to-end-oracle", end_to_end_oracle},
      {"ternary-search-conformance", ternary_search_conformance},
      {"perplexity-contracts", perplexity_contracts},
      {"identity-layer-pruning", identity_layer_pruning},
      {"throughput-trend", throughput_trend},
      {"gradient-check", gradient_check},
      {"format-round-trips", format_round_trips},
  };
  const std::string filter = argc > 1 ? argv[1] : "";
  int failures = 0;
  for (const auto& c : criteria) {
    if (!filter.empty() && std::string(c.name).find(filter) == std::string::npos) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("unexpected exception: ") + e.what();
    }
    std::printf("%s %-28s %6.1fs  %s\n", o.pass ? "PASS" : "FAIL", c.name, seconds_since(t0),
                o.detail.c_str());
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
