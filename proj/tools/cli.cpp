#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include "depthprune/alpha_search.hpp"
#include "depthprune/error.hpp"
#include "depthprune/ingest.hpp"
#include "depthprune/model_search.hpp"
#include "depthprune/scoring.hpp"
#include "depthprune/toy_model.hpp"

namespace depthprune::cli {

namespace {

namespace fs = std::filesystem;

struct Options {
  // Model source: a checkpoint directory, or a freshly initialised toy model.
  std::string model_dir;
  std::uint64_t seed = 42;
  std::size_t vocab = 256;
  std::size_t dim = 64;
  std::size_t layers = 12;
  std::size_t heads = 4;
  std::vector<std::size_t> zero_layers;

  // Scoring source when no model is needed.
  std::string dump_dir;

  // Calibration.
  std::string calib_path;
  std::string calib_format = "bytes";
  std::uint64_t calib_seed = 0;
  std::size_t seq_len = 256;
  std::size_t samples = 32;
  std::size_t search_samples = 8;

  // Scoring and selection.
  std::string metric = "mssd";
  std::string alpha = "0.5";
  std::optional<std::size_t> k;
  std::optional<double> ratio;
  std::string exclude;
  double epsilon = 0.01;
  std::size_t max_iters = 20;

  std::string plan_path;
  std::vector<std::string> plan_paths;
  std::string out_path;
  std::string trace_path;

  // Benchmark.
  std::size_t gen_tokens = 256;
  std::size_t batch = 16;
  std::size_t prompt_tokens = 4;
  std::size_t repeats = 10;

  // Training for `init`.
  std::size_t train_steps = 0;
  double learning_rate = 0.1;
  std::size_t train_batch = 4;
  std::size_t train_seq_len = 64;
  std::size_t train_bytes = 4096;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string slurp(const std::string& path) {
  const auto bytes = read_file_bytes(path);
  return std::string(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

void write_text(const std::string& path, const std::string& text) {
  write_file_bytes(path, std::span<const std::byte>(reinterpret_cast<const std::byte*>(text.data()),
                                                    text.size()));
}

/// "a-b,c" -> {a..b, c}.
std::vector<std::size_t> parse_ranges(const std::string& spec) {
  std::vector<std::size_t> out;
  std::stringstream ss(spec);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (part.empty()) continue;
    const auto dash = part.find('-');
    try {
      if (dash == std::string::npos) {
        out.push_back(std::stoul(part));
      } else {
        const std::size_t lo = std::stoul(part.substr(0, dash));
        const std::size_t hi = std::stoul(part.substr(dash + 1));
        if (hi < lo) throw ValueError("empty range " + part);
        for (std::size_t i = lo; i <= hi; ++i) out.push_back(i);
      }
    } catch (const std::logic_error&) {
      throw ValueError("malformed --exclude entry '" + part + "'");
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

ToyModel load_model(const Options& o) {
  ToyModel model = o.model_dir.empty() ? init_model(o.vocab, o.dim, o.layers, o.heads, o.seed)
                                       : read_checkpoint(o.model_dir);
  for (std::size_t z : o.zero_layers) zero_layer(model, z);
  return model;
}

CalibrationSet load_calibration(const Options& o, std::size_t rows) {
  if (o.calib_path.empty()) {
    return calibration_from_bytes(synthetic_corpus(o.calib_seed, rows * o.seq_len), o.seq_len,
                                  rows);
  }
  const std::string text = slurp(o.calib_path);
  if (o.calib_format == "bytes") return calibration_from_bytes(text, o.seq_len, rows);
  if (o.calib_format == "ids") return calibration_from_ids(parse_id_stream(text), o.seq_len, rows);
  throw ConfigError("unknown --calib-format '" + o.calib_format + "' (bytes or ids)");
}

std::size_t resolve_k(const Options& o, std::size_t total_layers) {
  if (o.k && o.ratio) throw ConfigError("give exactly one of --k and --ratio");
  if (o.ratio) return prune_count_from_ratio(*o.ratio, total_layers);
  if (o.k) return *o.k;
  throw ConfigError("one of --k or --ratio is required");
}

bool alpha_is_search(const Options& o) { return o.alpha == "search"; }

double fixed_alpha(const Options& o) {
  try {
    std::size_t used = 0;
    const double a = std::stod(o.alpha, &used);
    if (used != o.alpha.size()) throw std::invalid_argument("trailing");
    return a;
  } catch (const std::logic_error&) {
    throw ValueError("--alpha must be a number in [0, 1] or 'search', got '" + o.alpha + "'");
  }
}

SearchConfig search_config(const Options& o, std::size_t k) {
  SearchConfig cfg;
  cfg.epsilon = o.epsilon;
  cfg.max_iterations = o.max_iters;
  cfg.k = k;
  cfg.metric_kind = parse_metric(o.metric);
  cfg.excluded = parse_ranges(o.exclude);
  return cfg;
}

/// Runs the alpha search on a model source and writes the trace if asked.
AlphaSearchResult run_search(const Options& o, const ToyModel& model, std::size_t k,
                             std::ostream* trace_out) {
  const CalibrationSet scoring = load_calibration(o, o.samples);
  const CalibrationSet search = load_calibration(o, o.search_samples);
  auto result = search_alpha_for_model(model, scoring, search, search_config(o, k));
  const std::string trace = format_trace(result.trace);
  if (!o.trace_path.empty()) {
    write_text(o.trace_path, trace);
  } else if (trace_out != nullptr) {
    *trace_out << trace;
  }
  return result;
}

BoundarySet scoring_boundaries(const Options& o) {
  if (!o.dump_dir.empty()) return read_dump(o.dump_dir);
  const ToyModel model = load_model(o);
  return forward_capture(model, load_calibration(o, o.samples)).boundaries;
}

void print_scores(const PruningPlan& plan, std::ostream& out) {
  out << "layer\tl_sim\tl_diff\ti_sim\ti_diff\timportance\n";
  for (const auto& s : plan.per_layer_scores) {
    out << s.layer_index << '\t' << fmt(s.l_sim) << '\t' << fmt(s.l_diff) << '\t' << fmt(s.i_sim)
        << '\t' << fmt(s.i_diff) << '\t' << fmt(s.importance) << '\n';
  }
}

int cmd_score(const Options& o, std::ostream& out) {
  PruningPlan plan;
  if (alpha_is_search(o)) {
    if (!o.dump_dir.empty()) throw ConfigError("--alpha search needs a model, not a dump");
    const ToyModel model = load_model(o);
    plan = run_search(o, model, o.k.value_or(0), nullptr).plan;
  } else {
    const BoundarySet b = scoring_boundaries(o);
    plan = build_plan(b, PlanRequest{fixed_alpha(o), parse_metric(o.metric), 0, {}});
  }
  if (o.out_path.empty()) {
    print_scores(plan, out);
  } else {
    std::ostringstream os;
    print_scores(plan, os);
    write_text(o.out_path, os.str());
  }
  return 0;
}

void emit_plan(const Options& o, const PruningPlan& plan, std::ostream& out) {
  if (o.out_path.empty()) {
    out << serialize_plan(plan);
  } else {
    write_plan(plan, o.out_path);
  }
}

int cmd_plan(const Options& o, std::ostream& out) {
  if (alpha_is_search(o)) {
    if (!o.dump_dir.empty()) throw ConfigError("--alpha search needs a model, not a dump");
    const ToyModel model = load_model(o);
    const auto result = run_search(o, model, resolve_k(o, model.layer_count()), nullptr);
    emit_plan(o, result.plan, out);
    return 0;
  }
  const BoundarySet b = scoring_boundaries(o);
  PlanRequest req{fixed_alpha(o), parse_metric(o.metric), resolve_k(o, b.layer_count()),
                  parse_ranges(o.exclude)};
  emit_plan(o, build_plan(b, req), out);
  return 0;
}

int cmd_search_alpha(const Options& o, std::ostream& out) {
  const ToyModel model = load_model(o);
  if (o.out_path.empty() && o.trace_path.empty()) {
    throw ConfigError("search-alpha writes the plan to --out and the trace to --trace or stdout");
  }
  const auto result = run_search(o, model, resolve_k(o, model.layer_count()), &out);
  emit_plan(o, result.plan, out);
  return 0;
}

int cmd_prune(const Options& o, std::ostream& out) {
  if (o.plan_path.empty()) throw ConfigError("prune needs --plan");
  if (o.out_path.empty()) throw ConfigError("prune needs --out <checkpoint dir>");
  const ToyModel model = load_model(o);
  const PruningPlan plan = read_plan(o.plan_path);
  const ToyModel pruned = apply_plan(model, plan);
  write_checkpoint(pruned, o.out_path);
  out << "kept " << pruned.layer_count() << " of " << model.layer_count() << " layers\n";
  return 0;
}

int cmd_ppl(const Options& o, std::ostream& out) {
  const ToyModel model = load_model(o);
  const CalibrationSet data = load_calibration(o, o.samples);
  const double ppl = o.plan_path.empty() ? perplexity(model, data)
                                         : perplexity(model, read_plan(o.plan_path), data);
  out << fmt(ppl) << '\n';
  return 0;
}

int cmd_bench(const Options& o, std::ostream& out) {
  const ToyModel model = load_model(o);
  std::vector<PruningPlan> plans;
  std::vector<std::string> labels;
  for (const auto& p : o.plan_paths) {
    plans.push_back(read_plan(p));
    labels.push_back(p);
  }
  if (plans.empty()) {
    plans.push_back(identity_plan(model.layer_count()));
    labels.push_back("dense");
  }
  BenchConfig cfg;
  cfg.gen_tokens = o.gen_tokens;
  cfg.batch = o.batch;
  cfg.prompt_tokens = o.prompt_tokens;
  cfg.repeats = o.repeats;
  cfg.prompt_seed = o.seed;
  const auto results = bench_sweep(model, plans, cfg);

  char buf[256];
  out << "plan\tlayers\ttokens_per_sec\tspeedup\tspeedup_sd\n";
  std::snprintf(buf, sizeof buf, "baseline\t%zu\t%.2f\t%.3f\t%.3f\n", model.layer_count(),
                results.front().dense_mean, 1.0, 0.0);
  out << buf;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    std::snprintf(buf, sizeof buf, "%s\t%zu\t%.2f\t%.3f\t%.3f\n", labels[i].c_str(),
                  r.kept_layers, r.pruned_mean, r.speedup, r.speedup_stddev);
    out << buf;
  }
  return 0;
}

int cmd_dump(const Options& o, std::ostream& out) {
  if (o.out_path.empty()) throw ConfigError("dump needs --out <dir>");
  const ToyModel model = load_model(o);
  const auto captured = forward_capture(model, load_calibration(o, o.samples));
  write_dump(captured.boundaries, o.out_path,
             o.model_dir.empty() ? "toy-seed-" + std::to_string(o.seed) : o.model_dir);
  out << "wrote " << captured.boundaries.layer_count() + 1 << " boundaries to " << o.out_path
      << '\n';
  return 0;
}

int cmd_init(const Options& o, std::ostream& out) {
  if (o.out_path.empty()) throw ConfigError("init needs --out <checkpoint dir>");
  ToyModel model = load_model(o);
  if (o.train_steps > 0) {
    std::string text;
    if (o.calib_path.empty()) {
      text = synthetic_corpus(o.calib_seed, o.train_bytes);
    } else {
      text = slurp(o.calib_path);
    }
    const CalibrationSet corpus = calibration_from_bytes(text, o.train_seq_len);
    TrainConfig tc;
    tc.steps = o.train_steps;
    tc.learning_rate = o.learning_rate;
    tc.batch_rows = o.train_batch;
    auto result = train_micro(model, corpus, tc);
    out << "train_loss\t" << fmt(result.initial_loss) << "\t->\t" << fmt(result.final_loss)
        << '\n';
    model = std::move(result.model);
  }
  write_checkpoint(model, o.out_path);
  out << "checkpoint\t" << model_checksum(model) << '\n';
  return 0;
}

void add_model_options(CLI::App* app, Options& o) {
  app->add_option("--model", o.model_dir, "Checkpoint directory (default: fresh toy model)");
  app->add_option("--seed", o.seed, "Toy-model seed; also seeds benchmark prompts")
      ->capture_default_str();
  app->add_option("--vocab", o.vocab, "Toy-model vocabulary size")->capture_default_str();
  app->add_option("--dim", o.dim, "Toy-model hidden width")->capture_default_str();
  app->add_option("--layers", o.layers, "Toy-model layer count")->capture_default_str();
  app->add_option("--heads", o.heads, "Toy-model attention heads")->capture_default_str();
  app->add_option("--zero-layer", o.zero_layers, "Zero the weights of these layers (repeatable)");
}

void add_calib_options(CLI::App* app, Options& o) {
  app->add_option("--calib", o.calib_path, "Calibration file (default: built-in synthetic text)");
  app->add_option("--calib-format", o.calib_format, "bytes | ids")->capture_default_str();
  app->add_option("--calib-seed", o.calib_seed, "Seed of the synthetic calibration text")
      ->capture_default_str();
  app->add_option("--seq-len", o.seq_len, "Tokens per calibration row")->capture_default_str();
  app->add_option("--samples", o.samples, "Calibration rows")->capture_default_str();
}

void add_selection_options(CLI::App* app, Options& o, bool needs_k) {
  app->add_option("--metric", o.metric, "Difference metric: mssd | masd")->capture_default_str();
  app->add_option("--alpha", o.alpha, "Fusion weight in [0,1], or 'search'")
      ->capture_default_str();
  app->add_option("--epsilon", o.epsilon, "Ternary-search precision")->capture_default_str();
  app->add_option("--max-iters", o.max_iters, "Ternary-search iteration cap")
      ->capture_default_str();
  app->add_option("--search-samples", o.search_samples, "Rows used for perplexity during search")
      ->capture_default_str();
  app->add_option("--trace", o.trace_path, "Write the search trace here");
  if (needs_k) {
    app->add_option("--k", o.k, "Layers to prune");
    app->add_option("--ratio", o.ratio, "Fraction of layers to prune; K = floor(ratio * L)");
    app->add_option("--exclude", o.exclude, "Never prune these layers, e.g. 0-1,11");
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Depth pruning by fused similarity and difference layer scores", "depthprune"};
  app.require_subcommand(1);

  auto* score = app.add_subcommand("score", "Print per-layer scores as TSV");
  add_model_options(score, o);
  add_calib_options(score, o);
  add_selection_options(score, o, false);
  score->add_option("--dump", o.dump_dir, "Score a hidden-state dump instead of a model");
  score->add_option("--out", o.out_path, "Write the table here instead of stdout");

  auto* plan = app.add_subcommand("plan", "Build a pruning plan (JSON)");
  add_model_options(plan, o);
  add_calib_options(plan, o);
  add_selection_options(plan, o, true);
  plan->add_option("--dump", o.dump_dir, "Score a hidden-state dump instead of a model");
  plan->add_option("--out", o.out_path, "Plan file (default: stdout)");

  auto* search = app.add_subcommand("search-alpha", "Ternary-search alpha on perplexity");
  add_model_options(search, o);
  add_calib_options(search, o);
  add_selection_options(search, o, true);
  search->add_option("--out", o.out_path, "Plan file for the best alpha");

  auto* prune = app.add_subcommand("prune", "Write a checkpoint with the plan's layers removed");
  add_model_options(prune, o);
  prune->add_option("--plan", o.plan_path, "Plan file")->required();
  prune->add_option("--out", o.out_path, "Output checkpoint directory")->required();

  auto* ppl = app.add_subcommand("ppl", "Perplexity on the calibration rows");
  add_model_options(ppl, o);
  add_calib_options(ppl, o);
  ppl->add_option("--plan", o.plan_path, "Evaluate with this plan's layers skipped");

  auto* bench = app.add_subcommand("bench", "Greedy-generation throughput vs the dense model");
  add_model_options(bench, o);
  bench->add_option("--plan", o.plan_paths, "Plan file (repeatable)");
  bench->add_option("--gen-tokens", o.gen_tokens, "Generated tokens per row")
      ->capture_default_str();
  bench->add_option("--batch", o.batch, "Rows generated together")->capture_default_str();
  bench->add_option("--prompt-tokens", o.prompt_tokens, "Prompt length")->capture_default_str();
  bench->add_option("--repeats", o.repeats, "Timed repeats")->capture_default_str();

  auto* dump = app.add_subcommand("dump", "Write the model's layer boundaries as an .sdt dump");
  add_model_options(dump, o);
  add_calib_options(dump, o);
  dump->add_option("--out", o.out_path, "Dump directory")->required();

  auto* init = app.add_subcommand("init", "Write a toy-model checkpoint, optionally trained");
  add_model_options(init, o);
  init->add_option("--out", o.out_path, "Checkpoint directory")->required();
  init->add_option("--calib", o.calib_path, "Training text (default: synthetic)");
  init->add_option("--calib-seed", o.calib_seed, "Seed of the synthetic training text");
  init->add_option("--train-steps", o.train_steps, "Gradient-descent steps")->capture_default_str();
  init->add_option("--lr", o.learning_rate, "Learning rate")->capture_default_str();
  init->add_option("--train-batch", o.train_batch, "Rows per step")->capture_default_str();
  init->add_option("--train-seq-len", o.train_seq_len, "Tokens per training row")
      ->capture_default_str();
  init->add_option("--train-bytes", o.train_bytes, "Synthetic training text size")
      ->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: UsageError: " << e.what() << '\n';
    return 2;
  }

  try {
    if (score->parsed()) return cmd_score(o, out);
    if (plan->parsed()) return cmd_plan(o, out);
    if (search->parsed()) return cmd_search_alpha(o, out);
    if (prune->parsed()) return cmd_prune(o, out);
    if (ppl->parsed()) return cmd_ppl(o, out);
    if (bench->parsed()) return cmd_bench(o, out);
    if (dump->parsed()) return cmd_dump(o, out);
    if (init->parsed()) return cmd_init(o, out);
  } catch (const Error& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "error: " << e.kind() << ": " << msg << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "error: InternalError: " << msg << '\n';
    return 1;
  }
  return 1;
}

}  // namespace depthprune::cli
