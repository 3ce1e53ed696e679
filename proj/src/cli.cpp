#include "edgevit/cli.hpp"

#include <algorithm>
#include <numeric>
#include <optional>
#include <ostream>

#include "CLI11.hpp"
#include "edgevit/analysis.hpp"
#include "edgevit/bench.hpp"
#include "edgevit/errors.hpp"
#include "edgevit/model.hpp"
#include "edgevit/parallel.hpp"
#include "edgevit/power.hpp"
#include "edgevit/tensor_io.hpp"
#include "edgevit/variant_json.hpp"
#include "edgevit/weights.hpp"
#include "json.hpp"

namespace edgevit::cli {

namespace {

using nlohmann::json;

struct ModelSource {
  std::string variant = "xxs";
  std::string spec_path;

  void add_to(CLI::App& app) {
    auto* v = app.add_option("--variant", variant, "Preset: xxs, xs or s")
                  ->check(CLI::IsMember({"xxs", "xs", "s"}));
    auto* s = app.add_option("--spec", spec_path, "JSON variant spec file")->check(CLI::ExistingFile);
    v->excludes(s);
  }

  VariantSpec resolve() const {
    return spec_path.empty() ? build_variant(variant) : load_variant_file(spec_path);
  }
};

json shape_json(const Shape& s) { return json(s); }

void emit(std::ostream& out, bool as_json, const json& j, const std::string& text) {
  if (as_json) {
    out << j.dump(2) << '\n';
  } else {
    out << text;
  }
}

// ---- infer ---------------------------------------------------------------

struct InferArgs {
  ModelSource model;
  std::string weights;
  std::uint64_t seed = 0;
  std::string input = "random";
  std::int64_t input_size = 0;
  std::string output;
  int threads = 1;
  bool json = false;
};

int do_infer(const InferArgs& a, std::ostream& out) {
  const VariantSpec spec = a.model.resolve();
  set_num_threads(a.threads);
  const WeightStore weights = a.weights.empty() ? init_params(spec, a.seed) : load_weights(a.weights);
  const auto size = a.input_size > 0 ? a.input_size : spec.input_size;
  const Tensor x = a.input == "random" ? random_input(spec, size, a.seed) : load_tensor(a.input);
  ForwardTrace trace;
  const Tensor logits = Model(spec, weights).forward(x, &trace);
  if (!a.output.empty()) save_tensor(logits, a.output);

  const auto classes = logits.dim(-1);
  std::vector<std::int64_t> order(static_cast<std::size_t>(classes));
  std::iota(order.begin(), order.end(), 0);
  const auto k = std::min<std::int64_t>(5, classes);
  std::partial_sort(order.begin(), order.begin() + k, order.end(),
                    [&](auto l, auto r) { return logits[l] > logits[r]; });
  json top = json::array();
  std::string text = "variant " + spec.name + ", input " + shape_to_string(x.shape()) +
                     ", logits " + shape_to_string(logits.shape()) + "\nstages";
  json stages = json::array();
  for (const auto& s : trace.stage_shapes) {
    stages.push_back(shape_json(s));
    text += " " + shape_to_string(s);
  }
  text += "\ntop-" + std::to_string(k) + ":";
  for (std::int64_t i = 0; i < k; ++i) {
    const auto c = order[static_cast<std::size_t>(i)];
    top.push_back({{"class", c}, {"logit", logits[c]}});
    text += " " + std::to_string(c);
  }
  text += "\n";
  if (!a.output.empty()) text += "wrote " + a.output + "\n";
  emit(out, a.json,
       {{"command", "infer"},
        {"variant", spec.name},
        {"input_shape", shape_json(x.shape())},
        {"logits_shape", shape_json(logits.shape())},
        {"stage_shapes", stages},
        {"top", top},
        {"output", a.output.empty() ? json(nullptr) : json(a.output)}},
       text);
  return kExitOk;
}

// ---- count -----------------------------------------------------------------

struct CountArgs {
  ModelSource model;
  std::int64_t input_size = 0;
  bool breakdown = false;
  bool json = false;
};

int do_count(const CountArgs& a, std::ostream& out) {
  const VariantSpec spec = a.model.resolve();
  const auto size = a.input_size > 0 ? a.input_size : spec.input_size;
  const auto rep = analysis::count_macs(spec, size);
  json j = analysis::to_json(rep, a.breakdown);
  j["command"] = "count";
  emit(out, a.json, j, analysis::to_text(rep, a.breakdown));
  return kExitOk;
}

// ---- bench -----------------------------------------------------------------

struct BenchArgs {
  ModelSource model;
  std::string weights;
  std::uint64_t seed = 0;
  std::int64_t input_size = 0;
  bench::BenchOptions opts;
  bool json = false;
};

int do_bench(const BenchArgs& a, std::ostream& out) {
  const VariantSpec spec = a.model.resolve();
  const WeightStore weights = a.weights.empty() ? init_params(spec, a.seed) : load_weights(a.weights);
  const auto size = a.input_size > 0 ? a.input_size : spec.input_size;
  const Model model(spec, weights);
  const auto rep = bench::run_latency(model, random_input(spec, size, a.seed), a.opts);
  json j = bench::to_json(rep);
  j["command"] = "bench";
  emit(out, a.json, j, bench::to_text(rep));
  return kExitOk;
}

// ---- power -----------------------------------------------------------------

struct PowerAnalyzeArgs {
  std::string trace;
  std::int64_t expected = 50;
  std::optional<double> idle_start, idle_end;
  std::optional<double> top1;
  power::DetectOptions detect;
  double merge_gap_ms = 5.0;
  bool json = false;
};

int do_power_analyze(const PowerAnalyzeArgs& a, std::ostream& out) {
  const auto trace = power::load_trace(a.trace);
  if (trace.size() == 0) throw ArgumentError("trace has no samples");
  const double t0 = trace.time_s.front();
  const double start = a.idle_start.value_or(t0);
  const double end = a.idle_end.value_or(start + 0.5);
  const auto bg = power::estimate_background(trace, start, end);
  auto detect = a.detect;
  detect.merge_gap_s = a.merge_gap_ms * 1e-3;
  const auto regions = power::detect_regions(trace, bg.mean_w, bg.std_w,
                                             static_cast<std::size_t>(a.expected), detect);
  const auto rep = power::analyze(trace, regions, bg);
  const double* top1 = a.top1 ? &*a.top1 : nullptr;
  json j = power::to_json(rep, top1);
  j["command"] = "power analyze";
  j["trace"] = a.trace;
  j["idle_window_s"] = {start, end};
  emit(out, a.json, j, power::to_text(rep, top1));
  return kExitOk;
}

struct PowerSynthArgs {
  power::SynthOptions opts;
  std::string output;
  bool json = false;
};

int do_power_synth(const PowerSynthArgs& a, std::ostream& out) {
  const auto syn = power::synthesize(a.opts);
  power::save_trace(syn.trace, a.output);
  json j = {{"command", "power synth"},
            {"output", a.output},
            {"samples", syn.trace.size()},
            {"count", a.opts.count},
            {"rate_hz", a.opts.rate_hz},
            {"truth", {{"energy_mj", syn.energy_mj}, {"power_w", syn.power_w}}}};
  std::ostringstream text;
  text << "wrote " << syn.trace.size() << " samples (" << a.opts.count << " pulses) to " << a.output
       << "\ntruth: " << syn.energy_mj << " mJ, " << syn.power_w << " W per inference\n";
  emit(out, a.json, j, text.str());
  return kExitOk;
}

// ---- init-weights ----------------------------------------------------------

struct InitArgs {
  ModelSource model;
  std::uint64_t seed = 0;
  std::string output;
  bool json = false;
};

int do_init(const InitArgs& a, std::ostream& out) {
  const VariantSpec spec = a.model.resolve();
  const auto store = init_params(spec, a.seed);
  save_weights(store, a.output);
  emit(out, a.json,
       {{"command", "init-weights"},
        {"variant", spec.name},
        {"entries", store.size()},
        {"parameters", store.total_elements()},
        {"seed", a.seed},
        {"output", a.output}},
       "wrote " + std::to_string(store.size()) + " tensors (" +
           std::to_string(store.total_elements()) + " parameters) to " + a.output + "\n");
  return kExitOk;
}

// ---- ablate ----------------------------------------------------------------

struct AblateArgs {
  ModelSource model;
  std::string sampler = "center";
  std::string prop;
  std::string attn = "sparse";
  std::string local_branch;
  std::int64_t input_size = 0;
  std::uint64_t seed = 0;
  std::string emit_spec;
  bool forward = false;
  bool json = false;
};

int do_ablate(const AblateArgs& a, std::ostream& out) {
  VariantSpec spec = a.model.resolve();
  spec.sampler = lgl::parse_sampler(a.sampler);
  spec.attn_mode = lgl::parse_attn_mode(a.attn);
  if (!a.prop.empty()) {
    spec.propagation = lgl::parse_propagation(a.prop);
  } else {
    spec.propagation = spec.attn_mode == lgl::AttnMode::kKvDownsampled
                           ? lgl::Propagation::kNone
                           : lgl::Propagation::kTransposedConv;
  }
  if (!a.local_branch.empty()) spec.local_branch = lgl::parse_local_branch(a.local_branch);
  spec.name += "+" + std::string(lgl::to_string(spec.sampler)) + "/" +
               std::string(lgl::to_string(spec.propagation)) + "/" +
               std::string(lgl::to_string(spec.attn_mode));
  spec.validate();
  const auto size = a.input_size > 0 ? a.input_size : spec.input_size;
  const auto cost = analysis::count_macs(spec, size);
  json j = {{"command", "ablate"},
            {"spec", variant_to_json(spec)},
            {"totals", {{"params", cost.total_params}, {"macs", cost.total_macs}}},
            {"input_size", size},
            {"forward", nullptr}};
  std::string text = "ablation " + spec.name + "\n" + analysis::to_text(cost, false);
  if (!a.emit_spec.empty()) {
    std::ofstream os(a.emit_spec);
    if (!os) throw IoError("cannot open for writing: " + a.emit_spec);
    os << variant_to_json(spec).dump(2) << '\n';
    text += "wrote spec to " + a.emit_spec + "\n";
  }
  if (a.forward) {
    const Model model(spec, init_params(spec, a.seed));
    const auto clock = bench::steady_clock_ms();
    const double t0 = clock();
    const Tensor logits = model.forward(random_input(spec, size, a.seed));
    const double ms = clock() - t0;
    j["forward"] = {{"logits_shape", shape_json(logits.shape())}, {"ms", ms}};
    text += "forward " + shape_to_string(logits.shape()) + " in " + std::to_string(ms) + " ms\n";
  }
  emit(out, a.json, j, text);
  return kExitOk;
}

void print_error(std::ostream& err, const std::string& kind, const std::string& message) {
  err << json{{"error", kind}, {"message", message}}.dump() << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Inference, cost accounting and measurement tools for LGL vision transformers",
               "edgevit"};
  app.require_subcommand(1);
  int status = kExitOk;
  std::function<int()> action;

  InferArgs infer;
  auto* c_infer = app.add_subcommand("infer", "Run a forward pass");
  infer.model.add_to(*c_infer);
  c_infer->add_option("--weights", infer.weights, "EVWT weight file (default: seeded init)")
      ->check(CLI::ExistingFile);
  c_infer->add_option("--seed", infer.seed, "Seed for weights and random input");
  c_infer->add_option("--input", infer.input, "'random' or an EVTS tensor file");
  c_infer->add_option("--input-size", infer.input_size, "Random input resolution")
      ->check(CLI::PositiveNumber);
  c_infer->add_option("--output", infer.output, "Write logits as EVTS");
  c_infer->add_option("--threads", infer.threads)->check(CLI::PositiveNumber);
  c_infer->add_flag("--json", infer.json);
  c_infer->callback([&] { action = [&] { return do_infer(infer, out); }; });

  CountArgs count;
  auto* c_count = app.add_subcommand("count", "Count parameters and multiply-adds");
  count.model.add_to(*c_count);
  c_count->add_option("--input-size", count.input_size)->check(CLI::PositiveNumber);
  c_count->add_flag("--breakdown", count.breakdown, "Per-module rows");
  c_count->add_flag("--json", count.json);
  c_count->callback([&] { action = [&] { return do_count(count, out); }; });

  BenchArgs bench_args;
  auto* c_bench = app.add_subcommand("bench", "Measure forward latency");
  bench_args.model.add_to(*c_bench);
  c_bench->add_option("--weights", bench_args.weights)->check(CLI::ExistingFile);
  c_bench->add_option("--seed", bench_args.seed);
  c_bench->add_option("--input-size", bench_args.input_size)->check(CLI::PositiveNumber);
  c_bench->add_option("--runs", bench_args.opts.runs, "Timed runs (default 50)")
      ->check(CLI::Range(std::int64_t{2}, std::int64_t{1000000}));
  c_bench->add_option("--warmup", bench_args.opts.warmup, "Untimed runs (default 10)")
      ->check(CLI::NonNegativeNumber);
  c_bench->add_option("--threads", bench_args.opts.threads)->check(CLI::PositiveNumber);
  c_bench->add_flag("--json", bench_args.json);
  c_bench->callback([&] { action = [&] { return do_bench(bench_args, out); }; });

  auto* c_power = app.add_subcommand("power", "Power-trace tools");
  c_power->require_subcommand(1);
  PowerAnalyzeArgs pa;
  auto* c_pa = c_power->add_subcommand("analyze", "Per-inference energy from a CSV trace");
  c_pa->add_option("--trace", pa.trace, "CSV trace (timestamp_s,power_w)")
      ->required()
      ->check(CLI::ExistingFile);
  c_pa->add_option("--expected", pa.expected, "Number of inference regions")
      ->check(CLI::PositiveNumber);
  c_pa->add_option("--idle-start", pa.idle_start, "Idle window start (s)");
  c_pa->add_option("--idle-end", pa.idle_end, "Idle window end (s)");
  c_pa->add_option("--top1", pa.top1, "Top-1 accuracy (%) for the efficiency figure");
  c_pa->add_option("--sigma", pa.detect.threshold_sigma, "Threshold in background stds")
      ->check(CLI::NonNegativeNumber);
  c_pa->add_option("--min-margin", pa.detect.min_margin_w, "Minimum threshold margin (W)")
      ->check(CLI::NonNegativeNumber);
  c_pa->add_option("--merge-gap-ms", pa.merge_gap_ms, "Join regions closer than this")
      ->check(CLI::NonNegativeNumber);
  c_pa->add_flag("--json", pa.json);
  c_pa->callback([&] { action = [&] { return do_power_analyze(pa, out); }; });

  PowerSynthArgs ps;
  auto* c_ps = c_power->add_subcommand("synth", "Write a synthetic pulse trace");
  c_ps->add_option("--count", ps.opts.count)->check(CLI::NonNegativeNumber);
  c_ps->add_option("--pulse-power", ps.opts.pulse_power_w, "W");
  c_ps->add_option("--floor", ps.opts.floor_w, "Idle power (W)");
  c_ps->add_option("--pulse-width", ps.opts.pulse_width_s, "s");
  c_ps->add_option("--gap", ps.opts.gap_s, "s");
  c_ps->add_option("--rate", ps.opts.rate_hz, "Sampling rate (Hz)")->check(CLI::PositiveNumber);
  c_ps->add_option("--noise", ps.opts.noise_sigma_w, "Gaussian noise sigma (W)");
  c_ps->add_option("--lead-idle", ps.opts.lead_idle_s, "Idle time before the first pulse (s)");
  c_ps->add_option("--tail-idle", ps.opts.tail_idle_s, "Idle time after the last pulse (s)");
  c_ps->add_option("--seed", ps.opts.seed);
  c_ps->add_option("--output", ps.output, "CSV path")->required();
  c_ps->add_flag("--json", ps.json);
  c_ps->callback([&] { action = [&] { return do_power_synth(ps, out); }; });

  InitArgs init;
  auto* c_init = app.add_subcommand("init-weights", "Write seeded random weights");
  init.model.add_to(*c_init);
  c_init->add_option("--seed", init.seed);
  c_init->add_option("--output", init.output, "EVWT path")->required();
  c_init->add_flag("--json", init.json);
  c_init->callback([&] { action = [&] { return do_init(init, out); }; });

  AblateArgs ab;
  auto* c_ab = app.add_subcommand("ablate", "Cost (and optionally run) an ablation variant");
  ab.model.add_to(*c_ab);
  c_ab->add_option("--sampler", ab.sampler)->check(CLI::IsMember({"center", "avg", "max"}));
  c_ab->add_option("--prop", ab.prop)->check(CLI::IsMember({"transposed", "bilinear", "none"}));
  c_ab->add_option("--attn", ab.attn)->check(CLI::IsMember({"sparse", "kv_downsampled"}));
  c_ab->add_option("--local-branch", ab.local_branch)
      ->check(CLI::IsMember({"always", "skip_at_full_rate"}));
  c_ab->add_option("--input-size", ab.input_size)->check(CLI::PositiveNumber);
  c_ab->add_option("--seed", ab.seed);
  c_ab->add_option("--emit-spec", ab.emit_spec, "Write the resulting spec JSON");
  c_ab->add_flag("--forward", ab.forward, "Run one forward pass with seeded weights");
  c_ab->add_flag("--json", ab.json);
  c_ab->callback([&] { action = [&] { return do_ablate(ab, out); }; });

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    print_error(err, "usage", e.what());
    err << app.help();
    return kExitUsage;
  }
  if (!action) {
    print_error(err, "usage", "a subcommand is required");
    err << app.help();
    return kExitUsage;
  }
  try {
    status = action();
  } catch (const Error& e) {
    print_error(err, e.kind(), e.what());
    return kExitFailure;
  } catch (const std::exception& e) {
    print_error(err, "internal", e.what());
    return kExitFailure;
  }
  return status;
}

}  // namespace edgevit::cli
