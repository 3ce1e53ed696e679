#include "edgevit/bench.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "edgevit/errors.hpp"
#include "edgevit/parallel.hpp"

namespace edgevit::bench {

Clock steady_clock_ms() {
  return [] {
    using namespace std::chrono;
    return duration<double, std::milli>(steady_clock::now().time_since_epoch()).count();
  };
}

SampleStats sample_stats(std::span<const double> xs) {
  if (xs.size() < 2) throw ArgumentError("sample statistics need at least two samples");
  SampleStats s;
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - s.mean) * (x - s.mean);
  s.stddev = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  return s;
}

namespace {

class ThreadCountGuard {
 public:
  explicit ThreadCountGuard(int n) : previous_(num_threads()) { set_num_threads(n); }
  ~ThreadCountGuard() { set_num_threads(previous_); }

 private:
  int previous_;
};

}  // namespace

LatencyReport run_latency(const std::function<void()>& body, const BenchOptions& opts,
                          const Clock& clock) {
  if (opts.runs < 2) throw ArgumentError("runs must be >= 2");
  if (opts.warmup < 0) throw ArgumentError("warmup must be >= 0");
  if (opts.threads < 1) throw ArgumentError("threads must be >= 1");
  const ThreadCountGuard guard(opts.threads);
  for (std::int64_t i = 0; i < opts.warmup; ++i) body();
  LatencyReport rep;
  rep.runs = opts.runs;
  rep.warmup = opts.warmup;
  rep.threads = opts.threads;
  rep.samples_ms.reserve(static_cast<std::size_t>(opts.runs));
  for (std::int64_t i = 0; i < opts.runs; ++i) {
    const double t0 = clock();
    body();
    const double t1 = clock();
    rep.samples_ms.push_back(t1 - t0);
  }
  const auto st = sample_stats(rep.samples_ms);
  rep.mean_ms = st.mean;
  rep.std_ms = st.stddev;
  return rep;
}

LatencyReport run_latency(const Model& model, const Tensor& input, const BenchOptions& opts,
                          const Clock& clock) {
  auto rep = run_latency([&] { (void)model.forward(input); }, opts, clock);
  rep.variant = model.spec().name;
  rep.input_size = input.rank() == 4 ? input.dim(1) : 0;
  return rep;
}

std::string to_text(const LatencyReport& r) {
  std::ostringstream os;
  os << "variant   " << r.variant << '\n'
     << "input     " << r.input_size << 'x' << r.input_size << '\n'
     << "threads   " << r.threads << '\n'
     << "runs      " << r.runs << " (warmup " << r.warmup << ")\n"
     << std::fixed << std::setprecision(2) << "latency   " << r.mean_ms << " +- " << r.std_ms
     << " ms\n";
  return os.str();
}

nlohmann::json to_json(const LatencyReport& r) {
  return {{"variant", r.variant},   {"input_size", r.input_size}, {"threads", r.threads},
          {"runs", r.runs},         {"warmup", r.warmup},         {"mean_ms", r.mean_ms},
          {"std_ms", r.std_ms},     {"samples_ms", r.samples_ms}};
}

}  // namespace edgevit::bench
