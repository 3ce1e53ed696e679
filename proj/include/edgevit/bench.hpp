#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "edgevit/model.hpp"
#include "json.hpp"

namespace edgevit::bench {

/// Monotonic timestamp source in milliseconds.
using Clock = std::function<double()>;
Clock steady_clock_ms();

struct BenchOptions {
  std::int64_t runs = 50;
  std::int64_t warmup = 10;
  int threads = 1;
};

struct LatencyReport {
  std::string variant;
  std::int64_t input_size = 0;
  std::int64_t runs = 0;
  std::int64_t warmup = 0;
  int threads = 1;
  std::vector<double> samples_ms;  // timed runs only, in execution order
  double mean_ms = 0.0;
  double std_ms = 0.0;  // sample standard deviation (n - 1)
};

struct SampleStats {
  double mean = 0.0;
  double stddev = 0.0;
};

/// Mean and n-1 standard deviation; requires at least two samples.
SampleStats sample_stats(std::span<const double> xs);

/// Times `body` `runs` times after `warmup` untimed calls. The clock is read
/// immediately before and after each timed call.
LatencyReport run_latency(const std::function<void()>& body, const BenchOptions& opts,
                          const Clock& clock = steady_clock_ms());

/// Forward-pass latency of a bound model; binding is not timed.
LatencyReport run_latency(const Model& model, const Tensor& input, const BenchOptions& opts,
                          const Clock& clock = steady_clock_ms());

std::string to_text(const LatencyReport& r);
nlohmann::json to_json(const LatencyReport& r);

}  // namespace edgevit::bench
