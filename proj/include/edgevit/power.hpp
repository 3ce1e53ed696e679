#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

namespace edgevit::power {

/// Power-monitor samples. Timestamps are seconds and strictly increasing;
/// power is watts and non-negative.
struct PowerTrace {
  std::vector<double> time_s;
  std::vector<double> power_w;
  std::string device;
  std::int64_t expected_count = 50;

  std::size_t size() const noexcept { return time_s.size(); }
  /// Throws ArgumentError on a violated invariant.
  void validate() const;
};

/// CSV with header `timestamp_s,power_w`, one sample per line.
PowerTrace read_trace_csv(std::istream& is);
void write_trace_csv(std::ostream& os, const PowerTrace& trace);
PowerTrace load_trace(const std::filesystem::path& path);
void save_trace(const PowerTrace& trace, const std::filesystem::path& path);

struct Background {
  double mean_w = 0.0;
  double std_w = 0.0;  // sample standard deviation (0 for a single sample)
  std::size_t samples = 0;
};

/// Statistics of the samples with start_s <= t < end_s.
Background estimate_background(const PowerTrace& trace, double start_s, double end_s);

struct DetectOptions {
  double threshold_sigma = 3.0;
  double min_margin_w = 0.1;
  double merge_gap_s = 0.005;
};

/// Inclusive sample index range.
struct Region {
  std::size_t first = 0;
  std::size_t last = 0;
};

/// Runs of samples above mean + max(sigma * std, min_margin); runs whose gap
/// is shorter than merge_gap_s are joined. Throws DetectionError unless
/// exactly expected_count regions remain.
std::vector<Region> detect_regions(const PowerTrace& trace, double background_mean_w,
                                   double background_std_w, std::size_t expected_count,
                                   const DetectOptions& opts = {});

/// Trapezoidal integral of (power - background) over samples first..last, mJ.
double trapezoid_energy_mj(const PowerTrace& trace, std::size_t first, std::size_t last,
                           double background_w);

struct InferenceStats {
  std::size_t first = 0, last = 0;
  double start_s = 0.0, end_s = 0.0;
  double energy_mj = 0.0;
  double power_w = 0.0;      // mean background-subtracted power
  double raw_power_w = 0.0;  // mean measured power
};

struct EnergyReport {
  std::vector<InferenceStats> inferences;
  double background_w = 0.0;
  double background_std_w = 0.0;
  double energy_mean_mj = 0.0, energy_std_mj = 0.0;
  double power_mean_w = 0.0, power_std_w = 0.0;
  double raw_power_mean_w = 0.0, raw_power_std_w = 0.0;
};

/// Energy is integrated from the sample before each region to the sample
/// after it, so the rising and falling edges are included; power averages
/// cover the region's own samples.
EnergyReport analyze(const PowerTrace& trace, const std::vector<Region>& regions,
                     const Background& background);

/// Top-1 percent per mJ of mean per-inference energy.
double efficiency(const EnergyReport& report, double top1_percent);

struct SynthOptions {
  std::int64_t count = 50;
  double pulse_power_w = 3.5;
  double floor_w = 0.5;
  double pulse_width_s = 0.1;
  double gap_s = 0.1;
  double rate_hz = 1000.0;
  double noise_sigma_w = 0.02;
  double lead_idle_s = 1.0;
  double tail_idle_s = 0.5;
  std::uint64_t seed = 0;
};

struct SynthTrace {
  PowerTrace trace;
  std::vector<Region> pulses;  // generated pulse sample ranges
  double energy_mj = 0.0;      // ground truth per pulse, background-subtracted
  double power_w = 0.0;
};

/// Rectangular pulses on a constant floor plus Gaussian noise, clamped at 0.
SynthTrace synthesize(const SynthOptions& opts);

std::string to_text(const EnergyReport& report, const double* top1_percent);
nlohmann::json to_json(const EnergyReport& report, const double* top1_percent);

}  // namespace edgevit::power
