#include "edgevit/power.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include "edgevit/analysis.hpp"
#include "edgevit/errors.hpp"

namespace edgevit::power {

void PowerTrace::validate() const {
  if (time_s.size() != power_w.size()) throw ArgumentError("trace column lengths differ");
  for (std::size_t i = 0; i < time_s.size(); ++i) {
    if (!std::isfinite(time_s[i]) || !std::isfinite(power_w[i])) {
      throw ArgumentError("non-finite sample at row " + std::to_string(i));
    }
    if (i > 0 && !(time_s[i] > time_s[i - 1])) {
      throw ArgumentError("timestamps must be strictly increasing (row " + std::to_string(i) + ")");
    }
    if (power_w[i] < 0.0) throw ArgumentError("negative power at row " + std::to_string(i));
  }
}

namespace {

double parse_double(std::string_view field, std::size_t line) {
  while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
  while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) {
    field.remove_suffix(1);
  }
  double v = 0.0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc() || ptr != end || field.empty()) {
    throw FormatError("trace line " + std::to_string(line) + ": cannot parse number '" +
                      std::string(field) + "'");
  }
  return v;
}

}  // namespace

PowerTrace read_trace_csv(std::istream& is) {
  PowerTrace t;
  std::string line;
  if (!std::getline(is, line)) throw FormatError("trace is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
  if (line != "timestamp_s,power_w") {
    throw FormatError("trace header must be 'timestamp_s,power_w', got '" + line + "'");
  }
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos) {
      throw FormatError("trace line " + std::to_string(lineno) + ": expected two fields");
    }
    const std::string_view sv(line);
    t.time_s.push_back(parse_double(sv.substr(0, comma), lineno));
    t.power_w.push_back(parse_double(sv.substr(comma + 1), lineno));
  }
  t.validate();
  return t;
}

void write_trace_csv(std::ostream& os, const PowerTrace& trace) {
  os << "timestamp_s,power_w\n";
  os << std::setprecision(17);
  for (std::size_t i = 0; i < trace.size(); ++i) {
    os << trace.time_s[i] << ',' << trace.power_w[i] << '\n';
  }
}

PowerTrace load_trace(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open: " + path.string());
  auto t = read_trace_csv(is);
  t.device = path.filename().string();
  return t;
}

void save_trace(const PowerTrace& trace, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  write_trace_csv(os, trace);
}

Background estimate_background(const PowerTrace& trace, double start_s, double end_s) {
  if (!(end_s > start_s)) throw ArgumentError("idle window end must be after its start");
  if (trace.size() == 0 || end_s <= trace.time_s.front() || start_s > trace.time_s.back()) {
    throw ArgumentError("idle window lies outside the trace");
  }
  Background bg;
  double sum = 0.0;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    if (trace.time_s[i] >= start_s && trace.time_s[i] < end_s) {
      sum += trace.power_w[i];
      ++bg.samples;
    }
  }
  if (bg.samples == 0) throw ArgumentError("idle window contains no samples");
  bg.mean_w = sum / static_cast<double>(bg.samples);
  if (bg.samples > 1) {
    double ss = 0.0;
    for (std::size_t i = 0; i < trace.size(); ++i) {
      if (trace.time_s[i] >= start_s && trace.time_s[i] < end_s) {
        ss += (trace.power_w[i] - bg.mean_w) * (trace.power_w[i] - bg.mean_w);
      }
    }
    bg.std_w = std::sqrt(ss / static_cast<double>(bg.samples - 1));
  }
  return bg;
}

std::vector<Region> detect_regions(const PowerTrace& trace, double background_mean_w,
                                   double background_std_w, std::size_t expected_count,
                                   const DetectOptions& opts) {
  if (expected_count < 1) throw ArgumentError("expected region count must be >= 1");
  const double threshold =
      background_mean_w + std::max(opts.threshold_sigma * background_std_w, opts.min_margin_w);
  std::vector<Region> runs;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    if (trace.power_w[i] <= threshold) continue;
    if (!runs.empty() && runs.back().last + 1 == i) {
      runs.back().last = i;
    } else {
      runs.push_back({i, i});
    }
  }
  std::vector<Region> merged;
  for (const auto& r : runs) {
    if (!merged.empty() &&
        trace.time_s[r.first] - trace.time_s[merged.back().last] < opts.merge_gap_s) {
      merged.back().last = r.last;
    } else {
      merged.push_back(r);
    }
  }
  if (merged.size() != expected_count) throw DetectionError(merged.size(), expected_count);
  return merged;
}

double trapezoid_energy_mj(const PowerTrace& trace, std::size_t first, std::size_t last,
                           double background_w) {
  if (last >= trace.size() || first > last) throw ArgumentError("integration range out of bounds");
  double joules = 0.0;
  for (std::size_t i = first; i < last; ++i) {
    const double a = trace.power_w[i] - background_w;
    const double b = trace.power_w[i + 1] - background_w;
    joules += 0.5 * (a + b) * (trace.time_s[i + 1] - trace.time_s[i]);
  }
  return joules * 1e3;
}

namespace {

void mean_std(const std::vector<InferenceStats>& xs, double InferenceStats::*field, double& mean,
              double& stddev) {
  mean = 0.0;
  stddev = 0.0;
  if (xs.empty()) return;
  for (const auto& x : xs) mean += x.*field;
  mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return;
  double ss = 0.0;
  for (const auto& x : xs) ss += (x.*field - mean) * (x.*field - mean);
  stddev = std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

}  // namespace

EnergyReport analyze(const PowerTrace& trace, const std::vector<Region>& regions,
                     const Background& background) {
  EnergyReport rep;
  rep.background_w = background.mean_w;
  rep.background_std_w = background.std_w;
  for (const auto& r : regions) {
    if (r.first > r.last || r.last >= trace.size()) throw ArgumentError("region out of bounds");
    InferenceStats s;
    s.first = r.first;
    s.last = r.last;
    s.start_s = trace.time_s[r.first];
    s.end_s = trace.time_s[r.last];
    const std::size_t lo = r.first > 0 ? r.first - 1 : 0;
    const std::size_t hi = std::min(r.last + 1, trace.size() - 1);
    s.energy_mj = trapezoid_energy_mj(trace, lo, hi, background.mean_w);
    double sum = 0.0;
    for (std::size_t i = r.first; i <= r.last; ++i) sum += trace.power_w[i];
    const auto n = static_cast<double>(r.last - r.first + 1);
    s.raw_power_w = sum / n;
    s.power_w = s.raw_power_w - background.mean_w;
    rep.inferences.push_back(s);
  }
  mean_std(rep.inferences, &InferenceStats::energy_mj, rep.energy_mean_mj, rep.energy_std_mj);
  mean_std(rep.inferences, &InferenceStats::power_w, rep.power_mean_w, rep.power_std_w);
  mean_std(rep.inferences, &InferenceStats::raw_power_w, rep.raw_power_mean_w, rep.raw_power_std_w);
  return rep;
}

double efficiency(const EnergyReport& report, double top1_percent) {
  return analysis::efficiency_metric(top1_percent, report.energy_mean_mj);
}

SynthTrace synthesize(const SynthOptions& o) {
  if (o.count < 0 || !(o.rate_hz > 0.0) || !(o.pulse_width_s > 0.0) || o.gap_s < 0.0 ||
      o.lead_idle_s < 0.0 || o.tail_idle_s < 0.0 || o.noise_sigma_w < 0.0 || o.floor_w < 0.0 ||
      o.pulse_power_w < 0.0) {
    throw ArgumentError("invalid synthetic trace parameters");
  }
  // Pulse boundaries are placed on whole sample indices.
  const auto idx = [&](double seconds) { return static_cast<std::size_t>(std::llround(seconds * o.rate_hz)); };
  const std::size_t lead = idx(o.lead_idle_s);
  const std::size_t width = std::max<std::size_t>(1, idx(o.pulse_width_s));
  const std::size_t gap = idx(o.gap_s);
  const std::size_t tail = idx(o.tail_idle_s);
  const auto count = static_cast<std::size_t>(o.count);
  const std::size_t total =
      lead + count * width + (count > 0 ? (count - 1) * gap : 0) + tail;

  SynthTrace out;
  out.trace.device = "synthetic";
  out.trace.expected_count = o.count;
  out.trace.time_s.resize(total);
  out.trace.power_w.assign(total, o.floor_w);
  for (std::size_t i = 0; i < total; ++i) out.trace.time_s[i] = static_cast<double>(i) / o.rate_hz;
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t first = lead + k * (width + gap);
    out.pulses.push_back({first, first + width - 1});
    for (std::size_t i = first; i < first + width; ++i) out.trace.power_w[i] = o.pulse_power_w;
  }
  if (o.noise_sigma_w > 0.0) {
    std::mt19937_64 rng(o.seed);
    std::normal_distribution<double> noise(0.0, o.noise_sigma_w);
    for (auto& p : out.trace.power_w) p = std::max(0.0, p + noise(rng));
  }
  out.power_w = o.pulse_power_w - o.floor_w;
  out.energy_mj = out.power_w * static_cast<double>(width) / o.rate_hz * 1e3;
  return out;
}

std::string to_text(const EnergyReport& r, const double* top1_percent) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << "background   " << r.background_w << " W (std " << r.background_std_w << ")\n";
  os << "inferences   " << r.inferences.size() << '\n';
  os << std::setprecision(2);
  os << "energy       " << r.energy_mean_mj << " +- " << r.energy_std_mj << " mJ\n";
  os << std::setprecision(3);
  os << "power        " << r.power_mean_w << " +- " << r.power_std_w << " W (background-subtracted)\n";
  os << "raw power    " << r.raw_power_mean_w << " +- " << r.raw_power_std_w << " W (measured)\n";
  if (top1_percent) os << "efficiency   " << efficiency(r, *top1_percent) << " %/mJ\n";
  os << "\n   #     start_s       end_s   energy_mJ    power_W  raw_power_W\n";
  for (std::size_t i = 0; i < r.inferences.size(); ++i) {
    const auto& s = r.inferences[i];
    os << std::setw(4) << i + 1 << std::setw(12) << std::setprecision(4) << s.start_s
       << std::setw(12) << s.end_s << std::setw(12) << std::setprecision(3) << s.energy_mj
       << std::setw(11) << s.power_w << std::setw(13) << s.raw_power_w << '\n';
  }
  return os.str();
}

nlohmann::json to_json(const EnergyReport& r, const double* top1_percent) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& s : r.inferences) {
    rows.push_back({{"first_sample", s.first},
                    {"last_sample", s.last},
                    {"start_s", s.start_s},
                    {"end_s", s.end_s},
                    {"energy_mj", s.energy_mj},
                    {"power_w", s.power_w},
                    {"raw_power_w", s.raw_power_w}});
  }
  nlohmann::json j = {
      {"background_w", r.background_w},
      {"background_std_w", r.background_std_w},
      {"count", r.inferences.size()},
      {"energy_mj", {{"mean", r.energy_mean_mj}, {"std", r.energy_std_mj}}},
      {"power_w", {{"mean", r.power_mean_w}, {"std", r.power_std_w}}},
      {"raw_power_w", {{"mean", r.raw_power_mean_w}, {"std", r.raw_power_std_w}}},
      {"inferences", std::move(rows)},
  };
  if (top1_percent) {
    j["top1"] = *top1_percent;
    j["efficiency"] = efficiency(r, *top1_percent);
  } else {
    j["efficiency"] = nullptr;
  }
  return j;
}

}  // namespace edgevit::power
