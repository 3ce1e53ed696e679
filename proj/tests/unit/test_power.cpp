#include <sstream>

#include "doctest.h"
#include "edgevit/errors.hpp"
#include "edgevit/power.hpp"

using namespace edgevit;
using namespace edgevit::power;

namespace {

PowerTrace constant_trace(double watts, std::size_t n, double rate = 1000.0) {
  PowerTrace t;
  for (std::size_t i = 0; i < n; ++i) {
    t.time_s.push_back(static_cast<double>(i) / rate);
    t.power_w.push_back(watts);
  }
  return t;
}

std::size_t expect_detection_failure(const PowerTrace& t, const Background& bg, std::size_t expected) {
  try {
    detect_regions(t, bg.mean_w, bg.std_w, expected);
  } catch (const DetectionError& e) {
    CHECK(e.expected() == expected);
    return e.found();
  }
  FAIL("detection unexpectedly succeeded");
  return 0;
}

}  // namespace

TEST_CASE("background estimation") {
  const auto flat = constant_trace(0.5, 100);
  const auto bg = estimate_background(flat, 0.0, 0.05);
  CHECK(bg.mean_w == doctest::Approx(0.5));
  CHECK(bg.samples == 50);

  PowerTrace two;
  two.time_s = {0.0, 0.001, 0.002};
  two.power_w = {0.4, 0.6, 2.0};
  const auto b2 = estimate_background(two, 0.0, 0.002);
  CHECK(b2.mean_w == doctest::Approx(0.5));
  CHECK(b2.std_w == doctest::Approx(0.1414).epsilon(1e-3));
  CHECK(b2.std_w == doctest::Approx(std::sqrt(0.02)));

  CHECK_THROWS_AS(estimate_background(flat, 5.0, 6.0), ArgumentError);
  CHECK_THROWS_AS(estimate_background(flat, 0.0101, 0.0102), ArgumentError);
  CHECK_THROWS_AS(estimate_background(flat, 0.02, 0.01), ArgumentError);
}

TEST_CASE("synthetic 50-pulse trace: boundaries recovered") {
  const auto synth = synthesize({});
  const auto bg = estimate_background(synth.trace, 0.0, 0.5);
  const auto regions = detect_regions(synth.trace, bg.mean_w, bg.std_w, 50);
  REQUIRE(regions.size() == 50);
  for (std::size_t i = 0; i < 50; ++i) {
    CHECK(std::abs(static_cast<long>(regions[i].first) - static_cast<long>(synth.pulses[i].first)) <= 1);
    CHECK(std::abs(static_cast<long>(regions[i].last) - static_cast<long>(synth.pulses[i].last)) <= 1);
  }
  const auto report = analyze(synth.trace, regions, bg);
  CHECK(std::fabs(report.energy_mean_mj / synth.energy_mj - 1.0) < 0.01);
  CHECK(std::fabs(report.power_mean_w / synth.power_w - 1.0) < 0.01);
  CHECK(report.raw_power_mean_w == doctest::Approx(3.5).epsilon(0.01));
}

TEST_CASE("count mismatches raise detection errors") {
  const auto flat = constant_trace(0.5, 2000);
  const auto bg = estimate_background(flat, 0.0, 0.5);
  CHECK(expect_detection_failure(flat, bg, 50) == 0);

  SynthOptions o;
  o.count = 49;
  const auto synth = synthesize(o);
  const auto bg49 = estimate_background(synth.trace, 0.0, 0.5);
  CHECK(expect_detection_failure(synth.trace, bg49, 50) == 49);
}

TEST_CASE("single noiseless pulse") {
  SynthOptions o;
  o.count = 1;
  o.noise_sigma_w = 0.0;
  const auto synth = synthesize(o);
  const auto bg = estimate_background(synth.trace, 0.0, 0.5);
  CHECK(bg.mean_w == 0.5);
  const auto regions = detect_regions(synth.trace, bg.mean_w, bg.std_w, 1);
  const auto report = analyze(synth.trace, regions, bg);
  CHECK(report.inferences[0].energy_mj == doctest::Approx(300.0).epsilon(1e-9));
  CHECK(report.inferences[0].power_w == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(report.inferences[0].raw_power_w == doctest::Approx(3.5).epsilon(1e-12));
  CHECK(efficiency(report, 30.0) == doctest::Approx(0.1));

  const Background full{3.5, 0.0, 1};
  const auto zero = analyze(synth.trace, regions, full);
  CHECK(zero.inferences[0].power_w == 0.0);
  // The edge trapezoids dip below the subtracted level; the in-pulse part is exactly 0.
  CHECK(trapezoid_energy_mj(synth.trace, regions[0].first, regions[0].last, 3.5) == 0.0);
}

TEST_CASE("identical noiseless pulses have zero energy spread") {
  SynthOptions o;
  o.noise_sigma_w = 0.0;
  const auto synth = synthesize(o);
  const auto bg = estimate_background(synth.trace, 0.0, 0.5);
  const auto report = analyze(synth.trace, detect_regions(synth.trace, bg.mean_w, bg.std_w, 50), bg);
  CHECK(report.energy_std_mj < 1e-9);
  CHECK(report.energy_mean_mj == doctest::Approx(300.0).epsilon(1e-9));
}

TEST_CASE("trapezoid of a constant region") {
  const auto t = constant_trace(2.25, 501);
  CHECK(trapezoid_energy_mj(t, 0, 500, 0.25) == doctest::Approx(2.0 * 0.5 * 1000.0).epsilon(1e-12));
  PowerTrace uneven;
  uneven.time_s = {0.0, 0.001, 0.004, 0.01};
  uneven.power_w = {1.5, 1.5, 1.5, 1.5};
  CHECK(trapezoid_energy_mj(uneven, 0, 3, 0.5) == doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("detection is invariant to timestamp shifts") {
  SynthOptions o;
  o.count = 10;
  o.seed = 3;
  auto synth = synthesize(o);
  const auto bg = estimate_background(synth.trace, 0.0, 0.5);
  const auto a = detect_regions(synth.trace, bg.mean_w, bg.std_w, 10);
  auto shifted = synth.trace;
  for (auto& t : shifted.time_s) t += 1234.5;
  const auto bg2 = estimate_background(shifted, 1234.5, 1235.0);
  const auto b = detect_regions(shifted, bg2.mean_w, bg2.std_w, 10);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].first == b[i].first);
    CHECK(a[i].last == b[i].last);
  }
}

TEST_CASE("short dips inside a pulse are merged") {
  SynthOptions o;
  o.count = 1;
  o.noise_sigma_w = 0.0;
  auto synth = synthesize(o);
  const auto mid = (synth.pulses[0].first + synth.pulses[0].last) / 2;
  for (std::size_t i = mid; i < mid + 3; ++i) synth.trace.power_w[i] = 0.5;
  const auto bg = estimate_background(synth.trace, 0.0, 0.5);
  CHECK(detect_regions(synth.trace, bg.mean_w, bg.std_w, 1).size() == 1);
  DetectOptions no_merge;
  no_merge.merge_gap_s = 0.0;
  CHECK(detect_regions(synth.trace, bg.mean_w, bg.std_w, 2, no_merge).size() == 2);
}

TEST_CASE("CSV round trip and errors") {
  SynthOptions o;
  o.count = 2;
  const auto synth = synthesize(o);
  std::stringstream ss;
  write_trace_csv(ss, synth.trace);
  CHECK(ss.str().rfind("timestamp_s,power_w\n", 0) == 0);
  const auto back = read_trace_csv(ss);
  REQUIRE(back.size() == synth.trace.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back.time_s[i] == synth.trace.time_s[i]);
    CHECK(back.power_w[i] == synth.trace.power_w[i]);
  }
  for (const char* bad : {"", "time,power\n0,1\n", "timestamp_s,power_w\n0,abc\n",
                          "timestamp_s,power_w\n0.1,1\n0.0,1\n", "timestamp_s,power_w\n0,-1\n",
                          "timestamp_s,power_w\n0\n"}) {
    std::istringstream in(bad);
    CHECK_THROWS_AS(read_trace_csv(in), Error);
  }
}

TEST_CASE("report JSON carries both power averages") {
  SynthOptions o;
  o.count = 3;
  const auto synth = synthesize(o);
  const auto bg = estimate_background(synth.trace, 0.0, 0.5);
  const auto report = analyze(synth.trace, detect_regions(synth.trace, bg.mean_w, bg.std_w, 3), bg);
  const double top1 = 74.4;
  const auto j = to_json(report, &top1);
  CHECK(j["inferences"].size() == 3);
  CHECK(j.contains("efficiency"));
  CHECK(j["raw_power_w"]["mean"].get<double>() > j["power_w"]["mean"].get<double>());
  CHECK(j["efficiency"].get<double>() == doctest::Approx(efficiency(report, top1)));
  CHECK(to_json(report, nullptr)["efficiency"].is_null());
}
