#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "bdtf/error.hpp"
#include "bdtf/pchip.hpp"
#include "bdtf/preprocess.hpp"
#include "bdtf/rng.hpp"

using namespace bdtf;

namespace {

CycleRecord constant_current_cycle(double i_ch, double dur_ch_s, double i_dis, double dur_dis_s,
                                   i64 n = 13, double v_ch = 3.8, double v_dis = 3.6) {
  CycleRecord c;
  for (i64 k = 0; k < n; ++k) {
    c.timestamps_s.push_back(dur_ch_s * static_cast<double>(k) / static_cast<double>(n - 1));
    c.voltage_v.push_back(v_ch);
    c.current_a.push_back(i_ch);
  }
  for (i64 k = 0; k < n; ++k) {
    c.timestamps_s.push_back(dur_ch_s + 1.0 +
                             dur_dis_s * static_cast<double>(k) / static_cast<double>(n - 1));
    c.voltage_v.push_back(v_dis);
    c.current_a.push_back(-i_dis);
  }
  c.charge_span = {0, n - 1};
  c.discharge_span = {n, 2 * n - 1};
  return c;
}

}  // namespace

TEST_CASE("cycle capacity: rectangle, sign invariance, ramp") {
  // constant 1 A for 3600 s -> 1 Ah
  CycleRecord c = constant_current_cycle(1.0, 3600.0, 1.0, 3600.0);
  CHECK(compute_cycle_capacity(c, c.charge_span) == doctest::Approx(1.0).epsilon(1e-12));
  // constant -2 A for 1800 s -> 1 Ah (|I| makes it sign-invariant)
  c = constant_current_cycle(2.0, 3600.0, 2.0, 1800.0);
  CHECK(compute_cycle_capacity(c, c.discharge_span) == doctest::Approx(1.0).epsilon(1e-12));
  // ramp 0 -> 1 A over 3600 s -> 0.5 Ah (trapezoid exact on piecewise-linear currents)
  CycleRecord ramp;
  for (i64 k = 0; k <= 10; ++k) {
    ramp.timestamps_s.push_back(360.0 * static_cast<double>(k));
    ramp.current_a.push_back(static_cast<double>(k) / 10.0);
    ramp.voltage_v.push_back(3.7);
  }
  ramp.charge_span = {0, 10};
  ramp.discharge_span = {0, 10};
  CHECK(compute_cycle_capacity(ramp, ramp.charge_span) == doctest::Approx(0.5).epsilon(1e-12));

  SampleSpan tiny{0, 0};
  CHECK_THROWS_WITH_AS(compute_cycle_capacity(ramp, tiny), doctest::Contains("InvalidSpan"),
                       Error);
}

TEST_CASE("trapezoidal capacity matches closed forms on random piecewise-linear currents") {
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    CycleRecord c;
    const i64 n = rng.uniform_int(2, 30);
    double t = 0.0, exact = 0.0;
    double prev_i = rng.uniform(0.1, 3.0);
    c.timestamps_s.push_back(t);
    c.current_a.push_back(prev_i);
    c.voltage_v.push_back(3.7);
    for (i64 k = 1; k < n; ++k) {
      const double dt = rng.uniform(1.0, 600.0);
      const double cur = rng.uniform(0.1, 3.0);
      t += dt;
      exact += 0.5 * (prev_i + cur) * dt;  // closed form for a linear segment
      c.timestamps_s.push_back(t);
      c.current_a.push_back(cur);
      c.voltage_v.push_back(3.7);
      prev_i = cur;
    }
    c.charge_span = {0, n - 1};
    c.discharge_span = {0, n - 1};
    if (n >= 2)
      CHECK(compute_cycle_capacity(c, c.charge_span) ==
            doctest::Approx(exact / 3600.0).epsilon(1e-12));
  }
}

TEST_CASE("SOH series: nominal, partial DoD, identity") {
  BatteryRecord r;
  r.battery_id = "b";
  r.condition.nominal_capacity_ah = 2.0;
  r.cap0_ah = 2.0;
  r.dod = 1.0;
  r.tau = 0.8;
  // discharge 1.8 Ah -> SOH 0.9
  r.cycles.push_back(constant_current_cycle(1.0, 3600.0, 1.8, 3600.0));
  auto t = compute_soh_series(r);
  CHECK(t.soh[0] == doctest::Approx(0.9).epsilon(1e-12));
  // Cap 0.9 Ah with DoD 0.5 -> SOH 0.9
  r.dod = 0.5;
  r.cycles[0] = constant_current_cycle(1.0, 3600.0, 0.9, 3600.0);
  CHECK(compute_soh_series(r).soh[0] == doctest::Approx(0.9).epsilon(1e-12));
  // Cap = cap0, DoD 1 -> 1.0
  r.dod = 1.0;
  r.cycles[0] = constant_current_cycle(1.0, 3600.0, 2.0, 3600.0);
  CHECK(compute_soh_series(r).soh[0] == doctest::Approx(1.0).epsilon(1e-12));

  r.dod = 0.0;
  CHECK_THROWS_WITH_AS(compute_soh_series(r), doctest::Contains("InvalidRecord"), Error);
}

TEST_CASE("spike clipping: isolated drop clipped, small and sustained drops kept") {
  SmoothingParams p;
  CHECK(clip_spikes({1.00, 0.96, 1.00}, p) == std::vector<double>{1.00, 1.00, 1.00});
  CHECK(clip_spikes({1.00, 0.98, 0.97}, p) == std::vector<double>{1.00, 0.98, 0.97});
  const std::vector<double> sustained = {1.00, 0.95, 0.94, 0.93};
  CHECK(clip_spikes(sustained, p) == sustained);  // drop persists: not isolated
}

TEST_CASE("sustained-trend oracle: clipping never alters monotone decays") {
  Rng rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> soh;
    double v = 1.0;
    for (int k = 0; k < 80; ++k) {
      soh.push_back(v);
      v -= rng.uniform(0.0, 0.02);  // every later value stays below: nothing is isolated
    }
    SmoothingParams p;
    // linear-scan oracle: a cycle is clipped iff drop > threshold AND next recovers
    std::vector<double> want = soh;
    for (size_t k = 1; k < want.size(); ++k) {
      const double rel = (want[k] - want[k - 1]) / want[k - 1];
      if (rel < -p.spike_drop_threshold && k + 1 < want.size() &&
          want[k + 1] >= want[k - 1] - p.spike_recovery_band)
        want[k] = want[k - 1];
    }
    CHECK(clip_spikes(soh, p) == want);
  }
}

TEST_CASE("onset detection: percentile method") {
  SmoothingParams p;
  p.onset_method = OnsetMethod::percentile;
  OnsetInputs in;

  // all-equal deltas: nothing strictly exceeds its own percentile bounds
  std::vector<double> soh;
  for (int k = 0; k < 50; ++k) soh.push_back(1.0 - 0.001 * k);
  in.training_deltas = soh_deltas(soh);
  CHECK(detect_artifact_onsets(soh, in, p).empty());

  CHECK_THROWS_WITH_AS(detect_artifact_onsets(soh, OnsetInputs{}, p),
                       doctest::Contains("MissingThresholdSource"), Error);
}

TEST_CASE("percentile method flags exactly one injected jump (brute-force oracle)") {
  Rng rng(31);
  // training deltas: 1000 uniform values in [-0.01, 0.01]
  OnsetInputs in;
  for (int k = 0; k < 1000; ++k) in.training_deltas.push_back(rng.uniform(-0.01, 0.01));
  // brute-force nearest-rank percentiles
  std::vector<double> sorted = in.training_deltas;
  std::sort(sorted.begin(), sorted.end());
  const double g_plus = sorted[static_cast<size_t>(std::ceil(0.99 * 1000.0)) - 1];
  const double g_minus = sorted[static_cast<size_t>(std::ceil(0.01 * 1000.0)) - 1];
  CHECK(percentile(in.training_deltas, 99.0) == g_plus);
  CHECK(percentile(in.training_deltas, 1.0) == g_minus);

  // series whose deltas sit strictly inside the bounds, except one +20% jump
  std::vector<double> soh = {1.0};
  i64 jump_at = 0;
  for (int k = 0; k < 200; ++k) {
    double delta = rng.uniform(-0.008, 0.008);
    while (delta >= g_plus || delta <= g_minus) delta = rng.uniform(-0.008, 0.008);
    if (k == 120) {
      delta = 0.20;
      jump_at = static_cast<i64>(soh.size()) + 1;  // 1-based cycle index of the jump
    }
    soh.push_back(soh.back() * (1.0 + delta));
  }
  SmoothingParams p;
  p.onset_method = OnsetMethod::percentile;
  const auto onsets = detect_artifact_onsets(soh, in, p);
  REQUIRE(onsets.size() == 1);
  CHECK(onsets[0] == jump_at);
}

TEST_CASE("onset detection: time-gap method") {
  SmoothingParams p;
  p.onset_method = OnsetMethod::time_gap;
  p.gamma_gap_s = 100.0 * 3600.0;
  OnsetInputs in;
  // gaps 1h, 1h, 200h, 1h between five cycle starts
  in.cycle_start_s = {0.0, 3600.0, 7200.0, 7200.0 + 200.0 * 3600.0, 7200.0 + 201.0 * 3600.0};
  const std::vector<double> soh(5, 1.0);
  const auto onsets = detect_artifact_onsets(soh, in, p);
  REQUIRE(onsets.size() == 1);
  CHECK(onsets[0] == 4);  // the cycle following the 200h gap
}

TEST_CASE("onset detection: rpt method flags the last normal cycle") {
  SmoothingParams p;
  p.onset_method = OnsetMethod::rpt;
  OnsetInputs in;
  in.rpt_cycles = {10, 40};
  const std::vector<double> soh(60, 1.0);
  const auto onsets = detect_artifact_onsets(soh, in, p);
  CHECK(onsets == std::vector<i64>{9, 39});
}

TEST_CASE("recovery point search") {
  SmoothingParams p;
  // returns to pre-onset level immediately and stays
  std::vector<double> soh = {1.0, 1.0, 0.9, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0};
  // onset at cycle 3 (1-based), pre level soh[1]=1.0; at k_e=4 the window stays within eps
  CHECK(find_recovery_point(soh, 3, p.epsilon, p.W) == 4);

  // oscillates beyond eps for W-1 cycles then stabilizes: linear-scan oracle
  soh = {1.0, 1.0, 0.9, 1.02, 0.95, 1.03, 0.96, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0};
  const i64 got = find_recovery_point(soh, 3, p.epsilon, p.W);
  i64 want = static_cast<i64>(soh.size()) + 1;
  for (i64 ke = 3; ke <= static_cast<i64>(soh.size()); ++ke) {
    bool ok = true;
    for (i64 j = ke; j < ke + p.W && j <= static_cast<i64>(soh.size()); ++j)
      if (std::abs(soh[static_cast<size_t>(j - 1)] - 1.0) > p.epsilon) ok = false;
    if (ok) {
      want = ke;
      break;
    }
  }
  CHECK(got == want);
  CHECK(got == 8);

  // never recovers -> sentinel n+1
  soh = {1.0, 1.0, 0.9, 0.89, 0.88, 0.87};
  CHECK(find_recovery_point(soh, 3, p.epsilon, p.W) == 7);
}

TEST_CASE("PCHIP region smoothing") {
  // anchors all equal -> constant fill
  std::vector<double> soh(20, 0.95);
  std::vector<double> dipped = soh;
  for (i64 k = 8; k <= 11; ++k) dipped[static_cast<size_t>(k)] = 0.7;
  auto out = smooth_region_pchip(dipped, 9, 12, 5);
  for (i64 k = 0; k < 20; ++k) CHECK(out[static_cast<size_t>(k)] == doctest::Approx(0.95).epsilon(1e-12));

  // anchors on a line -> interior restored to the line within 1e-12
  std::vector<double> line(30);
  for (i64 k = 0; k < 30; ++k) line[static_cast<size_t>(k)] = 1.0 - 0.004 * static_cast<double>(k);
  dipped = line;
  for (i64 k = 12; k <= 16; ++k) dipped[static_cast<size_t>(k)] -= 0.08;
  out = smooth_region_pchip(dipped, 13, 17, 5);
  for (i64 k = 0; k < 30; ++k)
    CHECK(std::abs(out[static_cast<size_t>(k)] - line[static_cast<size_t>(k)]) < 1e-12);

  // untouched outside the anchor window, bit-identical
  for (i64 k = 0; k < 30; ++k) {
    if (k + 1 < 13 - 5 || k + 1 > 17 + 5)
      CHECK(out[static_cast<size_t>(k)] == dipped[static_cast<size_t>(k)]);
  }

  // whole series -> CannotSmooth
  CHECK_THROWS_WITH_AS(smooth_region_pchip(line, 1, 30, 5), doctest::Contains("CannotSmooth"),
                       Error);
}

TEST_CASE("PCHIP preserves monotonicity (dense-grid oracle)") {
  Rng rng(41);
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<double> xs, ys;
    double x = 0.0, y = 1.0;
    for (int k = 0; k < 12; ++k) {
      xs.push_back(x);
      ys.push_back(y);
      x += rng.uniform(0.5, 3.0);
      y -= rng.uniform(0.0, 0.05);  // non-increasing anchors
    }
    Pchip interp(xs, ys);
    double prev = interp(xs.front());
    for (double t = xs.front(); t <= xs.back(); t += (xs.back() - xs.front()) / 2000.0) {
      const double v = interp(t);
      CHECK(v <= prev + 1e-12);
      prev = v;
    }
  }
}

TEST_CASE("EOL: strict first crossing") {
  CHECK(compute_eol({1.0, 0.9, 0.79}, 0.8) == 3);
  CHECK(compute_eol({1.0, 0.91, 0.89}, 0.9) == 3);  // 90% threshold domain
  CHECK_THROWS_WITH_AS(compute_eol({1.0, 0.85}, 0.8), doctest::Contains("NoEol"), Error);
}

TEST_CASE("filter and extrapolate") {
  SmoothingParams p;
  // min SOH above tau + margin -> excluded
  std::vector<double> soh(120, 1.0);
  for (i64 k = 0; k < 120; ++k) soh[static_cast<size_t>(k)] = 1.0 - 0.0013 * static_cast<double>(k);
  auto res = filter_and_extrapolate(soh, 0.8, p);  // min ~0.845
  REQUIRE(std::holds_alternative<Excluded>(res));

  // min below tau -> kept unchanged, EOL from the data
  soh.clear();
  for (i64 k = 1; k <= 150; ++k) soh.push_back(1.0 - 0.0015 * static_cast<double>(k));
  res = filter_and_extrapolate(soh, 0.8, p);
  REQUIRE(std::holds_alternative<SohTrajectory>(res));
  auto t = std::get<SohTrajectory>(res);
  CHECK_FALSE(t.extrapolated_from.has_value());
  CHECK(*t.t_eol == compute_eol(soh, 0.8));

  // band case on the exact line soh = 1 - 0.001 n, measured through n=190 -> crossing at 201
  soh.clear();
  for (i64 n = 1; n <= 190; ++n) soh.push_back(1.0 - 0.001 * static_cast<double>(n));
  res = filter_and_extrapolate(soh, 0.8, p);
  REQUIRE(std::holds_alternative<SohTrajectory>(res));
  t = std::get<SohTrajectory>(res);
  REQUIRE(t.t_eol.has_value());
  CHECK(*t.t_eol == 201);
  CHECK(*t.extrapolated_from == 190);
  CHECK(t.cycles() == 201);
  CHECK(t.at(201) < 0.8);
  CHECK(t.at(200) >= 0.8 - 1e-9);

  // non-degrading tail -> excluded with the named reason
  soh.assign(200, 0.81);
  res = filter_and_extrapolate(soh, 0.8, p);
  REQUIRE(std::holds_alternative<Excluded>(res));
  CHECK(std::get<Excluded>(res).reason.find("NonDegradingTail") != std::string::npos);
}

TEST_CASE("SOC mapping") {
  // charge, interval [0,1], Q 0->2, Q=1 -> 0.5
  auto soc = compute_soc({0.0, 1.0, 2.0}, 0.0, 2.0, 0.0, 1.0, SegmentDirection::charge);
  CHECK(soc[1] == doctest::Approx(0.5).epsilon(1e-12));
  // charge, interval [0.2, 0.8], Q midpoint -> 0.5
  soc = compute_soc({0.0, 1.0, 2.0}, 0.0, 2.0, 0.2, 0.8, SegmentDirection::charge);
  CHECK(soc[1] == doctest::Approx(0.5).epsilon(1e-12));
  // discharge, interval [0,1], Q 0->2, Q=0.5 -> 0.75
  soc = compute_soc({0.0, 0.5, 2.0}, 0.0, 2.0, 0.0, 1.0, SegmentDirection::discharge);
  CHECK(soc[1] == doctest::Approx(0.75).epsilon(1e-12));

  CHECK_THROWS_WITH_AS(compute_soc({0.0}, 1.0, 1.0, 0.0, 1.0, SegmentDirection::charge),
                       doctest::Contains("DegenerateSegment"), Error);
}

TEST_CASE("SOC monotonicity property on random monotone capacity series") {
  Rng rng(53);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> q = {0.0};
    const i64 n = rng.uniform_int(3, 40);
    for (i64 k = 1; k < n; ++k) q.push_back(q.back() + rng.uniform(1e-4, 0.2));
    const double lo = rng.uniform(0.0, 0.4);
    const double hi = lo + rng.uniform(0.1, 1.0 - lo - 1e-9);
    const auto up = compute_soc(q, q.front(), q.back(), lo, hi, SegmentDirection::charge);
    for (size_t k = 1; k < up.size(); ++k) CHECK(up[k] > up[k - 1]);
    const auto down = compute_soc(q, q.front(), q.back(), lo, hi, SegmentDirection::discharge);
    for (size_t k = 1; k < down.size(); ++k) CHECK(down[k] < down[k - 1]);
  }
}

TEST_CASE("cycle resampling on linear profiles") {
  // L=4: two charge points + two discharge points, exactly on the interpolation lines
  CycleRecord c = constant_current_cycle(2.0, 3600.0, 2.0, 3600.0, 7, 3.9, 3.5);
  // voltage linear vs SOC: overwrite with a line v = 3.0 + soc
  const auto q_ch = cumulative_capacity(c, c.charge_span);
  for (i64 k = 0; k <= c.charge_span.last; ++k)
    c.voltage_v[static_cast<size_t>(k)] = 3.0 + q_ch[static_cast<size_t>(k)] / q_ch.back();
  const auto q_dis = cumulative_capacity(c, c.discharge_span);
  for (i64 k = c.discharge_span.first; k <= c.discharge_span.last; ++k)
    c.voltage_v[static_cast<size_t>(k)] =
        4.0 - q_dis[static_cast<size_t>(k - c.discharge_span.first)] / q_dis.back();

  const Tensor out = resample_cycle(c, 0.0, 1.0, 2.0, 4);
  // SOC channel: first half ascending over [0,1], second half descending
  CHECK(out(0, kSoc) == doctest::Approx(0.0));
  CHECK(out(1, kSoc) == doctest::Approx(1.0));
  CHECK(out(2, kSoc) == doctest::Approx(1.0));
  CHECK(out(3, kSoc) == doctest::Approx(0.0));
  // voltage exactly on the lines
  CHECK(out(0, kVoltage) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(out(1, kVoltage) == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(out(2, kVoltage) == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(out(3, kVoltage) == doctest::Approx(3.0).epsilon(1e-12));
  // constant 2 A on a 2 Ah cell -> C-rate 1 everywhere
  for (i64 k = 0; k < 4; ++k) CHECK(std::abs(out(k, kCurrent)) == doctest::Approx(1.0));
}

TEST_CASE("descriptors: symmetric cycle, CE ratio, EE analytic") {
  // identical |I| and V profiles -> CE=EE=1
  CycleRecord c = constant_current_cycle(2.0, 3600.0, 2.0, 3600.0, 9, 3.7, 3.7);
  CycleDescriptors d = compute_cycle_descriptors(c);
  CHECK(d.coulombic_efficiency == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(d.energy_efficiency == doctest::Approx(1.0).epsilon(1e-12));

  // discharge 1.8 Ah / charge 2.0 Ah -> CE = 0.9
  c = constant_current_cycle(2.0, 3600.0, 1.8, 3600.0, 9, 3.7, 3.7);
  d = compute_cycle_descriptors(c);
  CHECK(d.coulombic_efficiency == doctest::Approx(0.9).epsilon(1e-12));

  // CE=1 with mean 3.5 V discharge vs 3.7 V charge -> EE = 3.5/3.7 (trapezoid ratio oracle)
  c = constant_current_cycle(2.0, 3600.0, 2.0, 3600.0, 9, 3.7, 3.5);
  d = compute_cycle_descriptors(c);
  CHECK(d.energy_efficiency == doctest::Approx(3.5 / 3.7).epsilon(1e-9));
  CHECK(d.energy_efficiency == doctest::Approx(0.9459).epsilon(1e-3));

  // cumulative energy meter series takes precedence when present
  c = constant_current_cycle(2.0, 3600.0, 2.0, 3600.0, 9, 3.7, 3.7);
  c.energy_wh.assign(c.timestamps_s.size(), 0.0);
  for (size_t k = 0; k < 9; ++k) c.energy_wh[k] = 8.0 * static_cast<double>(k) / 8.0;
  for (size_t k = 9; k < 18; ++k) c.energy_wh[k] = 8.0 + 6.0 * static_cast<double>(k - 9) / 8.0;
  d = compute_cycle_descriptors(c);
  CHECK(d.energy_efficiency == doctest::Approx(6.0 / 8.0).epsilon(1e-12));
}

TEST_CASE("model input padding and masking") {
  ModelConfig cfg;
  cfg.L = 20;
  cfg.S_max = 10;
  cfg.P = 5;
  BatteryRecord r;
  r.battery_id = "pad";
  r.condition.nominal_capacity_ah = 2.0;
  r.cap0_ah = 2.0;
  for (int k = 0; k < 3; ++k) r.cycles.push_back(constant_current_cycle(2.0, 3600.0, 2.0, 3600.0));
  const ModelInput in = build_model_input(r, 3, cfg);
  CHECK(in.S == 3);
  i64 mask_sum = 0;
  for (auto m : in.cycle_mask) mask_sum += m;
  CHECK(mask_sum == 3);
  for (i64 s = 3; s < 10; ++s)
    for (i64 l = 0; l < 20; ++l)
      for (i64 ch = 0; ch < 4; ++ch) CHECK(in.X(s, l, ch) == 0.0);
  for (i64 s = 3; s < 10; ++s) {
    CHECK(in.X_f(s, 0) == 0.0);
    CHECK(in.X_f(s, 1) == 0.0);
  }

  CHECK_THROWS_AS(build_model_input(r, 4, cfg), Error);   // fewer cycles than S
  CHECK_THROWS_AS(build_model_input(r, 11, cfg), Error);  // S > S_max
}

TEST_CASE("default config input shape is [100 x 300 x 4]") {
  const ModelConfig cfg;
  CHECK(cfg.S_max == 100);
  CHECK(cfg.L == 300);
  BatteryRecord r;
  r.battery_id = "shape";
  r.condition.nominal_capacity_ah = 2.0;
  r.cap0_ah = 2.0;
  r.cycles.push_back(constant_current_cycle(2.0, 3600.0, 2.0, 3600.0));
  const ModelInput in = build_model_input(r, 1, cfg);
  CHECK(in.X.shape == std::vector<i64>{100, 300, 4});
}

TEST_CASE("target construction and normalization") {
  SohTrajectory t;
  for (i64 n = 1; n <= 60; ++n) t.soh.push_back(1.0 - 0.004 * static_cast<double>(n));
  t.t_eol = compute_eol(t.soh, 0.8);
  const Target tgt = build_target(t, 10, 0.8, 100);
  // soh 0.9 -> 0.5; endpoints
  CHECK(normalize_soh(0.9, 0.8) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(normalize_soh(0.8, 0.8) == doctest::Approx(0.0));
  CHECK(normalize_soh(1.0, 0.8) == doctest::Approx(1.0));
  for (i64 j = 0; j < 100; ++j) {
    const bool in_region = j + 1 > 10 && j + 1 <= *t.t_eol;
    CHECK(tgt.mask(j) == (in_region ? 1.0 : 0.0));
    if (in_region)
      CHECK(tgt.y_norm(j) == doctest::Approx(normalize_soh(t.at(j + 1), 0.8)).epsilon(1e-12));
    else
      CHECK(tgt.y_norm(j) == 0.0);
  }

  SohTrajectory early = t;
  early.t_eol = 5;
  CHECK_THROWS_WITH_AS(build_target(early, 10, 0.8, 100), doctest::Contains("NothingToPredict"),
                       Error);
}

TEST_CASE("normalization round-trip: 1000 random values within 1e-12") {
  Rng rng(71);
  for (int k = 0; k < 1000; ++k) {
    const double tau = rng.uniform(0.5, 0.95);
    const double y = rng.uniform(0.0, 1.3);
    CHECK(std::abs(denormalize_soh(normalize_soh(y, tau), tau) - y) < 1e-12);
  }
}

TEST_CASE("first-cycle discharge capacity can stand in for nominal cap0") {
  BatteryRecord r;
  r.battery_id = "calb-style";
  r.condition.nominal_capacity_ah = 2.0;
  r.cap0_ah = 2.0;  // nominal says 2.0 Ah ...
  r.dod = 1.0;
  r.cap0_from_first_cycle = true;
  // ... but the first cycle only discharges 1.6 Ah, so SOH is measured against 1.6
  r.cycles.push_back(constant_current_cycle(1.6, 3600.0, 1.6, 3600.0));
  r.cycles.push_back(constant_current_cycle(1.6, 3600.0, 1.44, 3600.0));
  const SohTrajectory t = compute_soh_series(r);
  CHECK(t.soh[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(t.soh[1] == doctest::Approx(0.9).epsilon(1e-12));
}

TEST_CASE("EOL minimality holds on random filtered trajectories") {
  Rng rng(97);
  SmoothingParams p;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> soh;
    double v = rng.uniform(0.95, 1.05);
    while (v > 0.7 && soh.size() < 4000) {
      soh.push_back(v);
      v -= rng.uniform(0.0, 0.004);
    }
    soh.push_back(v);
    const auto res = filter_and_extrapolate(soh, 0.8, p);
    if (!std::holds_alternative<SohTrajectory>(res)) continue;
    const SohTrajectory& t = std::get<SohTrajectory>(res);
    REQUIRE(t.t_eol.has_value());
    CHECK(t.at(*t.t_eol) < 0.8);
    for (i64 j = 1; j < *t.t_eol; ++j) CHECK(t.at(j) >= 0.8);
  }
}

TEST_CASE("fixed gamma thresholds bypass the training-split percentiles") {
  SmoothingParams p;
  p.onset_method = OnsetMethod::percentile;
  p.gamma_plus = 0.05;
  p.gamma_minus = -0.05;
  std::vector<double> soh = {1.0, 0.99, 0.90, 0.99, 0.99, 0.99};  // one -9% dip
  const auto onsets = detect_artifact_onsets(soh, OnsetInputs{}, p);  // no deltas needed
  REQUIRE(onsets.size() == 2);  // the dip and the +10% rebound
  CHECK(onsets[0] == 3);
  CHECK(onsets[1] == 4);
}

TEST_CASE("non-monotone SOC within a segment fails the resample") {
  // current drops to zero mid-charge, so cumulative capacity (and SOC) stalls
  CycleRecord c;
  c.timestamps_s = {0.0, 600.0, 1200.0, 1800.0, 2000.0, 2600.0};
  c.voltage_v = {3.5, 3.6, 3.6, 3.7, 3.8, 3.4};
  c.current_a = {2.0, 0.0, 0.0, 2.0, -2.0, -2.0};
  c.charge_span = {0, 3};
  c.discharge_span = {4, 5};
  CHECK_THROWS_WITH_AS(resample_cycle(c, 0.0, 1.0, 2.0, 4), doctest::Contains("ResampleFailure"),
                       Error);
}

TEST_CASE("zero charge capacity invalidates the cycle descriptors") {
  CycleRecord c;
  c.timestamps_s = {0.0, 600.0, 1200.0, 1800.0};
  c.voltage_v = {3.5, 3.5, 3.5, 3.5};
  c.current_a = {0.0, 0.0, -2.0, -2.0};
  c.charge_span = {0, 1};
  c.discharge_span = {2, 3};
  CHECK_THROWS_WITH_AS(compute_cycle_descriptors(c), doctest::Contains("InvalidCycle"), Error);
}

TEST_CASE("S = S_max fills every row and the whole cycle mask") {
  ModelConfig cfg;
  cfg.L = 12;
  cfg.S_max = 4;
  cfg.P = 3;
  BatteryRecord r;
  r.battery_id = "full";
  r.condition.nominal_capacity_ah = 2.0;
  r.cap0_ah = 2.0;
  for (int k = 0; k < 4; ++k) r.cycles.push_back(constant_current_cycle(2.0, 3600.0, 2.0, 3600.0));
  const ModelInput in = build_model_input(r, 4, cfg);
  for (auto m : in.cycle_mask) CHECK(m == 1);
}
