#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "bdtf/error.hpp"
#include "bdtf/eval.hpp"
#include "bdtf/rng.hpp"
#include "bdtf/synth.hpp"

using namespace bdtf;

namespace {

Target simple_target(double tau = 0.8) {
  Target t;
  t.tau = tau;
  t.y_norm = Tensor::zeros({20});
  t.mask = Tensor::zeros({20});
  for (i64 j = 5; j < 15; ++j) {
    t.y_norm(j) = 1.0;  // true SOH = 1.0
    t.mask(j) = 1.0;
  }
  return t;
}

std::vector<std::string> fake_keys(i64 n) {
  std::vector<std::string> keys;
  for (i64 i = 0; i < n; ++i) keys.push_back("condition-" + std::to_string(i));
  return keys;
}

}  // namespace

TEST_CASE("metrics: perfect, constant offset, mask locality") {
  const Target t = simple_target();
  Tensor perfect = t.y_norm;
  Metrics m = compute_metrics(perfect, t);
  CHECK(m.mae == 0.0);
  CHECK(m.mape_pct == 0.0);

  // +0.01 SOH error against true SOH 1.0 -> MAE 0.01, MAPE 1%
  Tensor off = t.y_norm;
  for (i64 j = 0; j < off.size(); ++j)
    if (t.mask(j) == 1.0) off(j) = normalize_soh(1.01, t.tau);
  m = compute_metrics(off, t);
  CHECK(m.mae == doctest::Approx(0.01).epsilon(1e-9));
  CHECK(m.mape_pct == doctest::Approx(1.0).epsilon(1e-9));

  // error only at a mask=0 position -> (0, 0)
  Tensor elsewhere = t.y_norm;
  elsewhere(0) = 123.0;
  m = compute_metrics(elsewhere, t);
  CHECK(m.mae == 0.0);
  CHECK(m.mape_pct == 0.0);

  Target empty = t;
  empty.mask.fill(0.0);
  CHECK_THROWS_WITH_AS(compute_metrics(perfect, empty), doctest::Contains("NothingToScore"),
                       Error);
}

TEST_CASE("metric locality under random mask=0 perturbations") {
  Rng rng(5);
  const Target base = simple_target();
  Tensor pred = base.y_norm;
  for (i64 j = 0; j < pred.size(); ++j) pred(j) += 0.1 * rng.uniform(-1.0, 1.0);
  const Metrics m0 = compute_metrics(pred, base);
  for (int trial = 0; trial < 50; ++trial) {
    Target tweaked = base;
    for (i64 j = 0; j < tweaked.y_norm.size(); ++j)
      if (tweaked.mask(j) == 0.0) tweaked.y_norm(j) = rng.uniform(-10.0, 10.0);
    const Metrics m1 = compute_metrics(pred, tweaked);
    CHECK(m1.mae == m0.mae);
    CHECK(m1.mape_pct == m0.mape_pct);
  }
}

TEST_CASE("persistence baseline scores with the same rules") {
  Target t = simple_target();
  // truth 1.0 on the region; last observed 0.9 -> MAE 0.1, MAPE 10%
  const Metrics m = persistence_metrics(0.9, t);
  CHECK(m.mae == doctest::Approx(0.1).epsilon(1e-9));
  CHECK(m.mape_pct == doctest::Approx(10.0).epsilon(1e-9));
}

TEST_CASE("random split: 10 conditions at 6:2:2 give sizes (6,2,2)") {
  const SplitPlan plan = split_by_condition(fake_keys(10), {6, 2, 2}, 42);
  CHECK(plan.keys_in(Split::train).size() == 6);
  CHECK(plan.keys_in(Split::val).size() == 2);
  CHECK(plan.keys_in(Split::test).size() == 2);

  const SplitPlan again = split_by_condition(fake_keys(10), {6, 2, 2}, 42);
  CHECK(plan.assignment == again.assignment);
  const SplitPlan other = split_by_condition(fake_keys(10), {6, 2, 2}, 43);
  CHECK(plan.assignment != other.assignment);

  CHECK_THROWS_WITH_AS(split_by_condition(fake_keys(2), {6, 2, 2}, 1),
                       doctest::Contains("InsufficientConditions"), Error);
}

TEST_CASE("split sizes stay within one condition of the exact ratio") {
  for (i64 n : {3, 5, 7, 11, 16, 20, 23, 50}) {
    const SplitPlan plan = split_by_condition(fake_keys(n), {6, 2, 2}, 7);
    const double total = static_cast<double>(n);
    CHECK(std::abs(static_cast<double>(plan.keys_in(Split::train).size()) - 0.6 * total) <= 1.0);
    CHECK(std::abs(static_cast<double>(plan.keys_in(Split::val).size()) - 0.2 * total) <= 1.0);
    CHECK(std::abs(static_cast<double>(plan.keys_in(Split::test).size()) - 0.2 * total) <= 1.0);
    CHECK(plan.keys_in(Split::train).size() + plan.keys_in(Split::val).size() +
              plan.keys_in(Split::test).size() ==
          static_cast<size_t>(n));
  }
}

TEST_CASE("leave-one-out: 4 conditions -> test 1, val 1 (ceil of 25% of 3), train 2") {
  const SplitPlan plan = split_leave_one_out(fake_keys(4), 3);
  CHECK(plan.keys_in(Split::test).size() == 1);
  CHECK(plan.keys_in(Split::val).size() == 1);
  CHECK(plan.keys_in(Split::train).size() == 2);
}

TEST_CASE("subsampling keeps ceil(fraction*n) train batteries and never touches test") {
  std::vector<ProcessedSample> samples;
  const auto keys = fake_keys(6);
  for (i64 c = 0; c < 6; ++c)
    for (i64 b = 0; b < 2; ++b) {
      ProcessedSample s;
      s.battery_id = "b" + std::to_string(c) + "-" + std::to_string(b);
      s.input.condition_key = keys[static_cast<size_t>(c)];
      samples.push_back(s);
    }
  const SplitPlan plan = split_by_condition(keys, {6, 2, 2}, 9);
  const i64 n_train = static_cast<i64>(partition_samples(samples, plan).train.size());

  const auto all_kept = subsample_training(samples, plan, 1.0, 4);
  CHECK(static_cast<i64>(all_kept.size()) == n_train);

  const auto half = subsample_training(samples, plan, 0.5, 4);
  CHECK(static_cast<i64>(half.size()) == (n_train + 1) / 2);

  const SplitSamples before = partition_samples(samples, plan);
  const SplitSamples after = partition_samples(samples, plan, half);
  REQUIRE(before.test.size() == after.test.size());
  for (size_t i = 0; i < before.test.size(); ++i)
    CHECK(before.test[i].battery_id == after.test[i].battery_id);
  CHECK(after.train.size() == half.size());

  check_condition_exclusivity(after);
}

TEST_CASE("exclusivity check rejects leaked conditions") {
  SplitSamples split;
  ProcessedSample a, b;
  a.battery_id = "a";
  a.input.condition_key = "k1";
  b.battery_id = "b";
  b.input.condition_key = "k1";
  split.train.push_back(a);
  split.test.push_back(b);
  CHECK_THROWS_WITH_AS(check_condition_exclusivity(split), doctest::Contains("SplitIntegrity"),
                       Error);
}

TEST_CASE("DVA: linear V(Q) gives the slope; synthetic OCV peaks at the sigmoid center") {
  // linear: V = 3 + 0.5 Q
  std::vector<double> q, v;
  for (i64 k = 0; k < 40; ++k) {
    q.push_back(0.05 * static_cast<double>(k));
    v.push_back(3.0 + 0.5 * q.back());
  }
  const auto dvdq = compute_dva(v, q);
  CHECK(dvdq.size() == q.size());
  for (double x : dvdq) CHECK(x == doctest::Approx(0.5).epsilon(1e-9));

  // synthetic OCV: dV/dQ peak at SOC = center (analytic derivative maximum)
  const double v0 = 3.0, slope = 0.6, amp = 0.12, center = 0.42, width = 0.08;
  std::vector<double> soc, volts, cap;
  const i64 n = 201;
  for (i64 k = 0; k < n; ++k) {
    const double s = static_cast<double>(k) / static_cast<double>(n - 1);
    soc.push_back(s);
    cap.push_back(2.0 * s);  // Q linear in SOC
    volts.push_back(synth_ocv(s, v0, slope, amp, center, width));
  }
  const auto curve = compute_dva(volts, cap);
  size_t argmax = 0;
  for (size_t k = 1; k < curve.size(); ++k)
    if (curve[k] > curve[argmax]) argmax = k;
  CHECK(std::abs(soc[argmax] - center) < 0.02);

  std::vector<double> bad_q = q;
  bad_q[5] = bad_q[4];
  CHECK_THROWS_WITH_AS(compute_dva(v, bad_q), doctest::Contains("InvalidSegment"), Error);
}
