#include "bdtf/eval.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "bdtf/error.hpp"
#include "bdtf/rng.hpp"

namespace bdtf {

Metrics compute_metrics(const Tensor& y_hat_norm, const Target& target) {
  double abs_sum = 0.0, pct_sum = 0.0;
  i64 count = 0;
  for (i64 j = 0; j < target.mask.size(); ++j) {
    if (target.mask(j) == 0.0) continue;
    const double y = denormalize_soh(target.y_norm(j), target.tau);
    const double yh = denormalize_soh(y_hat_norm(j), target.tau);
    const double err = std::abs(y - yh);
    abs_sum += err;
    pct_sum += err / std::abs(y);
    ++count;
  }
  if (count == 0) throw Error("NothingToScore", "target has no prediction-region cycles");
  Metrics m;
  m.mae = abs_sum / static_cast<double>(count);
  m.mape_pct = 100.0 * pct_sum / static_cast<double>(count);
  return m;
}

Metrics persistence_metrics(double last_obs_soh, const Target& target) {
  Tensor y_hat = Tensor::full({target.y_norm.size()}, normalize_soh(last_obs_soh, target.tau));
  return compute_metrics(y_hat, target);
}

Split SplitPlan::of(const std::string& key) const {
  const auto it = assignment.find(key);
  if (it == assignment.end()) throw Error("SplitIntegrity", "condition key missing from plan");
  return it->second;
}

std::vector<std::string> SplitPlan::keys_in(Split s) const {
  std::vector<std::string> out;
  for (const auto& [k, v] : assignment)
    if (v == s) out.push_back(k);
  return out;
}

namespace {

std::vector<std::string> unique_sorted(const std::vector<std::string>& keys) {
  std::set<std::string> s(keys.begin(), keys.end());
  return std::vector<std::string>(s.begin(), s.end());
}

}  // namespace

SplitPlan split_by_condition(const std::vector<std::string>& condition_keys,
                             const std::array<double, 3>& ratios, std::uint64_t seed) {
  std::vector<std::string> keys = unique_sorted(condition_keys);
  const i64 n = static_cast<i64>(keys.size());
  if (n < 3) throw Error("InsufficientConditions", "need at least 3 distinct conditions");
  Rng rng(mix_seed(seed, 0x517ULL));
  rng.shuffle(keys);

  // largest-remainder apportionment; every split gets at least one condition
  const double total = ratios[0] + ratios[1] + ratios[2];
  double exact[3];
  i64 sizes[3];
  double rem[3];
  i64 assigned = 0;
  for (int i = 0; i < 3; ++i) {
    exact[i] = static_cast<double>(n) * ratios[i] / total;
    sizes[i] = static_cast<i64>(std::floor(exact[i]));
    rem[i] = exact[i] - static_cast<double>(sizes[i]);
    assigned += sizes[i];
  }
  while (assigned < n) {
    int best = 0;
    for (int i = 1; i < 3; ++i)
      if (rem[i] > rem[best]) best = i;
    ++sizes[best];
    rem[best] = -1.0;
    ++assigned;
  }
  for (int i = 0; i < 3; ++i) {
    if (sizes[i] == 0) {
      int donor = 0;
      for (int j = 1; j < 3; ++j)
        if (sizes[j] > sizes[donor]) donor = j;
      --sizes[donor];
      ++sizes[i];
    }
  }

  SplitPlan plan;
  plan.seed = seed;
  plan.mode = "random";
  i64 idx = 0;
  for (i64 i = 0; i < sizes[0]; ++i) plan.assignment[keys[static_cast<size_t>(idx++)]] = Split::train;
  for (i64 i = 0; i < sizes[1]; ++i) plan.assignment[keys[static_cast<size_t>(idx++)]] = Split::val;
  for (i64 i = 0; i < sizes[2]; ++i) plan.assignment[keys[static_cast<size_t>(idx++)]] = Split::test;
  return plan;
}

SplitPlan split_leave_one_out(const std::vector<std::string>& condition_keys, std::uint64_t seed) {
  std::vector<std::string> keys = unique_sorted(condition_keys);
  const i64 n = static_cast<i64>(keys.size());
  if (n < 3) throw Error("InsufficientConditions", "need at least 3 distinct conditions");
  Rng rng(mix_seed(seed, 0x100ULL));
  rng.shuffle(keys);
  const i64 n_val = static_cast<i64>(std::ceil(0.25 * static_cast<double>(n - 1)));
  SplitPlan plan;
  plan.seed = seed;
  plan.mode = "leave-one-out";
  plan.assignment[keys[0]] = Split::test;
  for (i64 i = 1; i <= n_val; ++i) plan.assignment[keys[static_cast<size_t>(i)]] = Split::val;
  for (i64 i = n_val + 1; i < n; ++i) plan.assignment[keys[static_cast<size_t>(i)]] = Split::train;
  return plan;
}

std::vector<std::string> subsample_training(const std::vector<ProcessedSample>& samples,
                                            const SplitPlan& plan, double fraction,
                                            std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw Error("InvalidConfig", "fraction must lie in (0,1]");
  std::vector<std::string> train_ids;
  for (const auto& s : samples)
    if (plan.of(s.input.condition_key) == Split::train) train_ids.push_back(s.battery_id);
  std::sort(train_ids.begin(), train_ids.end());
  Rng rng(mix_seed(seed, 0xF7ACULL));
  rng.shuffle(train_ids);
  const i64 keep = static_cast<i64>(
      std::ceil(fraction * static_cast<double>(train_ids.size())));
  train_ids.resize(static_cast<size_t>(std::min<i64>(keep, static_cast<i64>(train_ids.size()))));
  std::sort(train_ids.begin(), train_ids.end());
  return train_ids;
}

SplitSamples partition_samples(const std::vector<ProcessedSample>& samples, const SplitPlan& plan,
                               const std::vector<std::string>& kept_train_ids) {
  SplitSamples out;
  for (const auto& s : samples) {
    switch (plan.of(s.input.condition_key)) {
      case Split::train:
        if (kept_train_ids.empty() ||
            std::find(kept_train_ids.begin(), kept_train_ids.end(), s.battery_id) !=
                kept_train_ids.end())
          out.train.push_back(s);
        break;
      case Split::val:
        out.val.push_back(s);
        break;
      case Split::test:
        out.test.push_back(s);
        break;
    }
  }
  return out;
}

void check_condition_exclusivity(const SplitSamples& split) {
  std::set<std::string> train_keys, val_keys, test_keys;
  for (const auto& s : split.train) train_keys.insert(s.input.condition_key);
  for (const auto& s : split.val) val_keys.insert(s.input.condition_key);
  for (const auto& s : split.test) test_keys.insert(s.input.condition_key);
  for (const auto& k : test_keys)
    if (train_keys.count(k) || val_keys.count(k))
      throw Error("SplitIntegrity", "test condition appears in train or val");
  for (const auto& k : val_keys)
    if (train_keys.count(k)) throw Error("SplitIntegrity", "val condition appears in train");
}

std::vector<double> compute_dva(const std::vector<double>& voltage,
                                const std::vector<double>& capacity) {
  const size_t n = voltage.size();
  if (n < 3 || capacity.size() != n)
    throw Error("InvalidSegment", "need matching series of length >= 3");
  const bool inc = capacity[1] > capacity[0];
  for (size_t i = 1; i < n; ++i) {
    const bool step_inc = capacity[i] > capacity[i - 1];
    if (step_inc != inc || capacity[i] == capacity[i - 1])
      throw Error("InvalidSegment", "capacity must be strictly monotone");
  }
  std::vector<double> dvdq(n);
  dvdq[0] = (voltage[1] - voltage[0]) / (capacity[1] - capacity[0]);
  dvdq[n - 1] = (voltage[n - 1] - voltage[n - 2]) / (capacity[n - 1] - capacity[n - 2]);
  for (size_t i = 1; i + 1 < n; ++i)
    dvdq[i] = (voltage[i + 1] - voltage[i - 1]) / (capacity[i + 1] - capacity[i - 1]);

  // 5-point moving average, window clipped at the edges
  std::vector<double> out(n);
  for (size_t i = 0; i < n; ++i) {
    const size_t lo = i >= 2 ? i - 2 : 0;
    const size_t hi = std::min(n - 1, i + 2);
    double acc = 0.0;
    for (size_t j = lo; j <= hi; ++j) acc += dvdq[j];
    out[i] = acc / static_cast<double>(hi - lo + 1);
  }
  return out;
}

}  // namespace bdtf
