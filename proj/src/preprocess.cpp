#include "bdtf/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "bdtf/error.hpp"
#include "bdtf/pchip.hpp"

namespace bdtf {

double compute_cycle_capacity(const CycleRecord& cycle, const SampleSpan& span) {
  if (span.length() < 2) throw Error("InvalidSpan", "span must contain at least 2 samples");
  double ah = 0.0;
  for (i64 i = span.first + 1; i <= span.last; ++i) {
    const double dt = cycle.timestamps_s[static_cast<size_t>(i)] -
                      cycle.timestamps_s[static_cast<size_t>(i - 1)];
    const double a = std::abs(cycle.current_a[static_cast<size_t>(i - 1)]);
    const double b = std::abs(cycle.current_a[static_cast<size_t>(i)]);
    ah += 0.5 * (a + b) * dt;
  }
  return ah / 3600.0;
}

std::vector<double> cumulative_capacity(const CycleRecord& cycle, const SampleSpan& span) {
  std::vector<double> q(static_cast<size_t>(span.length()), 0.0);
  for (i64 i = span.first + 1; i <= span.last; ++i) {
    const double dt = cycle.timestamps_s[static_cast<size_t>(i)] -
                      cycle.timestamps_s[static_cast<size_t>(i - 1)];
    const double a = std::abs(cycle.current_a[static_cast<size_t>(i - 1)]);
    const double b = std::abs(cycle.current_a[static_cast<size_t>(i)]);
    q[static_cast<size_t>(i - span.first)] =
        q[static_cast<size_t>(i - span.first - 1)] + 0.5 * (a + b) * dt / 3600.0;
  }
  return q;
}

SohTrajectory compute_soh_series(const BatteryRecord& record) {
  if (record.dod <= 0.0) throw Error("InvalidRecord", "dod must be > 0");
  double cap0 = record.cap0_ah;
  if (record.cap0_from_first_cycle) {
    if (record.cycles.empty()) throw Error("InvalidRecord", "no cycles for first-cycle cap0");
    cap0 = compute_cycle_capacity(record.cycles.front(), record.cycles.front().discharge_span);
  }
  if (cap0 <= 0.0) throw Error("InvalidRecord", "cap0 must be > 0");
  SohTrajectory t;
  t.soh.reserve(record.cycles.size());
  for (const CycleRecord& c : record.cycles)
    t.soh.push_back(compute_cycle_capacity(c, c.discharge_span) / (cap0 * record.dod));
  return t;
}

std::vector<double> clip_spikes(const std::vector<double>& soh, const SmoothingParams& params) {
  std::vector<double> out = soh;
  const size_t n = out.size();
  for (size_t k = 1; k < n; ++k) {
    const double prev = out[k - 1];
    if (prev <= 0.0) continue;
    const double rel = (out[k] - prev) / prev;
    if (rel >= -params.spike_drop_threshold) continue;
    // Only isolated spike-like drops: the next cycle must be back within the recovery band
    // of the pre-drop level. A drop at the series end has no recovery evidence.
    if (k + 1 < n && out[k + 1] >= prev - params.spike_recovery_band) out[k] = prev;
  }
  return out;
}

std::vector<double> soh_deltas(const std::vector<double>& soh) {
  std::vector<double> d;
  if (soh.size() < 2) return d;
  d.reserve(soh.size() - 1);
  for (size_t k = 1; k < soh.size(); ++k) d.push_back((soh[k] - soh[k - 1]) / soh[k - 1]);
  return d;
}

double percentile(std::vector<double> sample, double p) {
  if (sample.empty()) throw Error("MissingThresholdSource", "empty percentile sample");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  auto rank = static_cast<size_t>(std::ceil(p / 100.0 * n));
  if (rank < 1) rank = 1;
  if (rank > sample.size()) rank = sample.size();
  return sample[rank - 1];
}

std::vector<i64> detect_artifact_onsets(const std::vector<double>& soh, const OnsetInputs& inputs,
                                        const SmoothingParams& params) {
  std::vector<i64> onsets;
  const i64 n = static_cast<i64>(soh.size());
  switch (params.onset_method) {
    case OnsetMethod::rpt: {
      for (i64 r : inputs.rpt_cycles) {
        const i64 k = r - 1;  // last normal cycle before the reference test
        if (k >= 2 && k <= n) onsets.push_back(k);
      }
      break;
    }
    case OnsetMethod::time_gap: {
      const auto& t = inputs.cycle_start_s;
      for (size_t k = 1; k < t.size(); ++k)
        if (t[k] - t[k - 1] > params.gamma_gap_s) onsets.push_back(static_cast<i64>(k) + 1);
      break;
    }
    case OnsetMethod::percentile: {
      if ((!params.gamma_plus || !params.gamma_minus) && inputs.training_deltas.empty())
        throw Error("MissingThresholdSource",
                    "percentile onset detection needs training-split deltas or fixed thresholds");
      const double gamma_plus =
          params.gamma_plus ? *params.gamma_plus : percentile(inputs.training_deltas, 99.0);
      const double gamma_minus =
          params.gamma_minus ? *params.gamma_minus : percentile(inputs.training_deltas, 1.0);
      const std::vector<double> d = soh_deltas(soh);
      for (size_t k = 0; k < d.size(); ++k)
        if (d[k] > gamma_plus || d[k] < gamma_minus) onsets.push_back(static_cast<i64>(k) + 2);
      break;
    }
  }
  std::sort(onsets.begin(), onsets.end());
  onsets.erase(std::unique(onsets.begin(), onsets.end()), onsets.end());
  return onsets;
}

i64 find_recovery_point(const std::vector<double>& soh, i64 onset, double epsilon, i64 W) {
  const i64 n = static_cast<i64>(soh.size());
  if (onset < 2 || onset > n) return n + 1;
  const double pre = soh[static_cast<size_t>(onset - 2)];
  for (i64 ke = onset; ke <= n; ++ke) {
    bool ok = true;
    for (i64 j = ke; j < ke + W && j <= n; ++j) {
      if (std::abs(soh[static_cast<size_t>(j - 1)] - pre) > epsilon) {
        ok = false;
        break;
      }
    }
    if (ok) return ke;
  }
  return n + 1;
}

std::vector<double> smooth_region_pchip(const std::vector<double>& soh, i64 k_s, i64 k_e,
                                        i64 M_anchor) {
  const i64 n = static_cast<i64>(soh.size());
  if (k_s < 1 || k_e > n || k_s > k_e) throw Error("CannotSmooth", "invalid region bounds");
  std::vector<double> xs, ys;
  const i64 lo = std::max<i64>(1, k_s - M_anchor);
  for (i64 j = lo; j < k_s; ++j) {
    xs.push_back(static_cast<double>(j));
    ys.push_back(soh[static_cast<size_t>(j - 1)]);
  }
  const size_t left = xs.size();
  const i64 hi = std::min<i64>(n, k_e + M_anchor);
  for (i64 j = k_e + 1; j <= hi; ++j) {
    xs.push_back(static_cast<double>(j));
    ys.push_back(soh[static_cast<size_t>(j - 1)]);
  }
  if (left == 0 || xs.size() == left)
    throw Error("CannotSmooth", "region has no normal anchor cycles on one side");
  Pchip interp(xs, ys);
  std::vector<double> out = soh;
  for (i64 j = k_s; j <= k_e; ++j) out[static_cast<size_t>(j - 1)] = interp(static_cast<double>(j));
  return out;
}

i64 compute_eol(const std::vector<double>& soh, double tau) {
  for (size_t j = 0; j < soh.size(); ++j)
    if (soh[j] < tau) return static_cast<i64>(j) + 1;
  throw Error("NoEol", "SOH never falls below tau");
}

std::variant<Excluded, SohTrajectory> filter_and_extrapolate(const std::vector<double>& soh,
                                                             double tau,
                                                             const SmoothingParams& params) {
  if (soh.empty()) return Excluded{"empty trajectory"};
  const double mn = *std::min_element(soh.begin(), soh.end());
  if (mn > tau + params.filter_margin)
    return Excluded{"insufficient degradation: min SOH above tau + margin"};

  SohTrajectory t;
  t.soh = soh;
  if (mn < tau) {
    t.t_eol = compute_eol(soh, tau);
    return t;
  }

  // Band case: least-squares line through the last extrap_window (cycle, soh) points,
  // extended until the first cycle strictly below tau.
  const i64 n = static_cast<i64>(soh.size());
  const i64 w = std::min<i64>(params.extrap_window, n);
  if (w < 2) return Excluded{"too few cycles to extrapolate"};
  double sx = 0.0, sy = 0.0;
  for (i64 j = n - w + 1; j <= n; ++j) {
    sx += static_cast<double>(j);
    sy += soh[static_cast<size_t>(j - 1)];
  }
  const double mx = sx / static_cast<double>(w), my = sy / static_cast<double>(w);
  double sxx = 0.0, sxy = 0.0;
  for (i64 j = n - w + 1; j <= n; ++j) {
    const double dx = static_cast<double>(j) - mx;
    sxx += dx * dx;
    sxy += dx * (soh[static_cast<size_t>(j - 1)] - my);
  }
  const double slope = sxy / sxx;
  if (slope >= 0.0) return Excluded{"NonDegradingTail: tail slope is non-negative"};
  const double intercept = my - slope * mx;

  // Real-valued cycle where the line equals tau; first integer strictly past it crosses.
  // A crossing point within 1e-9 of an integer is treated as hitting tau exactly there.
  const double x_star = (tau - intercept) / slope;
  i64 cross = static_cast<i64>(std::floor(x_star)) + 1;
  if (std::abs(x_star - std::round(x_star)) < 1e-9)
    cross = static_cast<i64>(std::llround(x_star)) + 1;
  if (cross <= n) cross = n + 1;  // the measured part never went below tau

  t.extrapolated_from = n;
  for (i64 j = n + 1; j <= cross; ++j)
    t.soh.push_back(intercept + slope * static_cast<double>(j));
  t.t_eol = cross;
  return t;
}

std::vector<double> compute_soc(const std::vector<double>& capacity, double q_start, double q_end,
                                double soc_start, double soc_end, SegmentDirection direction) {
  if (q_end == q_start) throw Error("DegenerateSegment", "segment capacity endpoints coincide");
  std::vector<double> soc(capacity.size());
  for (size_t i = 0; i < capacity.size(); ++i) {
    const double f = (capacity[i] - q_start) / (q_end - q_start);
    double s = 0.0;
    if (direction == SegmentDirection::charge)
      s = soc_start + f * (soc_end - soc_start);
    else
      s = soc_end + f * (soc_start - soc_end);
    soc[i] = std::clamp(s, 0.0, 1.0);
  }
  return soc;
}

namespace {

// Linear interpolation of y against strictly increasing x.
double interp_linear(const std::vector<double>& x, const std::vector<double>& y, double xi) {
  if (xi <= x.front()) return y.front();
  if (xi >= x.back()) return y.back();
  size_t lo = 0, hi = x.size() - 1;
  while (hi - lo > 1) {
    const size_t mid = (lo + hi) / 2;
    if (x[mid] <= xi)
      lo = mid;
    else
      hi = mid;
  }
  const double t = (xi - x[lo]) / (x[lo + 1] - x[lo]);
  return y[lo] + t * (y[lo + 1] - y[lo]);
}

struct SegmentData {
  std::vector<double> soc;  // ascending after orientation fix
  std::vector<double> v, c, q;
};

SegmentData segment_series(const CycleRecord& cycle, const SampleSpan& span, double soc_start,
                           double soc_end, SegmentDirection dir) {
  const std::vector<double> q = cumulative_capacity(cycle, span);
  const std::vector<double> soc = compute_soc(q, q.front(), q.back(), soc_start, soc_end, dir);
  const bool ascending = dir == SegmentDirection::charge;
  for (size_t i = 1; i < soc.size(); ++i) {
    const bool ok = ascending ? soc[i] > soc[i - 1] : soc[i] < soc[i - 1];
    if (!ok) throw Error("ResampleFailure", "SOC is not strictly monotone within the segment");
  }
  SegmentData s;
  s.soc.reserve(soc.size());
  s.v.reserve(soc.size());
  s.c.reserve(soc.size());
  s.q.reserve(soc.size());
  // Store ascending in SOC so one interpolation routine serves both directions.
  if (ascending) {
    for (size_t i = 0; i < soc.size(); ++i) {
      s.soc.push_back(soc[i]);
      s.v.push_back(cycle.voltage_v[static_cast<size_t>(span.first) + i]);
      s.c.push_back(cycle.current_a[static_cast<size_t>(span.first) + i]);
      s.q.push_back(q[i]);
    }
  } else {
    for (size_t i = soc.size(); i-- > 0;) {
      s.soc.push_back(soc[i]);
      s.v.push_back(cycle.voltage_v[static_cast<size_t>(span.first) + i]);
      s.c.push_back(cycle.current_a[static_cast<size_t>(span.first) + i]);
      s.q.push_back(q[i]);
    }
  }
  return s;
}

}  // namespace

Tensor resample_cycle(const CycleRecord& cycle, double soc_start, double soc_end,
                      double nominal_capacity_ah, i64 L) {
  if (L % 2 != 0) throw Error("ResampleFailure", "L must be even");
  const i64 half = L / 2;
  const SegmentData ch =
      segment_series(cycle, cycle.charge_span, soc_start, soc_end, SegmentDirection::charge);
  const SegmentData dis =
      segment_series(cycle, cycle.discharge_span, soc_start, soc_end, SegmentDirection::discharge);

  Tensor out({L, 4});
  for (i64 k = 0; k < half; ++k) {
    // charge grid ascends start -> end; discharge grid descends end -> start
    const double f = half == 1 ? 0.0 : static_cast<double>(k) / static_cast<double>(half - 1);
    const double soc_up = soc_start + f * (soc_end - soc_start);
    const double soc_down = soc_end + f * (soc_start - soc_end);
    out(k, kVoltage) = interp_linear(ch.soc, ch.v, soc_up);
    out(k, kCurrent) = interp_linear(ch.soc, ch.c, soc_up) / nominal_capacity_ah;
    out(k, kCapacity) = interp_linear(ch.soc, ch.q, soc_up);
    out(k, kSoc) = soc_up;
    out(half + k, kVoltage) = interp_linear(dis.soc, dis.v, soc_down);
    out(half + k, kCurrent) = interp_linear(dis.soc, dis.c, soc_down) / nominal_capacity_ah;
    out(half + k, kCapacity) = interp_linear(dis.soc, dis.q, soc_down);
    out(half + k, kSoc) = soc_down;
  }
  return out;
}

namespace {

double segment_energy_wh(const CycleRecord& cycle, const SampleSpan& span) {
  if (!cycle.energy_wh.empty()) {
    return std::abs(cycle.energy_wh[static_cast<size_t>(span.last)] -
                    cycle.energy_wh[static_cast<size_t>(span.first)]);
  }
  double wh = 0.0;
  for (i64 i = span.first + 1; i <= span.last; ++i) {
    const double dt =
        cycle.timestamps_s[static_cast<size_t>(i)] - cycle.timestamps_s[static_cast<size_t>(i - 1)];
    const double a = std::abs(cycle.voltage_v[static_cast<size_t>(i - 1)] *
                              cycle.current_a[static_cast<size_t>(i - 1)]);
    const double b = std::abs(cycle.voltage_v[static_cast<size_t>(i)] *
                              cycle.current_a[static_cast<size_t>(i)]);
    wh += 0.5 * (a + b) * dt;
  }
  return wh / 3600.0;
}

}  // namespace

CycleDescriptors compute_cycle_descriptors(const CycleRecord& cycle) {
  const double q_ch = compute_cycle_capacity(cycle, cycle.charge_span);
  const double q_dis = compute_cycle_capacity(cycle, cycle.discharge_span);
  if (q_ch <= 0.0) throw Error("InvalidCycle", "zero charge capacity");
  const double e_ch = segment_energy_wh(cycle, cycle.charge_span);
  const double e_dis = segment_energy_wh(cycle, cycle.discharge_span);
  if (e_ch <= 0.0) throw Error("InvalidCycle", "zero charge energy");
  return CycleDescriptors{q_dis / q_ch, e_dis / e_ch};
}

ModelInput build_model_input(const BatteryRecord& record, i64 S, const ModelConfig& config) {
  if (S > config.S_max) throw Error("InvalidRecord", "S exceeds S_max");
  if (static_cast<i64>(record.cycles.size()) < S)
    throw Error("InvalidRecord", "record has fewer than S cycles");
  ModelInput in;
  in.X = Tensor::zeros({config.S_max, config.L, 4});
  in.X_f = Tensor::zeros({config.S_max, 2});
  in.cycle_mask.assign(static_cast<size_t>(config.S_max), 0);
  in.condition_key = record.condition.key();
  in.S = S;
  for (i64 i = 0; i < S; ++i) {
    try {
      const Tensor cyc = resample_cycle(record.cycles[static_cast<size_t>(i)], record.soc_start,
                                        record.soc_end, record.condition.nominal_capacity_ah,
                                        config.L);
      for (i64 l = 0; l < config.L; ++l)
        for (i64 c = 0; c < 4; ++c) in.X(i, l, c) = cyc(l, c);
      const CycleDescriptors cd = compute_cycle_descriptors(record.cycles[static_cast<size_t>(i)]);
      in.X_f(i, 0) = cd.coulombic_efficiency;
      in.X_f(i, 1) = cd.energy_efficiency;
      in.cycle_mask[static_cast<size_t>(i)] = 1;
    } catch (const Error& e) {
      throw Error(e.code(), "cycle " + std::to_string(i + 1) + " of " + record.battery_id + ": " +
                                e.what());
    }
  }
  return in;
}

Target build_target(const SohTrajectory& trajectory, i64 S, double tau, i64 T_max) {
  if (!trajectory.t_eol) throw Error("NothingToPredict", "trajectory has no EOL");
  const i64 t_eol = *trajectory.t_eol;
  if (t_eol <= S) throw Error("NothingToPredict", "EOL falls inside the observation window");
  Target t;
  t.tau = tau;
  t.y_norm = Tensor::zeros({T_max});
  t.mask = Tensor::zeros({T_max});
  const i64 last = std::min<i64>(t_eol, std::min<i64>(T_max, trajectory.cycles()));
  for (i64 j = S + 1; j <= last; ++j) {
    t.y_norm(j - 1) = normalize_soh(trajectory.at(j), tau);
    t.mask(j - 1) = 1.0;
  }
  return t;
}

}  // namespace bdtf
