#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "bdtf/config.hpp"
#include "bdtf/tensor.hpp"
#include "bdtf/types.hpp"

namespace bdtf {

// ---------------------------------------------------------------------------
// SOH computation
// ---------------------------------------------------------------------------

// Trapezoidal integral of |I(t)| over the span, seconds -> hours. Exact for piecewise-linear
// currents. Throws InvalidSpan for spans shorter than 2 samples.
double compute_cycle_capacity(const CycleRecord& cycle, const SampleSpan& span);

// Within-segment cumulative |I| integral (Ah), starting at 0 at span.first.
std::vector<double> cumulative_capacity(const CycleRecord& cycle, const SampleSpan& span);

// soh[i] = Cap_i / (cap0 * dod). cap0 comes from the record (first-cycle discharge capacity
// when cap0_from_first_cycle is set). Throws InvalidRecord when dod <= 0.
SohTrajectory compute_soh_series(const BatteryRecord& record);

// ---------------------------------------------------------------------------
// Cleaning and smoothing
// ---------------------------------------------------------------------------

enum class OnsetMethod { rpt, time_gap, percentile };

struct SmoothingParams {
  double spike_drop_threshold = 0.03;  // single-cycle relative SOH drop
  double spike_recovery_band = 0.01;   // "isolated" = next cycle back within this of pre-drop
  double filter_margin = 0.025;        // exclusion band above tau
  i64 extrap_window = 20;              // cycles in the EOL extrapolation fit
  OnsetMethod onset_method = OnsetMethod::percentile;
  double gamma_gap_s = 48.0 * 3600.0;  // inter-cycle gap threshold (time_gap method)
  // Fixed delta thresholds; when unset they are the 99th/1st training-split percentiles.
  std::optional<double> gamma_plus;
  std::optional<double> gamma_minus;
  double epsilon = 0.005;              // recovery tolerance in SOH
  i64 W = 5;                           // consecutive cycles required inside tolerance
  i64 M_anchor = 5;                    // anchor cycles on each side of a smoothed region
};

// Method-specific inputs for onset detection; only the fields the chosen method needs are read.
struct OnsetInputs {
  std::vector<i64> rpt_cycles;          // 1-based cycle indices of reference tests
  std::vector<double> cycle_start_s;    // per-cycle start timestamps
  std::vector<double> training_deltas;  // relative per-cycle SOH deltas from the training split
};

// Clips isolated single-cycle drops beyond the threshold to the previous value; sustained
// trends pass through untouched.
std::vector<double> clip_spikes(const std::vector<double>& soh, const SmoothingParams& params);

// Relative per-cycle deltas: delta[k] = (soh[k+1]-soh[k])/soh[k] for k = 0..n-2 (0-based
// storage; delta i describes cycle i+2 in 1-based cycle terms).
std::vector<double> soh_deltas(const std::vector<double>& soh);

// Nearest-rank percentile (ceil convention) of an unsorted sample; p in [0,100].
double percentile(std::vector<double> sample, double p);

// Returns 1-based onset cycle indices, ascending. Throws MissingThresholdSource when the
// percentile method is chosen without training deltas.
std::vector<i64> detect_artifact_onsets(const std::vector<double>& soh, const OnsetInputs& inputs,
                                        const SmoothingParams& params);

// Earliest 1-based k_e >= k_s such that |soh[j] - soh[k_s-1]| <= epsilon for all j in
// [k_e, k_e+W-1] (window truncated at the series end). Returns n+1 as the no-recovery sentinel.
i64 find_recovery_point(const std::vector<double>& soh, i64 onset, double epsilon, i64 W);

// Replaces values inside [k_s, k_e] (1-based, inclusive) with the monotone cubic interpolant
// through up to M_anchor normal cycles on each side. Values outside the region are
// bit-identical to the input. Throws CannotSmooth when no anchors exist on either side.
std::vector<double> smooth_region_pchip(const std::vector<double>& soh, i64 k_s, i64 k_e,
                                        i64 M_anchor);

// ---------------------------------------------------------------------------
// EOL
// ---------------------------------------------------------------------------

// Minimal 1-based j with soh[j] < tau. Throws NoEol when the series never crosses.
i64 compute_eol(const std::vector<double>& soh, double tau);

struct Excluded {
  std::string reason;
};

// Appendix-style filtering: batteries still above tau + margin are excluded; batteries in the
// band get a linear tail fit over the last extrap_window cycles, extended to the first cycle
// below tau. A non-degrading tail excludes the battery (reason "NonDegradingTail").
std::variant<Excluded, SohTrajectory> filter_and_extrapolate(const std::vector<double>& soh,
                                                             double tau,
                                                             const SmoothingParams& params);

// ---------------------------------------------------------------------------
// SOC and resampling
// ---------------------------------------------------------------------------

enum class SegmentDirection { charge, discharge };

// Linear SOC map from within-segment capacity; clamped to [0,1].
// Throws DegenerateSegment when the endpoint capacities coincide.
std::vector<double> compute_soc(const std::vector<double>& capacity, double q_start, double q_end,
                                double soc_start, double soc_end, SegmentDirection direction);

// Model input channel order.
enum Channel { kVoltage = 0, kCurrent = 1, kCapacity = 2, kSoc = 3 };

// Resamples one cycle onto the SOC grid: L/2 ascending charge points, L/2 descending
// discharge points, channels (V, C-rate, within-segment Ah, SOC), linear interpolation
// against SOC. Throws ResampleFailure when SOC is not strictly monotone within a segment.
Tensor resample_cycle(const CycleRecord& cycle, double soc_start, double soc_end,
                      double nominal_capacity_ah, i64 L);

struct CycleDescriptors {
  double coulombic_efficiency = 0.0;
  double energy_efficiency = 0.0;
};

// CE = discharge Ah / charge Ah; EE = discharge Wh / charge Wh (trapezoidal |V*I| when no
// energy meter series is present). Throws InvalidCycle on zero charge capacity.
CycleDescriptors compute_cycle_descriptors(const CycleRecord& cycle);

// ---------------------------------------------------------------------------
// Model inputs and targets
// ---------------------------------------------------------------------------

struct ModelInput {
  Tensor X;                        // [S_max x L x 4]
  Tensor X_f;                      // [S_max x 2] (CE, EE)
  std::vector<std::uint8_t> cycle_mask;  // length S_max
  std::string condition_key;
  i64 S = 0;
};

struct Target {
  Tensor y_norm;  // [T_max]
  Tensor mask;    // [T_max], binary
  double tau = 0.8;
};

ModelInput build_model_input(const BatteryRecord& record, i64 S, const ModelConfig& config);

// y_norm[j] = (soh[j]-tau)/(1-tau), mask=1 for S < j <= t_eol. Throws NothingToPredict when
// t_eol <= S.
Target build_target(const SohTrajectory& trajectory, i64 S, double tau, i64 T_max);

inline double normalize_soh(double soh, double tau) { return (soh - tau) / (1.0 - tau); }
inline double denormalize_soh(double y, double tau) { return y * (1.0 - tau) + tau; }

}  // namespace bdtf
