#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "room.hpp"
#include "signal.hpp"

namespace relrange {

constexpr double kDefaultDelta = 0.01;
constexpr double kDefaultEpsilon = 1e-6;

// Streaming IPNLMS filter state. The proportionate gain matrix K is never
// materialized; k_l weights are formed elementwise per step.
struct AdaptiveFilterState {
  std::vector<double> taps;      // current estimate, natural tap order
  std::vector<double> x_buffer;  // most recent input first
  double alpha = 0.0;            // proportionality control in [-1, 1]
  double delta = kDefaultDelta;
  double epsilon = kDefaultEpsilon;

  std::size_t length() const { return taps.size(); }
};

AdaptiveFilterState ipnlms_init(std::size_t L, double alpha,
                                double delta = kDefaultDelta,
                                double epsilon = kDefaultEpsilon);

// One adaptation step; returns the a-priori error e(n).
double ipnlms_step(AdaptiveFilterState& state, double x_n, double y_n, double mu);

// Piecewise-constant step size; the final segment extends to stream end.
struct StepSegment {
  double duration_s = 0.0;
  double mu = 0.1;
};

struct StepSchedule {
  std::vector<StepSegment> segments;
};

void validate_schedule(const StepSchedule& schedule);

// Per-block error power (dB) and, when ground truth was supplied, NPM (dB).
struct ConvergenceTrace {
  std::vector<double> error_power_db;
  std::vector<double> npm_db;  // empty without ground truth
  std::size_t block_size = 1600;
  int sample_rate = kDefaultSampleRate;
};

// CSV columns: block_index,time_s,error_db,npm_db.
void write_trace_csv(const ConvergenceTrace& trace, const std::string& path);

struct IpnlmsOptions {
  std::size_t filter_length = 0;
  double alpha = 0.0;
  StepSchedule schedule;
  std::size_t trace_block = 1600;
  double delta = kDefaultDelta;
  double epsilon = kDefaultEpsilon;
  bool use_float32 = false;                 // fast path for batch generation
  const ImpulseResponse* truth = nullptr;   // enables the NPM trace
};

// Streams x/y through the IPNLMS recursion with the scheduled step size.
// Deterministic; the result matches repeated ipnlms_step applications.
std::pair<ImpulseResponse, ConvergenceTrace> ipnlms_run(const Signal& x,
                                                        const Signal& y,
                                                        const IpnlmsOptions& opts);

// Ground-truth relative impulse response by regularized spectral division
// of the two room responses. If the far response peaks earlier than the
// close one the quotient is non-causal and a declared modeling delay is
// prepended; modeling_delay reports it.
struct RelativeRir {
  ImpulseResponse ir;
  int modeling_delay = 0;
};

RelativeRir ground_truth_relative_rir(const ImpulseResponse& rir_close,
                                      const ImpulseResponse& rir_far,
                                      std::size_t out_len);

// Normalized projection misalignment in dB, scale-invariant in h_est.
// Perfect alignment floors at -300 dB; a zero estimate scores 0 dB.
double npm(const ImpulseResponse& h_true, const ImpulseResponse& h_est);

constexpr double kNpmFloorDb = -300.0;

}  // namespace relrange
