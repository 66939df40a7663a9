#pragma once

#include <optional>
#include <vector>

#include "signal.hpp"

namespace relrange {

constexpr double kTofWindowS = 0.300;
constexpr double kSilentFrameEnergy = 1e-10;

// GCC-PHAT delay between two equal-length frames: unit-magnitude cross
// spectrum, inverse transform, peak within +-max_delay_s, parabolic
// sub-sample interpolation. Positive delay means y lags x. Returns nullopt
// for silent frames (energy below kSilentFrameEnergy).
std::optional<double> gcc_phat_delay(const Signal& frame_x, const Signal& frame_y,
                                     double max_delay_s);

struct TofEstimate {
  double distance_m = 0.0;
  std::vector<double> per_frame_delays_s;  // accepted frames only
  int frames_used = 0;
  int frames_total = 0;
};

// Time-of-flight ranging: splits the recordings into non-overlapping
// windows, estimates the per-frame delay, converts to distance via the
// speed of sound and averages over accepted frames. max_delay_s <= 0 lets
// the window length bound the search.
TofEstimate tof_distance(const Signal& x, const Signal& y,
                         double window_s = kTofWindowS, double c = 343.0,
                         double max_delay_s = 0.0);

}  // namespace relrange
