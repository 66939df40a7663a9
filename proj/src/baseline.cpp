#include "baseline.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "errors.hpp"
#include "fft.hpp"

namespace relrange {

std::optional<double> gcc_phat_delay(const Signal& frame_x, const Signal& frame_y,
                                     double max_delay_s) {
  require(frame_x.size() == frame_y.size(), ErrorCode::InvalidArgument,
          "gcc_phat_delay: frames must have equal length");
  require(frame_x.sample_rate == frame_y.sample_rate, ErrorCode::InvalidArgument,
          "gcc_phat_delay: sample rates must match");
  require(frame_x.size() >= 2, ErrorCode::InvalidArgument,
          "gcc_phat_delay: frame too short");
  require(max_delay_s > 0.0, ErrorCode::InvalidArgument,
          "gcc_phat_delay: max delay must be positive");

  if (signal_energy(frame_x) < kSilentFrameEnergy ||
      signal_energy(frame_y) < kSilentFrameEnergy)
    return std::nullopt;

  const std::size_t len = frame_x.size();
  const std::size_t n = next_pow2(2 * len);
  Fft& fft = pooled_fft(n);

  std::vector<double> pad(n, 0.0);
  std::vector<std::complex<double>> spec_x(fft.bins()), spec_y(fft.bins());
  std::copy(frame_x.samples.begin(), frame_x.samples.end(), pad.begin());
  fft.forward(pad.data(), spec_x.data());
  std::fill(pad.begin(), pad.end(), 0.0);
  std::copy(frame_y.samples.begin(), frame_y.samples.end(), pad.begin());
  fft.forward(pad.data(), spec_y.data());

  // Phase transform: whiten the cross spectrum to unit magnitude per bin.
  // conj(X) Y puts the correlation peak at +D when y lags x by D.
  for (std::size_t i = 0; i < spec_x.size(); ++i) {
    const std::complex<double> cross = std::conj(spec_x[i]) * spec_y[i];
    const double mag = std::max(std::abs(cross), 1e-12);
    spec_x[i] = cross / mag;
  }
  std::vector<double> corr(n);
  fft.inverse(spec_x.data(), corr.data());

  const double fs = frame_x.sample_rate;
  const auto max_lag = static_cast<std::ptrdiff_t>(
      std::min<double>(max_delay_s * fs, static_cast<double>(len - 1)));

  std::ptrdiff_t best_lag = 0;
  double best_val = -HUGE_VAL;
  for (std::ptrdiff_t lag = -max_lag; lag <= max_lag; ++lag) {
    const std::size_t idx = static_cast<std::size_t>((lag + static_cast<std::ptrdiff_t>(n)) %
                                                     static_cast<std::ptrdiff_t>(n));
    if (corr[idx] > best_val) {
      best_val = corr[idx];
      best_lag = lag;
    }
  }

  // Parabolic interpolation around the peak for the sub-sample offset.
  const auto at = [&](std::ptrdiff_t lag) {
    const std::size_t idx = static_cast<std::size_t>((lag + static_cast<std::ptrdiff_t>(n)) %
                                                     static_cast<std::ptrdiff_t>(n));
    return corr[idx];
  };
  const double y0 = at(best_lag - 1), y1 = at(best_lag), y2 = at(best_lag + 1);
  const double curvature = y0 - 2.0 * y1 + y2;
  double offset = 0.0;
  if (curvature < 0.0) offset = 0.5 * (y0 - y2) / curvature;
  offset = std::clamp(offset, -0.5, 0.5);

  return (static_cast<double>(best_lag) + offset) / fs;
}

TofEstimate tof_distance(const Signal& x, const Signal& y, double window_s,
                         double c, double max_delay_s) {
  require(x.size() == y.size(), ErrorCode::InvalidArgument,
          "tof_distance: signals must have equal length");
  require(x.sample_rate == y.sample_rate, ErrorCode::InvalidArgument,
          "tof_distance: sample rates must match");
  require(window_s > 0.0, ErrorCode::InvalidArgument,
          "tof_distance: window must be positive");
  require(c > 0.0, ErrorCode::InvalidArgument,
          "tof_distance: speed of sound must be positive");

  const std::size_t win_len =
      static_cast<std::size_t>(std::lround(window_s * x.sample_rate));
  require(win_len >= 2, ErrorCode::InvalidArgument, "tof_distance: window too short");
  const std::size_t n_frames = x.size() / win_len;
  require(n_frames >= 1, ErrorCode::InvalidArgument,
          "tof_distance: signal shorter than one window");

  if (max_delay_s <= 0.0)
    max_delay_s = static_cast<double>(win_len - 1) / x.sample_rate;

  TofEstimate est;
  est.frames_total = static_cast<int>(n_frames);
  double dist_sum = 0.0;
  for (std::size_t f = 0; f < n_frames; ++f) {
    Signal fx, fy;
    fx.sample_rate = x.sample_rate;
    fy.sample_rate = y.sample_rate;
    const auto begin = static_cast<std::ptrdiff_t>(f * win_len);
    fx.samples.assign(x.samples.begin() + begin,
                      x.samples.begin() + begin + static_cast<std::ptrdiff_t>(win_len));
    fy.samples.assign(y.samples.begin() + begin,
                      y.samples.begin() + begin + static_cast<std::ptrdiff_t>(win_len));
    const auto delay = gcc_phat_delay(fx, fy, max_delay_s);
    if (!delay) continue;
    est.per_frame_delays_s.push_back(*delay);
    dist_sum += *delay * c;
    ++est.frames_used;
  }
  require(est.frames_used > 0, ErrorCode::Numeric,
          "tof_distance: no usable frames (all silent)");
  est.distance_m = dist_sum / est.frames_used;
  return est;
}

}  // namespace relrange
