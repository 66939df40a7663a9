#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "baseline.hpp"
#include "errors.hpp"
#include "room.hpp"
#include "signal.hpp"

using namespace relrange;

namespace {

Signal delayed_copy(const Signal& x, std::size_t delay) {
  Signal y;
  y.sample_rate = x.sample_rate;
  y.samples.assign(x.size(), 0.0);
  for (std::size_t i = delay; i < x.size(); ++i)
    y.samples[i] = x.samples[i - delay];
  return y;
}

}  // namespace

TEST_CASE("gcc-phat recovers a pure integer delay") {
  const Signal x = white_noise(4800, 16000, 3);
  const Signal y = delayed_copy(x, 37);
  const auto delay = gcc_phat_delay(x, y, 0.01);
  REQUIRE(delay.has_value());
  CHECK(std::abs(*delay - 37.0 / 16000.0) < 0.25 / 16000.0);
}

TEST_CASE("gcc-phat zero delay") {
  const Signal x = white_noise(4800, 16000, 5);
  const auto delay = gcc_phat_delay(x, x, 0.01);
  REQUIRE(delay.has_value());
  CHECK(std::abs(*delay) < 0.25 / 16000.0);
}

TEST_CASE("gcc-phat survives 0 dB noise") {
  const Signal x = white_noise(4800, 16000, 7);
  const Signal y = mix_at_snr(delayed_copy(x, 37), 0.0, 11);
  const auto delay = gcc_phat_delay(x, y, 0.01);
  REQUIRE(delay.has_value());
  CHECK(std::abs(*delay - 37.0 / 16000.0) <= 1.0 / 16000.0);
}

TEST_CASE("gcc-phat delay is antisymmetric") {
  const Signal x = white_noise(4800, 16000, 13);
  const Signal y = delayed_copy(x, 21);
  const auto fwd = gcc_phat_delay(x, y, 0.01);
  const auto rev = gcc_phat_delay(y, x, 0.01);
  REQUIRE(fwd.has_value());
  REQUIRE(rev.has_value());
  CHECK(std::abs(*fwd + *rev) < 0.5 / 16000.0);
}

TEST_CASE("gcc-phat is invariant to input scaling") {
  const Signal x = white_noise(4800, 16000, 17);
  const Signal y = delayed_copy(x, 10);
  Signal x_scaled = x, y_scaled = y;
  for (auto& v : x_scaled.samples) v *= 12.5;
  for (auto& v : y_scaled.samples) v *= 0.004;
  const auto base = gcc_phat_delay(x, y, 0.01);
  const auto scaled = gcc_phat_delay(x_scaled, y_scaled, 0.01);
  REQUIRE(base.has_value());
  REQUIRE(scaled.has_value());
  CHECK(std::abs(*base - *scaled) < 1e-9);
}

TEST_CASE("silent frames are rejected, not fatal") {
  Signal silent;
  silent.sample_rate = 16000;
  silent.samples.assign(4800, 0.0);
  const Signal x = white_noise(4800, 16000, 19);
  CHECK(!gcc_phat_delay(x, silent, 0.01).has_value());
  CHECK(!gcc_phat_delay(silent, x, 0.01).has_value());
}

TEST_CASE("per-frame delays have zero variance on pure delay input") {
  const Signal x = white_noise(16000 * 3, 16000, 23);
  const Signal y = delayed_copy(x, 48);
  const TofEstimate est = tof_distance(x, y, 0.3, 343.0);
  REQUIRE(est.frames_used == 10);
  double mean = 0.0;
  for (double d : est.per_frame_delays_s) mean += d;
  mean /= static_cast<double>(est.per_frame_delays_s.size());
  for (double d : est.per_frame_delays_s)
    CHECK(std::abs(d - mean) < 0.3 / 16000.0);
  CHECK(est.distance_m == doctest::Approx(48.0 / 16000.0 * 343.0).epsilon(1e-2));
}

TEST_CASE("anechoic simulation ranges a 2 m pair within 5 cm") {
  RoomSpec room;
  room.lx = 6.0;
  room.ly = 4.0;
  room.lz = 3.0;
  room.t60 = 0.3;
  room.sample_rate = 16000;

  // Collinear geometry: source behind the near mic so the path difference
  // equals the inter-microphone distance.
  const Vec3 source{1.0, 2.0, 1.5};
  const Vec3 near_mic{1.05, 2.0, 1.5};
  const Vec3 far_mic{3.05, 2.0, 1.5};

  const ImpulseResponse rir_near = simulate_rir(room, source, near_mic, 0);
  const ImpulseResponse rir_far = simulate_rir(room, source, far_mic, 0);

  const Signal noise = white_noise(16000 * 2, 16000, 29);
  Signal x = convolve(noise, rir_near.taps, 16000);
  Signal y = convolve(noise, rir_far.taps, 16000);
  x.samples.resize(noise.size());
  y.samples.resize(noise.size());

  const TofEstimate est = tof_distance(x, y, 0.3, 343.0, room.diagonal() / 343.0);
  CHECK(std::abs(est.distance_m - 2.0) < 0.05);
}

TEST_CASE("tof_distance validates inputs and rejects all-silent signals") {
  Signal silent;
  silent.sample_rate = 16000;
  silent.samples.assign(16000, 0.0);
  CHECK_THROWS_AS(tof_distance(silent, silent, 0.3, 343.0), Error);

  const Signal x = white_noise(1000, 16000, 1);
  const Signal y = white_noise(900, 16000, 1);
  CHECK_THROWS_AS(tof_distance(x, y, 0.3, 343.0), Error);
  CHECK_THROWS_AS(tof_distance(x, x, -0.1, 343.0), Error);
}
