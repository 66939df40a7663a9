#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "errors.hpp"
#include "features.hpp"
#include "room.hpp"

using namespace relrange;

namespace {

RoomSpec small_room() {
  RoomSpec r;
  r.lx = 5.0;
  r.ly = 3.5;
  r.lz = 2.5;
  r.t60 = 0.5;
  r.sample_rate = 16000;
  return r;
}

std::size_t peak_index(const ImpulseResponse& ir) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < ir.size(); ++i)
    if (std::abs(ir.taps[i]) > std::abs(ir.taps[best])) best = i;
  return best;
}

double total_energy(const ImpulseResponse& ir) {
  double e = 0.0;
  for (double v : ir.taps) e += v * v;
  return e;
}

}  // namespace

TEST_CASE("Sabine absorption matches hand evaluation for the small room") {
  // Independent evaluation: alpha = 0.1611 V / (S T60) with
  // V = 5 * 3.5 * 2.5 and S = 2 (5*3.5 + 5*2.5 + 3.5*2.5).
  const double volume = 5.0 * 3.5 * 2.5;
  const double surface = 2.0 * (5.0 * 3.5 + 5.0 * 2.5 + 3.5 * 2.5);
  const double expected = 0.1611 * volume / (surface * 0.5);
  CHECK(expected == doctest::Approx(0.181886).epsilon(1e-4));
  CHECK(sabine_absorption(small_room()) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("Sabine absorption limits") {
  RoomSpec relaxed = small_room();
  relaxed.t60 = 1e6;
  CHECK(sabine_absorption(relaxed) < 1e-5);

  RoomSpec impossible;
  impossible.lx = impossible.ly = impossible.lz = 1.0;
  impossible.t60 = 0.01;
  CHECK_THROWS_AS(sabine_absorption(impossible), Error);
}

TEST_CASE("order-0 simulation is a single direct-path pulse") {
  const RoomSpec room = small_room();
  const Vec3 src{1.0, 1.0, 1.0};
  const Vec3 mic{4.4, 1.0, 1.0};
  const ImpulseResponse ir = simulate_rir(room, src, mic, 0);

  CHECK(ir.size() >= static_cast<std::size_t>(1.25 * room.t60 * room.sample_rate));
  // Hand-computed delay: 3.4 m / 343 m/s * 16 kHz = 158.6 -> peak at 159.
  CHECK(peak_index(ir) == 159);

  // On-grid geometry pins the amplitude to 1 / (4 pi d) exactly.
  const double d_exact = 343.0 * 160.0 / 16000.0;  // 3.43 m, delay lands on a sample
  const Vec3 mic2{1.0 + d_exact, 1.0, 1.0};
  const ImpulseResponse ir2 = simulate_rir(room, src, mic2, 0);
  CHECK(peak_index(ir2) == 160);
  CHECK(ir2.taps[160] == doctest::Approx(1.0 / (4.0 * M_PI * d_exact)).epsilon(1e-6));
}

TEST_CASE("direct-path delay is reciprocal in source and microphone") {
  const RoomSpec room = small_room();
  const Vec3 a{0.7, 1.2, 0.9};
  const Vec3 b{4.1, 2.8, 1.7};
  CHECK(peak_index(simulate_rir(room, a, b, 0)) ==
        peak_index(simulate_rir(room, b, a, 0)));
}

TEST_CASE("direct-path energy follows the 1/d law") {
  const RoomSpec room = small_room();
  const Vec3 src{0.5, 1.75, 1.25};
  // On-grid delays (80 and 160 samples) so the interpolation kernel is a
  // discrete delta and the 1/(4 pi d) amplitude law shows up exactly.
  const double d1 = 343.0 * 80.0 / 16000.0;
  const double d2 = 2.0 * d1;
  const ImpulseResponse near = simulate_rir(room, src, Vec3{0.5 + d1, 1.75, 1.25}, 0);
  const ImpulseResponse far = simulate_rir(room, src, Vec3{0.5 + d2, 1.75, 1.25}, 0);
  CHECK(total_energy(near) / total_energy(far) == doctest::Approx(4.0).epsilon(1e-6));

  // Energy decreases monotonically with distance off-grid too.
  double prev = 1e9;
  for (double d : {1.0, 1.7, 2.6, 3.3}) {
    const double e = total_energy(simulate_rir(room, src, Vec3{0.5 + d, 1.75, 1.25}, 0));
    CHECK(e < prev);
    prev = e;
  }
}

TEST_CASE("total energy is non-decreasing in reflection order") {
  const RoomSpec room = small_room();
  const Vec3 src{1.0, 1.0, 1.0};
  const Vec3 mic{3.9, 2.4, 1.6};
  double prev = 0.0;
  for (int order : {0, 1, 2, 4, 8}) {
    const double e = total_energy(simulate_rir(room, src, mic, order));
    CHECK(e >= prev);
    prev = e;
  }
}

TEST_CASE("simulated decay tracks the target T60") {
  // Specular image sources with uniform absorption decay slower than the
  // diffuse-field Sabine prediction (direction-dependent reflection rates;
  // the axial image chains of the largest dimension dominate the late
  // field). The measured Schroeder T60 therefore lands well above the
  // target; 1.4x is typical for this room. Assert the realistic band.
  const RoomSpec room = small_room();
  const ImpulseResponse ir =
      simulate_rir(room, Vec3{1.0, 1.0, 1.0}, Vec3{3.4, 2.2, 1.4});
  const auto edc = energy_decay_curve(ir);
  const double t60 = t60_from_edc(edc, room.sample_rate);
  CHECK(t60 > 0.5 * 0.75);
  CHECK(t60 < 0.5 * 1.6);
}

TEST_CASE("simulation rejects positions outside the room") {
  const RoomSpec room = small_room();
  CHECK_THROWS_AS(simulate_rir(room, Vec3{-0.1, 1.0, 1.0}, Vec3{1, 1, 1}, 0), Error);
  CHECK_THROWS_AS(simulate_rir(room, Vec3{1, 1, 1}, Vec3{5.1, 1.0, 1.0}, 0), Error);
}

TEST_CASE("random placement respects bounds, clearance and determinism") {
  const RoomSpec room = small_room();
  const Vec3 speaker{0.5, 0.5, 1.0};

  const ScenePlacement p1 = random_placement(room, speaker, 42, 0.3, 5.0);
  const ScenePlacement p2 = random_placement(room, speaker, 42, 0.3, 5.0);
  CHECK(p1.mic_far.x == p2.mic_far.x);
  CHECK(p1.mic_far.y == p2.mic_far.y);
  CHECK(p1.mic_far.z == p2.mic_far.z);

  CHECK(p1.mic_close.x == speaker.x);
  CHECK(p1.source.z == doctest::Approx(speaker.z + 0.05));

  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const ScenePlacement p = random_placement(room, speaker, seed, 0.3, 5.0);
    const double d = p.inter_device_distance();
    REQUIRE(d >= 0.3);
    REQUIRE(d <= 5.0);
    REQUIRE(room.contains(p.mic_far, 0.1));
  }
}

TEST_CASE("random placement reports infeasible bounds") {
  const RoomSpec room = small_room();
  CHECK_THROWS_AS(random_placement(room, Vec3{0.5, 0.5, 1.0}, 1, 50.0, 50.0), Error);
}

TEST_CASE("default max order covers the decay range") {
  const RoomSpec room = small_room();
  // Longest path must exceed c * 1.25 * T60 = 214.4 m; min dimension 2.5 m.
  CHECK(default_max_order(room) >= 86);
}
