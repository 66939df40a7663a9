#pragma once

#include <cstdint>
#include <vector>

namespace relrange {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;
};

double distance(const Vec3& a, const Vec3& b);

// Shoebox room with a target reverberation time. Uniform absorption on all
// six surfaces, derived from t60 via Sabine inversion.
struct RoomSpec {
  double lx = 0.0, ly = 0.0, lz = 0.0;  // meters
  double t60 = 0.0;                     // seconds
  int sample_rate = 16000;
  double speed_of_sound = 343.0;

  double volume() const { return lx * ly * lz; }
  double surface_area() const { return 2.0 * (lx * ly + lx * lz + ly * lz); }
  double diagonal() const;
  bool contains(const Vec3& p, double clearance = 0.0) const;
};

void validate_room(const RoomSpec& room);

// One experiment geometry: the smart-speaker microphone is fixed, its source
// sits 5 cm above it, the wearable microphone is placed elsewhere.
struct ScenePlacement {
  Vec3 source;
  Vec3 mic_close;
  Vec3 mic_far;

  double inter_device_distance() const { return distance(mic_close, mic_far); }
};

constexpr double kWallClearance = 0.1;     // meters, for microphone placement
constexpr double kSourceMicOffset = 0.05;  // meters, source above the near mic

struct ImpulseResponse {
  std::vector<double> taps;
  int sample_rate = 16000;

  std::size_t size() const { return taps.size(); }
};

// Sabine inversion: alpha = 0.1611 V / (S * T60), in (0, 0.9999]. Throws if
// the requested T60 would need alpha >= 1.
double sabine_absorption(const RoomSpec& room);

// Smallest reflection order whose shortest image path still exceeds
// c * 1.25 * T60, so the simulated tail covers the full decay range.
int default_max_order(const RoomSpec& room);

// Image source model with windowed-sinc fractional delays (81 taps, Hann).
// Each image of reflection count r contributes beta^r / (4 pi d) at delay
// d / c, beta = sqrt(1 - alpha). max_order < 0 picks default_max_order.
// IR length is at least 1.25 * T60 * sample_rate.
ImpulseResponse simulate_rir(const RoomSpec& room, const Vec3& src,
                             const Vec3& mic, int max_order = -1);

// Uniformly samples a wearable position (0.1 m wall clearance) whose
// distance to the speaker falls in [min_dist, max_dist], by rejection.
// The source is co-located 5 cm above the smart-speaker microphone.
ScenePlacement random_placement(const RoomSpec& room, const Vec3& speaker_pos,
                                std::uint64_t seed, double min_dist,
                                double max_dist);

}  // namespace relrange
