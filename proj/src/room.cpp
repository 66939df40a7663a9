#include "room.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <mutex>

#include "errors.hpp"
#include "rng.hpp"

namespace relrange {

double distance(const Vec3& a, const Vec3& b) {
  const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

double RoomSpec::diagonal() const { return std::sqrt(lx * lx + ly * ly + lz * lz); }

bool RoomSpec::contains(const Vec3& p, double clearance) const {
  return p.x >= clearance && p.x <= lx - clearance && p.y >= clearance &&
         p.y <= ly - clearance && p.z >= clearance && p.z <= lz - clearance;
}

void validate_room(const RoomSpec& room) {
  require(room.lx > 0 && room.ly > 0 && room.lz > 0, ErrorCode::InvalidArgument,
          "room dimensions must be positive");
  require(room.t60 > 0, ErrorCode::InvalidArgument, "room T60 must be positive");
  require(room.sample_rate > 0, ErrorCode::InvalidArgument,
          "room sample rate must be positive");
  require(room.speed_of_sound > 0, ErrorCode::InvalidArgument,
          "speed of sound must be positive");
}

double sabine_absorption(const RoomSpec& room) {
  validate_room(room);
  const double alpha = 0.1611 * room.volume() / (room.surface_area() * room.t60);
  require(alpha < 1.0, ErrorCode::InvalidArgument,
          "room cannot achieve requested T60 (Sabine absorption >= 1)");
  return std::min(alpha, 0.9999);
}

int default_max_order(const RoomSpec& room) {
  const double reach = room.speed_of_sound * 1.25 * room.t60;
  const double min_dim = std::min({room.lx, room.ly, room.lz});
  return static_cast<int>(std::ceil(reach / min_dim)) + 1;
}

namespace {

constexpr int kSincHalf = 40;                         // 81-tap kernel
constexpr int kSincTaps = 2 * kSincHalf + 1;
constexpr int kFracSteps = 2048;

double hann_sinc(double t) {
  if (std::abs(t) > kSincHalf + 0.5) return 0.0;
  const double w = 0.5 * (1.0 + std::cos(2.0 * M_PI * t / kSincTaps));
  if (t == 0.0) return w;
  return w * std::sin(M_PI * t) / (M_PI * t);
}

// Fractional-delay kernels tabulated over [0, 1); row f holds the kernel
// for a delay of (integer + f/kFracSteps) samples.
const std::vector<double>& frac_delay_table() {
  static std::vector<double> table;
  static std::once_flag once;
  std::call_once(once, [] {
    table.resize(static_cast<std::size_t>(kFracSteps) * kSincTaps);
    for (int f = 0; f < kFracSteps; ++f) {
      const double frac = static_cast<double>(f) / kFracSteps;
      for (int n = 0; n < kSincTaps; ++n)
        table[static_cast<std::size_t>(f) * kSincTaps + n] =
            hann_sinc(static_cast<double>(n - kSincHalf) - frac);
    }
  });
  return table;
}

}  // namespace

ImpulseResponse simulate_rir(const RoomSpec& room, const Vec3& src,
                             const Vec3& mic, int max_order) {
  validate_room(room);
  require(room.contains(src), ErrorCode::InvalidArgument,
          "source position outside room");
  require(room.contains(mic), ErrorCode::InvalidArgument,
          "microphone position outside room");

  const double alpha = sabine_absorption(room);
  const double beta = std::sqrt(1.0 - alpha);
  const double fs = room.sample_rate;
  const double c = room.speed_of_sound;
  if (max_order < 0) max_order = default_max_order(room);

  const double direct_delay = distance(src, mic) / c * fs;
  const std::size_t n_samples = std::max<std::size_t>(
      static_cast<std::size_t>(std::ceil(1.25 * room.t60 * fs)),
      static_cast<std::size_t>(direct_delay) + kSincTaps + 1);

  ImpulseResponse ir;
  ir.sample_rate = room.sample_rate;
  ir.taps.assign(n_samples, 0.0);

  // Reflection coefficients by power; the reflection count is bounded by the
  // lattice extent below.
  const double max_dist = (static_cast<double>(n_samples) + kSincHalf) / fs * c;
  const int n1 = static_cast<int>(std::ceil(max_dist / (2.0 * room.lx))) + 1;
  const int n2 = static_cast<int>(std::ceil(max_dist / (2.0 * room.ly))) + 1;
  const int n3 = static_cast<int>(std::ceil(max_dist / (2.0 * room.lz))) + 1;
  std::vector<double> beta_pow(static_cast<std::size_t>(2 * (n1 + n2 + n3) + 8), 1.0);
  for (std::size_t r = 1; r < beta_pow.size(); ++r) beta_pow[r] = beta_pow[r - 1] * beta;

  const std::vector<double>& table = frac_delay_table();
  double* taps = ir.taps.data();
  const double inv_4pi = 1.0 / (4.0 * M_PI);
  const double sample_per_meter = fs / c;

  for (int mx = -n1; mx <= n1; ++mx) {
    for (int q = 0; q <= 1; ++q) {
      const double img_x = (1 - 2 * q) * src.x + 2.0 * mx * room.lx - mic.x;
      const int rx = std::abs(mx - q) + std::abs(mx);
      if (rx > max_order) continue;
      for (int my = -n2; my <= n2; ++my) {
        for (int j = 0; j <= 1; ++j) {
          const double img_y = (1 - 2 * j) * src.y + 2.0 * my * room.ly - mic.y;
          const int rxy = rx + std::abs(my - j) + std::abs(my);
          if (rxy > max_order) continue;
          const double xy2 = img_x * img_x + img_y * img_y;
          for (int mz = -n3; mz <= n3; ++mz) {
            for (int k = 0; k <= 1; ++k) {
              const int r = rxy + std::abs(mz - k) + std::abs(mz);
              if (r > max_order) continue;
              const double img_z = (1 - 2 * k) * src.z + 2.0 * mz * room.lz - mic.z;
              const double d = std::sqrt(xy2 + img_z * img_z);
              const double delay = d * sample_per_meter;
              const int first = static_cast<int>(std::floor(delay)) - kSincHalf;
              if (first >= static_cast<int>(n_samples)) continue;
              // Guard against source/mic coincidence blowing up 1/d.
              const double amp = beta_pow[static_cast<std::size_t>(r)] * inv_4pi /
                                 std::max(d, 0.01);
              const double frac = delay - std::floor(delay);
              const int row = std::min(kFracSteps - 1,
                                       static_cast<int>(frac * kFracSteps + 0.5)) %
                              kFracSteps;
              const double* kernel = &table[static_cast<std::size_t>(row) * kSincTaps];
              const int lo = std::max(0, -first);
              const int hi = std::min(kSincTaps, static_cast<int>(n_samples) - first);
              for (int n = lo; n < hi; ++n) taps[first + n] += amp * kernel[n];
            }
          }
        }
      }
    }
  }
  return ir;
}

ScenePlacement random_placement(const RoomSpec& room, const Vec3& speaker_pos,
                                std::uint64_t seed, double min_dist,
                                double max_dist) {
  validate_room(room);
  require(room.contains(speaker_pos, kWallClearance), ErrorCode::InvalidArgument,
          "speaker position violates wall clearance");
  require(min_dist >= 0 && max_dist >= min_dist, ErrorCode::InvalidArgument,
          "invalid distance bounds");
  const Vec3 source{speaker_pos.x, speaker_pos.y, speaker_pos.z + kSourceMicOffset};
  require(room.contains(source, kWallClearance - kSourceMicOffset),
          ErrorCode::InvalidArgument, "source offset leaves the room");

  auto rng = make_engine(seed);
  constexpr int kMaxRejections = 100000;
  for (int attempt = 0; attempt < kMaxRejections; ++attempt) {
    Vec3 p{uniform(rng, kWallClearance, room.lx - kWallClearance),
           uniform(rng, kWallClearance, room.ly - kWallClearance),
           uniform(rng, kWallClearance, room.lz - kWallClearance)};
    const double d = distance(speaker_pos, p);
    if (d >= min_dist && d <= max_dist)
      return ScenePlacement{source, speaker_pos, p};
  }
  fail(ErrorCode::InvalidArgument,
       "random_placement: distance bounds infeasible for this room");
}

}  // namespace relrange
