#pragma once

#include <cstdint>
#include <vector>

namespace relrange {

// Mono sample buffer. Amplitudes are dimensionless, nominally in [-1, 1];
// values must stay finite. Immutable by convention once built: every
// operation below returns a fresh Signal.
struct Signal {
  std::vector<double> samples;
  int sample_rate = 16000;

  std::size_t size() const { return samples.size(); }
  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

constexpr int kDefaultSampleRate = 16000;

double signal_energy(const Signal& s);

// Zero-mean unit-variance Gaussian noise, bit-identical per seed.
Signal white_noise(std::size_t n_samples, int sample_rate, std::uint64_t seed);

struct ImpulseResponseRef {
  const std::vector<double>& taps;
  int sample_rate;
};

// Full linear convolution, output length |x| + |ir| - 1. Short kernels run
// in the time domain, long ones through the FFT; both agree to ~1e-12.
Signal convolve(const Signal& x, const std::vector<double>& ir_taps,
                int ir_sample_rate);

// clean + Gaussian noise scaled so the realized power ratio matches snr_db
// exactly. +inf snr returns the input unchanged.
Signal mix_at_snr(const Signal& clean, double snr_db, std::uint64_t seed);

// Frame-energy voice activity detection: splits into non-overlapping frames
// of frame_ms, keeps frames whose RMS exceeds threshold_db relative to the
// loudest frame, concatenates the keepers in order. May return empty.
Signal energy_vad_concat(const Signal& speech, double frame_ms,
                         double threshold_db);

constexpr double kVadDefaultFrameMs = 30.0;
constexpr double kVadDefaultThresholdDb = -35.0;

// Synthetic speech-shaped excitation: glottal-pulse trains through formant
// resonators, fricative bursts and inter-word pauses. Used to build test
// corpora when no recorded speech is at hand.
Signal speech_like(double duration_s, int sample_rate, std::uint64_t seed);

}  // namespace relrange
