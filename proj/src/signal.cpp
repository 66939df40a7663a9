#include "signal.hpp"

#include <algorithm>
#include <cmath>

#include "errors.hpp"
#include "fft.hpp"
#include "rng.hpp"

namespace relrange {

double signal_energy(const Signal& s) {
  double e = 0.0;
  for (double v : s.samples) e += v * v;
  return e;
}

Signal white_noise(std::size_t n_samples, int sample_rate, std::uint64_t seed) {
  require(n_samples > 0, ErrorCode::InvalidArgument,
          "white_noise: sample count must be positive");
  require(sample_rate > 0, ErrorCode::InvalidArgument,
          "white_noise: sample rate must be positive");
  Signal out;
  out.sample_rate = sample_rate;
  out.samples.resize(n_samples);
  auto rng = make_engine(seed);
  Gaussian gauss;
  for (auto& v : out.samples) v = gauss(rng);
  return out;
}

namespace {

std::vector<double> direct_convolve(const std::vector<double>& x,
                                    const std::vector<double>& h) {
  std::vector<double> y(x.size() + h.size() - 1, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    for (std::size_t j = 0; j < h.size(); ++j) y[i + j] += xi * h[j];
  }
  return y;
}

}  // namespace

Signal convolve(const Signal& x, const std::vector<double>& ir_taps,
                int ir_sample_rate) {
  require(!x.samples.empty(), ErrorCode::InvalidArgument,
          "convolve: empty input signal");
  require(!ir_taps.empty(), ErrorCode::InvalidArgument,
          "convolve: empty impulse response");
  require(x.sample_rate == ir_sample_rate, ErrorCode::InvalidArgument,
          "convolve: sample rate mismatch");
  Signal out;
  out.sample_rate = x.sample_rate;
  // Direct form wins only for short kernels.
  if (std::min(x.samples.size(), ir_taps.size()) <= 64) {
    out.samples = direct_convolve(x.samples, ir_taps);
  } else {
    out.samples = fft_convolve(x.samples, ir_taps);
  }
  return out;
}

Signal mix_at_snr(const Signal& clean, double snr_db, std::uint64_t seed) {
  const double p_clean = signal_energy(clean);
  require(p_clean > 0.0, ErrorCode::InvalidArgument,
          "mix_at_snr: input has zero energy");
  if (std::isinf(snr_db) && snr_db > 0) return clean;
  Signal noise = white_noise(clean.size(), clean.sample_rate, seed);
  const double p_noise = signal_energy(noise);
  // Scale so the realized buffers hit the requested ratio exactly.
  const double scale = std::sqrt(p_clean / (p_noise * std::pow(10.0, snr_db / 10.0)));
  Signal out = clean;
  for (std::size_t i = 0; i < out.samples.size(); ++i)
    out.samples[i] += scale * noise.samples[i];
  return out;
}

Signal energy_vad_concat(const Signal& speech, double frame_ms,
                         double threshold_db) {
  require(frame_ms > 0.0, ErrorCode::InvalidArgument,
          "energy_vad_concat: frame length must be positive");
  Signal out;
  out.sample_rate = speech.sample_rate;
  const std::size_t frame_len = static_cast<std::size_t>(
      std::lround(frame_ms * 1e-3 * speech.sample_rate));
  if (frame_len == 0 || speech.size() < frame_len) return out;

  const std::size_t n_frames = speech.size() / frame_len;
  std::vector<double> frame_energy(n_frames, 0.0);
  double peak = 0.0;
  for (std::size_t f = 0; f < n_frames; ++f) {
    double e = 0.0;
    for (std::size_t i = 0; i < frame_len; ++i) {
      const double v = speech.samples[f * frame_len + i];
      e += v * v;
    }
    frame_energy[f] = e;
    peak = std::max(peak, e);
  }
  if (peak <= 0.0) return out;

  // RMS threshold relative to the peak frame: 10^(db/10) on energies.
  const double keep_above = peak * std::pow(10.0, threshold_db / 10.0);
  for (std::size_t f = 0; f < n_frames; ++f) {
    if (frame_energy[f] > keep_above) {
      const auto begin = speech.samples.begin() + static_cast<std::ptrdiff_t>(f * frame_len);
      out.samples.insert(out.samples.end(), begin, begin + static_cast<std::ptrdiff_t>(frame_len));
    }
  }
  return out;
}

namespace {

// Two-pole resonator y(n) = x(n) + 2 r cos(w) y(n-1) - r^2 y(n-2).
struct Resonator {
  double b1 = 0.0, b2 = 0.0, y1 = 0.0, y2 = 0.0, gain = 1.0;

  void tune(double freq_hz, double bandwidth_hz, int fs) {
    const double r = std::exp(-M_PI * bandwidth_hz / fs);
    b1 = 2.0 * r * std::cos(2.0 * M_PI * freq_hz / fs);
    b2 = -r * r;
    gain = (1.0 - r) * std::sqrt(1.0 - 2.0 * r * std::cos(4.0 * M_PI * freq_hz / fs) + r * r);
  }

  double tick(double x) {
    const double y = gain * x + b1 * y1 + b2 * y2;
    y2 = y1;
    y1 = y;
    return y;
  }
};

}  // namespace

Signal speech_like(double duration_s, int sample_rate, std::uint64_t seed) {
  require(duration_s > 0.0, ErrorCode::InvalidArgument,
          "speech_like: duration must be positive");
  require(sample_rate > 0, ErrorCode::InvalidArgument,
          "speech_like: sample rate must be positive");
  const std::size_t total = static_cast<std::size_t>(std::lround(duration_s * sample_rate));
  Signal out;
  out.sample_rate = sample_rate;
  out.samples.assign(total, 0.0);

  auto rng = make_engine(seed);
  Gaussian gauss;
  std::size_t pos = 0;
  int syllables_since_pause = 0;

  while (pos < total) {
    const double roll = uniform01(rng);
    const bool force_pause = syllables_since_pause >= 2 + static_cast<int>(rng() % 4);
    if (force_pause || roll < 0.18) {
      // Inter-word pause.
      pos += static_cast<std::size_t>(uniform(rng, 0.10, 0.40) * sample_rate);
      syllables_since_pause = 0;
      continue;
    }
    ++syllables_since_pause;

    const std::size_t seg_len = static_cast<std::size_t>(
        uniform(rng, roll < 0.75 ? 0.10 : 0.05, roll < 0.75 ? 0.32 : 0.16) * sample_rate);
    const std::size_t end = std::min(total, pos + seg_len);
    const double amp = uniform(rng, 0.4, 1.0);

    if (roll < 0.75) {
      // Voiced syllable: glottal pulse train through three formants.
      double f0 = uniform(rng, 85.0, 235.0);
      const double f0_drift = uniform(rng, -0.25, 0.25) * f0 / std::max<std::size_t>(seg_len, 1);
      Resonator formants[3];
      formants[0].tune(uniform(rng, 300.0, 900.0), 90.0, sample_rate);
      formants[1].tune(uniform(rng, 950.0, 2200.0), 120.0, sample_rate);
      formants[2].tune(uniform(rng, 2300.0, 3400.0), 180.0, sample_rate);
      double phase = 1.0;
      for (std::size_t i = pos; i < end; ++i) {
        phase += f0 / sample_rate;
        f0 += f0_drift;
        double pulse = 0.0;
        if (phase >= 1.0) {
          phase -= 1.0;
          pulse = 1.0 + 0.1 * gauss(rng);  // glottal excitation with jitter
        }
        double v = 0.0;
        for (auto& res : formants) v += res.tick(pulse * 25.0);
        // Syllabic envelope: 20 ms attack, release over last quarter.
        const double into = static_cast<double>(i - pos);
        const double attack = std::min(1.0, into / (0.020 * sample_rate));
        const double left = static_cast<double>(end - i);
        const double release = std::min(1.0, left / (0.25 * static_cast<double>(end - pos)));
        out.samples[i] = amp * attack * release * v;
      }
    } else {
      // Unvoiced fricative: high-passed noise burst at lower level.
      double prev_in = 0.0, prev_out = 0.0;
      for (std::size_t i = pos; i < end; ++i) {
        const double n = gauss(rng);
        const double hp = 0.8 * (prev_out + n - prev_in);
        prev_in = n;
        prev_out = hp;
        const double into = static_cast<double>(i - pos);
        const double attack = std::min(1.0, into / (0.010 * sample_rate));
        out.samples[i] = 0.25 * amp * attack * hp;
      }
    }
    pos = end;
  }

  // Normalize to unit RMS over the active portion.
  const double energy = signal_energy(out);
  if (energy > 0.0) {
    const double rms = std::sqrt(energy / static_cast<double>(total));
    for (auto& v : out.samples) v /= rms * 3.0;  // ~ -9.5 dBFS headroom
  }
  return out;
}

}  // namespace relrange
