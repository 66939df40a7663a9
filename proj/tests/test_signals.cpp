#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "errors.hpp"
#include "signal.hpp"
#include "support/oracles.hpp"
#include "wav.hpp"

using namespace relrange;

namespace {

Signal make_signal(std::vector<double> samples, int rate = 16000) {
  Signal s;
  s.samples = std::move(samples);
  s.sample_rate = rate;
  return s;
}

std::filesystem::path temp_file(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("white noise is zero-mean unit-variance") {
  const Signal noise = white_noise(16000, 16000, 7);
  REQUIRE(noise.size() == 16000);
  double mean = 0.0;
  for (double v : noise.samples) mean += v;
  mean /= 16000.0;
  double var = 0.0;
  for (double v : noise.samples) var += (v - mean) * (v - mean);
  var /= 16000.0;
  CHECK(std::abs(mean) < 0.05);
  CHECK(std::abs(var - 1.0) < 0.1);
}

TEST_CASE("white noise degenerate and error cases") {
  const Signal one = white_noise(1, 16000, 0);
  REQUIRE(one.size() == 1);
  CHECK(std::isfinite(one.samples[0]));
  CHECK_THROWS_AS(white_noise(0, 16000, 0), Error);
}

TEST_CASE("white noise is deterministic per seed") {
  const Signal a = white_noise(4096, 16000, 1234);
  const Signal b = white_noise(4096, 16000, 1234);
  const Signal c = white_noise(4096, 16000, 1235);
  CHECK(a.samples == b.samples);
  CHECK(a.samples != c.samples);
}

TEST_CASE("convolution with a unit impulse is the identity") {
  const Signal x = white_noise(200, 16000, 3);
  const Signal y = convolve(x, {1.0}, 16000);
  REQUIRE(y.size() == x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    CHECK(y.samples[i] == doctest::Approx(x.samples[i]).epsilon(1e-12));
}

TEST_CASE("unit impulse through an impulse response returns the response") {
  std::mt19937_64 rng(5);
  std::vector<double> ir(50);
  for (auto& v : ir) v = static_cast<double>(rng() % 1000) / 500.0 - 1.0;
  Signal delta = make_signal({1.0});
  const Signal y = convolve(delta, ir, 16000);
  REQUIRE(y.size() == ir.size());
  for (std::size_t i = 0; i < ir.size(); ++i)
    CHECK(y.samples[i] == doctest::Approx(ir[i]).epsilon(1e-12));
}

TEST_CASE("convolution matches the brute-force oracle") {
  const Signal x = white_noise(64, 16000, 11);
  const Signal irsrc = white_noise(16, 16000, 12);
  const Signal y = convolve(x, irsrc.samples, 16000);
  const auto expect = oracles::convolve_direct(x.samples, irsrc.samples);
  REQUIRE(y.size() == expect.size());
  for (std::size_t i = 0; i < expect.size(); ++i)
    CHECK(y.samples[i] == doctest::Approx(expect[i]).epsilon(1e-9));
}

TEST_CASE("convolution property: brute-force agreement for lengths <= 256") {
  std::mt19937_64 lens(99);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t nx = 1 + lens() % 256;
    const std::size_t nh = 1 + lens() % 256;
    const Signal x = white_noise(nx, 16000, 100 + static_cast<std::uint64_t>(trial));
    const Signal h = white_noise(nh, 16000, 200 + static_cast<std::uint64_t>(trial));
    const Signal y = convolve(x, h.samples, 16000);
    const auto expect = oracles::convolve_direct(x.samples, h.samples);
    REQUIRE(y.size() == expect.size());
    double max_abs = 0.0;
    for (double v : expect) max_abs = std::max(max_abs, std::abs(v));
    for (std::size_t i = 0; i < expect.size(); ++i)
      CHECK(std::abs(y.samples[i] - expect[i]) < 1e-9 * std::max(1.0, max_abs));
  }
}

TEST_CASE("convolution is linear") {
  const Signal x = white_noise(300, 16000, 21);
  const Signal z = white_noise(300, 16000, 22);
  const Signal h = white_noise(128, 16000, 23);
  Signal combo = make_signal(std::vector<double>(300));
  const double a = 1.7, b = -0.4;
  for (std::size_t i = 0; i < 300; ++i)
    combo.samples[i] = a * x.samples[i] + b * z.samples[i];
  const Signal lhs = convolve(combo, h.samples, 16000);
  const Signal yx = convolve(x, h.samples, 16000);
  const Signal yz = convolve(z, h.samples, 16000);
  for (std::size_t i = 0; i < lhs.size(); ++i)
    CHECK(lhs.samples[i] ==
          doctest::Approx(a * yx.samples[i] + b * yz.samples[i]).epsilon(1e-9));
}

TEST_CASE("convolution rejects mismatched sample rates") {
  const Signal x = white_noise(64, 16000, 1);
  CHECK_THROWS_AS(convolve(x, {1.0, 0.5}, 8000), Error);
}

TEST_CASE("mix_at_snr hits the requested ratio exactly") {
  const Signal x = white_noise(8000, 16000, 42);
  for (double target : {30.0, 0.0, 12.5}) {
    const Signal noisy = mix_at_snr(x, target, 77);
    double p_noise = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double n = noisy.samples[i] - x.samples[i];
      p_noise += n * n;
    }
    const double realized = 10.0 * std::log10(signal_energy(x) / p_noise);
    CHECK(std::abs(realized - target) < 0.01);
  }
}

TEST_CASE("mix_at_snr edge cases") {
  const Signal x = white_noise(1000, 16000, 5);
  const Signal clean = mix_at_snr(x, std::numeric_limits<double>::infinity(), 9);
  CHECK(clean.samples == x.samples);
  const Signal silent = make_signal(std::vector<double>(100, 0.0));
  CHECK_THROWS_AS(mix_at_snr(silent, 30.0, 1), Error);
}

TEST_CASE("energy VAD drops silence and keeps tone") {
  const int fs = 16000;
  SUBCASE("pure silence") {
    const Signal silence = make_signal(std::vector<double>(fs, 0.0), fs);
    CHECK(energy_vad_concat(silence, 30.0, -30.0).size() == 0);
  }
  SUBCASE("constant tone keeps whole frames") {
    std::vector<double> tone(fs + 123);
    for (std::size_t i = 0; i < tone.size(); ++i)
      tone[i] = std::sin(2.0 * M_PI * 440.0 * static_cast<double>(i) / fs);
    const Signal out = energy_vad_concat(make_signal(tone, fs), 30.0, -30.0);
    const std::size_t frame = 480;
    CHECK(out.size() == (tone.size() / frame) * frame);
  }
  SUBCASE("tone-silence-tone keeps two of three seconds") {
    // Frame-aligned construction: 1 s is not a whole number of 30 ms frames,
    // so build each segment from 33 full frames (0.99 s).
    const int seg = 33 * 480;
    std::vector<double> sig(3 * seg, 0.0);
    for (int i = 0; i < seg; ++i) {
      const double v = std::sin(2.0 * M_PI * 300.0 * i / fs);
      sig[static_cast<std::size_t>(i)] = v;
      sig[static_cast<std::size_t>(2 * seg + i)] = v;
    }
    const Signal out = energy_vad_concat(make_signal(sig, fs), 30.0, -30.0);
    const double expected = 2.0 * seg / fs;
    CHECK(std::abs(out.duration_s() - expected) <= 0.031);
  }
}

TEST_CASE("wav round trip is bit exact for float32 payload") {
  Signal x = white_noise(777, 16000, 31);
  // Quantize to float so the round trip can be compared exactly.
  for (auto& v : x.samples) v = static_cast<double>(static_cast<float>(v * 0.25));
  const auto path = temp_file("relrange_roundtrip.wav");
  write_wav(path.string(), x);
  const Signal y = read_wav(path.string());
  CHECK(y.sample_rate == 16000);
  REQUIRE(y.size() == x.size());
  CHECK(y.samples == x.samples);
  std::filesystem::remove(path);
}

namespace {

void write_pcm16_fixture(const std::filesystem::path& path,
                         const std::vector<std::int16_t>& samples, int channels) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  auto u32 = [&](std::uint32_t v) { out.write(reinterpret_cast<char*>(&v), 4); };
  auto u16 = [&](std::uint16_t v) { out.write(reinterpret_cast<char*>(&v), 2); };
  const std::uint32_t data_len =
      static_cast<std::uint32_t>(samples.size() * sizeof(std::int16_t));
  out.write("RIFF", 4);
  u32(36 + data_len);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  u32(16);
  u16(1);  // PCM
  u16(static_cast<std::uint16_t>(channels));
  u32(16000);
  u32(16000u * 2u * static_cast<std::uint32_t>(channels));
  u16(static_cast<std::uint16_t>(2 * channels));
  u16(16);
  out.write("data", 4);
  u32(data_len);
  out.write(reinterpret_cast<const char*>(samples.data()), data_len);
}

}  // namespace

TEST_CASE("wav reads 16-bit PCM with the 1/32768 convention") {
  const auto path = temp_file("relrange_pcm16.wav");
  write_pcm16_fixture(path, {32767, -32768, 0, 16384}, 1);
  const Signal s = read_wav(path.string());
  REQUIRE(s.size() == 4);
  CHECK(s.samples[0] == doctest::Approx(32767.0 / 32768.0).epsilon(1e-12));
  CHECK(s.samples[1] == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(s.samples[2] == 0.0);
  CHECK(s.samples[3] == doctest::Approx(0.5).epsilon(1e-12));
  std::filesystem::remove(path);
}

TEST_CASE("wav multichannel input collapses to the first channel") {
  const auto path = temp_file("relrange_stereo.wav");
  write_pcm16_fixture(path, {100, -100, 200, -200, 300, -300}, 2);
  const Signal s = read_wav(path.string());
  REQUIRE(s.size() == 3);
  CHECK(s.samples[0] == doctest::Approx(100.0 / 32768.0));
  CHECK(s.samples[1] == doctest::Approx(200.0 / 32768.0));
  CHECK(s.samples[2] == doctest::Approx(300.0 / 32768.0));
  std::filesystem::remove(path);
}

TEST_CASE("wav zero-length data yields an empty signal") {
  const auto path = temp_file("relrange_empty.wav");
  Signal empty;
  empty.sample_rate = 16000;
  write_wav(path.string(), empty);
  const Signal s = read_wav(path.string());
  CHECK(s.size() == 0);
  CHECK(s.sample_rate == 16000);
  std::filesystem::remove(path);
}

TEST_CASE("wav rejects malformed and unsupported files") {
  const auto path = temp_file("relrange_bad.wav");
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << "this is not a wav file at all";
  }
  CHECK_THROWS_AS(read_wav(path.string()), Error);
  CHECK_THROWS_AS(read_wav("/nonexistent/path/file.wav"), Error);
  std::filesystem::remove(path);
}

TEST_CASE("speech-like signal has speech structure") {
  const Signal utt = speech_like(8.0, 16000, 99);
  REQUIRE(utt.size() == 8 * 16000);
  const Signal again = speech_like(8.0, 16000, 99);
  CHECK(utt.samples == again.samples);
  for (double v : utt.samples) REQUIRE(std::isfinite(v));
  CHECK(signal_energy(utt) > 0.0);

  // Pauses exist: the VAD must drop a noticeable part but keep most.
  const Signal active = energy_vad_concat(utt, 30.0, -35.0);
  CHECK(active.duration_s() > 3.0);
  CHECK(active.duration_s() < 7.9);
}
