#include "wav.hpp"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <vector>

#include "errors.hpp"

namespace relrange {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatIeeeFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

struct FmtChunk {
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits_per_sample = 0;
};

template <typename T>
T read_le(const unsigned char* p) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(p[i]) << (8 * i);
  return v;
}

template <typename T>
void append_le(std::vector<unsigned char>& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i)
    out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
}

}  // namespace

Signal read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::Io, "cannot open WAV file: " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  require(bytes.size() >= 12, ErrorCode::Io, "WAV file too short: " + path);
  require(std::memcmp(bytes.data(), "RIFF", 4) == 0 &&
              std::memcmp(bytes.data() + 8, "WAVE", 4) == 0,
          ErrorCode::Io, "not a RIFF/WAVE file: " + path);

  FmtChunk fmt;
  bool have_fmt = false;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const char* id = reinterpret_cast<const char*>(bytes.data() + pos);
    const std::uint32_t chunk_len = read_le<std::uint32_t>(bytes.data() + pos + 4);
    const std::size_t body = pos + 8;
    require(body + chunk_len <= bytes.size(), ErrorCode::Io,
            "truncated chunk in WAV file: " + path);
    if (std::memcmp(id, "fmt ", 4) == 0) {
      require(chunk_len >= 16, ErrorCode::Io, "malformed fmt chunk: " + path);
      fmt.format = read_le<std::uint16_t>(bytes.data() + body);
      fmt.channels = read_le<std::uint16_t>(bytes.data() + body + 2);
      fmt.sample_rate = read_le<std::uint32_t>(bytes.data() + body + 4);
      fmt.bits_per_sample = read_le<std::uint16_t>(bytes.data() + body + 14);
      if (fmt.format == kFormatExtensible && chunk_len >= 40) {
        // Sub-format GUID starts with the effective format code.
        fmt.format = read_le<std::uint16_t>(bytes.data() + body + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      data = bytes.data() + body;
      data_len = chunk_len;
      break;
    }
    pos = body + chunk_len + (chunk_len & 1);  // chunks are word-aligned
  }

  require(have_fmt, ErrorCode::Io, "WAV file has no fmt chunk: " + path);
  require(data != nullptr, ErrorCode::Io, "WAV file has no data chunk: " + path);
  require(fmt.channels >= 1, ErrorCode::Io, "WAV file has zero channels: " + path);
  require(fmt.sample_rate > 0, ErrorCode::Io, "WAV file has zero sample rate: " + path);

  const bool pcm16 = fmt.format == kFormatPcm && fmt.bits_per_sample == 16;
  const bool float32 = fmt.format == kFormatIeeeFloat && fmt.bits_per_sample == 32;
  require(pcm16 || float32, ErrorCode::Unsupported,
          "unsupported WAV encoding (format " + std::to_string(fmt.format) +
              ", " + std::to_string(fmt.bits_per_sample) + " bit) in " + path);

  if (fmt.channels > 1)
    std::fprintf(stderr, "warning: %s has %u channels, using the first\n",
                 path.c_str(), fmt.channels);

  const std::size_t bytes_per_sample = fmt.bits_per_sample / 8;
  const std::size_t stride = bytes_per_sample * fmt.channels;
  const std::size_t n_frames = stride == 0 ? 0 : data_len / stride;

  Signal out;
  out.sample_rate = static_cast<int>(fmt.sample_rate);
  out.samples.resize(n_frames);
  for (std::size_t i = 0; i < n_frames; ++i) {
    const unsigned char* p = data + i * stride;
    if (pcm16) {
      const auto raw = static_cast<std::int16_t>(read_le<std::uint16_t>(p));
      out.samples[i] = static_cast<double>(raw) / 32768.0;
    } else {
      const std::uint32_t raw = read_le<std::uint32_t>(p);
      float f;
      std::memcpy(&f, &raw, sizeof(f));
      out.samples[i] = static_cast<double>(f);
    }
  }
  return out;
}

void write_wav(const std::string& path, const Signal& signal) {
  require(signal.sample_rate > 0, ErrorCode::InvalidArgument,
          "write_wav: sample rate must be positive");
  const std::uint32_t n = static_cast<std::uint32_t>(signal.samples.size());
  const std::uint32_t data_len = n * 4;

  std::vector<unsigned char> out;
  out.reserve(58 + data_len);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  append_le<std::uint32_t>(out, 4 + 24 + 8 + data_len);
  out.insert(out.end(), {'W', 'A', 'V', 'E'});
  out.insert(out.end(), {'f', 'm', 't', ' '});
  append_le<std::uint32_t>(out, 16);
  append_le<std::uint16_t>(out, kFormatIeeeFloat);
  append_le<std::uint16_t>(out, 1);  // mono
  append_le<std::uint32_t>(out, static_cast<std::uint32_t>(signal.sample_rate));
  append_le<std::uint32_t>(out, static_cast<std::uint32_t>(signal.sample_rate) * 4);
  append_le<std::uint16_t>(out, 4);   // block align
  append_le<std::uint16_t>(out, 32);  // bits per sample
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  append_le<std::uint32_t>(out, data_len);
  for (double v : signal.samples) {
    const float f = static_cast<float>(v);
    std::uint32_t raw;
    std::memcpy(&raw, &f, sizeof(raw));
    append_le<std::uint32_t>(out, raw);
  }

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  require(file.good(), ErrorCode::Io, "cannot open for writing: " + path);
  file.write(reinterpret_cast<const char*>(out.data()),
             static_cast<std::streamsize>(out.size()));
  require(file.good(), ErrorCode::Io, "write failed: " + path);
}

}  // namespace relrange
