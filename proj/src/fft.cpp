#include "fft.hpp"

#include <fftw3.h>

#include <cstring>
#include <memory>
#include <mutex>
#include <unordered_map>

#include "errors.hpp"

namespace relrange {

namespace {
// FFTW plan creation/destruction is not thread safe.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

Fft::Fft(std::size_t n) : n_(n) {
  require(n >= 2 && (n & (n - 1)) == 0, ErrorCode::InvalidArgument,
          "FFT size must be a power of two >= 2");
  std::lock_guard<std::mutex> lock(planner_mutex());
  real_buf_ = fftw_alloc_real(n_);
  fftw_complex* cbuf = fftw_alloc_complex(n_ / 2 + 1);
  complex_buf_ = cbuf;
  plan_fwd_ = fftw_plan_dft_r2c_1d(static_cast<int>(n_), real_buf_, cbuf, FFTW_ESTIMATE);
  plan_inv_ = fftw_plan_dft_c2r_1d(static_cast<int>(n_), cbuf, real_buf_, FFTW_ESTIMATE);
  require(plan_fwd_ != nullptr && plan_inv_ != nullptr, ErrorCode::Internal,
          "FFTW plan creation failed");
}

Fft::~Fft() {
  std::lock_guard<std::mutex> lock(planner_mutex());
  fftw_destroy_plan(static_cast<fftw_plan>(plan_fwd_));
  fftw_destroy_plan(static_cast<fftw_plan>(plan_inv_));
  fftw_free(real_buf_);
  fftw_free(complex_buf_);
}

void Fft::forward(const double* in, std::complex<double>* out) {
  std::memcpy(real_buf_, in, n_ * sizeof(double));
  fftw_execute(static_cast<fftw_plan>(plan_fwd_));
  std::memcpy(out, complex_buf_, bins() * sizeof(std::complex<double>));
}

void Fft::inverse(const std::complex<double>* in, double* out) {
  std::memcpy(complex_buf_, in, bins() * sizeof(std::complex<double>));
  fftw_execute(static_cast<fftw_plan>(plan_inv_));
  const double scale = 1.0 / static_cast<double>(n_);
  for (std::size_t i = 0; i < n_; ++i) out[i] = real_buf_[i] * scale;
}

Fft& pooled_fft(std::size_t n) {
  thread_local std::unordered_map<std::size_t, std::unique_ptr<Fft>> pool;
  auto it = pool.find(n);
  if (it == pool.end()) it = pool.emplace(n, std::make_unique<Fft>(n)).first;
  return *it->second;
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

std::vector<double> fft_convolve(const std::vector<double>& a,
                                 const std::vector<double>& b) {
  require(!a.empty() && !b.empty(), ErrorCode::InvalidArgument,
          "convolution inputs must be non-empty");
  const std::size_t out_len = a.size() + b.size() - 1;
  const std::size_t n = next_pow2(std::max<std::size_t>(out_len, 2));
  Fft& fft = pooled_fft(n);

  std::vector<double> pad(n, 0.0);
  std::vector<std::complex<double>> fa(fft.bins()), fb(fft.bins());
  std::copy(a.begin(), a.end(), pad.begin());
  fft.forward(pad.data(), fa.data());
  std::fill(pad.begin(), pad.end(), 0.0);
  std::copy(b.begin(), b.end(), pad.begin());
  fft.forward(pad.data(), fb.data());

  for (std::size_t i = 0; i < fa.size(); ++i) fa[i] *= fb[i];
  std::vector<double> full(n);
  fft.inverse(fa.data(), full.data());
  full.resize(out_len);
  return full;
}

}  // namespace relrange
