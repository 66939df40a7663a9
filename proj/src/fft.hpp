#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace relrange {

// Thin wrapper over FFTW's 1-d real transforms. Plans are created with
// FFTW_ESTIMATE so planning is deterministic; plan creation/destruction is
// serialized internally (FFTW requirement), execution is reentrant.
class Fft {
 public:
  explicit Fft(std::size_t n);
  ~Fft();

  Fft(const Fft&) = delete;
  Fft& operator=(const Fft&) = delete;

  std::size_t size() const { return n_; }
  std::size_t bins() const { return n_ / 2 + 1; }

  // real[n] -> complex[n/2+1]
  void forward(const double* in, std::complex<double>* out);
  // complex[n/2+1] -> real[n], includes the 1/n normalization
  void inverse(const std::complex<double>* in, double* out);

 private:
  std::size_t n_;
  double* real_buf_;
  void* complex_buf_;  // fftw_complex*
  void* plan_fwd_;     // fftw_plan
  void* plan_inv_;     // fftw_plan
};

// Per-thread pool keyed by size; avoids re-planning in per-frame loops.
Fft& pooled_fft(std::size_t n);

std::size_t next_pow2(std::size_t n);

// Full linear convolution via zero-padded FFT, output length |a| + |b| - 1.
std::vector<double> fft_convolve(const std::vector<double>& a,
                                 const std::vector<double>& b);

}  // namespace relrange
