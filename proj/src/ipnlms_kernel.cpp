#include "ipnlms_kernel.hpp"

#include <cmath>

namespace relrange::detail {

template <typename T>
void ipnlms_span(const T* x_padded, const T* y, std::size_t n_begin,
                 std::size_t n_end, std::size_t L, T alpha, T delta, T epsilon,
                 const T* mu, T* h_rev, T& l1_norm, T* err_out) {
  const T c1 = (T(1) - alpha) / (T(2) * static_cast<T>(L));
  const T one_plus_alpha = T(1) + alpha;
  T l1 = l1_norm;

  for (std::size_t n = n_begin; n < n_end; ++n) {
    const T* xw = x_padded + n;
    const T c2 = one_plus_alpha / (T(2) * l1 + epsilon);

    T acc = T(0);
    T den = T(0);
    for (std::size_t l = 0; l < L; ++l) {
      const T hv = h_rev[l];
      const T xv = xw[l];
      acc += hv * xv;
      const T k = c1 + c2 * std::fabs(hv);
      den += k * xv * xv;
    }

    const T e = y[n] - acc;
    err_out[n - n_begin] = e;
    const T g = mu[n] * e / (den + delta);

    T l1_next = T(0);
    for (std::size_t l = 0; l < L; ++l) {
      T hv = h_rev[l];
      const T k = c1 + c2 * std::fabs(hv);
      hv += g * k * xw[l];
      h_rev[l] = hv;
      l1_next += std::fabs(hv);
    }
    l1 = l1_next;
  }
  l1_norm = l1;
}

template void ipnlms_span<float>(const float*, const float*, std::size_t,
                                 std::size_t, std::size_t, float, float, float,
                                 const float*, float*, float&, float*);
template void ipnlms_span<double>(const double*, const double*, std::size_t,
                                  std::size_t, std::size_t, double, double,
                                  double, const double*, double*, double&,
                                  double*);

}  // namespace relrange::detail
