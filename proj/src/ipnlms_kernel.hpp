#pragma once

#include <cstddef>

namespace relrange::detail {

// Streams samples [n_begin, n_end) of the IPNLMS recursion.
//
//   e(n)   = y(n) - h^T x(n)
//   k_l    = (1-alpha)/(2L) + (1+alpha) |h_l| / (2 ||h||_1 + epsilon)
//   h     += mu(n) e(n) k .* x(n) / (x^T (k .* x) + delta)
//
// x_padded carries L-1 leading zeros so the tap window for sample n is the
// contiguous ascending slice x_padded[n .. n+L-1]; h is stored reversed to
// match (h_rev[i] multiplies x(n - L + 1 + i)). l1_norm must hold
// ||h||_1 on entry and is updated on exit, which lets successive calls
// share one running value. err_out receives e(n) for the processed range.
//
// This translation unit is compiled with floating-point reassociation
// enabled so the three reductions vectorize; keep any NaN/Inf handling in
// the callers.
template <typename T>
void ipnlms_span(const T* x_padded, const T* y, std::size_t n_begin,
                 std::size_t n_end, std::size_t L, T alpha, T delta, T epsilon,
                 const T* mu, T* h_rev, T& l1_norm, T* err_out);

extern template void ipnlms_span<float>(const float*, const float*, std::size_t,
                                        std::size_t, std::size_t, float, float,
                                        float, const float*, float*, float&,
                                        float*);
extern template void ipnlms_span<double>(const double*, const double*,
                                         std::size_t, std::size_t, std::size_t,
                                         double, double, double, const double*,
                                         double*, double&, double*);

}  // namespace relrange::detail
