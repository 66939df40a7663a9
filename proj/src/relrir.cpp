#include "relrir.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>

#include "errors.hpp"
#include "fft.hpp"
#include "ipnlms_kernel.hpp"

namespace relrange {

AdaptiveFilterState ipnlms_init(std::size_t L, double alpha, double delta,
                                double epsilon) {
  require(L > 0, ErrorCode::InvalidArgument, "ipnlms: filter length must be positive");
  require(alpha >= -1.0 && alpha <= 1.0, ErrorCode::InvalidArgument,
          "ipnlms: alpha must lie in [-1, 1]");
  require(delta > 0.0, ErrorCode::InvalidArgument, "ipnlms: delta must be positive");
  require(epsilon > 0.0, ErrorCode::InvalidArgument, "ipnlms: epsilon must be positive");
  AdaptiveFilterState state;
  state.taps.assign(L, 0.0);
  state.x_buffer.assign(L, 0.0);
  state.alpha = alpha;
  state.delta = delta;
  state.epsilon = epsilon;
  return state;
}

double ipnlms_step(AdaptiveFilterState& state, double x_n, double y_n, double mu) {
  require(std::isfinite(x_n) && std::isfinite(y_n), ErrorCode::InvalidArgument,
          "ipnlms_step: non-finite input sample");
  const std::size_t L = state.length();
  auto& xb = state.x_buffer;
  std::memmove(xb.data() + 1, xb.data(), (L - 1) * sizeof(double));
  xb[0] = x_n;

  const auto& h = state.taps;
  double dot = 0.0, l1 = 0.0;
  for (std::size_t l = 0; l < L; ++l) {
    dot += h[l] * xb[l];
    l1 += std::abs(h[l]);
  }
  const double e = y_n - dot;

  const double c1 = (1.0 - state.alpha) / (2.0 * static_cast<double>(L));
  const double c2 = (1.0 + state.alpha) / (2.0 * l1 + state.epsilon);
  double denom = 0.0;
  for (std::size_t l = 0; l < L; ++l) {
    const double k = c1 + c2 * std::abs(h[l]);
    denom += k * xb[l] * xb[l];
  }
  const double g = mu * e / (denom + state.delta);
  for (std::size_t l = 0; l < L; ++l) {
    const double k = c1 + c2 * std::abs(state.taps[l]);
    state.taps[l] += g * k * xb[l];
  }
  return e;
}

void validate_schedule(const StepSchedule& schedule) {
  require(!schedule.segments.empty(), ErrorCode::InvalidArgument,
          "step schedule must have at least one segment");
  for (std::size_t i = 0; i < schedule.segments.size(); ++i) {
    const auto& seg = schedule.segments[i];
    require(seg.mu > 0.0 && seg.mu < 2.0, ErrorCode::InvalidArgument,
            "step sizes must lie in (0, 2)");
    if (i + 1 < schedule.segments.size())
      require(seg.duration_s > 0.0, ErrorCode::InvalidArgument,
              "schedule segment durations must be positive");
  }
}

void write_trace_csv(const ConvergenceTrace& trace, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  require(out.good(), ErrorCode::Io, "cannot open for writing: " + path);
  out << "block_index,time_s,error_db,npm_db\n";
  for (std::size_t b = 0; b < trace.error_power_db.size(); ++b) {
    const double t = static_cast<double>((b + 1) * trace.block_size) / trace.sample_rate;
    out << b << ',' << t << ',' << trace.error_power_db[b] << ',';
    if (b < trace.npm_db.size())
      out << trace.npm_db[b];
    else
      out << "nan";
    out << '\n';
  }
  require(out.good(), ErrorCode::Io, "write failed: " + path);
}

namespace {

double npm_raw(const std::vector<double>& t, const std::vector<double>& e) {
  double tt = 0.0, te = 0.0, ee = 0.0;
  const std::size_t n = std::max(t.size(), e.size());
  for (std::size_t i = 0; i < n; ++i) {
    const double tv = i < t.size() ? t[i] : 0.0;
    const double ev = i < e.size() ? e[i] : 0.0;
    tt += tv * tv;
    te += tv * ev;
    ee += ev * ev;
  }
  require(tt > 0.0, ErrorCode::InvalidArgument, "npm: zero ground-truth filter");
  if (ee <= 0.0) return 0.0;  // nothing to project onto
  const double coef = te / ee;
  double res = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double tv = i < t.size() ? t[i] : 0.0;
    const double ev = i < e.size() ? e[i] : 0.0;
    const double d = tv - coef * ev;
    res += d * d;
  }
  const double ratio = std::sqrt(res / tt);
  if (ratio <= 0.0) return kNpmFloorDb;
  return std::max(kNpmFloorDb, 20.0 * std::log10(ratio));
}

template <typename T>
void run_typed(const Signal& x, const Signal& y, const IpnlmsOptions& opts,
               const std::vector<double>& mu_per_sample,
               const std::vector<double>* truth_taps, ImpulseResponse& h_out,
               ConvergenceTrace& trace) {
  const std::size_t n = x.size();
  const std::size_t L = opts.filter_length;

  std::vector<T> x_padded(n + L - 1, T(0));
  for (std::size_t i = 0; i < n; ++i) x_padded[L - 1 + i] = static_cast<T>(x.samples[i]);
  std::vector<T> y_t(n);
  for (std::size_t i = 0; i < n; ++i) y_t[i] = static_cast<T>(y.samples[i]);
  std::vector<T> mu_t(n);
  for (std::size_t i = 0; i < n; ++i) mu_t[i] = static_cast<T>(mu_per_sample[i]);

  std::vector<T> h_rev(L, T(0));
  std::vector<T> err(opts.trace_block);
  T l1 = T(0);

  std::vector<double> h_natural(L);
  for (std::size_t begin = 0; begin < n; begin += opts.trace_block) {
    const std::size_t end = std::min(n, begin + opts.trace_block);
    detail::ipnlms_span<T>(x_padded.data(), y_t.data(), begin, end, L,
                           static_cast<T>(opts.alpha), static_cast<T>(opts.delta),
                           static_cast<T>(opts.epsilon), mu_t.data(), h_rev.data(),
                           l1, err.data());
    double power = 0.0;
    for (std::size_t i = 0; i < end - begin; ++i)
      power += static_cast<double>(err[i]) * static_cast<double>(err[i]);
    power /= static_cast<double>(end - begin);
    trace.error_power_db.push_back(10.0 * std::log10(std::max(power, 1e-30)));
    if (truth_taps != nullptr) {
      for (std::size_t l = 0; l < L; ++l)
        h_natural[l] = static_cast<double>(h_rev[L - 1 - l]);
      double save = npm_raw(*truth_taps, h_natural);
      trace.npm_db.push_back(save);
    }
  }
  for (std::size_t l = 0; l < L; ++l)
    h_out.taps[l] = static_cast<double>(h_rev[L - 1 - l]);
}

}  // namespace

std::pair<ImpulseResponse, ConvergenceTrace> ipnlms_run(const Signal& x,
                                                        const Signal& y,
                                                        const IpnlmsOptions& opts) {
  require(x.size() == y.size(), ErrorCode::InvalidArgument,
          "ipnlms_run: signals must have equal length");
  require(x.sample_rate == y.sample_rate, ErrorCode::InvalidArgument,
          "ipnlms_run: sample rates must match");
  require(x.size() > 0, ErrorCode::InvalidArgument, "ipnlms_run: empty input");
  require(opts.filter_length > 0, ErrorCode::InvalidArgument,
          "ipnlms_run: filter length must be positive");
  require(opts.alpha >= -1.0 && opts.alpha <= 1.0, ErrorCode::InvalidArgument,
          "ipnlms_run: alpha must lie in [-1, 1]");
  require(opts.trace_block > 0, ErrorCode::InvalidArgument,
          "ipnlms_run: trace block must be positive");
  validate_schedule(opts.schedule);

  // Expand the schedule to a per-sample step size.
  const std::size_t n = x.size();
  std::vector<double> mu(n);
  {
    std::size_t seg = 0;
    double seg_end_s = opts.schedule.segments[0].duration_s;
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / x.sample_rate;
      while (seg + 1 < opts.schedule.segments.size() && t >= seg_end_s) {
        ++seg;
        seg_end_s += opts.schedule.segments[seg].duration_s;
      }
      mu[i] = opts.schedule.segments[seg].mu;
    }
  }

  std::vector<double> truth_taps;
  if (opts.truth != nullptr) {
    require(opts.truth->sample_rate == x.sample_rate, ErrorCode::InvalidArgument,
            "ipnlms_run: ground-truth sample rate mismatch");
    truth_taps = opts.truth->taps;
    truth_taps.resize(opts.filter_length, 0.0);
  }

  ImpulseResponse h;
  h.sample_rate = x.sample_rate;
  h.taps.assign(opts.filter_length, 0.0);
  ConvergenceTrace trace;
  trace.block_size = opts.trace_block;
  trace.sample_rate = x.sample_rate;

  if (opts.use_float32)
    run_typed<float>(x, y, opts, mu, opts.truth ? &truth_taps : nullptr, h, trace);
  else
    run_typed<double>(x, y, opts, mu, opts.truth ? &truth_taps : nullptr, h, trace);
  return {std::move(h), std::move(trace)};
}

RelativeRir ground_truth_relative_rir(const ImpulseResponse& rir_close,
                                      const ImpulseResponse& rir_far,
                                      std::size_t out_len) {
  require(rir_close.sample_rate == rir_far.sample_rate, ErrorCode::InvalidArgument,
          "relative RIR: sample rates must match");
  require(out_len > 0, ErrorCode::InvalidArgument,
          "relative RIR: output length must be positive");
  require(!rir_close.taps.empty() && !rir_far.taps.empty(),
          ErrorCode::InvalidArgument, "relative RIR: empty input response");
  double close_energy = 0.0;
  for (double v : rir_close.taps) close_energy += v * v;
  require(close_energy > 0.0, ErrorCode::InvalidArgument,
          "relative RIR: close response has zero energy");

  RelativeRir result;

  // The quotient is causal only if the far path is the longer one; when it
  // is not, shift the far response by a declared modeling delay.
  const auto peak_index = [](const std::vector<double>& taps) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < taps.size(); ++i)
      if (std::abs(taps[i]) > std::abs(taps[best])) best = i;
    return best;
  };
  std::vector<double> far_taps = rir_far.taps;
  if (peak_index(far_taps) < peak_index(rir_close.taps)) {
    constexpr int kModelingDelay = 64;
    far_taps.insert(far_taps.begin(), kModelingDelay, 0.0);
    result.modeling_delay = kModelingDelay;
  }

  const std::size_t longest = std::max(rir_close.taps.size(), far_taps.size());
  const std::size_t n = next_pow2(std::max<std::size_t>(2 * longest, 2));
  Fft& fft = pooled_fft(n);
  std::vector<double> pad(n, 0.0);
  std::vector<std::complex<double>> spec_close(fft.bins()), spec_far(fft.bins());
  std::copy(rir_close.taps.begin(), rir_close.taps.end(), pad.begin());
  fft.forward(pad.data(), spec_close.data());
  std::fill(pad.begin(), pad.end(), 0.0);
  std::copy(far_taps.begin(), far_taps.end(), pad.begin());
  fft.forward(pad.data(), spec_far.data());

  // Tikhonov-regularized division against the deep notches of the close
  // response: H = F conj(C) / (|C|^2 + lambda * max |C|^2).
  double peak_power = 0.0;
  for (const auto& c : spec_close) peak_power = std::max(peak_power, std::norm(c));
  const double reg = 1e-6 * peak_power;
  for (std::size_t i = 0; i < spec_close.size(); ++i)
    spec_far[i] = spec_far[i] * std::conj(spec_close[i]) /
                  (std::norm(spec_close[i]) + reg);

  std::vector<double> full(n);
  fft.inverse(spec_far.data(), full.data());
  full.resize(out_len);

  result.ir.sample_rate = rir_close.sample_rate;
  result.ir.taps = std::move(full);
  return result;
}

double npm(const ImpulseResponse& h_true, const ImpulseResponse& h_est) {
  return npm_raw(h_true.taps, h_est.taps);
}

}  // namespace relrange
