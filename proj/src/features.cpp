#include "features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "errors.hpp"

namespace relrange {

namespace {

double total_energy(const ImpulseResponse& h) {
  double e = 0.0;
  for (double v : h.taps) e += v * v;
  return e;
}

double clamp_ratio_db(double num, double den, double total) {
  den = std::max(den, kEnergyFloorRel * total);
  num = std::max(num, kEnergyFloorRel * total);
  const double db = 10.0 * std::log10(num / den);
  return std::clamp(db, -kFeatureClampDb, kFeatureClampDb);
}

}  // namespace

double clarity_c50(const ImpulseResponse& h) {
  const double total = total_energy(h);
  require(total > 0.0, ErrorCode::InvalidArgument, "clarity_c50: all-zero filter");
  const std::size_t n50 = static_cast<std::size_t>(std::lround(0.050 * h.sample_rate));
  double early = 0.0, late = 0.0;
  for (std::size_t n = 0; n < h.size(); ++n) {
    const double e = h.taps[n] * h.taps[n];
    // The boundary sample belongs to both sums, as the ratio is defined.
    if (n <= n50) early += e;
    if (n >= n50) late += e;
  }
  return clamp_ratio_db(early, late, total);
}

double drr(const ImpulseResponse& h) {
  const double total = total_energy(h);
  require(total > 0.0, ErrorCode::InvalidArgument, "drr: all-zero filter");
  std::size_t n_d = 0;
  for (std::size_t n = 1; n < h.size(); ++n)
    if (std::abs(h.taps[n]) > std::abs(h.taps[n_d])) n_d = n;
  const std::ptrdiff_t n0 =
      static_cast<std::ptrdiff_t>(std::lround(0.0025 * h.sample_rate));
  const std::size_t lo =
      static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(n_d) - n0));
  const std::size_t hi =
      std::min(h.size() - 1, n_d + static_cast<std::size_t>(n0));
  double direct = 0.0, tail = 0.0;
  for (std::size_t n = lo; n <= hi; ++n) direct += h.taps[n] * h.taps[n];
  for (std::size_t n = hi + 1; n < h.size(); ++n) tail += h.taps[n] * h.taps[n];
  return clamp_ratio_db(direct, tail, total);
}

std::vector<double> energy_decay_curve(const ImpulseResponse& h) {
  const double total = total_energy(h);
  require(total > 0.0, ErrorCode::InvalidArgument,
          "energy_decay_curve: all-zero filter");
  std::vector<double> edc(h.size());
  double tail = 0.0;
  for (std::size_t i = h.size(); i-- > 0;) {
    tail += h.taps[i] * h.taps[i];
    edc[i] = tail;
  }
  for (auto& v : edc) {
    const double ratio = v / total;
    v = ratio > 0.0 ? std::max(10.0 * std::log10(ratio), kEdcFloorDb) : kEdcFloorDb;
  }
  edc[0] = 0.0;  // exact by construction
  return edc;
}

double t60_from_edc(const std::vector<double>& edc_db, int sample_rate,
                    double fit_floor_db, double fit_ceil_db) {
  require(!edc_db.empty(), ErrorCode::InvalidArgument, "t60_from_edc: empty curve");
  require(sample_rate > 0, ErrorCode::InvalidArgument,
          "t60_from_edc: sample rate must be positive");
  const double reached = *std::min_element(edc_db.begin(), edc_db.end());
  require(reached <= fit_floor_db, ErrorCode::Numeric,
          "t60_from_edc: insufficient decay range");

  // Least-squares line through the samples inside the fit band.
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  std::size_t count = 0;
  for (std::size_t n = 0; n < edc_db.size(); ++n) {
    const double e = edc_db[n];
    if (e < fit_floor_db || e > fit_ceil_db) continue;
    const double t = static_cast<double>(n) / sample_rate;
    sx += t;
    sy += e;
    sxx += t * t;
    sxy += t * e;
    ++count;
  }
  require(count >= 2, ErrorCode::Numeric, "t60_from_edc: too few points in fit band");
  const double denom = static_cast<double>(count) * sxx - sx * sx;
  require(denom > 0.0, ErrorCode::Numeric, "t60_from_edc: degenerate fit");
  const double slope = (static_cast<double>(count) * sxy - sx * sy) / denom;
  require(slope < 0.0, ErrorCode::Numeric, "t60_from_edc: non-decaying curve");
  return -60.0 / slope;
}

double sparseness(const ImpulseResponse& h) {
  const std::size_t L = h.size();
  require(L >= 2, ErrorCode::InvalidArgument,
          "sparseness: needs at least two taps");
  double l1 = 0.0, l2sq = 0.0;
  for (double v : h.taps) {
    l1 += std::abs(v);
    l2sq += v * v;
  }
  require(l2sq > 0.0, ErrorCode::InvalidArgument, "sparseness: all-zero filter");
  const double root_l = std::sqrt(static_cast<double>(L));
  const double s = static_cast<double>(L) / (static_cast<double>(L) - root_l) *
                   (1.0 - l1 / (root_l * std::sqrt(l2sq)));
  return std::clamp(s, 0.0, 1.0);
}

double srr(const Signal& x, const Signal& y) {
  require(x.size() == y.size(), ErrorCode::InvalidArgument,
          "srr: signals must have equal length");
  const double ey = signal_energy(y);
  require(ey > 0.0, ErrorCode::InvalidArgument, "srr: far signal has zero energy");
  const double ex = std::max(signal_energy(x), kEnergyFloorRel * ey);
  return 10.0 * std::log10(ex / ey);
}

const char* const kFeatureNames[kNumFeatures] = {"c50_db", "drr_db", "t60_s",
                                                 "srr_db", "sparseness"};

std::array<double, kNumFeatures> feature_vector(const FeatureRow& row) {
  return {row.c50_db, row.drr_db, row.t60_s, row.srr_db, row.sparseness};
}

FeatureRow extract_features(const ImpulseResponse& h_hat, const Signal& x,
                            const Signal& y) {
  FeatureRow row;
  row.c50_db = clarity_c50(h_hat);
  row.drr_db = drr(h_hat);
  row.sparseness = sparseness(h_hat);
  row.srr_db = srr(x, y);
  const auto edc = energy_decay_curve(h_hat);
  try {
    row.t60_s = t60_from_edc(edc, h_hat.sample_rate);
  } catch (const Error&) {
    row.t60_fallback = true;
    try {
      row.t60_s = t60_from_edc(edc, h_hat.sample_rate, -25.0, -5.0);
    } catch (const Error&) {
      // A drop straight through the fit band means the decay is faster than
      // one sample can resolve; rows that never reach the band stay errors.
      const double reached = *std::min_element(edc.begin(), edc.end());
      require(reached <= -25.0, ErrorCode::Numeric,
              "extract_features: insufficient decay range for T60");
      row.t60_s = 2.0 / h_hat.sample_rate;
    }
  }
  row.distance_m = std::nan("");
  return row;
}

const char* const kFeatureCsvHeader =
    "c50_db,drr_db,t60_s,srr_db,sparseness,distance_m,flags";

std::string to_csv_line(const FeatureRow& row) {
  std::ostringstream out;
  out.precision(17);
  out << row.c50_db << ',' << row.drr_db << ',' << row.t60_s << ',' << row.srr_db
      << ',' << row.sparseness << ',' << row.distance_m << ',' << row.flags();
  return out.str();
}

FeatureRow from_csv_line(const std::string& line) {
  std::istringstream in(line);
  std::string field;
  std::array<std::string, 7> fields;
  std::size_t count = 0;
  while (count < 7 && std::getline(in, field, ',')) fields[count++] = field;
  require(count >= 6, ErrorCode::Io, "malformed feature CSV line: " + line);
  FeatureRow row;
  try {
    row.c50_db = std::stod(fields[0]);
    row.drr_db = std::stod(fields[1]);
    row.t60_s = std::stod(fields[2]);
    row.srr_db = std::stod(fields[3]);
    row.sparseness = std::stod(fields[4]);
    row.distance_m = std::stod(fields[5]);
  } catch (const std::exception&) {
    fail(ErrorCode::Io, "malformed feature CSV line: " + line);
  }
  row.t60_fallback = fields[6].find("t60_fallback") != std::string::npos;
  return row;
}

std::vector<FeatureRow> read_feature_csv(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::Io, "cannot open dataset: " + path);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::Io,
          "empty dataset file: " + path);
  require(line.rfind("c50_db,", 0) == 0, ErrorCode::Io,
          "unexpected dataset header in " + path);
  std::vector<FeatureRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    rows.push_back(from_csv_line(line));
  }
  return rows;
}

void write_feature_csv(const std::string& path, const std::vector<FeatureRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  require(out.good(), ErrorCode::Io, "cannot open for writing: " + path);
  out << kFeatureCsvHeader << '\n';
  for (const auto& row : rows) out << to_csv_line(row) << '\n';
  require(out.good(), ErrorCode::Io, "write failed: " + path);
}

}  // namespace relrange
