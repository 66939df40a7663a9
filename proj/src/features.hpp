#pragma once

#include <array>
#include <string>
#include <vector>

#include "room.hpp"
#include "signal.hpp"

namespace relrange {

// dB clamp and relative energy floor shared by the ratio features, keeping
// degenerate filters from injecting infinities into the regression inputs.
constexpr double kFeatureClampDb = 60.0;
constexpr double kEnergyFloorRel = 1e-12;
constexpr double kEdcFloorDb = -300.0;

// Clarity index of the first 50 ms versus the remainder, in dB.
double clarity_c50(const ImpulseResponse& h);

// Direct-to-reverberant ratio: energy within 2.5 ms of the strongest tap
// versus the tail after it, in dB.
double drr(const ImpulseResponse& h);

// Schroeder backward integration, dB relative to total energy. E(0) = 0 and
// the curve is non-increasing.
std::vector<double> energy_decay_curve(const ImpulseResponse& h);

// Reverberation time from a decay-curve line fit over [-35, -5] dB
// (T30 extrapolation): T60 = -60 / slope. Throws if the curve never falls
// below fit_floor_db.
double t60_from_edc(const std::vector<double>& edc_db, int sample_rate,
                    double fit_floor_db = -35.0, double fit_ceil_db = -5.0);

// Normalized l1/l2 sparseness in [0, 1]: 1 for a single-tap filter, 0 for a
// uniform one. Requires at least two taps.
double sparseness(const ImpulseResponse& h);

// Power ratio of the near-field and far-field recordings, in dB.
double srr(const Signal& x, const Signal& y);

// The five ranging features for one placement, plus the ground-truth label.
struct FeatureRow {
  double c50_db = 0.0;
  double drr_db = 0.0;
  double t60_s = 0.0;
  double srr_db = 0.0;
  double sparseness = 0.0;
  double distance_m = 0.0;       // label; NaN when unknown
  bool t60_fallback = false;     // T60 fitted over the relaxed [-25, -5] dB range

  std::string flags() const { return t60_fallback ? "t60_fallback" : ""; }
};

constexpr int kNumFeatures = 5;
extern const char* const kFeatureNames[kNumFeatures];

// Feature vector in canonical column order (c50, drr, t60, srr, sparseness).
std::array<double, kNumFeatures> feature_vector(const FeatureRow& row);

// Extracts all five features from an estimated relative impulse response and
// the two microphone recordings. A failed T60 fit retries over [-25, -5] dB
// and flags the row.
FeatureRow extract_features(const ImpulseResponse& h_hat, const Signal& x,
                            const Signal& y);

// CSV row in the dataset schema:
// c50_db,drr_db,t60_s,srr_db,sparseness,distance_m,flags
extern const char* const kFeatureCsvHeader;
std::string to_csv_line(const FeatureRow& row);
FeatureRow from_csv_line(const std::string& line);

std::vector<FeatureRow> read_feature_csv(const std::string& path);
void write_feature_csv(const std::string& path, const std::vector<FeatureRow>& rows);

}  // namespace relrange
