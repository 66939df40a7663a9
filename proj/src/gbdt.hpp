#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "features.hpp"

namespace relrange {

// Per-feature standardization fitted on the training batch. Constant
// features fall back to unit deviation (with a warning) so they standardize
// to zero instead of blowing up.
struct Scaler {
  std::array<double, kNumFeatures> means{};
  std::array<double, kNumFeatures> std_devs{};
};

Scaler fit_scaler(const std::vector<FeatureRow>& rows);
std::array<double, kNumFeatures> apply_scaler(const Scaler& scaler,
                                              const FeatureRow& row);

// Flat binary regression tree; node 0 is the root. Split predicate is
// value <= threshold to the left child.
struct TreeNode {
  bool is_leaf = true;
  double value = 0.0;
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;
};

double tree_predict(const RegressionTree& tree,
                    const std::array<double, kNumFeatures>& x);

struct TrainConfig {
  int max_rounds = 500;
  int max_depth = 4;
  double learning_rate = 0.1;
  int min_samples_leaf = 5;
  double subsample = 1.0;
  int early_stop_patience = 5;
  std::uint64_t seed = 0;
};

using FeatureMask = std::array<bool, kNumFeatures>;
constexpr FeatureMask kAllFeatures{true, true, true, true, true};

// Gradient-boosted regression trees with squared loss: each round fits a
// depth-limited tree to the current residuals, validation MSE drives early
// stopping, and the returned ensemble is truncated at the best round.
struct GbdtModel {
  std::vector<RegressionTree> trees;
  double learning_rate = 0.1;
  double base_prediction = 0.0;
  Scaler scaler;
  int n_rounds_used = 0;
  FeatureMask feature_mask = kAllFeatures;
  TrainConfig config;
};

GbdtModel gbdt_train(const std::vector<FeatureRow>& train,
                     const std::vector<FeatureRow>& val, const TrainConfig& cfg,
                     const FeatureMask& mask = kAllFeatures);

double gbdt_predict(const GbdtModel& model, const FeatureRow& row);

double gbdt_mse(const GbdtModel& model, const std::vector<FeatureRow>& rows);

// Hyperparameter grid; every combination is trained exhaustively.
struct TrainGrid {
  std::vector<int> max_depth{3, 4, 5, 6};
  std::vector<double> learning_rate{0.05, 0.1};
  std::vector<int> min_samples_leaf{5, 20};
  std::vector<double> subsample{0.8, 1.0};
  int max_rounds = 500;
  int early_stop_patience = 5;
};

struct GridCell {
  TrainConfig config;
  double val_mse = 0.0;
  int n_rounds_used = 0;
};

struct GridResult {
  TrainConfig best;
  double best_val_mse = 0.0;
  std::vector<GridCell> table;
};

// Ties on validation MSE break toward fewer trees, then lower depth.
GridResult grid_search(const std::vector<FeatureRow>& train,
                       const std::vector<FeatureRow>& val, const TrainGrid& grid,
                       std::uint64_t seed);

// Mean test-MSE increase from shuffling one feature column at a time,
// sorted descending. Pairs are (feature index, mean delta MSE).
std::vector<std::pair<int, double>> permutation_importance(
    const GbdtModel& model, const std::vector<FeatureRow>& test, int n_repeats,
    std::uint64_t seed);

// Welch's unequal-variance t-test, two-sided p value.
struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  double dof = 0.0;
};

TTestResult welch_ttest(const std::vector<double>& sample_a,
                        const std::vector<double>& sample_b);

// Model (de)serialization: JSON document with trees, scaler and config.
void save_model(const GbdtModel& model, const std::string& path);
GbdtModel load_model(const std::string& path);
std::string model_to_json(const GbdtModel& model);
GbdtModel model_from_json(const std::string& text);

}  // namespace relrange
