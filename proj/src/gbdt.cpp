#include "gbdt.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "errors.hpp"
#include "rng.hpp"

namespace relrange {

using json = nlohmann::json;

Scaler fit_scaler(const std::vector<FeatureRow>& rows) {
  require(!rows.empty(), ErrorCode::InvalidArgument, "fit_scaler: empty batch");
  Scaler scaler;
  const double n = static_cast<double>(rows.size());
  for (const auto& row : rows) {
    const auto v = feature_vector(row);
    for (int f = 0; f < kNumFeatures; ++f) scaler.means[f] += v[f];
  }
  for (int f = 0; f < kNumFeatures; ++f) scaler.means[f] /= n;
  for (const auto& row : rows) {
    const auto v = feature_vector(row);
    for (int f = 0; f < kNumFeatures; ++f) {
      const double d = v[f] - scaler.means[f];
      scaler.std_devs[f] += d * d;
    }
  }
  for (int f = 0; f < kNumFeatures; ++f) {
    scaler.std_devs[f] = std::sqrt(scaler.std_devs[f] / n);
    if (scaler.std_devs[f] <= 0.0) {
      std::fprintf(stderr, "warning: feature %s is constant, std fixed to 1\n",
                   kFeatureNames[f]);
      scaler.std_devs[f] = 1.0;
    }
  }
  return scaler;
}

std::array<double, kNumFeatures> apply_scaler(const Scaler& scaler,
                                              const FeatureRow& row) {
  auto v = feature_vector(row);
  for (int f = 0; f < kNumFeatures; ++f)
    v[f] = (v[f] - scaler.means[f]) / scaler.std_devs[f];
  return v;
}

double tree_predict(const RegressionTree& tree,
                    const std::array<double, kNumFeatures>& x) {
  int node = 0;
  for (;;) {
    const TreeNode& n = tree.nodes[static_cast<std::size_t>(node)];
    if (n.is_leaf) return n.value;
    node = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
  }
}

namespace {

struct Matrix {
  std::vector<std::array<double, kNumFeatures>> x;
  std::vector<double> y;
};

Matrix standardize(const std::vector<FeatureRow>& rows, const Scaler& scaler) {
  Matrix m;
  m.x.reserve(rows.size());
  m.y.reserve(rows.size());
  for (const auto& row : rows) {
    const auto v = apply_scaler(scaler, row);
    for (double f : v)
      require(std::isfinite(f), ErrorCode::InvalidArgument,
              "gbdt: non-finite feature value");
    require(std::isfinite(row.distance_m), ErrorCode::InvalidArgument,
            "gbdt: non-finite training label");
    m.x.push_back(v);
    m.y.push_back(row.distance_m);
  }
  return m;
}

struct SplitChoice {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& data, const std::vector<double>& residuals,
              const TrainConfig& cfg, const FeatureMask& mask)
      : data_(data), residuals_(residuals), cfg_(cfg), mask_(mask) {}

  RegressionTree build(std::vector<int> indices) {
    tree_.nodes.clear();
    grow(std::move(indices), 0);
    return std::move(tree_);
  }

 private:
  int grow(std::vector<int> indices, int depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();

    double sum = 0.0;
    for (int i : indices) sum += residuals_[static_cast<std::size_t>(i)];
    const double mean = sum / static_cast<double>(indices.size());

    SplitChoice best;
    if (depth < cfg_.max_depth &&
        static_cast<int>(indices.size()) >= 2 * cfg_.min_samples_leaf)
      best = find_split(indices);

    if (best.feature < 0) {
      tree_.nodes[static_cast<std::size_t>(id)].is_leaf = true;
      tree_.nodes[static_cast<std::size_t>(id)].value = mean;
      return id;
    }

    std::vector<int> left, right;
    left.reserve(indices.size());
    right.reserve(indices.size());
    for (int i : indices) {
      if (data_.x[static_cast<std::size_t>(i)][static_cast<std::size_t>(best.feature)] <=
          best.threshold)
        left.push_back(i);
      else
        right.push_back(i);
    }
    indices.clear();
    indices.shrink_to_fit();

    const int left_id = grow(std::move(left), depth + 1);
    const int right_id = grow(std::move(right), depth + 1);
    TreeNode& node = tree_.nodes[static_cast<std::size_t>(id)];
    node.is_leaf = false;
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = left_id;
    node.right = right_id;
    return id;
  }

  // Exact greedy search: scan sorted unique values per feature, maximize
  // variance reduction. Ties break toward the lowest threshold, then the
  // lowest feature index.
  SplitChoice find_split(const std::vector<int>& indices) {
    const auto n = static_cast<int>(indices.size());
    double total = 0.0, total_sq = 0.0;
    for (int i : indices) {
      const double r = residuals_[static_cast<std::size_t>(i)];
      total += r;
      total_sq += r * r;
    }
    const double parent_sse = total_sq - total * total / n;

    SplitChoice best;
    std::vector<int> order(indices);
    for (int f = 0; f < kNumFeatures; ++f) {
      if (!mask_[static_cast<std::size_t>(f)]) continue;
      std::sort(order.begin(), order.end(), [&](int a, int b) {
        const double va = data_.x[static_cast<std::size_t>(a)][static_cast<std::size_t>(f)];
        const double vb = data_.x[static_cast<std::size_t>(b)][static_cast<std::size_t>(f)];
        if (va != vb) return va < vb;
        return a < b;
      });
      double left_sum = 0.0, left_sq = 0.0;
      for (int pos = 0; pos < n - 1; ++pos) {
        const int i = order[static_cast<std::size_t>(pos)];
        const double r = residuals_[static_cast<std::size_t>(i)];
        left_sum += r;
        left_sq += r * r;
        const double v = data_.x[static_cast<std::size_t>(i)][static_cast<std::size_t>(f)];
        const double v_next =
            data_.x[static_cast<std::size_t>(order[static_cast<std::size_t>(pos + 1)])]
                   [static_cast<std::size_t>(f)];
        if (v == v_next) continue;
        const int n_left = pos + 1;
        const int n_right = n - n_left;
        if (n_left < cfg_.min_samples_leaf || n_right < cfg_.min_samples_leaf)
          continue;
        const double right_sum = total - left_sum;
        const double right_sq = total_sq - left_sq;
        const double sse = (left_sq - left_sum * left_sum / n_left) +
                           (right_sq - right_sum * right_sum / n_right);
        const double gain = parent_sse - sse;
        const double threshold = 0.5 * (v + v_next);
        constexpr double kGainEps = 1e-12;
        if (gain > best.gain + kGainEps ||
            (std::abs(gain - best.gain) <= kGainEps && best.feature >= 0 &&
             threshold < best.threshold)) {
          best.gain = gain;
          best.feature = f;
          best.threshold = threshold;
        }
      }
    }
    if (best.gain <= 0.0) best.feature = -1;
    return best;
  }

  RegressionTree tree_;
  const Matrix& data_;
  const std::vector<double>& residuals_;
  const TrainConfig& cfg_;
  const FeatureMask& mask_;
};

void validate_config(const TrainConfig& cfg) {
  require(cfg.max_rounds >= 0, ErrorCode::InvalidArgument,
          "gbdt: max_rounds must be non-negative");
  require(cfg.max_depth >= 0, ErrorCode::InvalidArgument,
          "gbdt: max_depth must be non-negative");
  require(cfg.learning_rate > 0.0 && cfg.learning_rate <= 1.0,
          ErrorCode::InvalidArgument, "gbdt: learning_rate must be in (0, 1]");
  require(cfg.min_samples_leaf >= 1, ErrorCode::InvalidArgument,
          "gbdt: min_samples_leaf must be positive");
  require(cfg.subsample > 0.0 && cfg.subsample <= 1.0, ErrorCode::InvalidArgument,
          "gbdt: subsample must be in (0, 1]");
  require(cfg.early_stop_patience >= 1, ErrorCode::InvalidArgument,
          "gbdt: early_stop_patience must be >= 1");
}

}  // namespace

GbdtModel gbdt_train(const std::vector<FeatureRow>& train,
                     const std::vector<FeatureRow>& val, const TrainConfig& cfg,
                     const FeatureMask& mask) {
  require(!train.empty() && !val.empty(), ErrorCode::InvalidArgument,
          "gbdt_train: empty batch");
  validate_config(cfg);

  GbdtModel model;
  model.config = cfg;
  model.learning_rate = cfg.learning_rate;
  model.feature_mask = mask;
  model.scaler = fit_scaler(train);

  const Matrix train_m = standardize(train, model.scaler);
  const Matrix val_m = standardize(val, model.scaler);

  model.base_prediction =
      std::accumulate(train_m.y.begin(), train_m.y.end(), 0.0) /
      static_cast<double>(train_m.y.size());

  std::vector<double> train_pred(train_m.y.size(), model.base_prediction);
  std::vector<double> val_pred(val_m.y.size(), model.base_prediction);
  std::vector<double> residuals(train_m.y.size());

  auto val_mse = [&] {
    double sse = 0.0;
    for (std::size_t i = 0; i < val_m.y.size(); ++i) {
      const double d = val_m.y[i] - val_pred[i];
      sse += d * d;
    }
    return sse / static_cast<double>(val_m.y.size());
  };

  auto rng = make_engine(cfg.seed);
  double best_mse = val_mse();
  int best_round = 0;
  int stall = 0;

  std::vector<int> all_indices(train_m.y.size());
  std::iota(all_indices.begin(), all_indices.end(), 0);

  for (int round = 0; round < cfg.max_rounds; ++round) {
    for (std::size_t i = 0; i < residuals.size(); ++i)
      residuals[i] = train_m.y[i] - train_pred[i];

    std::vector<int> sample = all_indices;
    if (cfg.subsample < 1.0) {
      // Deterministic Fisher-Yates prefix draw.
      const auto keep = std::max<std::size_t>(
          1, static_cast<std::size_t>(cfg.subsample * static_cast<double>(sample.size())));
      for (std::size_t i = 0; i < keep; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng() % (sample.size() - i));
        std::swap(sample[i], sample[j]);
      }
      sample.resize(keep);
      std::sort(sample.begin(), sample.end());
    }

    TreeBuilder builder(train_m, residuals, cfg, mask);
    model.trees.push_back(builder.build(std::move(sample)));
    const RegressionTree& tree = model.trees.back();

    for (std::size_t i = 0; i < train_pred.size(); ++i)
      train_pred[i] += cfg.learning_rate * tree_predict(tree, train_m.x[i]);
    for (std::size_t i = 0; i < val_pred.size(); ++i)
      val_pred[i] += cfg.learning_rate * tree_predict(tree, val_m.x[i]);

    const double mse = val_mse();
    if (mse < best_mse - 1e-15) {
      best_mse = mse;
      best_round = round + 1;
      stall = 0;
    } else if (++stall >= cfg.early_stop_patience) {
      break;
    }
  }

  model.trees.resize(static_cast<std::size_t>(best_round));
  model.n_rounds_used = best_round;
  return model;
}

double gbdt_predict(const GbdtModel& model, const FeatureRow& row) {
  const auto x = apply_scaler(model.scaler, row);
  double pred = model.base_prediction;
  for (const auto& tree : model.trees)
    pred += model.learning_rate * tree_predict(tree, x);
  return pred;
}

double gbdt_mse(const GbdtModel& model, const std::vector<FeatureRow>& rows) {
  require(!rows.empty(), ErrorCode::InvalidArgument, "gbdt_mse: empty batch");
  double sse = 0.0;
  for (const auto& row : rows) {
    const double d = row.distance_m - gbdt_predict(model, row);
    sse += d * d;
  }
  return sse / static_cast<double>(rows.size());
}

GridResult grid_search(const std::vector<FeatureRow>& train,
                       const std::vector<FeatureRow>& val, const TrainGrid& grid,
                       std::uint64_t seed) {
  require(!grid.max_depth.empty() && !grid.learning_rate.empty() &&
              !grid.min_samples_leaf.empty() && !grid.subsample.empty(),
          ErrorCode::InvalidArgument, "grid_search: empty grid");
  GridResult result;
  bool have_best = false;
  int best_rounds = 0;

  for (int depth : grid.max_depth) {
    for (double lr : grid.learning_rate) {
      for (int leaf : grid.min_samples_leaf) {
        for (double sub : grid.subsample) {
          TrainConfig cfg;
          cfg.max_rounds = grid.max_rounds;
          cfg.max_depth = depth;
          cfg.learning_rate = lr;
          cfg.min_samples_leaf = leaf;
          cfg.subsample = sub;
          cfg.early_stop_patience = grid.early_stop_patience;
          cfg.seed = seed;
          const GbdtModel model = gbdt_train(train, val, cfg);
          const double mse = gbdt_mse(model, val);
          result.table.push_back({cfg, mse, model.n_rounds_used});

          const bool better =
              !have_best || mse < result.best_val_mse ||
              (mse == result.best_val_mse &&
               (model.n_rounds_used < best_rounds ||
                (model.n_rounds_used == best_rounds && depth < result.best.max_depth)));
          if (better) {
            have_best = true;
            result.best = cfg;
            result.best_val_mse = mse;
            best_rounds = model.n_rounds_used;
          }
        }
      }
    }
  }
  return result;
}

std::vector<std::pair<int, double>> permutation_importance(
    const GbdtModel& model, const std::vector<FeatureRow>& test, int n_repeats,
    std::uint64_t seed) {
  require(!test.empty(), ErrorCode::InvalidArgument,
          "permutation_importance: empty batch");
  require(n_repeats >= 1, ErrorCode::InvalidArgument,
          "permutation_importance: n_repeats must be positive");
  const double base_mse = gbdt_mse(model, test);
  auto rng = make_engine(seed);

  std::vector<std::pair<int, double>> ranked;
  for (int f = 0; f < kNumFeatures; ++f) {
    double delta_sum = 0.0;
    for (int rep = 0; rep < n_repeats; ++rep) {
      std::vector<FeatureRow> shuffled = test;
      // Fisher-Yates over the single column.
      for (std::size_t i = shuffled.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        auto get = [f](FeatureRow& r) -> double& {
          switch (f) {
            case 0: return r.c50_db;
            case 1: return r.drr_db;
            case 2: return r.t60_s;
            case 3: return r.srr_db;
            default: return r.sparseness;
          }
        };
        std::swap(get(shuffled[i - 1]), get(shuffled[j]));
      }
      delta_sum += gbdt_mse(model, shuffled) - base_mse;
    }
    ranked.emplace_back(f, delta_sum / n_repeats);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return ranked;
}

TTestResult welch_ttest(const std::vector<double>& sample_a,
                        const std::vector<double>& sample_b) {
  require(sample_a.size() >= 2 && sample_b.size() >= 2, ErrorCode::InvalidArgument,
          "welch_ttest: each sample needs at least two elements");
  const auto stats = [](const std::vector<double>& s) {
    const double n = static_cast<double>(s.size());
    const double mean = std::accumulate(s.begin(), s.end(), 0.0) / n;
    double var = 0.0;
    for (double v : s) var += (v - mean) * (v - mean);
    var /= (n - 1.0);
    return std::pair<double, double>{mean, var};
  };
  const auto [mean_a, var_a] = stats(sample_a);
  const auto [mean_b, var_b] = stats(sample_b);
  const double na = static_cast<double>(sample_a.size());
  const double nb = static_cast<double>(sample_b.size());
  const double se2 = var_a / na + var_b / nb;
  require(se2 > 0.0, ErrorCode::InvalidArgument,
          "welch_ttest: degenerate (zero) variance in both samples");

  TTestResult result;
  result.t = (mean_a - mean_b) / std::sqrt(se2);
  result.dof = se2 * se2 /
               (var_a * var_a / (na * na * (na - 1.0)) +
                var_b * var_b / (nb * nb * (nb - 1.0)));
  const boost::math::students_t dist(result.dof);
  result.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(result.t)));
  return result;
}

namespace {

json tree_to_json(const RegressionTree& tree) {
  json nodes = json::array();
  for (const auto& n : tree.nodes) {
    if (n.is_leaf)
      nodes.push_back({{"value", n.value}});
    else
      nodes.push_back({{"feature", n.feature},
                       {"threshold", n.threshold},
                       {"left", n.left},
                       {"right", n.right}});
  }
  return nodes;
}

RegressionTree tree_from_json(const json& nodes) {
  RegressionTree tree;
  for (const auto& jn : nodes) {
    TreeNode n;
    if (jn.contains("value")) {
      n.is_leaf = true;
      n.value = jn.at("value").get<double>();
    } else {
      n.is_leaf = false;
      n.feature = jn.at("feature").get<int>();
      n.threshold = jn.at("threshold").get<double>();
      n.left = jn.at("left").get<int>();
      n.right = jn.at("right").get<int>();
    }
    tree.nodes.push_back(n);
  }
  return tree;
}

}  // namespace

std::string model_to_json(const GbdtModel& model) {
  json doc;
  doc["schema_version"] = 1;
  doc["kind"] = "relrange_gbdt";
  doc["base_prediction"] = model.base_prediction;
  doc["learning_rate"] = model.learning_rate;
  doc["n_rounds_used"] = model.n_rounds_used;
  doc["scaler"] = {{"means", model.scaler.means}, {"std_devs", model.scaler.std_devs}};
  doc["feature_names"] = std::vector<std::string>(kFeatureNames, kFeatureNames + kNumFeatures);
  doc["feature_mask"] = model.feature_mask;
  doc["config"] = {{"max_rounds", model.config.max_rounds},
                   {"max_depth", model.config.max_depth},
                   {"learning_rate", model.config.learning_rate},
                   {"min_samples_leaf", model.config.min_samples_leaf},
                   {"subsample", model.config.subsample},
                   {"early_stop_patience", model.config.early_stop_patience},
                   {"seed", model.config.seed}};
  json trees = json::array();
  for (const auto& tree : model.trees) trees.push_back(tree_to_json(tree));
  doc["trees"] = std::move(trees);
  return doc.dump(2);
}

GbdtModel model_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::Io, std::string("model JSON parse error: ") + e.what());
  }
  try {
    require(doc.at("schema_version").get<int>() == 1, ErrorCode::Unsupported,
            "unsupported model schema version");
    GbdtModel model;
    model.base_prediction = doc.at("base_prediction").get<double>();
    model.learning_rate = doc.at("learning_rate").get<double>();
    model.n_rounds_used = doc.at("n_rounds_used").get<int>();
    const auto& scaler = doc.at("scaler");
    const auto means = scaler.at("means").get<std::vector<double>>();
    const auto stds = scaler.at("std_devs").get<std::vector<double>>();
    require(means.size() == kNumFeatures && stds.size() == kNumFeatures,
            ErrorCode::Io, "model scaler has wrong arity");
    std::copy(means.begin(), means.end(), model.scaler.means.begin());
    std::copy(stds.begin(), stds.end(), model.scaler.std_devs.begin());
    if (doc.contains("feature_mask")) {
      const auto mask = doc.at("feature_mask").get<std::vector<bool>>();
      require(mask.size() == kNumFeatures, ErrorCode::Io,
              "model feature mask has wrong arity");
      std::copy(mask.begin(), mask.end(), model.feature_mask.begin());
    }
    const auto& cfg = doc.at("config");
    model.config.max_rounds = cfg.at("max_rounds").get<int>();
    model.config.max_depth = cfg.at("max_depth").get<int>();
    model.config.learning_rate = cfg.at("learning_rate").get<double>();
    model.config.min_samples_leaf = cfg.at("min_samples_leaf").get<int>();
    model.config.subsample = cfg.at("subsample").get<double>();
    model.config.early_stop_patience = cfg.at("early_stop_patience").get<int>();
    model.config.seed = cfg.at("seed").get<std::uint64_t>();
    for (const auto& jt : doc.at("trees")) model.trees.push_back(tree_from_json(jt));
    return model;
  } catch (const json::exception& e) {
    fail(ErrorCode::Io, std::string("model JSON missing field: ") + e.what());
  }
}

void save_model(const GbdtModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  require(out.good(), ErrorCode::Io, "cannot open for writing: " + path);
  out << model_to_json(model) << '\n';
  require(out.good(), ErrorCode::Io, "write failed: " + path);
}

GbdtModel load_model(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::Io, "cannot open model: " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return model_from_json(text);
}

}  // namespace relrange
