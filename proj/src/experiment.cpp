#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "errors.hpp"
#include "harness.hpp"
#include "rng.hpp"

namespace relrange {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double variance_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return acc / static_cast<double>(v.size());
}

std::vector<FeatureRow> gather(const std::vector<DatasetRow>& rows,
                               const std::vector<int>& idx) {
  std::vector<FeatureRow> out;
  out.reserve(idx.size());
  for (int i : idx) out.push_back(rows[static_cast<std::size_t>(i)].features);
  return out;
}

}  // namespace

SplitIndices split_dataset(std::size_t n, const std::array<double, 3>& fractions,
                           std::uint64_t seed) {
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto rng = make_engine(seed);
  for (std::size_t i = n; i > 1; --i)
    std::swap(order[i - 1], order[static_cast<std::size_t>(rng() % i)]);

  auto n_val = static_cast<std::size_t>(std::lround(fractions[1] * static_cast<double>(n)));
  auto n_test = static_cast<std::size_t>(std::lround(fractions[2] * static_cast<double>(n)));
  n_val = std::max<std::size_t>(1, n_val);
  n_test = std::max<std::size_t>(1, n_test);
  require(n_val + n_test < n, ErrorCode::InvalidArgument,
          "split leaves no training rows");

  SplitIndices split;
  split.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  split.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test),
                   order.begin() + static_cast<std::ptrdiff_t>(n_test + n_val));
  split.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test + n_val),
                     order.end());
  return split;
}

std::vector<FeatureRow> gather(const std::vector<DatasetRow>& rows,
                               const std::vector<int>& idx) {
  std::vector<FeatureRow> out;
  out.reserve(idx.size());
  for (int i : idx) out.push_back(rows[static_cast<std::size_t>(i)].features);
  return out;
}

}  // namespace

std::string config_hash(const ExperimentConfig& cfg) {
  return fnv1a_hex(config_to_json(cfg));
}

json run_experiment(const ExperimentConfig& cfg, const std::string& out_dir,
                    const ProgressFn& progress) {
  validate_experiment_config(cfg);
  fs::create_directories(out_dir);

  const std::string config_json = config_to_json(cfg);

  json report;
  report["schema_version"] = 1;
  report["kind"] = "relrange_experiment_report";
  report["provenance"] = {{"config_hash", fnv1a_hex(config_json)},
                          {"seed", cfg.seed},
                          {"timestamp", iso_timestamp()},
                          {"relrange_version", version_string()}};
  report["config"] = json::parse(config_json);
  report["rooms"] = json::array();

  for (std::size_t room_idx = 0; room_idx < cfg.rooms.size(); ++room_idx) {
    const NamedRoom& nr = cfg.rooms[room_idx];
    const std::uint64_t rseed = room_seed(cfg, room_idx);
    const double diag = nr.room.diagonal();

    json room_report;
    room_report["name"] = nr.name;

    std::ofstream predictions((fs::path(out_dir) / ("predictions_" + nr.name + ".csv")).string(),
                              std::ios::trunc);
    require(predictions.good(), ErrorCode::Io, "cannot write predictions CSV");
    predictions << "rep,index,distance_m,gbdt_m,tof_m\n";
    predictions.precision(17);

    std::vector<DatasetRow> dataset;
    std::vector<double> rep_re_means, rep_baseline_means;
    std::vector<double> re_full_all, re_wo_srr_all, re_wo_c50_all;
    json per_rep = json::array();
    GbdtModel importance_model;
    std::vector<FeatureRow> importance_test;

    for (int rep = 0; rep < cfg.n_monte_carlo; ++rep) {
      const std::uint64_t dataset_seed =
          cfg.regenerate_per_rep ? derive_seed(rseed, 0xDA7A + static_cast<std::uint64_t>(rep))
                                 : derive_seed(rseed, 0xDA7A);
      if (rep == 0 || cfg.regenerate_per_rep) {
        const std::string csv_path =
            (fs::path(out_dir) / ("dataset_" + nr.name +
                                  (cfg.regenerate_per_rep ? "_rep" + std::to_string(rep) : "") +
                                  ".csv"))
                .string();
        dataset = generate_dataset(nr.room, cfg, dataset_seed, csv_path, progress);
      }
      require(dataset.size() >= 10, ErrorCode::Numeric,
              "experiment: too few usable dataset rows");

      const std::uint64_t rep_seed = derive_seed(rseed, 0x5EED + static_cast<std::uint64_t>(rep));
      const SplitIndices split = split_dataset(dataset.size(), cfg.split, rep_seed);
      const auto train = gather(dataset, split.train);
      const auto val = gather(dataset, split.val);
      const auto test = gather(dataset, split.test);

      const GridResult grid = grid_search(train, val, cfg.grid, rep_seed);
      const GbdtModel model = gbdt_train(train, val, grid.best);

      FeatureMask wo_srr = kAllFeatures;
      wo_srr[3] = false;
      FeatureMask wo_c50 = kAllFeatures;
      wo_c50[0] = false;
      const GbdtModel model_wo_srr = gbdt_train(train, val, grid.best, wo_srr);
      const GbdtModel model_wo_c50 = gbdt_train(train, val, grid.best, wo_c50);

      std::vector<double> re_full, re_baseline;
      for (std::size_t t = 0; t < test.size(); ++t) {
        const DatasetRow& row = dataset[static_cast<std::size_t>(split.test[t])];
        const double truth = row.features.distance_m;
        const double pred =
            std::clamp(gbdt_predict(model, row.features), 0.05, diag);
        re_full.push_back(relative_error(truth, pred));
        re_wo_srr_all.push_back(relative_error(
            truth, std::clamp(gbdt_predict(model_wo_srr, row.features), 0.05, diag)));
        re_wo_c50_all.push_back(relative_error(
            truth, std::clamp(gbdt_predict(model_wo_c50, row.features), 0.05, diag)));
        if (std::isfinite(row.tof_distance_m))
          re_baseline.push_back(relative_error(truth, row.tof_distance_m));
        predictions << rep << ',' << row.index << ',' << truth << ',' << pred << ','
                    << row.tof_distance_m << '\n';
      }
      re_full_all.insert(re_full_all.end(), re_full.begin(), re_full.end());

      rep_re_means.push_back(mean_of(re_full));
      if (!re_baseline.empty()) rep_baseline_means.push_back(mean_of(re_baseline));

      per_rep.push_back({{"rep", rep},
                         {"re_mean_pct", rep_re_means.back()},
                         {"baseline_re_mean_pct",
                          re_baseline.empty() ? json() : json(rep_baseline_means.back())},
                         {"n_rounds", model.n_rounds_used},
                         {"max_depth", grid.best.max_depth},
                         {"learning_rate", grid.best.learning_rate},
                         {"min_samples_leaf", grid.best.min_samples_leaf},
                         {"subsample", grid.best.subsample},
                         {"val_mse", grid.best_val_mse},
                         {"n_test", static_cast<int>(test.size())}});

      if (rep == 0) {
        importance_model = model;
        importance_test = test;
      }
    }

    // Correlations over the full batch.
    std::vector<FeatureRow> all_rows;
    all_rows.reserve(dataset.size());
    for (const auto& r : dataset) all_rows.push_back(r.features);
    const CorrelationMatrix corr = correlation_matrix(all_rows);
    json corr_json = json::array();
    for (const auto& row : corr) corr_json.push_back(row);

    const auto importance = permutation_importance(
        importance_model, importance_test, cfg.importance_repeats,
        derive_seed(rseed, 0x1112));
    json importance_json = json::array();
    for (const auto& [feature, delta] : importance)
      importance_json.push_back(
          {{"feature", kFeatureNames[feature]}, {"delta_mse", delta}});

    // Tiny configurations can leave too few (or degenerate) test errors for
    // a t-test; report null p-values rather than failing the run.
    const auto guarded_ttest = [](const std::vector<double>& a,
                                  const std::vector<double>& b) -> json {
      try {
        const TTestResult r = welch_ttest(a, b);
        return {{"t", r.t}, {"p", r.p}, {"dof", r.dof}};
      } catch (const Error&) {
        return {{"t", nullptr}, {"p", nullptr}, {"dof", nullptr}};
      }
    };
    json tt_srr = guarded_ttest(re_full_all, re_wo_srr_all);
    json tt_c50 = guarded_ttest(re_full_all, re_wo_c50_all);

    room_report["n_rows"] = dataset.size();
    room_report["re_mean_pct"] = mean_of(rep_re_means);
    room_report["re_variance"] = variance_of(rep_re_means);
    if (!rep_baseline_means.empty()) {
      room_report["baseline_re_mean_pct"] = mean_of(rep_baseline_means);
      room_report["baseline_re_variance"] = variance_of(rep_baseline_means);
    }
    room_report["correlation_order"] =
        std::vector<std::string>(kCorrelationLabels, kCorrelationLabels + 6);
    room_report["correlation_matrix"] = std::move(corr_json);
    room_report["feature_importance"] = std::move(importance_json);
    tt_srr["comparison"] = "with_vs_without_srr";
    tt_c50["comparison"] = "with_vs_without_c50";
    room_report["t_tests"] = {tt_srr, tt_c50};
    room_report["per_rep"] = std::move(per_rep);
    report["rooms"].push_back(std::move(room_report));
  }

  std::ofstream out((fs::path(out_dir) / "report.json").string(), std::ios::trunc);
  require(out.good(), ErrorCode::Io, "cannot write report.json");
  out << report.dump(2) << '\n';
  require(out.good(), ErrorCode::Io, "report write failed");
  return report;
}

void write_plotdata(const std::string& report_path, const std::string& out_dir) {
  std::ifstream in(report_path);
  require(in.good(), ErrorCode::Io, "cannot open report: " + report_path);
  json report;
  try {
    in >> report;
  } catch (const json::exception& e) {
    fail(ErrorCode::Io, std::string("report JSON parse error: ") + e.what());
  }
  require(report.value("kind", "") == "relrange_experiment_report",
          ErrorCode::InvalidArgument, "not an experiment report: " + report_path);
  fs::create_directories(out_dir);

  std::ofstream re_csv((fs::path(out_dir) / "re_comparison.csv").string(),
                       std::ios::trunc);
  re_csv << "room,algorithm,re_mean_pct,re_variance\n";
  std::ofstream imp_csv((fs::path(out_dir) / "feature_importance.csv").string(),
                        std::ios::trunc);
  imp_csv << "room,rank,feature,delta_mse\n";
  std::ofstream tt_csv((fs::path(out_dir) / "t_tests.csv").string(), std::ios::trunc);
  tt_csv << "room,comparison,t,p,dof\n";

  for (const auto& room : report.at("rooms")) {
    const auto name = room.at("name").get<std::string>();
    re_csv << name << ",gbdt," << room.at("re_mean_pct").get<double>() << ','
           << room.at("re_variance").get<double>() << '\n';
    if (room.contains("baseline_re_mean_pct"))
      re_csv << name << ",gcc_phat," << room.at("baseline_re_mean_pct").get<double>()
             << ',' << room.at("baseline_re_variance").get<double>() << '\n';
    int rank = 1;
    for (const auto& item : room.at("feature_importance"))
      imp_csv << name << ',' << rank++ << ',' << item.at("feature").get<std::string>()
              << ',' << item.at("delta_mse").get<double>() << '\n';
    for (const auto& tt : room.at("t_tests")) {
      const auto num = [&](const char* key) {
        return tt.at(key).is_null() ? std::string("nan")
                                    : std::to_string(tt.at(key).get<double>());
      };
      tt_csv << name << ',' << tt.at("comparison").get<std::string>() << ','
             << num("t") << ',' << num("p") << ',' << num("dof") << '\n';
    }
  }
  require(re_csv.good() && imp_csv.good() && tt_csv.good(), ErrorCode::Io,
          "plot data write failed");
}

}  // namespace relrange
