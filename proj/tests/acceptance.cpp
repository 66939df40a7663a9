// Acceptance suite: runs the numbered acceptance criteria and prints one
// PASS/FAIL line per criterion.
//
//   acceptance --prepare --cache DIR --configs DIR   build heavy artifacts
//   acceptance --criterion N --cache DIR --configs DIR
//   acceptance --cache DIR --configs DIR             run everything
//
// The prepare step simulates the full white-noise and speech benchmarks
// (hours of compute on one core) into the cache directory; it is a no-op
// when the cached reports match the configs' hash. Criteria 1-3 and 8 run
// live; criteria 4-7 read the cached reports.

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "baseline.hpp"
#include "errors.hpp"
#include "features.hpp"
#include "gbdt.hpp"
#include "harness.hpp"
#include "relrir.hpp"
#include "room.hpp"
#include "signal.hpp"
#include "support/oracles.hpp"

using namespace relrange;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  bool soft = false;  // reported, never fails the suite
  std::string detail;
};

struct Paths {
  fs::path cache;
  fs::path configs;

  fs::path white_dir() const { return cache / "whitenoise"; }
  fs::path speech_dir() const { return cache / "speech"; }
  fs::path corpus_dir() const { return cache / "corpus"; }
};

ExperimentConfig load_white_config(const Paths& paths) {
  return load_config((paths.configs / "acceptance_whitenoise.json").string());
}

ExperimentConfig load_speech_config(const Paths& paths) {
  ExperimentConfig cfg =
      load_config((paths.configs / "acceptance_speech.json").string());
  cfg.corpus_path = paths.corpus_dir().string();
  return cfg;
}

json load_report(const fs::path& dir) {
  std::ifstream in(dir / "report.json");
  require(in.good(), ErrorCode::Io,
          "missing cached report (run --prepare first): " +
              (dir / "report.json").string());
  json report;
  in >> report;
  return report;
}

bool report_matches(const fs::path& dir, const ExperimentConfig& cfg) {
  if (!fs::exists(dir / "report.json")) return false;
  try {
    const json report = load_report(dir);
    return report.at("provenance").at("config_hash").get<std::string>() ==
           config_hash(cfg);
  } catch (...) {
    return false;
  }
}

const json* find_room(const json& report, const std::string& name) {
  for (const auto& room : report.at("rooms"))
    if (room.at("name").get<std::string>() == name) return &room;
  return nullptr;
}

/* ---------------- criterion 1: unit oracles ---------------- */

Outcome criterion_unit_oracles() {
  std::vector<std::string> failures;
  const auto expect = [&](bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  };

  // Sparseness extremes, exact.
  {
    std::vector<double> one_tap(256, 0.0);
    one_tap[31] = 0.4;
    ImpulseResponse ir{one_tap, 16000};
    expect(std::abs(sparseness(ir) - 1.0) < 1e-12, "sparseness single tap != 1");
    ImpulseResponse uniform{std::vector<double>(256, -0.3), 16000};
    expect(std::abs(sparseness(uniform)) < 1e-12, "sparseness uniform != 0");
  }
  // Relative error examples, exact.
  expect(std::abs(relative_error(2.0, 1.8) - 10.0) < 1e-12, "RE(2.0, 1.8) != 10");
  expect(relative_error(3.14, 3.14) == 0.0, "RE(d, d) != 0");
  expect(std::abs(relative_error(1.55, 1.70) - 100.0 * 0.15 / 1.55) < 1e-9,
         "RE(1.55, 1.70) mismatch");

  // NPM scale invariance within 1e-9.
  {
    ImpulseResponse t{{0.2, -0.7, 0.4, 0.05, -0.1}, 16000};
    ImpulseResponse e{{0.18, -0.72, 0.35, 0.01, -0.05}, 16000};
    const double base = npm(t, e);
    for (double c : {5.0, -0.3}) {
      ImpulseResponse scaled = e;
      for (auto& v : scaled.taps) v *= c;
      expect(std::abs(npm(t, scaled) - base) < 1e-9, "NPM scale variance");
    }
  }
  // IPNLMS at alpha = -1 matches plain NLMS within 1e-12.
  {
    const std::size_t L = 24;
    AdaptiveFilterState state = ipnlms_init(L, -1.0, 0.01);
    oracles::PlainNlms reference(L, 0.01);
    const Signal x = white_noise(300, 16000, 7);
    const Signal h = white_noise(L, 16000, 8);
    const auto y = oracles::convolve_direct(x.samples, h.samples);
    bool ok = true;
    for (std::size_t n = 0; n < x.size(); ++n) {
      const double e_lib = ipnlms_step(state, x.samples[n], y[n], 0.3);
      const double e_ref = reference.step(x.samples[n], y[n], 0.3);
      ok = ok && std::abs(e_lib - e_ref) < 1e-12;
    }
    expect(ok, "IPNLMS(alpha=-1) deviates from plain NLMS beyond 1e-12");
  }
  // EDC of an exponential filter matches the closed form within 0.01 dB.
  {
    const double beta = 4e-4;
    std::vector<double> taps(20000);
    for (std::size_t n = 0; n < taps.size(); ++n)
      taps[n] = std::exp(-beta * static_cast<double>(n));
    const auto edc = energy_decay_curve(ImpulseResponse{taps, 16000});
    const double slope = -20.0 * beta * std::log10(std::exp(1.0));
    bool ok = true;
    for (std::size_t n : {500ul, 2000ul, 8000ul})
      ok = ok && std::abs(edc[n] - slope * static_cast<double>(n)) < 0.01;
    expect(ok, "EDC deviates from the closed form beyond 0.01 dB");
  }
  // T60 of a synthetic exponential within 2%.
  {
    const int fs = 16000;
    const double t60_true = 0.5;
    const double beta = 60.0 / (8.6859 * t60_true * fs);
    std::vector<double> taps(static_cast<std::size_t>(1.2 * t60_true * fs));
    for (std::size_t n = 0; n < taps.size(); ++n)
      taps[n] = std::exp(-beta * static_cast<double>(n));
    const double est = t60_from_edc(energy_decay_curve(ImpulseResponse{taps, fs}), fs);
    expect(std::abs(est - t60_true) / t60_true < 0.02, "synthetic T60 off by > 2%");
  }
  // GCC-PHAT pure delay within 0.25 sample.
  {
    const Signal x = white_noise(4800, 16000, 3);
    Signal y;
    y.sample_rate = 16000;
    y.samples.assign(x.size(), 0.0);
    for (std::size_t i = 37; i < x.size(); ++i) y.samples[i] = x.samples[i - 37];
    const auto delay = gcc_phat_delay(x, y, 0.01);
    expect(delay.has_value() && std::abs(*delay - 37.0 / 16000.0) < 0.25 / 16000.0,
           "GCC-PHAT pure delay off by > 0.25 sample");
  }
  // Convolution matches brute force within 1e-9 for lengths <= 256.
  {
    bool ok = true;
    for (int trial = 0; trial < 8; ++trial) {
      const std::size_t nx = 32 + 28 * static_cast<std::size_t>(trial);
      const std::size_t nh = 256 - 30 * static_cast<std::size_t>(trial);
      const Signal x = white_noise(nx, 16000, 50 + static_cast<std::uint64_t>(trial));
      const Signal h = white_noise(nh, 16000, 90 + static_cast<std::uint64_t>(trial));
      const Signal y = convolve(x, h.samples, 16000);
      const auto ref = oracles::convolve_direct(x.samples, h.samples);
      for (std::size_t i = 0; i < ref.size(); ++i)
        ok = ok && std::abs(y.samples[i] - ref[i]) < 1e-9 * std::max(1.0, std::abs(ref[i]));
    }
    expect(ok, "convolution deviates from brute force beyond 1e-9");
  }

  Outcome out;
  out.pass = failures.empty();
  out.detail = failures.empty()
                   ? "sparseness/RE/NPM/NLMS/EDC/T60/GCC/convolution oracles hold"
                   : failures.front();
  return out;
}

/* ---------------- criterion 2: sparse identification ---------------- */

Outcome criterion_identification() {
  const std::size_t L = 1024;
  std::vector<double> channel(L, 0.0);
  channel[12] = 0.9;
  channel[300] = -0.4;
  channel[777] = 0.25;

  const Signal x = white_noise(20 * L, 16000, 2024);
  const auto y_full = oracles::convolve_direct(x.samples, channel);
  Signal y;
  y.sample_rate = 16000;
  y.samples.assign(y_full.begin(), y_full.begin() + static_cast<std::ptrdiff_t>(x.size()));

  IpnlmsOptions opts;
  opts.filter_length = L;
  opts.alpha = 0.0;
  opts.schedule.segments = {{0.0, 0.3}};
  auto [h_hat, trace] = ipnlms_run(x, y, opts);

  double err = 0.0, ref = 0.0;
  for (std::size_t l = 0; l < L; ++l) {
    const double d = channel[l] - h_hat.taps[l];
    err += d * d;
    ref += channel[l] * channel[l];
  }
  const double misalignment = std::sqrt(err / ref);
  Outcome out;
  out.pass = misalignment < 0.05;
  out.detail = "noiseless 3-tap channel, L=1024, 20L samples: misalignment = " +
               std::to_string(misalignment) + " (< 0.05 required)";
  return out;
}

/* ---------------- criterion 3: convergence reproduction ---------------- */

Outcome criterion_convergence(const Paths& paths) {
  RoomSpec room;
  room.lx = 5.0;
  room.ly = 3.5;
  room.lz = 2.5;
  room.t60 = 0.5;
  room.sample_rate = 16000;

  const Vec3 speaker{0.5, 0.5, 1.0};
  const Vec3 source{0.5, 0.5, 1.05};
  const Vec3 wearable{1.807, 1.317, 1.163};  // 1.55 m from the speaker mic

  const ImpulseResponse rir_close = simulate_rir(room, source, speaker);
  const ImpulseResponse rir_far = simulate_rir(room, source, wearable);

  const std::size_t L = 20000;
  const RelativeRir truth = ground_truth_relative_rir(rir_close, rir_far, L);

  const std::size_t n = 10 * 16000;
  const Signal src_noise = white_noise(n, 16000, 424242);
  Signal near = convolve(src_noise, rir_close.taps, 16000);
  Signal far = convolve(src_noise, rir_far.taps, 16000);
  near.samples.resize(n);
  far.samples.resize(n);
  near = mix_at_snr(near, 30.0, 1001);
  far = mix_at_snr(far, 30.0, 1002);

  IpnlmsOptions opts;
  opts.filter_length = L;
  opts.alpha = 0.0;
  opts.schedule.segments = {{4.5, 0.3}, {0.0, 0.1}};
  opts.trace_block = 1600;
  opts.truth = &truth.ir;
  auto [h_hat, trace] = ipnlms_run(near, far, opts);

  fs::create_directories(paths.cache);
  write_trace_csv(trace, (paths.cache / "fig1_convergence.csv").string());

  const auto& npm_db = trace.npm_db;
  const std::size_t blocks = npm_db.size();
  const auto mean_range = [&](std::size_t lo, std::size_t hi) {
    double acc = 0.0;
    for (std::size_t i = lo; i < hi; ++i) acc += npm_db[i];
    return acc / static_cast<double>(hi - lo);
  };
  const double head = mean_range(0, 5);
  const double tail = mean_range(blocks - 5, blocks);
  const double final_npm = npm_db.back();

  Outcome out;
  out.pass = final_npm <= -10.0 && tail < head - 5.0;
  out.detail = "10 s white noise, 30 dB SNR, L=20000: NPM first-5-blocks mean = " +
               std::to_string(head) + " dB, last-5 mean = " + std::to_string(tail) +
               " dB, final = " + std::to_string(final_npm) +
               " dB (final <= -10 dB and overall decrease required)";
  return out;
}

/* ---------------- criterion 4: correlation sign pattern ---------------- */

Outcome criterion_sign_pattern(const Paths& paths) {
  const auto rows_full = read_feature_csv((paths.white_dir() / "dataset_small.csv").string());
  std::vector<FeatureRow> rows;
  for (const auto& r : rows_full) rows.push_back(r);
  const CorrelationMatrix m = correlation_matrix(rows);

  // Distance row, ordered (T60, C50, DRR, SRR, S): expected signs +, -, -, +, -.
  const double r_t60 = m[5][0], r_c50 = m[5][1], r_drr = m[5][2], r_srr = m[5][3],
               r_s = m[5][4];
  const bool signs_ok =
      r_t60 > 0 && r_c50 < 0 && r_drr < 0 && r_srr > 0 && r_s < 0;
  const bool magnitude_ok = std::abs(r_drr) >= 0.4 && std::abs(r_s) >= 0.4;

  Outcome out;
  out.pass = signs_ok && magnitude_ok;
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "%zu rows: r(distance, .) = T60 %+0.2f, C50 %+0.2f, DRR %+0.2f, "
                "SRR %+0.2f, S %+0.2f (signs +,-,-,+,- and |r|>=0.4 for DRR/S)",
                rows.size(), r_t60, r_c50, r_drr, r_srr, r_s);
  out.detail = buf;
  return out;
}

/* ---------------- criterion 5: ranging accuracy ---------------- */

Outcome criterion_ranging(const Paths& paths) {
  const json report = load_report(paths.white_dir());
  const char* names[3] = {"small", "medium", "large"};
  double re[3], baseline[3];
  for (int i = 0; i < 3; ++i) {
    const json* room = find_room(report, names[i]);
    if (!room) return {false, false, std::string("room missing from report: ") + names[i]};
    re[i] = room->at("re_mean_pct").get<double>();
    baseline[i] = room->at("baseline_re_mean_pct").get<double>();
  }
  const bool in_band = re[0] >= 6.0 && re[0] <= 18.0 && re[1] >= 6.0 &&
                       re[1] <= 18.0 && re[2] >= 6.0 && re[2] <= 18.0;
  const bool trend = re[0] <= re[1] + 1e-9 && re[1] <= re[2] + 1e-9;
  const bool beats = re[1] < baseline[1] && re[2] < baseline[2];

  Outcome out;
  out.pass = in_band && trend && beats;
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "GBDT RE %% = %.2f/%.2f/%.2f, GCC-PHAT = %.2f/%.2f/%.2f "
                "(band [6,18], non-decreasing, GBDT wins medium+large)",
                re[0], re[1], re[2], baseline[0], baseline[1], baseline[2]);
  out.detail = buf;
  return out;
}

/* ---------------- criterion 6: speech degradation ---------------- */

Outcome criterion_speech(const Paths& paths) {
  const json white = load_report(paths.white_dir());
  const json speech = load_report(paths.speech_dir());
  const char* names[3] = {"small", "medium", "large"};
  bool degrades = true;
  bool baseline_collapses = false;
  std::string detail;
  for (const char* name : names) {
    const json* w = find_room(white, name);
    const json* s = find_room(speech, name);
    if (!w || !s) return {false, false, std::string("room missing: ") + name};
    const double re_w = w->at("re_mean_pct").get<double>();
    const double re_s = s->at("re_mean_pct").get<double>();
    degrades = degrades && re_s > re_w;
    double re_b = 0.0;
    if (s->contains("baseline_re_mean_pct")) {
      re_b = s->at("baseline_re_mean_pct").get<double>();
      baseline_collapses = baseline_collapses || re_b > 50.0;
    }
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%s: white %.2f%% -> speech %.2f%% (gcc %.1f%%); ",
                  name, re_w, re_s, re_b);
    detail += buf;
  }
  Outcome out;
  out.pass = degrades && baseline_collapses;
  out.detail = detail + "(speech > white everywhere, GCC > 50% somewhere)";
  return out;
}

/* ---------------- criterion 7: importance ordering (soft) ---------------- */

Outcome criterion_importance(const Paths& paths) {
  const json report = load_report(paths.white_dir());
  const json* small = find_room(report, "small");
  if (!small) return {false, false, "small room missing from report"};

  const std::string top =
      small->at("feature_importance")[0].at("feature").get<std::string>();
  const bool top_ok = top == "sparseness" || top == "t60_s";

  int srr_ok = 0, c50_ok = 0, rooms = 0;
  std::string pvals;
  for (const auto& room : report.at("rooms")) {
    ++rooms;
    double p_srr = -1.0, p_c50 = -1.0;
    for (const auto& tt : room.at("t_tests")) {
      const auto cmp = tt.at("comparison").get<std::string>();
      if (cmp == "with_vs_without_srr") p_srr = tt.at("p").get<double>();
      if (cmp == "with_vs_without_c50") p_c50 = tt.at("p").get<double>();
    }
    if (p_srr > 0.05) ++srr_ok;
    if (p_c50 < 0.05) ++c50_ok;
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%s: p_srr=%.3f p_c50=%.3f; ",
                  room.at("name").get<std::string>().c_str(), p_srr, p_c50);
    pvals += buf;
  }

  Outcome out;
  out.soft = true;
  out.pass = top_ok && srr_ok >= 2 && c50_ok >= 2;
  out.detail = "top feature = " + top + "; " + pvals +
               "(want S/T60 first, SRR p>0.05 and C50 p<0.05 in >= 2 of " +
               std::to_string(rooms) + " rooms) [soft criterion: failure is " +
               "reported for investigation, not a rejection]";
  return out;
}

/* ---------------- criterion 8: determinism ---------------- */

Outcome criterion_determinism(const Paths& paths) {
  ExperimentConfig cfg;
  NamedRoom nr;
  nr.name = "tiny";
  nr.room.lx = 4.0;
  nr.room.ly = 3.0;
  nr.room.lz = 2.4;
  nr.room.t60 = 0.25;
  nr.room.sample_rate = 16000;
  cfg.rooms.push_back(nr);
  cfg.n_positions = 24;
  cfg.signal_duration_s = 1.5;
  cfg.n_monte_carlo = 2;
  cfg.seed = 777;
  cfg.filter.use_float32 = true;
  cfg.grid.max_depth = {3, 4};
  cfg.grid.learning_rate = {0.1};
  cfg.grid.min_samples_leaf = {2};
  cfg.grid.subsample = {1.0};
  cfg.grid.max_rounds = 80;
  cfg.importance_repeats = 3;

  const fs::path dir_a = paths.cache / "determinism_a";
  const fs::path dir_b = paths.cache / "determinism_b";
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
  json a = run_experiment(cfg, dir_a.string());
  json b = run_experiment(cfg, dir_b.string());
  a["provenance"].erase("timestamp");
  b["provenance"].erase("timestamp");

  Outcome out;
  out.pass = a.dump() == b.dump();
  out.detail = out.pass ? "two runs, identical reports modulo timestamp"
                        : "reports differ between identical runs";
  return out;
}

/* ---------------- prepare ---------------- */

void prepare(const Paths& paths) {
  fs::create_directories(paths.cache);

  // Speech corpus for the speech-mode benchmark.
  bool corpus_ready = fs::exists(paths.corpus_dir());
  if (corpus_ready) {
    int wavs = 0;
    for (const auto& e : fs::directory_iterator(paths.corpus_dir()))
      if (e.path().extension() == ".wav") ++wavs;
    corpus_ready = wavs >= 48;
  }
  if (!corpus_ready) {
    std::cout << "[prepare] generating synthetic speech corpus..." << std::endl;
    write_speech_corpus(paths.corpus_dir().string(), 48, 16.0, 16000, 20240810);
  }

  const auto run_if_stale = [&](const ExperimentConfig& cfg, const fs::path& dir,
                                const char* label) {
    if (report_matches(dir, cfg)) {
      std::cout << "[prepare] " << label << ": cached report is current" << std::endl;
      return;
    }
    std::cout << "[prepare] " << label
              << ": running full benchmark (this takes a while on one core)"
              << std::endl;
    int last_pct = -1;
    run_experiment(cfg, dir.string(), [&](int done, int total) {
      const int pct = 100 * done / total;
      if (pct / 5 != last_pct / 5) {
        std::cout << "[prepare] " << label << " dataset: " << pct << "%" << std::endl;
        last_pct = pct;
      }
    });
    write_plotdata((dir / "report.json").string(), (dir / "plots").string());
  };

  run_if_stale(load_white_config(paths), paths.white_dir(), "white noise");
  run_if_stale(load_speech_config(paths), paths.speech_dir(), "speech");
  std::cout << "[prepare] done" << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  Paths paths;
  paths.cache = "acceptance_cache";
  paths.configs = "configs";
  bool do_prepare = false;
  int only = 0;

  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--prepare") {
      do_prepare = true;
    } else if (arg == "--cache" && i + 1 < argc) {
      paths.cache = argv[++i];
    } else if (arg == "--configs" && i + 1 < argc) {
      paths.configs = argv[++i];
    } else if (arg == "--criterion" && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else {
      std::cerr << "usage: acceptance [--prepare] [--criterion N] "
                   "[--cache DIR] [--configs DIR]\n";
      return 2;
    }
  }

  try {
    if (do_prepare) {
      prepare(paths);
      return 0;
    }

    struct Criterion {
      int number;
      const char* title;
      Outcome (*run)(const Paths&);
    };
    static const Criterion criteria[] = {
        {1, "unit oracles", [](const Paths&) { return criterion_unit_oracles(); }},
        {2, "sparse-channel identification",
         [](const Paths&) { return criterion_identification(); }},
        {3, "convergence reproduction", criterion_convergence},
        {4, "correlation sign pattern", criterion_sign_pattern},
        {5, "ranging accuracy vs baseline", criterion_ranging},
        {6, "speech degradation", criterion_speech},
        {7, "feature importance ordering", criterion_importance},
        {8, "experiment determinism", criterion_determinism},
    };

    bool all_pass = true;
    for (const auto& c : criteria) {
      if (only != 0 && c.number != only) continue;
      Outcome out;
      try {
        out = c.run(paths);
      } catch (const std::exception& e) {
        out.pass = false;
        out.detail = std::string("exception: ") + e.what();
      }
      const char* tag = out.pass ? "PASS" : (out.soft ? "SOFT-FAIL" : "FAIL");
      std::cout << "[" << tag << "] criterion " << c.number << " (" << c.title
                << "): " << out.detail << std::endl;
      if (!out.pass && !out.soft) all_pass = false;
    }
    return all_pass ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "acceptance suite error: " << e.what() << std::endl;
    return 2;
  }
}
