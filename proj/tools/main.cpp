// relrange command line tool. Talks to the library exclusively through the
// C API in relrange.h.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "relrange.h"

namespace {

[[noreturn]] void die(const char* stage) {
  std::fprintf(stderr, "error (%s): %s\n", stage, rr_last_error());
  std::exit(1);
}

void check(rr_status status, const char* stage) {
  if (status != RR_OK) die(stage);
}

std::vector<double> parse_triple(const std::string& text, const char* what) {
  std::vector<double> out;
  std::string item;
  for (char c : text + ",") {
    if (c == ',') {
      out.push_back(std::atof(item.c_str()));
      item.clear();
    } else {
      item += c;
    }
  }
  if (out.size() != 3) {
    std::fprintf(stderr, "error: %s must be three comma-separated numbers\n", what);
    std::exit(1);
  }
  return out;
}

// "4.5:0.3,0.1" -> {duration 4.5 at mu 0.3, then mu 0.1 to the end}.
std::vector<rr_sched_segment> parse_schedule(const std::string& text) {
  std::vector<rr_sched_segment> segments;
  std::string item;
  for (char c : text + ",") {
    if (c != ',') {
      item += c;
      continue;
    }
    rr_sched_segment seg{0.0, 0.0};
    const auto colon = item.find(':');
    if (colon == std::string::npos) {
      seg.mu = std::atof(item.c_str());
    } else {
      seg.duration_s = std::atof(item.substr(0, colon).c_str());
      seg.mu = std::atof(item.substr(colon + 1).c_str());
    }
    segments.push_back(seg);
    item.clear();
  }
  if (segments.empty()) {
    std::fprintf(stderr, "error: empty step-size schedule\n");
    std::exit(1);
  }
  return segments;
}

rr_room named_room(const std::string& name, int fs) {
  rr_room room{};
  room.sample_rate = fs;
  room.speed_of_sound = 343.0;
  if (name == "small") {
    room.lx = 5.0;
    room.ly = 3.5;
    room.lz = 2.5;
    room.t60_s = 0.5;
  } else if (name == "medium") {
    room.lx = 7.0;
    room.ly = 4.5;
    room.lz = 2.5;
    room.t60_s = 0.7;
  } else if (name == "large") {
    room.lx = 8.0;
    room.ly = 6.5;
    room.lz = 2.5;
    room.t60_s = 0.9;
  } else {
    std::fprintf(stderr, "error: unknown room preset '%s'\n", name.c_str());
    std::exit(1);
  }
  return room;
}

struct SignalHandle {
  rr_signal* ptr = nullptr;
  ~SignalHandle() { rr_signal_free(ptr); }
};

struct IrHandle {
  rr_ir* ptr = nullptr;
  ~IrHandle() { rr_ir_free(ptr); }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{std::string("relrange ") + rr_version() +
               " - acoustic inter-device ranging toolkit"};
  app.require_subcommand(1);

  // ---- simulate ----------------------------------------------------------
  auto* sim = app.add_subcommand("simulate", "Render a room impulse response WAV");
  std::string sim_room = "small", sim_dims, sim_src = "1.0,1.0,1.5",
              sim_mic = "3.0,2.0,1.5", sim_out;
  double sim_t60 = 0.0;
  int sim_fs = 16000, sim_order = -1;
  sim->add_option("--room", sim_room, "Room preset: small, medium or large");
  sim->add_option("--dims", sim_dims, "Custom dimensions lx,ly,lz (meters)");
  sim->add_option("--t60", sim_t60, "Target T60 for custom dimensions (s)");
  sim->add_option("--src", sim_src, "Source position x,y,z");
  sim->add_option("--mic", sim_mic, "Microphone position x,y,z");
  sim->add_option("--fs", sim_fs, "Sample rate (Hz)");
  sim->add_option("--max-order", sim_order, "Reflection order bound (-1 = auto)");
  sim->add_option("--out", sim_out, "Output WAV path")->required();

  // ---- estimate ----------------------------------------------------------
  auto* est = app.add_subcommand(
      "estimate", "Identify the relative RIR between two recordings (IPNLMS)");
  std::string est_near, est_far, est_out, est_trace, est_truth,
      est_schedule = "4.5:0.3,0.1";
  std::size_t est_len = 20000, est_block = 1600;
  double est_alpha = 0.0;
  bool est_float32 = false;
  est->add_option("--near", est_near, "Near (smart speaker) WAV")->required();
  est->add_option("--far", est_far, "Far (wearable) WAV")->required();
  est->add_option("--L", est_len, "Filter length (taps)");
  est->add_option("--alpha", est_alpha, "Proportionality control in [-1, 1]");
  est->add_option("--schedule", est_schedule,
                  "Step sizes, e.g. 4.5:0.3,0.1 (duration:mu,... last to end)");
  est->add_option("--trace", est_trace, "Write the convergence trace CSV here");
  est->add_option("--truth", est_truth,
                  "Ground-truth relative RIR WAV (enables the NPM trace)");
  est->add_option("--block", est_block, "Trace block size (samples)");
  est->add_flag("--float32", est_float32, "Single-precision inner loops");
  est->add_option("--out", est_out, "Output relative RIR WAV")->required();

  // ---- features ----------------------------------------------------------
  auto* feat = app.add_subcommand(
      "features", "Extract the five ranging features from a relative RIR");
  std::string feat_ir, feat_near, feat_far;
  double feat_distance = -1.0;
  feat->add_option("--ir", feat_ir, "Relative RIR WAV")->required();
  feat->add_option("--near", feat_near, "Near recording WAV")->required();
  feat->add_option("--far", feat_far, "Far recording WAV")->required();
  feat->add_option("--distance", feat_distance,
                   "Ground-truth distance label (m), omitted if unknown");

  // ---- dataset -----------------------------------------------------------
  auto* ds = app.add_subcommand("dataset",
                                "Generate the feature dataset for one room");
  std::string ds_config, ds_room, ds_out;
  std::int64_t ds_seed = -1;
  ds->add_option("--config", ds_config, "Experiment config JSON")->required();
  ds->add_option("--room", ds_room, "Room name from the config")->required();
  ds->add_option("--out", ds_out, "Output CSV path")->required();
  ds->add_option("--seed", ds_seed, "Override the config seed");

  // ---- train -------------------------------------------------------------
  auto* tr = app.add_subcommand("train", "Train the distance regressor");
  std::string tr_data, tr_val, tr_params, tr_out;
  std::uint64_t tr_seed = 0;
  tr->add_option("--data", tr_data, "Training CSV")->required();
  tr->add_option("--val", tr_val, "Validation CSV (default: 90/10 split)");
  tr->add_option("--params", tr_params,
                 "JSON object pinning hyperparameters (skips the grid search)");
  tr->add_option("--seed", tr_seed, "Training seed");
  tr->add_option("--out", tr_out, "Output model JSON")->required();

  // ---- evaluate ----------------------------------------------------------
  auto* ev = app.add_subcommand("evaluate", "Score a model on a labelled CSV");
  std::string ev_model, ev_data;
  ev->add_option("--model", ev_model, "Model JSON")->required();
  ev->add_option("--data", ev_data, "Dataset CSV")->required();

  // ---- baseline ----------------------------------------------------------
  auto* bl = app.add_subcommand("baseline",
                                "GCC-PHAT time-of-flight distance estimate");
  std::string bl_near, bl_far;
  double bl_window = 0.3, bl_c = 343.0, bl_max_delay = 0.0;
  bl->add_option("--near", bl_near, "Near recording WAV")->required();
  bl->add_option("--far", bl_far, "Far recording WAV")->required();
  bl->add_option("--window", bl_window, "Frame length (s)");
  bl->add_option("--c", bl_c, "Speed of sound (m/s)");
  bl->add_option("--max-delay", bl_max_delay, "Delay search bound (s, 0 = auto)");

  // ---- experiment --------------------------------------------------------
  auto* ex = app.add_subcommand("experiment", "Run the full ranging benchmark");
  std::string ex_config, ex_out;
  std::int64_t ex_seed = -1;
  ex->add_option("--config", ex_config, "Experiment config JSON")->required();
  ex->add_option("--out", ex_out, "Output directory")->required();
  ex->add_option("--seed", ex_seed, "Override the config seed");

  // ---- plotdata ----------------------------------------------------------
  auto* pd = app.add_subcommand("plotdata", "Export per-figure CSV tables");
  std::string pd_report, pd_out;
  pd->add_option("--report", pd_report, "report.json from an experiment")->required();
  pd->add_option("--out", pd_out, "Output directory")->required();

  // ---- corpus ------------------------------------------------------------
  auto* co = app.add_subcommand("corpus",
                                "Generate a synthetic speech corpus directory");
  std::string co_out;
  int co_count = 48, co_fs = 16000;
  double co_duration = 16.0;
  std::uint64_t co_seed = 0;
  co->add_option("--out", co_out, "Output directory")->required();
  co->add_option("--count", co_count, "Number of utterances");
  co->add_option("--duration", co_duration, "Raw utterance length (s)");
  co->add_option("--fs", co_fs, "Sample rate (Hz)");
  co->add_option("--seed", co_seed, "Corpus seed");

  CLI11_PARSE(app, argc, argv);

  if (*sim) {
    rr_room room;
    if (!sim_dims.empty()) {
      const auto dims = parse_triple(sim_dims, "--dims");
      room = rr_room{dims[0], dims[1], dims[2], sim_t60, sim_fs, 343.0};
      if (sim_t60 <= 0.0) {
        std::fprintf(stderr, "error: custom --dims needs --t60\n");
        return 1;
      }
    } else {
      room = named_room(sim_room, sim_fs);
    }
    const auto src = parse_triple(sim_src, "--src");
    const auto mic = parse_triple(sim_mic, "--mic");
    IrHandle ir;
    check(rr_simulate_rir(&room, src.data(), mic.data(), sim_order, &ir.ptr),
          "simulate");
    check(rr_ir_write_wav(sim_out.c_str(), ir.ptr), "simulate/write");
    size_t n = 0;
    const double* taps = nullptr;
    rr_ir_taps(ir.ptr, &taps, &n);
    std::printf("wrote %s (%zu taps at %d Hz)\n", sim_out.c_str(), n, sim_fs);
    return 0;
  }

  if (*est) {
    SignalHandle near_sig, far_sig;
    check(rr_signal_read_wav(est_near.c_str(), &near_sig.ptr), "estimate/near");
    check(rr_signal_read_wav(est_far.c_str(), &far_sig.ptr), "estimate/far");
    IrHandle truth;
    if (!est_truth.empty())
      check(rr_ir_read_wav(est_truth.c_str(), &truth.ptr), "estimate/truth");
    const auto schedule = parse_schedule(est_schedule);
    IrHandle h;
    rr_trace* trace = nullptr;
    check(rr_ipnlms_run(near_sig.ptr, far_sig.ptr, est_len, est_alpha,
                        schedule.data(), schedule.size(), est_block,
                        est_float32 ? 1 : 0, truth.ptr, &h.ptr, &trace),
          "estimate");
    check(rr_ir_write_wav(est_out.c_str(), h.ptr), "estimate/write");
    if (!est_trace.empty())
      check(rr_trace_write_csv(trace, est_trace.c_str()), "estimate/trace");
    if (truth.ptr != nullptr) {
      double npm_db = 0.0;
      if (rr_trace_final_npm(trace, &npm_db) == RR_OK)
        std::printf("final NPM: %.2f dB\n", npm_db);
    }
    std::printf("wrote %s (%zu taps)\n", est_out.c_str(), est_len);
    rr_trace_free(trace);
    return 0;
  }

  if (*feat) {
    IrHandle ir;
    SignalHandle near_sig, far_sig;
    check(rr_ir_read_wav(feat_ir.c_str(), &ir.ptr), "features/ir");
    check(rr_signal_read_wav(feat_near.c_str(), &near_sig.ptr), "features/near");
    check(rr_signal_read_wav(feat_far.c_str(), &far_sig.ptr), "features/far");
    rr_features row;
    check(rr_extract_features(ir.ptr, near_sig.ptr, far_sig.ptr, &row), "features");
    if (feat_distance > 0.0) row.distance_m = feat_distance;
    std::printf("c50_db,drr_db,t60_s,srr_db,sparseness,distance_m,flags\n");
    std::printf("%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%s\n", row.c50_db, row.drr_db,
                row.t60_s, row.srr_db, row.sparseness, row.distance_m,
                row.t60_fallback ? "t60_fallback" : "");
    return 0;
  }

  if (*ds) {
    check(rr_generate_dataset(ds_config.c_str(), ds_room.c_str(), ds_out.c_str(),
                              ds_seed),
          "dataset");
    std::printf("wrote %s\n", ds_out.c_str());
    return 0;
  }

  if (*tr) {
    rr_dataset* train_ds = nullptr;
    rr_dataset* val_ds = nullptr;
    check(rr_dataset_read_csv(tr_data.c_str(), &train_ds), "train/data");
    if (!tr_val.empty())
      check(rr_dataset_read_csv(tr_val.c_str(), &val_ds), "train/val");
    rr_model* model = nullptr;
    const rr_status status = rr_gbdt_train(
        train_ds, val_ds, tr_params.empty() ? nullptr : tr_params.c_str(),
        tr_seed, &model);
    rr_dataset_free(train_ds);
    rr_dataset_free(val_ds);
    check(status, "train");
    check(rr_model_save(model, tr_out.c_str()), "train/save");
    rr_model_free(model);
    std::printf("wrote %s\n", tr_out.c_str());
    return 0;
  }

  if (*ev) {
    rr_model* model = nullptr;
    rr_dataset* data = nullptr;
    check(rr_model_load(ev_model.c_str(), &model), "evaluate/model");
    check(rr_dataset_read_csv(ev_data.c_str(), &data), "evaluate/data");
    double re = 0.0, mse = 0.0;
    const rr_status status = rr_model_evaluate(model, data, &re, &mse);
    size_t n = 0;
    rr_dataset_size(data, &n);
    rr_model_free(model);
    rr_dataset_free(data);
    check(status, "evaluate");
    std::printf("{\"n_rows\": %zu, \"re_mean_pct\": %.6f, \"mse\": %.9f}\n", n, re, mse);
    return 0;
  }

  if (*bl) {
    SignalHandle near_sig, far_sig;
    check(rr_signal_read_wav(bl_near.c_str(), &near_sig.ptr), "baseline/near");
    check(rr_signal_read_wav(bl_far.c_str(), &far_sig.ptr), "baseline/far");
    rr_tof tof;
    check(rr_tof_distance(near_sig.ptr, far_sig.ptr, bl_window, bl_c, bl_max_delay,
                          &tof),
          "baseline");
    std::printf("%.4f\n", tof.distance_m);
    std::fprintf(stderr, "frames used: %d of %d\n", tof.frames_used,
                 tof.frames_total);
    return 0;
  }

  if (*ex) {
    check(rr_run_experiment(ex_config.c_str(), ex_out.c_str(), ex_seed), "experiment");
    std::printf("wrote %s/report.json\n", ex_out.c_str());
    return 0;
  }

  if (*pd) {
    check(rr_write_plotdata(pd_report.c_str(), pd_out.c_str()), "plotdata");
    std::printf("wrote plot tables to %s\n", pd_out.c_str());
    return 0;
  }

  if (*co) {
    check(rr_write_speech_corpus(co_out.c_str(), co_count, co_duration, co_fs, co_seed),
          "corpus");
    std::printf("wrote %d utterances to %s\n", co_count, co_out.c_str());
    return 0;
  }

  return 0;
}
