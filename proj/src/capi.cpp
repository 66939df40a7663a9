#include "relrange.h"

#include <cmath>
#include <cstring>
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
#include "rng.hpp"
#include "room.hpp"
#include "signal.hpp"
#include "wav.hpp"

using namespace relrange;

struct rr_signal {
  Signal value;
};
struct rr_ir {
  ImpulseResponse value;
};
struct rr_ipnlms {
  AdaptiveFilterState value;
};
struct rr_trace {
  ConvergenceTrace value;
};
struct rr_dataset {
  std::vector<FeatureRow> rows;
};
struct rr_model {
  GbdtModel value;
};

namespace {

thread_local std::string g_last_error;

rr_status to_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return RR_ERR_INVALID_ARGUMENT;
    case ErrorCode::Io: return RR_ERR_IO;
    case ErrorCode::Numeric: return RR_ERR_NUMERIC;
    case ErrorCode::Unsupported: return RR_ERR_UNSUPPORTED;
    case ErrorCode::Internal: return RR_ERR_INTERNAL;
  }
  return RR_ERR_INTERNAL;
}

template <typename Fn>
rr_status guarded(Fn&& fn) {
  try {
    fn();
    return RR_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return RR_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return RR_ERR_INTERNAL;
  }
}

rr_status invalid(const char* msg) {
  g_last_error = msg;
  return RR_ERR_INVALID_ARGUMENT;
}

rr_features to_c(const FeatureRow& row) {
  rr_features out;
  out.c50_db = row.c50_db;
  out.drr_db = row.drr_db;
  out.t60_s = row.t60_s;
  out.srr_db = row.srr_db;
  out.sparseness = row.sparseness;
  out.distance_m = row.distance_m;
  out.t60_fallback = row.t60_fallback ? 1 : 0;
  return out;
}

FeatureRow from_c(const rr_features& row) {
  FeatureRow out;
  out.c50_db = row.c50_db;
  out.drr_db = row.drr_db;
  out.t60_s = row.t60_s;
  out.srr_db = row.srr_db;
  out.sparseness = row.sparseness;
  out.distance_m = row.distance_m;
  out.t60_fallback = row.t60_fallback != 0;
  return out;
}

RoomSpec from_c(const rr_room& room) {
  RoomSpec spec;
  spec.lx = room.lx;
  spec.ly = room.ly;
  spec.lz = room.lz;
  spec.t60 = room.t60_s;
  spec.sample_rate = room.sample_rate;
  spec.speed_of_sound = room.speed_of_sound > 0 ? room.speed_of_sound : 343.0;
  return spec;
}

}  // namespace

extern "C" {

const char* rr_version(void) {
  static const std::string version = version_string();
  return version.c_str();
}

const char* rr_last_error(void) { return g_last_error.c_str(); }

/* ---------------- signals ---------------- */

rr_status rr_signal_create(const double* samples, size_t n, int sample_rate,
                           rr_signal** out) {
  if (!samples || !out) return invalid("null pointer");
  return guarded([&] {
    require(sample_rate > 0, ErrorCode::InvalidArgument,
            "sample rate must be positive");
    for (size_t i = 0; i < n; ++i)
      require(std::isfinite(samples[i]), ErrorCode::InvalidArgument,
              "non-finite sample");
    auto* sig = new rr_signal;
    sig->value.samples.assign(samples, samples + n);
    sig->value.sample_rate = sample_rate;
    *out = sig;
  });
}

void rr_signal_free(rr_signal* sig) { delete sig; }

rr_status rr_signal_samples(const rr_signal* sig, const double** data, size_t* n) {
  if (!sig || !data || !n) return invalid("null pointer");
  *data = sig->value.samples.data();
  *n = sig->value.samples.size();
  return RR_OK;
}

rr_status rr_signal_sample_rate(const rr_signal* sig, int* rate) {
  if (!sig || !rate) return invalid("null pointer");
  *rate = sig->value.sample_rate;
  return RR_OK;
}

rr_status rr_signal_read_wav(const char* path, rr_signal** out) {
  if (!path || !out) return invalid("null pointer");
  return guarded([&] { *out = new rr_signal{read_wav(path)}; });
}

rr_status rr_signal_write_wav(const char* path, const rr_signal* sig) {
  if (!path || !sig) return invalid("null pointer");
  return guarded([&] { write_wav(path, sig->value); });
}

rr_status rr_white_noise(size_t n_samples, int sample_rate, uint64_t seed,
                         rr_signal** out) {
  if (!out) return invalid("null pointer");
  return guarded([&] { *out = new rr_signal{white_noise(n_samples, sample_rate, seed)}; });
}

rr_status rr_mix_at_snr(const rr_signal* clean, double snr_db, uint64_t seed,
                        rr_signal** out) {
  if (!clean || !out) return invalid("null pointer");
  return guarded([&] { *out = new rr_signal{mix_at_snr(clean->value, snr_db, seed)}; });
}

rr_status rr_energy_vad_concat(const rr_signal* speech, double frame_ms,
                               double threshold_db, rr_signal** out) {
  if (!speech || !out) return invalid("null pointer");
  return guarded([&] {
    *out = new rr_signal{energy_vad_concat(speech->value, frame_ms, threshold_db)};
  });
}

rr_status rr_speech_like(double duration_s, int sample_rate, uint64_t seed,
                         rr_signal** out) {
  if (!out) return invalid("null pointer");
  return guarded([&] { *out = new rr_signal{speech_like(duration_s, sample_rate, seed)}; });
}

/* ---------------- rooms / impulse responses ---------------- */

rr_status rr_ir_create(const double* taps, size_t n, int sample_rate, rr_ir** out) {
  if (!taps || !out) return invalid("null pointer");
  return guarded([&] {
    require(n > 0, ErrorCode::InvalidArgument, "impulse response must be non-empty");
    require(sample_rate > 0, ErrorCode::InvalidArgument,
            "sample rate must be positive");
    auto* ir = new rr_ir;
    ir->value.taps.assign(taps, taps + n);
    ir->value.sample_rate = sample_rate;
    *out = ir;
  });
}

void rr_ir_free(rr_ir* ir) { delete ir; }

rr_status rr_ir_taps(const rr_ir* ir, const double** taps, size_t* n) {
  if (!ir || !taps || !n) return invalid("null pointer");
  *taps = ir->value.taps.data();
  *n = ir->value.taps.size();
  return RR_OK;
}

rr_status rr_ir_sample_rate(const rr_ir* ir, int* rate) {
  if (!ir || !rate) return invalid("null pointer");
  *rate = ir->value.sample_rate;
  return RR_OK;
}

rr_status rr_ir_read_wav(const char* path, rr_ir** out) {
  if (!path || !out) return invalid("null pointer");
  return guarded([&] {
    const Signal sig = read_wav(path);
    auto* ir = new rr_ir;
    ir->value.taps = sig.samples;
    ir->value.sample_rate = sig.sample_rate;
    *out = ir;
  });
}

rr_status rr_ir_write_wav(const char* path, const rr_ir* ir) {
  if (!path || !ir) return invalid("null pointer");
  return guarded([&] {
    Signal sig;
    sig.samples = ir->value.taps;
    sig.sample_rate = ir->value.sample_rate;
    write_wav(path, sig);
  });
}

rr_status rr_sabine_absorption(const rr_room* room, double* alpha) {
  if (!room || !alpha) return invalid("null pointer");
  return guarded([&] { *alpha = sabine_absorption(from_c(*room)); });
}

rr_status rr_default_max_order(const rr_room* room, int* order) {
  if (!room || !order) return invalid("null pointer");
  return guarded([&] {
    const RoomSpec spec = from_c(*room);
    validate_room(spec);
    *order = default_max_order(spec);
  });
}

rr_status rr_simulate_rir(const rr_room* room, const double src[3],
                          const double mic[3], int max_order, rr_ir** out) {
  if (!room || !src || !mic || !out) return invalid("null pointer");
  return guarded([&] {
    *out = new rr_ir{simulate_rir(from_c(*room), Vec3{src[0], src[1], src[2]},
                                  Vec3{mic[0], mic[1], mic[2]}, max_order)};
  });
}

rr_status rr_random_placement(const rr_room* room, const double speaker_pos[3],
                              uint64_t seed, double min_dist, double max_dist,
                              double src_out[3], double mic_close_out[3],
                              double mic_far_out[3]) {
  if (!room || !speaker_pos || !src_out || !mic_close_out || !mic_far_out)
    return invalid("null pointer");
  return guarded([&] {
    const ScenePlacement p = random_placement(
        from_c(*room), Vec3{speaker_pos[0], speaker_pos[1], speaker_pos[2]}, seed,
        min_dist, max_dist);
    src_out[0] = p.source.x;
    src_out[1] = p.source.y;
    src_out[2] = p.source.z;
    mic_close_out[0] = p.mic_close.x;
    mic_close_out[1] = p.mic_close.y;
    mic_close_out[2] = p.mic_close.z;
    mic_far_out[0] = p.mic_far.x;
    mic_far_out[1] = p.mic_far.y;
    mic_far_out[2] = p.mic_far.z;
  });
}

rr_status rr_convolve(const rr_signal* x, const rr_ir* ir, rr_signal** out) {
  if (!x || !ir || !out) return invalid("null pointer");
  return guarded([&] {
    *out = new rr_signal{convolve(x->value, ir->value.taps, ir->value.sample_rate)};
  });
}

/* ---------------- relative RIR ---------------- */

rr_status rr_ipnlms_create(size_t filter_length, double alpha, double delta,
                           double epsilon, rr_ipnlms** out) {
  if (!out) return invalid("null pointer");
  return guarded([&] {
    *out = new rr_ipnlms{ipnlms_init(filter_length, alpha,
                                     delta > 0 ? delta : kDefaultDelta,
                                     epsilon > 0 ? epsilon : kDefaultEpsilon)};
  });
}

void rr_ipnlms_free(rr_ipnlms* state) { delete state; }

rr_status rr_ipnlms_step(rr_ipnlms* state, double x_n, double y_n, double mu,
                         double* error_out) {
  if (!state || !error_out) return invalid("null pointer");
  return guarded([&] { *error_out = ipnlms_step(state->value, x_n, y_n, mu); });
}

rr_status rr_ipnlms_taps(const rr_ipnlms* state, const double** taps, size_t* n) {
  if (!state || !taps || !n) return invalid("null pointer");
  *taps = state->value.taps.data();
  *n = state->value.taps.size();
  return RR_OK;
}

rr_status rr_ipnlms_run(const rr_signal* x, const rr_signal* y,
                        size_t filter_length, double alpha,
                        const rr_sched_segment* schedule, size_t n_segments,
                        size_t trace_block, int use_float32, const rr_ir* truth,
                        rr_ir** h_out, rr_trace** trace_out) {
  if (!x || !y || !schedule || !h_out) return invalid("null pointer");
  if (n_segments == 0) return invalid("schedule must have at least one segment");
  return guarded([&] {
    IpnlmsOptions opts;
    opts.filter_length = filter_length;
    opts.alpha = alpha;
    for (size_t i = 0; i < n_segments; ++i)
      opts.schedule.segments.push_back({schedule[i].duration_s, schedule[i].mu});
    opts.trace_block = trace_block > 0 ? trace_block : 1600;
    opts.use_float32 = use_float32 != 0;
    opts.truth = truth ? &truth->value : nullptr;
    auto [h, trace] = ipnlms_run(x->value, y->value, opts);
    *h_out = new rr_ir{std::move(h)};
    if (trace_out) *trace_out = new rr_trace{std::move(trace)};
  });
}

void rr_trace_free(rr_trace* trace) { delete trace; }

rr_status rr_trace_size(const rr_trace* trace, size_t* n_blocks) {
  if (!trace || !n_blocks) return invalid("null pointer");
  *n_blocks = trace->value.error_power_db.size();
  return RR_OK;
}

rr_status rr_trace_final_npm(const rr_trace* trace, double* npm_db) {
  if (!trace || !npm_db) return invalid("null pointer");
  if (trace->value.npm_db.empty())
    return invalid("trace has no NPM data (no ground truth supplied)");
  *npm_db = trace->value.npm_db.back();
  return RR_OK;
}

rr_status rr_trace_write_csv(const rr_trace* trace, const char* path) {
  if (!trace || !path) return invalid("null pointer");
  return guarded([&] { write_trace_csv(trace->value, path); });
}

rr_status rr_ground_truth_relative_rir(const rr_ir* rir_close, const rr_ir* rir_far,
                                       size_t out_len, rr_ir** out,
                                       int* modeling_delay_out) {
  if (!rir_close || !rir_far || !out) return invalid("null pointer");
  return guarded([&] {
    RelativeRir rel = ground_truth_relative_rir(rir_close->value, rir_far->value, out_len);
    if (modeling_delay_out) *modeling_delay_out = rel.modeling_delay;
    *out = new rr_ir{std::move(rel.ir)};
  });
}

rr_status rr_npm(const rr_ir* h_true, const rr_ir* h_est, double* npm_db) {
  if (!h_true || !h_est || !npm_db) return invalid("null pointer");
  return guarded([&] { *npm_db = npm(h_true->value, h_est->value); });
}

/* ---------------- features ---------------- */

rr_status rr_clarity_c50(const rr_ir* h, double* c50_db) {
  if (!h || !c50_db) return invalid("null pointer");
  return guarded([&] { *c50_db = clarity_c50(h->value); });
}

rr_status rr_drr(const rr_ir* h, double* drr_db) {
  if (!h || !drr_db) return invalid("null pointer");
  return guarded([&] { *drr_db = drr(h->value); });
}

rr_status rr_sparseness(const rr_ir* h, double* s) {
  if (!h || !s) return invalid("null pointer");
  return guarded([&] { *s = sparseness(h->value); });
}

rr_status rr_srr(const rr_signal* x, const rr_signal* y, double* srr_db) {
  if (!x || !y || !srr_db) return invalid("null pointer");
  return guarded([&] { *srr_db = srr(x->value, y->value); });
}

rr_status rr_energy_decay_curve(const rr_ir* h, double** edc_db, size_t* n) {
  if (!h || !edc_db || !n) return invalid("null pointer");
  return guarded([&] {
    const std::vector<double> edc = energy_decay_curve(h->value);
    auto* buf = new double[edc.size()];
    std::memcpy(buf, edc.data(), edc.size() * sizeof(double));
    *edc_db = buf;
    *n = edc.size();
  });
}

void rr_buffer_free(double* buffer) { delete[] buffer; }

rr_status rr_t60_from_edc(const double* edc_db, size_t n, int sample_rate,
                          double* t60_s) {
  if (!edc_db || !t60_s) return invalid("null pointer");
  return guarded([&] {
    *t60_s = t60_from_edc(std::vector<double>(edc_db, edc_db + n), sample_rate);
  });
}

rr_status rr_extract_features(const rr_ir* h_hat, const rr_signal* x,
                              const rr_signal* y, rr_features* out) {
  if (!h_hat || !x || !y || !out) return invalid("null pointer");
  return guarded([&] { *out = to_c(extract_features(h_hat->value, x->value, y->value)); });
}

/* ---------------- regression ---------------- */

rr_status rr_dataset_read_csv(const char* path, rr_dataset** out) {
  if (!path || !out) return invalid("null pointer");
  return guarded([&] { *out = new rr_dataset{read_feature_csv(path)}; });
}

void rr_dataset_free(rr_dataset* ds) { delete ds; }

rr_status rr_dataset_size(const rr_dataset* ds, size_t* n) {
  if (!ds || !n) return invalid("null pointer");
  *n = ds->rows.size();
  return RR_OK;
}

rr_status rr_dataset_row(const rr_dataset* ds, size_t index, rr_features* out) {
  if (!ds || !out) return invalid("null pointer");
  if (index >= ds->rows.size()) return invalid("dataset row index out of range");
  *out = to_c(ds->rows[index]);
  return RR_OK;
}

rr_status rr_gbdt_train(const rr_dataset* train, const rr_dataset* val,
                        const char* grid_json, uint64_t seed, rr_model** out) {
  if (!train || !out) return invalid("null pointer");
  return guarded([&] {
    std::vector<FeatureRow> train_rows;
    std::vector<FeatureRow> val_rows;
    if (val != nullptr) {
      train_rows = train->rows;
      val_rows = val->rows;
    } else {
      // Deterministic 90/10 shuffle split.
      require(train->rows.size() >= 10, ErrorCode::InvalidArgument,
              "need at least 10 rows to auto-split");
      std::vector<int> order(train->rows.size());
      std::iota(order.begin(), order.end(), 0);
      auto rng = make_engine(seed);
      for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[static_cast<std::size_t>(rng() % i)]);
      const std::size_t n_val = std::max<std::size_t>(1, order.size() / 10);
      for (std::size_t i = 0; i < order.size(); ++i) {
        const FeatureRow& row = train->rows[static_cast<std::size_t>(order[i])];
        if (i < n_val)
          val_rows.push_back(row);
        else
          train_rows.push_back(row);
      }
    }

    bool pinned = false;
    TrainConfig pinned_cfg;
    TrainGrid grid;
    if (grid_json != nullptr && std::string(grid_json) != "{}" &&
        std::string(grid_json).find_first_not_of(" \t\n") != std::string::npos) {
      nlohmann::json doc;
      try {
        doc = nlohmann::json::parse(grid_json);
      } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::InvalidArgument,
             std::string("grid JSON parse error: ") + e.what());
      }
      if (!doc.empty()) {
        pinned = true;
        pinned_cfg.max_depth = doc.value("max_depth", 4);
        pinned_cfg.learning_rate = doc.value("learning_rate", 0.1);
        pinned_cfg.min_samples_leaf = doc.value("min_samples_leaf", 5);
        pinned_cfg.subsample = doc.value("subsample", 1.0);
        pinned_cfg.max_rounds = doc.value("max_rounds", 500);
        pinned_cfg.early_stop_patience = doc.value("early_stop_patience", 5);
        pinned_cfg.seed = seed;
      }
    }
    GbdtModel model;
    if (pinned) {
      model = gbdt_train(train_rows, val_rows, pinned_cfg);
    } else {
      const GridResult best = grid_search(train_rows, val_rows, grid, seed);
      model = gbdt_train(train_rows, val_rows, best.best);
    }
    *out = new rr_model{std::move(model)};
  });
}

void rr_model_free(rr_model* model) { delete model; }

rr_status rr_model_save(const rr_model* model, const char* path) {
  if (!model || !path) return invalid("null pointer");
  return guarded([&] { save_model(model->value, path); });
}

rr_status rr_model_load(const char* path, rr_model** out) {
  if (!path || !out) return invalid("null pointer");
  return guarded([&] { *out = new rr_model{load_model(path)}; });
}

rr_status rr_model_predict(const rr_model* model, const rr_features* row,
                           double* distance_m) {
  if (!model || !row || !distance_m) return invalid("null pointer");
  return guarded([&] { *distance_m = gbdt_predict(model->value, from_c(*row)); });
}

rr_status rr_model_evaluate(const rr_model* model, const rr_dataset* ds,
                            double* re_mean_pct, double* mse) {
  if (!model || !ds || !re_mean_pct || !mse) return invalid("null pointer");
  return guarded([&] {
    require(!ds->rows.empty(), ErrorCode::InvalidArgument, "empty dataset");
    double re_sum = 0.0;
    for (const auto& row : ds->rows)
      re_sum += relative_error(row.distance_m, gbdt_predict(model->value, row));
    *re_mean_pct = re_sum / static_cast<double>(ds->rows.size());
    *mse = gbdt_mse(model->value, ds->rows);
  });
}

rr_status rr_permutation_importance(const rr_model* model, const rr_dataset* test,
                                    int n_repeats, uint64_t seed,
                                    double delta_mse_out[5]) {
  if (!model || !test || !delta_mse_out) return invalid("null pointer");
  return guarded([&] {
    const auto ranked =
        permutation_importance(model->value, test->rows, n_repeats, seed);
    for (const auto& [feature, delta] : ranked)
      delta_mse_out[feature] = delta;
  });
}

rr_status rr_welch_ttest(const double* sample_a, size_t na, const double* sample_b,
                         size_t nb, double* t, double* p) {
  if (!sample_a || !sample_b || !t || !p) return invalid("null pointer");
  return guarded([&] {
    const TTestResult r = welch_ttest(std::vector<double>(sample_a, sample_a + na),
                                      std::vector<double>(sample_b, sample_b + nb));
    *t = r.t;
    *p = r.p;
  });
}

rr_status rr_relative_error(double d_tar, double d_pred, double* pct) {
  if (!pct) return invalid("null pointer");
  return guarded([&] { *pct = relative_error(d_tar, d_pred); });
}

/* ---------------- baseline ---------------- */

rr_status rr_gcc_phat_delay(const rr_signal* frame_x, const rr_signal* frame_y,
                            double max_delay_s, double* delay_s) {
  if (!frame_x || !frame_y || !delay_s) return invalid("null pointer");
  rr_status status = guarded([&] {
    const auto delay = gcc_phat_delay(frame_x->value, frame_y->value, max_delay_s);
    if (!delay) {
      g_last_error = "silent frame rejected";
      throw Error(ErrorCode::Numeric, g_last_error);
    }
    *delay_s = *delay;
  });
  if (status == RR_ERR_NUMERIC && g_last_error == "silent frame rejected")
    return RR_ERR_SILENT_FRAME;
  return status;
}

rr_status rr_tof_distance(const rr_signal* x, const rr_signal* y, double window_s,
                          double speed_of_sound, double max_delay_s, rr_tof* out) {
  if (!x || !y || !out) return invalid("null pointer");
  return guarded([&] {
    const TofEstimate est =
        tof_distance(x->value, y->value, window_s > 0 ? window_s : kTofWindowS,
                     speed_of_sound > 0 ? speed_of_sound : 343.0, max_delay_s);
    out->distance_m = est.distance_m;
    out->frames_used = est.frames_used;
    out->frames_total = est.frames_total;
  });
}

/* ---------------- harness ---------------- */

rr_status rr_generate_dataset(const char* config_path, const char* room_name,
                              const char* out_csv, int64_t seed_override) {
  if (!config_path || !room_name || !out_csv) return invalid("null pointer");
  return guarded([&] {
    ExperimentConfig cfg = load_config(config_path);
    if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
    for (std::size_t i = 0; i < cfg.rooms.size(); ++i) {
      if (cfg.rooms[i].name == room_name) {
        const std::uint64_t seed = derive_seed(room_seed(cfg, i), 0xDA7A);
        generate_dataset(cfg.rooms[i].room, cfg, seed, out_csv);
        return;
      }
    }
    fail(ErrorCode::InvalidArgument,
         std::string("room not found in config: ") + room_name);
  });
}

rr_status rr_run_experiment(const char* config_path, const char* out_dir,
                            int64_t seed_override) {
  if (!config_path || !out_dir) return invalid("null pointer");
  return guarded([&] {
    ExperimentConfig cfg = load_config(config_path);
    if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
    run_experiment(cfg, out_dir);
  });
}

rr_status rr_write_plotdata(const char* report_path, const char* out_dir) {
  if (!report_path || !out_dir) return invalid("null pointer");
  return guarded([&] { write_plotdata(report_path, out_dir); });
}

rr_status rr_write_speech_corpus(const char* dir, int count, double duration_s,
                                 int sample_rate, uint64_t seed) {
  if (!dir) return invalid("null pointer");
  return guarded([&] {
    write_speech_corpus(dir, count, duration_s, sample_rate, seed);
  });
}

}  // extern "C"
