#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>

#include <nlohmann/json.hpp>

#include "baseline.hpp"
#include "errors.hpp"
#include "harness.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "wav.hpp"

namespace relrange {

using json = nlohmann::json;
namespace fs = std::filesystem;

std::string version_string() { return "0.1.0"; }

void validate_experiment_config(const ExperimentConfig& cfg) {
  require(!cfg.rooms.empty(), ErrorCode::InvalidArgument,
          "config: at least one room required");
  for (const auto& nr : cfg.rooms) {
    require(!nr.name.empty(), ErrorCode::InvalidArgument, "config: room without name");
    validate_room(nr.room);
  }
  require(cfg.n_positions >= 10, ErrorCode::InvalidArgument,
          "config: n_positions must be >= 10");
  require(cfg.signal_duration_s > 0, ErrorCode::InvalidArgument,
          "config: signal duration must be positive");
  require(cfg.sample_rate > 0, ErrorCode::InvalidArgument,
          "config: sample rate must be positive");
  const double split_sum = cfg.split[0] + cfg.split[1] + cfg.split[2];
  require(std::abs(split_sum - 1.0) < 1e-9, ErrorCode::InvalidArgument,
          "config: split fractions must sum to 1");
  for (double s : cfg.split)
    require(s > 0.0, ErrorCode::InvalidArgument,
            "config: split fractions must be positive");
  require(cfg.n_monte_carlo >= 1, ErrorCode::InvalidArgument,
          "config: n_monte_carlo must be >= 1");
  require(cfg.filter.alpha >= -1.0 && cfg.filter.alpha <= 1.0,
          ErrorCode::InvalidArgument, "config: filter alpha must lie in [-1, 1]");
  if (!cfg.filter.schedule.segments.empty()) validate_schedule(cfg.filter.schedule);
  if (cfg.excitation == Excitation::SpeechCorpus)
    require(!cfg.corpus_path.empty(), ErrorCode::InvalidArgument,
            "config: speech excitation requires a corpus path");
  require(cfg.min_distance >= 0, ErrorCode::InvalidArgument,
          "config: min distance must be non-negative");
}

std::size_t auto_filter_length(const RoomSpec& room) {
  // The specular image-source field decays ~1.4x slower than the Sabine
  // target, so the filter needs 1.1 * T60 of span for the decay-curve fit
  // band to stay reachable.
  const auto L = static_cast<std::size_t>(
      std::lround(1.1 * room.t60 * room.sample_rate));
  return std::max<std::size_t>(L, 1024);
}

StepSchedule auto_schedule(double signal_duration_s) {
  StepSchedule sched;
  sched.segments.push_back({0.45 * signal_duration_s, 0.3});
  sched.segments.push_back({0.0, 0.1});
  return sched;
}

double room_max_distance(const ExperimentConfig& cfg, const RoomSpec& room) {
  if (cfg.max_distance > 0.0) return cfg.max_distance;
  return room.diagonal() - 0.5;
}

std::uint64_t room_seed(const ExperimentConfig& cfg, std::size_t room_index) {
  return derive_seed(cfg.seed, 0xB00F + room_index);
}

namespace {

json schedule_to_json(const StepSchedule& sched) {
  json arr = json::array();
  for (const auto& seg : sched.segments)
    arr.push_back({{"duration_s", seg.duration_s}, {"mu", seg.mu}});
  return arr;
}

StepSchedule schedule_from_json(const json& arr) {
  StepSchedule sched;
  for (const auto& seg : arr)
    sched.segments.push_back(
        {seg.at("duration_s").get<double>(), seg.at("mu").get<double>()});
  return sched;
}

}  // namespace

std::string config_to_json(const ExperimentConfig& cfg) {
  json doc;
  doc["schema_version"] = 1;
  doc["seed"] = cfg.seed;
  doc["sample_rate"] = cfg.sample_rate;
  doc["speed_of_sound"] = cfg.speed_of_sound;
  json rooms = json::array();
  for (const auto& nr : cfg.rooms)
    rooms.push_back({{"name", nr.name},
                     {"dimensions", {nr.room.lx, nr.room.ly, nr.room.lz}},
                     {"t60_s", nr.room.t60}});
  doc["rooms"] = std::move(rooms);
  doc["n_positions"] = cfg.n_positions;
  if (cfg.excitation == Excitation::WhiteNoise) {
    doc["excitation"] = {{"type", "white_noise"}};
  } else {
    doc["excitation"] = {{"type", "speech_corpus"}, {"path", cfg.corpus_path}};
  }
  doc["signal_duration_s"] = cfg.signal_duration_s;
  doc["snr_db"] = cfg.snr_db;
  json filter = {{"L", cfg.filter.length},
                 {"alpha", cfg.filter.alpha},
                 {"delta", cfg.filter.delta},
                 {"epsilon", cfg.filter.epsilon},
                 {"precision", cfg.filter.use_float32 ? "float32" : "float64"}};
  if (!cfg.filter.schedule.segments.empty())
    filter["schedule"] = schedule_to_json(cfg.filter.schedule);
  doc["filter"] = std::move(filter);
  doc["split"] = cfg.split;
  doc["n_monte_carlo"] = cfg.n_monte_carlo;
  doc["speaker_position"] = {cfg.speaker_pos.x, cfg.speaker_pos.y, cfg.speaker_pos.z};
  doc["distance_range"] = {cfg.min_distance, cfg.max_distance};
  doc["grid"] = {{"max_depth", cfg.grid.max_depth},
                 {"learning_rate", cfg.grid.learning_rate},
                 {"min_samples_leaf", cfg.grid.min_samples_leaf},
                 {"subsample", cfg.grid.subsample},
                 {"max_rounds", cfg.grid.max_rounds},
                 {"early_stop_patience", cfg.grid.early_stop_patience}};
  doc["regenerate_per_rep"] = cfg.regenerate_per_rep;
  doc["importance_repeats"] = cfg.importance_repeats;
  return doc.dump(2);
}

ExperimentConfig config_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::Io, std::string("config JSON parse error: ") + e.what());
  }
  ExperimentConfig cfg;
  try {
    require(doc.value("schema_version", 1) == 1, ErrorCode::Unsupported,
            "unsupported config schema version");
    cfg.seed = doc.value("seed", std::uint64_t{0});
    cfg.sample_rate = doc.value("sample_rate", kDefaultSampleRate);
    cfg.speed_of_sound = doc.value("speed_of_sound", 343.0);
    for (const auto& jr : doc.at("rooms")) {
      NamedRoom nr;
      nr.name = jr.at("name").get<std::string>();
      const auto dims = jr.at("dimensions").get<std::vector<double>>();
      require(dims.size() == 3, ErrorCode::InvalidArgument,
              "config: room dimensions must be [lx, ly, lz]");
      nr.room.lx = dims[0];
      nr.room.ly = dims[1];
      nr.room.lz = dims[2];
      nr.room.t60 = jr.at("t60_s").get<double>();
      nr.room.sample_rate = cfg.sample_rate;
      nr.room.speed_of_sound = cfg.speed_of_sound;
      cfg.rooms.push_back(std::move(nr));
    }
    cfg.n_positions = doc.value("n_positions", 2000);
    if (doc.contains("excitation")) {
      const auto& ex = doc.at("excitation");
      const auto type = ex.at("type").get<std::string>();
      if (type == "white_noise") {
        cfg.excitation = Excitation::WhiteNoise;
      } else if (type == "speech_corpus") {
        cfg.excitation = Excitation::SpeechCorpus;
        cfg.corpus_path = ex.at("path").get<std::string>();
      } else {
        fail(ErrorCode::InvalidArgument, "config: unknown excitation type " + type);
      }
    }
    cfg.signal_duration_s = doc.value("signal_duration_s", 10.0);
    cfg.snr_db = doc.value("snr_db", 30.0);
    if (doc.contains("filter")) {
      const auto& jf = doc.at("filter");
      cfg.filter.length = jf.value("L", std::size_t{0});
      cfg.filter.alpha = jf.value("alpha", 0.0);
      cfg.filter.delta = jf.value("delta", kDefaultDelta);
      cfg.filter.epsilon = jf.value("epsilon", kDefaultEpsilon);
      cfg.filter.use_float32 = jf.value("precision", "float64") == std::string("float32");
      if (jf.contains("schedule"))
        cfg.filter.schedule = schedule_from_json(jf.at("schedule"));
    }
    if (doc.contains("split")) {
      const auto split = doc.at("split").get<std::vector<double>>();
      require(split.size() == 3, ErrorCode::InvalidArgument,
              "config: split must be [train, val, test]");
      std::copy(split.begin(), split.end(), cfg.split.begin());
    }
    cfg.n_monte_carlo = doc.value("n_monte_carlo", 10);
    if (doc.contains("speaker_position")) {
      const auto p = doc.at("speaker_position").get<std::vector<double>>();
      require(p.size() == 3, ErrorCode::InvalidArgument,
              "config: speaker_position must be [x, y, z]");
      cfg.speaker_pos = {p[0], p[1], p[2]};
    }
    if (doc.contains("distance_range")) {
      const auto r = doc.at("distance_range").get<std::vector<double>>();
      require(r.size() == 2, ErrorCode::InvalidArgument,
              "config: distance_range must be [min, max]");
      cfg.min_distance = r[0];
      cfg.max_distance = r[1];
    }
    if (doc.contains("grid")) {
      const auto& jg = doc.at("grid");
      if (jg.contains("max_depth"))
        cfg.grid.max_depth = jg.at("max_depth").get<std::vector<int>>();
      if (jg.contains("learning_rate"))
        cfg.grid.learning_rate = jg.at("learning_rate").get<std::vector<double>>();
      if (jg.contains("min_samples_leaf"))
        cfg.grid.min_samples_leaf = jg.at("min_samples_leaf").get<std::vector<int>>();
      if (jg.contains("subsample"))
        cfg.grid.subsample = jg.at("subsample").get<std::vector<double>>();
      cfg.grid.max_rounds = jg.value("max_rounds", 500);
      cfg.grid.early_stop_patience = jg.value("early_stop_patience", 5);
    }
    cfg.regenerate_per_rep = doc.value("regenerate_per_rep", false);
    cfg.importance_repeats = doc.value("importance_repeats", 10);
  } catch (const json::exception& e) {
    fail(ErrorCode::Io, std::string("config JSON missing field: ") + e.what());
  }
  validate_experiment_config(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::Io, "cannot open config: " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return config_from_json(text);
}

double relative_error(double d_tar, double d_pred) {
  require(d_tar > 0.0, ErrorCode::InvalidArgument,
          "relative_error: target distance must be positive");
  return std::abs(d_tar - d_pred) / d_tar * 100.0;
}

const char* const kCorrelationLabels[6] = {"t60_rel", "c50_rel", "drr_rel",
                                           "srr",     "sparseness", "distance"};

CorrelationMatrix correlation_matrix(const std::vector<FeatureRow>& rows) {
  require(rows.size() >= 3, ErrorCode::InvalidArgument,
          "correlation_matrix: need at least 3 rows");
  // Column order follows the published table: T60, C50, DRR, SRR, S, distance.
  std::array<std::vector<double>, 6> cols;
  for (auto& c : cols) c.reserve(rows.size());
  for (const auto& r : rows) {
    cols[0].push_back(r.t60_s);
    cols[1].push_back(r.c50_db);
    cols[2].push_back(r.drr_db);
    cols[3].push_back(r.srr_db);
    cols[4].push_back(r.sparseness);
    cols[5].push_back(r.distance_m);
  }
  std::array<double, 6> mean{}, sd{};
  const double n = static_cast<double>(rows.size());
  for (int c = 0; c < 6; ++c) {
    for (double v : cols[c]) mean[c] += v;
    mean[c] /= n;
    for (double v : cols[c]) sd[c] += (v - mean[c]) * (v - mean[c]);
    sd[c] = std::sqrt(sd[c]);
    require(sd[c] > 0.0, ErrorCode::InvalidArgument,
            std::string("correlation_matrix: constant column ") +
                kCorrelationLabels[c]);
  }
  CorrelationMatrix m{};
  for (int a = 0; a < 6; ++a) {
    for (int b = a; b < 6; ++b) {
      double cov = 0.0;
      for (std::size_t i = 0; i < rows.size(); ++i)
        cov += (cols[a][i] - mean[a]) * (cols[b][i] - mean[b]);
      const double r = cov / (sd[a] * sd[b]);
      m[a][b] = r;
      m[b][a] = r;
    }
    m[a][a] = 1.0;
  }
  return m;
}

namespace {

// Speech utterances ready for excitation: VAD-trimmed, at least 10 s and at
// least one experiment window long.
std::vector<Signal> load_speech_pool(const ExperimentConfig& cfg) {
  std::vector<fs::path> files;
  require(fs::is_directory(cfg.corpus_path), ErrorCode::Io,
          "speech corpus is not a directory: " + cfg.corpus_path);
  for (const auto& entry : fs::directory_iterator(cfg.corpus_path)) {
    if (entry.is_regular_file() && entry.path().extension() == ".wav")
      files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  require(!files.empty(), ErrorCode::Io,
          "speech corpus has no .wav files: " + cfg.corpus_path);

  const double min_duration = std::max(10.0, cfg.signal_duration_s);
  std::vector<Signal> pool;
  for (const auto& f : files) {
    Signal utt = read_wav(f.string());
    if (utt.sample_rate != cfg.sample_rate) {
      std::fprintf(stderr, "warning: skipping %s (sample rate %d != %d)\n",
                   f.c_str(), utt.sample_rate, cfg.sample_rate);
      continue;
    }
    Signal trimmed = energy_vad_concat(utt, kVadDefaultFrameMs, kVadDefaultThresholdDb);
    if (trimmed.duration_s() >= min_duration) pool.push_back(std::move(trimmed));
  }
  require(!pool.empty(), ErrorCode::Io,
          "speech corpus has no utterance of at least " +
              std::to_string(min_duration) + " s after VAD trimming");
  return pool;
}

Signal excitation_signal(const ExperimentConfig& cfg,
                         const std::vector<Signal>& speech_pool,
                         std::size_t n_samples, std::uint64_t seed) {
  if (cfg.excitation == Excitation::WhiteNoise)
    return white_noise(n_samples, cfg.sample_rate, seed);
  auto rng = make_engine(seed);
  const Signal& utt = speech_pool[static_cast<std::size_t>(rng() % speech_pool.size())];
  const std::size_t slack = utt.size() - std::min(utt.size(), n_samples);
  const std::size_t start = slack > 0 ? static_cast<std::size_t>(rng() % (slack + 1)) : 0;
  Signal out;
  out.sample_rate = utt.sample_rate;
  out.samples.assign(utt.samples.begin() + static_cast<std::ptrdiff_t>(start),
                     utt.samples.begin() + static_cast<std::ptrdiff_t>(start + n_samples));
  return out;
}

struct RowOutcome {
  bool ok = false;
  DatasetRow row;
  std::string error;
};

RowOutcome simulate_placement(const RoomSpec& room, const ExperimentConfig& cfg,
                              const std::vector<Signal>& speech_pool,
                              std::uint64_t dataset_seed, int index) {
  RowOutcome outcome;
  outcome.row.index = index;
  try {
    const std::uint64_t seed_i = derive_seed(dataset_seed, static_cast<std::uint64_t>(index));
    const std::uint64_t place_seed = derive_seed(seed_i, 1);
    const std::uint64_t near_noise_seed = derive_seed(seed_i, 2);
    const std::uint64_t far_noise_seed = derive_seed(seed_i, 3);
    const std::uint64_t excite_seed = derive_seed(seed_i, 4);

    const ScenePlacement placement = random_placement(
        room, cfg.speaker_pos, place_seed, cfg.min_distance,
        room_max_distance(cfg, room));

    const ImpulseResponse rir_close = simulate_rir(room, placement.source,
                                                   placement.mic_close);
    const ImpulseResponse rir_far = simulate_rir(room, placement.source,
                                                 placement.mic_far);

    const auto n_samples = static_cast<std::size_t>(
        std::lround(cfg.signal_duration_s * cfg.sample_rate));
    const Signal source = excitation_signal(cfg, speech_pool, n_samples, excite_seed);

    Signal near = convolve(source, rir_close.taps, rir_close.sample_rate);
    Signal far = convolve(source, rir_far.taps, rir_far.sample_rate);
    near.samples.resize(n_samples);
    far.samples.resize(n_samples);
    near = mix_at_snr(near, cfg.snr_db, near_noise_seed);
    far = mix_at_snr(far, cfg.snr_db, far_noise_seed);

    IpnlmsOptions opts;
    opts.filter_length =
        cfg.filter.length > 0 ? cfg.filter.length : auto_filter_length(room);
    opts.alpha = cfg.filter.alpha;
    opts.schedule = cfg.filter.schedule.segments.empty()
                        ? auto_schedule(cfg.signal_duration_s)
                        : cfg.filter.schedule;
    opts.delta = cfg.filter.delta;
    opts.epsilon = cfg.filter.epsilon;
    opts.use_float32 = cfg.filter.use_float32;
    opts.trace_block = n_samples;  // no trace consumer here
    auto [h_hat, trace] = ipnlms_run(near, far, opts);

    outcome.row.features = extract_features(h_hat, near, far);
    outcome.row.features.distance_m = placement.inter_device_distance();

    try {
      const TofEstimate tof =
          tof_distance(near, far, kTofWindowS, cfg.speed_of_sound,
                       room.diagonal() / cfg.speed_of_sound);
      outcome.row.tof_distance_m = tof.distance_m;
      outcome.row.tof_frames_used = tof.frames_used;
    } catch (const Error&) {
      outcome.row.tof_distance_m = std::nan("");
      outcome.row.tof_frames_used = 0;
    }
    outcome.ok = true;
  } catch (const Error& e) {
    outcome.error = e.what();
  }
  return outcome;
}

constexpr const char* kLedgerHeader =
    "index,distance_m,tof_distance_m,tof_frames_used,status";

struct ResumeState {
  std::vector<DatasetRow> rows;  // ok rows, in index order
  int next_index = 0;
};

ResumeState read_resume_state(const std::string& csv_path) {
  ResumeState state;
  const std::string ledger_path = csv_path + ".tof.csv";
  if (!fs::exists(csv_path) || !fs::exists(ledger_path)) return state;

  std::vector<FeatureRow> features;
  try {
    features = read_feature_csv(csv_path);
  } catch (const Error&) {
    return state;  // unreadable partial file, regenerate from scratch
  }
  std::ifstream ledger(ledger_path);
  std::string line;
  if (!std::getline(ledger, line) || line != kLedgerHeader) return state;

  std::size_t feature_pos = 0;
  while (std::getline(ledger, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string f_index, f_dist, f_tof, f_frames, f_status;
    std::getline(ls, f_index, ',');
    std::getline(ls, f_dist, ',');
    std::getline(ls, f_tof, ',');
    std::getline(ls, f_frames, ',');
    std::getline(ls, f_status, ',');
    DatasetRow row;
    try {
      row.index = std::stoi(f_index);
      if (f_status == "ok") {
        if (feature_pos >= features.size()) return ResumeState{};  // out of sync
        row.features = features[feature_pos++];
        row.tof_distance_m = std::stod(f_tof);
        row.tof_frames_used = std::stoi(f_frames);
        state.rows.push_back(row);
      }
      state.next_index = row.index + 1;
    } catch (const std::exception&) {
      return ResumeState{};
    }
  }
  if (feature_pos != features.size()) return ResumeState{};
  return state;
}

}  // namespace

std::vector<DatasetRow> generate_dataset(const RoomSpec& room,
                                         const ExperimentConfig& cfg,
                                         std::uint64_t seed,
                                         const std::string& csv_path,
                                         const ProgressFn& progress) {
  validate_experiment_config(cfg);

  std::vector<Signal> speech_pool;
  if (cfg.excitation == Excitation::SpeechCorpus) speech_pool = load_speech_pool(cfg);

  ResumeState resume;
  std::ofstream csv, ledger;
  const bool persist = !csv_path.empty();
  if (persist) {
    resume = read_resume_state(csv_path);
    const bool fresh = resume.next_index == 0;
    csv.open(csv_path, fresh ? std::ios::trunc : std::ios::app);
    ledger.open(csv_path + ".tof.csv", fresh ? std::ios::trunc : std::ios::app);
    require(csv.good() && ledger.good(), ErrorCode::Io,
            "cannot open dataset files for writing: " + csv_path);
    if (fresh) {
      csv << kFeatureCsvHeader << '\n';
      ledger << kLedgerHeader << '\n';
    }
  }

  const int total = cfg.n_positions;
  std::vector<DatasetRow> rows = std::move(resume.rows);
  int failures = 0;
  if (resume.next_index >= total) {
    rows.resize(std::min(rows.size(), static_cast<std::size_t>(total)));
    return rows;
  }

  // Parallel generation with in-order streaming: results are buffered until
  // their index is next to write, so the CSV is byte-identical no matter how
  // many workers run.
  std::mutex sink_mutex;
  std::map<int, RowOutcome> pending;
  int next_to_write = resume.next_index;
  int done = resume.next_index;

  const auto drain = [&] {
    for (auto it = pending.begin();
         it != pending.end() && it->first == next_to_write;) {
      const RowOutcome& out = it->second;
      if (out.ok) {
        rows.push_back(out.row);
        if (persist) {
          csv << to_csv_line(out.row.features) << '\n';
          ledger << out.row.index << ',' << out.row.features.distance_m << ','
                 << out.row.tof_distance_m << ',' << out.row.tof_frames_used
                 << ",ok\n";
        }
      } else {
        ++failures;
        std::fprintf(stderr, "warning: placement %d failed: %s\n", out.row.index,
                     out.error.c_str());
        if (persist)
          ledger << out.row.index << ",nan,nan,0,failed\n";
      }
      ++next_to_write;
      it = pending.erase(it);
    }
    if (persist) {
      csv.flush();
      ledger.flush();
    }
  };

  const auto n_tasks = static_cast<std::size_t>(total - resume.next_index);
  const int first_index = resume.next_index;
  parallel_for(n_tasks, [&](std::size_t task) {
    const int index = first_index + static_cast<int>(task);
    RowOutcome out = simulate_placement(room, cfg, speech_pool, seed, index);
    std::lock_guard<std::mutex> lock(sink_mutex);
    pending.emplace(index, std::move(out));
    drain();
    ++done;
    if (progress) progress(done, total);
  });

  require(failures <= total / 10, ErrorCode::Numeric,
          "generate_dataset: more than 10% of placements failed");
  return rows;
}

void write_speech_corpus(const std::string& dir, int count, double duration_s,
                         int sample_rate, std::uint64_t seed) {
  require(count > 0, ErrorCode::InvalidArgument,
          "write_speech_corpus: count must be positive");
  fs::create_directories(dir);
  for (int i = 0; i < count; ++i) {
    const Signal utt =
        speech_like(duration_s, sample_rate, derive_seed(seed, static_cast<std::uint64_t>(i)));
    char name[32];
    std::snprintf(name, sizeof(name), "utt_%04d.wav", i);
    write_wav((fs::path(dir) / name).string(), utt);
  }
}

}  // namespace relrange
