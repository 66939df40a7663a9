#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "features.hpp"
#include "gbdt.hpp"
#include "relrir.hpp"
#include "room.hpp"
#include "signal.hpp"

namespace relrange {

struct NamedRoom {
  std::string name;
  RoomSpec room;
};

struct FilterSettings {
  std::size_t length = 0;  // 0: auto, 0.75 * T60 * fs per room
  double alpha = 0.0;
  StepSchedule schedule;   // empty: mu 0.3 for 45% of the signal, then 0.1
  double delta = kDefaultDelta;
  double epsilon = kDefaultEpsilon;
  bool use_float32 = false;
};

enum class Excitation { WhiteNoise, SpeechCorpus };

// The experiment configuration, serialized as versioned JSON (see
// config_to_json). Monte Carlo repetitions re-draw the data split and model
// seed; set regenerate_per_rep to re-simulate the dataset each time instead.
struct ExperimentConfig {
  std::vector<NamedRoom> rooms;
  int n_positions = 2000;
  Excitation excitation = Excitation::WhiteNoise;
  std::string corpus_path;
  double signal_duration_s = 10.0;
  double snr_db = 30.0;
  int sample_rate = kDefaultSampleRate;
  double speed_of_sound = 343.0;
  FilterSettings filter;
  std::array<double, 3> split{0.8, 0.1, 0.1};
  int n_monte_carlo = 10;
  std::uint64_t seed = 0;
  Vec3 speaker_pos{0.5, 0.5, 1.0};
  double min_distance = 0.3;
  double max_distance = 0.0;  // <= 0: room diagonal - 0.5
  TrainGrid grid;
  bool regenerate_per_rep = false;
  int importance_repeats = 10;
};

void validate_experiment_config(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const std::string& text);
std::string config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::string& path);

// FNV-1a digest of the canonical config JSON; stamped into reports so stale
// artifacts are detectable.
std::string config_hash(const ExperimentConfig& cfg);

// Derived per-room settings.
std::size_t auto_filter_length(const RoomSpec& room);
StepSchedule auto_schedule(double signal_duration_s);
double room_max_distance(const ExperimentConfig& cfg, const RoomSpec& room);
std::uint64_t room_seed(const ExperimentConfig& cfg, std::size_t room_index);

// One simulated placement: ranging features plus the time-of-flight
// baseline estimate computed from the same pair of recordings.
struct DatasetRow {
  int index = 0;
  FeatureRow features;
  double tof_distance_m = 0.0;  // NaN when the baseline failed
  int tof_frames_used = 0;
};

using ProgressFn = std::function<void(int done, int total)>;

// Simulates n_positions placements and extracts one row each. When csv_path
// is non-empty, rows stream to csv_path (pinned schema) plus a sidecar
// ledger csv_path + ".tof.csv"; an interrupted run resumes from the ledger.
// Per-placement failures are logged and skipped; more than 10% failed rows
// aborts.
std::vector<DatasetRow> generate_dataset(const RoomSpec& room,
                                         const ExperimentConfig& cfg,
                                         std::uint64_t seed,
                                         const std::string& csv_path = "",
                                         const ProgressFn& progress = nullptr);

// |d_tar - d_pred| / d_tar * 100.
double relative_error(double d_tar, double d_pred);

// Shuffled disjoint exhaustive partition used per Monte Carlo repetition.
struct SplitIndices {
  std::vector<int> train, val, test;
};

SplitIndices split_dataset(std::size_t n, const std::array<double, 3>& fractions,
                           std::uint64_t seed);

// Pearson correlations ordered (T60, C50, DRR, SRR, S, distance).
using CorrelationMatrix = std::array<std::array<double, 6>, 6>;
extern const char* const kCorrelationLabels[6];
CorrelationMatrix correlation_matrix(const std::vector<FeatureRow>& rows);

// Full benchmark: per room and Monte Carlo repetition, re-split 80/10/10,
// grid-search and train the regressor, score the relative error against the
// GCC-PHAT baseline, run the SRR and C50 ablation t-tests, aggregate across
// repetitions, and persist report.json plus per-row prediction CSVs under
// out_dir. Returns the report document.
nlohmann::json run_experiment(const ExperimentConfig& cfg,
                              const std::string& out_dir,
                              const ProgressFn& progress = nullptr);

// Derived plot tables from a report: relative-error comparison, feature
// importance ranking and ablation t-tests.
void write_plotdata(const std::string& report_path, const std::string& out_dir);

// Synthetic speech corpus of WAV utterances for speech-mode experiments.
void write_speech_corpus(const std::string& dir, int count, double duration_s,
                         int sample_rate, std::uint64_t seed);

std::string version_string();

}  // namespace relrange
