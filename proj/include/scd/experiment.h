#ifndef SCD_EXPERIMENT_H_
#define SCD_EXPERIMENT_H_

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "scd/adversarial.h"
#include "scd/config.h"
#include "scd/corpus.h"
#include "scd/metrics.h"
#include "scd/selftrain.h"
#include "scd/synthetic.h"
#include "scd/tagger.h"

namespace scd {

// Corpus plus the vocabulary and embeddings every model of a run shares.
struct Dataset {
  Corpus corpus;
  Vocabulary vocab;
  EmbeddingTable embeddings;
  EncodedCorpus encoded;
  std::string description;
};

Dataset make_dataset(Corpus corpus, const std::string& embeddings_path, int dim,
                     std::uint64_t seed, std::string description);
// In-memory synthetic corpus with its generated embeddings.
Dataset synthetic_dataset(const SyntheticSpec& spec);
// config.data_dir + config.embeddings. A missing embeddings path is a
// UsageError.
Dataset load_dataset(const TrainConfig& config);

enum class Stage { kTeacher, kStudent, kScd };

struct ExperimentOptions {
  Stage stage = Stage::kScd;
  std::vector<double> etas{0.0};  // self-training runs per seed (kScd only)
  // When non-empty: JSON-lines logs, checkpoints, feature dumps and the
  // summary go here.
  std::string run_dir;
  // Per-epoch target-test F1 curves.
  bool track_curves = true;
  // Tokens per domain in the feature dump of the first seed; 0 disables it.
  int feature_sample = 1000;
  std::function<void(const std::string&)> progress;
};

struct ScdOutcome {
  double eta = 0.0;
  double target_f1 = 0.0;
  double source_f1 = 0.0;
  std::vector<RoundRecord> rounds;
};

struct SeedOutcome {
  std::uint64_t seed = 0;
  double teacher_target_f1 = 0.0;
  double teacher_source_f1 = 0.0;
  double teacher_mmd = 0.0;
  std::optional<double> student_target_f1;
  std::optional<double> student_source_f1;
  std::optional<double> student_mmd;
  std::vector<ScdOutcome> scd;  // one per eta, in option order
  double seconds = 0.0;
};

// Seeds config.seed, config.seed + 1, ... (config.runs of them).
std::vector<std::uint64_t> seed_list(const TrainConfig& config);

// Teacher, then (depending on the stage) Student and one self-training run
// per eta, all from the same seed.
SeedOutcome run_seed(const Dataset& data, const TrainConfig& config,
                     std::uint64_t seed, const ExperimentOptions& options);

struct ExperimentSummary {
  std::string stage;
  std::string config_hash;
  std::string data;
  std::vector<SeedOutcome> seeds;
};

ExperimentSummary run_experiment(const Dataset& data, const TrainConfig& config,
                                 const ExperimentOptions& options);

// Mean +- sd table with the config hash, seed list and per-seed values.
std::string format_summary(const ExperimentSummary& summary);
std::string summary_json(const ExperimentSummary& summary);

// Sorted, duplicate-free copy of `values`; reports dropped duplicates via
// `warn`. Throws UsageError for an empty list and ConfigError for values
// outside [0, 1].
std::vector<double> normalize_eta_list(const std::vector<double>& values,
                                       const std::function<void(const std::string&)>& warn);

// Resolves a relative run directory against $SCD_RUN_ROOT when it is set.
std::string resolve_run_dir(const std::string& run_dir);

std::string stage_name(Stage stage);

}  // namespace scd

#endif  // SCD_EXPERIMENT_H_
