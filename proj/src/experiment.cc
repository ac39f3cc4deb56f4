#include "scd/experiment.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include <json.hpp>

#include "scd/checkpoint.h"
#include "scd/error.h"

namespace scd {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string eta_tag(double eta) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", eta);
  return buf;
}

class JsonLog {
 public:
  JsonLog() = default;
  explicit JsonLog(const std::string& path) : out_(path) {
    if (!out_) throw ValidationError("cannot write log " + path);
  }
  void write(const json& line) {
    if (out_.is_open()) out_ << line.dump() << "\n" << std::flush;
  }

 private:
  std::ofstream out_;
};

json epoch_json(const std::string& stage, std::uint64_t seed, const EpochRecord& r) {
  json j = {{"stage", stage},
            {"seed", seed},
            {"epoch", r.epoch},
            {"label_loss", r.label_loss},
            {"domain_loss", r.domain_loss},
            {"source_dev_f1", r.source_dev_f1}};
  if (r.target_test_f1 >= 0) j["target_test_f1"] = r.target_test_f1;
  return j;
}

json round_json(std::uint64_t seed, double eta, const RoundRecord& r) {
  json j = {{"stage", "scd"},
            {"seed", seed},
            {"eta", eta},
            {"round", r.round},
            {"disagree", r.disagree},
            {"agree", r.agree},
            {"label_loss", r.label_loss},
            {"domain_loss", r.domain_loss},
            {"source_dev_f1", r.source_dev_f1},
            {"epoch_target_f1", r.epoch_target_f1}};
  if (r.change_fraction >= 0) j["change_fraction"] = r.change_fraction;
  if (r.target_test_f1 >= 0) j["target_test_f1"] = r.target_test_f1;
  return j;
}

double split_mmd(const TaggerParams& params, const Dataset& data) {
  const auto& e = data.encoded;
  return mmd(pooled_features(params, data.embeddings, e.source_test, e.n_max),
             pooled_features(params, data.embeddings, e.target_test, e.n_max));
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
  return buf;
}

std::string fmt_mmd(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

Dataset make_dataset(Corpus corpus, const std::string& embeddings_path, int dim,
                     std::uint64_t seed, std::string description) {
  corpus.validate();
  Dataset d;
  d.vocab = Vocabulary::build(corpus);
  d.embeddings = load_embeddings(embeddings_path, d.vocab, dim, seed);
  d.encoded = encode_corpus(corpus, d.vocab);
  d.corpus = std::move(corpus);
  d.description = std::move(description);
  return d;
}

Dataset synthetic_dataset(const SyntheticSpec& spec) {
  SyntheticData data = generate_synthetic(spec);
  const fs::path tmp = fs::temp_directory_path() /
                       ("scd_synthetic_" + std::to_string(::getpid()) + "_" +
                        hex64(fnv1a64(data.embedding_text)) + ".txt");
  {
    std::ofstream out(tmp);
    if (!out) throw ValidationError("cannot write " + tmp.string());
    out << data.embedding_text;
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "synthetic(shift=%g, seed=%llu)", spec.shift,
                static_cast<unsigned long long>(spec.seed));
  Dataset d;
  try {
    d = make_dataset(std::move(data.corpus), tmp.string(), spec.embedding_dim,
                     spec.seed, buf);
  } catch (...) {
    fs::remove(tmp);
    throw;
  }
  fs::remove(tmp);
  return d;
}

Dataset load_dataset(const TrainConfig& config) {
  if (config.data_dir.empty()) throw UsageError("no data directory given");
  if (config.embeddings.empty()) {
    throw UsageError("no embeddings file given (use --synthetic for generated data)");
  }
  if (!fs::exists(config.embeddings)) {
    throw UsageError("embeddings file not found: " + config.embeddings);
  }
  return make_dataset(load_corpus_dir(config.data_dir), config.embeddings,
                      config.embedding_dim, config.seed, config.data_dir);
}

std::vector<std::uint64_t> seed_list(const TrainConfig& config) {
  std::vector<std::uint64_t> seeds;
  for (int k = 0; k < config.runs; ++k) seeds.push_back(config.seed + static_cast<std::uint64_t>(k));
  return seeds;
}

std::string stage_name(Stage stage) {
  switch (stage) {
    case Stage::kTeacher:
      return "teacher";
    case Stage::kStudent:
      return "student";
    case Stage::kScd:
      return "scd";
  }
  return "?";
}

SeedOutcome run_seed(const Dataset& data, const TrainConfig& base_config,
                     std::uint64_t seed, const ExperimentOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  TrainConfig config = base_config;
  config.seed = seed;
  const auto& e = data.encoded;
  const bool files = !options.run_dir.empty();
  const std::string suffix = "_seed" + std::to_string(seed);
  auto path = [&](const std::string& name) { return (fs::path(options.run_dir) / name).string(); };
  auto note = [&](const std::string& msg) {
    if (options.progress) options.progress("seed " + std::to_string(seed) + ": " + msg);
  };
  if (files) fs::create_directories(fs::path(options.run_dir) / "logs");
  const bool dump_features = files && options.feature_sample > 0 && seed == base_config.seed;

  auto checkpoint = [&](ModelKind kind, const StudentParams& params) {
    Checkpoint ck;
    ck.kind = kind;
    ck.config = config;
    ck.vocab = data.vocab;
    ck.embeddings = data.embeddings;
    ck.student = params;
    return ck;
  };
  auto dump = [&](const TaggerParams& params, const std::string& model) {
    if (!dump_features) return;
    export_features(params, data.embeddings, e.source_test, e.target_test, e.n_max,
                    options.feature_sample, seed, path("features_" + model + ".csv"));
  };

  SeedOutcome out;
  out.seed = seed;

  TrainingOptions topt;
  topt.track_target = options.track_curves;
  JsonLog teacher_log = files ? JsonLog(path("logs/teacher" + suffix + ".jsonl")) : JsonLog();
  topt.on_epoch = [&](const EpochRecord& r) { teacher_log.write(epoch_json("teacher", seed, r)); };
  note("training teacher");
  const TaggerParams teacher = train_teacher(e, data.embeddings, config, topt);
  out.teacher_target_f1 = evaluate_f1(teacher, data.embeddings, e.target_test, e.n_max);
  out.teacher_source_f1 = evaluate_f1(teacher, data.embeddings, e.source_test, e.n_max);
  out.teacher_mmd = split_mmd(teacher, data);
  if (files) {
    StudentParams holder;
    holder.tagger = teacher;
    holder.lambda = 0.0;
    save_checkpoint(checkpoint(ModelKind::kTeacher, holder), path("teacher" + suffix + ".ckpt"));
  }
  dump(teacher, "teacher");
  if (options.stage == Stage::kTeacher) {
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
  }

  JsonLog student_log = files ? JsonLog(path("logs/student" + suffix + ".jsonl")) : JsonLog();
  topt.on_epoch = [&](const EpochRecord& r) { student_log.write(epoch_json("student", seed, r)); };
  note("training student");
  const StudentParams student = train_student(e, data.embeddings, config, topt);
  out.student_target_f1 = evaluate_f1(student.tagger, data.embeddings, e.target_test, e.n_max);
  out.student_source_f1 = evaluate_f1(student.tagger, data.embeddings, e.source_test, e.n_max);
  out.student_mmd = split_mmd(student.tagger, data);
  if (files) {
    save_checkpoint(checkpoint(ModelKind::kStudent, student), path("student" + suffix + ".ckpt"));
  }
  dump(student.tagger, "student");

  if (options.stage == Stage::kScd) {
    for (double eta : options.etas) {
      TrainConfig scd_config = config;
      scd_config.eta = eta;
      const std::string tag = "scd_eta" + eta_tag(eta);
      JsonLog round_log = files ? JsonLog(path("logs/" + tag + suffix + ".jsonl")) : JsonLog();
      SelfTrainOptions sopt;
      sopt.track_target = true;
      sopt.on_round = [&](const RoundRecord& r) { round_log.write(round_json(seed, eta, r)); };
      note("self-training eta=" + eta_tag(eta));
      SelfTrainResult r = run_scd(teacher, student, e, data.embeddings,
                                  SelfTrainConfig::from(scd_config), scd_config, sopt);
      ScdOutcome s;
      s.eta = eta;
      s.rounds = r.rounds;
      s.target_f1 = evaluate_f1(r.student.tagger, data.embeddings, e.target_test, e.n_max);
      s.source_f1 = evaluate_f1(r.student.tagger, data.embeddings, e.source_test, e.n_max);
      out.scd.push_back(std::move(s));
      if (files) {
        save_checkpoint(checkpoint(ModelKind::kStudent, r.student), path(tag + suffix + ".ckpt"));
      }
      if (eta == options.etas.front()) dump(r.student.tagger, "scd");
    }
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

ExperimentSummary run_experiment(const Dataset& data, const TrainConfig& config,
                                 const ExperimentOptions& options) {
  config.validate();
  if (options.stage == Stage::kScd && options.etas.empty()) {
    throw UsageError("no eta values to run");
  }
  ExperimentSummary summary;
  summary.stage = stage_name(options.stage);
  summary.config_hash = config.hash_hex();
  summary.data = data.description;
  for (std::uint64_t seed : seed_list(config)) {
    summary.seeds.push_back(run_seed(data, config, seed, options));
  }
  if (!options.run_dir.empty()) {
    std::ofstream(fs::path(options.run_dir) / "summary.json") << summary_json(summary) << "\n";
    std::ofstream(fs::path(options.run_dir) / "summary.txt") << format_summary(summary);
    std::ofstream(fs::path(options.run_dir) / "config.txt") << config.canonical();
  }
  return summary;
}

namespace {

struct Column {
  std::string name;
  std::vector<double> values;
  bool is_mmd = false;
};

std::vector<Column> summary_columns(const ExperimentSummary& s) {
  std::vector<Column> cols;
  auto add = [&](const std::string& name, bool is_mmd, auto get) {
    Column c{name, {}, is_mmd};
    for (const auto& o : s.seeds) {
      if (auto v = get(o)) c.values.push_back(*v);
    }
    if (c.values.size() == s.seeds.size() && !c.values.empty()) cols.push_back(std::move(c));
  };
  using Opt = std::optional<double>;
  add("teacher_target_f1", false, [](const SeedOutcome& o) -> Opt { return o.teacher_target_f1; });
  add("teacher_source_f1", false, [](const SeedOutcome& o) -> Opt { return o.teacher_source_f1; });
  add("student_target_f1", false, [](const SeedOutcome& o) { return o.student_target_f1; });
  add("student_source_f1", false, [](const SeedOutcome& o) { return o.student_source_f1; });
  if (!s.seeds.empty()) {
    for (std::size_t k = 0; k < s.seeds.front().scd.size(); ++k) {
      const std::string tag = "scd_eta" + eta_tag(s.seeds.front().scd[k].eta);
      add(tag + "_target_f1", false, [k](const SeedOutcome& o) -> Opt {
        return k < o.scd.size() ? Opt(o.scd[k].target_f1) : std::nullopt;
      });
      add(tag + "_source_f1", false, [k](const SeedOutcome& o) -> Opt {
        return k < o.scd.size() ? Opt(o.scd[k].source_f1) : std::nullopt;
      });
    }
  }
  add("teacher_mmd", true, [](const SeedOutcome& o) -> Opt { return o.teacher_mmd; });
  add("student_mmd", true, [](const SeedOutcome& o) { return o.student_mmd; });
  return cols;
}

}  // namespace

std::string format_summary(const ExperimentSummary& s) {
  std::ostringstream os;
  os << "stage: " << s.stage << "\n"
     << "data: " << s.data << "\n"
     << "config_hash: " << s.config_hash << "\n"
     << "seeds:";
  for (const auto& o : s.seeds) os << " " << o.seed;
  os << "\n\n";
  for (const auto& c : summary_columns(s)) {
    const MeanSd m = mean_sd(c.values);
    os << c.name << ": ";
    if (c.is_mmd) {
      os << fmt_mmd(m.mean) << " +- " << fmt_mmd(m.sd) << "  [";
    } else {
      os << fmt(m.mean) << " +- " << fmt(m.sd) << "  [";
    }
    for (std::size_t k = 0; k < c.values.size(); ++k) {
      if (k > 0) os << ", ";
      os << (c.is_mmd ? fmt_mmd(c.values[k]) : fmt(c.values[k]));
    }
    os << "]\n";
  }
  return os.str();
}

std::string summary_json(const ExperimentSummary& s) {
  json j;
  j["stage"] = s.stage;
  j["data"] = s.data;
  j["config_hash"] = s.config_hash;
  json seeds = json::array();
  for (const auto& o : s.seeds) {
    json row = {{"seed", o.seed},
                {"teacher_target_f1", o.teacher_target_f1},
                {"teacher_source_f1", o.teacher_source_f1},
                {"teacher_mmd", o.teacher_mmd},
                {"seconds", o.seconds}};
    if (o.student_target_f1) row["student_target_f1"] = *o.student_target_f1;
    if (o.student_source_f1) row["student_source_f1"] = *o.student_source_f1;
    if (o.student_mmd) row["student_mmd"] = *o.student_mmd;
    json scd = json::array();
    for (const auto& r : o.scd) {
      json rounds = json::array();
      for (const auto& rr : r.rounds) {
        rounds.push_back({{"round", rr.round}, {"disagree", rr.disagree}, {"agree", rr.agree}});
      }
      scd.push_back({{"eta", r.eta},
                     {"target_f1", r.target_f1},
                     {"source_f1", r.source_f1},
                     {"rounds", rounds}});
    }
    if (!scd.empty()) row["scd"] = scd;
    seeds.push_back(row);
  }
  j["seeds"] = seeds;
  json means;
  for (const auto& c : summary_columns(s)) {
    const MeanSd m = mean_sd(c.values);
    means[c.name] = {{"mean", m.mean}, {"sd", m.sd}};
  }
  j["summary"] = means;
  return j.dump(2);
}

std::vector<double> normalize_eta_list(const std::vector<double>& values,
                                       const std::function<void(const std::string&)>& warn) {
  if (values.empty()) throw UsageError("eta list is empty");
  std::vector<double> out;
  for (double v : values) {
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("eta " + eta_tag(v) + " outside [0, 1]");
    if (std::find(out.begin(), out.end(), v) != out.end()) {
      if (warn) warn("duplicate eta " + eta_tag(v) + " ignored");
      continue;
    }
    out.push_back(v);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string resolve_run_dir(const std::string& run_dir) {
  if (run_dir.empty()) return run_dir;
  const fs::path p(run_dir);
  if (p.is_absolute()) return run_dir;
  if (const char* root = std::getenv("SCD_RUN_ROOT"); root != nullptr && *root != '\0') {
    return (fs::path(root) / p).string();
  }
  return run_dir;
}

}  // namespace scd
