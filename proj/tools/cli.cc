#include "cli.h"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "scd/checkpoint.h"
#include "scd/error.h"
#include "scd/experiment.h"
#include "scd/metrics.h"
#include "scd/report.h"
#include "scd/synthetic.h"

namespace scd {

namespace {

namespace fs = std::filesystem;

// Flags shared by every command that trains or evaluates on a corpus.
struct DataFlags {
  std::string config_file;
  std::map<std::string, std::string> overrides;
  bool allow_off_grid = false;
  bool synthetic = false;
  SyntheticSpec spec;

  void attach(CLI::App& app, bool training) {
    app.add_option("--config", config_file, "key = value config file");
    app.add_flag("--synthetic", synthetic, "generate the corpus instead of reading --data-dir");
    app.add_option("--shift", spec.shift, "synthetic domain shift in [0, 1]");
    app.add_option("--synthetic-seed", spec.seed, "synthetic corpus seed");
    app.add_option("--synthetic-train", spec.train_sentences, "synthetic sentences per train split");
    app.add_option("--synthetic-test", spec.test_sentences, "synthetic sentences per test split");
    const std::vector<std::pair<const char*, const char*>> keys = {
        {"data_dir", "--data-dir"}, {"embeddings", "--embeddings"},
        {"embedding_dim", "--embedding-dim"}, {"seed", "--seed"}};
    for (const auto& [key, flag] : keys) add_override(app, key, flag);
    if (!training) return;
    const std::vector<std::pair<const char*, const char*>> train_keys = {
        {"run_dir", "--run-dir"},
        {"hidden", "--hidden"},
        {"dropout", "--dropout"},
        {"lambda", "--lambda"},
        {"batch_size", "--batch-size"},
        {"eta", "--eta"},
        {"learning_rate", "--learning-rate"},
        {"teacher_epochs", "--teacher-epochs"},
        {"student_epochs", "--student-epochs"},
        {"selftrain_epochs", "--selftrain-epochs"},
        {"rounds", "--rounds"},
        {"tau", "--tau"},
        {"runs", "--runs"}};
    for (const auto& [key, flag] : train_keys) add_override(app, key, flag);
    app.add_flag("--allow-off-grid", allow_off_grid, "accept values outside the tuning grids");
  }

  void add_override(CLI::App& app, const std::string& key, const std::string& flag) {
    app.add_option_function<std::string>(
        flag, [this, key](const std::string& v) { overrides[key] = v; }, key);
  }

  TrainConfig config() const {
    TrainConfig c = config_file.empty() ? TrainConfig{} : load_config(config_file);
    apply_key_values(c, overrides);
    if (allow_off_grid) c.allow_off_grid = true;
    if (synthetic && !overrides.count("embedding_dim")) {
      c.embedding_dim = spec.embedding_dim;
    }
    c.run_dir = resolve_run_dir(c.run_dir);
    return c;
  }

  Dataset dataset(const TrainConfig& c) const {
    if (synthetic) {
      SyntheticSpec s = spec;
      s.embedding_dim = c.embedding_dim;
      return synthetic_dataset(s);
    }
    return load_dataset(c);
  }
};

std::vector<std::vector<std::string>> read_raw_sentences(const std::string& input,
                                                          const std::vector<std::string>& inline_text) {
  std::vector<std::string> lines = inline_text;
  if (lines.empty()) {
    std::ifstream file;
    std::istream* in = &std::cin;
    if (!input.empty() && input != "-") {
      file.open(input);
      if (!file) throw ValidationError("cannot open " + input);
      in = &file;
    }
    for (std::string line; std::getline(*in, line);) lines.push_back(line);
  }
  std::vector<std::vector<std::string>> out;
  for (const auto& line : lines) {
    std::istringstream ss(line);
    std::vector<std::string> tokens;
    for (std::string t; ss >> t;) tokens.push_back(t);
    if (!tokens.empty()) out.push_back(std::move(tokens));
  }
  return out;
}

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cross-domain aspect term extraction with classifier-disagreement self-training", "scd"};
  app.require_subcommand(1);

  // gen-synthetic
  SyntheticSpec gen_spec;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen-synthetic", "write a synthetic two-domain corpus");
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--shift", gen_spec.shift, "domain shift in [0, 1]");
  gen->add_option("--seed", gen_spec.seed, "generator seed");
  gen->add_option("--train", gen_spec.train_sentences, "sentences per train split");
  gen->add_option("--test", gen_spec.test_sentences, "sentences per test split");
  gen->add_option("--embedding-dim", gen_spec.embedding_dim, "word vector size");

  DataFlags teacher_flags, student_flags, scd_flags, sweep_flags, mmd_flags;
  auto* teacher = app.add_subcommand("train-teacher", "train source-only teachers over the seeds");
  teacher_flags.attach(*teacher, true);
  auto* student = app.add_subcommand("train-student", "train domain-adversarial students");
  student_flags.attach(*student, true);
  auto* scd = app.add_subcommand("scd", "teacher, student and disagreement self-training");
  scd_flags.attach(*scd, true);

  std::vector<double> sweep_values;
  auto* sweep = app.add_subcommand("sweep-eta", "self-training for several eta values");
  sweep_flags.attach(*sweep, true);
  sweep->add_option("--values", sweep_values, "eta values")->delimiter(',')->required();

  std::string report_dir;
  ReportOptions report_options;
  auto* report = app.add_subcommand("report", "curves, rounds, MMD pairs and t-SNE coordinates");
  report->add_option("--run-dir", report_dir, "run directory")->required();
  report->add_option("--tsne-iterations", report_options.tsne.iterations, "t-SNE iterations");
  report->add_option("--perplexity", report_options.tsne.perplexity, "t-SNE perplexity");
  report->add_option("--max-points", report_options.max_points_per_domain,
                     "feature rows per domain to project");
  bool no_tsne = false;
  report->add_flag("--no-tsne", no_tsne, "skip the projection");

  std::string ckpt_path, predict_input;
  std::vector<std::string> predict_text;
  auto* predict_cmd = app.add_subcommand("predict", "extract aspect terms from raw sentences");
  predict_cmd->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  predict_cmd->add_option("--input", predict_input, "one sentence per line (default stdin)");
  predict_cmd->add_option("--text", predict_text, "sentences given inline");

  std::string mmd_ckpt;
  auto* mmd_cmd = app.add_subcommand("mmd", "MMD between source and target test features");
  mmd_cmd->add_option("--checkpoint", mmd_ckpt, "checkpoint file")->required();
  mmd_flags.attach(*mmd_cmd, false);

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  if (!argv_rev.empty()) argv_rev.pop_back();
  try {
    try {
      app.parse(argv_rev);
    } catch (const CLI::CallForHelp&) {
      out << app.help();
      return 0;
    } catch (const CLI::CallForAllHelp&) {
      out << app.help("", CLI::AppFormatMode::All);
      return 0;
    } catch (const CLI::ParseError& e) {
      throw UsageError(e.what());
    }

    auto progress = [&](const std::string& msg) { err << msg << "\n"; };

    if (*gen) {
      write_synthetic(generate_synthetic(gen_spec), gen_out);
      out << "wrote synthetic corpus to " << gen_out << "\n";
      return 0;
    }

    auto train = [&](DataFlags& flags, Stage stage, std::vector<double> etas) {
      TrainConfig config = flags.config();
      config.validate();
      const Dataset data = flags.dataset(config);
      ExperimentOptions options;
      options.stage = stage;
      options.etas = std::move(etas);
      options.run_dir = config.run_dir;
      options.progress = progress;
      const ExperimentSummary summary = run_experiment(data, config, options);
      out << format_summary(summary);
      return 0;
    };
    if (*teacher) return train(teacher_flags, Stage::kTeacher, {});
    if (*student) return train(student_flags, Stage::kStudent, {});
    if (*scd) {
      const double eta = scd_flags.config().eta;
      return train(scd_flags, Stage::kScd, {eta});
    }
    if (*sweep) {
      auto etas = normalize_eta_list(sweep_values, [&](const std::string& w) {
        err << "warning: " << w << "\n";
      });
      return train(sweep_flags, Stage::kScd, etas);
    }
    if (*report) {
      report_options.project_features = !no_tsne;
      out << build_report(resolve_run_dir(report_dir), report_options).text;
      return 0;
    }
    if (*predict_cmd) {
      const Checkpoint ck = load_checkpoint(ckpt_path);
      const auto raw = read_raw_sentences(predict_input, predict_text);
      std::vector<EncodedSentence> encoded;
      int n_max = 1;
      for (const auto& tokens : raw) {
        TaggedSentence s;
        s.tokens = tokens;
        s.domain = Domain::kTarget;
        encoded.push_back(encode_sentence(s, ck.vocab, false));
        n_max = std::max(n_max, static_cast<int>(tokens.size()));
      }
      const auto labels = predict(ck.tagger(), ck.embeddings, encoded, n_max);
      for (std::size_t k = 0; k < raw.size(); ++k) {
        std::string line;
        for (const Span& span : decode_spans(labels[k])) {
          if (!line.empty()) line += ", ";
          for (int t = span.start; t <= span.end; ++t) {
            if (t > span.start) line += " ";
            line += raw[k][static_cast<std::size_t>(t)];
          }
        }
        out << (line.empty() ? "NULL" : line) << "\n";
      }
      return 0;
    }
    if (*mmd_cmd) {
      const Checkpoint ck = load_checkpoint(mmd_ckpt);
      TrainConfig config = mmd_flags.config();
      config.embedding_dim = ck.embeddings.dim();
      const Dataset data = mmd_flags.dataset(config);
      // Re-encode with the checkpoint's vocabulary so ids match its table.
      const EncodedCorpus e = encode_corpus(data.corpus, ck.vocab);
      const double value =
          mmd(pooled_features(ck.tagger(), ck.embeddings, e.source_test, e.n_max),
              pooled_features(ck.tagger(), ck.embeddings, e.target_test, e.n_max));
      out << "mmd = " << value << "\n";
      return 0;
    }
    throw UsageError("no command given");
  } catch (const Error& e) {
    err << "error " << e.code() << ": " << one_line(e.what()) << "\n";
    return e.code() == "usage" ? 2 : 1;
  } catch (const std::exception& e) {
    err << "error internal: " << one_line(e.what()) << "\n";
    return 1;
  }
}

}  // namespace scd
