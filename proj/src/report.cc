#include "scd/report.h"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "scd/error.h"

namespace scd {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::vector<json> read_jsonl(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ValidationError("cannot open " + file.string());
  std::vector<json> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("stage")) {
      throw ParseError(file.string() + ":" + std::to_string(line_no) + ": corrupt log line");
    }
    out.push_back(std::move(j));
  }
  return out;
}

template <typename T>
T get(const json& j, const char* key, const fs::path& file) {
  if (!j.contains(key)) {
    throw ParseError(file.string() + ": log entry missing '" + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ParseError(file.string() + ": log entry has a bad '" + key + "'");
  }
}

struct FeatureRows {
  std::vector<std::string> domain;
  std::vector<std::string> label;
  std::vector<std::vector<double>> values;
};

FeatureRows read_features(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ValidationError("cannot open " + file.string());
  FeatureRows rows;
  std::string line;
  int line_no = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1) {
      if (line.rfind("domain,label", 0) != 0) {
        throw ParseError(file.string() + ":1: missing feature header");
      }
      width = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) - 1;
      continue;
    }
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != width + 2) {
      throw ParseError(file.string() + ":" + std::to_string(line_no) + ": wrong column count");
    }
    std::vector<double> v;
    for (std::size_t k = 2; k < cells.size(); ++k) {
      char* end = nullptr;
      v.push_back(std::strtod(cells[k].c_str(), &end));
      if (end == cells[k].c_str()) {
        throw ParseError(file.string() + ":" + std::to_string(line_no) + ": bad number");
      }
    }
    rows.domain.push_back(cells[0]);
    rows.label.push_back(cells[1]);
    rows.values.push_back(std::move(v));
  }
  return rows;
}

std::string num(double v, const char* format = "%.4f") {
  char buf[40];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

}  // namespace

RunReport build_report(const std::string& run_dir, const ReportOptions& options) {
  const fs::path dir(run_dir);
  if (!fs::is_directory(dir)) throw ValidationError("run directory not found: " + run_dir);

  std::vector<fs::path> logs;
  if (fs::is_directory(dir / "logs")) {
    for (const auto& entry : fs::directory_iterator(dir / "logs")) {
      if (entry.path().extension() == ".jsonl") logs.push_back(entry.path());
    }
  }
  std::sort(logs.begin(), logs.end());
  const fs::path summary_path = dir / "summary.json";
  if (logs.empty() && !fs::exists(summary_path)) {
    throw ValidationError("run directory has no logs: " + run_dir);
  }

  RunReport report;
  std::ostringstream text;
  std::ofstream curves(dir / "curves.csv");
  curves << "stage,seed,eta,epoch,target_test_f1,source_dev_f1\n";
  report.written.push_back("curves.csv");

  for (const auto& file : logs) {
    const auto entries = read_jsonl(file);
    int scd_epoch = 0;
    for (const auto& j : entries) {
      const auto stage = get<std::string>(j, "stage", file);
      const auto seed = get<long long>(j, "seed", file);
      if (stage == "scd") {
        RoundLine r;
        r.file = file.filename().string();
        r.seed = seed;
        r.eta = get<double>(j, "eta", file);
        r.round = get<int>(j, "round", file);
        r.disagree = get<int>(j, "disagree", file);
        r.agree = get<int>(j, "agree", file);
        report.rounds.push_back(r);
        const double dev = get<double>(j, "source_dev_f1", file);
        for (double f1 : get<std::vector<double>>(j, "epoch_target_f1", file)) {
          curves << "scd," << seed << "," << r.eta << "," << ++scd_epoch << "," << f1 << ","
                 << dev << "\n";
        }
      } else {
        const int epoch = get<int>(j, "epoch", file);
        const double dev = get<double>(j, "source_dev_f1", file);
        curves << stage << "," << seed << ",," << epoch << ",";
        if (j.contains("target_test_f1")) curves << get<double>(j, "target_test_f1", file);
        curves << "," << dev << "\n";
      }
    }
  }

  if (!report.rounds.empty()) {
    std::ofstream rounds(dir / "rounds.csv");
    rounds << "seed,eta,round,disagree,agree\n";
    text << "self-training rounds (|D_d| disagree, |D_a| agree):\n";
    for (const auto& r : report.rounds) {
      rounds << r.seed << "," << r.eta << "," << r.round << "," << r.disagree << ","
             << r.agree << "\n";
      text << "  seed " << r.seed << " eta " << r.eta << " round " << r.round
           << ": |D_d| = " << r.disagree << ", |D_a| = " << r.agree << "\n";
    }
    report.written.push_back("rounds.csv");
  }

  if (fs::exists(summary_path)) {
    std::ifstream in(summary_path);
    json s = json::parse(in, nullptr, false);
    if (s.is_discarded() || !s.contains("seeds") || !s["seeds"].is_array()) {
      throw ParseError(summary_path.string() + ": corrupt summary");
    }
    for (const auto& row : s["seeds"]) {
      if (row.contains("teacher_mmd") && row.contains("student_mmd")) {
        report.mmd.push_back({get<long long>(row, "seed", summary_path),
                              get<double>(row, "teacher_mmd", summary_path),
                              get<double>(row, "student_mmd", summary_path)});
      }
    }
    if (!report.mmd.empty()) {
      std::ofstream out(dir / "mmd.csv");
      out << "seed,teacher,student\n";
      text << "MMD between source and target sentence features:\n";
      for (const auto& m : report.mmd) {
        out << m.seed << "," << m.teacher << "," << m.student << "\n";
        text << "  seed " << m.seed << ": teacher " << num(m.teacher) << ", student "
             << num(m.student) << "\n";
      }
      report.written.push_back("mmd.csv");
    }
    if (s.contains("summary") && s["summary"].is_object()) {
      text << "mean +- sd over seeds:\n";
      for (const auto& [key, v] : s["summary"].items()) {
        text << "  " << key << ": " << num(v.value("mean", 0.0)) << " +- "
             << num(v.value("sd", 0.0)) << "\n";
      }
    }
  }

  if (options.project_features) {
    for (const char* model : {"teacher", "student", "scd"}) {
      const fs::path file = dir / (std::string("features_") + model + ".csv");
      if (!fs::exists(file)) continue;
      FeatureRows rows = read_features(file);
      std::vector<std::size_t> keep;
      std::map<std::string, int> per_domain;
      for (std::size_t k = 0; k < rows.values.size(); ++k) {
        if (per_domain[rows.domain[k]]++ < options.max_points_per_domain) keep.push_back(k);
      }
      if (keep.size() < 2) continue;
      Eigen::MatrixXd points(static_cast<Eigen::Index>(rows.values[keep[0]].size()),
                             static_cast<Eigen::Index>(keep.size()));
      for (std::size_t c = 0; c < keep.size(); ++c) {
        for (std::size_t r = 0; r < rows.values[keep[c]].size(); ++r) {
          points(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
              rows.values[keep[c]][r];
        }
      }
      const Eigen::MatrixXd y = tsne(points, options.tsne);
      const std::string name = std::string("tsne_") + model + ".csv";
      std::ofstream out(dir / name);
      out << "domain,label,x,y\n";
      for (std::size_t c = 0; c < keep.size(); ++c) {
        out << rows.domain[keep[c]] << "," << rows.label[keep[c]] << ","
            << y(static_cast<Eigen::Index>(c), 0) << "," << y(static_cast<Eigen::Index>(c), 1)
            << "\n";
      }
      report.written.push_back(name);
    }
  }

  text << "written:";
  for (const auto& w : report.written) text << " " << w;
  text << "\n";
  report.text = text.str();
  return report;
}

}  // namespace scd
