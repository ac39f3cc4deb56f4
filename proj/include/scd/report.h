#ifndef SCD_REPORT_H_
#define SCD_REPORT_H_

#include <string>
#include <vector>

#include "scd/projection.h"

namespace scd {

struct ReportOptions {
  bool project_features = true;
  TsneOptions tsne;
  // Rows taken per domain from each feature dump before projecting.
  int max_points_per_domain = 500;
};

struct MmdPair {
  long long seed = 0;
  double teacher = 0.0;
  double student = 0.0;
};

struct RoundLine {
  std::string file;
  long long seed = 0;
  double eta = 0.0;
  int round = 0;
  int disagree = 0;
  int agree = 0;
};

struct RunReport {
  std::string text;
  std::vector<MmdPair> mmd;
  std::vector<RoundLine> rounds;
  std::vector<std::string> written;  // files created in the run directory
};

// Reads the logs, summary and feature dumps of a run directory, writes
// curves.csv, rounds.csv, mmd.csv and tsne_<model>.csv next to them, and
// returns a printable digest. Throws ValidationError for a missing or empty
// directory and ParseError naming the file for a corrupt log.
RunReport build_report(const std::string& run_dir, const ReportOptions& options = {});

}  // namespace scd

#endif  // SCD_REPORT_H_
