#ifndef SCD_METRICS_H_
#define SCD_METRICS_H_

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "scd/corpus.h"

namespace scd {

struct TaggerParams;

// Inclusive token span [start, end].
struct Span {
  int start = 0;
  int end = 0;

  auto operator<=>(const Span&) const = default;
};

// B opens a span, following I tokens extend it, O or the next B closes it.
// A stray I (at position 0 or right after O) opens a new span.
std::vector<Span> decode_spans(const LabelSequence& labels);

struct EvalReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  long gold = 0;
  long predicted = 0;
  long matched = 0;
  std::vector<double> per_run_f1;

  // key = value lines, one field per line.
  std::string to_text() const;
};

// Exact-match micro P/R/F1 over sentence-aligned span lists. 0/0 is 0.
// Throws AlignmentError when the lists differ in length.
EvalReport micro_f1(const std::vector<std::vector<Span>>& gold,
                    const std::vector<std::vector<Span>>& predicted);

EvalReport evaluate_labels(const std::vector<LabelSequence>& gold,
                           const std::vector<LabelSequence>& predicted);

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation, 0 for a single value
};
MeanSd mean_sd(const std::vector<double>& values);

// Multiplies the median pairwise distance of the pooled sample.
inline const std::vector<double>& default_bandwidth_scales() {
  static const std::vector<double> scales{0.25, 0.5, 1.0, 2.0, 4.0};
  return scales;
}

// Biased empirical MMD^2 between the columns of `a` and `b` with a Gaussian
// kernel averaged over bandwidths sigma_k = scale_k * median pairwise
// distance of a and b pooled. Throws ValidationError on empty input or
// mismatched dimensionality.
double mmd(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
           const std::vector<double>& bandwidth_scales = default_bandwidth_scales());

// Writes a CSV dump "domain,label,f0,...,f{2H-1}" of token features from
// `source` (gold labels) and `target` (labels predicted by `params`):
// `sample_size` random tokens per domain, all of them when fewer exist.
// Returns the number of rows written.
int export_features(const TaggerParams& params, const EmbeddingTable& embeddings,
                    const std::vector<EncodedSentence>& source,
                    const std::vector<EncodedSentence>& target, int n_max,
                    int sample_size, std::uint64_t seed, const std::string& path);

}  // namespace scd

#endif  // SCD_METRICS_H_
