#ifndef SCD_PROJECTION_H_
#define SCD_PROJECTION_H_

#include <cstdint>

#include <Eigen/Core>

namespace scd {

struct TsneOptions {
  double perplexity = 30.0;
  int iterations = 1000;
  double learning_rate = 200.0;
  double early_exaggeration = 12.0;
  int exaggeration_iterations = 250;
  std::uint64_t seed = 1;
};

// Exact (O(N^2)) t-SNE of the columns of `points` (dim x N). Returns N x 2
// coordinates. Deterministic for a given seed. The perplexity is capped at
// (N - 1) / 3 for small inputs.
Eigen::MatrixXd tsne(const Eigen::MatrixXd& points, const TsneOptions& options = {});

}  // namespace scd

#endif  // SCD_PROJECTION_H_
