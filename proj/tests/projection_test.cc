#include <random>

#include <gtest/gtest.h>

#include "scd/error.h"
#include "scd/projection.h"

namespace scd {
namespace {

Eigen::MatrixXd two_clusters(int per_cluster, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.3);
  Eigen::MatrixXd x(6, 2 * per_cluster);
  for (int c = 0; c < x.cols(); ++c) {
    for (int r = 0; r < 6; ++r) x(r, c) = g(rng) + (c < per_cluster ? 4.0 : -4.0);
  }
  return x;
}

TEST(Tsne, KeepsWellSeparatedClustersApart) {
  TsneOptions opt;
  opt.iterations = 400;
  opt.perplexity = 10;
  const Eigen::MatrixXd y = tsne(two_clusters(40, 1), opt);
  ASSERT_EQ(y.rows(), 80);
  ASSERT_EQ(y.cols(), 2);
  // Every point's nearest embedded neighbour comes from its own cluster.
  for (int i = 0; i < 80; ++i) {
    int nearest = -1;
    double best = 0.0;
    for (int j = 0; j < 80; ++j) {
      const double d = (y.row(i) - y.row(j)).squaredNorm();
      if (j != i && (nearest < 0 || d < best)) {
        nearest = j;
        best = d;
      }
    }
    EXPECT_EQ(nearest < 40, i < 40) << i;
  }
}

TEST(Tsne, SeededAndDeterministic) {
  TsneOptions opt;
  opt.iterations = 50;
  const auto x = two_clusters(10, 2);
  EXPECT_EQ(tsne(x, opt), tsne(x, opt));
  TsneOptions other = opt;
  other.seed = 5;
  EXPECT_NE(tsne(x, opt), tsne(x, other));
}

TEST(Tsne, RejectsDegenerateInput) {
  EXPECT_THROW(tsne(Eigen::MatrixXd(3, 1)), ValidationError);
}

}  // namespace
}  // namespace scd
