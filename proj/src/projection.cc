#include "scd/projection.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "scd/error.h"

namespace scd {

namespace {

// Row-stochastic affinities whose entropy matches log(perplexity), found by
// bisection on the Gaussian precision of each point.
Eigen::MatrixXd conditional_affinities(const Eigen::MatrixXd& sq_dist, double perplexity) {
  const Eigen::Index n = sq_dist.rows();
  const double target = std::log(perplexity);
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double beta = 1.0, lo = 0.0, hi = std::numeric_limits<double>::infinity();
    double min_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i) min_d = std::min(min_d, sq_dist(i, j));
    }
    for (int it = 0; it < 100; ++it) {
      double sum = 0.0, weighted = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        const double w = std::exp(-beta * (sq_dist(i, j) - min_d));
        p(i, j) = w;
        sum += w;
        weighted += w * (sq_dist(i, j) - min_d);
      }
      const double entropy = std::log(sum) + beta * weighted / sum;
      p.row(i) /= sum;
      const double diff = entropy - target;
      if (std::abs(diff) < 1e-5) break;
      if (diff > 0) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : (beta + hi) / 2.0;
      } else {
        hi = beta;
        beta = (beta + lo) / 2.0;
      }
    }
  }
  return p;
}

}  // namespace

Eigen::MatrixXd tsne(const Eigen::MatrixXd& points, const TsneOptions& options) {
  const Eigen::Index n = points.cols();
  if (n < 2) throw ValidationError("t-SNE needs at least two points");
  if (!(options.perplexity > 0.0)) throw ConfigError("perplexity must be > 0");
  const double perplexity =
      std::min(options.perplexity, std::max(1.0, static_cast<double>(n - 1) / 3.0));

  const Eigen::VectorXd norms = points.colwise().squaredNorm().transpose();
  Eigen::MatrixXd sq_dist = (-2.0 * points.transpose() * points).colwise() + norms;
  sq_dist.rowwise() += norms.transpose();
  sq_dist = sq_dist.cwiseMax(0.0);

  Eigen::MatrixXd p = conditional_affinities(sq_dist, perplexity);
  p = (p + p.transpose()) / (2.0 * static_cast<double>(n));
  p = p.cwiseMax(1e-12);
  p.diagonal().setZero();

  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal(0.0, 1e-4);
  Eigen::MatrixXd y(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    y(i, 0) = normal(rng);
    y(i, 1) = normal(rng);
  }
  Eigen::MatrixXd velocity = Eigen::MatrixXd::Zero(n, 2);
  Eigen::MatrixXd gains = Eigen::MatrixXd::Ones(n, 2);
  Eigen::MatrixXd num(n, n), grad(n, 2);

  for (int it = 0; it < options.iterations; ++it) {
    const double exaggeration =
        it < options.exaggeration_iterations ? options.early_exaggeration : 1.0;
    const double momentum = it < options.exaggeration_iterations ? 0.5 : 0.8;

    const Eigen::VectorXd yn = y.rowwise().squaredNorm();
    num = (-2.0 * y * y.transpose()).colwise() + yn;
    num.rowwise() += yn.transpose();
    num = (1.0 + num.array()).inverse().matrix();
    num.diagonal().setZero();
    const double q_sum = std::max(num.sum(), 1e-300);

    // dC/dy_i = 4 sum_j (p_ij - q_ij) num_ij (y_i - y_j)
    const Eigen::MatrixXd w =
        ((exaggeration * p).array() - (num / q_sum).array().max(1e-12)) * num.array();
    grad = 4.0 * (w.rowwise().sum().asDiagonal() * y - w * y);

    for (Eigen::Index i = 0; i < n; ++i) {
      for (int k = 0; k < 2; ++k) {
        const bool same_sign = (grad(i, k) > 0) == (velocity(i, k) > 0);
        gains(i, k) = std::max(same_sign ? gains(i, k) * 0.8 : gains(i, k) + 0.2, 0.01);
      }
    }
    velocity = momentum * velocity -
               options.learning_rate * gains.cwiseProduct(grad);
    y += velocity;
    y.rowwise() -= y.colwise().mean();
  }
  return y;
}

}  // namespace scd
