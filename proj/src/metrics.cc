#include "scd/metrics.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>

#include "scd/error.h"
#include "scd/tagger.h"

namespace scd {

std::vector<Span> decode_spans(const LabelSequence& labels) {
  std::vector<Span> spans;
  int open = -1;
  const int n = static_cast<int>(labels.size());
  for (int t = 0; t < n; ++t) {
    switch (labels[static_cast<std::size_t>(t)]) {
      case Tag::kB:
        if (open >= 0) spans.push_back({open, t - 1});
        open = t;
        break;
      case Tag::kI:
        if (open < 0) open = t;
        break;
      case Tag::kO:
        if (open >= 0) spans.push_back({open, t - 1});
        open = -1;
        break;
    }
  }
  if (open >= 0) spans.push_back({open, n - 1});
  return spans;
}

std::string EvalReport::to_text() const {
  std::ostringstream os;
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return std::string(buf);
  };
  os << "precision = " << num(precision) << "\n"
     << "recall = " << num(recall) << "\n"
     << "f1 = " << num(f1) << "\n"
     << "gold_spans = " << gold << "\n"
     << "predicted_spans = " << predicted << "\n"
     << "matched_spans = " << matched << "\n";
  if (!per_run_f1.empty()) {
    os << "per_run_f1 =";
    for (double v : per_run_f1) os << " " << num(v);
    os << "\n";
  }
  return os.str();
}

EvalReport micro_f1(const std::vector<std::vector<Span>>& gold,
                    const std::vector<std::vector<Span>>& predicted) {
  if (gold.size() != predicted.size()) {
    throw AlignmentError("gold has " + std::to_string(gold.size()) +
                         " sentences, prediction has " +
                         std::to_string(predicted.size()));
  }
  EvalReport report;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    std::vector<Span> g = gold[s];
    std::sort(g.begin(), g.end());
    report.gold += static_cast<long>(g.size());
    report.predicted += static_cast<long>(predicted[s].size());
    for (const Span& p : predicted[s]) {
      if (std::binary_search(g.begin(), g.end(), p)) ++report.matched;
    }
  }
  report.precision = report.predicted > 0
                         ? static_cast<double>(report.matched) / report.predicted
                         : 0.0;
  report.recall =
      report.gold > 0 ? static_cast<double>(report.matched) / report.gold : 0.0;
  const double pr = report.precision + report.recall;
  report.f1 = pr > 0.0 ? 2.0 * report.precision * report.recall / pr : 0.0;
  return report;
}

EvalReport evaluate_labels(const std::vector<LabelSequence>& gold,
                           const std::vector<LabelSequence>& predicted) {
  if (gold.size() != predicted.size()) {
    throw AlignmentError("gold/predicted sentence counts differ");
  }
  std::vector<std::vector<Span>> g, p;
  g.reserve(gold.size());
  p.reserve(predicted.size());
  for (std::size_t s = 0; s < gold.size(); ++s) {
    if (gold[s].size() != predicted[s].size()) {
      throw AlignmentError("sentence " + std::to_string(s) +
                           ": gold/predicted lengths differ");
    }
    g.push_back(decode_spans(gold[s]));
    p.push_back(decode_spans(predicted[s]));
  }
  return micro_f1(g, p);
}

MeanSd mean_sd(const std::vector<double>& values) {
  MeanSd out;
  if (values.empty()) return out;
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) /
             static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return out;
}

namespace {

Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  Eigen::VectorXd nx = x.colwise().squaredNorm().transpose();
  Eigen::RowVectorXd ny = y.colwise().squaredNorm();
  Eigen::MatrixXd d = -2.0 * (x.transpose() * y);
  d.colwise() += nx;
  d.rowwise() += ny;
  return d.cwiseMax(0.0);
}

double mean_kernel(const Eigen::MatrixXd& sq_dist, const std::vector<double>& sigmas) {
  double total = 0.0;
  for (double sigma : sigmas) {
    total += (-sq_dist.array() / (2.0 * sigma * sigma)).exp().sum();
  }
  return total / (static_cast<double>(sigmas.size()) *
                  static_cast<double>(sq_dist.size()));
}

}  // namespace

double mmd(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
           const std::vector<double>& bandwidth_scales) {
  if (a.cols() == 0 || b.cols() == 0) {
    throw ValidationError("mmd needs two non-empty samples");
  }
  if (a.rows() != b.rows()) {
    throw ValidationError("mmd samples differ in dimensionality (" +
                          std::to_string(a.rows()) + " vs " +
                          std::to_string(b.rows()) + ")");
  }
  if (bandwidth_scales.empty()) throw ValidationError("mmd needs a bandwidth");

  Eigen::MatrixXd daa = squared_distances(a, a);
  Eigen::MatrixXd dbb = squared_distances(b, b);
  Eigen::MatrixXd dab = squared_distances(a, b);
  daa.diagonal().setZero();
  dbb.diagonal().setZero();

  // Median pairwise distance over the pooled sample (distinct pairs).
  std::vector<double> pool;
  pool.reserve(static_cast<std::size_t>(daa.size() / 2 + dbb.size() / 2 + dab.size()));
  for (Eigen::Index j = 0; j < daa.cols(); ++j)
    for (Eigen::Index i = 0; i < j; ++i) pool.push_back(daa(i, j));
  for (Eigen::Index j = 0; j < dbb.cols(); ++j)
    for (Eigen::Index i = 0; i < j; ++i) pool.push_back(dbb(i, j));
  for (Eigen::Index k = 0; k < dab.size(); ++k) pool.push_back(dab.data()[k]);
  double median_sq = 1.0;
  if (!pool.empty()) {
    auto mid = pool.begin() + static_cast<std::ptrdiff_t>(pool.size() / 2);
    std::nth_element(pool.begin(), mid, pool.end());
    if (*mid > 0.0) median_sq = *mid;
  }
  const double median = std::sqrt(median_sq);
  std::vector<double> sigmas;
  for (double s : bandwidth_scales) {
    if (!(s > 0.0)) throw ValidationError("bandwidth scales must be positive");
    sigmas.push_back(s * median);
  }
  double value = mean_kernel(daa, sigmas) + mean_kernel(dbb, sigmas) -
                 2.0 * mean_kernel(dab, sigmas);
  return std::max(0.0, value);
}

int export_features(const TaggerParams& params, const EmbeddingTable& embeddings,
                    const std::vector<EncodedSentence>& source,
                    const std::vector<EncodedSentence>& target, int n_max,
                    int sample_size, std::uint64_t seed, const std::string& path) {
  if (sample_size < 1) throw ConfigError("sample_size must be positive");
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write feature dump " + path);
  out << "domain,label";
  for (int k = 0; k < params.feature_dim(); ++k) out << ",f" << k;
  out << "\n";

  std::mt19937_64 rng(seed);
  int rows = 0;
  char buf[32];
  for (int side = 0; side < 2; ++side) {
    const auto& sentences = side == 0 ? source : target;
    const char* name = side == 0 ? "source" : "target";
    std::vector<std::pair<int, int>> tokens;
    for (int s = 0; s < static_cast<int>(sentences.size()); ++s) {
      for (int t = 0; t < sentences[static_cast<std::size_t>(s)].length(); ++t) {
        tokens.emplace_back(s, t);
      }
    }
    if (sample_size > static_cast<int>(tokens.size())) {
      std::cerr << "warning: " << name << " has only " << tokens.size()
                << " tokens; exporting all of them\n";
    }
    std::shuffle(tokens.begin(), tokens.end(), rng);
    tokens.resize(std::min(tokens.size(), static_cast<std::size_t>(sample_size)));

    // Encode only the sentences that own a sampled token.
    std::vector<int> owners;
    for (const auto& [s, t] : tokens) owners.push_back(s);
    std::sort(owners.begin(), owners.end());
    owners.erase(std::unique(owners.begin(), owners.end()), owners.end());
    std::vector<EncodedSentence> subset;
    for (int s : owners) subset.push_back(sentences[static_cast<std::size_t>(s)]);
    std::vector<LabelSequence> predicted;
    if (side == 1) predicted = predict(params, embeddings, subset, n_max);

    std::vector<Eigen::MatrixXd> feats;  // one 2H x length block per owner
    for (const Batch& batch : sequential_batches(subset, n_max, 64)) {
      TokenFeatures f = encode(params, embeddings, batch, false, 0);
      for (int j = 0; j < batch.size(); ++j) {
        Eigen::MatrixXd m(params.feature_dim(), batch.lengths[j]);
        for (int t = 0; t < batch.lengths[j]; ++t) m.col(t) = f.values.col(f.column(j, t));
        feats.push_back(std::move(m));
      }
    }
    for (const auto& [s, t] : tokens) {
      const auto k = static_cast<std::size_t>(
          std::lower_bound(owners.begin(), owners.end(), s) - owners.begin());
      int label;
      if (side == 0) {
        label = sentences[static_cast<std::size_t>(s)].labels[static_cast<std::size_t>(t)];
      } else {
        label = static_cast<int>(predicted[k][static_cast<std::size_t>(t)]);
      }
      out << name << ",";
      out << (label == kIgnoreLabel ? '-' : tag_char(static_cast<Tag>(label)));
      for (int r = 0; r < params.feature_dim(); ++r) {
        std::snprintf(buf, sizeof buf, ",%.9g", feats[k](r, t));
        out << buf;
      }
      out << "\n";
      ++rows;
    }
  }
  return rows;
}

}  // namespace scd
