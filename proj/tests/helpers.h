#ifndef SCD_TESTS_HELPERS_H_
#define SCD_TESTS_HELPERS_H_

#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "scd/corpus.h"
#include "scd/tagger.h"

namespace scd::testing {

inline TaggedSentence sentence(const std::string& text, const std::string& tags,
                               Domain domain = Domain::kSource) {
  TaggedSentence s;
  s.domain = domain;
  std::string tok;
  for (char c : text + " ") {
    if (c == ' ') {
      if (!tok.empty()) s.tokens.push_back(tok);
      tok.clear();
    } else {
      tok += c;
    }
  }
  if (!tags.empty()) {
    LabelSequence labels;
    for (char c : tags) labels.push_back(*parse_tag(std::string(1, c)));
    s.labels = labels;
  }
  return s;
}

// Tiny random world: a vocabulary of `words` entries with random vectors.
struct Toy {
  Vocabulary vocab;
  EmbeddingTable embeddings;
};

inline Toy toy_world(int words, int dim, std::uint64_t seed) {
  Toy t;
  for (int k = 0; k < words; ++k) t.vocab.add("w" + std::to_string(k));
  t.embeddings = random_embeddings(t.vocab, dim, seed);
  std::mt19937_64 rng(seed + 17);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int c = 2; c < t.embeddings.size(); ++c) {
    for (int r = 0; r < dim; ++r) t.embeddings.vectors(r, c) = n(rng);
  }
  return t;
}

inline EncodedSentence encoded(std::vector<int> ids, std::vector<int> labels,
                               Domain domain = Domain::kSource) {
  EncodedSentence s;
  s.ids = std::move(ids);
  s.labels = labels.empty() ? std::vector<int>(s.ids.size(), kIgnoreLabel) : std::move(labels);
  s.domain = domain;
  s.role = domain == Domain::kSource ? SentenceRole::kSource : SentenceRole::kTarget;
  return s;
}

// Finite differences over every tensor element of `params`; `loss` must be
// a deterministic function of the parameters. Fails the test when an
// element's relative error reaches `tolerance`.
template <typename Params>
double check_gradient(Params& params, const Params& analytic,
                      const std::function<double(const Params&)>& loss,
                      double tolerance = 1e-4, double step = 1e-4) {
  std::vector<std::pair<std::string, const Eigen::MatrixXd*>> grads;
  analytic.for_each_tensor(
      [&](const char* name, const Eigen::MatrixXd& g) { grads.emplace_back(name, &g); });
  std::size_t k = 0;
  double worst = 0.0;
  params.for_each_tensor([&](const char* name, Eigen::MatrixXd& p) {
    const Eigen::MatrixXd& g = *grads[k++].second;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      const double saved = p.data()[i];
      auto at = [&](double offset) {
        p.data()[i] = saved + offset;
        return loss(params);
      };
      // Fourth-order stencil: plain central differences are too noisy for
      // gradients around 1e-6.
      const double numeric =
          (at(-2 * step) - 8 * at(-step) + 8 * at(step) - at(2 * step)) / (12.0 * step);
      p.data()[i] = saved;
      const double a = g.data()[i];
      const double scale = std::max(std::abs(a), std::abs(numeric));
      if (scale < 1e-7) {
        EXPECT_LT(std::abs(a - numeric), 1e-8) << name << "[" << i << "]";
        continue;
      }
      const double rel = std::abs(a - numeric) / scale;
      worst = std::max(worst, rel);
      EXPECT_LT(rel, tolerance) << name << "[" << i << "] analytic " << a << " numeric "
                                << numeric;
    }
  });
  return worst;
}

}  // namespace scd::testing

#endif  // SCD_TESTS_HELPERS_H_
