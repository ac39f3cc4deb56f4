#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <tuple>

#include <gtest/gtest.h>

#include "helpers.h"
#include "scd/error.h"
#include "scd/metrics.h"

namespace scd {
namespace {

// Reference decoder written from the span definition rather than as a
// state machine: position i starts a span when it is B, or when it is I and
// the previous position is O (or i = 0). The span runs over the following
// I tokens.
std::vector<Span> reference_spans(const LabelSequence& y) {
  std::vector<Span> out;
  const int n = static_cast<int>(y.size());
  for (int i = 0; i < n; ++i) {
    const bool starts =
        y[i] == Tag::kB || (y[i] == Tag::kI && (i == 0 || y[i - 1] == Tag::kO));
    if (!starts) continue;
    int end = i;
    while (end + 1 < n && y[end + 1] == Tag::kI) ++end;
    out.push_back({i, end});
  }
  return out;
}

TEST(DecodeSpans, MatchesTheReferenceOnEveryLengthSixSequence) {
  int count = 0;
  for (int code = 0; code < 729; ++code) {
    LabelSequence y;
    for (int k = 0, c = code; k < 6; ++k, c /= 3) y.push_back(static_cast<Tag>(c % 3));
    ASSERT_EQ(decode_spans(y), reference_spans(y)) << format_labels(y);
    ++count;
  }
  EXPECT_EQ(count, 729);
}

TEST(DecodeSpans, StrayIOpensASpan) {
  auto spans = decode_spans({Tag::kI, Tag::kI, Tag::kO, Tag::kI});
  ASSERT_EQ(spans.size(), 2u);
  EXPECT_EQ(spans[0], (Span{0, 1}));
  EXPECT_EQ(spans[1], (Span{3, 3}));
  EXPECT_EQ(decode_spans({Tag::kB, Tag::kB}).size(), 2u);
}

TEST(MicroF1, MatchesASetBasedReference) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> len(1, 9), tag(0, 2);
  std::bernoulli_distribution keep(0.7);
  for (int trial = 0; trial < 10000; ++trial) {
    const int sentences = std::uniform_int_distribution<int>(1, 4)(rng);
    std::vector<LabelSequence> gold, pred;
    for (int j = 0; j < sentences; ++j) {
      LabelSequence g, p;
      for (int k = len(rng); k > 0; --k) {
        g.push_back(static_cast<Tag>(tag(rng)));
        p.push_back(keep(rng) ? g.back() : static_cast<Tag>(tag(rng)));
      }
      gold.push_back(g);
      pred.push_back(p);
    }
    std::set<std::tuple<int, int, int>> gs, ps;
    for (int j = 0; j < sentences; ++j) {
      for (const auto& s : reference_spans(gold[j])) gs.insert({j, s.start, s.end});
      for (const auto& s : reference_spans(pred[j])) ps.insert({j, s.start, s.end});
    }
    int tp = 0;
    for (const auto& s : ps) tp += gs.count(s);
    const double prec = ps.empty() ? 0.0 : static_cast<double>(tp) / ps.size();
    const double rec = gs.empty() ? 0.0 : static_cast<double>(tp) / gs.size();
    const double f1 = prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;

    const EvalReport r = evaluate_labels(gold, pred);
    ASSERT_EQ(r.matched, tp);
    ASSERT_EQ(r.gold, static_cast<long>(gs.size()));
    ASSERT_EQ(r.predicted, static_cast<long>(ps.size()));
    ASSERT_NEAR(r.f1, f1, 1e-12);
    ASSERT_NEAR(r.precision, prec, 1e-12);
    ASSERT_NEAR(r.recall, rec, 1e-12);
  }
}

TEST(MicroF1, EdgeCases) {
  EXPECT_EQ(micro_f1({{}}, {{}}).f1, 0.0);
  EXPECT_THROW(micro_f1({{}}, {}), AlignmentError);
  // Boundary mismatch gives no credit.
  const auto r = micro_f1({{Span{0, 1}}}, {{Span{0, 0}}});
  EXPECT_EQ(r.matched, 0);
  EXPECT_EQ(r.f1, 0.0);
  EXPECT_NE(r.to_text().find("f1 = "), std::string::npos);
}

TEST(MeanSd, SampleStandardDeviation) {
  const MeanSd m = mean_sd({1.0, 2.0, 3.0, 4.0});
  EXPECT_DOUBLE_EQ(m.mean, 2.5);
  EXPECT_NEAR(m.sd, std::sqrt(5.0 / 3.0), 1e-12);
  EXPECT_EQ(mean_sd({7.0}).sd, 0.0);
}

Eigen::MatrixXd cloud(int dim, int n, double mean, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(mean, 1.0);
  Eigen::MatrixXd x(dim, n);
  for (Eigen::Index k = 0; k < x.size(); ++k) x.data()[k] = g(rng);
  return x;
}

TEST(Mmd, IdentityAndSymmetry) {
  const auto a = cloud(5, 60, 0.0, 1), b = cloud(5, 40, 0.7, 2);
  EXPECT_LT(mmd(a, a), 1e-6);
  EXPECT_NEAR(mmd(a, b), mmd(b, a), 1e-12);
}

TEST(Mmd, NonNegativeOnRandomInputs) {
  for (std::uint64_t s = 0; s < 30; ++s) {
    const auto a = cloud(3, 10 + s, 0.0, 100 + s), b = cloud(3, 25, 0.1 * s, 200 + s);
    EXPECT_GE(mmd(a, b), 0.0);
  }
}

TEST(Mmd, SeparatedCloudsScoreTenTimesHigherThanSameMeanClouds) {
  const auto far = mmd(cloud(4, 200, -5.0, 11), cloud(4, 200, 5.0, 12));
  const auto near = mmd(cloud(4, 200, 0.0, 13), cloud(4, 200, 0.0, 14));
  EXPECT_GE(far, 10.0 * near);
}

TEST(Mmd, RejectsEmptyOrMismatchedInputs) {
  EXPECT_THROW(mmd(Eigen::MatrixXd(3, 0), cloud(3, 4, 0, 1)), ValidationError);
  EXPECT_THROW(mmd(cloud(3, 4, 0, 1), cloud(2, 4, 0, 1)), ValidationError);
}

TEST(ExportFeatures, WritesSampledRowsWithHeader) {
  auto toy = testing::toy_world(6, 4, 3);
  const TaggerParams params = TaggerParams::initialize(4, 2, 0.0, 1);
  std::vector<EncodedSentence> src{testing::encoded({2, 3, 4}, {0, 1, 2}),
                                   testing::encoded({5}, {2})};
  std::vector<EncodedSentence> tgt{testing::encoded({6, 7}, {}, Domain::kTarget)};
  const auto path = (std::filesystem::temp_directory_path() / "scd_features_test.csv").string();
  // Asking for more than exists takes every token.
  EXPECT_EQ(export_features(params, toy.embeddings, src, tgt, 3, 10, 1, path), 6);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "domain,label,f0,f1,f2,f3");
  EXPECT_EQ(export_features(params, toy.embeddings, src, tgt, 3, 2, 1, path), 4);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace scd
