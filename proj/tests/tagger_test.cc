#include <algorithm>

#include <gtest/gtest.h>

#include "helpers.h"
#include "scd/error.h"
#include "scd/metrics.h"
#include "scd/tagger.h"

namespace scd {
namespace {

using testing::encoded;
using testing::toy_world;

// b = 2 sentences, n = 3 positions (one sentence padded), H = 4.
Batch toy_batch() {
  std::vector<EncodedSentence> s{encoded({2, 3, 4}, {0, 1, 2}), encoded({5, 2}, {2, 0})};
  return make_batch(s, 3);
}

TEST(TaggerGradient, ClassificationLossMatchesFiniteDifferences) {
  auto toy = toy_world(6, 5, 3);
  TaggerParams params = TaggerParams::initialize(5, 4, 0.0, 11);
  // Larger weights than the default init so every gate is away from zero.
  params.for_each_tensor([](const char*, Eigen::MatrixXd& t) { t *= 5.0; });
  const Batch batch = toy_batch();
  const auto weights = labeled_sentence_weights(batch.labels);

  TaggerParams grad = params.zeros_like();
  tagger_loss_and_grad(params, toy.embeddings, batch, weights, false, 0, grad);
  auto loss = [&](const TaggerParams& p) {
    return classification_loss(classify_labels(p, encode(p, toy.embeddings, batch, false, 0)),
                               batch.labels);
  };
  EXPECT_LT(testing::check_gradient<TaggerParams>(params, grad, loss), 1e-4);
}

TEST(TaggerGradient, HoldsWithADropoutMaskFixedBySeed) {
  auto toy = toy_world(6, 5, 4);
  TaggerParams params = TaggerParams::initialize(5, 4, 0.5, 12);
  params.for_each_tensor([](const char*, Eigen::MatrixXd& t) { t *= 5.0; });
  const Batch batch = toy_batch();
  const std::vector<double> weights{0.7, 1.3};
  TaggerParams grad = params.zeros_like();
  tagger_loss_and_grad(params, toy.embeddings, batch, weights, true, 99, grad);
  auto loss = [&](const TaggerParams& p) {
    return weighted_label_loss(classify_labels(p, encode(p, toy.embeddings, batch, true, 99)),
                               batch.labels, weights, nullptr);
  };
  testing::check_gradient<TaggerParams>(params, grad, loss);
}

TEST(Tagger, LossIsUnchangedByExtraPadding) {
  auto toy = toy_world(6, 5, 5);
  const TaggerParams params = TaggerParams::initialize(5, 4, 0.0, 1);
  std::vector<EncodedSentence> s{encoded({2, 3, 4}, {0, 1, 2}), encoded({5, 2}, {2, 0})};
  const Batch narrow = make_batch(s, 3);
  const Batch wide = make_batch(s, 9);
  const auto l1 = classification_loss(
      classify_labels(params, encode(params, toy.embeddings, narrow, false, 0)), narrow.labels);
  const auto l2 = classification_loss(
      classify_labels(params, encode(params, toy.embeddings, wide, false, 0)), wide.labels);
  EXPECT_NEAR(l1, l2, 1e-12);
  EXPECT_EQ(predict(params, toy.embeddings, s, 3), predict(params, toy.embeddings, s, 9));
}

TEST(Tagger, PredictionsDoNotDependOnBatchMates) {
  auto toy = toy_world(8, 5, 6);
  const TaggerParams params = TaggerParams::initialize(5, 4, 0.0, 2);
  const std::vector<EncodedSentence> s{encoded({2, 3, 4, 5}, {}), encoded({6}, {}),
                                       encoded({7, 2}, {})};
  const auto together = predict(params, toy.embeddings, s, 4, 3);
  for (std::size_t k = 0; k < s.size(); ++k) {
    const auto alone = predict(params, toy.embeddings, {s[k]}, 4, 1);
    EXPECT_EQ(alone[0], together[k]);
  }
}

TEST(Tagger, LossIsPermutationInvariant) {
  auto toy = toy_world(8, 5, 7);
  const TaggerParams params = TaggerParams::initialize(5, 4, 0.0, 3);
  std::vector<EncodedSentence> s{encoded({2, 3, 4}, {0, 1, 2}), encoded({5, 2}, {2, 0}),
                                 encoded({6, 7, 2}, {2, 2, 0})};
  const Batch a = make_batch(s, 3);
  std::reverse(s.begin(), s.end());
  const Batch b = make_batch(s, 3);
  auto loss = [&](const Batch& batch) {
    return classification_loss(
        classify_labels(params, encode(params, toy.embeddings, batch, false, 0)), batch.labels);
  };
  EXPECT_NEAR(loss(a), loss(b), 1e-12);
}

TEST(Tagger, FeaturesAreZeroAtPaddedPositions) {
  auto toy = toy_world(6, 5, 8);
  const TaggerParams params = TaggerParams::initialize(5, 4, 0.0, 4);
  const Batch batch = toy_batch();
  const TokenFeatures f = encode(params, toy.embeddings, batch, false, 0);
  EXPECT_EQ(f.at(1, 2).norm(), 0.0);
  EXPECT_GT(f.at(1, 1).norm(), 0.0);
  EXPECT_EQ(f.values.rows(), 8);
}

TEST(Tagger, UnknownTokenIndexIsALookupError) {
  auto toy = toy_world(4, 3, 1);
  const TaggerParams params = TaggerParams::initialize(3, 2, 0.0, 1);
  const Batch batch = make_batch(std::vector<EncodedSentence>{encoded({2, 99}, {})}, 2);
  EXPECT_THROW(encode(params, toy.embeddings, batch, false, 0), LookupError);
}

TEST(Tagger, ArgmaxBreaksTiesTowardTheLowestTag) {
  Eigen::Vector3d p(1.0 / 3, 1.0 / 3, 1.0 / 3);
  EXPECT_EQ(argmax_tag(p), 0);
  EXPECT_EQ(argmax_tag(Eigen::Vector3d(0.2, 0.4, 0.4)), 1);
}

TEST(Tagger, LossWithNothingLabeledIsZero) {
  auto toy = toy_world(4, 3, 1);
  const TaggerParams params = TaggerParams::initialize(3, 2, 0.0, 1);
  const Batch batch = make_batch(std::vector<EncodedSentence>{encoded({2, 3}, {})}, 2);
  EXPECT_EQ(classification_loss(
                classify_labels(params, encode(params, toy.embeddings, batch, false, 0)),
                batch.labels),
            0.0);
}

TEST(Tagger, InitializationIsSeededUniform) {
  const TaggerParams a = TaggerParams::initialize(5, 3, 0.5, 42);
  const TaggerParams b = TaggerParams::initialize(5, 3, 0.5, 42);
  const TaggerParams c = TaggerParams::initialize(5, 3, 0.5, 43);
  EXPECT_TRUE(a == b);
  EXPECT_FALSE(a == c);
  a.for_each_tensor([](const char*, const Eigen::MatrixXd& t) {
    EXPECT_LE(t.cwiseAbs().maxCoeff(), 0.1);
  });
  EXPECT_EQ(a.forward.input.rows(), 12);
  EXPECT_EQ(a.label_weight.cols(), 6);
}

TEST(Adam, ZeroLearningRateLeavesParametersUnchanged) {
  TaggerParams p = TaggerParams::initialize(3, 2, 0.0, 5);
  const TaggerParams before = p;
  TaggerParams g = p.zeros_like();
  g.for_each_tensor([](const char*, Eigen::MatrixXd& t) { t.setOnes(); });
  Adam adam(0.0);
  adam.step(p, g);
  EXPECT_TRUE(p == before);
}

TEST(Adam, FirstStepMovesEachWeightByTheLearningRate) {
  TaggerParams p = TaggerParams::initialize(3, 2, 0.0, 5);
  const TaggerParams before = p;
  TaggerParams g = p.zeros_like();
  g.for_each_tensor([](const char*, Eigen::MatrixXd& t) { t.setConstant(-2.5); });
  Adam adam(0.01);
  adam.step(p, g);
  // Bias-corrected first step is lr * g / |g| (up to epsilon).
  EXPECT_NEAR(p.label_bias(0) - before.label_bias(0), 0.01, 1e-8);
}

TEST(Teacher, OverfitsATinySeparableCorpus) {
  // 20 sentences; "good X" marks X as an aspect, other nouns are O.
  Corpus corpus;
  const char* nouns[] = {"pizza", "staff", "room", "price", "menu"};
  for (int k = 0; k < 20; ++k) {
    const std::string a = nouns[k % 5], b = nouns[(k + 2) % 5];
    if (k % 2 == 0) {
      corpus.source_train.push_back(testing::sentence("the good " + a + " and " + b, "OOBOO"));
    } else {
      corpus.source_train.push_back(testing::sentence(b + " was fine , good " + a, "OOOOOB"));
    }
  }
  Vocabulary vocab = Vocabulary::build(corpus);
  const EncodedCorpus enc = encode_corpus(corpus, vocab);
  const EmbeddingTable emb = random_embeddings(vocab, 10, 3);
  TrainConfig cfg;
  cfg.allow_off_grid = true;
  cfg.embedding_dim = 10;
  cfg.hidden = 16;
  cfg.dropout = 0.0;
  cfg.batch_size = 4;
  cfg.learning_rate = 0.01;
  cfg.teacher_epochs = 50;
  TrainingOptions opt;
  opt.track_dev = false;
  const TaggerParams teacher = train_teacher(enc, emb, cfg, opt);
  EXPECT_DOUBLE_EQ(evaluate_f1(teacher, emb, enc.source_train, enc.n_max), 1.0);
  // Reproduces the gold labels sentence by sentence.
  const auto labels = predict(teacher, emb, enc.source_train, enc.n_max);
  for (std::size_t k = 0; k < labels.size(); ++k) {
    EXPECT_EQ(labels[k], *corpus.source_train[k].labels);
  }
}

TEST(Teacher, TrainingIsDeterministicPerSeed) {
  Corpus corpus;
  corpus.source_train = {testing::sentence("a good b", "OOB"), testing::sentence("c d", "BO"),
                         testing::sentence("good e f", "OBO")};
  Vocabulary vocab = Vocabulary::build(corpus);
  const EncodedCorpus enc = encode_corpus(corpus, vocab);
  const EmbeddingTable emb = random_embeddings(vocab, 4, 1);
  TrainConfig cfg;
  cfg.allow_off_grid = true;
  cfg.embedding_dim = 4;
  cfg.hidden = 3;
  cfg.batch_size = 2;
  cfg.teacher_epochs = 3;
  TrainingOptions opt;
  opt.track_dev = false;
  EXPECT_TRUE(train_teacher(enc, emb, cfg, opt) == train_teacher(enc, emb, cfg, opt));
  TrainConfig other = cfg;
  other.seed = 2;
  EXPECT_FALSE(train_teacher(enc, emb, cfg, opt) == train_teacher(enc, emb, other, opt));
}

}  // namespace
}  // namespace scd
