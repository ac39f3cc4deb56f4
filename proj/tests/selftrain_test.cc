#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "helpers.h"
#include "scd/error.h"
#include "scd/selftrain.h"

namespace scd {
namespace {

using testing::encoded;

LabelSequence seq(const std::string& tags) {
  LabelSequence out;
  for (char c : tags) out.push_back(*parse_tag(std::string(1, c)));
  return out;
}

std::vector<EncodedSentence> targets_of(const std::vector<LabelSequence>& labels) {
  std::vector<EncodedSentence> out;
  for (const auto& l : labels) {
    out.push_back(encoded(std::vector<int>(l.size(), 2), {}, Domain::kTarget));
  }
  return out;
}

TEST(Partition, RandomPairsSatisfyTheDefinition) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> len(1, 8), tag(0, 2);
  std::bernoulli_distribution copy(0.6), flip(0.15);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = std::uniform_int_distribution<int>(1, 12)(rng);
    std::vector<LabelSequence> teacher, student;
    for (int j = 0; j < n; ++j) {
      LabelSequence t;
      for (int k = len(rng); k > 0; --k) t.push_back(static_cast<Tag>(tag(rng)));
      LabelSequence s = t;
      if (!copy(rng)) {
        for (auto& x : s) {
          if (flip(rng)) x = static_cast<Tag>(tag(rng));
        }
      }
      teacher.push_back(t);
      student.push_back(s);
    }
    const auto p = partition(teacher, student, targets_of(teacher));
    std::set<int> d(p.disagree.begin(), p.disagree.end()), a(p.agree.begin(), p.agree.end());
    ASSERT_EQ(d.size(), p.disagree.size());
    ASSERT_EQ(a.size(), p.agree.size());
    for (int j : d) ASSERT_FALSE(a.count(j));
    ASSERT_EQ(static_cast<int>(d.size() + a.size()), n);
    for (int j = 0; j < n; ++j) {
      bool exists_diff = false;
      for (std::size_t k = 0; k < teacher[j].size(); ++k) {
        exists_diff |= teacher[j][k] != student[j][k];
      }
      ASSERT_EQ(exists_diff, d.count(j) == 1) << "sentence " << j;
    }
    ASSERT_EQ(p.student_labels, student);
    ASSERT_EQ(p.teacher_labels, teacher);
  }
}

TEST(Partition, IdenticalLabelsMakeEverythingAgree) {
  std::vector<LabelSequence> t{seq("BOO"), seq("OO")};
  const auto p = partition(t, t, targets_of(t));
  EXPECT_TRUE(p.disagree.empty());
  EXPECT_EQ(p.agree, (std::vector<int>{0, 1}));
}

TEST(Partition, DisagreementOnSentencesOneAndThree) {
  std::vector<LabelSequence> t{seq("BOO"), seq("OBI"), seq("OOO")};
  std::vector<LabelSequence> s{seq("BOB"), seq("OBI"), seq("BOO")};
  const auto p = partition(t, s, targets_of(t));
  EXPECT_EQ(p.disagree, (std::vector<int>{0, 2}));
  EXPECT_EQ(p.agree, (std::vector<int>{1}));
  const auto pseudo = p.pseudo_sentences(targets_of(t));
  EXPECT_EQ(pseudo[0].role, SentenceRole::kDisagree);
  EXPECT_EQ(pseudo[1].role, SentenceRole::kAgree);
  EXPECT_EQ(pseudo[0].labels, (std::vector<int>{0, 2, 0}));  // student labels
  EXPECT_EQ(pseudo[2].labels, (std::vector<int>{0, 2, 2}));
}

TEST(Partition, MisalignedInputsAreRejected) {
  std::vector<LabelSequence> t{seq("BO"), seq("O")};
  std::vector<LabelSequence> s{seq("BO")};
  EXPECT_THROW(partition(t, s, targets_of(t)), AlignmentError);
  std::vector<LabelSequence> wrong_len{seq("BO"), seq("OO")};
  EXPECT_THROW(partition(t, wrong_len, targets_of(t)), AlignmentError);
}

TEST(RoundLoss, HandComputedExample) {
  RoundLossTerms terms;
  terms.source = 1.0;
  terms.disagree_sum = 4.0;
  terms.disagree_count = 2;
  terms.agree_sum = 3.0;
  terms.agree_count = 1;
  EXPECT_DOUBLE_EQ(combine_round_loss(terms, 0.5), 4.5);
  EXPECT_DOUBLE_EQ(combine_round_loss(terms, 0.0), 3.0);
  EXPECT_THROW(combine_round_loss(terms, 1.5), ConfigError);
  EXPECT_THROW(combine_round_loss(terms, -0.1), ConfigError);
}

TEST(RoundLoss, EmptySetsContributeNothing) {
  RoundLossTerms terms;
  terms.source = 0.25;
  EXPECT_DOUBLE_EQ(combine_round_loss(terms, 1.0), 0.25);
}

// Probabilities chosen so each token's cross-entropy is known exactly.
LabelProbs probs_with(int batch, int steps, double p_true, const std::vector<LabelSequence>& y) {
  LabelProbs probs;
  probs.batch = batch;
  probs.steps = steps;
  probs.values = Eigen::MatrixXd::Constant(3, batch * steps, (1.0 - p_true) / 2.0);
  for (int j = 0; j < batch; ++j) {
    for (int t = 0; t < steps; ++t) {
      const int tag = t < static_cast<int>(y[j].size()) ? static_cast<int>(y[j][t]) : 2;
      probs.values(tag, t * batch + j) = p_true;
    }
  }
  return probs;
}

TEST(RoundLoss, WholeSetLossReproducesTheWorkedExample) {
  // Two disagreeing sentences with 2 tokens each and one agreeing sentence
  // with 3 tokens; every token loss is 1, so the D_d sum is 4 and the D_a sum
  // is 3. One source sentence of one token with loss 1.
  const double p = std::exp(-1.0);
  std::vector<LabelSequence> teacher{seq("BO"), seq("OO"), seq("BIO")};
  std::vector<LabelSequence> student{seq("OO"), seq("OB"), seq("BIO")};
  const auto part = partition(teacher, student, targets_of(teacher));
  ASSERT_EQ(part.disagree.size(), 2u);
  const LabelProbs target = probs_with(3, 3, p, student);
  Eigen::MatrixXi source_labels(1, 1);
  source_labels << 0;
  const LabelProbs source = probs_with(1, 1, p, {seq("B")});
  EXPECT_NEAR(selftrain_round_loss(source, source_labels, target, part, 0.5), 4.5, 1e-12);

  // Affine in eta: three collinear points with slope = the D_a term (3).
  const double l0 = selftrain_round_loss(source, source_labels, target, part, 0.0);
  const double lh = selftrain_round_loss(source, source_labels, target, part, 0.5);
  const double l1 = selftrain_round_loss(source, source_labels, target, part, 1.0);
  EXPECT_NEAR(lh - l0, l1 - lh, 1e-9);
  EXPECT_NEAR(l1 - l0, 3.0, 1e-9);
}

TEST(Stopping, ChangeFractionAgainstTau) {
  std::vector<LabelSequence> a(10, seq("OOOOOOOOOO")), b = a;
  for (int k = 0; k < 5; ++k) b[k][k] = Tag::kB;  // 5 of 100 tokens changed
  const auto targets = targets_of(a);
  auto pa = partition(a, a, targets, 1);
  auto pb = partition(a, b, targets, 2);
  EXPECT_DOUBLE_EQ(change_fraction(pa, pb), 0.05);
  EXPECT_FALSE(stopping_check(pa, pb, 0.01, 5));
  EXPECT_TRUE(stopping_check(pa, pa, 0.01, 5));
  pa.round = 5;
  EXPECT_TRUE(stopping_check(pa, pb, 0.01, 5));
}

TEST(SelfTrainConfig, BudgetSplitsTheSelfTrainingEpochs) {
  TrainConfig c;
  const auto s = SelfTrainConfig::from(c);
  EXPECT_EQ(s.epochs_per_round, 10);
  EXPECT_EQ(s.max_rounds, 5);
  EXPECT_EQ(s.budget(), c.selftrain_epochs);
  SelfTrainConfig bad = s;
  bad.tau = 0.0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

struct TinyRun {
  Corpus corpus;
  Vocabulary vocab;
  EncodedCorpus enc;
  EmbeddingTable emb;
  TrainConfig cfg;
};

TinyRun tiny_run() {
  TinyRun r;
  r.corpus.source_train = {testing::sentence("a good b", "OOB"), testing::sentence("c d", "BO"),
                           testing::sentence("good e f", "OBO"), testing::sentence("f a", "OO")};
  r.corpus.target_train = {testing::sentence("x y", "", Domain::kTarget),
                           testing::sentence("y good x", "", Domain::kTarget),
                           testing::sentence("z x y", "", Domain::kTarget)};
  r.corpus.target_test = {testing::sentence("good x", "OB", Domain::kTarget)};
  r.corpus.source_test = {testing::sentence("good a", "OB")};
  r.vocab = Vocabulary::build(r.corpus);
  r.enc = encode_corpus(r.corpus, r.vocab);
  r.emb = random_embeddings(r.vocab, 4, 1);
  r.cfg.allow_off_grid = true;
  r.cfg.embedding_dim = 4;
  r.cfg.hidden = 3;
  r.cfg.batch_size = 4;
  r.cfg.teacher_epochs = 2;
  r.cfg.student_epochs = 2;
  r.cfg.selftrain_epochs = 4;
  r.cfg.rounds = 2;
  return r;
}

TEST(RunScd, TeacherStaysFrozenAndBudgetHolds) {
  TinyRun r = tiny_run();
  TrainingOptions opt;
  opt.track_dev = false;
  const TaggerParams teacher = train_teacher(r.enc, r.emb, r.cfg, opt);
  const TaggerParams teacher_copy = teacher;
  const StudentParams student = train_student(r.enc, r.emb, r.cfg, opt);
  const auto st = SelfTrainConfig::from(r.cfg);
  const SelfTrainResult res = run_scd(teacher, student, r.enc, r.emb, st, r.cfg);
  EXPECT_TRUE(teacher == teacher_copy);
  EXPECT_LE(static_cast<int>(res.rounds.size()), st.max_rounds);
  EXPECT_LE(res.epochs, st.budget());
  for (const auto& round : res.rounds) {
    EXPECT_EQ(round.disagree + round.agree, 3);
  }
  // Deterministic per seed.
  const SelfTrainResult again = run_scd(teacher, student, r.enc, r.emb, st, r.cfg);
  EXPECT_TRUE(res.student == again.student);
}

TEST(RunScd, StudentEqualToTeacherStartsWithNoDisagreement) {
  TinyRun r = tiny_run();
  TrainingOptions opt;
  opt.track_dev = false;
  const TaggerParams teacher = train_teacher(r.enc, r.emb, r.cfg, opt);
  StudentParams student = StudentParams::initialize(4, 3, r.cfg.dropout, 1.0, 5);
  student.tagger = teacher;
  const SelfTrainResult res =
      run_scd(teacher, student, r.enc, r.emb, SelfTrainConfig::from(r.cfg), r.cfg);
  ASSERT_FALSE(res.rounds.empty());
  EXPECT_EQ(res.rounds[0].disagree, 0);
  EXPECT_EQ(res.rounds[0].agree, 3);
}

}  // namespace
}  // namespace scd
