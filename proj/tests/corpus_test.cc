#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include <gtest/gtest.h>

#include "helpers.h"
#include "scd/corpus.h"
#include "scd/error.h"

namespace scd {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("scd_corpus_test_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
             "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string file(const std::string& name, const std::string& content) const {
    const auto p = (path_ / name).string();
    std::ofstream(p) << content;
    return p;
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

TEST(Conll, ParsesLabeledAndUnlabeledSentences) {
  const auto s = parse_conll("The\tO\npizza\tB\nwas\tO\r\n\nonly\nwords\n\n\n");
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].tokens, (std::vector<std::string>{"The", "pizza", "was"}));
  EXPECT_EQ(*s[0].labels, (LabelSequence{Tag::kO, Tag::kB, Tag::kO}));
  EXPECT_FALSE(s[1].labels.has_value());
}

TEST(Conll, RoundTripsThroughText) {
  std::vector<TaggedSentence> s{testing::sentence("a b c", "BIO"), testing::sentence("x y", "")};
  EXPECT_EQ(parse_conll(format_conll(s)), s);
}

TEST(Conll, MixedLabelingIsAParseErrorWithLocation) {
  try {
    parse_conll("a\tO\nb\nc\tO\n", Domain::kSource, "f.conll");
    FAIL() << "no error";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("f.conll:2"), std::string::npos) << e.what();
  }
}

TEST(Conll, UnknownTagNamesTheLine) {
  try {
    parse_conll("a\tO\nb\tX\n", Domain::kSource, "g.conll");
    FAIL() << "no error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("g.conll:2"), std::string::npos) << e.what();
  }
}

TEST(Corpus, LoadsADirectoryAndDropsTargetTrainLabels) {
  TempDir dir;
  dir.file("source_train.conll", "a\tB\nb\tO\n");
  dir.file("target_train.conll", "c\tB\n");
  dir.file("source_test.conll", "a\tO\n");
  dir.file("target_test.conll", "c\tB\n");
  const Corpus c = load_corpus_dir(dir.path().string());
  EXPECT_NO_THROW(c.validate());
  EXPECT_FALSE(c.target_train[0].labels.has_value());
  EXPECT_EQ(c.target_train[0].domain, Domain::kTarget);
}

TEST(Corpus, ValidationRejectsBrokenSetups) {
  Corpus c;
  c.source_train = {testing::sentence("a", "B")};
  EXPECT_THROW(c.validate(), ValidationError);  // no target text
  c.target_train = {testing::sentence("b", "O", Domain::kTarget)};
  EXPECT_THROW(c.validate(), ValidationError);  // labeled target text
  c.target_train = {testing::sentence("b", "", Domain::kTarget)};
  EXPECT_NO_THROW(c.validate());
  c.source_train.push_back(testing::sentence("c", ""));
  EXPECT_THROW(c.validate(), ValidationError);
}

TEST(Vocabulary, ReservesPadAndUnkAndNormalizes) {
  Corpus c;
  c.source_train = {testing::sentence("Pizza pizza good", "BBO")};
  c.target_train = {testing::sentence("Room", "", Domain::kTarget)};
  c.source_test = {testing::sentence("unseen", "O")};
  const Vocabulary v = Vocabulary::build(c);
  EXPECT_EQ(v.size(), 5);
  EXPECT_EQ(v.lookup("PIZZA"), v.lookup("pizza"));
  EXPECT_EQ(v.lookup("unseen"), Vocabulary::kUnk);
  EXPECT_FALSE(v.contains("unseen"));
  EXPECT_EQ(v.token(Vocabulary::kPad), "<pad>");
}

TEST(Embeddings, LoadsVectorsAndFillsTheRest) {
  TempDir dir;
  Vocabulary v;
  v.add("pizza");
  v.add("room");
  const auto path = dir.file("e.txt", "2 3\npizza 1 2 3\nother 4 5 6\n");
  const EmbeddingTable e = load_embeddings(path, v, 3, 7);
  EXPECT_EQ(e.vectors.col(v.lookup("pizza")), Eigen::Vector3d(1, 2, 3));
  EXPECT_EQ(e.vectors.col(Vocabulary::kPad).norm(), 0.0);
  EXPECT_LE(e.vectors.col(v.lookup("room")).cwiseAbs().maxCoeff(), 0.1);
  EXPECT_GT(e.vectors.col(v.lookup("room")).norm(), 0.0);
  EXPECT_DOUBLE_EQ(e.coverage, 0.5);
  // Same seed, same fill.
  EXPECT_EQ(load_embeddings(path, v, 3, 7).vectors, e.vectors);
}

TEST(Embeddings, DimensionMismatchIsAConfigError) {
  TempDir dir;
  Vocabulary v;
  v.add("pizza");
  const auto path = dir.file("e.txt", "pizza 1 2 3\n");
  EXPECT_THROW(load_embeddings(path, v, 4, 1), ConfigError);
  EXPECT_THROW(load_embeddings((dir.path() / "missing.txt").string(), v, 3, 1), Error);
}

std::vector<EncodedSentence> numbered(int count, int first_id, Domain d) {
  std::vector<EncodedSentence> out;
  for (int k = 0; k < count; ++k) {
    // Sentence identity is carried by its first token id; lengths vary.
    std::vector<int> ids(static_cast<std::size_t>(1 + k % 4), 2);
    ids[0] = first_id + k;
    out.push_back(testing::encoded(ids, d == Domain::kSource
                                            ? std::vector<int>(ids.size(), 2)
                                            : std::vector<int>{},
                                   d));
  }
  return out;
}

TEST(Batches, MakeBatchPadsAndMasks) {
  const auto s = numbered(3, 10, Domain::kSource);
  const Batch b = make_batch(s, 6);
  EXPECT_NO_THROW(b.check_invariants());
  EXPECT_EQ(b.longest(), 3);
  EXPECT_EQ(b.mask.row(2).sum(), 3);
  EXPECT_EQ(b.labels(0, 1), kIgnoreLabel);
  EXPECT_EQ(b.domains(0), 1);
}

TEST(Batches, MixedBatchesAreHalfAndHalf) {
  EncodedCorpus c;
  c.source_train = numbered(37, 100, Domain::kSource);
  c.target_train = numbered(13, 500, Domain::kTarget);
  c.n_max = 4;
  const auto batches = make_mixed_batches(c, 8, 3);
  EXPECT_EQ(batches.size(), 10u);  // ceil(37 / 4)
  std::set<int> seen;
  for (const auto& b : batches) {
    EXPECT_NO_THROW(b.check_invariants());
    ASSERT_EQ(b.size(), 8);
    for (int j = 0; j < 8; ++j) {
      EXPECT_EQ(b.domains(j), j < 4 ? 1 : 0);
      if (j < 4) seen.insert(b.tokens(j, 0));
      if (j >= 4) {
        for (int t = 0; t < 4; ++t) EXPECT_EQ(b.labels(j, t), kIgnoreLabel);
      }
    }
  }
  EXPECT_EQ(seen.size(), 37u);  // the larger side is fully visited
  EXPECT_THROW(make_mixed_batches(c, 7, 3), Error);
  // Same seed, same batches.
  const auto again = make_mixed_batches(c, 8, 3);
  for (std::size_t k = 0; k < batches.size(); ++k) {
    EXPECT_EQ(batches[k].tokens, again[k].tokens);
  }
}

TEST(Batches, SelfTrainBatchesCoverEveryPseudoSentence) {
  const auto source = numbered(20, 100, Domain::kSource);
  auto pseudo = numbered(9, 500, Domain::kTarget);
  for (auto& s : pseudo) {
    s.labels.assign(s.ids.size(), 2);
    s.role = SentenceRole::kAgree;
  }
  pseudo[0].role = SentenceRole::kDisagree;
  const auto batches = make_selftrain_batches(source, pseudo, 4, 4, 5);
  ASSERT_TRUE(batches.has_value());
  std::map<int, int> pseudo_seen;
  int sources = 0;
  for (const auto& b : *batches) {
    EXPECT_NO_THROW(b.check_invariants());
    for (int j = 0; j < b.size(); ++j) {
      if (b.roles[j] == SentenceRole::kSource) {
        ++sources;
      } else {
        ++pseudo_seen[b.tokens(j, 0)];
        EXPECT_EQ(b.domains(j), 0);
        EXPECT_NE(b.labels(j, 0), kIgnoreLabel);
      }
    }
  }
  EXPECT_EQ(pseudo_seen.size(), 9u);
  for (const auto& [id, n] : pseudo_seen) EXPECT_EQ(n, 1) << id;
  EXPECT_EQ(sources, 9);
  EXPECT_FALSE(make_selftrain_batches(source, {}, 4, 4, 5).has_value());
}

TEST(Batches, SourceBatchesAreAPermutation) {
  const auto s = numbered(10, 100, Domain::kSource);
  const auto batches = source_batches(s, 4, 3, 9);
  std::multiset<int> ids;
  for (const auto& b : batches) {
    for (int j = 0; j < b.size(); ++j) ids.insert(b.tokens(j, 0));
  }
  EXPECT_EQ(ids.size(), 10u);
  EXPECT_EQ(std::set<int>(ids.begin(), ids.end()).size(), 10u);
}

TEST(Encoding, NMaxCoversAllSplitsAndTargetLabelsAreIgnored) {
  Corpus c;
  c.source_train = {testing::sentence("a b", "BO")};
  c.target_train = {testing::sentence("c d e", "", Domain::kTarget)};
  c.source_test = {testing::sentence("a b c d e f", "OOOOOO")};
  c.target_test = {testing::sentence("c", "B", Domain::kTarget)};
  const Vocabulary v = Vocabulary::build(c);
  const EncodedCorpus e = encode_corpus(c, v);
  EXPECT_EQ(e.n_max, 6);
  EXPECT_EQ(e.target_train[0].labels, (std::vector<int>(3, kIgnoreLabel)));
  EXPECT_EQ(e.source_test[0].ids[5], Vocabulary::kUnk);
}

}  // namespace
}  // namespace scd
