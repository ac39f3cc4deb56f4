#include "scd/synthetic.h"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include <Eigen/Core>

#include "scd/error.h"

namespace scd {

void SyntheticSpec::validate() const {
  if (shared_vocab < 1 || exclusive_vocab < 1 || shared_nouns < 1 ||
      exclusive_nouns < 1 || shared_opinions < 1 || exclusive_opinions < 1) {
    throw ConfigError("synthetic vocabulary sizes must be positive");
  }
  if (!(shift >= 0.0 && shift <= 1.0)) throw ConfigError("shift must be in [0, 1]");
  if (train_sentences < 1 || test_sentences < 1) {
    throw ConfigError("synthetic split sizes must be positive");
  }
  if (embedding_dim < 4) throw ConfigError("synthetic embedding_dim must be >= 4");
  if (opinion_overlap < 0.0 || domain_strength < 0.0 || word_noise < 0.0) {
    throw ConfigError("synthetic embedding weights must be >= 0");
  }
}

namespace {

struct Pools {
  std::string prefix;  // "", "s", "t"
  int fillers, nouns, opinions;
};

std::string word(const std::string& prefix, const char* kind, int k) {
  return prefix + kind + std::to_string(k);
}

class SentenceMaker {
 public:
  SentenceMaker(const SyntheticSpec& spec, std::mt19937_64& rng)
      : spec_(spec), rng_(rng) {}

  TaggedSentence make(Domain domain) {
    const std::string own = domain == Domain::kSource ? "s" : "t";
    std::vector<std::vector<std::pair<std::string, Tag>>> segments;

    std::discrete_distribution<int> aspect_count({0.25, 0.5, 0.25});
    const int aspects = aspect_count(rng_);
    for (int a = 0; a < aspects; ++a) {
      std::vector<std::pair<std::string, Tag>> seg;
      const bool two_tokens = chance(0.3);
      std::vector<std::pair<std::string, Tag>> span{{noun(own), Tag::kB}};
      if (two_tokens) span.emplace_back(noun(own), Tag::kI);
      const std::string cue = opinion(own);
      if (chance(0.6)) {
        seg.emplace_back(cue, Tag::kO);
        seg.insert(seg.end(), span.begin(), span.end());
      } else {
        seg = span;
        seg.emplace_back(cue, Tag::kO);
      }
      segments.push_back(std::move(seg));
    }
    if (chance(0.5)) segments.push_back({{noun(own), Tag::kO}});
    if (chance(0.3)) segments.push_back({{opinion(own), Tag::kO}});
    std::shuffle(segments.begin(), segments.end(), rng_);

    TaggedSentence s;
    s.domain = domain;
    LabelSequence labels;
    auto fillers = [&](int lo, int hi) {
      std::uniform_int_distribution<int> n(lo, hi);
      for (int k = n(rng_); k > 0; --k) {
        s.tokens.push_back(filler(own));
        labels.push_back(Tag::kO);
      }
    };
    fillers(segments.empty() ? 3 : 0, segments.empty() ? 8 : 2);
    for (std::size_t k = 0; k < segments.size(); ++k) {
      if (k > 0) fillers(1, 3);
      for (const auto& [tok, tag] : segments[k]) {
        s.tokens.push_back(tok);
        labels.push_back(tag);
      }
    }
    fillers(segments.empty() ? 0 : 1, 3);
    s.labels = labels;
    return s;
  }

 private:
  bool chance(double p) { return std::bernoulli_distribution(p)(rng_); }

  std::string pick(const std::string& own, const char* kind, int shared, int exclusive) {
    if (chance(spec_.shift)) {
      return word(own, kind, std::uniform_int_distribution<int>(0, exclusive - 1)(rng_));
    }
    return word("", kind, std::uniform_int_distribution<int>(0, shared - 1)(rng_));
  }
  std::string noun(const std::string& own) {
    return pick(own, "n", spec_.shared_nouns, spec_.exclusive_nouns);
  }
  std::string opinion(const std::string& own) {
    return pick(own, "op", spec_.shared_opinions, spec_.exclusive_opinions);
  }
  std::string filler(const std::string& own) {
    return pick(own, "w", spec_.shared_vocab, spec_.exclusive_vocab);
  }

  const SyntheticSpec& spec_;
  std::mt19937_64& rng_;
};

Eigen::VectorXd random_direction(int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd v(dim);
  for (int k = 0; k < dim; ++k) v(k) = normal(rng);
  return v.normalized();
}

std::string make_embeddings(const SyntheticSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int d = spec.embedding_dim;
  const Eigen::VectorXd noun_dir = random_direction(d, rng);
  const Eigen::VectorXd opinion_dir = random_direction(d, rng);
  const Eigen::VectorXd filler_dir = random_direction(d, rng);
  const Eigen::VectorXd domain_dir[2] = {random_direction(d, rng),
                                         random_direction(d, rng)};
  const Eigen::VectorXd own_opinion_dir[2] = {random_direction(d, rng),
                                              random_direction(d, rng)};

  std::vector<std::pair<std::string, Eigen::VectorXd>> rows;
  auto add = [&](std::string w, const Eigen::VectorXd& base) {
    rows.emplace_back(std::move(w), base + spec.word_noise * random_direction(d, rng));
  };
  for (int k = 0; k < spec.shared_vocab; ++k) add(word("", "w", k), 0.5 * filler_dir);
  for (int k = 0; k < spec.shared_nouns; ++k) add(word("", "n", k), noun_dir);
  for (int k = 0; k < spec.shared_opinions; ++k) add(word("", "op", k), opinion_dir);
  for (int side = 0; side < 2; ++side) {
    const std::string own = side == 0 ? "s" : "t";
    const Eigen::VectorXd dom = spec.domain_strength * domain_dir[side];
    for (int k = 0; k < spec.exclusive_vocab; ++k) {
      add(word(own, "w", k), 0.5 * filler_dir + dom);
    }
    for (int k = 0; k < spec.exclusive_nouns; ++k) add(word(own, "n", k), noun_dir + dom);
    for (int k = 0; k < spec.exclusive_opinions; ++k) {
      add(word(own, "op", k),
          spec.opinion_overlap * opinion_dir + own_opinion_dir[side] + dom);
    }
  }

  std::string out = std::to_string(rows.size()) + " " + std::to_string(d) + "\n";
  char buf[32];
  for (const auto& [w, v] : rows) {
    out += w;
    for (int k = 0; k < d; ++k) {
      std::snprintf(buf, sizeof buf, " %.6f", v(k));
      out += buf;
    }
    out += '\n';
  }
  return out;
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  SyntheticData data;
  std::mt19937_64 rng(spec.seed);
  SentenceMaker maker(spec, rng);
  for (int k = 0; k < spec.train_sentences; ++k) {
    data.corpus.source_train.push_back(maker.make(Domain::kSource));
  }
  for (int k = 0; k < spec.train_sentences; ++k) {
    data.target_train_gold.push_back(maker.make(Domain::kTarget));
  }
  for (int k = 0; k < spec.test_sentences; ++k) {
    data.corpus.source_test.push_back(maker.make(Domain::kSource));
  }
  for (int k = 0; k < spec.test_sentences; ++k) {
    data.corpus.target_test.push_back(maker.make(Domain::kTarget));
  }
  data.corpus.target_train = data.target_train_gold;
  for (auto& s : data.corpus.target_train) s.labels.reset();
  data.embedding_text = make_embeddings(spec, spec.seed ^ 0xe3bedd1ULL);
  return data;
}

void write_synthetic(const SyntheticData& data, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto path = [&](const char* name) { return (fs::path(dir) / name).string(); };
  write_conll(path("source_train.conll"), data.corpus.source_train);
  write_conll(path("target_train.conll"), data.corpus.target_train);
  write_conll(path("source_test.conll"), data.corpus.source_test);
  write_conll(path("target_test.conll"), data.corpus.target_test);
  write_conll(path("target_train_gold.conll"), data.target_train_gold);
  std::ofstream out(path("embeddings.txt"));
  if (!out) throw ValidationError("cannot write " + path("embeddings.txt"));
  out << data.embedding_text;
}

}  // namespace scd
