#ifndef SCD_SYNTHETIC_H_
#define SCD_SYNTHETIC_H_

#include <cstdint>
#include <string>

#include "scd/corpus.h"

namespace scd {

// Two-domain review-like corpus. Aspect terms are 1-2 noun spans marked by
// an adjacent opinion word; uncued nouns and lone opinion words are
// distractors. `shift` is the probability that a noun, opinion cue or
// filler is drawn from the domain's exclusive pool instead of the shared
// one, so shift = 0 gives identical domains and shift = 1 disjoint cues.
struct SyntheticSpec {
  int shared_vocab = 80;       // shared filler words
  int exclusive_vocab = 40;    // exclusive filler words per domain
  int shared_nouns = 40;
  int exclusive_nouns = 40;    // per domain
  int shared_opinions = 12;
  int exclusive_opinions = 12; // per domain
  double shift = 0.8;
  int train_sentences = 2000;  // per domain
  int test_sentences = 600;    // per domain
  int embedding_dim = 32;
  // Weight of the shared opinion direction inside exclusive opinion words.
  double opinion_overlap = 0.15;
  // Norm of the domain direction added to every exclusive word.
  double domain_strength = 0.6;
  double word_noise = 0.5;
  std::uint64_t seed = 7;

  // Throws ConfigError on inconsistent sizes or shift outside [0, 1].
  void validate() const;
};

struct SyntheticData {
  Corpus corpus;  // target_train unlabeled, everything else labeled
  // Gold labels of target_train, for diagnostics only.
  std::vector<TaggedSentence> target_train_gold;
  // word -> vector lines in the text embedding format
  std::string embedding_text;
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);

// Writes the four split files (and target_train_gold.conll) plus
// embeddings.txt into `dir`.
void write_synthetic(const SyntheticData& data, const std::string& dir);

}  // namespace scd

#endif  // SCD_SYNTHETIC_H_
