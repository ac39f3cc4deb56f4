#ifndef SCD_SELFTRAIN_H_
#define SCD_SELFTRAIN_H_

#include <functional>
#include <string>
#include <vector>

#include "scd/adversarial.h"
#include "scd/config.h"
#include "scd/corpus.h"
#include "scd/tagger.h"

namespace scd {

// One round's split of the unlabeled target corpus. Both sets carry the
// Student's pseudo-labels; the Teacher's labels are kept for auditing.
struct PseudoPartition {
  int round = 1;
  std::vector<int> disagree;  // target indices with >= 1 differing token
  std::vector<int> agree;     // target indices where every token matches
  std::vector<LabelSequence> student_labels;  // aligned with the targets
  std::vector<LabelSequence> teacher_labels;

  int size() const { return static_cast<int>(student_labels.size()); }

  // Target sentences with Student pseudo-labels attached and their role set
  // to kDisagree / kAgree, in target order.
  std::vector<EncodedSentence> pseudo_sentences(
      const std::vector<EncodedSentence>& targets) const;
};

// Throws AlignmentError when the lists differ in length or a label sequence
// does not match its sentence length.
PseudoPartition partition(const std::vector<LabelSequence>& teacher_labels,
                          const std::vector<LabelSequence>& student_labels,
                          const std::vector<EncodedSentence>& targets,
                          int round = 1);
PseudoPartition partition(const std::vector<LabelSequence>& teacher_labels,
                          const std::vector<LabelSequence>& student_labels,
                          const std::vector<TaggedSentence>& targets,
                          int round = 1);

struct SelfTrainConfig {
  double eta = 0.0;
  int epochs_per_round = 10;
  int max_rounds = 5;
  double tau = 0.01;

  static SelfTrainConfig from(const TrainConfig& config);
  void validate() const;
  int budget() const { return epochs_per_round * max_rounds; }
};

// Per-set pieces of the round loss: the source term is already a mean over
// source sentences, the other two are token cross-entropy sums.
struct RoundLossTerms {
  double source = 0.0;
  double disagree_sum = 0.0;
  int disagree_count = 0;
  double agree_sum = 0.0;
  int agree_count = 0;
};

// source + disagree_sum/|D_d| + eta * agree_sum/|D_a|, with the term of an
// empty set defined as 0. Throws ConfigError when eta is outside [0, 1].
double combine_round_loss(const RoundLossTerms& terms, double eta);

// Round loss over whole sets. `target_probs` covers every target sentence
// in partition order (row j = target j).
double selftrain_round_loss(const LabelProbs& source_probs,
                            const Eigen::MatrixXi& source_labels,
                            const LabelProbs& target_probs,
                            const PseudoPartition& partition, double eta);

// Fraction of target tokens whose Student pseudo-label differs.
double change_fraction(const PseudoPartition& prev, const PseudoPartition& curr);

// True when self-training should stop: the pseudo-labels moved on fewer than
// `tau` of the tokens, or `prev` was already the last allowed round.
bool stopping_check(const PseudoPartition& prev, const PseudoPartition& curr,
                    double tau, int max_rounds);

struct RoundRecord {
  int round = 0;
  int disagree = 0;
  int agree = 0;
  // Change against the next round's pseudo-labels; negative if not computed.
  double change_fraction = -1.0;
  double label_loss = 0.0;
  double domain_loss = 0.0;
  double source_dev_f1 = 0.0;
  double target_test_f1 = -1.0;
  std::vector<double> epoch_target_f1;
};

struct SelfTrainOptions {
  bool track_target = true;
  bool track_dev = true;
  std::function<void(const RoundRecord&)> on_round;
};

struct SelfTrainResult {
  StudentParams student;
  std::vector<RoundRecord> rounds;
  int epochs = 0;
};

// Self-trains `student` on disagreement/agreement pseudo-labels against the
// frozen `teacher`, keeping the domain-adversarial loss active.
SelfTrainResult run_scd(const TaggerParams& teacher, const StudentParams& student,
                        const EncodedCorpus& corpus,
                        const EmbeddingTable& embeddings,
                        const SelfTrainConfig& config,
                        const TrainConfig& train_config,
                        const SelfTrainOptions& options = {});

}  // namespace scd

#endif  // SCD_SELFTRAIN_H_
