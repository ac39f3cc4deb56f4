#include "scd/selftrain.h"

#include <algorithm>
#include <cmath>

#include "scd/error.h"

namespace scd {

namespace {

PseudoPartition partition_impl(const std::vector<LabelSequence>& teacher_labels,
                               const std::vector<LabelSequence>& student_labels,
                               const std::vector<int>& lengths, int round) {
  if (teacher_labels.size() != student_labels.size() ||
      teacher_labels.size() != lengths.size()) {
    throw AlignmentError("partition inputs differ in length: teacher " +
                         std::to_string(teacher_labels.size()) + ", student " +
                         std::to_string(student_labels.size()) + ", targets " +
                         std::to_string(lengths.size()));
  }
  if (round < 1) throw ConfigError("self-training rounds start at 1");
  PseudoPartition p;
  p.round = round;
  p.student_labels = student_labels;
  p.teacher_labels = teacher_labels;
  for (std::size_t j = 0; j < lengths.size(); ++j) {
    const auto n = static_cast<std::size_t>(lengths[j]);
    if (teacher_labels[j].size() != n || student_labels[j].size() != n) {
      throw AlignmentError("sentence " + std::to_string(j) +
                           ": label sequence length does not match sentence");
    }
    if (teacher_labels[j] == student_labels[j]) {
      p.agree.push_back(static_cast<int>(j));
    } else {
      p.disagree.push_back(static_cast<int>(j));
    }
  }
  return p;
}

}  // namespace

std::vector<EncodedSentence> PseudoPartition::pseudo_sentences(
    const std::vector<EncodedSentence>& targets) const {
  if (static_cast<int>(targets.size()) != size()) {
    throw AlignmentError("partition does not cover the target list");
  }
  std::vector<EncodedSentence> out = targets;
  for (auto& s : out) s.role = SentenceRole::kAgree;
  for (int j : disagree) out[static_cast<std::size_t>(j)].role = SentenceRole::kDisagree;
  for (std::size_t j = 0; j < out.size(); ++j) {
    auto& s = out[j];
    s.domain = Domain::kTarget;
    s.labels.resize(student_labels[j].size());
    for (std::size_t t = 0; t < s.labels.size(); ++t) {
      s.labels[t] = static_cast<int>(student_labels[j][t]);
    }
  }
  return out;
}

PseudoPartition partition(const std::vector<LabelSequence>& teacher_labels,
                          const std::vector<LabelSequence>& student_labels,
                          const std::vector<EncodedSentence>& targets, int round) {
  std::vector<int> lengths;
  lengths.reserve(targets.size());
  for (const auto& s : targets) lengths.push_back(s.length());
  return partition_impl(teacher_labels, student_labels, lengths, round);
}

PseudoPartition partition(const std::vector<LabelSequence>& teacher_labels,
                          const std::vector<LabelSequence>& student_labels,
                          const std::vector<TaggedSentence>& targets, int round) {
  std::vector<int> lengths;
  lengths.reserve(targets.size());
  for (const auto& s : targets) lengths.push_back(static_cast<int>(s.tokens.size()));
  return partition_impl(teacher_labels, student_labels, lengths, round);
}

SelfTrainConfig SelfTrainConfig::from(const TrainConfig& config) {
  SelfTrainConfig out;
  out.eta = config.eta;
  out.max_rounds = config.rounds;
  out.epochs_per_round = config.selftrain_epochs / config.rounds;
  out.tau = config.tau;
  out.validate();
  return out;
}

void SelfTrainConfig::validate() const {
  if (!(eta >= 0.0 && eta <= 1.0)) throw ConfigError("eta must be in [0, 1]");
  if (epochs_per_round < 0) throw ConfigError("epochs per round must be >= 0");
  if (max_rounds < 1) throw ConfigError("max rounds must be >= 1");
  if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("tau must be in (0, 1)");
}

double combine_round_loss(const RoundLossTerms& terms, double eta) {
  if (!(eta >= 0.0 && eta <= 1.0)) throw ConfigError("eta must be in [0, 1]");
  double loss = terms.source;
  if (terms.disagree_count > 0) loss += terms.disagree_sum / terms.disagree_count;
  if (terms.agree_count > 0) loss += eta * (terms.agree_sum / terms.agree_count);
  return loss;
}

double selftrain_round_loss(const LabelProbs& source_probs,
                            const Eigen::MatrixXi& source_labels,
                            const LabelProbs& target_probs,
                            const PseudoPartition& partition, double eta) {
  if (!(eta >= 0.0 && eta <= 1.0)) throw ConfigError("eta must be in [0, 1]");
  if (target_probs.batch != partition.size()) {
    throw AlignmentError("target probabilities do not cover the partition");
  }
  RoundLossTerms terms;
  terms.source = weighted_label_loss(source_probs, source_labels,
                                     labeled_sentence_weights(source_labels), nullptr);

  auto sentence_ce = [&](int j) {
    const auto& labels = partition.student_labels[static_cast<std::size_t>(j)];
    double sum = 0.0;
    for (std::size_t t = 0; t < labels.size(); ++t) {
      const double p = target_probs.at(j, static_cast<int>(t), static_cast<int>(labels[t]));
      sum -= std::log(std::max(p, 1e-300));
    }
    return sum;
  };
  for (int j : partition.disagree) terms.disagree_sum += sentence_ce(j);
  for (int j : partition.agree) terms.agree_sum += sentence_ce(j);
  terms.disagree_count = static_cast<int>(partition.disagree.size());
  terms.agree_count = static_cast<int>(partition.agree.size());
  return combine_round_loss(terms, eta);
}

double change_fraction(const PseudoPartition& prev, const PseudoPartition& curr) {
  if (prev.size() != curr.size()) {
    throw AlignmentError("partitions cover different target corpora");
  }
  long changed = 0, total = 0;
  for (std::size_t j = 0; j < prev.student_labels.size(); ++j) {
    const auto& a = prev.student_labels[j];
    const auto& b = curr.student_labels[j];
    if (a.size() != b.size()) throw AlignmentError("sentence lengths differ");
    for (std::size_t t = 0; t < a.size(); ++t) {
      if (a[t] != b[t]) ++changed;
    }
    total += static_cast<long>(a.size());
  }
  return total > 0 ? static_cast<double>(changed) / static_cast<double>(total) : 0.0;
}

bool stopping_check(const PseudoPartition& prev, const PseudoPartition& curr,
                    double tau, int max_rounds) {
  if (prev.round >= max_rounds) return true;
  return change_fraction(prev, curr) < tau;
}

SelfTrainResult run_scd(const TaggerParams& teacher, const StudentParams& student,
                        const EncodedCorpus& corpus,
                        const EmbeddingTable& embeddings,
                        const SelfTrainConfig& config,
                        const TrainConfig& train_config,
                        const SelfTrainOptions& options) {
  config.validate();
  train_config.validate();
  if (corpus.target_train.empty()) {
    throw ValidationError("self-training needs unlabeled target sentences");
  }
  SelfTrainResult result;
  result.student = student;
  StudentParams& params = result.student;
  const int n_max = corpus.n_max;

  // Teacher labels come from the frozen teacher once.
  const std::vector<LabelSequence> teacher_labels =
      predict(teacher, embeddings, corpus.target_train, n_max);
  PseudoPartition current = partition(
      teacher_labels, predict(params.tagger, embeddings, corpus.target_train, n_max),
      corpus.target_train, 1);

  Adam adam(train_config.learning_rate);
  const std::uint64_t base_seed = mix_seed(train_config.seed, 0x5c0);
  while (true) {
    RoundRecord record;
    record.round = current.round;
    record.disagree = static_cast<int>(current.disagree.size());
    record.agree = static_cast<int>(current.agree.size());
    const auto pseudo = current.pseudo_sentences(corpus.target_train);
    const double d_count = static_cast<double>(current.disagree.size());
    const double a_count = static_cast<double>(current.agree.size());

    double label_total = 0.0, domain_total = 0.0;
    long steps = 0;
    for (int e = 0; e < config.epochs_per_round; ++e) {
      const std::uint64_t epoch_seed =
          mix_seed(base_seed, static_cast<std::uint64_t>(result.epochs));
      auto batches = make_selftrain_batches(corpus.source_train, pseudo, n_max,
                                            train_config.batch_size, epoch_seed);
      ++result.epochs;
      if (!batches) break;
      const double num_batches = static_cast<double>(batches->size());
      for (std::size_t k = 0; k < batches->size(); ++k) {
        const Batch& batch = (*batches)[k];
        int sources = 0;
        for (auto role : batch.roles) sources += role == SentenceRole::kSource;
        std::vector<double> weights(static_cast<std::size_t>(batch.size()), 0.0);
        for (int j = 0; j < batch.size(); ++j) {
          switch (batch.roles[static_cast<std::size_t>(j)]) {
            case SentenceRole::kSource:
              weights[j] = 1.0 / sources;
              break;
            case SentenceRole::kDisagree:
              weights[j] = num_batches / d_count;
              break;
            case SentenceRole::kAgree:
              weights[j] = config.eta * num_batches / a_count;
              break;
            case SentenceRole::kTarget:
              break;
          }
        }
        StudentParams grad = params.zeros_like();
        StudentStepOptions step;
        step.seed = mix_seed(epoch_seed, k);
        StudentLoss loss =
            student_loss_and_grad(params, embeddings, batch, weights, step, grad);
        if (!std::isfinite(loss.label) || !std::isfinite(loss.domain)) {
          throw DivergenceError("self-training loss became non-finite in round " +
                                std::to_string(current.round));
        }
        label_total += loss.label;
        domain_total += loss.domain;
        ++steps;
        adam.step(params, grad);
      }
      if (options.track_target && !corpus.target_test.empty()) {
        record.epoch_target_f1.push_back(
            evaluate_f1(params.tagger, embeddings, corpus.target_test, n_max));
      }
    }
    if (steps > 0) {
      record.label_loss = label_total / static_cast<double>(steps);
      record.domain_loss = domain_total / static_cast<double>(steps);
    }
    if (options.track_dev && !corpus.source_test.empty()) {
      record.source_dev_f1 =
          evaluate_f1(params.tagger, embeddings, corpus.source_test, n_max);
    }
    if (!record.epoch_target_f1.empty()) {
      record.target_test_f1 = record.epoch_target_f1.back();
    } else if (options.track_target && !corpus.target_test.empty()) {
      record.target_test_f1 =
          evaluate_f1(params.tagger, embeddings, corpus.target_test, n_max);
    }

    bool stop = current.round >= config.max_rounds;
    PseudoPartition next;
    if (!stop) {
      next = partition(teacher_labels,
                       predict(params.tagger, embeddings, corpus.target_train, n_max),
                       corpus.target_train, current.round + 1);
      record.change_fraction = change_fraction(current, next);
      stop = stopping_check(current, next, config.tau, config.max_rounds);
    }
    result.rounds.push_back(record);
    if (options.on_round) options.on_round(record);
    if (stop) break;
    current = std::move(next);
  }
  return result;
}

}  // namespace scd
