#include "scd/adversarial.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "scd/error.h"

namespace scd {

StudentParams StudentParams::initialize(int input_dim, int hidden, double dropout,
                                        double lambda, std::uint64_t seed) {
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
  StudentParams p;
  p.tagger = TaggerParams::initialize(input_dim, hidden, dropout, seed);
  p.lambda = lambda;
  std::mt19937_64 rng(mix_seed(seed, 0xd0a1));
  std::uniform_real_distribution<double> uniform(-0.1, 0.1);
  p.domain_weight.resize(1, 2 * hidden);
  for (int k = 0; k < 2 * hidden; ++k) p.domain_weight(0, k) = uniform(rng);
  p.domain_bias.resize(1, 1);
  p.domain_bias(0, 0) = uniform(rng);
  return p;
}

StudentParams StudentParams::zeros_like() const {
  StudentParams z = *this;
  z.for_each_tensor([](const char*, Eigen::MatrixXd& t) { t.setZero(); });
  return z;
}

bool StudentParams::operator==(const StudentParams& other) const {
  return tagger == other.tagger && lambda == other.lambda &&
         domain_weight == other.domain_weight && domain_bias == other.domain_bias;
}

GradientReversal::GradientReversal(double lambda) : lambda_(lambda) {
  if (!(lambda >= 0.0)) throw ConfigError("GRL coefficient must be >= 0");
}

Eigen::MatrixXd sentence_feature(const TokenFeatures& features) {
  const int b = features.batch;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(features.values.rows(), b);
  for (int j = 0; j < b; ++j) {
    double count = 0.0;
    for (int t = 0; t < features.steps; ++t) {
      const int col = features.column(j, t);
      if (features.mask(col) == 0.0) continue;
      out.col(j) += features.values.col(col);
      count += 1.0;
    }
    if (count == 0.0) {
      throw ValidationError("sentence " + std::to_string(j) +
                            " has no unmasked token to pool");
    }
    out.col(j) /= count;
  }
  return out;
}

Eigen::MatrixXd sentence_feature_backward(const TokenFeatures& features,
                                          const Eigen::MatrixXd& d_sentence) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(features.values.rows(),
                                            features.values.cols());
  for (int j = 0; j < features.batch; ++j) {
    const double length = features.lengths[static_cast<std::size_t>(j)];
    for (int t = 0; t < features.steps; ++t) {
      const int col = features.column(j, t);
      if (features.mask(col) == 0.0) continue;
      d.col(col) = d_sentence.col(j) / length;
    }
  }
  return d;
}

Eigen::RowVectorXd domain_probabilities(const StudentParams& params,
                                        const Eigen::MatrixXd& sentence_features) {
  Eigen::RowVectorXd logits = params.domain_weight * sentence_features;
  logits.array() += params.domain_bias(0, 0);
  return (1.0 / (1.0 + (-logits.array()).exp())).matrix();
}

double domain_loss(const Eigen::RowVectorXd& probs, const Eigen::VectorXi& domains) {
  if (probs.size() != domains.size() || probs.size() == 0) {
    throw ValidationError("domain probabilities and flags differ in length");
  }
  double loss = 0.0;
  for (Eigen::Index j = 0; j < probs.size(); ++j) {
    const double p = std::clamp(probs(j), kProbabilityClamp, 1.0 - kProbabilityClamp);
    loss -= domains(j) == 1 ? std::log(p) : std::log(1.0 - p);
  }
  return loss / static_cast<double>(probs.size());
}

Eigen::RowVectorXd domain_loss_logit_grad(const Eigen::RowVectorXd& probs,
                                          const Eigen::VectorXi& domains) {
  Eigen::RowVectorXd g(probs.size());
  const double n = static_cast<double>(probs.size());
  for (Eigen::Index j = 0; j < probs.size(); ++j) {
    const double p = probs(j);
    const bool clamped = p < kProbabilityClamp || p > 1.0 - kProbabilityClamp;
    g(j) = clamped ? 0.0 : (p - static_cast<double>(domains(j))) / n;
  }
  return g;
}

StudentLoss student_loss_and_grad(const StudentParams& params,
                                  const EmbeddingTable& embeddings,
                                  const Batch& batch,
                                  std::span<const double> label_weights,
                                  const StudentStepOptions& options,
                                  StudentParams& grad) {
  EncoderTape tape;
  TokenFeatures features = encode(params.tagger, embeddings, batch,
                                  options.train_mode, options.seed, &tape);
  StudentLoss loss;
  Eigen::MatrixXd d_features =
      Eigen::MatrixXd::Zero(features.values.rows(), features.values.cols());

  if (options.include_label) {
    LabelProbs probs = classify_labels(params.tagger, features);
    Eigen::MatrixXd d_logits;
    loss.label = weighted_label_loss(probs, batch.labels, label_weights, &d_logits);
    d_features += label_classifier_backward(params.tagger, features, d_logits,
                                            grad.tagger);
  }

  if (options.include_domain) {
    GradientReversal grl(params.lambda);
    Eigen::MatrixXd pooled = sentence_feature(features);
    Eigen::RowVectorXd probs = domain_probabilities(params, grl.forward(pooled));
    loss.domain = options.domain_weight * domain_loss(probs, batch.domains);
    Eigen::RowVectorXd d_logit =
        options.domain_weight * domain_loss_logit_grad(probs, batch.domains);
    grad.domain_weight.noalias() += d_logit * pooled.transpose();
    grad.domain_bias(0, 0) += d_logit.sum();
    Eigen::MatrixXd d_pooled = params.domain_weight.transpose() * d_logit;
    Eigen::MatrixXd d_encoder =
        options.reverse_gradient ? grl.backward(d_pooled) : d_pooled;
    d_features += sentence_feature_backward(features, d_encoder);
  }

  encode_backward(params.tagger, tape, d_features, grad.tagger);
  return loss;
}

StudentParams train_student(const EncodedCorpus& corpus,
                            const EmbeddingTable& embeddings,
                            const TrainConfig& config,
                            const TrainingOptions& options,
                            std::vector<EpochRecord>* log) {
  config.validate();
  StudentParams params = StudentParams::initialize(
      embeddings.dim(), config.hidden, config.dropout, config.lambda, config.seed);
  Adam adam(config.learning_rate);
  for (int epoch = 1; epoch <= config.student_epochs; ++epoch) {
    const std::uint64_t epoch_seed =
        mix_seed(config.seed, static_cast<std::uint64_t>(epoch));
    auto batches = make_mixed_batches(corpus, config.batch_size, epoch_seed);
    double label_total = 0.0, domain_total = 0.0;
    for (std::size_t k = 0; k < batches.size(); ++k) {
      StudentParams grad = params.zeros_like();
      auto weights = labeled_sentence_weights(batches[k].labels);
      StudentStepOptions step;
      step.seed = mix_seed(epoch_seed, k);
      StudentLoss loss =
          student_loss_and_grad(params, embeddings, batches[k], weights, step, grad);
      if (!std::isfinite(loss.label) || !std::isfinite(loss.domain)) {
        throw DivergenceError("student loss became non-finite at epoch " +
                              std::to_string(epoch) + ", batch " +
                              std::to_string(k) + " (label " +
                              std::to_string(loss.label) + ", domain " +
                              std::to_string(loss.domain) + ")");
      }
      label_total += loss.label;
      domain_total += loss.domain;
      adam.step(params, grad);
    }
    EpochRecord record;
    record.epoch = epoch;
    const double n = std::max<std::size_t>(1, batches.size());
    record.label_loss = label_total / n;
    record.domain_loss = domain_total / n;
    if (options.track_dev && !corpus.source_test.empty()) {
      record.source_dev_f1 =
          evaluate_f1(params.tagger, embeddings, corpus.source_test, corpus.n_max);
    }
    if (options.track_target && !corpus.target_test.empty()) {
      record.target_test_f1 =
          evaluate_f1(params.tagger, embeddings, corpus.target_test, corpus.n_max);
    }
    if (log) log->push_back(record);
    if (options.on_epoch) options.on_epoch(record);
  }
  return params;
}

Eigen::MatrixXd pooled_features(const TaggerParams& params,
                                const EmbeddingTable& embeddings,
                                const std::vector<EncodedSentence>& sentences,
                                int n_max) {
  Eigen::MatrixXd out(params.feature_dim(), static_cast<Eigen::Index>(sentences.size()));
  Eigen::Index col = 0;
  for (const Batch& batch : sequential_batches(sentences, n_max, 64)) {
    TokenFeatures features = encode(params, embeddings, batch, false, 0);
    Eigen::MatrixXd pooled = sentence_feature(features);
    out.middleCols(col, pooled.cols()) = pooled;
    col += pooled.cols();
  }
  return out;
}

}  // namespace scd
