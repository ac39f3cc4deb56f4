#ifndef SCD_ADVERSARIAL_H_
#define SCD_ADVERSARIAL_H_

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "scd/config.h"
#include "scd/corpus.h"
#include "scd/tagger.h"

namespace scd {

// Tagger core plus a sentence-level domain classifier (affine map + sigmoid)
// that sees the encoder through a gradient reversal layer.
struct StudentParams {
  TaggerParams tagger;
  Eigen::MatrixXd domain_weight;  // 1 x 2H
  Eigen::MatrixXd domain_bias;    // 1 x 1
  double lambda = 1.0;

  // The tagger part is initialized exactly like a teacher with the same seed.
  static StudentParams initialize(int input_dim, int hidden, double dropout,
                                  double lambda, std::uint64_t seed);
  StudentParams zeros_like() const;

  template <typename F>
  void for_each_tensor(F&& f) {
    tagger.for_each_tensor(f);
    f("domain.weight", domain_weight);
    f("domain.bias", domain_bias);
  }
  template <typename F>
  void for_each_tensor(F&& f) const {
    tagger.for_each_tensor(f);
    f("domain.weight", static_cast<const Eigen::MatrixXd&>(domain_weight));
    f("domain.bias", static_cast<const Eigen::MatrixXd&>(domain_bias));
  }

  bool operator==(const StudentParams& other) const;
};

// Identity on the forward pass; scales the backward gradient by -lambda.
class GradientReversal {
 public:
  explicit GradientReversal(double lambda);

  const Eigen::MatrixXd& forward(const Eigen::MatrixXd& features) const {
    return features;
  }
  Eigen::MatrixXd backward(const Eigen::MatrixXd& upstream) const {
    return -lambda_ * upstream;
  }
  double lambda() const { return lambda_; }

 private:
  double lambda_;
};

// Masked mean of token features per sentence (2H x batch). Throws
// ValidationError for a sentence with no unmasked token.
Eigen::MatrixXd sentence_feature(const TokenFeatures& features);

// d(loss)/d(token features) given d(loss)/d(sentence features).
Eigen::MatrixXd sentence_feature_backward(const TokenFeatures& features,
                                          const Eigen::MatrixXd& d_sentence);

// P(source) for each sentence feature column.
Eigen::RowVectorXd domain_probabilities(const StudentParams& params,
                                        const Eigen::MatrixXd& sentence_features);

inline constexpr double kProbabilityClamp = 1e-7;

// Mean binary cross-entropy of P(source) against domain flags (1 = source).
// Probabilities are clamped to [1e-7, 1 - 1e-7].
double domain_loss(const Eigen::RowVectorXd& probs, const Eigen::VectorXi& domains);

// d(domain_loss)/d(logit) per sentence; zero where the clamp is active.
Eigen::RowVectorXd domain_loss_logit_grad(const Eigen::RowVectorXd& probs,
                                          const Eigen::VectorXi& domains);

struct StudentStepOptions {
  bool train_mode = true;
  std::uint64_t seed = 0;
  bool include_label = true;
  bool include_domain = true;
  // When false the reversal layer is replaced by the identity (gradient
  // checks only).
  bool reverse_gradient = true;
  double domain_weight = 1.0;
};

struct StudentLoss {
  double label = 0.0;
  double domain = 0.0;
};

// Weighted label loss plus domain loss on one batch. Gradients accumulate
// into `grad`; the encoder receives the domain gradient through the GRL.
StudentLoss student_loss_and_grad(const StudentParams& params,
                                  const EmbeddingTable& embeddings,
                                  const Batch& batch,
                                  std::span<const double> label_weights,
                                  const StudentStepOptions& options,
                                  StudentParams& grad);

// Domain-adversarial tagger on mixed source/target batches. Target tokens
// carry no labels, so only source positions enter the label loss.
StudentParams train_student(const EncodedCorpus& corpus,
                            const EmbeddingTable& embeddings,
                            const TrainConfig& config,
                            const TrainingOptions& options = {},
                            std::vector<EpochRecord>* log = nullptr);

// Mean-pooled sentence features of a whole split (2H x count), dropout off.
Eigen::MatrixXd pooled_features(const TaggerParams& params,
                                const EmbeddingTable& embeddings,
                                const std::vector<EncodedSentence>& sentences,
                                int n_max);

}  // namespace scd

#endif  // SCD_ADVERSARIAL_H_
