#ifndef SCD_TAGGER_H_
#define SCD_TAGGER_H_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "scd/config.h"
#include "scd/corpus.h"

namespace scd {

// One LSTM direction. Gate blocks are stacked in the order input, forget,
// cell candidate, output.
struct LstmWeights {
  Eigen::MatrixXd input;      // 4H x d
  Eigen::MatrixXd recurrent;  // 4H x H
  Eigen::MatrixXd bias;       // 4H x 1
};

// Single-layer BiLSTM encoder plus a softmax label classifier over {B,I,O}.
// Gradients are represented with the same type.
struct TaggerParams {
  int input_dim = 0;
  int hidden = 0;
  double dropout = 0.0;
  LstmWeights forward;
  LstmWeights backward;
  Eigen::MatrixXd label_weight;  // 3 x 2H
  Eigen::MatrixXd label_bias;    // 3 x 1

  // All tensors uniform(-0.1, 0.1) from `seed`.
  static TaggerParams initialize(int input_dim, int hidden, double dropout,
                                 std::uint64_t seed);
  TaggerParams zeros_like() const;

  int feature_dim() const { return 2 * hidden; }

  template <typename F>
  void for_each_tensor(F&& f) {
    f("encoder.forward.input", forward.input);
    f("encoder.forward.recurrent", forward.recurrent);
    f("encoder.forward.bias", forward.bias);
    f("encoder.backward.input", backward.input);
    f("encoder.backward.recurrent", backward.recurrent);
    f("encoder.backward.bias", backward.bias);
    f("label.weight", label_weight);
    f("label.bias", label_bias);
  }
  template <typename F>
  void for_each_tensor(F&& f) const {
    const_cast<TaggerParams*>(this)->for_each_tensor(
        [&](const char* name, Eigen::MatrixXd& t) {
          f(name, static_cast<const Eigen::MatrixXd&>(t));
        });
  }

  bool operator==(const TaggerParams& other) const;
};

// Contextual token features for one batch. Column t * batch + j holds the
// 2H feature of token t in sentence j; only the first `steps` positions
// (the longest sentence in the batch) are materialized, the rest of the
// padded width is implicitly zero.
struct TokenFeatures {
  int batch = 0;
  int steps = 0;
  int n_max = 0;
  Eigen::MatrixXd values;  // 2H x (steps * batch), zero at masked positions
  Eigen::RowVectorXd mask;
  std::vector<int> lengths;

  int column(int sentence, int position) const {
    return position * batch + sentence;
  }
  // Feature of token `position` in `sentence`; zero vector beyond `steps`.
  Eigen::VectorXd at(int sentence, int position) const;
};

// Activations kept by encode() for the backward pass.
struct EncoderTape {
  struct Direction {
    Eigen::MatrixXd gates;   // 4H x cols, post-activation
    Eigen::MatrixXd cells;   // H x cols, carried cell state
    Eigen::MatrixXd hidden;  // H x cols, carried hidden state
    Eigen::MatrixXd tanh_cells;
  };
  Eigen::MatrixXd inputs;  // d x cols, after dropout
  Direction forward;
  Direction backward;
  int batch = 0;
  int steps = 0;
  Eigen::RowVectorXd mask;
};

// Throws LookupError when a token index is outside the embedding table.
// Dropout on the embedding vectors is applied only when `train_mode`.
TokenFeatures encode(const TaggerParams& params, const EmbeddingTable& embeddings,
                     const Batch& batch, bool train_mode, std::uint64_t seed,
                     EncoderTape* tape = nullptr);

// Accumulates encoder parameter gradients given d(loss)/d(features).
void encode_backward(const TaggerParams& params, const EncoderTape& tape,
                     const Eigen::MatrixXd& d_features, TaggerParams& grad);

// Per-token label distributions, column layout as in TokenFeatures.
struct LabelProbs {
  int batch = 0;
  int steps = 0;
  Eigen::MatrixXd values;  // 3 x (steps * batch)

  double at(int sentence, int position, int tag) const {
    return values(tag, position * batch + sentence);
  }
};

LabelProbs classify_labels(const TaggerParams& params,
                           const TokenFeatures& features);

// Index of the largest probability; ties go to the lowest tag index.
int argmax_tag(const Eigen::Ref<const Eigen::VectorXd>& probs);

// Mean over labeled sentences of the summed token cross-entropy. Positions
// labeled kIgnoreLabel contribute nothing; with no labeled position at all
// the loss is 0 (a warning is logged).
double classification_loss(const LabelProbs& probs, const Eigen::MatrixXi& labels);

// Sum_j weight[j] * sum_i CE(p_ij, y_ij). Writes d(loss)/d(logits) when
// `d_logits` is non-null.
double weighted_label_loss(const LabelProbs& probs, const Eigen::MatrixXi& labels,
                           std::span<const double> weights,
                           Eigen::MatrixXd* d_logits);

// Per-sentence weights that turn weighted_label_loss into
// classification_loss: 1/(number of labeled sentences) on labeled rows.
std::vector<double> labeled_sentence_weights(const Eigen::MatrixXi& labels);

// Backprop through the label classifier: adds weight/bias gradients to
// `grad` and returns d(loss)/d(features).
Eigen::MatrixXd label_classifier_backward(const TaggerParams& params,
                                          const TokenFeatures& features,
                                          const Eigen::MatrixXd& d_logits,
                                          TaggerParams& grad);

// Full forward/backward of the weighted label loss. Accumulates into `grad`.
double tagger_loss_and_grad(const TaggerParams& params,
                            const EmbeddingTable& embeddings, const Batch& batch,
                            std::span<const double> weights, bool train_mode,
                            std::uint64_t seed, TaggerParams& grad);

// Adam with bias correction; moment buffers follow for_each_tensor order.
class Adam {
 public:
  explicit Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                double epsilon = 1e-8)
      : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {}

  template <typename Params>
  void step(Params& params, const Params& grad) {
    std::vector<Eigen::MatrixXd*> p;
    std::vector<const Eigen::MatrixXd*> g;
    params.for_each_tensor([&](const char*, Eigen::MatrixXd& t) { p.push_back(&t); });
    grad.for_each_tensor(
        [&](const char*, const Eigen::MatrixXd& t) { g.push_back(&t); });
    apply(p, g);
  }

 private:
  void apply(const std::vector<Eigen::MatrixXd*>& params,
             const std::vector<const Eigen::MatrixXd*>& grads);

  double lr_, beta1_, beta2_, eps_;
  long steps_ = 0;
  std::vector<Eigen::MatrixXd> m_, v_;
};

struct EpochRecord {
  int epoch = 0;
  double label_loss = 0.0;
  double domain_loss = 0.0;
  double source_dev_f1 = 0.0;
  double target_test_f1 = -1.0;  // negative when not tracked
};

struct TrainingOptions {
  // Evaluate target-test F1 after every epoch (curves for plotting).
  bool track_target = false;
  // Evaluate source-dev F1 after every epoch.
  bool track_dev = true;
  std::function<void(const EpochRecord&)> on_epoch;
};

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

// Source-only tagger. Returns the final-epoch parameters; throws
// DivergenceError when the loss stops being finite.
TaggerParams train_teacher(const EncodedCorpus& corpus,
                           const EmbeddingTable& embeddings,
                           const TrainConfig& config,
                           const TrainingOptions& options = {},
                           std::vector<EpochRecord>* log = nullptr);

// Argmax labels, dropout off, one sequence per sentence at its own length.
std::vector<LabelSequence> predict(const TaggerParams& params,
                                   const EmbeddingTable& embeddings,
                                   const std::vector<EncodedSentence>& sentences,
                                   int n_max, int batch_size = 64);

// Exact-match span F1 of `params` on labeled sentences.
double evaluate_f1(const TaggerParams& params, const EmbeddingTable& embeddings,
                   const std::vector<EncodedSentence>& sentences, int n_max);

}  // namespace scd

#endif  // SCD_TAGGER_H_
