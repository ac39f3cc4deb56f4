#include "scd/tagger.h"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <random>

#include "scd/error.h"
#include "scd/metrics.h"

namespace scd {

namespace {

Eigen::MatrixXd uniform_matrix(int rows, int cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uniform(-0.1, 0.1);
  Eigen::MatrixXd m(rows, cols);
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) m(r, c) = uniform(rng);
  }
  return m;
}

template <typename Derived>
Eigen::ArrayXXd sigmoid(const Eigen::MatrixBase<Derived>& x) {
  return 1.0 / (1.0 + (-x.array()).exp());
}

// Runs one LSTM direction over the time-major columns of `inputs`.
void run_direction(const LstmWeights& w, const Eigen::MatrixXd& inputs,
                   const Eigen::RowVectorXd& mask, int batch, int steps,
                   bool reverse, EncoderTape::Direction& out) {
  const int hidden = static_cast<int>(w.recurrent.cols());
  const int cols = batch * steps;
  Eigen::MatrixXd projected = w.input * inputs;
  projected.colwise() += w.bias.col(0);

  out.gates.resize(4 * hidden, cols);
  out.cells.resize(hidden, cols);
  out.hidden.resize(hidden, cols);
  out.tanh_cells.resize(hidden, cols);

  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(hidden, batch);
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(hidden, batch);
  Eigen::MatrixXd z(4 * hidden, batch);
  for (int k = 0; k < steps; ++k) {
    const int t = reverse ? steps - 1 - k : k;
    const int col0 = t * batch;
    z.noalias() = w.recurrent * h;
    z += projected.middleCols(col0, batch);

    auto gates = out.gates.middleCols(col0, batch);
    gates.topRows(hidden) = sigmoid(z.topRows(hidden)).matrix();
    gates.middleRows(hidden, hidden) = sigmoid(z.middleRows(hidden, hidden)).matrix();
    gates.middleRows(2 * hidden, hidden) =
        z.middleRows(2 * hidden, hidden).array().tanh().matrix();
    gates.bottomRows(hidden) = sigmoid(z.bottomRows(hidden)).matrix();

    Eigen::MatrixXd c_new =
        (gates.middleRows(hidden, hidden).array() * c.array() +
         gates.topRows(hidden).array() * gates.middleRows(2 * hidden, hidden).array())
            .matrix();
    Eigen::MatrixXd tc = c_new.array().tanh().matrix();
    Eigen::MatrixXd h_new = (gates.bottomRows(hidden).array() * tc.array()).matrix();
    for (int j = 0; j < batch; ++j) {
      if (mask(col0 + j) == 0.0) {
        c_new.col(j) = c.col(j);
        h_new.col(j) = h.col(j);
      }
    }
    out.cells.middleCols(col0, batch) = c_new;
    out.hidden.middleCols(col0, batch) = h_new;
    out.tanh_cells.middleCols(col0, batch) = tc;
    c.swap(c_new);
    h.swap(h_new);
  }
}

void backward_direction(const LstmWeights& w, const EncoderTape::Direction& tape,
                        const Eigen::MatrixXd& inputs,
                        const Eigen::RowVectorXd& mask,
                        const Eigen::MatrixXd& d_hidden_out, int batch, int steps,
                        bool reverse, LstmWeights& grad) {
  const int hidden = static_cast<int>(w.recurrent.cols());
  const int cols = batch * steps;
  Eigen::MatrixXd d_pre(4 * hidden, cols);
  Eigen::MatrixXd h_prev_all = Eigen::MatrixXd::Zero(hidden, cols);
  Eigen::MatrixXd dh_next = Eigen::MatrixXd::Zero(hidden, batch);
  Eigen::MatrixXd dc_next = Eigen::MatrixXd::Zero(hidden, batch);
  const Eigen::MatrixXd zeros = Eigen::MatrixXd::Zero(hidden, batch);

  for (int k = steps - 1; k >= 0; --k) {
    const int t = reverse ? steps - 1 - k : k;
    const int col0 = t * batch;
    const bool first = k == 0;
    const int prev_col0 = (reverse ? t + 1 : t - 1) * batch;
    const auto c_prev = first ? zeros.middleCols(0, batch)
                              : tape.cells.middleCols(prev_col0, batch);
    if (!first) h_prev_all.middleCols(col0, batch) = tape.hidden.middleCols(prev_col0, batch);

    const auto gates = tape.gates.middleCols(col0, batch);
    const auto i = gates.topRows(hidden).array();
    const auto f = gates.middleRows(hidden, hidden).array();
    const auto g = gates.middleRows(2 * hidden, hidden).array();
    const auto o = gates.bottomRows(hidden).array();
    const auto tc = tape.tanh_cells.middleCols(col0, batch).array();

    Eigen::ArrayXXd dh = (d_hidden_out.middleCols(col0, batch) + dh_next).array();
    Eigen::ArrayXXd dc = dc_next.array();
    Eigen::ArrayXXd dct = dc + dh * o * (1.0 - tc * tc);

    auto dz = d_pre.middleCols(col0, batch);
    dz.topRows(hidden) = (dct * g * i * (1.0 - i)).matrix();
    dz.middleRows(hidden, hidden) = (dct * c_prev.array() * f * (1.0 - f)).matrix();
    dz.middleRows(2 * hidden, hidden) = (dct * i * (1.0 - g * g)).matrix();
    dz.bottomRows(hidden) = (dh * tc * o * (1.0 - o)).matrix();

    Eigen::MatrixXd dc_carry = (dct * f).matrix();
    for (int j = 0; j < batch; ++j) {
      if (mask(col0 + j) == 0.0) {
        dz.col(j).setZero();
        dc_carry.col(j) = dc.col(j).matrix();
      }
    }
    dh_next.noalias() = w.recurrent.transpose() * dz;
    for (int j = 0; j < batch; ++j) {
      if (mask(col0 + j) == 0.0) dh_next.col(j) = dh.col(j).matrix();
    }
    dc_next.swap(dc_carry);
  }
  grad.input.noalias() += d_pre * inputs.transpose();
  grad.recurrent.noalias() += d_pre * h_prev_all.transpose();
  grad.bias += d_pre.rowwise().sum();
}

}  // namespace

TaggerParams TaggerParams::initialize(int input_dim, int hidden, double dropout,
                                      std::uint64_t seed) {
  if (input_dim < 1 || hidden < 1) {
    throw ConfigError("tagger dimensions must be positive");
  }
  TaggerParams p;
  p.input_dim = input_dim;
  p.hidden = hidden;
  p.dropout = dropout;
  std::mt19937_64 rng(seed);
  for (LstmWeights* w : {&p.forward, &p.backward}) {
    w->input = uniform_matrix(4 * hidden, input_dim, rng);
    w->recurrent = uniform_matrix(4 * hidden, hidden, rng);
    w->bias = uniform_matrix(4 * hidden, 1, rng);
  }
  p.label_weight = uniform_matrix(kNumTags, 2 * hidden, rng);
  p.label_bias = uniform_matrix(kNumTags, 1, rng);
  return p;
}

TaggerParams TaggerParams::zeros_like() const {
  TaggerParams z = *this;
  z.for_each_tensor([](const char*, Eigen::MatrixXd& t) { t.setZero(); });
  return z;
}

bool TaggerParams::operator==(const TaggerParams& other) const {
  if (input_dim != other.input_dim || hidden != other.hidden ||
      dropout != other.dropout) {
    return false;
  }
  std::vector<const Eigen::MatrixXd*> mine, theirs;
  for_each_tensor([&](const char*, const Eigen::MatrixXd& t) { mine.push_back(&t); });
  other.for_each_tensor(
      [&](const char*, const Eigen::MatrixXd& t) { theirs.push_back(&t); });
  for (std::size_t k = 0; k < mine.size(); ++k) {
    if (mine[k]->rows() != theirs[k]->rows() || mine[k]->cols() != theirs[k]->cols() ||
        *mine[k] != *theirs[k]) {
      return false;
    }
  }
  return true;
}

Eigen::VectorXd TokenFeatures::at(int sentence, int position) const {
  if (position >= steps) return Eigen::VectorXd::Zero(values.rows());
  return values.col(column(sentence, position));
}

TokenFeatures encode(const TaggerParams& params, const EmbeddingTable& embeddings,
                     const Batch& batch, bool train_mode, std::uint64_t seed,
                     EncoderTape* tape) {
  if (embeddings.dim() != params.input_dim) {
    throw ConfigError("embedding width " + std::to_string(embeddings.dim()) +
                      " does not match encoder input " +
                      std::to_string(params.input_dim));
  }
  const int b = batch.size();
  const int steps = batch.longest();
  const int cols = b * steps;
  const int hidden = params.hidden;

  EncoderTape local;
  EncoderTape& tp = tape ? *tape : local;
  tp.batch = b;
  tp.steps = steps;
  tp.mask = Eigen::RowVectorXd::Zero(cols);
  tp.inputs = Eigen::MatrixXd::Zero(params.input_dim, cols);
  for (int t = 0; t < steps; ++t) {
    for (int j = 0; j < b; ++j) {
      if (batch.mask(j, t) == 0) continue;
      const int id = batch.tokens(j, t);
      if (id < 0 || id >= embeddings.size()) {
        throw LookupError("token index " + std::to_string(id) +
                          " outside embedding table of size " +
                          std::to_string(embeddings.size()));
      }
      tp.mask(t * b + j) = 1.0;
      tp.inputs.col(t * b + j) = embeddings.vectors.col(id);
    }
  }
  if (train_mode && params.dropout > 0.0) {
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution keep(1.0 - params.dropout);
    const double scale = 1.0 / (1.0 - params.dropout);
    for (int c = 0; c < cols; ++c) {
      if (tp.mask(c) == 0.0) continue;
      for (int r = 0; r < params.input_dim; ++r) {
        tp.inputs(r, c) = keep(rng) ? tp.inputs(r, c) * scale : 0.0;
      }
    }
  }

  run_direction(params.forward, tp.inputs, tp.mask, b, steps, false, tp.forward);
  run_direction(params.backward, tp.inputs, tp.mask, b, steps, true, tp.backward);

  TokenFeatures out;
  out.batch = b;
  out.steps = steps;
  out.n_max = batch.n_max;
  out.mask = tp.mask;
  out.lengths = batch.lengths;
  out.values.resize(2 * hidden, cols);
  out.values.topRows(hidden) =
      (tp.forward.hidden.array().rowwise() * tp.mask.array()).matrix();
  out.values.bottomRows(hidden) =
      (tp.backward.hidden.array().rowwise() * tp.mask.array()).matrix();
  return out;
}

void encode_backward(const TaggerParams& params, const EncoderTape& tape,
                     const Eigen::MatrixXd& d_features, TaggerParams& grad) {
  const int hidden = params.hidden;
  Eigen::MatrixXd masked = (d_features.array().rowwise() * tape.mask.array()).matrix();
  Eigen::MatrixXd d_fwd = masked.topRows(hidden);
  Eigen::MatrixXd d_bwd = masked.bottomRows(hidden);
  backward_direction(params.forward, tape.forward, tape.inputs, tape.mask, d_fwd,
                     tape.batch, tape.steps, false, grad.forward);
  backward_direction(params.backward, tape.backward, tape.inputs, tape.mask, d_bwd,
                     tape.batch, tape.steps, true, grad.backward);
}

LabelProbs classify_labels(const TaggerParams& params,
                           const TokenFeatures& features) {
  if (features.values.rows() != params.label_weight.cols()) {
    throw ValidationError("feature width does not match label classifier");
  }
  LabelProbs out;
  out.batch = features.batch;
  out.steps = features.steps;
  Eigen::MatrixXd logits = params.label_weight * features.values;
  logits.colwise() += params.label_bias.col(0);
  Eigen::RowVectorXd max = logits.colwise().maxCoeff();
  logits.rowwise() -= max;
  Eigen::MatrixXd e = logits.array().exp().matrix();
  Eigen::RowVectorXd sum = e.colwise().sum();
  out.values = (e.array().rowwise() / sum.array()).matrix();
  return out;
}

int argmax_tag(const Eigen::Ref<const Eigen::VectorXd>& probs) {
  int best = 0;
  for (int k = 1; k < probs.size(); ++k) {
    if (probs(k) > probs(best)) best = k;
  }
  return best;
}

std::vector<double> labeled_sentence_weights(const Eigen::MatrixXi& labels) {
  std::vector<double> weights(static_cast<std::size_t>(labels.rows()), 0.0);
  int labeled = 0;
  for (int j = 0; j < labels.rows(); ++j) {
    if ((labels.row(j).array() != kIgnoreLabel).any()) {
      weights[static_cast<std::size_t>(j)] = 1.0;
      ++labeled;
    }
  }
  for (auto& w : weights) w = labeled > 0 ? w / labeled : 0.0;
  return weights;
}

double weighted_label_loss(const LabelProbs& probs, const Eigen::MatrixXi& labels,
                           std::span<const double> weights,
                           Eigen::MatrixXd* d_logits) {
  const int b = probs.batch;
  if (labels.rows() != b || static_cast<int>(weights.size()) != b ||
      labels.cols() < probs.steps) {
    throw ValidationError("label matrix does not match the probability tensor");
  }
  if (d_logits) *d_logits = Eigen::MatrixXd::Zero(kNumTags, probs.values.cols());
  double loss = 0.0;
  for (int j = 0; j < b; ++j) {
    const double w = weights[static_cast<std::size_t>(j)];
    for (int t = 0; t < labels.cols(); ++t) {
      const int y = labels(j, t);
      if (y == kIgnoreLabel) continue;
      if (t >= probs.steps || y < 0 || y >= kNumTags) {
        throw ValidationError("label outside the scored positions");
      }
      const int col = t * b + j;
      loss -= w * std::log(std::max(probs.values(y, col), 1e-300));
      if (d_logits) {
        d_logits->col(col) = w * probs.values.col(col);
        (*d_logits)(y, col) -= w;
      }
    }
  }
  return loss;
}

double classification_loss(const LabelProbs& probs, const Eigen::MatrixXi& labels) {
  std::vector<double> weights = labeled_sentence_weights(labels);
  if (std::all_of(weights.begin(), weights.end(), [](double w) { return w == 0.0; })) {
    std::cerr << "warning: classification_loss on a batch without labels\n";
    return 0.0;
  }
  return weighted_label_loss(probs, labels, weights, nullptr);
}

Eigen::MatrixXd label_classifier_backward(const TaggerParams& params,
                                          const TokenFeatures& features,
                                          const Eigen::MatrixXd& d_logits,
                                          TaggerParams& grad) {
  grad.label_weight.noalias() += d_logits * features.values.transpose();
  grad.label_bias += d_logits.rowwise().sum();
  return params.label_weight.transpose() * d_logits;
}

double tagger_loss_and_grad(const TaggerParams& params,
                            const EmbeddingTable& embeddings, const Batch& batch,
                            std::span<const double> weights, bool train_mode,
                            std::uint64_t seed, TaggerParams& grad) {
  EncoderTape tape;
  TokenFeatures features = encode(params, embeddings, batch, train_mode, seed, &tape);
  LabelProbs probs = classify_labels(params, features);
  Eigen::MatrixXd d_logits;
  double loss = weighted_label_loss(probs, batch.labels, weights, &d_logits);
  Eigen::MatrixXd d_features =
      label_classifier_backward(params, features, d_logits, grad);
  encode_backward(params, tape, d_features, grad);
  return loss;
}

void Adam::apply(const std::vector<Eigen::MatrixXd*>& params,
                 const std::vector<const Eigen::MatrixXd*>& grads) {
  if (params.size() != grads.size()) {
    throw ValidationError("parameter/gradient tensor count mismatch");
  }
  if (m_.empty()) {
    for (const auto* p : params) {
      m_.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
      v_.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
    }
  }
  ++steps_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    const Eigen::MatrixXd& g = *grads[k];
    m_[k] = beta1_ * m_[k] + (1.0 - beta1_) * g;
    v_[k] = beta2_ * v_[k] + (1.0 - beta2_) * g.cwiseProduct(g);
    *params[k] -= (lr_ * (m_[k].array() / c1) /
                   ((v_[k].array() / c2).sqrt() + eps_))
                      .matrix();
  }
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

TaggerParams train_teacher(const EncodedCorpus& corpus,
                           const EmbeddingTable& embeddings,
                           const TrainConfig& config,
                           const TrainingOptions& options,
                           std::vector<EpochRecord>* log) {
  config.validate();
  if (corpus.source_train.empty()) {
    throw ValidationError("teacher needs labeled source sentences");
  }
  TaggerParams params = TaggerParams::initialize(
      embeddings.dim(), config.hidden, config.dropout, config.seed);
  Adam adam(config.learning_rate);
  for (int epoch = 1; epoch <= config.teacher_epochs; ++epoch) {
    const std::uint64_t epoch_seed = mix_seed(config.seed, static_cast<std::uint64_t>(epoch));
    auto batches = source_batches(corpus.source_train, corpus.n_max,
                                  config.batch_size, epoch_seed);
    double total = 0.0;
    for (std::size_t k = 0; k < batches.size(); ++k) {
      TaggerParams grad = params.zeros_like();
      auto weights = labeled_sentence_weights(batches[k].labels);
      double loss = tagger_loss_and_grad(params, embeddings, batches[k], weights,
                                         true, mix_seed(epoch_seed, k), grad);
      if (!std::isfinite(loss)) {
        throw DivergenceError("teacher loss became non-finite at epoch " +
                              std::to_string(epoch) + ", batch " + std::to_string(k));
      }
      total += loss;
      adam.step(params, grad);
    }
    EpochRecord record;
    record.epoch = epoch;
    record.label_loss = batches.empty() ? 0.0 : total / static_cast<double>(batches.size());
    if (options.track_dev && !corpus.source_test.empty()) {
      record.source_dev_f1 = evaluate_f1(params, embeddings, corpus.source_test, corpus.n_max);
    }
    if (options.track_target && !corpus.target_test.empty()) {
      record.target_test_f1 =
          evaluate_f1(params, embeddings, corpus.target_test, corpus.n_max);
    }
    if (log) log->push_back(record);
    if (options.on_epoch) options.on_epoch(record);
  }
  return params;
}

std::vector<LabelSequence> predict(const TaggerParams& params,
                                   const EmbeddingTable& embeddings,
                                   const std::vector<EncodedSentence>& sentences,
                                   int n_max, int batch_size) {
  std::vector<LabelSequence> out;
  out.reserve(sentences.size());
  for (const Batch& batch : sequential_batches(sentences, n_max, batch_size)) {
    TokenFeatures features = encode(params, embeddings, batch, false, 0);
    LabelProbs probs = classify_labels(params, features);
    for (int j = 0; j < batch.size(); ++j) {
      LabelSequence labels;
      labels.reserve(static_cast<std::size_t>(batch.lengths[j]));
      for (int t = 0; t < batch.lengths[j]; ++t) {
        labels.push_back(static_cast<Tag>(argmax_tag(probs.values.col(t * batch.size() + j))));
      }
      out.push_back(std::move(labels));
    }
  }
  return out;
}

double evaluate_f1(const TaggerParams& params, const EmbeddingTable& embeddings,
                   const std::vector<EncodedSentence>& sentences, int n_max) {
  std::vector<LabelSequence> gold;
  gold.reserve(sentences.size());
  for (const auto& s : sentences) {
    LabelSequence labels;
    for (int y : s.labels) {
      if (y == kIgnoreLabel) throw ValidationError("evaluation needs gold labels");
      labels.push_back(static_cast<Tag>(y));
    }
    gold.push_back(std::move(labels));
  }
  return evaluate_labels(gold, predict(params, embeddings, sentences, n_max)).f1;
}

}  // namespace scd
