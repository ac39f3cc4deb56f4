#ifndef SCD_CORPUS_H_
#define SCD_CORPUS_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

namespace scd {

// BIO tag set. The numeric order is also the argmax tie-break order.
enum class Tag : std::int8_t { kB = 0, kI = 1, kO = 2 };
inline constexpr int kNumTags = 3;
// Label value for positions that no loss may read (padding, unlabeled text).
inline constexpr int kIgnoreLabel = -1;

using LabelSequence = std::vector<Tag>;

char tag_char(Tag tag);
std::optional<Tag> parse_tag(std::string_view text);
std::string format_labels(const LabelSequence& labels);

enum class Domain : std::uint8_t { kSource, kTarget };

struct TaggedSentence {
  std::vector<std::string> tokens;
  std::optional<LabelSequence> labels;
  Domain domain = Domain::kSource;

  bool operator==(const TaggedSentence&) const = default;
};

struct Corpus {
  std::vector<TaggedSentence> source_train;
  std::vector<TaggedSentence> target_train;
  // Development set. Never used for final numbers.
  std::vector<TaggedSentence> source_test;
  std::vector<TaggedSentence> target_test;

  // Throws ValidationError when the adaptation setup is violated: empty
  // training sides, unlabeled source text, or labeled target training text.
  void validate() const;
};

// Reads token-per-line files. Each line is "token<TAB>tag" or a bare token
// (unlabeled); sentences are separated by blank lines. A sentence must be
// either fully labeled or fully unlabeled.
std::vector<TaggedSentence> load_conll(const std::string& path,
                                       Domain domain = Domain::kSource);
std::vector<TaggedSentence> parse_conll(std::string_view text,
                                        Domain domain = Domain::kSource,
                                        std::string_view source_name = "<memory>");
void write_conll(const std::string& path,
                 const std::vector<TaggedSentence>& sentences);
std::string format_conll(const std::vector<TaggedSentence>& sentences);

// Loads <dir>/{source_train,target_train,source_test,target_test}.conll.
// Target training labels, if present in the file, are dropped.
Corpus load_corpus_dir(const std::string& dir);

std::string normalize_token(std::string_view token);

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  Vocabulary();

  // Vocabulary over source_train and target_train tokens in first-seen order.
  static Vocabulary build(const Corpus& corpus);

  // Adds the normalized form of `token` if absent; returns its index.
  int add(std::string_view token);
  int lookup(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(int index) const;
  int size() const { return static_cast<int>(tokens_.size()); }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

// Fixed word vectors stored one column per vocabulary index (dim x size).
struct EmbeddingTable {
  Eigen::MatrixXd vectors;
  // Fraction of non-reserved vocabulary entries found in the source file.
  double coverage = 0.0;

  int dim() const { return static_cast<int>(vectors.rows()); }
  int size() const { return static_cast<int>(vectors.cols()); }
};

// Text word-vector file with an optional "count dim" header. Entries found
// in `vocab` take the file vector; UNK and uncovered words get a seeded
// uniform(-0.1, 0.1) vector; PAD stays zero.
EmbeddingTable load_embeddings(const std::string& path, const Vocabulary& vocab,
                               int dim, std::uint64_t seed);
EmbeddingTable random_embeddings(const Vocabulary& vocab, int dim,
                                 std::uint64_t seed);

// Role of a sentence inside a batch; the self-training loss weights on it.
enum class SentenceRole : std::uint8_t { kSource, kTarget, kDisagree, kAgree };

struct EncodedSentence {
  std::vector<int> ids;
  // One entry per token; kIgnoreLabel where unlabeled.
  std::vector<int> labels;
  Domain domain = Domain::kSource;
  SentenceRole role = SentenceRole::kSource;

  int length() const { return static_cast<int>(ids.size()); }
};

EncodedSentence encode_sentence(const TaggedSentence& sentence,
                                const Vocabulary& vocab, bool keep_labels);
std::vector<EncodedSentence> encode_sentences(
    const std::vector<TaggedSentence>& sentences, const Vocabulary& vocab,
    bool keep_labels);

struct EncodedCorpus {
  std::vector<EncodedSentence> source_train;
  std::vector<EncodedSentence> target_train;  // labels always ignored
  std::vector<EncodedSentence> source_test;
  std::vector<EncodedSentence> target_test;
  int n_max = 0;  // longest sentence over all four splits
};

EncodedCorpus encode_corpus(const Corpus& corpus, const Vocabulary& vocab);

// Padded mini-batch. All matrices are (size x n_max).
struct Batch {
  int n_max = 0;
  Eigen::MatrixXi tokens;
  Eigen::MatrixXi labels;
  Eigen::MatrixXi mask;
  Eigen::VectorXi domains;  // 1 = source, 0 = target
  std::vector<int> lengths;
  std::vector<SentenceRole> roles;

  int size() const { return static_cast<int>(lengths.size()); }
  int longest() const;
  // Throws ValidationError if the mask/label/domain invariants fail.
  void check_invariants() const;
};

Batch make_batch(std::span<const EncodedSentence* const> sentences, int n_max);
Batch make_batch(const std::vector<EncodedSentence>& sentences, int n_max);

// Sequential batches (no shuffling) for evaluation and prediction.
std::vector<Batch> sequential_batches(
    const std::vector<EncodedSentence>& sentences, int n_max, int batch_size);

// Source-only shuffled batches for the source-only tagger.
std::vector<Batch> source_batches(const std::vector<EncodedSentence>& source,
                                  int n_max, int batch_size,
                                  std::uint64_t seed);

// One epoch of mixed-domain batches: every batch holds batch_size/2 source
// and batch_size/2 target sentences. The larger side is visited in a
// shuffled order (topped up with random draws to fill the last batch); the
// smaller side is drawn with replacement.
std::vector<Batch> make_mixed_batches(const EncodedCorpus& corpus,
                                      int batch_size, std::uint64_t seed);

// One epoch of self-training batches: |pseudo| source draws with replacement
// interleaved with the shuffled pseudo-labeled target sentences. Returns
// nullopt when there is nothing to self-train on.
std::optional<std::vector<Batch>> make_selftrain_batches(
    const std::vector<EncodedSentence>& source,
    const std::vector<EncodedSentence>& pseudo, int n_max, int batch_size,
    std::uint64_t seed);

}  // namespace scd

#endif  // SCD_CORPUS_H_
