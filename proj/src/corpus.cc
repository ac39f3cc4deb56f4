#include "scd/corpus.h"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "scd/error.h"

namespace scd {

char tag_char(Tag tag) {
  switch (tag) {
    case Tag::kB:
      return 'B';
    case Tag::kI:
      return 'I';
    case Tag::kO:
      return 'O';
  }
  return '?';
}

std::optional<Tag> parse_tag(std::string_view text) {
  if (text == "B") return Tag::kB;
  if (text == "I") return Tag::kI;
  if (text == "O") return Tag::kO;
  return std::nullopt;
}

std::string format_labels(const LabelSequence& labels) {
  std::string out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (i > 0) out += ' ';
    out += tag_char(labels[i]);
  }
  return out;
}

void Corpus::validate() const {
  if (source_train.empty()) {
    throw ValidationError("corpus has no source training sentences");
  }
  if (target_train.empty()) {
    throw ValidationError("corpus has no target training sentences");
  }
  for (const auto& s : source_train) {
    if (!s.labels) throw ValidationError("unlabeled source training sentence");
  }
  for (const auto& s : target_train) {
    if (s.labels) throw ValidationError("labeled target training sentence");
  }
  for (const auto* split : {&source_test, &target_test}) {
    for (const auto& s : *split) {
      if (!s.labels) throw ValidationError("unlabeled test sentence");
    }
  }
}

namespace {

std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

bool is_blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(),
                     [](unsigned char c) { return std::isspace(c) != 0; });
}

std::string location(std::string_view source_name, int line_no) {
  std::ostringstream os;
  os << source_name << ":" << line_no;
  return os.str();
}

}  // namespace

std::vector<TaggedSentence> parse_conll(std::string_view text, Domain domain,
                                        std::string_view source_name) {
  std::vector<TaggedSentence> sentences;
  TaggedSentence current;
  current.domain = domain;
  std::optional<bool> labeled;
  LabelSequence labels;

  auto flush = [&] {
    if (current.tokens.empty()) return;
    if (labeled.value_or(false)) current.labels = labels;
    sentences.push_back(std::move(current));
    current = TaggedSentence{};
    current.domain = domain;
    labels.clear();
    labeled.reset();
  };

  int line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = strip_cr(text.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;

    if (is_blank(line)) {
      flush();
      continue;
    }
    std::size_t tab = line.find('\t');
    std::string_view token = line.substr(0, tab);
    if (token.empty() || is_blank(token)) {
      throw ParseError(location(source_name, line_no) + ": empty token");
    }
    bool has_tag = tab != std::string_view::npos;
    if (labeled && *labeled != has_tag) {
      throw ParseError(location(source_name, line_no) +
                       ": sentence mixes labeled and unlabeled lines");
    }
    labeled = has_tag;
    if (has_tag) {
      std::string_view tag_text = line.substr(tab + 1);
      if (tag_text.find('\t') != std::string_view::npos) {
        throw ParseError(location(source_name, line_no) +
                         ": expected token<TAB>tag");
      }
      auto tag = parse_tag(tag_text);
      if (!tag) {
        throw ValidationError(location(source_name, line_no) +
                              ": unknown tag '" + std::string(tag_text) + "'");
      }
      labels.push_back(*tag);
    }
    current.tokens.emplace_back(token);
  }
  flush();
  return sentences;
}

std::vector<TaggedSentence> load_conll(const std::string& path, Domain domain) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_conll(buffer.str(), domain, path);
}

std::string format_conll(const std::vector<TaggedSentence>& sentences) {
  std::string out;
  for (const auto& s : sentences) {
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
      out += s.tokens[i];
      if (s.labels) {
        out += '\t';
        out += tag_char((*s.labels)[i]);
      }
      out += '\n';
    }
    out += '\n';
  }
  return out;
}

void write_conll(const std::string& path,
                 const std::vector<TaggedSentence>& sentences) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write " + path);
  out << format_conll(sentences);
}

Corpus load_corpus_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  auto path = [&](const char* name) {
    fs::path p = fs::path(dir) / name;
    if (!fs::exists(p)) throw UsageError("missing corpus file " + p.string());
    return p.string();
  };
  Corpus corpus;
  corpus.source_train = load_conll(path("source_train.conll"), Domain::kSource);
  corpus.target_train = load_conll(path("target_train.conll"), Domain::kTarget);
  corpus.source_test = load_conll(path("source_test.conll"), Domain::kSource);
  corpus.target_test = load_conll(path("target_test.conll"), Domain::kTarget);
  for (auto& s : corpus.target_train) s.labels.reset();
  return corpus;
}

std::string normalize_token(std::string_view token) {
  std::string out(token);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return out;
}

Vocabulary::Vocabulary() : tokens_{"<pad>", "<unk>"} {}

Vocabulary Vocabulary::build(const Corpus& corpus) {
  Vocabulary vocab;
  for (const auto* split : {&corpus.source_train, &corpus.target_train}) {
    for (const auto& s : *split) {
      for (const auto& t : s.tokens) vocab.add(t);
    }
  }
  return vocab;
}

int Vocabulary::add(std::string_view token) {
  std::string key = normalize_token(token);
  auto it = index_.find(key);
  if (it != index_.end()) return it->second;
  int id = size();
  index_.emplace(key, id);
  tokens_.push_back(std::move(key));
  return id;
}

int Vocabulary::lookup(std::string_view token) const {
  auto it = index_.find(normalize_token(token));
  return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const {
  return index_.count(normalize_token(token)) > 0;
}

const std::string& Vocabulary::token(int index) const {
  if (index < 0 || index >= size()) {
    throw LookupError("vocabulary index out of range: " +
                      std::to_string(index));
  }
  return tokens_[static_cast<std::size_t>(index)];
}

EmbeddingTable random_embeddings(const Vocabulary& vocab, int dim,
                                 std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(-0.1, 0.1);
  EmbeddingTable table;
  table.vectors = Eigen::MatrixXd::Zero(dim, vocab.size());
  for (int c = 1; c < vocab.size(); ++c) {
    for (int r = 0; r < dim; ++r) table.vectors(r, c) = uniform(rng);
  }
  table.coverage = 0.0;
  return table;
}

EmbeddingTable load_embeddings(const std::string& path, const Vocabulary& vocab,
                               int dim, std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open embedding file " + path);
  EmbeddingTable table = random_embeddings(vocab, dim, seed);
  std::vector<bool> found(static_cast<std::size_t>(vocab.size()), false);

  std::string line;
  int line_no = 0;
  std::vector<double> values;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string word;
    if (!(fields >> word)) continue;
    values.clear();
    double v;
    while (fields >> v) values.push_back(v);
    if (!fields.eof()) {
      throw ParseError(path + ":" + std::to_string(line_no) +
                       ": non-numeric vector entry");
    }
    if (line_no == 1 && values.size() == 1) {
      // "count dim" header
      if (static_cast<int>(values[0]) != dim) {
        throw ConfigError(path + ": file dimension " +
                          std::to_string(static_cast<int>(values[0])) +
                          " does not match d_emb " + std::to_string(dim));
      }
      continue;
    }
    if (static_cast<int>(values.size()) != dim) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": vector has " +
                        std::to_string(values.size()) +
                        " entries, d_emb is " + std::to_string(dim));
    }
    if (!vocab.contains(word)) continue;
    int id = vocab.lookup(word);
    if (id < 2) continue;
    if (found[static_cast<std::size_t>(id)]) continue;  // first occurrence wins
    found[static_cast<std::size_t>(id)] = true;
    for (int r = 0; r < dim; ++r) table.vectors(r, id) = values[r];
  }
  int covered = static_cast<int>(std::count(found.begin(), found.end(), true));
  int regular = std::max(1, vocab.size() - 2);
  table.coverage = static_cast<double>(covered) / regular;
  return table;
}

EncodedSentence encode_sentence(const TaggedSentence& sentence,
                                const Vocabulary& vocab, bool keep_labels) {
  EncodedSentence out;
  out.domain = sentence.domain;
  out.role = sentence.domain == Domain::kSource ? SentenceRole::kSource
                                                : SentenceRole::kTarget;
  out.ids.reserve(sentence.tokens.size());
  for (const auto& t : sentence.tokens) out.ids.push_back(vocab.lookup(t));
  out.labels.assign(sentence.tokens.size(), kIgnoreLabel);
  if (keep_labels && sentence.labels) {
    if (sentence.labels->size() != sentence.tokens.size()) {
      throw ValidationError("label count does not match token count");
    }
    for (std::size_t i = 0; i < sentence.tokens.size(); ++i) {
      out.labels[i] = static_cast<int>((*sentence.labels)[i]);
    }
  }
  return out;
}

std::vector<EncodedSentence> encode_sentences(
    const std::vector<TaggedSentence>& sentences, const Vocabulary& vocab,
    bool keep_labels) {
  std::vector<EncodedSentence> out;
  out.reserve(sentences.size());
  for (const auto& s : sentences) {
    out.push_back(encode_sentence(s, vocab, keep_labels));
  }
  return out;
}

EncodedCorpus encode_corpus(const Corpus& corpus, const Vocabulary& vocab) {
  EncodedCorpus out;
  out.source_train = encode_sentences(corpus.source_train, vocab, true);
  out.target_train = encode_sentences(corpus.target_train, vocab, false);
  out.source_test = encode_sentences(corpus.source_test, vocab, true);
  out.target_test = encode_sentences(corpus.target_test, vocab, true);
  for (const auto* split : {&out.source_train, &out.target_train,
                            &out.source_test, &out.target_test}) {
    for (const auto& s : *split) out.n_max = std::max(out.n_max, s.length());
  }
  return out;
}

int Batch::longest() const {
  int m = 0;
  for (int len : lengths) m = std::max(m, len);
  return m;
}

void Batch::check_invariants() const {
  const int b = size();
  if (tokens.rows() != b || tokens.cols() != n_max || labels.rows() != b ||
      labels.cols() != n_max || mask.rows() != b || mask.cols() != n_max ||
      domains.size() != b || static_cast<int>(roles.size()) != b) {
    throw ValidationError("batch shape mismatch");
  }
  for (int i = 0; i < b; ++i) {
    if (lengths[i] < 1 || lengths[i] > n_max) {
      throw ValidationError("batch sentence length out of range");
    }
    if (domains(i) != 0 && domains(i) != 1) {
      throw ValidationError("domain flag outside {0,1}");
    }
    for (int j = 0; j < n_max; ++j) {
      bool pad = tokens(i, j) == Vocabulary::kPad;
      if ((mask(i, j) == 0) != pad) {
        throw ValidationError("mask does not match padding");
      }
      if (labels(i, j) != kIgnoreLabel && mask(i, j) != 1) {
        throw ValidationError("label at a padded position");
      }
    }
  }
}

Batch make_batch(std::span<const EncodedSentence* const> sentences, int n_max) {
  const int b = static_cast<int>(sentences.size());
  Batch batch;
  batch.n_max = n_max;
  batch.tokens = Eigen::MatrixXi::Constant(b, n_max, Vocabulary::kPad);
  batch.labels = Eigen::MatrixXi::Constant(b, n_max, kIgnoreLabel);
  batch.mask = Eigen::MatrixXi::Zero(b, n_max);
  batch.domains = Eigen::VectorXi::Zero(b);
  batch.lengths.resize(static_cast<std::size_t>(b));
  batch.roles.resize(static_cast<std::size_t>(b));
  for (int i = 0; i < b; ++i) {
    const EncodedSentence& s = *sentences[static_cast<std::size_t>(i)];
    if (s.length() < 1 || s.length() > n_max) {
      throw ValidationError("sentence length " + std::to_string(s.length()) +
                            " outside [1, " + std::to_string(n_max) + "]");
    }
    for (int j = 0; j < s.length(); ++j) {
      int id = s.ids[static_cast<std::size_t>(j)];
      if (id == Vocabulary::kPad) {
        throw ValidationError("PAD index inside a sentence");
      }
      batch.tokens(i, j) = id;
      batch.labels(i, j) = s.labels[static_cast<std::size_t>(j)];
      batch.mask(i, j) = 1;
    }
    batch.domains(i) = s.domain == Domain::kSource ? 1 : 0;
    batch.lengths[static_cast<std::size_t>(i)] = s.length();
    batch.roles[static_cast<std::size_t>(i)] = s.role;
  }
  return batch;
}

Batch make_batch(const std::vector<EncodedSentence>& sentences, int n_max) {
  std::vector<const EncodedSentence*> ptrs;
  ptrs.reserve(sentences.size());
  for (const auto& s : sentences) ptrs.push_back(&s);
  return make_batch(ptrs, n_max);
}

std::vector<Batch> sequential_batches(
    const std::vector<EncodedSentence>& sentences, int n_max, int batch_size) {
  if (batch_size < 1) throw ConfigError("batch size must be positive");
  std::vector<Batch> out;
  std::vector<const EncodedSentence*> chunk;
  for (std::size_t i = 0; i < sentences.size(); i += batch_size) {
    chunk.clear();
    for (std::size_t j = i; j < std::min(sentences.size(), i + batch_size); ++j) {
      chunk.push_back(&sentences[j]);
    }
    out.push_back(make_batch(chunk, n_max));
  }
  return out;
}

namespace {

std::vector<std::size_t> shuffled_indices(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

std::vector<std::size_t> draws_with_replacement(std::size_t population,
                                                std::size_t count,
                                                std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, population - 1);
  std::vector<std::size_t> idx(count);
  for (auto& i : idx) i = pick(rng);
  return idx;
}

// Shuffled pass over the population, topped up with random draws to `count`.
std::vector<std::size_t> full_pass(std::size_t population, std::size_t count,
                                   std::mt19937_64& rng) {
  std::vector<std::size_t> idx = shuffled_indices(population, rng);
  auto extra = draws_with_replacement(population, count - population, rng);
  idx.insert(idx.end(), extra.begin(), extra.end());
  return idx;
}

}  // namespace

std::vector<Batch> source_batches(const std::vector<EncodedSentence>& source,
                                  int n_max, int batch_size,
                                  std::uint64_t seed) {
  if (batch_size < 1) throw ConfigError("batch size must be positive");
  std::mt19937_64 rng(seed);
  auto order = shuffled_indices(source.size(), rng);
  std::vector<Batch> out;
  std::vector<const EncodedSentence*> chunk;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    chunk.clear();
    for (std::size_t j = i; j < std::min(order.size(), i + batch_size); ++j) {
      chunk.push_back(&source[order[j]]);
    }
    out.push_back(make_batch(chunk, n_max));
  }
  return out;
}

std::vector<Batch> make_mixed_batches(const EncodedCorpus& corpus,
                                      int batch_size, std::uint64_t seed) {
  if (batch_size < 2 || batch_size % 2 != 0) {
    throw ConfigError("mixed batches need an even batch size >= 2, got " +
                      std::to_string(batch_size));
  }
  const auto& source = corpus.source_train;
  const auto& target = corpus.target_train;
  if (source.empty() || target.empty()) {
    throw ValidationError("mixed batches need both source and target text");
  }
  const std::size_t half = static_cast<std::size_t>(batch_size / 2);
  const std::size_t larger = std::max(source.size(), target.size());
  const std::size_t num_batches = (larger + half - 1) / half;
  const std::size_t slots = num_batches * half;

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> src_idx, tgt_idx;
  if (source.size() >= target.size()) {
    src_idx = full_pass(source.size(), slots, rng);
    tgt_idx = target.size() == source.size()
                  ? full_pass(target.size(), slots, rng)
                  : draws_with_replacement(target.size(), slots, rng);
  } else {
    tgt_idx = full_pass(target.size(), slots, rng);
    src_idx = draws_with_replacement(source.size(), slots, rng);
  }

  std::vector<Batch> out;
  out.reserve(num_batches);
  std::vector<const EncodedSentence*> chunk;
  for (std::size_t b = 0; b < num_batches; ++b) {
    chunk.clear();
    for (std::size_t k = 0; k < half; ++k) chunk.push_back(&source[src_idx[b * half + k]]);
    for (std::size_t k = 0; k < half; ++k) chunk.push_back(&target[tgt_idx[b * half + k]]);
    out.push_back(make_batch(chunk, corpus.n_max));
  }
  return out;
}

std::optional<std::vector<Batch>> make_selftrain_batches(
    const std::vector<EncodedSentence>& source,
    const std::vector<EncodedSentence>& pseudo, int n_max, int batch_size,
    std::uint64_t seed) {
  if (batch_size < 2 || batch_size % 2 != 0) {
    throw ConfigError("self-training batches need an even batch size >= 2");
  }
  if (pseudo.empty()) return std::nullopt;
  if (source.empty()) {
    throw ValidationError("self-training needs labeled source sentences");
  }
  std::mt19937_64 rng(seed);
  auto pseudo_idx = shuffled_indices(pseudo.size(), rng);
  auto src_idx = draws_with_replacement(source.size(), pseudo.size(), rng);

  const std::size_t half = static_cast<std::size_t>(batch_size / 2);
  std::vector<Batch> out;
  std::vector<const EncodedSentence*> chunk;
  for (std::size_t start = 0; start < pseudo.size(); start += half) {
    std::size_t stop = std::min(pseudo.size(), start + half);
    chunk.clear();
    for (std::size_t k = start; k < stop; ++k) chunk.push_back(&source[src_idx[k]]);
    for (std::size_t k = start; k < stop; ++k) chunk.push_back(&pseudo[pseudo_idx[k]]);
    out.push_back(make_batch(chunk, n_max));
  }
  return out;
}

}  // namespace scd
