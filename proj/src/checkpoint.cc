#include "scd/checkpoint.h"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "scd/error.h"

namespace scd {

namespace {

void put_double(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%a", v);
  out += buf;
}

void put_matrix(std::string& out, const char* name, const Eigen::MatrixXd& m) {
  out += "tensor ";
  out += name;
  out += " " + std::to_string(m.rows()) + " " + std::to_string(m.cols()) + "\n";
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c > 0) out += ' ';
      put_double(out, m(r, c));
    }
    out += '\n';
  }
}

class Reader {
 public:
  Reader(const std::string& text, const std::string& source)
      : in_(text), source_(source) {}

  std::string line() {
    std::string s;
    if (!std::getline(in_, s)) fail("unexpected end of file");
    ++line_no_;
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
  }

  // Reads "<key> <rest>" and returns the rest.
  std::string field(const std::string& key) {
    std::string s = line();
    if (s.compare(0, key.size() + 1, key + " ") != 0) {
      fail("expected '" + key + "'");
    }
    return s.substr(key.size() + 1);
  }

  long integer(const std::string& text) {
    char* end = nullptr;
    long v = std::strtol(text.c_str(), &end, 10);
    if (end == text.c_str() || *end != '\0') fail("bad integer '" + text + "'");
    return v;
  }

  double number(const std::string& text) {
    char* end = nullptr;
    double v = std::strtod(text.c_str(), &end);
    if (end == text.c_str() || *end != '\0') fail("bad number '" + text + "'");
    return v;
  }

  Eigen::MatrixXd matrix(const std::string& name) {
    std::istringstream head(field("tensor"));
    std::string got;
    long rows = -1, cols = -1;
    head >> got >> rows >> cols;
    if (got != name) fail("expected tensor '" + name + "', found '" + got + "'");
    if (rows < 0 || cols < 0) fail("bad shape for tensor '" + name + "'");
    Eigen::MatrixXd m(rows, cols);
    for (long r = 0; r < rows; ++r) {
      std::istringstream row(line());
      std::string tok;
      for (long c = 0; c < cols; ++c) {
        if (!(row >> tok)) fail("tensor '" + name + "' row is short");
        m(r, c) = number(tok);
      }
      if (row >> tok) fail("tensor '" + name + "' row is long");
    }
    return m;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(source_ + ":" + std::to_string(line_no_) + ": " + msg);
  }

 private:
  std::istringstream in_;
  std::string source_;
  int line_no_ = 0;
};

}  // namespace

std::string format_checkpoint(const Checkpoint& ck) {
  std::string out = "scd-checkpoint " + std::to_string(kCheckpointVersion) + "\n";
  out += std::string("kind ") +
         (ck.kind == ModelKind::kStudent ? "student" : "teacher") + "\n";
  out += "config_hash " + ck.config.hash_hex() + "\n";
  out += "seed " + std::to_string(ck.config.seed) + "\n";
  std::istringstream cfg(ck.config.canonical());
  std::vector<std::string> cfg_lines;
  for (std::string l; std::getline(cfg, l);) cfg_lines.push_back(l);
  out += "config " + std::to_string(cfg_lines.size()) + "\n";
  for (const auto& l : cfg_lines) out += l + "\n";

  const TaggerParams& t = ck.student.tagger;
  out += "tagger " + std::to_string(t.input_dim) + " " + std::to_string(t.hidden) + " ";
  put_double(out, t.dropout);
  out += "\nlambda ";
  put_double(out, ck.student.lambda);
  out += "\n";

  out += "vocab " + std::to_string(ck.vocab.size()) + "\n";
  for (int k = 0; k < ck.vocab.size(); ++k) out += ck.vocab.token(k) + "\n";
  out += "coverage ";
  put_double(out, ck.embeddings.coverage);
  out += "\n";
  put_matrix(out, "embeddings", ck.embeddings.vectors);

  ck.student.for_each_tensor(
      [&](const char* name, const Eigen::MatrixXd& m) { put_matrix(out, name, m); });
  out += "end\n";
  return out;
}

Checkpoint parse_checkpoint(const std::string& text, const std::string& source) {
  Reader in(text, source);
  Checkpoint ck;
  const std::string version = in.field("scd-checkpoint");
  if (in.integer(version) != kCheckpointVersion) {
    in.fail("unsupported checkpoint version " + version);
  }
  const std::string kind = in.field("kind");
  if (kind == "student") ck.kind = ModelKind::kStudent;
  else if (kind == "teacher") ck.kind = ModelKind::kTeacher;
  else in.fail("unknown model kind '" + kind + "'");

  const std::string stored_hash = in.field("config_hash");
  const std::string seed = in.field("seed");
  std::string cfg_text;
  for (long k = in.integer(in.field("config")); k > 0; --k) cfg_text += in.line() + "\n";
  apply_key_values(ck.config, parse_key_values(cfg_text, source));
  ck.config.seed = static_cast<std::uint64_t>(std::strtoull(seed.c_str(), nullptr, 10));
  ck.config.allow_off_grid = true;
  if (ck.config.hash_hex() != stored_hash) {
    throw ValidationError(source + ": config hash mismatch (stored " + stored_hash +
                          ", computed " + ck.config.hash_hex() + ")");
  }

  std::istringstream tagger(in.field("tagger"));
  std::string dropout;
  TaggerParams& t = ck.student.tagger;
  if (!(tagger >> t.input_dim >> t.hidden >> dropout)) in.fail("bad tagger line");
  t.dropout = in.number(dropout);
  ck.student.lambda = in.number(in.field("lambda"));

  const long vocab_size = in.integer(in.field("vocab"));
  if (vocab_size < 2) in.fail("vocabulary lacks the reserved entries");
  for (long k = 0; k < vocab_size; ++k) {
    std::string tok = in.line();
    if (k < 2) {
      if (tok != ck.vocab.token(static_cast<int>(k))) in.fail("reserved entry mismatch");
      continue;
    }
    if (ck.vocab.add(tok) != k) in.fail("duplicate vocabulary entry '" + tok + "'");
  }
  ck.embeddings.coverage = in.number(in.field("coverage"));
  ck.embeddings.vectors = in.matrix("embeddings");
  if (ck.embeddings.size() != ck.vocab.size()) in.fail("embedding table does not match vocabulary");

  ck.student.for_each_tensor(
      [&](const char* name, Eigen::MatrixXd& m) { m = in.matrix(name); });
  if (in.line() != "end") in.fail("expected 'end'");
  if (t.forward.input.cols() != t.input_dim || t.label_weight.cols() != 2 * t.hidden) {
    in.fail("tensor shapes do not match the tagger dimensions");
  }
  return ck;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write checkpoint " + path);
  out << format_checkpoint(checkpoint);
  if (!out) throw ValidationError("failed writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open checkpoint " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_checkpoint(ss.str(), path);
}

}  // namespace scd
