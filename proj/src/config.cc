#include "scd/config.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "scd/error.h"

namespace scd {

namespace {

std::string trim(std::string_view s) {
  auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return "";
  auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

int to_int(std::string_view key, std::string_view value) {
  int out = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size()) {
    throw ConfigError("'" + std::string(key) + "' expects an integer, got '" +
                      std::string(value) + "'");
  }
  return out;
}

std::uint64_t to_u64(std::string_view key, std::string_view value) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size()) {
    throw ConfigError("'" + std::string(key) + "' expects an unsigned integer");
  }
  return out;
}

double to_double(std::string_view key, std::string_view value) {
  std::string text(value);
  char* end = nullptr;
  double out = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size() || !std::isfinite(out)) {
    throw ConfigError("'" + std::string(key) + "' expects a number, got '" +
                      text + "'");
  }
  return out;
}

bool to_bool(std::string_view key, std::string_view value) {
  if (value == "1" || value == "true" || value == "yes") return true;
  if (value == "0" || value == "false" || value == "no") return false;
  throw ConfigError("'" + std::string(key) + "' expects true/false");
}

template <typename T>
bool on_grid(const std::vector<T>& grid, T value) {
  return std::any_of(grid.begin(), grid.end(), [&](T g) {
    if constexpr (std::is_floating_point_v<T>) {
      return std::abs(g - value) < 1e-12;
    } else {
      return g == value;
    }
  });
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

const std::vector<int>& TrainConfig::hidden_grid() {
  static const std::vector<int> grid{100, 200, 300};
  return grid;
}
const std::vector<double>& TrainConfig::dropout_grid() {
  static const std::vector<double> grid{0.3, 0.5, 0.7};
  return grid;
}
const std::vector<double>& TrainConfig::lambda_grid() {
  static const std::vector<double> grid{1.0, 0.7, 0.5, 0.3};
  return grid;
}
const std::vector<int>& TrainConfig::batch_grid() {
  static const std::vector<int> grid{32, 64, 128};
  return grid;
}
const std::vector<double>& TrainConfig::eta_grid() {
  static const std::vector<double> grid{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6,
                                        0.7, 0.8, 0.9, 1.0, 1e-2, 1e-3};
  return grid;
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (embedding_dim < 1) fail("embedding_dim must be positive");
  if (hidden < 1) fail("hidden must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must be in [0, 1)");
  if (!(lambda >= 0.0)) fail("lambda must be >= 0");
  if (batch_size < 2 || batch_size % 2 != 0) fail("batch_size must be even and >= 2");
  if (!(eta >= 0.0 && eta <= 1.0)) fail("eta must be in [0, 1]");
  if (!(learning_rate >= 0.0)) fail("learning_rate must be >= 0");
  if (teacher_epochs < 0 || student_epochs < 0 || selftrain_epochs < 0) {
    fail("epoch counts must be >= 0");
  }
  if (rounds < 1) fail("rounds must be >= 1");
  if (selftrain_epochs % rounds != 0) {
    fail("selftrain_epochs must be a multiple of rounds");
  }
  if (!(tau > 0.0 && tau < 1.0)) fail("tau must be in (0, 1)");
  if (runs < 1) fail("runs must be >= 1");
  if (allow_off_grid) return;
  if (embedding_dim != 100) fail("embedding_dim off grid (100); set allow_off_grid");
  if (!on_grid(hidden_grid(), hidden)) fail("hidden off grid {100,200,300}; set allow_off_grid");
  if (!on_grid(dropout_grid(), dropout)) fail("dropout off grid {0.3,0.5,0.7}; set allow_off_grid");
  if (!on_grid(lambda_grid(), lambda)) fail("lambda off grid {1.0,0.7,0.5,0.3}; set allow_off_grid");
  if (!on_grid(batch_grid(), batch_size)) fail("batch_size off grid {32,64,128}; set allow_off_grid");
  if (!on_grid(eta_grid(), eta)) fail("eta off grid; set allow_off_grid");
  if (std::abs(learning_rate - 1e-3) > 1e-15) fail("learning_rate must be 1e-3; set allow_off_grid");
  if (teacher_epochs != 100 || student_epochs != 100 || selftrain_epochs != 50) {
    fail("epoch budget must be 100/100/50; set allow_off_grid");
  }
}

void TrainConfig::set(std::string_view key, std::string_view raw) {
  std::string value = trim(raw);
  if (key == "embedding_dim") embedding_dim = to_int(key, value);
  else if (key == "hidden") hidden = to_int(key, value);
  else if (key == "dropout") dropout = to_double(key, value);
  else if (key == "lambda") lambda = to_double(key, value);
  else if (key == "batch_size") batch_size = to_int(key, value);
  else if (key == "eta") eta = to_double(key, value);
  else if (key == "learning_rate") learning_rate = to_double(key, value);
  else if (key == "teacher_epochs") teacher_epochs = to_int(key, value);
  else if (key == "student_epochs") student_epochs = to_int(key, value);
  else if (key == "selftrain_epochs") selftrain_epochs = to_int(key, value);
  else if (key == "rounds") rounds = to_int(key, value);
  else if (key == "tau") tau = to_double(key, value);
  else if (key == "seed") seed = to_u64(key, value);
  else if (key == "runs") runs = to_int(key, value);
  else if (key == "allow_off_grid") allow_off_grid = to_bool(key, value);
  else if (key == "data_dir") data_dir = value;
  else if (key == "embeddings") embeddings = value;
  else if (key == "run_dir") run_dir = value;
  else throw ConfigError("unknown config key '" + std::string(key) + "'");
}

std::string TrainConfig::canonical() const {
  std::ostringstream os;
  os << "embedding_dim = " << embedding_dim << "\n"
     << "hidden = " << hidden << "\n"
     << "dropout = " << fmt_double(dropout) << "\n"
     << "lambda = " << fmt_double(lambda) << "\n"
     << "batch_size = " << batch_size << "\n"
     << "eta = " << fmt_double(eta) << "\n"
     << "learning_rate = " << fmt_double(learning_rate) << "\n"
     << "teacher_epochs = " << teacher_epochs << "\n"
     << "student_epochs = " << student_epochs << "\n"
     << "selftrain_epochs = " << selftrain_epochs << "\n"
     << "rounds = " << rounds << "\n"
     << "tau = " << fmt_double(tau) << "\n";
  return os.str();
}

std::uint64_t TrainConfig::hash() const { return fnv1a64(canonical()); }

std::string TrainConfig::hash_hex() const { return hex64(hash()); }

std::map<std::string, std::string> parse_key_values(std::string_view text,
                                                    std::string_view source) {
  std::map<std::string, std::string> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line.erase(hash_pos);
    std::string stripped = trim(line);
    if (stripped.empty()) continue;
    auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(std::string(source) + ":" + std::to_string(line_no) +
                        ": expected key = value");
    }
    std::string key = trim(std::string_view(stripped).substr(0, eq));
    std::string value = trim(std::string_view(stripped).substr(eq + 1));
    if (key.empty()) {
      throw ConfigError(std::string(source) + ":" + std::to_string(line_no) +
                        ": empty key");
    }
    out[key] = value;
  }
  return out;
}

void apply_key_values(TrainConfig& config,
                      const std::map<std::string, std::string>& values) {
  for (const auto& [key, value] : values) config.set(key, value);
}

TrainConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  TrainConfig config;
  apply_key_values(config, parse_key_values(buffer.str(), path));
  return config;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace scd
