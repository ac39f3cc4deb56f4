#ifndef SCD_CONFIG_H_
#define SCD_CONFIG_H_

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace scd {

// Hyperparameters shared by every training command. Defaults follow the
// reference setup; values off the tuning grids are rejected unless
// `allow_off_grid` is set.
struct TrainConfig {
  int embedding_dim = 100;
  int hidden = 100;  // per direction
  double dropout = 0.5;
  double lambda = 1.0;
  int batch_size = 32;
  double eta = 0.0;
  double learning_rate = 1e-3;
  int teacher_epochs = 100;
  int student_epochs = 100;
  int selftrain_epochs = 50;
  int rounds = 5;
  double tau = 0.01;
  std::uint64_t seed = 1;
  int runs = 5;
  bool allow_off_grid = false;

  std::string data_dir;
  std::string embeddings;
  std::string run_dir;

  static const std::vector<int>& hidden_grid();
  static const std::vector<double>& dropout_grid();
  static const std::vector<double>& lambda_grid();
  static const std::vector<int>& batch_grid();
  static const std::vector<double>& eta_grid();

  // Throws ConfigError on invalid or off-grid values.
  void validate() const;

  // Sets one field from its config-file key; unknown keys throw ConfigError.
  void set(std::string_view key, std::string_view value);

  // Canonical "key = value" listing of every hyperparameter (paths and
  // bookkeeping fields excluded), stable across runs.
  std::string canonical() const;
  std::uint64_t hash() const;
  std::string hash_hex() const;
};

// Flat "key = value" text. '#' starts a comment.
std::map<std::string, std::string> parse_key_values(std::string_view text,
                                                    std::string_view source);
TrainConfig load_config(const std::string& path);
void apply_key_values(TrainConfig& config,
                      const std::map<std::string, std::string>& values);

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t value);

}  // namespace scd

#endif  // SCD_CONFIG_H_
