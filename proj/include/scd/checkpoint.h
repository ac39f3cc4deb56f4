#ifndef SCD_CHECKPOINT_H_
#define SCD_CHECKPOINT_H_

#include <string>

#include "scd/adversarial.h"
#include "scd/config.h"
#include "scd/corpus.h"
#include "scd/tagger.h"

namespace scd {

inline constexpr int kCheckpointVersion = 1;

enum class ModelKind { kTeacher, kStudent };

// Everything needed to tag raw text again: parameters, the vocabulary and
// embedding table they were trained against, and the training config.
// Teacher checkpoints leave the domain head of `student` empty.
struct Checkpoint {
  ModelKind kind = ModelKind::kTeacher;
  TrainConfig config;
  Vocabulary vocab;
  EmbeddingTable embeddings;
  StudentParams student;

  const TaggerParams& tagger() const { return student.tagger; }
};

// Text format with every double written as a hex float, so a save/load
// round trip is bit-exact.
std::string format_checkpoint(const Checkpoint& checkpoint);
Checkpoint parse_checkpoint(const std::string& text, const std::string& source);

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);
// Throws ParseError naming the file and line on malformed input, and
// ValidationError when the stored config hash does not match the config.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace scd

#endif  // SCD_CHECKPOINT_H_
