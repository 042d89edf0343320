#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "surprisenet/cvae.hpp"
#include "surprisenet/leadsheet.hpp"
#include "surprisenet/surprise.hpp"

namespace surprisenet {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr char kCheckpointMagic[4] = {'S', 'N', 'C', 'K'};
inline constexpr std::uint16_t kCheckpointVersion = 1;

/// Everything needed to harmonise without the prepared corpus.
struct Checkpoint {
  Cvae model;
  ChordVocabulary vocabulary;
  std::optional<TransitionModel> transitions;
  double max_training_surprise = 0.0;
  bool key_normalized = true;
  int epoch = 0;
};

/// Layout: "SNCK", u16 version, u32 header length, JSON header, then raw
/// little-endian float32 tensors at the offsets listed in the header.
std::string encode_checkpoint(const Checkpoint& ckpt);
/// Throws CheckpointError on bad magic/version, truncation, or when
/// `expected_vocab` is given and its fingerprint differs.
Checkpoint decode_checkpoint(const std::string& bytes, const ChordVocabulary* expected_vocab = nullptr);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path, const ChordVocabulary* expected_vocab = nullptr);

/// 64-bit FNV-1a over raw bytes, as 16 hex digits.
std::string content_hash(const std::string& bytes);

}  // namespace surprisenet
