#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace surprisenet {

/// Beat positions are stored as integer ticks so frame boundaries are exact.
inline constexpr int kTicksPerBeat = 24;
inline constexpr int kBeatsPerFrame = 2;
inline constexpr int kTicksPerFrame = kTicksPerBeat * kBeatsPerFrame;
inline constexpr int kMelodyDim = 13;  // 12 chroma bits + rest bit
inline constexpr int kRestBit = 12;

using Ticks = std::int64_t;

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MappingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Mode { kMajor, kMinor };

struct Key {
  int tonic = 0;
  Mode mode = Mode::kMajor;
  bool operator==(const Key&) const = default;
};

struct Note {
  Ticks start = 0;
  Ticks duration = 0;
  int midi_pitch = 60;

  Ticks end() const { return start + duration; }
  bool operator==(const Note&) const = default;
};

struct ChordQuality {
  std::string name;
  std::vector<int> intervals;  // semitones above the root, sorted, 0 first

  bool operator==(const ChordQuality&) const = default;
  auto operator<=>(const ChordQuality& o) const { return name <=> o.name; }
};

/// Known quality names accepted in lead-sheet files.
const std::vector<ChordQuality>& known_qualities();
/// The eight qualities of the 96-type vocabulary, in canonical order.
const std::vector<ChordQuality>& basic_qualities();
/// Throws ParseError for unknown names.
const ChordQuality& quality_by_name(std::string_view name);
/// Nearest basic quality by interval-set overlap (e.g. dom9 -> dom7).
const ChordQuality& reduce_to_basic(const ChordQuality& q);

struct ChordSymbol {
  int root = 0;
  ChordQuality quality;
  std::optional<int> bass;

  /// Pitch classes sounding in the chord (root + intervals, plus bass).
  std::vector<int> pitch_classes() const;
  std::string label() const;
  bool operator==(const ChordSymbol&) const = default;
};

/// Ordering used for deterministic vocabularies: root, quality name, bass.
bool symbol_less(const ChordSymbol& a, const ChordSymbol& b);

struct ChordEvent {
  Ticks start = 0;
  Ticks duration = 0;
  ChordSymbol symbol;

  Ticks end() const { return start + duration; }
  bool operator==(const ChordEvent&) const = default;
};

struct LeadSheet {
  std::string title;
  Key key;
  int beats_per_measure = 4;
  std::vector<Note> melody;
  std::vector<ChordEvent> chords;

  Ticks end_tick() const;
  bool operator==(const LeadSheet&) const = default;
};

/// Checks ordering, positivity and non-overlap; throws ValidationError.
void validate(const LeadSheet& sheet);

LeadSheet parse_leadsheet(std::string_view document);
LeadSheet leadsheet_from_json(const nlohmann::json& doc);
nlohmann::json leadsheet_to_json(const LeadSheet& sheet);
std::string serialize_leadsheet(const LeadSheet& sheet);
LeadSheet load_leadsheet(const std::string& path);

/// Shift every pitch, root and bass by `semitones` and rotate the key tonic.
LeadSheet transpose(const LeadSheet& sheet, int semitones);
/// Semitone shift that moves the key to C major / A minor.
int normalization_shift(const Key& key);

enum class VocabMode { kVocab96, kCorpus };

class ChordVocabulary {
 public:
  static constexpr int kNoChord = 0;

  ChordVocabulary() = default;
  ChordVocabulary(std::vector<ChordSymbol> symbols, VocabMode mode);

  int size() const { return static_cast<int>(symbols_.size()) + 1; }
  VocabMode mode() const { return mode_; }
  /// Symbol for a non-NO_CHORD index (1..size-1).
  const ChordSymbol& symbol(int index) const;
  std::string label(int index) const;
  std::optional<int> find(const ChordSymbol& s) const;
  /// Maps a chord onto this vocabulary. In strict mode only exact matches
  /// succeed; otherwise the bass and then the quality are reduced.
  int index_of(const ChordSymbol& s, bool strict = false) const;
  /// 64-bit FNV-1a hash over the ordered symbol labels.
  std::uint64_t fingerprint() const;
  const std::vector<ChordSymbol>& symbols() const { return symbols_; }

  nlohmann::json to_json() const;
  static ChordVocabulary from_json(const nlohmann::json& j);

 private:
  std::vector<ChordSymbol> symbols_;  // index i+1 <-> symbols_[i]
  VocabMode mode_ = VocabMode::kCorpus;
};

ChordVocabulary build_vocabulary(const std::vector<LeadSheet>& sheets, VocabMode mode);

using MelodyFrame = std::array<std::uint8_t, kMelodyDim>;

struct FrameSequence {
  std::vector<MelodyFrame> melody;
  std::vector<int> chords;
  int frames_per_measure = 2;
  std::string source_id;

  int length() const { return static_cast<int>(chords.size()); }
};

struct AlignOptions {
  bool key_normalize = true;
  bool strict_mapping = false;
};

FrameSequence align_frames(const LeadSheet& sheet, const ChordVocabulary& vocab,
                           const AlignOptions& opts = {});

/// Row-major T x vocab_size 0/1 matrix.
std::vector<std::vector<std::uint8_t>> one_hot(const std::vector<int>& chord_frames, int vocab_size);

/// `frame_index, c0..c11, rest, chord_index` per line.
std::string export_frames(const FrameSequence& seq);
FrameSequence import_frames(std::string_view text, std::string source_id = {});

}  // namespace surprisenet
