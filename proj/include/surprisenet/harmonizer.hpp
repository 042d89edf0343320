#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "surprisenet/checkpoint.hpp"
#include "surprisenet/cvae.hpp"
#include "surprisenet/leadsheet.hpp"
#include "surprisenet/surprise.hpp"

namespace surprisenet {

enum class PresetKind { kSigmoid, kSigmoidReversed, kZero, kMax, kNormalBump, kNormalBumpReversed };

inline constexpr PresetKind kAllPresets[] = {PresetKind::kSigmoid,    PresetKind::kSigmoidReversed,
                                             PresetKind::kZero,       PresetKind::kMax,
                                             PresetKind::kNormalBump, PresetKind::kNormalBumpReversed};

std::string_view preset_name(PresetKind kind);
/// Accepts "sigmoid", "sigmoid_reversed", "zero", "max", "normal", "normal_reversed".
PresetKind parse_preset(std::string_view name);

struct ContourPreset {
  PresetKind kind = PresetKind::kZero;
  double amplitude = 0.0;
};

/// Shapes over t = 0..T-1 with logistic steepness 10/T and bump width T/6.
SurpriseContour preset_contour(const ContourPreset& preset, int frames);

enum class DecodeMode { kArgmax, kSample };

struct HarmonizationRequest {
  std::vector<MelodyFrame> melody;
  SurpriseContour contour;
  int num_samples = 1;
  DecodeMode decode_mode = DecodeMode::kArgmax;
  double temperature = 1.0;
  std::uint64_t seed = 0;
};

struct Harmonization {
  std::vector<int> chords;
  SurpriseContour realized;
};

class LengthMismatch : public std::invalid_argument {
 public:
  LengthMismatch(std::size_t contour, std::size_t melody);
  std::size_t contour_frames;
  std::size_t melody_frames;
};

/// Samples z ~ N(0, I) per frame and decodes one progression per sample.
/// Sample i depends only on (seed, i), never on num_samples.
std::vector<Harmonization> harmonize(const Cvae& model, const TransitionModel& transitions,
                                     const HarmonizationRequest& request);

/// Chord events of two beats each, merged across repeated frames. When the
/// frames were key-normalised, chords are shifted back to the sheet's key.
LeadSheet to_leadsheet(const LeadSheet& melody_source, const std::vector<int>& chords, const ChordVocabulary& vocab,
                       bool key_normalized);

}  // namespace surprisenet
