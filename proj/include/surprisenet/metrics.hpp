#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "surprisenet/leadsheet.hpp"

namespace surprisenet {

/// Tonal-centroid radii for the fifths, minor-thirds and major-thirds circles.
inline constexpr double kRadiusFifths = 1.0;
inline constexpr double kRadiusMinorThirds = 1.0;
inline constexpr double kRadiusMajorThirds = 0.5;

using TonalCentroid = std::array<double, 6>;
using Chroma = std::array<double, 12>;

/// Embedding of a single pitch class on the three circles.
TonalCentroid pitch_class_centroid(int pc);
/// L1-normalised weighted sum of pitch-class embeddings. Throws on all-zero chroma.
TonalCentroid tonal_centroid(const Chroma& chroma);
TonalCentroid tonal_centroid(std::span<const int> pitch_classes);
double centroid_distance(const TonalCentroid& a, const TonalCentroid& b);

/// Interval (melody - chord tone) mod 12 -> +1 / 0 / -1.
int consonance_score(int interval);

enum class CtdPairing { kConsecutiveFrames, kChordChanges };

/// Chord histogram entropy in nats, weighted by frame durations. NO_CHORD is ignored.
double che(const std::vector<int>& chords, const std::vector<double>& durations);
double che(const std::vector<int>& chords);
/// Number of distinct chord symbols other than NO_CHORD.
int cc(const std::vector<int>& chords);
double ctd(const std::vector<int>& chords, const ChordVocabulary& vocab,
           CtdPairing pairing = CtdPairing::kConsecutiveFrames);
double ctnctr(const std::vector<MelodyFrame>& melody, const std::vector<int>& chords, const ChordVocabulary& vocab);
double pcs(const std::vector<MelodyFrame>& melody, const std::vector<int>& chords, const ChordVocabulary& vocab);
double mctd(const std::vector<MelodyFrame>& melody, const std::vector<int>& chords, const ChordVocabulary& vocab);

struct MetricsReport {
  std::string piece_id;
  double che = 0.0;
  int cc = 0;
  double ctd = 0.0;
  double ctnctr = 0.0;
  double pcs = 0.0;
  double mctd = 0.0;
};

MetricsReport report(const FrameSequence& seq, const ChordVocabulary& vocab);

struct MetricSummary {
  double mean = 0.0;
  double stddev = 0.0;
};

struct CorpusReport {
  std::size_t pieces = 0;
  MetricSummary che, cc, ctd, ctnctr, pcs, mctd;
};

/// Unweighted mean (and sample standard deviation) over pieces.
CorpusReport aggregate(const std::vector<MetricsReport>& reports);

nlohmann::json to_json(const MetricsReport& r);
nlohmann::json to_json(const CorpusReport& r);

}  // namespace surprisenet
