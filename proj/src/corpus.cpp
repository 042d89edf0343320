#include "surprisenet/corpus.hpp"

#include <algorithm>
#include <array>
#include <filesystem>
#include <random>

namespace surprisenet {
namespace {

namespace fs = std::filesystem;

constexpr std::array<int, 7> kMajorScale = {0, 2, 4, 5, 7, 9, 11};
constexpr std::array<int, 7> kMinorScale = {0, 2, 3, 5, 7, 8, 10};

// Degree-to-degree transition weights (rows: from, cols: to); no self loops.
constexpr double kDegreeChain[7][7] = {
    {0.00, 0.15, 0.05, 0.25, 0.25, 0.20, 0.10},  // I
    {0.10, 0.00, 0.00, 0.10, 0.60, 0.10, 0.10},  // ii
    {0.00, 0.20, 0.00, 0.30, 0.00, 0.50, 0.00},  // iii
    {0.30, 0.15, 0.00, 0.00, 0.40, 0.15, 0.00},  // IV
    {0.60, 0.00, 0.05, 0.10, 0.00, 0.25, 0.00},  // V
    {0.00, 0.30, 0.15, 0.35, 0.20, 0.00, 0.00},  // vi
    {0.70, 0.00, 0.30, 0.00, 0.00, 0.00, 0.00},  // vii
};

struct DegreeHarmony {
  const char* triad;
  const char* seventh;
};

constexpr DegreeHarmony kMajorHarmony[7] = {{"maj", "maj7"}, {"min", "min7"}, {"min", "min7"}, {"maj", "maj7"},
                                            {"maj", "dom7"}, {"min", "min7"}, {"dim", "hdim7"}};
// Minor keys use the raised leading tone on V.
constexpr DegreeHarmony kMinorHarmony[7] = {{"min", "min7"}, {"dim", "hdim7"}, {"maj", "maj7"}, {"min", "min7"},
                                            {"maj", "dom7"}, {"maj", "maj7"},  {"maj", "dom7"}};

class Synth {
 public:
  explicit Synth(std::uint64_t seed) : rng_(seed) {}

  LeadSheet piece(int index) {
    LeadSheet s;
    s.title = "synth_" + std::to_string(index);
    s.key.tonic = uniform(0, 11);
    s.key.mode = chance(0.75) ? Mode::kMajor : Mode::kMinor;
    s.beats_per_measure = 4;
    const int measures = std::array<int, 3>{4, 6, 8}[static_cast<std::size_t>(uniform(0, 2))];
    const int frames = measures * 2;
    const auto profile = static_cast<RhythmProfile>(uniform(0, 5));

    const auto& scale = s.key.mode == Mode::kMajor ? kMajorScale : kMinorScale;
    const auto* harmony = s.key.mode == Mode::kMajor ? kMajorHarmony : kMinorHarmony;

    int degree = 0;
    int frame = 0;
    while (frame < frames) {
      int len = duration_for(profile, frame, frames);
      len = std::min(len, frames - frame);
      ChordEvent e;
      e.start = static_cast<Ticks>(frame) * kTicksPerFrame;
      e.duration = static_cast<Ticks>(len) * kTicksPerFrame;
      e.symbol = chord_for(degree, s.key, scale, harmony);
      s.chords.push_back(e);
      frame += len;
      degree = next_degree(degree);
    }
    write_melody(s, scale);
    return s;
  }

 private:
  int uniform(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool chance(double p) { return std::bernoulli_distribution(p)(rng_); }

  int next_degree(int from) {
    std::discrete_distribution<int> d(std::begin(kDegreeChain[from]), std::end(kDegreeChain[from]));
    return d(rng_);
  }

  int duration_for(RhythmProfile profile, int frame, int frames) {
    enum Level { kCalm, kSteady, kBusy };
    Level level = kSteady;
    const bool first_half = frame < frames / 2;
    const bool middle = frame >= frames / 4 && frame < frames - frames / 4;
    switch (profile) {
      case RhythmProfile::kCalm: level = kCalm; break;
      case RhythmProfile::kSteady: level = kSteady; break;
      case RhythmProfile::kBusy: level = kBusy; break;
      case RhythmProfile::kCalmThenBusy: level = first_half ? kCalm : kBusy; break;
      case RhythmProfile::kBusyThenCalm: level = first_half ? kBusy : kCalm; break;
      case RhythmProfile::kBusyMiddle: level = middle ? kBusy : kCalm; break;
    }
    switch (level) {
      case kCalm: return chance(0.5) ? 4 : 8;
      case kSteady: return chance(0.85) ? 2 : 4;
      case kBusy: return chance(0.85) ? 1 : 2;
    }
    return 2;
  }

  ChordSymbol chord_for(int degree, const Key& key, const std::array<int, 7>& scale, const DegreeHarmony* harmony) {
    ChordSymbol c;
    c.root = (key.tonic + scale[static_cast<std::size_t>(degree)]) % 12;
    if (key.mode == Mode::kMinor && degree == 6) c.root = (key.tonic + 10) % 12;
    const double roll = std::uniform_real_distribution<double>(0.0, 1.0)(rng_);
    const char* quality = harmony[degree].triad;
    if (roll < 0.15) {
      quality = harmony[degree].seventh;
    } else if (degree == 4 && roll < 0.20) {
      quality = "dom9";
    } else if (degree == 4 && roll < 0.25) {
      quality = "sus";
    }
    c.quality = quality_by_name(quality);
    if (degree == 0 && roll > 0.96) c.bass = (c.root + c.quality.intervals[1]) % 12;  // first inversion
    return c;
  }

  static int nearest_pitch(int pc, int around) {
    int best = around;
    int best_d = 128;
    for (int p = 55; p <= 84; ++p) {
      if (p % 12 != pc) continue;
      const int d = std::abs(p - around);
      if (d < best_d) {
        best = p;
        best_d = d;
      }
    }
    return best;
  }

  int step_in_scale(int pitch, int direction, const Key& key, const std::array<int, 7>& scale) {
    for (int p = pitch + direction; p >= 55 && p <= 84; p += direction) {
      const int rel = ((p - key.tonic) % 12 + 12) % 12;
      if (std::find(scale.begin(), scale.end(), rel) != scale.end()) return p;
    }
    return pitch;
  }

  void write_melody(LeadSheet& s, const std::array<int, 7>& scale) {
    int prev = 60 + uniform(0, 12);
    std::size_t ci = 0;
    const Ticks end = s.chords.back().end();
    for (Ticks beat = 0; beat < end; beat += kTicksPerBeat) {
      while (s.chords[ci].end() <= beat) ++ci;
      const auto& chord = s.chords[ci].symbol;
      const auto tones = chord.pitch_classes();
      const bool chord_start = beat == s.chords[ci].start;
      const int subdivisions = chance(0.2) ? 2 : 1;
      for (int k = 0; k < subdivisions; ++k) {
        const Ticks start = beat + k * (kTicksPerBeat / subdivisions);
        const bool anchor = chord_start && k == 0;
        const double roll = std::uniform_real_distribution<double>(0.0, 1.0)(rng_);
        int pitch = 0;
        if (!anchor && roll < 0.12) continue;  // rest
        if (anchor || roll < 0.65) {
          const int pc = tones[static_cast<std::size_t>(uniform(0, static_cast<int>(tones.size()) - 1))];
          pitch = nearest_pitch(pc, prev);
        } else {
          pitch = step_in_scale(prev, chance(0.5) ? 1 : -1, s.key, scale);
        }
        if (pitch < 58) pitch += 12;
        if (pitch > 81) pitch -= 12;
        s.melody.push_back({start, kTicksPerBeat / subdivisions, pitch});
        prev = pitch;
      }
    }
  }

  std::mt19937_64 rng_;
};

}  // namespace

CorpusLoad load_corpus_dir(const std::string& dir) {
  if (!fs::is_directory(dir)) throw std::invalid_argument("not a directory: " + dir);
  std::vector<fs::path> paths;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") paths.push_back(entry.path());
  }
  std::sort(paths.begin(), paths.end());
  CorpusLoad out;
  for (const auto& p : paths) {
    try {
      out.sheets.push_back(load_leadsheet(p.string()));
      out.files.push_back(p.string());
    } catch (const std::exception& e) {
      out.errors.push_back(e.what());
    }
  }
  return out;
}

std::vector<LeadSheet> synthesize_corpus(const SynthOptions& options) {
  Synth synth(options.seed);
  std::vector<LeadSheet> out;
  out.reserve(static_cast<std::size_t>(options.pieces));
  for (int i = 0; i < options.pieces; ++i) {
    out.push_back(synth.piece(i));
    validate(out.back());
  }
  return out;
}

}  // namespace surprisenet
