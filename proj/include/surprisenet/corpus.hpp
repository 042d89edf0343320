#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "surprisenet/leadsheet.hpp"

namespace surprisenet {

struct CorpusLoad {
  std::vector<LeadSheet> sheets;
  std::vector<std::string> files;   // same order as sheets
  std::vector<std::string> errors;  // "path: message" per unreadable file
};

/// Reads every *.json lead sheet in `dir` in lexicographic file order.
CorpusLoad load_corpus_dir(const std::string& dir);

/// Harmonic-rhythm profile of a synthetic piece.
enum class RhythmProfile { kCalm, kSteady, kBusy, kCalmThenBusy, kBusyThenCalm, kBusyMiddle };

struct SynthOptions {
  int pieces = 200;
  std::uint64_t seed = 2021;
};

/// Rule-based lead sheets: diatonic progressions from a degree-level Markov
/// chain, a per-piece harmonic-rhythm profile, and a melody of chord tones
/// with passing/neighbour tones. See data/mini_corpus/README.md.
std::vector<LeadSheet> synthesize_corpus(const SynthOptions& options);

}  // namespace surprisenet
