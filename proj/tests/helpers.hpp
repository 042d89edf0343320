#pragma once

#include <string>
#include <vector>

#include "surprisenet/leadsheet.hpp"

namespace testutil {

using namespace surprisenet;

inline Note note(double start_beat, double beats, int pitch) {
  return {static_cast<Ticks>(start_beat * kTicksPerBeat), static_cast<Ticks>(beats * kTicksPerBeat), pitch};
}

inline ChordEvent chord(double start_beat, double beats, int root, const char* quality,
                        std::optional<int> bass = std::nullopt) {
  return {static_cast<Ticks>(start_beat * kTicksPerBeat), static_cast<Ticks>(beats * kTicksPerBeat),
          ChordSymbol{root, quality_by_name(quality), bass}};
}

inline LeadSheet sheet(std::string title, Key key, std::vector<Note> melody, std::vector<ChordEvent> chords) {
  LeadSheet s;
  s.title = std::move(title);
  s.key = key;
  s.melody = std::move(melody);
  s.chords = std::move(chords);
  return s;
}

inline MelodyFrame frame(std::initializer_list<int> pcs) {
  MelodyFrame f{};
  for (int pc : pcs) f[static_cast<std::size_t>(pc)] = 1;
  if (pcs.size() == 0) f[kRestBit] = 1;
  return f;
}

}  // namespace testutil
