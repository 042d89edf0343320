#include "surprisenet/leadsheet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace surprisenet {
namespace {

using nlohmann::json;

int mod12(int v) { return ((v % 12) + 12) % 12; }

std::vector<ChordQuality> make_known() {
  return {
      {"maj", {0, 4, 7}},           {"min", {0, 3, 7}},          {"aug", {0, 4, 8}},
      {"dim", {0, 3, 6}},           {"sus", {0, 5, 7}},          {"maj7", {0, 4, 7, 11}},
      {"min7", {0, 3, 7, 10}},      {"dom7", {0, 4, 7, 10}},     {"sus2", {0, 2, 7}},
      {"maj6", {0, 4, 7, 9}},       {"min6", {0, 3, 7, 9}},      {"dim7", {0, 3, 6, 9}},
      {"hdim7", {0, 3, 6, 10}},     {"minmaj7", {0, 3, 7, 11}},  {"aug7", {0, 4, 8, 10}},
      {"dom7sus", {0, 5, 7, 10}},   {"add9", {0, 4, 7, 14}},     {"dom9", {0, 4, 7, 10, 14}},
      {"maj9", {0, 4, 7, 11, 14}},  {"min9", {0, 3, 7, 10, 14}}, {"dom11", {0, 4, 7, 10, 14, 17}},
      {"min11", {0, 3, 7, 10, 14, 17}}, {"dom13", {0, 4, 7, 10, 14, 21}},
  };
}

std::set<int> pc_set(const ChordQuality& q) {
  std::set<int> s;
  for (int i : q.intervals) s.insert(i % 12);
  return s;
}

std::string path_str(const std::string& base, const std::string& field) {
  return base + "/" + field;
}

const json& require(const json& obj, const std::string& base, const char* field) {
  if (!obj.is_object() || !obj.contains(field)) {
    throw ParseError("missing field " + path_str(base, field));
  }
  return obj.at(field);
}

int require_int(const json& obj, const std::string& base, const char* field, int lo, int hi) {
  const json& v = require(obj, base, field);
  if (!v.is_number_integer()) throw ParseError("expected integer at " + path_str(base, field));
  auto x = v.get<long long>();
  if (x < lo || x > hi) {
    throw ParseError("value " + std::to_string(x) + " out of range [" + std::to_string(lo) + "," +
                     std::to_string(hi) + "] at " + path_str(base, field));
  }
  return static_cast<int>(x);
}

Ticks require_beats(const json& obj, const std::string& base, const char* field) {
  const json& v = require(obj, base, field);
  if (!v.is_number()) throw ParseError("expected number at " + path_str(base, field));
  double beats = v.get<double>();
  double ticks = beats * kTicksPerBeat;
  double rounded = std::round(ticks);
  if (!std::isfinite(beats) || std::abs(ticks - rounded) > 1e-6) {
    throw ParseError("beat value not on the 1/" + std::to_string(kTicksPerBeat) + " grid at " +
                     path_str(base, field));
  }
  return static_cast<Ticks>(rounded);
}

double ticks_to_beats(Ticks t) { return static_cast<double>(t) / kTicksPerBeat; }

template <typename Event>
void check_events(const std::vector<Event>& events, const char* what) {
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    if (e.start < 0) throw ValidationError(std::string(what) + " " + std::to_string(i) + " starts before 0");
    if (e.duration <= 0) {
      throw ValidationError(std::string(what) + " " + std::to_string(i) + " has non-positive duration");
    }
    if (i > 0) {
      const auto& prev = events[i - 1];
      if (e.start < prev.start) throw ValidationError(std::string(what) + " events not sorted");
      if (e.start < prev.end()) {
        throw ValidationError(std::string(what) + " events " + std::to_string(i - 1) + " and " +
                              std::to_string(i) + " overlap (beats " +
                              std::to_string(ticks_to_beats(prev.start)) + " and " +
                              std::to_string(ticks_to_beats(e.start)) + ")");
      }
    }
  }
}

}  // namespace

const std::vector<ChordQuality>& known_qualities() {
  static const std::vector<ChordQuality> q = make_known();
  return q;
}

const std::vector<ChordQuality>& basic_qualities() {
  static const std::vector<ChordQuality> q(known_qualities().begin(), known_qualities().begin() + 8);
  return q;
}

const ChordQuality& quality_by_name(std::string_view name) {
  for (const auto& q : known_qualities()) {
    if (q.name == name) return q;
  }
  throw ParseError("unknown chord quality '" + std::string(name) + "'");
}

const ChordQuality& reduce_to_basic(const ChordQuality& q) {
  const auto target = pc_set(q);
  const ChordQuality* best = nullptr;
  int best_hit = -1;
  int best_miss = 0;
  for (const auto& cand : basic_qualities()) {
    int hit = 0;
    int miss = 0;
    for (int pc : pc_set(cand)) (target.count(pc) ? hit : miss)++;
    if (hit > best_hit || (hit == best_hit && miss < best_miss)) {
      best = &cand;
      best_hit = hit;
      best_miss = miss;
    }
  }
  return *best;
}

std::vector<int> ChordSymbol::pitch_classes() const {
  std::set<int> pcs;
  for (int i : quality.intervals) pcs.insert(mod12(root + i));
  if (bass) pcs.insert(mod12(*bass));
  return {pcs.begin(), pcs.end()};
}

std::string ChordSymbol::label() const {
  static const char* names[] = {"C", "C#", "D", "Eb", "E", "F", "F#", "G", "Ab", "A", "Bb", "B"};
  std::string s = std::string(names[mod12(root)]) + ":" + quality.name;
  if (bass) s += "/" + std::string(names[mod12(*bass)]);
  return s;
}

bool symbol_less(const ChordSymbol& a, const ChordSymbol& b) {
  if (a.root != b.root) return a.root < b.root;
  if (a.quality.name != b.quality.name) return a.quality.name < b.quality.name;
  // no bass sorts before any bass
  return a.bass.value_or(-1) < b.bass.value_or(-1);
}

Ticks LeadSheet::end_tick() const {
  Ticks end = 0;
  for (const auto& n : melody) end = std::max(end, n.end());
  for (const auto& c : chords) end = std::max(end, c.end());
  return end;
}

void validate(const LeadSheet& sheet) {
  if (sheet.beats_per_measure <= 0) throw ValidationError("beats_per_measure must be positive");
  if (sheet.key.tonic < 0 || sheet.key.tonic > 11) throw ValidationError("key tonic out of range");
  check_events(sheet.melody, "melody");
  check_events(sheet.chords, "chord");
  for (const auto& n : sheet.melody) {
    if (n.midi_pitch < 0 || n.midi_pitch > 127) throw ValidationError("midi pitch out of range");
  }
}

LeadSheet leadsheet_from_json(const json& doc) {
  if (!doc.is_object()) throw ParseError("document root must be an object");
  LeadSheet sheet;
  const json& title = require(doc, "", "title");
  if (!title.is_string()) throw ParseError("expected string at /title");
  sheet.title = title.get<std::string>();

  const json& key = require(doc, "", "key");
  sheet.key.tonic = require_int(key, "/key", "tonic", 0, 11);
  const json& mode = require(key, "/key", "mode");
  if (mode == "major") {
    sheet.key.mode = Mode::kMajor;
  } else if (mode == "minor") {
    sheet.key.mode = Mode::kMinor;
  } else {
    throw ParseError("expected \"major\" or \"minor\" at /key/mode");
  }
  sheet.beats_per_measure = require_int(doc, "", "beats_per_measure", 1, 64);

  const json& melody = require(doc, "", "melody");
  if (!melody.is_array()) throw ParseError("expected array at /melody");
  for (std::size_t i = 0; i < melody.size(); ++i) {
    const std::string base = "/melody/" + std::to_string(i);
    Note n;
    n.start = require_beats(melody[i], base, "start_beat");
    n.duration = require_beats(melody[i], base, "duration_beats");
    n.midi_pitch = require_int(melody[i], base, "midi_pitch", 0, 127);
    sheet.melody.push_back(n);
  }

  const json& chords = require(doc, "", "chords");
  if (!chords.is_array()) throw ParseError("expected array at /chords");
  for (std::size_t i = 0; i < chords.size(); ++i) {
    const std::string base = "/chords/" + std::to_string(i);
    ChordEvent c;
    c.start = require_beats(chords[i], base, "start_beat");
    c.duration = require_beats(chords[i], base, "duration_beats");
    c.symbol.root = require_int(chords[i], base, "root_pc", 0, 11);
    const json& q = require(chords[i], base, "quality");
    if (!q.is_string()) throw ParseError("expected string at " + base + "/quality");
    try {
      c.symbol.quality = quality_by_name(q.get<std::string>());
    } catch (const ParseError& e) {
      throw ParseError(std::string(e.what()) + " at " + base + "/quality");
    }
    if (chords[i].contains("bass_pc") && !chords[i]["bass_pc"].is_null()) {
      c.symbol.bass = require_int(chords[i], base, "bass_pc", 0, 11);
    }
    sheet.chords.push_back(c);
  }

  auto by_start = [](const auto& a, const auto& b) { return a.start < b.start; };
  std::stable_sort(sheet.melody.begin(), sheet.melody.end(), by_start);
  std::stable_sort(sheet.chords.begin(), sheet.chords.end(), by_start);
  validate(sheet);
  return sheet;
}

LeadSheet parse_leadsheet(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    // byte offset -> line number
    std::size_t line = 1;
    for (std::size_t i = 0; i < std::min<std::size_t>(e.byte, document.size()); ++i) {
      if (document[i] == '\n') ++line;
    }
    throw ParseError("malformed lead sheet at line " + std::to_string(line) + ": " + e.what());
  }
  return leadsheet_from_json(doc);
}

json leadsheet_to_json(const LeadSheet& sheet) {
  json doc;
  doc["title"] = sheet.title;
  doc["key"] = {{"tonic", sheet.key.tonic}, {"mode", sheet.key.mode == Mode::kMajor ? "major" : "minor"}};
  doc["beats_per_measure"] = sheet.beats_per_measure;
  doc["melody"] = json::array();
  for (const auto& n : sheet.melody) {
    doc["melody"].push_back({{"start_beat", ticks_to_beats(n.start)},
                             {"duration_beats", ticks_to_beats(n.duration)},
                             {"midi_pitch", n.midi_pitch}});
  }
  doc["chords"] = json::array();
  for (const auto& c : sheet.chords) {
    json e = {{"start_beat", ticks_to_beats(c.start)},
              {"duration_beats", ticks_to_beats(c.duration)},
              {"root_pc", c.symbol.root},
              {"quality", c.symbol.quality.name}};
    e["bass_pc"] = c.symbol.bass ? json(*c.symbol.bass) : json(nullptr);
    doc["chords"].push_back(std::move(e));
  }
  return doc;
}

std::string serialize_leadsheet(const LeadSheet& sheet) { return leadsheet_to_json(sheet).dump(2); }

LeadSheet load_leadsheet(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_leadsheet(ss.str());
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

LeadSheet transpose(const LeadSheet& sheet, int semitones) {
  LeadSheet out = sheet;
  out.key.tonic = mod12(sheet.key.tonic + semitones);
  for (auto& n : out.melody) {
    n.midi_pitch += semitones;
    if (n.midi_pitch < 0 || n.midi_pitch > 127) throw ValidationError("transposition leaves MIDI range");
  }
  for (auto& c : out.chords) {
    c.symbol.root = mod12(c.symbol.root + semitones);
    if (c.symbol.bass) c.symbol.bass = mod12(*c.symbol.bass + semitones);
  }
  return out;
}

int normalization_shift(const Key& key) {
  const int target = key.mode == Mode::kMajor ? 0 : 9;
  const int raw = mod12(target - key.tonic);
  // smallest move in [-6, 5]
  return raw >= 6 ? raw - 12 : raw;
}

ChordVocabulary::ChordVocabulary(std::vector<ChordSymbol> symbols, VocabMode mode)
    : symbols_(std::move(symbols)), mode_(mode) {
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    for (std::size_t j = i + 1; j < symbols_.size(); ++j) {
      if (symbols_[i] == symbols_[j]) throw ValidationError("duplicate vocabulary symbol " + symbols_[i].label());
    }
  }
}

const ChordSymbol& ChordVocabulary::symbol(int index) const {
  if (index <= kNoChord || index >= size()) {
    throw std::out_of_range("vocabulary index " + std::to_string(index) + " has no chord symbol");
  }
  return symbols_[static_cast<std::size_t>(index - 1)];
}

std::string ChordVocabulary::label(int index) const {
  return index == kNoChord ? std::string("N.C.") : symbol(index).label();
}

std::optional<int> ChordVocabulary::find(const ChordSymbol& s) const {
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    if (symbols_[i] == s) return static_cast<int>(i) + 1;
  }
  return std::nullopt;
}

int ChordVocabulary::index_of(const ChordSymbol& s, bool strict) const {
  if (auto hit = find(s)) return *hit;
  if (!strict) {
    ChordSymbol reduced = s;
    reduced.bass.reset();
    if (auto hit = find(reduced)) return *hit;
    reduced.quality = reduce_to_basic(s.quality);
    if (auto hit = find(reduced)) return *hit;
  }
  throw MappingError("chord " + s.label() + " is not in the vocabulary");
}

std::uint64_t ChordVocabulary::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& s : symbols_) {
    mix(s.label());
    mix("|");
    for (int i : s.quality.intervals) mix(std::to_string(i) + ",");
    mix(";");
  }
  return h;
}

json ChordVocabulary::to_json() const {
  json j;
  j["mode"] = mode_ == VocabMode::kVocab96 ? "vocab96" : "corpus";
  j["symbols"] = json::array();
  for (const auto& s : symbols_) {
    json e = {{"root_pc", s.root}, {"quality", s.quality.name}, {"intervals", s.quality.intervals}};
    e["bass_pc"] = s.bass ? json(*s.bass) : json(nullptr);
    j["symbols"].push_back(std::move(e));
  }
  return j;
}

ChordVocabulary ChordVocabulary::from_json(const json& j) {
  try {
    VocabMode mode = j.at("mode") == "vocab96" ? VocabMode::kVocab96 : VocabMode::kCorpus;
    std::vector<ChordSymbol> symbols;
    for (const auto& e : j.at("symbols")) {
      ChordSymbol s;
      s.root = e.at("root_pc").get<int>();
      s.quality.name = e.at("quality").get<std::string>();
      s.quality.intervals = e.at("intervals").get<std::vector<int>>();
      if (!e.at("bass_pc").is_null()) s.bass = e.at("bass_pc").get<int>();
      symbols.push_back(std::move(s));
    }
    return ChordVocabulary(std::move(symbols), mode);
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed vocabulary: ") + e.what());
  }
}

ChordVocabulary build_vocabulary(const std::vector<LeadSheet>& sheets, VocabMode mode) {
  std::vector<ChordSymbol> symbols;
  if (mode == VocabMode::kVocab96) {
    for (int root = 0; root < 12; ++root) {
      for (const auto& q : basic_qualities()) symbols.push_back({root, q, std::nullopt});
    }
    return ChordVocabulary(std::move(symbols), mode);
  }
  if (sheets.empty()) throw std::invalid_argument("corpus vocabulary needs at least one lead sheet");
  for (const auto& sheet : sheets) {
    for (const auto& c : sheet.chords) symbols.push_back(c.symbol);
  }
  std::sort(symbols.begin(), symbols.end(), symbol_less);
  symbols.erase(std::unique(symbols.begin(), symbols.end()), symbols.end());
  return ChordVocabulary(std::move(symbols), mode);
}

FrameSequence align_frames(const LeadSheet& input, const ChordVocabulary& vocab, const AlignOptions& opts) {
  validate(input);
  const LeadSheet sheet = opts.key_normalize ? transpose(input, normalization_shift(input.key)) : input;
  const Ticks end = sheet.end_tick();
  if (end <= 0) throw ValidationError("lead sheet '" + sheet.title + "' has no events");
  const auto frames = static_cast<std::size_t>((end + kTicksPerFrame - 1) / kTicksPerFrame);

  FrameSequence seq;
  seq.source_id = sheet.title;
  seq.frames_per_measure = std::max(1, (sheet.beats_per_measure + kBeatsPerFrame - 1) / kBeatsPerFrame);
  seq.melody.assign(frames, {});
  seq.chords.assign(frames, ChordVocabulary::kNoChord);

  for (const auto& n : sheet.melody) {
    const auto first = static_cast<std::size_t>(n.start / kTicksPerFrame);
    const auto last = static_cast<std::size_t>((n.end() - 1) / kTicksPerFrame);
    for (std::size_t f = first; f <= last && f < frames; ++f) seq.melody[f][mod12(n.midi_pitch)] = 1;
  }
  for (auto& frame : seq.melody) {
    const bool silent = std::all_of(frame.begin(), frame.begin() + 12, [](auto b) { return b == 0; });
    frame[kRestBit] = silent ? 1 : 0;
  }

  std::size_t ci = 0;
  for (std::size_t f = 0; f < frames; ++f) {
    const Ticks t = static_cast<Ticks>(f) * kTicksPerFrame;
    while (ci < sheet.chords.size() && sheet.chords[ci].end() <= t) ++ci;
    if (ci < sheet.chords.size() && sheet.chords[ci].start <= t) {
      seq.chords[f] = vocab.index_of(sheet.chords[ci].symbol, opts.strict_mapping);
    }
  }
  return seq;
}

std::vector<std::vector<std::uint8_t>> one_hot(const std::vector<int>& chord_frames, int vocab_size) {
  std::vector<std::vector<std::uint8_t>> out;
  out.reserve(chord_frames.size());
  for (int idx : chord_frames) {
    if (idx < 0 || idx >= vocab_size) {
      throw std::out_of_range("chord index " + std::to_string(idx) + " outside vocabulary of size " +
                              std::to_string(vocab_size));
    }
    std::vector<std::uint8_t> row(static_cast<std::size_t>(vocab_size), 0);
    row[static_cast<std::size_t>(idx)] = 1;
    out.push_back(std::move(row));
  }
  return out;
}

std::string export_frames(const FrameSequence& seq) {
  std::ostringstream out;
  for (int t = 0; t < seq.length(); ++t) {
    out << t;
    for (auto bit : seq.melody[static_cast<std::size_t>(t)]) out << ", " << static_cast<int>(bit);
    out << ", " << seq.chords[static_cast<std::size_t>(t)] << '\n';
  }
  return out.str();
}

FrameSequence import_frames(std::string_view text, std::string source_id) {
  FrameSequence seq;
  seq.source_id = std::move(source_id);
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    std::vector<long> values;
    long v = 0;
    while (fields >> v) values.push_back(v);
    if (values.size() != kMelodyDim + 2 || values[0] != seq.length()) {
      throw ParseError("malformed frame row at line " + std::to_string(lineno));
    }
    std::array<std::uint8_t, kMelodyDim> frame{};
    for (int i = 0; i < kMelodyDim; ++i) {
      const long bit = values[static_cast<std::size_t>(i) + 1];
      if (bit != 0 && bit != 1) throw ParseError("non-binary melody bit at line " + std::to_string(lineno));
      frame[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(bit);
    }
    seq.melody.push_back(frame);
    seq.chords.push_back(static_cast<int>(values.back()));
  }
  if (seq.chords.empty()) throw ParseError("frame file has no rows");
  return seq;
}

}  // namespace surprisenet
