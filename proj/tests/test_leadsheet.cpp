#include <gtest/gtest.h>

#include <algorithm>

#include <nlohmann/json.hpp>

#include "helpers.hpp"
#include "surprisenet/leadsheet.hpp"

using namespace surprisenet;
using testutil::chord;
using testutil::note;

namespace {

const char* kMinimal = R"({
  "title": "one",
  "key": {"tonic": 0, "mode": "major"},
  "beats_per_measure": 4,
  "melody": [{"start_beat": 0, "duration_beats": 4, "midi_pitch": 64}],
  "chords": [{"start_beat": 0, "duration_beats": 4, "root_pc": 0, "quality": "maj"}]
})";

}  // namespace

TEST(ParseLeadsheet, MinimalDocument) {
  const auto s = parse_leadsheet(kMinimal);
  EXPECT_EQ(s.title, "one");
  ASSERT_EQ(s.melody.size(), 1u);
  ASSERT_EQ(s.chords.size(), 1u);
  EXPECT_EQ(s.melody[0].midi_pitch, 64);
  EXPECT_EQ(s.chords[0].duration, 4 * kTicksPerBeat);
  EXPECT_EQ(s.chords[0].symbol.quality.name, "maj");
  EXPECT_FALSE(s.chords[0].symbol.bass.has_value());
}

TEST(ParseLeadsheet, SortsOutOfOrderChords) {
  const auto s = parse_leadsheet(R"({
    "title": "t", "key": {"tonic": 0, "mode": "major"}, "beats_per_measure": 4, "melody": [],
    "chords": [{"start_beat": 2, "duration_beats": 2, "root_pc": 7, "quality": "dom7"},
               {"start_beat": 0, "duration_beats": 2, "root_pc": 0, "quality": "maj"}]})");
  ASSERT_EQ(s.chords.size(), 2u);
  EXPECT_EQ(s.chords[0].symbol.root, 0);
  EXPECT_EQ(s.chords[1].symbol.root, 7);
}

TEST(ParseLeadsheet, OverlappingChordsAreRejectedByIndex) {
  try {
    parse_leadsheet(R"({
      "title": "t", "key": {"tonic": 0, "mode": "major"}, "beats_per_measure": 4, "melody": [],
      "chords": [{"start_beat": 0, "duration_beats": 3, "root_pc": 0, "quality": "maj"},
                 {"start_beat": 2, "duration_beats": 2, "root_pc": 5, "quality": "maj"}]})");
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("0"), std::string::npos);
    EXPECT_NE(msg.find("1"), std::string::npos);
  }
}

TEST(ParseLeadsheet, MalformedReportsFieldPath) {
  try {
    parse_leadsheet(R"({"title": "t", "key": {"tonic": 0, "mode": "major"}, "beats_per_measure": 4,
      "melody": [{"start_beat": 0, "duration_beats": 1}], "chords": []})");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("/melody/0/midi_pitch"), std::string::npos) << e.what();
  }
}

TEST(ParseLeadsheet, SyntaxErrorReportsLine) {
  try {
    parse_leadsheet("{\n\"title\": \"t\",\n oops\n}");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(ParseLeadsheet, UnknownQualityAndOffGridBeats) {
  EXPECT_THROW(parse_leadsheet(R"({"title": "t", "key": {"tonic": 0, "mode": "major"}, "beats_per_measure": 4,
      "melody": [], "chords": [{"start_beat": 0, "duration_beats": 2, "root_pc": 0, "quality": "weird"}]})"),
               ParseError);
  EXPECT_THROW(parse_leadsheet(R"({"title": "t", "key": {"tonic": 0, "mode": "major"}, "beats_per_measure": 4,
      "melody": [{"start_beat": 0.013, "duration_beats": 1, "midi_pitch": 60}], "chords": []})"),
               ParseError);
}

TEST(ParseLeadsheet, SerializeRoundTrip) {
  auto s = testutil::sheet("rt", {9, Mode::kMinor}, {note(0, 1.5, 69), note(1.5, 0.5, 71)},
                           {chord(0, 2, 9, "min7"), chord(2, 2, 4, "dom7", 8)});
  EXPECT_EQ(parse_leadsheet(serialize_leadsheet(s)), s);
}

TEST(Vocabulary, Vocab96HasNinetySevenEntries) {
  const auto v = build_vocabulary({}, VocabMode::kVocab96);
  EXPECT_EQ(v.size(), 97);
  EXPECT_EQ(v.label(0), "N.C.");
  for (int i = 1; i < v.size(); ++i) EXPECT_EQ(v.index_of(v.symbol(i), true), i);
}

TEST(Vocabulary, CorpusEnumeratesSymbolsInCanonicalOrder) {
  auto a = testutil::sheet("a", {}, {}, {chord(0, 2, 7, "dom7"), chord(2, 2, 0, "maj")});
  auto b = testutil::sheet("b", {}, {}, {chord(0, 4, 0, "maj")});
  const auto v1 = build_vocabulary({a, b}, VocabMode::kCorpus);
  const auto v2 = build_vocabulary({b, a}, VocabMode::kCorpus);
  ASSERT_EQ(v1.size(), 3);
  EXPECT_EQ(v1.symbol(1).root, 0);
  EXPECT_EQ(v1.symbol(2).root, 7);
  EXPECT_EQ(v1.symbols(), v2.symbols());
  EXPECT_EQ(v1.fingerprint(), v2.fingerprint());
  EXPECT_THROW(build_vocabulary({}, VocabMode::kCorpus), std::invalid_argument);
}

TEST(Vocabulary, NonStrictMappingReducesQualityAndBass) {
  const auto v = build_vocabulary({}, VocabMode::kVocab96);
  const ChordSymbol g9{7, quality_by_name("dom9"), std::nullopt};
  const ChordSymbol g7{7, quality_by_name("dom7"), std::nullopt};
  EXPECT_EQ(v.index_of(g9), v.index_of(g7, true));
  const ChordSymbol c_over_e{0, quality_by_name("maj"), 4};
  EXPECT_EQ(v.index_of(c_over_e), v.index_of({0, quality_by_name("maj"), std::nullopt}, true));
  EXPECT_THROW(v.index_of(g9, true), MappingError);
}

TEST(Vocabulary, JsonRoundTripKeepsFingerprint) {
  auto a = testutil::sheet("a", {}, {}, {chord(0, 2, 7, "dom9"), chord(2, 2, 0, "maj", 4)});
  const auto v = build_vocabulary({a}, VocabMode::kCorpus);
  const auto back = ChordVocabulary::from_json(v.to_json());
  EXPECT_EQ(back.symbols(), v.symbols());
  EXPECT_EQ(back.fingerprint(), v.fingerprint());
  EXPECT_NE(v.fingerprint(), build_vocabulary({}, VocabMode::kVocab96).fingerprint());
}

TEST(AlignFrames, OneMeasureIsTwoFrames) {
  const auto v = build_vocabulary({}, VocabMode::kVocab96);
  auto s = testutil::sheet("m", {}, {note(0, 4, 60)}, {chord(0, 4, 0, "maj")});
  const auto seq = align_frames(s, v);
  EXPECT_EQ(seq.length(), 2);
  EXPECT_EQ(seq.melody.size(), 2u);
}

TEST(AlignFrames, SilenceSetsRestBit) {
  const auto v = build_vocabulary({}, VocabMode::kVocab96);
  auto s = testutil::sheet("r", {}, {note(0, 1, 62), note(4, 2, 67)}, {chord(0, 6, 7, "maj")});
  const auto seq = align_frames(s, v, {false, false});
  ASSERT_EQ(seq.length(), 3);
  EXPECT_EQ(seq.melody[0][2], 1);
  EXPECT_EQ(seq.melody[0][kRestBit], 0);
  for (int pc = 0; pc < 12; ++pc) EXPECT_EQ(seq.melody[1][static_cast<std::size_t>(pc)], 0);
  EXPECT_EQ(seq.melody[1][kRestBit], 1);
  for (const auto& f : seq.melody) {
    const bool silent = std::all_of(f.begin(), f.begin() + 12, [](auto b) { return b == 0; });
    EXPECT_EQ(silent, f[kRestBit] == 1);
  }
}

TEST(AlignFrames, KeyNormalizationMatchesHandTransposition) {
  const auto v = build_vocabulary({}, VocabMode::kVocab96);
  auto g = testutil::sheet("g", {7, Mode::kMajor}, {note(0, 2, 67), note(2, 2, 71), note(4, 4, 74)},
                           {chord(0, 4, 7, "maj"), chord(4, 4, 2, "dom7")});
  // The same sheet transposed down by hand: G -> C is -7 semitones.
  auto c = testutil::sheet("g", {0, Mode::kMajor}, {note(0, 2, 60), note(2, 2, 64), note(4, 4, 67)},
                           {chord(0, 4, 0, "maj"), chord(4, 4, 7, "dom7")});
  const auto a = align_frames(g, v, {true, false});
  const auto b = align_frames(c, v, {false, false});
  EXPECT_EQ(a.melody, b.melody);
  EXPECT_EQ(a.chords, b.chords);
}

TEST(AlignFrames, NormalizationShiftIsSmallest) {
  EXPECT_EQ(normalization_shift({0, Mode::kMajor}), 0);
  EXPECT_EQ(normalization_shift({7, Mode::kMajor}), 5);
  EXPECT_EQ(normalization_shift({2, Mode::kMajor}), -2);
  EXPECT_EQ(normalization_shift({9, Mode::kMinor}), 0);
  EXPECT_EQ(normalization_shift({4, Mode::kMinor}), 5);
}

TEST(AlignFrames, StrictMappingFailsForUnknownChord) {
  const auto v = build_vocabulary({}, VocabMode::kVocab96);
  auto s = testutil::sheet("s", {}, {note(0, 2, 60)}, {chord(0, 2, 7, "dom13")});
  EXPECT_THROW(align_frames(s, v, {false, true}), MappingError);
  EXPECT_EQ(align_frames(s, v, {false, false}).chords[0], v.index_of({7, quality_by_name("dom7"), std::nullopt}, true));
}

TEST(OneHot, Examples) {
  EXPECT_EQ(one_hot({0}, 3), (std::vector<std::vector<std::uint8_t>>{{1, 0, 0}}));
  EXPECT_EQ(one_hot({2, 1}, 3), (std::vector<std::vector<std::uint8_t>>{{0, 0, 1}, {0, 1, 0}}));
  for (const auto& row : one_hot({4, 0, 2, 2}, 5)) {
    int s = 0;
    for (auto b : row) s += b;
    EXPECT_EQ(s, 1);
  }
  EXPECT_THROW(one_hot({3}, 3), std::out_of_range);
  EXPECT_THROW(one_hot({-1}, 3), std::out_of_range);
}

TEST(FrameExport, RoundTrip) {
  const auto v = build_vocabulary({}, VocabMode::kVocab96);
  auto s = testutil::sheet("x", {}, {note(0, 1, 60), note(1, 1, 64), note(6, 2, 65)},
                           {chord(0, 4, 0, "maj"), chord(4, 4, 5, "maj7")});
  const auto seq = align_frames(s, v);
  const auto back = import_frames(export_frames(seq), "x");
  EXPECT_EQ(back.melody, seq.melody);
  EXPECT_EQ(back.chords, seq.chords);
  EXPECT_THROW(import_frames("0, 1, 2\n"), ParseError);
}

TEST(Transpose, PreservesStructure) {
  auto s = testutil::sheet("t", {2, Mode::kMajor}, {note(0, 1, 62)}, {chord(0, 2, 2, "min7", 9)});
  const auto up = transpose(s, 3);
  EXPECT_EQ(up.key.tonic, 5);
  EXPECT_EQ(up.melody[0].midi_pitch, 65);
  EXPECT_EQ(up.chords[0].symbol.root, 5);
  EXPECT_EQ(up.chords[0].symbol.bass, 0);
  EXPECT_EQ(transpose(up, -3), s);
}
