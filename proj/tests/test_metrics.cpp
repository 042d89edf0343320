#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "helpers.hpp"
#include "oracles.hpp"
#include "surprisenet/metrics.hpp"

using namespace surprisenet;
using testutil::frame;

namespace {

const ChordVocabulary& v96() {
  static const auto v = build_vocabulary({}, VocabMode::kVocab96);
  return v;
}

int idx(int root, const char* q) { return v96().index_of({root, quality_by_name(q), std::nullopt}, true); }

}  // namespace

TEST(TonalCentroid, SinglePitchClassZero) {
  const auto c = tonal_centroid(std::vector<int>{0});
  const TonalCentroid want{0.0, 1.0, 0.0, 1.0, 0.0, 0.5};
  for (int d = 0; d < 6; ++d) EXPECT_DOUBLE_EQ(c[static_cast<std::size_t>(d)], want[static_cast<std::size_t>(d)]);
}

TEST(TonalCentroid, OctavePeriodic) {
  for (int pc = 0; pc < 12; ++pc) {
    const auto a = pitch_class_centroid(pc);
    const auto b = pitch_class_centroid(pc + 12);
    for (int d = 0; d < 6; ++d) EXPECT_NEAR(a[static_cast<std::size_t>(d)], b[static_cast<std::size_t>(d)], 1e-12);
  }
}

TEST(TonalCentroid, MajorTriadByHand) {
  // Phi(0), Phi(4), Phi(7) evaluated by hand from the circle angles.
  const double s3 = std::sqrt(3.0) / 2.0;
  const double phi0[6] = {0, 1, 0, 1, 0, 0.5};
  const double phi4[6] = {s3, -0.5, 0, 1, 0.5 * s3, -0.25};  // 14pi/3, 6pi, 8pi/3
  const double phi7[6] = {0.5, s3, 1, 0, 0.5 * s3, -0.25};   // 49pi/6, 21pi/2, 14pi/3
  const auto c = tonal_centroid(std::vector<int>{0, 4, 7});
  for (int d = 0; d < 6; ++d) EXPECT_NEAR(c[static_cast<std::size_t>(d)], (phi0[d] + phi4[d] + phi7[d]) / 3.0, 1e-12);
}

TEST(TonalCentroid, WeightedChromaAndErrors) {
  Chroma ch{};
  ch[0] = 2.0;
  ch[7] = 2.0;
  const auto a = tonal_centroid(ch);
  const auto b = tonal_centroid(std::vector<int>{0, 7});
  for (int d = 0; d < 6; ++d) EXPECT_NEAR(a[static_cast<std::size_t>(d)], b[static_cast<std::size_t>(d)], 1e-12);
  EXPECT_THROW(tonal_centroid(Chroma{}), std::invalid_argument);
}

TEST(Che, Examples) {
  EXPECT_EQ(che({5, 5, 5, 5}), 0.0);
  EXPECT_NEAR(che({1, 2, 3, 4}), std::log(4.0), 1e-12);
  EXPECT_NEAR(che({1, 2, 3, 4}, {2, 1, 1, 2}), -(2 * (1.0 / 3) * std::log(1.0 / 3) + 2 * (1.0 / 6) * std::log(1.0 / 6)),
              1e-12);
  // C held 3 beats, G 1, F 2 => equal total duration for C+G vs F ignored here.
  EXPECT_NEAR(che({1, 2, 1, 3}, {1.0, 1.0, 2.0, 2.0}), oracle::che({1, 1, 1, 2, 3, 3}), 1e-12);
}

TEST(Che, IgnoresNoChord) { EXPECT_NEAR(che({0, 1, 0, 2}), std::log(2.0), 1e-12); }

TEST(Cc, Examples) {
  EXPECT_EQ(cc({4, 4, 4}), 1);
  const int C = idx(0, "maj"), G = idx(7, "maj"), F = idx(5, "maj");
  EXPECT_EQ(cc({C, G, C, F}), 3);
  EXPECT_EQ(cc({0, 0}), 0);
}

TEST(Ctd, Examples) {
  const int C = idx(0, "maj"), G = idx(7, "maj");
  EXPECT_EQ(ctd({C, C}, v96()), 0.0);
  const auto cC = tonal_centroid(std::vector<int>{0, 4, 7});
  const auto cG = tonal_centroid(std::vector<int>{7, 11, 2});
  EXPECT_NEAR(ctd({C, G}, v96()), centroid_distance(cC, cG), 1e-12);
  EXPECT_NEAR(ctd({C, C, G}, v96(), CtdPairing::kChordChanges), centroid_distance(cC, cG), 1e-12);
  EXPECT_NEAR(ctd({C, C, G}, v96()), centroid_distance(cC, cG) / 2.0, 1e-12);
  EXPECT_THROW(ctd({C}, v96()), std::invalid_argument);
  EXPECT_THROW(ctd({C, 0}, v96()), std::invalid_argument);
}

TEST(Ctnctr, AllChordTones) {
  const int C = idx(0, "maj");
  EXPECT_EQ(ctnctr({frame({0}), frame({4}), frame({7, 0})}, {C, C, C}, v96()), 1.0);
}

TEST(Ctnctr, NoChordOrProperTones) {
  const int C = idx(0, "maj");
  // F# and C# against C major; each is followed by a note more than a whole tone away.
  EXPECT_EQ(ctnctr({frame({6}), frame({1}), frame({8})}, {C, C, 0}, v96()), 0.0);
}

TEST(Ctnctr, OnePassingTone) {
  const int C = idx(0, "maj");
  // E (chord), F (non-chord, next is G => proper), G (chord), B (non-chord, last => improper).
  const std::vector<MelodyFrame> mel = {frame({4}), frame({5}), frame({}), frame({7}), frame({11})};
  const double want = (2.0 + 1.0) / (2.0 + 2.0);
  EXPECT_DOUBLE_EQ(ctnctr(mel, {C, C, C, C, C}, v96()), want);
  EXPECT_THROW(ctnctr(mel, {C}, v96()), std::invalid_argument);
}

TEST(Pcs, Examples) {
  // Single-note chord so there is exactly one pair.
  const ChordVocabulary single({ChordSymbol{0, {"unison", {0}}, std::nullopt}}, VocabMode::kCorpus);
  EXPECT_EQ(pcs({frame({0})}, {1}, single), 1.0);
  const ChordVocabulary tritones({ChordSymbol{0, {"tt", {0, 6}}, std::nullopt}}, VocabMode::kCorpus);
  EXPECT_EQ(pcs({frame({6})}, {1}, single), -1.0);
  // Each note meets one unison (+1) and one tritone (-1).
  EXPECT_EQ(pcs({frame({6}), frame({0})}, {1, 1}, tritones), 0.0);
  EXPECT_THROW(pcs({frame({})}, {1}, single), std::invalid_argument);
  const int C = idx(0, "maj");
  const std::vector<MelodyFrame> mel = {frame({0, 2}), frame({5}), frame({11})};
  EXPECT_NEAR(pcs(mel, {C, C, C}, v96()), oracle::pcs(mel, {C, C, C}, v96()), 1e-12);
}

TEST(Mctd, Examples) {
  const ChordVocabulary single({ChordSymbol{3, {"unison", {0}}, std::nullopt}}, VocabMode::kCorpus);
  EXPECT_NEAR(mctd({frame({3})}, {1}, single), 0.0, 1e-15);
  EXPECT_THROW(mctd({frame({})}, {1}, single), std::invalid_argument);
  const int Am = idx(9, "min");
  const std::vector<MelodyFrame> mel = {frame({9}), frame({2, 11}), frame({})};
  EXPECT_NEAR(mctd(mel, {Am, Am, Am}, v96()), oracle::mctd(mel, {Am, Am, Am}, v96()), 1e-12);
  EXPECT_GE(mctd(mel, {Am, Am, Am}, v96()), 0.0);
}

TEST(MetricsOracle, RandomSequencesAgree) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 300; ++trial) {
    auto [mel, chords] = oracle::random_piece(rng, 8, v96().size());
    ASSERT_NEAR(che(chords), oracle::che(chords), 1e-9);
    ASSERT_EQ(cc(chords), oracle::cc(chords));
    ASSERT_NEAR(ctd(chords, v96()), oracle::ctd(chords, v96()), 1e-9);
    ASSERT_GE(ctd(chords, v96()), 0.0);
    ASSERT_NEAR(ctnctr(mel, chords, v96()), oracle::ctnctr(mel, chords, v96()), 1e-9);
    ASSERT_NEAR(pcs(mel, chords, v96()), oracle::pcs(mel, chords, v96()), 1e-9);
    ASSERT_NEAR(mctd(mel, chords, v96()), oracle::mctd(mel, chords, v96()), 1e-9);
  }
}

TEST(Report, ConstantAllChordToneFixture) {
  const int C = idx(0, "maj");
  FrameSequence seq;
  seq.melody = {frame({0}), frame({4}), frame({7})};
  seq.chords = {C, C, C};
  seq.source_id = "fix";
  // CTD on a constant progression is 0, so the report is well defined.
  const auto r = report(seq, v96());
  EXPECT_EQ(r.che, 0.0);
  EXPECT_EQ(r.cc, 1);
  EXPECT_EQ(r.ctnctr, 1.0);
  EXPECT_EQ(r.ctd, ctd(seq.chords, v96()));
  EXPECT_EQ(r.pcs, pcs(seq.melody, seq.chords, v96()));
  EXPECT_EQ(r.mctd, mctd(seq.melody, seq.chords, v96()));
  EXPECT_EQ(r.piece_id, "fix");
}

TEST(Aggregate, MeanAndSampleStd) {
  MetricsReport a, b;
  a.cc = 2;
  b.cc = 4;
  a.che = 1.0;
  b.che = 1.0;
  const auto agg = aggregate({a, b});
  EXPECT_EQ(agg.pieces, 2u);
  EXPECT_DOUBLE_EQ(agg.cc.mean, 3.0);
  EXPECT_DOUBLE_EQ(agg.cc.stddev, std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(agg.che.stddev, 0.0);
  EXPECT_THROW(aggregate({}), std::invalid_argument);
}
