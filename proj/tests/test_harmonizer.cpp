#include <gtest/gtest.h>

#include <cmath>

#include "helpers.hpp"
#include "surprisenet/harmonizer.hpp"

using namespace surprisenet;
using testutil::chord;
using testutil::note;

namespace {

struct Fixture {
  ChordVocabulary vocab = build_vocabulary({}, VocabMode::kVocab96);
  TransitionModel transitions = fit_transitions({{1, 9, 33, 1}, {1, 1, 9}}, 97, 0.01);
  Cvae model;

  Fixture() {
    CvaeConfig c;
    c.vocab_size = vocab.size();
    c.prenet_hidden = 4;
    c.enc_hidden = 8;
    c.latent_dim = 3;
    c.seed = 2;
    model = Cvae(c);
  }
};

std::vector<MelodyFrame> melody(int frames) {
  std::vector<MelodyFrame> m;
  for (int t = 0; t < frames; ++t) m.push_back(t % 3 == 2 ? testutil::frame({}) : testutil::frame({(t * 5) % 12}));
  return m;
}

}  // namespace

TEST(Presets, ZeroAndMax) {
  EXPECT_EQ(preset_contour({PresetKind::kZero, 3.0}, 8), SurpriseContour(8, 0.0));
  for (double v : preset_contour({PresetKind::kMax, std::log(4.0)}, 8)) EXPECT_NEAR(v, 1.3863, 1e-4);
}

TEST(Presets, SigmoidMidpointIsHalfAmplitude) {
  for (int T : {8, 16, 32}) {
    EXPECT_DOUBLE_EQ(preset_contour({PresetKind::kSigmoid, 5.0}, T)[static_cast<std::size_t>(T / 2)], 2.5);
    EXPECT_DOUBLE_EQ(preset_contour({PresetKind::kSigmoidReversed, 5.0}, T)[static_cast<std::size_t>(T / 2)], 2.5);
  }
}

TEST(Presets, ShapesAndBounds) {
  const double m = 4.0;
  const int T = 24;
  const auto s = preset_contour({PresetKind::kSigmoid, m}, T);
  const auto sr = preset_contour({PresetKind::kSigmoidReversed, m}, T);
  const auto b = preset_contour({PresetKind::kNormalBump, m}, T);
  const auto br = preset_contour({PresetKind::kNormalBumpReversed, m}, T);
  for (int t = 0; t < T; ++t) {
    const auto i = static_cast<std::size_t>(t);
    if (t > 0) {
      EXPECT_GE(s[i], s[i - 1]);
      EXPECT_LE(sr[i], sr[i - 1]);
    }
    EXPECT_NEAR(s[i] + sr[i], m, 1e-12);
    EXPECT_NEAR(b[i] + br[i], m, 1e-12);
    for (double v : {s[i], sr[i], b[i], br[i]}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, m);
    }
  }
  EXPECT_DOUBLE_EQ(b[T / 2], m);
  EXPECT_LT(b[0], 0.02 * m);
  EXPECT_THROW(preset_contour({PresetKind::kZero, 1.0}, 0), std::invalid_argument);
}

TEST(Presets, NamesRoundTrip) {
  for (PresetKind k : kAllPresets) EXPECT_EQ(parse_preset(preset_name(k)), k);
  EXPECT_THROW(parse_preset("wobbly"), std::invalid_argument);
}

TEST(Harmonize, SamplesAreReproducibleAndIndependentOfCount) {
  Fixture f;
  HarmonizationRequest req;
  req.melody = melody(10);
  req.contour = preset_contour({PresetKind::kSigmoid, 4.0}, 10);
  req.num_samples = 3;
  req.seed = 17;
  req.decode_mode = DecodeMode::kSample;
  const auto a = harmonize(f.model, f.transitions, req);
  const auto b = harmonize(f.model, f.transitions, req);
  ASSERT_EQ(a.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(a[i].chords, b[i].chords);
    EXPECT_EQ(a[i].realized, b[i].realized);
    EXPECT_EQ(a[i].chords.size(), 10u);
    EXPECT_EQ(a[i].realized, surprise_contour(f.transitions, a[i].chords));
  }
  req.num_samples = 5;
  const auto c = harmonize(f.model, f.transitions, req);
  EXPECT_EQ(c[2].chords, a[2].chords);
  req.seed = 18;
  EXPECT_NE(harmonize(f.model, f.transitions, req)[0].chords, a[0].chords);
}

TEST(Harmonize, ArgmaxDecodesMostLikelyChord) {
  Fixture f;
  HarmonizationRequest req;
  req.melody = melody(6);
  req.contour = SurpriseContour(6, 1.0);
  req.seed = 3;
  const auto h = harmonize(f.model, f.transitions, req).front();
  // Recompute the logits with the same per-sample noise.
  std::seed_seq seq{3u, 0u, 0u};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto z = nn::Tensor<float>::matrix(6, f.model.config().latent_dim);
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = static_cast<float>(normal(rng));
  const auto logits = f.model.generate_logits(req.melody, req.contour, z);
  for (int t = 0; t < 6; ++t) {
    const float* row = logits.row(t);
    EXPECT_EQ(h.chords[static_cast<std::size_t>(t)], std::max_element(row, row + logits.cols()) - row);
  }
}

TEST(Harmonize, LengthMismatchReportsBothLengths) {
  Fixture f;
  HarmonizationRequest req;
  req.melody = melody(8);
  req.contour = SurpriseContour(7, 0.0);
  try {
    harmonize(f.model, f.transitions, req);
    FAIL();
  } catch (const LengthMismatch& e) {
    EXPECT_EQ(e.contour_frames, 7u);
    EXPECT_EQ(e.melody_frames, 8u);
    EXPECT_NE(std::string(e.what()).find('7'), std::string::npos);
    EXPECT_NE(std::string(e.what()).find('8'), std::string::npos);
  }
  req.contour = SurpriseContour(8, 0.0);
  req.num_samples = 0;
  EXPECT_THROW(harmonize(f.model, f.transitions, req), std::invalid_argument);
  req.num_samples = 1;
  req.decode_mode = DecodeMode::kSample;
  req.temperature = 0.0;
  EXPECT_THROW(harmonize(f.model, f.transitions, req), std::invalid_argument);
}

TEST(ToLeadsheet, MergesRunsAndSkipsNoChord) {
  Fixture f;
  auto src = testutil::sheet("m", {}, {note(0, 8, 60)}, {});
  const int C = f.vocab.index_of({0, quality_by_name("maj"), std::nullopt}, true);
  const int G = f.vocab.index_of({7, quality_by_name("maj"), std::nullopt}, true);
  const auto one = to_leadsheet(src, {C, C, C, C}, f.vocab, false);
  ASSERT_EQ(one.chords.size(), 1u);
  EXPECT_EQ(one.chords[0].duration, 8 * kTicksPerBeat);
  const auto alt = to_leadsheet(src, {C, G, C, G}, f.vocab, false);
  EXPECT_EQ(alt.chords.size(), 4u);
  const auto gap = to_leadsheet(src, {C, 0, 0, G}, f.vocab, false);
  ASSERT_EQ(gap.chords.size(), 2u);
  EXPECT_EQ(gap.chords[1].start, 3 * kTicksPerFrame);
  EXPECT_THROW(to_leadsheet(src, {C, C}, f.vocab, false), std::invalid_argument);
}

TEST(ToLeadsheet, AlignRoundTripWithKeyNormalization) {
  Fixture f;
  auto src = testutil::sheet("e", {4, Mode::kMajor}, {note(0, 2, 64), note(2, 2, 68), note(4, 4, 71), note(9, 3, 66)},
                             {});
  const std::vector<int> chords = {5, 5, 41, 17, 0, 60};
  const auto sheet = to_leadsheet(src, chords, f.vocab, true);
  EXPECT_EQ(align_frames(sheet, f.vocab, {true, true}).chords, chords);
  const auto plain = to_leadsheet(src, chords, f.vocab, false);
  EXPECT_EQ(align_frames(plain, f.vocab, {false, true}).chords, chords);
}
