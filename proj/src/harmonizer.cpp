#include "surprisenet/harmonizer.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace surprisenet {
namespace {

struct PresetName {
  PresetKind kind;
  std::string_view name;
};

constexpr PresetName kPresetNames[] = {
    {PresetKind::kSigmoid, "sigmoid"}, {PresetKind::kSigmoidReversed, "sigmoid_reversed"},
    {PresetKind::kZero, "zero"},       {PresetKind::kMax, "max"},
    {PresetKind::kNormalBump, "normal"}, {PresetKind::kNormalBumpReversed, "normal_reversed"},
};

double logistic(double t, int frames, double amplitude) {
  const double k = 10.0 / frames;
  return amplitude / (1.0 + std::exp(-k * (t - frames / 2.0)));
}

}  // namespace

std::string_view preset_name(PresetKind kind) {
  for (const auto& p : kPresetNames) {
    if (p.kind == kind) return p.name;
  }
  return "unknown";
}

PresetKind parse_preset(std::string_view name) {
  for (const auto& p : kPresetNames) {
    if (p.name == name) return p.kind;
  }
  throw std::invalid_argument("unknown preset '" + std::string(name) + "'");
}

SurpriseContour preset_contour(const ContourPreset& preset, int frames) {
  if (frames < 1) throw std::invalid_argument("preset length must be >= 1");
  if (!(preset.amplitude >= 0.0) || !std::isfinite(preset.amplitude)) {
    throw std::invalid_argument("preset amplitude must be finite and >= 0");
  }
  const double m = preset.amplitude;
  const double sigma = frames / 6.0;
  SurpriseContour v(static_cast<std::size_t>(frames));
  for (int t = 0; t < frames; ++t) {
    const double x = static_cast<double>(t);
    double value = 0.0;
    switch (preset.kind) {
      case PresetKind::kSigmoid:
        value = logistic(x, frames, m);
        break;
      case PresetKind::kSigmoidReversed:
        // mirrored in time about T/2
        value = logistic(static_cast<double>(frames) - x, frames, m);
        break;
      case PresetKind::kZero:
        value = 0.0;
        break;
      case PresetKind::kMax:
        value = m;
        break;
      case PresetKind::kNormalBump:
      case PresetKind::kNormalBumpReversed: {
        const double d = x - frames / 2.0;
        value = m * std::exp(-(d * d) / (2.0 * sigma * sigma));
        if (preset.kind == PresetKind::kNormalBumpReversed) value = m - value;
        break;
      }
    }
    v[static_cast<std::size_t>(t)] = value;
  }
  return v;
}

LengthMismatch::LengthMismatch(std::size_t contour, std::size_t melody)
    : std::invalid_argument("contour has " + std::to_string(contour) + " frames but the melody has " +
                            std::to_string(melody)),
      contour_frames(contour),
      melody_frames(melody) {}

std::vector<Harmonization> harmonize(const Cvae& model, const TransitionModel& transitions,
                                     const HarmonizationRequest& request) {
  if (request.contour.size() != request.melody.size()) {
    throw LengthMismatch(request.contour.size(), request.melody.size());
  }
  if (request.melody.empty()) throw std::invalid_argument("melody has no frames");
  if (request.num_samples < 1) throw std::invalid_argument("num_samples must be >= 1");
  if (request.decode_mode == DecodeMode::kSample && !(request.temperature > 0.0)) {
    throw std::invalid_argument("temperature must be positive when sampling");
  }
  if (transitions.size() != model.config().vocab_size) {
    throw std::invalid_argument("transition model and checkpoint disagree on vocabulary size");
  }
  const int frames = static_cast<int>(request.melody.size());
  const int latent = model.config().latent_dim;

  std::vector<Harmonization> out;
  for (int s = 0; s < request.num_samples; ++s) {
    std::seed_seq seq{static_cast<std::uint32_t>(request.seed), static_cast<std::uint32_t>(request.seed >> 32),
                      static_cast<std::uint32_t>(s)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto z = nn::Tensor<float>::matrix(frames, latent);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = static_cast<float>(normal(rng));

    const auto logits = model.generate_logits(request.melody, request.contour, z);
    Harmonization h;
    for (int t = 0; t < frames; ++t) {
      const float* row = logits.row(t);
      if (request.decode_mode == DecodeMode::kArgmax) {
        h.chords.push_back(static_cast<int>(std::max_element(row, row + logits.cols()) - row));
        continue;
      }
      std::vector<double> w(static_cast<std::size_t>(logits.cols()));
      const double mx = *std::max_element(row, row + logits.cols());
      for (int c = 0; c < logits.cols(); ++c) {
        w[static_cast<std::size_t>(c)] = std::exp((static_cast<double>(row[c]) - mx) / request.temperature);
      }
      std::discrete_distribution<int> pick(w.begin(), w.end());
      h.chords.push_back(pick(rng));
    }
    h.realized = surprise_contour(transitions, h.chords);
    out.push_back(std::move(h));
  }
  return out;
}

LeadSheet to_leadsheet(const LeadSheet& melody_source, const std::vector<int>& chords, const ChordVocabulary& vocab,
                       bool key_normalized) {
  const Ticks end = melody_source.end_tick();
  const auto frames = static_cast<std::size_t>((end + kTicksPerFrame - 1) / kTicksPerFrame);
  if (chords.size() != frames) {
    throw std::invalid_argument("chord sequence has " + std::to_string(chords.size()) + " frames but the melody has " +
                                std::to_string(frames));
  }
  const int shift = key_normalized ? -normalization_shift(melody_source.key) : 0;
  LeadSheet out = melody_source;
  out.chords.clear();
  for (std::size_t t = 0; t < chords.size();) {
    std::size_t run = t + 1;
    while (run < chords.size() && chords[run] == chords[t]) ++run;
    if (chords[t] != ChordVocabulary::kNoChord) {
      ChordEvent e;
      e.start = static_cast<Ticks>(t) * kTicksPerFrame;
      e.duration = static_cast<Ticks>(run - t) * kTicksPerFrame;
      e.symbol = vocab.symbol(chords[t]);
      e.symbol.root = ((e.symbol.root + shift) % 12 + 12) % 12;
      if (e.symbol.bass) e.symbol.bass = ((*e.symbol.bass + shift) % 12 + 12) % 12;
      out.chords.push_back(std::move(e));
    }
    t = run;
  }
  return out;
}

}  // namespace surprisenet
