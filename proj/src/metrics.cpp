#include "surprisenet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace surprisenet {
namespace {

void check_aligned(const std::vector<MelodyFrame>& melody, const std::vector<int>& chords) {
  if (melody.size() != chords.size()) {
    throw std::invalid_argument("melody has " + std::to_string(melody.size()) + " frames but chords have " +
                                std::to_string(chords.size()));
  }
}

std::vector<int> active_pcs(const MelodyFrame& frame) {
  std::vector<int> pcs;
  for (int pc = 0; pc < 12; ++pc) {
    if (frame[static_cast<std::size_t>(pc)]) pcs.push_back(pc);
  }
  return pcs;
}

int pc_distance(int a, int b) {
  const int d = std::abs(a - b) % 12;
  return std::min(d, 12 - d);
}

}  // namespace

TonalCentroid pitch_class_centroid(int pc) {
  const double l = static_cast<double>(((pc % 12) + 12) % 12);
  const double pi = std::numbers::pi;
  return {kRadiusFifths * std::sin(l * 7.0 * pi / 6.0),      kRadiusFifths * std::cos(l * 7.0 * pi / 6.0),
          kRadiusMinorThirds * std::sin(l * 3.0 * pi / 2.0), kRadiusMinorThirds * std::cos(l * 3.0 * pi / 2.0),
          kRadiusMajorThirds * std::sin(l * 2.0 * pi / 3.0), kRadiusMajorThirds * std::cos(l * 2.0 * pi / 3.0)};
}

TonalCentroid tonal_centroid(const Chroma& chroma) {
  double total = 0.0;
  for (double w : chroma) {
    if (w < 0.0 || !std::isfinite(w)) throw std::invalid_argument("chroma weights must be finite and nonnegative");
    total += w;
  }
  if (total <= 0.0) throw std::invalid_argument("tonal centroid of an all-zero chroma is undefined");
  TonalCentroid out{};
  for (int pc = 0; pc < 12; ++pc) {
    const double w = chroma[static_cast<std::size_t>(pc)] / total;
    if (w == 0.0) continue;
    const auto phi = pitch_class_centroid(pc);
    for (std::size_t d = 0; d < 6; ++d) out[d] += w * phi[d];
  }
  return out;
}

TonalCentroid tonal_centroid(std::span<const int> pitch_classes) {
  Chroma chroma{};
  for (int pc : pitch_classes) chroma[static_cast<std::size_t>(((pc % 12) + 12) % 12)] = 1.0;
  return tonal_centroid(chroma);
}

double centroid_distance(const TonalCentroid& a, const TonalCentroid& b) {
  double s = 0.0;
  for (std::size_t d = 0; d < 6; ++d) s += (a[d] - b[d]) * (a[d] - b[d]);
  return std::sqrt(s);
}

int consonance_score(int interval) {
  switch (((interval % 12) + 12) % 12) {
    case 0:
    case 3:
    case 4:
    case 7:
    case 8:
    case 9:
      return 1;
    case 5:
      return 0;
    default:
      return -1;
  }
}

double che(const std::vector<int>& chords, const std::vector<double>& durations) {
  if (chords.empty()) throw std::invalid_argument("chord histogram entropy of an empty progression");
  if (durations.size() != chords.size()) throw std::invalid_argument("durations must align with chords");
  std::map<int, double> hist;
  double total = 0.0;
  for (std::size_t t = 0; t < chords.size(); ++t) {
    if (chords[t] == ChordVocabulary::kNoChord) continue;
    hist[chords[t]] += durations[t];
    total += durations[t];
  }
  if (total <= 0.0) return 0.0;
  double h = 0.0;
  for (const auto& [_, w] : hist) {
    const double p = w / total;
    if (p > 0.0) h -= p * std::log(p);
  }
  return std::max(h, 0.0);
}

double che(const std::vector<int>& chords) { return che(chords, std::vector<double>(chords.size(), 1.0)); }

int cc(const std::vector<int>& chords) {
  std::vector<int> seen;
  for (int c : chords) {
    if (c != ChordVocabulary::kNoChord) seen.push_back(c);
  }
  std::sort(seen.begin(), seen.end());
  return static_cast<int>(std::unique(seen.begin(), seen.end()) - seen.begin());
}

double ctd(const std::vector<int>& chords, const ChordVocabulary& vocab, CtdPairing pairing) {
  std::vector<int> usable;
  for (int c : chords) {
    if (c == ChordVocabulary::kNoChord) continue;
    if (pairing == CtdPairing::kChordChanges && !usable.empty() && usable.back() == c) continue;
    usable.push_back(c);
  }
  if (pairing == CtdPairing::kChordChanges) {
    if (std::count_if(chords.begin(), chords.end(), [](int c) { return c != ChordVocabulary::kNoChord; }) < 2) {
      throw std::invalid_argument("chord tonal distance needs at least two chords");
    }
    if (usable.size() < 2) return 0.0;
  } else if (usable.size() < 2) {
    throw std::invalid_argument("chord tonal distance needs at least two chords");
  }
  double sum = 0.0;
  for (std::size_t i = 1; i < usable.size(); ++i) {
    const auto a = vocab.symbol(usable[i - 1]).pitch_classes();
    const auto b = vocab.symbol(usable[i]).pitch_classes();
    sum += centroid_distance(tonal_centroid(a), tonal_centroid(b));
  }
  return sum / static_cast<double>(usable.size() - 1);
}

double ctnctr(const std::vector<MelodyFrame>& melody, const std::vector<int>& chords, const ChordVocabulary& vocab) {
  check_aligned(melody, chords);
  if (melody.empty()) throw std::invalid_argument("CTnCTR needs a nonempty melody");
  long n_chord = 0;
  long n_non = 0;
  long n_proper = 0;
  for (std::size_t t = 0; t < melody.size(); ++t) {
    if (chords[t] == ChordVocabulary::kNoChord) continue;
    const auto chord_pcs = vocab.symbol(chords[t]).pitch_classes();
    std::vector<int> next;
    for (std::size_t u = t + 1; u < melody.size() && next.empty(); ++u) next = active_pcs(melody[u]);
    for (int pc : active_pcs(melody[t])) {
      if (std::find(chord_pcs.begin(), chord_pcs.end(), pc) != chord_pcs.end()) {
        ++n_chord;
        continue;
      }
      ++n_non;
      if (std::any_of(next.begin(), next.end(), [pc](int q) { return pc_distance(pc, q) <= 2; })) ++n_proper;
    }
  }
  if (n_chord + n_non == 0) return 1.0;
  return static_cast<double>(n_chord + n_proper) / static_cast<double>(n_chord + n_non);
}

double pcs(const std::vector<MelodyFrame>& melody, const std::vector<int>& chords, const ChordVocabulary& vocab) {
  check_aligned(melody, chords);
  double sum = 0.0;
  long pairs = 0;
  for (std::size_t t = 0; t < melody.size(); ++t) {
    if (chords[t] == ChordVocabulary::kNoChord || melody[t][kRestBit]) continue;
    const auto chord_pcs = vocab.symbol(chords[t]).pitch_classes();
    for (int m : active_pcs(melody[t])) {
      for (int c : chord_pcs) {
        sum += consonance_score(m - c);
        ++pairs;
      }
    }
  }
  if (pairs == 0) throw std::invalid_argument("pitch consonance score has no melody/chord pairs");
  return sum / static_cast<double>(pairs);
}

double mctd(const std::vector<MelodyFrame>& melody, const std::vector<int>& chords, const ChordVocabulary& vocab) {
  check_aligned(melody, chords);
  double sum = 0.0;
  long notes = 0;
  for (std::size_t t = 0; t < melody.size(); ++t) {
    if (chords[t] == ChordVocabulary::kNoChord || melody[t][kRestBit]) continue;
    const auto chord_tc = tonal_centroid(vocab.symbol(chords[t]).pitch_classes());
    for (int m : active_pcs(melody[t])) {
      sum += centroid_distance(pitch_class_centroid(m), chord_tc);
      ++notes;
    }
  }
  if (notes == 0) throw std::invalid_argument("melody-chord tonal distance has no usable frames");
  return sum / static_cast<double>(notes);
}

MetricsReport report(const FrameSequence& seq, const ChordVocabulary& vocab) {
  for (int c : seq.chords) {
    if (c < 0 || c >= vocab.size()) throw std::out_of_range("chord index outside vocabulary");
  }
  MetricsReport r;
  r.piece_id = seq.source_id;
  r.che = che(seq.chords);
  r.cc = cc(seq.chords);
  r.ctd = ctd(seq.chords, vocab);
  r.ctnctr = ctnctr(seq.melody, seq.chords, vocab);
  r.pcs = pcs(seq.melody, seq.chords, vocab);
  r.mctd = mctd(seq.melody, seq.chords, vocab);
  return r;
}

CorpusReport aggregate(const std::vector<MetricsReport>& reports) {
  if (reports.empty()) throw std::invalid_argument("cannot aggregate an empty report list");
  CorpusReport out;
  out.pieces = reports.size();
  auto summarize = [&](auto field) {
    double mean = 0.0;
    for (const auto& r : reports) mean += static_cast<double>(field(r));
    mean /= static_cast<double>(reports.size());
    double var = 0.0;
    for (const auto& r : reports) var += std::pow(static_cast<double>(field(r)) - mean, 2);
    const double sd = reports.size() > 1 ? std::sqrt(var / static_cast<double>(reports.size() - 1)) : 0.0;
    return MetricSummary{mean, sd};
  };
  out.che = summarize([](const MetricsReport& r) { return r.che; });
  out.cc = summarize([](const MetricsReport& r) { return r.cc; });
  out.ctd = summarize([](const MetricsReport& r) { return r.ctd; });
  out.ctnctr = summarize([](const MetricsReport& r) { return r.ctnctr; });
  out.pcs = summarize([](const MetricsReport& r) { return r.pcs; });
  out.mctd = summarize([](const MetricsReport& r) { return r.mctd; });
  return out;
}

nlohmann::json to_json(const MetricsReport& r) {
  return {{"piece_id", r.piece_id}, {"che", r.che},       {"cc", r.cc},
          {"ctd", r.ctd},           {"ctnctr", r.ctnctr}, {"pcs", r.pcs},
          {"mctd", r.mctd}};
}

nlohmann::json to_json(const CorpusReport& r) {
  auto s = [](const MetricSummary& m) { return nlohmann::json{{"mean", m.mean}, {"std", m.stddev}}; };
  return {{"pieces", r.pieces}, {"che", s(r.che)},       {"cc", s(r.cc)},   {"ctd", s(r.ctd)},
          {"ctnctr", s(r.ctnctr)}, {"pcs", s(r.pcs)}, {"mctd", s(r.mctd)}};
}

}  // namespace surprisenet
