#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "surprisenet/checkpoint.hpp"
#include "surprisenet/eval.hpp"
#include "surprisenet/harmonizer.hpp"
#include "surprisenet/leadsheet.hpp"
#include "surprisenet/metrics.hpp"
#include "surprisenet/surprise.hpp"

namespace surprisenet {

struct PrepareOptions {
  VocabMode vocab_mode = VocabMode::kCorpus;
  bool key_normalize = true;
  double test_fraction = 0.1;
  double alpha = 0.01;
  std::uint64_t seed = 1;
};

/// Frames, vocabulary and transition statistics for a corpus. The
/// transition model is fitted on the training split only.
struct PreparedCorpus {
  ChordVocabulary vocabulary;
  TransitionModel transitions{1, 1.0, {0}, {0}};
  double max_training_surprise = 0.0;
  bool key_normalized = true;
  std::vector<FrameSequence> train;
  std::vector<FrameSequence> test;
  std::vector<LeadSheet> test_sheets;
};

PreparedCorpus prepare_corpus(const std::vector<LeadSheet>& sheets, const PrepareOptions& options);

/// Layout: vocabulary.json, transitions.json, splits/{train,test}.txt,
/// frames/<id>.csv, test_sheets/<id>.json.
void write_prepared(const PreparedCorpus& corpus, const std::string& dir);
PreparedCorpus read_prepared(const std::string& dir);

std::vector<Example> make_examples(const std::vector<FrameSequence>& seqs, const TransitionModel& transitions);

/// Checkpoint bundling a trained model with the corpus statistics.
Checkpoint make_checkpoint(const Cvae& model, const PreparedCorpus& corpus, int epoch);

struct PresetTrial {
  std::string piece_id;
  PresetKind preset;
  SurpriseContour given;
  Harmonization result;
};

/// Harmonises `count` (piece, preset) pairs drawn with a seeded generator.
std::vector<PresetTrial> run_preset_trials(const Checkpoint& ckpt, const std::vector<FrameSequence>& pieces,
                                           const std::vector<PresetKind>& presets, int count, std::uint64_t seed);

/// Fraction of frames (after the first) whose chord differs from the previous frame.
double chord_change_rate(const std::vector<int>& chords);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

}  // namespace surprisenet
