#include "surprisenet/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace surprisenet {
namespace {

namespace fs = std::filesystem;

std::string file_stem(const std::string& id) {
  std::string s = id;
  for (char& c : s) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_' && c != '.') c = '_';
  }
  return s;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::istringstream in(read_file(path));
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

}  // namespace

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& contents) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << contents;
}

PreparedCorpus prepare_corpus(const std::vector<LeadSheet>& sheets, const PrepareOptions& options) {
  if (sheets.size() < 2) throw std::invalid_argument("need at least two lead sheets to split");
  std::set<std::string> titles;
  for (const auto& s : sheets) {
    if (!titles.insert(s.title).second) throw std::invalid_argument("duplicate lead-sheet title '" + s.title + "'");
  }

  PreparedCorpus out;
  out.key_normalized = options.key_normalize;
  const AlignOptions align{options.key_normalize, false};
  // Vocabulary symbols are enumerated in the key the frames will use.
  std::vector<LeadSheet> framed;
  for (const auto& s : sheets) framed.push_back(options.key_normalize ? transpose(s, normalization_shift(s.key)) : s);
  out.vocabulary = build_vocabulary(framed, options.vocab_mode);

  std::vector<std::size_t> order(sheets.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(options.seed);
  std::shuffle(order.begin(), order.end(), rng);
  auto n_test = static_cast<std::size_t>(std::llround(options.test_fraction * static_cast<double>(sheets.size())));
  n_test = std::clamp<std::size_t>(n_test, 1, sheets.size() - 1);

  for (std::size_t i = 0; i < order.size(); ++i) {
    const LeadSheet& sheet = sheets[order[i]];
    auto seq = align_frames(sheet, out.vocabulary, align);
    if (i < n_test) {
      out.test.push_back(std::move(seq));
      out.test_sheets.push_back(sheet);
    } else {
      out.train.push_back(std::move(seq));
    }
  }

  std::vector<ChordSeq> train_chords;
  for (const auto& s : out.train) train_chords.push_back(s.chords);
  out.transitions = fit_transitions(train_chords, out.vocabulary.size(), options.alpha);
  out.max_training_surprise = max_training_surprise(out.transitions, train_chords);
  return out;
}

void write_prepared(const PreparedCorpus& corpus, const std::string& dir) {
  fs::create_directories(dir);
  write_file(dir + "/vocabulary.json", corpus.vocabulary.to_json().dump(2));
  auto tj = corpus.transitions.to_json();
  tj["max_training_surprise"] = corpus.max_training_surprise;
  tj["key_normalized"] = corpus.key_normalized;
  write_file(dir + "/transitions.json", tj.dump());
  std::string train_ids;
  std::string test_ids;
  for (const auto& s : corpus.train) {
    train_ids += s.source_id + "\n";
    write_file(dir + "/frames/" + file_stem(s.source_id) + ".csv", export_frames(s));
  }
  for (std::size_t i = 0; i < corpus.test.size(); ++i) {
    const auto& s = corpus.test[i];
    test_ids += s.source_id + "\n";
    write_file(dir + "/frames/" + file_stem(s.source_id) + ".csv", export_frames(s));
    write_file(dir + "/test_sheets/" + file_stem(s.source_id) + ".json", serialize_leadsheet(corpus.test_sheets[i]));
  }
  write_file(dir + "/splits/train.txt", train_ids);
  write_file(dir + "/splits/test.txt", test_ids);
}

PreparedCorpus read_prepared(const std::string& dir) {
  if (!fs::is_directory(dir)) throw std::invalid_argument("prepared directory not found: " + dir);
  PreparedCorpus out;
  out.vocabulary = ChordVocabulary::from_json(nlohmann::json::parse(read_file(dir + "/vocabulary.json")));
  const auto tj = nlohmann::json::parse(read_file(dir + "/transitions.json"));
  out.transitions = TransitionModel::from_json(tj);
  out.max_training_surprise = tj.value("max_training_surprise", 0.0);
  out.key_normalized = tj.value("key_normalized", true);
  auto load = [&](const std::string& id) {
    auto seq = import_frames(read_file(dir + "/frames/" + file_stem(id) + ".csv"), id);
    for (int c : seq.chords) {
      if (c < 0 || c >= out.vocabulary.size()) throw std::out_of_range("frame file " + id + " has an unknown chord");
    }
    return seq;
  };
  for (const auto& id : read_lines(dir + "/splits/train.txt")) out.train.push_back(load(id));
  for (const auto& id : read_lines(dir + "/splits/test.txt")) {
    out.test.push_back(load(id));
    out.test_sheets.push_back(load_leadsheet(dir + "/test_sheets/" + file_stem(id) + ".json"));
  }
  return out;
}

std::vector<Example> make_examples(const std::vector<FrameSequence>& seqs, const TransitionModel& transitions) {
  std::vector<Example> out;
  out.reserve(seqs.size());
  for (const auto& s : seqs) out.push_back(make_example(s, transitions));
  return out;
}

Checkpoint make_checkpoint(const Cvae& model, const PreparedCorpus& corpus, int epoch) {
  Checkpoint c;
  c.model = model;
  c.vocabulary = corpus.vocabulary;
  c.transitions = corpus.transitions;
  c.max_training_surprise = corpus.max_training_surprise;
  c.key_normalized = corpus.key_normalized;
  c.epoch = epoch;
  return c;
}

std::vector<PresetTrial> run_preset_trials(const Checkpoint& ckpt, const std::vector<FrameSequence>& pieces,
                                           const std::vector<PresetKind>& presets, int count, std::uint64_t seed) {
  if (pieces.empty() || presets.empty()) throw std::invalid_argument("preset trials need pieces and presets");
  if (!ckpt.transitions) throw std::invalid_argument("checkpoint carries no transition model");
  std::mt19937_64 rng(seed);
  std::vector<PresetTrial> out;
  for (int i = 0; i < count; ++i) {
    const auto& piece = pieces[std::uniform_int_distribution<std::size_t>(0, pieces.size() - 1)(rng)];
    const PresetKind kind = presets[std::uniform_int_distribution<std::size_t>(0, presets.size() - 1)(rng)];
    HarmonizationRequest req;
    req.melody = piece.melody;
    req.contour = preset_contour({kind, ckpt.max_training_surprise}, piece.length());
    req.seed = rng();
    auto result = harmonize(ckpt.model, *ckpt.transitions, req);
    out.push_back({piece.source_id, kind, req.contour, std::move(result.front())});
  }
  return out;
}

double chord_change_rate(const std::vector<int>& chords) {
  if (chords.size() < 2) return 0.0;
  int changes = 0;
  for (std::size_t t = 1; t < chords.size(); ++t) changes += chords[t] != chords[t - 1];
  return static_cast<double>(changes) / static_cast<double>(chords.size() - 1);
}

}  // namespace surprisenet
