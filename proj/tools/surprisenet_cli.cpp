// Command-line front end: prepare, train, harmonize, evaluate, serve.
//
// Exit codes: 0 success, 2 usage or input error, 3 numerical failure.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "surprisenet/checkpoint.hpp"
#include "surprisenet/corpus.hpp"
#include "surprisenet/cvae.hpp"
#include "surprisenet/eval.hpp"
#include "surprisenet/harmonizer.hpp"
#include "surprisenet/metrics.hpp"
#include "surprisenet/pipeline.hpp"
#include "surprisenet/service.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace surprisenet;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNumeric = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class Manifest {
 public:
  explicit Manifest(std::string command) : command_(std::move(command)), start_(std::chrono::steady_clock::now()) {}

  void input(const std::string& path) {
    if (fs::is_regular_file(path)) inputs_[path] = content_hash(read_file(path));
  }
  void input_dir(const std::string& dir) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
      if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) input(f.string());
  }
  void output(const std::string& path) { outputs_.push_back(path); }
  json& config() { return config_; }
  void seed(std::uint64_t s) { seed_ = s; }

  void write(const std::string& dir) const {
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    json j{{"command", command_}, {"config", config_},   {"seed", seed_},
           {"inputs", inputs_},   {"outputs", outputs_}, {"wall_time_s", wall}};
    write_file(dir + "/manifest.json", j.dump(2) + "\n");
  }

 private:
  std::string command_;
  std::chrono::steady_clock::time_point start_;
  std::map<std::string, std::string> inputs_;
  std::vector<std::string> outputs_;
  json config_ = json::object();
  std::uint64_t seed_ = 0;
};

// ---- prepare -------------------------------------------------------------

struct PrepareArgs {
  std::string corpus_dir;
  std::string out_dir = "prepared";
  std::string vocab = "corpus";
  bool no_key_normalize = false;
  double test_fraction = 0.1;
  double alpha = 0.01;
  std::uint64_t seed = 1;
};

int cmd_prepare(const PrepareArgs& a) {
  if (!fs::is_directory(a.corpus_dir)) throw UsageError("corpus directory not found: " + a.corpus_dir);
  const auto load = load_corpus_dir(a.corpus_dir);
  if (!load.errors.empty()) {
    for (const auto& e : load.errors) std::cerr << "error: " << e << '\n';
    return kExitInput;
  }
  PrepareOptions opts;
  opts.vocab_mode = a.vocab == "96" ? VocabMode::kVocab96 : VocabMode::kCorpus;
  opts.key_normalize = !a.no_key_normalize;
  opts.test_fraction = a.test_fraction;
  opts.alpha = a.alpha;
  opts.seed = a.seed;
  const auto corpus = prepare_corpus(load.sheets, opts);
  write_prepared(corpus, a.out_dir);

  Manifest m("prepare");
  m.seed(a.seed);
  m.config() = {{"vocab", a.vocab},           {"key_normalize", opts.key_normalize},
                {"test_fraction", a.test_fraction}, {"alpha", a.alpha}};
  for (const auto& f : load.files) m.input(f);
  for (const char* f : {"vocabulary.json", "transitions.json", "splits/train.txt", "splits/test.txt", "frames/"}) {
    m.output(a.out_dir + "/" + f);
  }
  m.write(a.out_dir);
  std::printf("prepared %zu train / %zu test pieces, vocabulary %d symbols, max surprise %.4f nats\n",
              corpus.train.size(), corpus.test.size(), corpus.vocabulary.size(), corpus.max_training_surprise);
  return kExitOk;
}

// ---- train ---------------------------------------------------------------

struct TrainArgs {
  std::string prepared;
  std::string out_dir = "run";
  std::string config_file;
  std::string resume;
  bool quiet = false;
};

int cmd_train(const TrainArgs& a, CLI::App& sub, CvaeConfig flags) {
  if (!fs::is_directory(a.prepared)) throw UsageError("prepared directory not found: " + a.prepared);
  const auto corpus = read_prepared(a.prepared);

  CvaeConfig cfg;
  if (!a.config_file.empty()) cfg = config_from_json(json::parse(read_file(a.config_file)), cfg);
  // flags win over the config file
  auto given = [&sub](const char* name) { return sub.get_option(name)->count() > 0; };
  if (given("--enc-hidden")) cfg.enc_hidden = flags.enc_hidden;
  if (given("--prenet-hidden")) cfg.prenet_hidden = flags.prenet_hidden;
  if (given("--latent")) cfg.latent_dim = flags.latent_dim;
  if (given("--dropout")) cfg.dropout_rate = flags.dropout_rate;
  if (given("--batch-size")) cfg.batch_size = flags.batch_size;
  if (given("--patience")) cfg.early_stop_patience = flags.early_stop_patience;
  if (given("--epochs")) cfg.max_epochs = flags.max_epochs;
  if (given("--lr")) cfg.learning_rate = flags.learning_rate;
  if (given("--kl-anneal")) cfg.kl_anneal_epochs = flags.kl_anneal_epochs;
  if (given("--val-fraction")) cfg.val_fraction = flags.val_fraction;
  if (given("--class-weighting")) cfg.class_weighting = flags.class_weighting;
  if (given("--seed")) cfg.seed = flags.seed;
  cfg.vocab_size = corpus.vocabulary.size();

  Cvae model;
  TrainOptions opts;
  if (!a.resume.empty()) {
    auto ckpt = load_checkpoint(a.resume, &corpus.vocabulary);
    CvaeConfig resumed = ckpt.model.config();
    resumed.max_epochs = cfg.max_epochs;
    model = std::move(ckpt.model);
    opts.start_epoch = ckpt.epoch + 1;
    cfg = resumed;
  } else {
    model = Cvae(cfg);
  }
  if (!a.quiet) {
    opts.on_epoch = [](const EpochRecord& e) {
      std::printf("epoch %3d  beta %.2f  train %.4f + %.4f  val %.4f + %.4f\n", e.epoch, e.beta, e.train_recon,
                  e.train_kl, e.val_recon, e.val_kl);
      std::fflush(stdout);
    };
  }

  auto examples = make_examples(corpus.train, corpus.transitions);
  auto [train_set, val_set] = split_validation(std::move(examples), cfg.val_fraction, cfg.seed);
  if (val_set.empty()) val_set = train_set;

  TrainHistory history;
  try {
    history = train(model, train_set, val_set, opts);
  } catch (const DivergenceError& e) {
    std::cerr << "error: training diverged: " << e.what() << '\n';
    return kExitNumeric;
  }

  fs::create_directories(a.out_dir);
  const std::string ckpt_path = a.out_dir + "/checkpoint.snck";
  const int last_epoch = history.epochs.empty() ? opts.start_epoch - 1 : history.epochs.back().epoch;
  save_checkpoint(make_checkpoint(model, corpus, last_epoch), ckpt_path);
  write_file(a.out_dir + "/history.csv", history_csv(history));

  Manifest m("train");
  m.seed(cfg.seed);
  m.config() = to_json(cfg);
  m.config()["best_epoch"] = history.best_epoch;
  m.config()["early_stopped"] = history.early_stopped;
  m.input(a.prepared + "/vocabulary.json");
  m.input(a.prepared + "/transitions.json");
  if (!a.resume.empty()) m.input(a.resume);
  m.output(ckpt_path);
  m.output(a.out_dir + "/history.csv");
  m.write(a.out_dir);
  std::printf("trained %zu epochs (best %d), teacher-forced accuracy %.3f\n", history.epochs.size(),
              history.best_epoch, reconstruction_accuracy(model, train_set));
  return kExitOk;
}

// ---- harmonize -----------------------------------------------------------

struct HarmonizeArgs {
  std::string checkpoint;
  std::string melody;
  std::string contour_file;
  std::string preset;
  double amplitude = -1.0;
  int samples = 1;
  std::uint64_t seed = 0;
  std::string decode = "argmax";
  double temperature = 1.0;
  std::string out_dir = "harmonized";
};

int cmd_harmonize(const HarmonizeArgs& a) {
  if (a.contour_file.empty() == a.preset.empty()) throw UsageError("give exactly one of --contour or --preset");
  const auto ckpt = load_checkpoint(a.checkpoint);
  if (!ckpt.transitions) throw UsageError("checkpoint has no transition model");
  LeadSheet sheet = load_leadsheet(a.melody);
  sheet.chords.clear();
  const auto frames = align_frames(sheet, ckpt.vocabulary, {ckpt.key_normalized, false});

  HarmonizationRequest req;
  req.melody = frames.melody;
  req.num_samples = a.samples;
  req.seed = a.seed;
  req.decode_mode = a.decode == "sample" ? DecodeMode::kSample : DecodeMode::kArgmax;
  req.temperature = a.temperature;
  if (!a.preset.empty()) {
    const double m = a.amplitude >= 0.0 ? a.amplitude : ckpt.max_training_surprise;
    req.contour = preset_contour({parse_preset(a.preset), m}, frames.length());
  } else {
    req.contour = parse_contour(read_file(a.contour_file));
  }
  if (req.contour.size() != req.melody.size()) {
    std::cerr << "error: contour length " << req.contour.size() << " != melody frames " << req.melody.size() << '\n';
    return kExitInput;
  }

  const auto results = harmonize(ckpt.model, *ckpt.transitions, req);
  fs::create_directories(a.out_dir);
  Manifest m("harmonize");
  m.seed(a.seed);
  m.config() = {{"samples", a.samples}, {"decode", a.decode}, {"temperature", a.temperature},
                {"preset", a.preset.empty() ? json(nullptr) : json(a.preset)}};
  m.input(a.checkpoint);
  m.input(a.melody);
  if (!a.contour_file.empty()) m.input(a.contour_file);

  json summary{{"given_contour", req.contour}, {"samples", json::array()}};
  int constant = 0;
  double cc_sum = 0.0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    const std::string path = a.out_dir + "/sample_" + std::to_string(i) + ".json";
    write_file(path, serialize_leadsheet(to_leadsheet(sheet, r.chords, ckpt.vocabulary, ckpt.key_normalized)) + "\n");
    m.output(path);
    FrameSequence seq;
    seq.melody = req.melody;
    seq.chords = r.chords;
    seq.source_id = "sample_" + std::to_string(i);
    json s{{"file", path}, {"chords", r.chords}, {"realized_contour", r.realized}};
    try {
      s["metrics"] = to_json(report(seq, ckpt.vocabulary));
    } catch (const std::invalid_argument&) {
      s["metrics"] = nullptr;
    }
    try {
      s["adherence"] = to_json(spearman(req.contour, r.realized));
    } catch (const std::invalid_argument&) {
      s["adherence"] = nullptr;
    }
    s["cc"] = cc(r.chords);
    s["chord_change_rate"] = chord_change_rate(r.chords);
    constant += cc(r.chords) == 1;
    cc_sum += cc(r.chords);
    summary["samples"].push_back(std::move(s));
  }
  summary["constant_fraction"] = static_cast<double>(constant) / static_cast<double>(results.size());
  summary["mean_cc"] = cc_sum / static_cast<double>(results.size());
  write_file(a.out_dir + "/report.json", summary.dump(2) + "\n");
  m.output(a.out_dir + "/report.json");
  m.write(a.out_dir);
  std::printf("wrote %zu samples to %s (mean CC %.2f, constant %.0f%%)\n", results.size(), a.out_dir.c_str(),
              summary["mean_cc"].get<double>(), 100.0 * summary["constant_fraction"].get<double>());
  return kExitOk;
}

// ---- evaluate ------------------------------------------------------------

struct EvaluateArgs {
  std::string checkpoint;
  std::string prepared;
  std::vector<std::string> presets;
  int trials = 100;
  std::uint64_t seed = 1;
  std::string out_dir = "evaluation";
};

int cmd_evaluate(const EvaluateArgs& a) {
  if (!fs::is_directory(a.prepared)) throw UsageError("prepared directory not found: " + a.prepared);
  const auto corpus = read_prepared(a.prepared);
  if (corpus.test.empty()) throw UsageError("test split is empty");
  const auto ckpt = load_checkpoint(a.checkpoint, &corpus.vocabulary);

  std::vector<MetricsReport> human;
  std::vector<MetricsReport> generated;
  for (const auto& seq : corpus.test) {
    human.push_back(report(seq, corpus.vocabulary));
    HarmonizationRequest req;
    req.melody = seq.melody;
    req.contour = surprise_contour(*ckpt.transitions, seq.chords);
    req.seed = a.seed;
    FrameSequence gen = seq;
    gen.chords = harmonize(ckpt.model, *ckpt.transitions, req).front().chords;
    try {
      generated.push_back(report(gen, corpus.vocabulary));
    } catch (const std::invalid_argument& e) {
      std::cerr << "warning: skipping metrics for " << seq.source_id << ": " << e.what() << '\n';
    }
  }

  std::vector<PresetKind> kinds;
  for (const auto& p : a.presets) kinds.push_back(parse_preset(p));
  if (kinds.empty()) kinds.assign(std::begin(kAllPresets), std::end(kAllPresets));
  const auto trials = run_preset_trials(ckpt, corpus.test, kinds, a.trials, a.seed);
  std::vector<SurpriseContour> given;
  std::vector<SurpriseContour> realized;
  std::vector<std::string> labels;
  for (const auto& t : trials) {
    given.push_back(t.given);
    realized.push_back(t.result.realized);
    labels.emplace_back(preset_name(t.preset));
  }
  const auto adherence = contour_adherence(given, realized);

  json out;
  out["objective"] = {{"humans", to_json(aggregate(human))}};
  if (!generated.empty()) out["objective"]["model"] = to_json(aggregate(generated));
  out["adherence"] = to_json(adherence, labels);
  fs::create_directories(a.out_dir);
  write_file(a.out_dir + "/evaluation.json", out.dump(2) + "\n");

  Manifest m("evaluate");
  m.seed(a.seed);
  m.config() = {{"trials", a.trials}, {"presets", a.presets}};
  m.input(a.checkpoint);
  m.input(a.prepared + "/splits/test.txt");
  m.output(a.out_dir + "/evaluation.json");
  m.write(a.out_dir);
  std::printf("pooled Spearman rho %.3f (p = %.3g, n = %zu)\n", adherence.pooled.rho, adherence.pooled.p_value,
              adherence.pooled.n);
  return kExitOk;
}

// ---- serve ---------------------------------------------------------------

int cmd_serve(std::string addr, std::string checkpoint) {
  if (addr.empty()) {
    const char* env = std::getenv("SURPRISENET_ADDR");
    addr = env ? env : "127.0.0.1:8080";
  }
  if (checkpoint.empty()) {
    const char* env = std::getenv("SURPRISENET_CKPT");
    if (env) checkpoint = env;
  }
  const auto colon = addr.rfind(':');
  if (colon == std::string::npos) throw UsageError("address must be host:port");
  const std::string host = addr.substr(0, colon);
  const int port = std::stoi(addr.substr(colon + 1));

  HarmonizerService service;
  if (!checkpoint.empty()) std::printf("loaded model %s\n", service.load(checkpoint).c_str());
  std::printf("listening on %s:%d\n", host.c_str(), port);
  std::fflush(stdout);
  if (!service.listen(host, port)) {
    std::cerr << "error: cannot listen on " << addr << '\n';
    return kExitInput;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Surprise-contour controlled melody harmonization"};
  app.require_subcommand(1);

  PrepareArgs prep;
  auto* p = app.add_subcommand("prepare", "Frame a lead-sheet corpus and fit chord transitions");
  p->add_option("corpus_dir,--corpus-dir", prep.corpus_dir, "Directory of lead-sheet JSON files")->required();
  p->add_option("--out-dir", prep.out_dir);
  p->add_option("--vocab", prep.vocab, "Chord vocabulary: 96 or corpus")->check(CLI::IsMember({"96", "corpus"}));
  p->add_flag("--no-key-normalize", prep.no_key_normalize, "Keep sheets in their original keys");
  p->add_option("--test-fraction", prep.test_fraction)->check(CLI::Range(0.0, 0.9));
  p->add_option("--alpha", prep.alpha, "Additive smoothing for transitions")->check(CLI::NonNegativeNumber);
  p->add_option("--seed", prep.seed);

  TrainArgs tr;
  CvaeConfig flags;
  auto* t = app.add_subcommand("train", "Train the conditional VAE");
  t->add_option("prepared,--prepared", tr.prepared, "Output directory of `prepare`")->required();
  t->add_option("--out-dir", tr.out_dir);
  t->add_option("--config", tr.config_file, "JSON model/training configuration");
  t->add_option("--resume", tr.resume, "Continue from a checkpoint");
  t->add_option("--enc-hidden", flags.enc_hidden);
  t->add_option("--prenet-hidden", flags.prenet_hidden);
  t->add_option("--latent", flags.latent_dim);
  t->add_option("--dropout", flags.dropout_rate);
  t->add_option("--batch-size", flags.batch_size);
  t->add_option("--patience", flags.early_stop_patience);
  t->add_option("--epochs", flags.max_epochs);
  t->add_option("--lr", flags.learning_rate);
  t->add_option("--kl-anneal", flags.kl_anneal_epochs);
  t->add_option("--val-fraction", flags.val_fraction);
  t->add_flag("--class-weighting", flags.class_weighting);
  t->add_option("--seed", flags.seed);
  t->add_flag("--quiet", tr.quiet);

  HarmonizeArgs hz;
  auto* h = app.add_subcommand("harmonize", "Generate chords for a melody and surprise contour");
  h->add_option("--checkpoint", hz.checkpoint)->required();
  h->add_option("--melody", hz.melody, "Lead-sheet file supplying the melody")->required();
  h->add_option("--contour", hz.contour_file, "Contour file: JSON array, one value per line, or comma separated");
  h->add_option("--preset", hz.preset, "sigmoid, sigmoid_reversed, zero, max, normal, normal_reversed");
  h->add_option("--amplitude", hz.amplitude, "Preset amplitude (default: max training surprise)");
  h->add_option("--samples", hz.samples)->check(CLI::PositiveNumber);
  h->add_option("--seed", hz.seed);
  h->add_option("--decode", hz.decode)->check(CLI::IsMember({"argmax", "sample"}));
  h->add_option("--temperature", hz.temperature)->check(CLI::PositiveNumber);
  h->add_option("--out-dir", hz.out_dir);

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "Objective metrics and contour adherence on the test split");
  e->add_option("--checkpoint", ev.checkpoint)->required();
  e->add_option("--prepared", ev.prepared)->required();
  e->add_option("--presets", ev.presets);
  e->add_option("--trials", ev.trials)->check(CLI::PositiveNumber);
  e->add_option("--seed", ev.seed);
  e->add_option("--out-dir", ev.out_dir);

  std::string serve_addr;
  std::string serve_ckpt;
  auto* s = app.add_subcommand("serve", "HTTP service for interactive harmonization");
  s->add_option("--addr", serve_addr, "host:port (env SURPRISENET_ADDR)");
  s->add_option("--checkpoint", serve_ckpt, "Checkpoint to load at start (env SURPRISENET_CKPT)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*p) return cmd_prepare(prep);
    if (*t) return cmd_train(tr, *t, flags);
    if (*h) return cmd_harmonize(hz);
    if (*e) return cmd_evaluate(ev);
    if (*s) return cmd_serve(serve_addr, serve_ckpt);
  } catch (const DivergenceError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitInput;
  }
  return kExitInput;
}
