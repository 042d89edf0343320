#include <gtest/gtest.h>

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "helpers.hpp"
#include "oracles.hpp"
#include "surprisenet/checkpoint.hpp"
#include "surprisenet/corpus.hpp"
#include "surprisenet/cvae.hpp"
#include "surprisenet/pipeline.hpp"

using namespace surprisenet;

namespace {

CvaeConfig tiny(int vocab = 5) {
  CvaeConfig c;
  c.vocab_size = vocab;
  c.prenet_hidden = 4;
  c.enc_hidden = 6;
  c.latent_dim = 3;
  c.dropout_rate = 0.0;
  c.batch_size = 4;
  c.seed = 3;
  return c;
}

Example random_example(std::mt19937_64& rng, int frames, int vocab, std::string id = "ex") {
  Example ex;
  ex.id = std::move(id);
  for (int t = 0; t < frames; ++t) {
    ex.melody.push_back(oracle::random_frame(rng));
    ex.chords.push_back(static_cast<int>(rng() % static_cast<unsigned>(vocab)));
    ex.contour.push_back(std::uniform_real_distribution<double>(0.0, 3.0)(rng));
  }
  return ex;
}

nn::Tensor<float> run_prenet(const Cvae& net, const SurpriseContour& c) {
  nn::Tape<float> tape;
  return tape.value(net.prenet_forward(tape, tape.constant(contour_matrix<float>(c))));
}

const PreparedCorpus& mini_corpus() {
  static const PreparedCorpus corpus = [] {
    SynthOptions o;
    o.pieces = 60;
    o.seed = 5;
    return prepare_corpus(synthesize_corpus(o), PrepareOptions{});
  }();
  return corpus;
}

}  // namespace

TEST(Prenet, DefaultEmbeddingIs256Wide) {
  CvaeConfig c;
  c.vocab_size = 10;
  const Cvae net(c);
  const auto e = run_prenet(net, {0.0, 1.0, 2.0});
  EXPECT_EQ(e.rows(), 3);
  EXPECT_EQ(e.cols(), 256);
}

TEST(Prenet, ZeroContourDependsOnlyOnParameters) {
  const Cvae a(tiny());
  const Cvae b(tiny());
  EXPECT_EQ(run_prenet(a, SurpriseContour(6, 0.0)), run_prenet(b, SurpriseContour(6, 0.0)));
  // Every frame of a constant contour gets the same embedding.
  const auto e = run_prenet(a, SurpriseContour(6, 0.0));
  for (int t = 1; t < e.rows(); ++t) {
    for (int k = 0; k < e.cols(); ++k) EXPECT_EQ(e(t, k), e(0, k));
  }
}

TEST(Prenet, PerturbationChangesEmbeddingAtFrame) {
  const Cvae net(tiny());
  SurpriseContour c(9, 1.0);
  const auto base = run_prenet(net, c);
  c[4] = 3.0;
  const auto moved = run_prenet(net, c);
  double diff_at = 0.0;
  for (int k = 0; k < base.cols(); ++k) diff_at += std::abs(base(4, k) - moved(4, k));
  EXPECT_GT(diff_at, 1e-4);
}

TEST(Encode, ShapesDeterminismAndOrderSensitivity) {
  const auto cfg = tiny();
  const Cvae net(cfg);
  std::mt19937_64 rng(1);
  const auto ex = random_example(rng, 6, cfg.vocab_size);
  auto [mu, lv] = net.posterior(ex);
  EXPECT_EQ(mu.rows(), 6);
  EXPECT_EQ(mu.cols(), cfg.latent_dim);
  EXPECT_EQ(lv.rows(), 6);
  EXPECT_EQ(lv.cols(), cfg.latent_dim);
  EXPECT_EQ(net.posterior(ex).first, mu);

  Example perm = ex;
  std::reverse(perm.chords.begin(), perm.chords.end());
  std::reverse(perm.melody.begin(), perm.melody.end());
  std::reverse(perm.contour.begin(), perm.contour.end());
  auto [pmu, plv] = net.posterior(perm);
  // Reversed inputs must not just give reversed outputs.
  double diff = 0.0;
  for (int t = 0; t < 6; ++t) {
    for (int k = 0; k < cfg.latent_dim; ++k) diff += std::abs(mu(t, k) - pmu(5 - t, k));
  }
  EXPECT_GT(diff, 1e-5);

  nn::Tape<float> tape;
  auto emb = net.prenet_forward(tape, tape.constant(contour_matrix<float>(ex.contour)));
  EXPECT_THROW(net.encode(tape, tape.constant(one_hot_matrix<float>(ex.chords, cfg.vocab_size)),
                          tape.constant(melody_matrix<float>({ex.melody.begin(), ex.melody.end() - 1})), emb),
               nn::ShapeError);
}

TEST(Reparameterize, DegenerateAndStandardCases) {
  std::mt19937_64 rng(2);
  auto mu = nn::Tensor<float>::matrix(2, 3);
  for (std::size_t i = 0; i < mu.size(); ++i) mu[i] = static_cast<float>(i) - 2.5f;
  auto lv = nn::Tensor<float>::matrix(2, 3);
  for (std::size_t i = 0; i < lv.size(); ++i) lv[i] = -1e4f;
  const auto s = reparameterize(mu, lv, rng);
  EXPECT_EQ(s.z, mu);

  const auto zero = nn::Tensor<float>::matrix(2, 3);
  const auto u = reparameterize(zero, zero, rng);
  EXPECT_EQ(u.z, u.epsilon);
}

TEST(Reparameterize, MonteCarloMean) {
  std::mt19937_64 rng(3);
  auto mu = nn::Tensor<double>::matrix(1, 1);
  mu[0] = 0.7;
  auto lv = nn::Tensor<double>::matrix(1, 1);
  lv[0] = std::log(4.0);  // sigma = 2
  const int n = 100000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += reparameterize(mu, lv, rng).z[0];
  EXPECT_NEAR(sum / n, 0.7, 3.0 * 2.0 / std::sqrt(n));
}

TEST(Decode, RowsAreDistributionsOfInputLength) {
  const auto cfg = tiny();
  const Cvae net(cfg);
  std::mt19937_64 rng(4);
  const auto ex = random_example(rng, 7, cfg.vocab_size);
  const auto logits = net.generate_logits(ex.melody, ex.contour, nn::Tensor<float>::matrix(7, cfg.latent_dim));
  ASSERT_EQ(logits.rows(), 7);
  ASSERT_EQ(logits.cols(), cfg.vocab_size);
  for (int t = 0; t < 7; ++t) {
    double mx = -1e30;
    for (int c = 0; c < cfg.vocab_size; ++c) mx = std::max(mx, static_cast<double>(logits(t, c)));
    double s = 0.0;
    for (int c = 0; c < cfg.vocab_size; ++c) s += std::exp(logits(t, c) - mx);
    double total = 0.0;
    for (int c = 0; c < cfg.vocab_size; ++c) total += std::exp(logits(t, c) - mx) / s;
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
  EXPECT_THROW(net.generate_logits(ex.melody, {1.0}, nn::Tensor<float>::matrix(7, cfg.latent_dim)), nn::ShapeError);
}

TEST(Decode, MelodyConditionIsWiredIn) {
  auto cfg = tiny();
  cfg.max_epochs = 15;
  cfg.kl_anneal_epochs = 5;
  cfg.early_stop_patience = 15;
  std::mt19937_64 rng(5);
  std::vector<Example> data;
  for (int i = 0; i < 6; ++i) data.push_back(random_example(rng, 8, cfg.vocab_size, "p" + std::to_string(i)));
  Cvae net(cfg);
  train(net, data, data);
  const auto z = nn::Tensor<float>::matrix(8, cfg.latent_dim);
  const auto with = net.generate_logits(data[0].melody, data[0].contour, z);
  const auto without = net.generate_logits(std::vector<MelodyFrame>(8, testutil::frame({})), data[0].contour, z);
  EXPECT_NE(with, without);
}

TEST(Loss, StandardNormalPosteriorHasZeroKl) {
  nn::Tape<float> tape;
  const auto z = nn::Tensor<float>::matrix(3, 4);
  EXPECT_EQ(tape.value(tape.gaussian_kl(tape.constant(z), tape.constant(z), 1.0f))[0], 0.0f);
}

TEST(Loss, UniformLogitsGiveLnV) {
  const auto cfg = tiny(7);
  Cvae net(cfg);
  for (int p = 0; p < net.params().size(); ++p) {
    if (net.params()[p].name.starts_with("decoder.out")) {
      for (std::size_t i = 0; i < net.params()[p].value.size(); ++i) net.params()[p].value[i] = 0.0f;
    }
  }
  std::mt19937_64 rng(6);
  const auto ex = random_example(rng, 5, cfg.vocab_size);
  const std::vector<const Example*> batch = {&ex};
  const auto eps = draw_noise<float>(batch, cfg.latent_dim, rng);
  EXPECT_NEAR(batch_loss<float>(net, batch, eps, 1.0, nullptr, nullptr).reconstruction, std::log(7.0), 1e-6);
}

TEST(Loss, HandComputedTwoFrameThreeChordBatch) {
  // Direct arithmetic on the loss ops.
  nn::Tape<double> tape;
  auto logits = nn::Tensor<double>::matrix(2, 3);
  const double L[2][3] = {{1.0, 2.0, 0.5}, {0.0, -1.0, 3.0}};
  for (int t = 0; t < 2; ++t) {
    for (int c = 0; c < 3; ++c) logits(t, c) = L[t][c];
  }
  const std::vector<double> w = {2.0, 1.0, 0.5};
  const auto ce = tape.value(tape.softmax_cross_entropy(tape.constant(logits), {1, 0}, &w, 0.5))[0];
  const double lse0 = std::log(std::exp(1.0) + std::exp(2.0) + std::exp(0.5));
  const double lse1 = std::log(std::exp(0.0) + std::exp(-1.0) + std::exp(3.0));
  EXPECT_NEAR(ce, 0.5 * (1.0 * (lse0 - 2.0) + 2.0 * (lse1 - 0.0)), 1e-12);

  auto mu = nn::Tensor<double>::matrix(2, 1);
  auto lv = nn::Tensor<double>::matrix(2, 1);
  mu[0] = 0.5;
  mu[1] = -1.0;
  lv[0] = 0.2;
  lv[1] = -0.3;
  const auto kl = tape.value(tape.gaussian_kl(tape.constant(mu), tape.constant(lv), 0.5))[0];
  const double want = 0.5 * (0.5 * (std::exp(0.2) + 0.25 - 1.0 - 0.2) + 0.5 * (std::exp(-0.3) + 1.0 - 1.0 + 0.3));
  EXPECT_NEAR(kl, want, 1e-12);
}

TEST(Loss, BatchLossComposesPerFrameTerms) {
  const auto cfg = tiny(3);
  const auto net = Cvae(cfg).cast<double>();
  std::mt19937_64 rng(7);
  Example ex = random_example(rng, 2, 3);
  const std::vector<const Example*> batch = {&ex};
  const auto eps = draw_noise<double>(batch, cfg.latent_dim, rng);
  const auto loss = batch_loss<double>(net, batch, eps, 0.5, nullptr, nullptr);

  auto [mu, lv] = net.posterior(ex);
  auto z = mu;
  double kl = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    z[i] = mu[i] + std::exp(lv[i] / 2.0) * eps[0][i];
    kl += 0.5 * (std::exp(lv[i]) + mu[i] * mu[i] - 1.0 - lv[i]);
  }
  const auto logits = net.generate_logits(ex.melody, ex.contour, z);
  double ce = 0.0;
  for (int t = 0; t < 2; ++t) {
    double s = 0.0;
    for (int c = 0; c < 3; ++c) s += std::exp(logits(t, c));
    ce += std::log(s) - logits(t, ex.chords[static_cast<std::size_t>(t)]);
  }
  EXPECT_NEAR(loss.reconstruction, ce / 2.0, 1e-12);
  EXPECT_NEAR(loss.kl, kl / 2.0, 1e-12);
  EXPECT_NEAR(loss.total(), ce / 2.0 + 0.5 * kl / 2.0, 1e-12);
}

TEST(ClassWeights, Examples) {
  for (double w : class_weights({5, 5, 5})) EXPECT_DOUBLE_EQ(w, 1.0);
  const auto w = class_weights({100, 1});
  EXPECT_NEAR(w[1] / w[0], std::sqrt(101.0) / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR((w[0] + w[1]) / 2.0, 1.0, 1e-12);
  const auto z = class_weights({0, 4, 9});
  EXPECT_NEAR((z[1] + z[2]) / 2.0, 1.0, 1e-12);
  EXPECT_GT(z[0], z[1]);
}

TEST(Train, KlBetaRamp) {
  EXPECT_EQ(kl_beta(1, 20), 0.0);
  EXPECT_EQ(kl_beta(11, 20), 0.5);
  EXPECT_EQ(kl_beta(21, 20), 1.0);
  EXPECT_EQ(kl_beta(50, 20), 1.0);
  EXPECT_EQ(kl_beta(1, 0), 1.0);
}

TEST(Train, MovingAverageLossIsNonIncreasing) {
  const auto& corpus = mini_corpus();
  auto cfg = tiny(corpus.vocabulary.size());
  cfg.prenet_hidden = 8;
  cfg.enc_hidden = 24;
  cfg.latent_dim = 8;
  cfg.batch_size = 16;
  cfg.dropout_rate = 0.2;
  cfg.max_epochs = 30;
  cfg.early_stop_patience = 30;
  auto [tr, val] = split_validation(make_examples(corpus.train, corpus.transitions), 0.1, 1);
  Cvae net(cfg);
  const auto h = train(net, tr, val);
  ASSERT_EQ(h.epochs.size(), 30u);
  std::vector<double> loss;
  for (const auto& e : h.epochs) loss.push_back(e.train_recon + e.beta * e.train_kl);
  for (std::size_t i = 5; i < loss.size(); ++i) {
    double prev = 0.0;
    double cur = 0.0;
    for (std::size_t k = 0; k < 5; ++k) {
      prev += loss[i - 5 + k];
      cur += loss[i - 4 + k];
    }
    EXPECT_LE(cur, prev) << "window ending at epoch " << i + 1;
  }
}

TEST(Train, ZeroBetaMemorizesBelowTenthOfLnV) {
  const auto& corpus = mini_corpus();
  const std::vector<FrameSequence> ten(corpus.train.begin(), corpus.train.begin() + 10);
  const auto examples = make_examples(ten, corpus.transitions);
  auto cfg = tiny(corpus.vocabulary.size());
  cfg.prenet_hidden = 8;
  cfg.enc_hidden = 48;
  cfg.latent_dim = 8;
  cfg.batch_size = 10;
  cfg.dropout_rate = 0.0;
  cfg.max_epochs = 300;
  cfg.early_stop_patience = 20;
  Cvae net(cfg);
  TrainOptions opts;
  opts.fixed_beta = 0.0;
  const auto h = train(net, examples, examples, opts);
  for (const auto& e : h.epochs) EXPECT_EQ(e.beta, 0.0);
  const double ln_v = std::log(static_cast<double>(corpus.vocabulary.size()));
  EXPECT_LT(evaluate_loss(net, examples, 0.0).reconstruction, ln_v / 10.0) << "after " << h.epochs.size() << " epochs";
  opts.fixed_beta = -1.0;
  EXPECT_THROW(train(net, examples, examples, opts), std::invalid_argument);
}

TEST(Train, IdenticalSeedsGiveIdenticalHistory) {
  auto cfg = tiny();
  cfg.max_epochs = 4;
  cfg.dropout_rate = 0.3;
  std::mt19937_64 rng(8);
  std::vector<Example> data;
  for (int i = 0; i < 5; ++i) data.push_back(random_example(rng, 6, cfg.vocab_size));
  Cvae a(cfg);
  Cvae b(cfg);
  const auto ha = history_csv(train(a, data, data));
  const auto hb = history_csv(train(b, data, data));
  EXPECT_EQ(ha, hb);
  EXPECT_EQ(encode_checkpoint({a, build_vocabulary({}, VocabMode::kVocab96), std::nullopt, 0.0, true, 4}),
            encode_checkpoint({b, build_vocabulary({}, VocabMode::kVocab96), std::nullopt, 0.0, true, 4}));
}

TEST(Train, NonFiniteLossAborts) {
  auto cfg = tiny();
  cfg.max_epochs = 2;
  std::mt19937_64 rng(9);
  std::vector<Example> data = {random_example(rng, 4, cfg.vocab_size)};
  data[0].contour[1] = std::nan("");
  Cvae net(cfg);
  EXPECT_THROW(train(net, data, data), DivergenceError);
}

TEST(Train, ResumeContinuesEpochNumbering) {
  auto cfg = tiny();
  cfg.max_epochs = 3;
  std::mt19937_64 rng(10);
  std::vector<Example> data = {random_example(rng, 4, cfg.vocab_size), random_example(rng, 5, cfg.vocab_size)};
  Cvae net(cfg);
  TrainOptions opts;
  opts.start_epoch = 8;
  const auto h = train(net, data, data, opts);
  ASSERT_EQ(h.epochs.size(), 3u);
  EXPECT_EQ(h.epochs.front().epoch, 8);
  EXPECT_EQ(h.epochs.back().epoch, 10);
}

TEST(SplitValidation, SizesAndDeterminism) {
  std::mt19937_64 rng(11);
  std::vector<Example> data;
  for (int i = 0; i < 40; ++i) data.push_back(random_example(rng, 2, 3, "e" + std::to_string(i)));
  auto [a, b] = split_validation(data, 0.05, 3);
  EXPECT_EQ(b.size(), 2u);
  EXPECT_EQ(a.size(), 38u);
  auto [c, d] = split_validation(data, 0.05, 3);
  EXPECT_EQ(b[0].id, d[0].id);
}

// ---- checkpoint ------------------------------------------------------------

namespace {

Checkpoint sample_checkpoint() {
  const auto vocab = build_vocabulary({}, VocabMode::kVocab96);
  auto cfg = tiny(vocab.size());
  Checkpoint c{Cvae(cfg), vocab, fit_transitions({{1, 2, 3}}, vocab.size(), 0.01), 4.5, true, 12};
  return c;
}

}  // namespace

TEST(Checkpoint, RoundTripIsBitExact) {
  const auto c = sample_checkpoint();
  const auto bytes = encode_checkpoint(c);
  const auto back = decode_checkpoint(bytes);
  ASSERT_EQ(back.model.params().size(), c.model.params().size());
  for (int p = 0; p < c.model.params().size(); ++p) {
    EXPECT_EQ(back.model.params()[p].name, c.model.params()[p].name);
    EXPECT_EQ(back.model.params()[p].value, c.model.params()[p].value);
  }
  EXPECT_EQ(back.epoch, 12);
  EXPECT_EQ(back.max_training_surprise, 4.5);
  EXPECT_EQ(back.vocabulary.fingerprint(), c.vocabulary.fingerprint());
  ASSERT_TRUE(back.transitions);
  EXPECT_EQ(back.transitions->prob(1, 2), c.transitions->prob(1, 2));
  EXPECT_EQ(encode_checkpoint(back), bytes);
  EXPECT_EQ(bytes.substr(0, 4), "SNCK");
}

TEST(Checkpoint, FileRoundTrip) {
  const auto c = sample_checkpoint();
  const auto path = (std::filesystem::temp_directory_path() / ("surprisenet-test-" + std::to_string(::getpid()) + ".snck")).string();
  save_checkpoint(c, path);
  EXPECT_EQ(encode_checkpoint(load_checkpoint(path)), encode_checkpoint(c));
  std::filesystem::remove(path);
  EXPECT_THROW(load_checkpoint(path), CheckpointError);
}

TEST(Checkpoint, TruncatedAndCorruptFilesFailCleanly) {
  const auto bytes = encode_checkpoint(sample_checkpoint());
  for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{9}, bytes.size() / 2, bytes.size() - 1}) {
    EXPECT_THROW(decode_checkpoint(bytes.substr(0, cut)), CheckpointError) << "cut at " << cut;
  }
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bad_magic), CheckpointError);
  auto bad_version = bytes;
  bad_version[4] = 9;
  EXPECT_THROW(decode_checkpoint(bad_version), CheckpointError);
}

TEST(Checkpoint, FingerprintMismatchAgainstLargerVocabulary) {
  const auto bytes = encode_checkpoint(sample_checkpoint());
  std::vector<ChordSymbol> many;
  for (const auto& q : known_qualities()) {
    for (int root = 0; root < 12; ++root) {
      for (int bass = -1; bass < 12 && many.size() < 632; ++bass) {
        many.push_back({root, q, bass < 0 ? std::nullopt : std::optional<int>(bass)});
      }
    }
  }
  const ChordVocabulary big(many, VocabMode::kCorpus);
  ASSERT_EQ(big.size(), 633);
  EXPECT_THROW(decode_checkpoint(bytes, &big), CheckpointError);
  const auto v96 = build_vocabulary({}, VocabMode::kVocab96);
  EXPECT_NO_THROW(decode_checkpoint(bytes, &v96));
}
