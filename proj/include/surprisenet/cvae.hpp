#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "surprisenet/leadsheet.hpp"
#include "surprisenet/nn/layers.hpp"
#include "surprisenet/surprise.hpp"

namespace surprisenet {

struct CvaeConfig {
  int vocab_size = 0;
  int melody_dim = kMelodyDim;
  int prenet_hidden = 128;  // per direction; the contour embedding is twice this
  int enc_hidden = 256;     // encoder and decoder share this width
  int latent_dim = 16;
  double dropout_rate = 0.2;
  int batch_size = 64;
  int early_stop_patience = 10;
  bool class_weighting = false;
  std::uint64_t seed = 1;
  int max_epochs = 200;
  double learning_rate = 1e-3;
  int kl_anneal_epochs = 20;
  double val_fraction = 0.05;

  int contour_dim() const { return 2 * prenet_hidden; }
  int encoder_input_dim() const { return vocab_size + melody_dim + contour_dim(); }
  int decoder_input_dim() const { return latent_dim + melody_dim + contour_dim(); }
  void validate() const;
};

nlohmann::json to_json(const CvaeConfig& c);
CvaeConfig config_from_json(const nlohmann::json& j, CvaeConfig base = {});

/// One training or inference item: frame-aligned chords, melody and contour.
struct Example {
  std::string id;
  std::vector<int> chords;
  std::vector<MelodyFrame> melody;
  SurpriseContour contour;

  int length() const { return static_cast<int>(melody.size()); }
};

Example make_example(const FrameSequence& seq, const TransitionModel& transitions);

struct LossBreakdown {
  double reconstruction = 0.0;  // nats per frame
  double kl = 0.0;              // nats per frame
  double beta = 1.0;
  double total() const { return reconstruction + beta * kl; }
};

template <typename T>
struct LatentSample {
  nn::Tensor<T> mu, log_var, epsilon, z;
};

/// z = mu + exp(log_var / 2) * eps for a fresh standard-normal eps.
template <typename T>
LatentSample<T> reparameterize(const nn::Tensor<T>& mu, const nn::Tensor<T>& log_var, std::mt19937_64& rng) {
  if (!mu.same_shape(log_var)) throw nn::ShapeError("reparameterize: mu and log_var shapes differ");
  LatentSample<T> s{mu, log_var, nn::Tensor<T>(mu.shape()), nn::Tensor<T>(mu.shape())};
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < mu.size(); ++i) {
    s.epsilon[i] = static_cast<T>(normal(rng));
    s.z[i] = mu[i] + std::exp(log_var[i] / T(2)) * s.epsilon[i];
  }
  return s;
}

/// w_c proportional to 1/sqrt(count_c + 1), normalised to mean 1 over classes
/// with a nonzero count. Unobserved classes get the weight of a zero count.
std::vector<double> class_weights(const std::vector<std::int64_t>& counts);

/// Matrix helpers for building model inputs.
template <typename T>
nn::Tensor<T> melody_matrix(const std::vector<MelodyFrame>& melody) {
  auto m = nn::Tensor<T>::matrix(static_cast<int>(melody.size()), kMelodyDim);
  for (int t = 0; t < m.rows(); ++t) {
    for (int k = 0; k < kMelodyDim; ++k) m(t, k) = static_cast<T>(melody[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)]);
  }
  return m;
}

template <typename T>
nn::Tensor<T> one_hot_matrix(const std::vector<int>& chords, int vocab_size) {
  auto m = nn::Tensor<T>::matrix(static_cast<int>(chords.size()), vocab_size);
  const auto rows = one_hot(chords, vocab_size);
  for (int t = 0; t < m.rows(); ++t) {
    for (int c = 0; c < vocab_size; ++c) m(t, c) = static_cast<T>(rows[static_cast<std::size_t>(t)][static_cast<std::size_t>(c)]);
  }
  return m;
}

template <typename T>
nn::Tensor<T> contour_matrix(const SurpriseContour& contour) {
  auto m = nn::Tensor<T>::matrix(static_cast<int>(contour.size()), 1);
  for (std::size_t t = 0; t < contour.size(); ++t) m[t] = static_cast<T>(contour[t]);
  return m;
}

/// Conditional sequence VAE: contour Pre-net, bidirectional recurrent
/// encoder with per-frame mu / log-variance heads, and a non-autoregressive
/// bidirectional recurrent decoder over [z | melody | contour embedding].
template <typename T>
class CvaeNet {
 public:
  /// Forward-pass mode. Dropout is active only when `rng` is set and `training`.
  struct Mode {
    bool training = false;
    std::mt19937_64* rng = nullptr;
  };

  CvaeNet() = default;
  explicit CvaeNet(const CvaeConfig& config) : config_(config) {
    config_.validate();
    std::mt19937_64 rng(config.seed);
    prenet_ = nn::RecurrentLayer::create(params_, "prenet", 1, config.prenet_hidden, rng);
    encoder_ = nn::RecurrentLayer::create(params_, "encoder.rnn", config.encoder_input_dim(), config.enc_hidden, rng);
    mu_head_ = nn::LinearLayer::create(params_, "encoder.mu", 2 * config.enc_hidden, config.latent_dim, rng);
    logvar_head_ = nn::LinearLayer::create(params_, "encoder.log_var", 2 * config.enc_hidden, config.latent_dim, rng);
    decoder_ = nn::RecurrentLayer::create(params_, "decoder.rnn", config.decoder_input_dim(), config.enc_hidden, rng);
    out_head_ = nn::LinearLayer::create(params_, "decoder.out", 2 * config.enc_hidden, config.vocab_size, rng);
  }

  const CvaeConfig& config() const { return config_; }
  nn::ParameterSet<T>& params() { return params_; }
  const nn::ParameterSet<T>& params() const { return params_; }

  /// Same architecture and parameter values in another scalar type.
  template <typename U>
  CvaeNet<U> cast() const {
    CvaeNet<U> out;
    out.config_ = config_;
    out.params_ = params_.template cast<U>();
    out.prenet_ = prenet_;
    out.encoder_ = encoder_;
    out.mu_head_ = mu_head_;
    out.logvar_head_ = logvar_head_;
    out.decoder_ = decoder_;
    out.out_head_ = out_head_;
    return out;
  }

  nn::Var prenet_forward(nn::Tape<T>& tape, nn::Var contour, Mode mode = {}) const {
    if (tape.value(contour).cols() != 1) throw nn::ShapeError("contour must be a T x 1 column");
    return maybe_dropout(tape, prenet_.forward(tape, params_, contour), mode);
  }

  std::pair<nn::Var, nn::Var> encode(nn::Tape<T>& tape, nn::Var chords, nn::Var melody, nn::Var contour_emb,
                                     Mode mode = {}) const {
    check_rows(tape, {chords, melody, contour_emb});
    if (tape.value(chords).cols() != config_.vocab_size) throw nn::ShapeError("encode: chord width != vocab size");
    nn::Var x = tape.concat_cols({chords, melody, contour_emb});
    nn::Var h = maybe_dropout(tape, encoder_.forward(tape, params_, x), mode);
    return {mu_head_.forward(tape, params_, h), logvar_head_.forward(tape, params_, h)};
  }

  nn::Var decode(nn::Tape<T>& tape, nn::Var z, nn::Var melody, nn::Var contour_emb, Mode mode = {}) const {
    check_rows(tape, {z, melody, contour_emb});
    if (tape.value(z).cols() != config_.latent_dim) throw nn::ShapeError("decode: latent width mismatch");
    nn::Var x = tape.concat_cols({z, melody, contour_emb});
    nn::Var h = maybe_dropout(tape, decoder_.forward(tape, params_, x), mode);
    return out_head_.forward(tape, params_, h);
  }

  struct SequenceTerms {
    nn::Var reconstruction;  // scaled sum of weighted cross-entropy
    nn::Var kl;              // scaled sum of KL
    nn::Var mu, log_var, logits;
  };

  /// Builds the loss terms for one sequence. `eps` is the reparameterisation
  /// noise (T x latent). Sums are multiplied by `frame_scale`, normally
  /// 1 / (frames in the batch).
  SequenceTerms sequence_terms(nn::Tape<T>& tape, const Example& ex, const nn::Tensor<T>& eps,
                               const std::vector<T>* weights, T frame_scale, Mode mode = {}) const {
    const int steps = ex.length();
    if (steps < 1 || static_cast<int>(ex.chords.size()) != steps || static_cast<int>(ex.contour.size()) != steps) {
      throw nn::ShapeError("example '" + ex.id + "' is not frame aligned");
    }
    nn::Var chords = tape.constant(one_hot_matrix<T>(ex.chords, config_.vocab_size));
    nn::Var melody = tape.constant(melody_matrix<T>(ex.melody));
    nn::Var emb = prenet_forward(tape, tape.constant(contour_matrix<T>(ex.contour)), mode);
    auto [mu, lv] = encode(tape, chords, melody, emb, mode);
    nn::Var z = tape.reparameterize(mu, lv, eps);
    nn::Var logits = decode(tape, z, melody, emb, mode);
    SequenceTerms out;
    out.reconstruction = tape.softmax_cross_entropy(logits, ex.chords, weights, frame_scale);
    out.kl = tape.gaussian_kl(mu, lv, frame_scale);
    out.mu = mu;
    out.log_var = lv;
    out.logits = logits;
    return out;
  }

  /// Decoder logits for a melody and contour given latents (inference path).
  nn::Tensor<T> generate_logits(const std::vector<MelodyFrame>& melody, const SurpriseContour& contour,
                                const nn::Tensor<T>& z) const {
    if (melody.size() != contour.size()) {
      throw nn::ShapeError("contour has " + std::to_string(contour.size()) + " frames but melody has " +
                           std::to_string(melody.size()));
    }
    nn::Tape<T> tape;
    nn::Var emb = prenet_forward(tape, tape.constant(contour_matrix<T>(contour)));
    nn::Var logits = decode(tape, tape.constant(z), tape.constant(melody_matrix<T>(melody)), emb);
    return tape.value(logits);
  }

  /// Posterior mean mu (and log variance) for a full example.
  std::pair<nn::Tensor<T>, nn::Tensor<T>> posterior(const Example& ex) const {
    nn::Tape<T> tape;
    nn::Var emb = prenet_forward(tape, tape.constant(contour_matrix<T>(ex.contour)));
    auto [mu, lv] = encode(tape, tape.constant(one_hot_matrix<T>(ex.chords, config_.vocab_size)),
                           tape.constant(melody_matrix<T>(ex.melody)), emb);
    return {tape.value(mu), tape.value(lv)};
  }

 private:
  template <typename U>
  friend class CvaeNet;

  nn::Var maybe_dropout(nn::Tape<T>& tape, nn::Var x, Mode mode) const {
    if (!mode.training || mode.rng == nullptr) return x;
    return tape.dropout(x, config_.dropout_rate, *mode.rng);
  }

  static void check_rows(nn::Tape<T>& tape, std::initializer_list<nn::Var> vars) {
    const int rows = tape.value(*vars.begin()).rows();
    for (nn::Var v : vars) {
      if (tape.value(v).rows() != rows) throw nn::ShapeError("inputs do not share a frame count");
    }
  }

  CvaeConfig config_;
  nn::ParameterSet<T> params_;
  nn::RecurrentLayer prenet_, encoder_, decoder_;
  nn::LinearLayer mu_head_, logvar_head_, out_head_;
};

/// Loss of a batch with fixed noise and no dropout. Gradients are accumulated
/// into `grads` when non-null.
template <typename T>
LossBreakdown batch_loss(const CvaeNet<T>& net, const std::vector<const Example*>& batch,
                         const std::vector<nn::Tensor<T>>& eps, double beta, const std::vector<T>* weights,
                         std::vector<nn::Tensor<T>>* grads, typename CvaeNet<T>::Mode mode = {}) {
  std::size_t frames = 0;
  for (const Example* ex : batch) frames += static_cast<std::size_t>(ex->length());
  if (frames == 0) throw std::invalid_argument("empty batch");
  const T scale = static_cast<T>(1.0 / static_cast<double>(frames));
  LossBreakdown out;
  out.beta = beta;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    nn::Tape<T> tape;
    auto terms = net.sequence_terms(tape, *batch[b], eps[b], weights, scale, mode);
    out.reconstruction += static_cast<double>(tape.value(terms.reconstruction)[0]);
    out.kl += static_cast<double>(tape.value(terms.kl)[0]);
    if (grads) {
      nn::Var total = tape.weighted_sum({terms.reconstruction, terms.kl}, {T(1), static_cast<T>(beta)});
      tape.backward(total, *grads);
    }
  }
  return out;
}

/// Draws T x latent standard-normal noise per example.
template <typename T>
std::vector<nn::Tensor<T>> draw_noise(const std::vector<const Example*>& batch, int latent_dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<nn::Tensor<T>> eps;
  for (const Example* ex : batch) {
    auto e = nn::Tensor<T>::matrix(ex->length(), latent_dim);
    for (std::size_t i = 0; i < e.size(); ++i) e[i] = static_cast<T>(normal(rng));
    eps.push_back(std::move(e));
  }
  return eps;
}

using Cvae = CvaeNet<float>;

struct EpochRecord {
  int epoch = 0;
  double train_recon = 0.0;
  double train_kl = 0.0;
  double val_recon = 0.0;
  double val_kl = 0.0;
  double beta = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  bool early_stopped = false;
};

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainOptions {
  int start_epoch = 1;  // continue numbering after a resume
  std::function<void(const EpochRecord&)> on_epoch;
  // Constant KL weight instead of the ramp; early stopping then monitors recon + beta * kl from the start.
  std::optional<double> fixed_beta;
};

/// KL weight for an epoch: linear ramp 0 -> 1 over `anneal_epochs`.
double kl_beta(int epoch, int anneal_epochs);

/// Minimises the negative ELBO with Adam and returns the best-validation
/// parameters (monitored once the KL ramp is complete).
TrainHistory train(Cvae& model, const std::vector<Example>& train_set, const std::vector<Example>& val_set,
                   const TrainOptions& options = {});

/// Deterministic validation loss: posterior mean as z, no dropout.
LossBreakdown evaluate_loss(const Cvae& model, const std::vector<Example>& set, double beta,
                            const std::vector<float>* weights = nullptr);

/// Fraction of frames whose argmax decoding from the posterior mean matches.
double reconstruction_accuracy(const Cvae& model, const std::vector<Example>& set);

/// Seeded split: returns (train, validation) with round(fraction * n)
/// validation items (at least one when n > 1).
std::pair<std::vector<Example>, std::vector<Example>> split_validation(std::vector<Example> items, double fraction,
                                                                      std::uint64_t seed);

std::string history_csv(const TrainHistory& history);

}  // namespace surprisenet
