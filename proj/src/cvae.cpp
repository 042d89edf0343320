#include "surprisenet/cvae.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

namespace surprisenet {

void CvaeConfig::validate() const {
  if (vocab_size <= 0 || melody_dim <= 0 || prenet_hidden <= 0 || enc_hidden <= 0 || latent_dim <= 0) {
    throw std::invalid_argument("model dimensions must be positive");
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw std::invalid_argument("dropout rate must be in [0, 1)");
  if (batch_size <= 0 || early_stop_patience <= 0 || max_epochs <= 0 || kl_anneal_epochs < 0) {
    throw std::invalid_argument("training schedule values must be positive");
  }
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw std::invalid_argument("val_fraction must be in [0, 1)");
}

nlohmann::json to_json(const CvaeConfig& c) {
  return {{"vocab_size", c.vocab_size},
          {"melody_dim", c.melody_dim},
          {"prenet_hidden", c.prenet_hidden},
          {"enc_hidden", c.enc_hidden},
          {"latent_dim", c.latent_dim},
          {"dropout_rate", c.dropout_rate},
          {"batch_size", c.batch_size},
          {"early_stop_patience", c.early_stop_patience},
          {"class_weighting", c.class_weighting},
          {"seed", c.seed},
          {"max_epochs", c.max_epochs},
          {"learning_rate", c.learning_rate},
          {"kl_anneal_epochs", c.kl_anneal_epochs},
          {"val_fraction", c.val_fraction}};
}

CvaeConfig config_from_json(const nlohmann::json& j, CvaeConfig c) {
  auto take = [&j](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  take("vocab_size", c.vocab_size);
  take("melody_dim", c.melody_dim);
  take("prenet_hidden", c.prenet_hidden);
  take("enc_hidden", c.enc_hidden);
  take("latent_dim", c.latent_dim);
  take("dropout_rate", c.dropout_rate);
  take("batch_size", c.batch_size);
  take("early_stop_patience", c.early_stop_patience);
  take("class_weighting", c.class_weighting);
  take("seed", c.seed);
  take("max_epochs", c.max_epochs);
  take("learning_rate", c.learning_rate);
  take("kl_anneal_epochs", c.kl_anneal_epochs);
  take("val_fraction", c.val_fraction);
  return c;
}

Example make_example(const FrameSequence& seq, const TransitionModel& transitions) {
  Example ex;
  ex.id = seq.source_id;
  ex.chords = seq.chords;
  ex.melody = seq.melody;
  ex.contour = surprise_contour(transitions, seq.chords);
  return ex;
}

std::vector<double> class_weights(const std::vector<std::int64_t>& counts) {
  std::vector<double> w(counts.size());
  double observed_sum = 0.0;
  int observed = 0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    w[c] = 1.0 / std::sqrt(static_cast<double>(counts[c]) + 1.0);
    if (counts[c] > 0) {
      observed_sum += w[c];
      ++observed;
    }
  }
  if (observed == 0) return std::vector<double>(counts.size(), 1.0);
  const double mean = observed_sum / observed;
  for (double& x : w) x /= mean;
  return w;
}

double kl_beta(int epoch, int anneal_epochs) {
  if (anneal_epochs <= 0) return 1.0;
  return std::min(1.0, static_cast<double>(std::max(epoch - 1, 0)) / anneal_epochs);
}

LossBreakdown evaluate_loss(const Cvae& model, const std::vector<Example>& set, double beta,
                            const std::vector<float>* weights) {
  if (set.empty()) throw std::invalid_argument("cannot evaluate an empty set");
  std::vector<const Example*> batch;
  std::vector<nn::Tensor<float>> eps;
  for (const auto& ex : set) {
    batch.push_back(&ex);
    eps.push_back(nn::Tensor<float>::matrix(ex.length(), model.config().latent_dim));
  }
  return batch_loss<float>(model, batch, eps, beta, weights, nullptr);
}

double reconstruction_accuracy(const Cvae& model, const std::vector<Example>& set) {
  long hits = 0;
  long total = 0;
  for (const auto& ex : set) {
    auto [mu, lv] = model.posterior(ex);
    const auto logits = model.generate_logits(ex.melody, ex.contour, mu);
    for (int t = 0; t < logits.rows(); ++t) {
      const float* row = logits.row(t);
      const int best = static_cast<int>(std::max_element(row, row + logits.cols()) - row);
      hits += best == ex.chords[static_cast<std::size_t>(t)];
      ++total;
    }
  }
  return total ? static_cast<double>(hits) / static_cast<double>(total) : 0.0;
}

std::pair<std::vector<Example>, std::vector<Example>> split_validation(std::vector<Example> items, double fraction,
                                                                      std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  auto n_val = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(items.size())));
  if (fraction > 0.0 && items.size() > 1) n_val = std::max<std::size_t>(n_val, 1);
  n_val = std::min(n_val, items.size() > 0 ? items.size() - 1 : 0);
  std::vector<Example> train;
  std::vector<Example> val;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_val ? val : train).push_back(std::move(items[order[i]]));
  }
  return {std::move(train), std::move(val)};
}

TrainHistory train(Cvae& model, const std::vector<Example>& train_set, const std::vector<Example>& val_set,
                   const TrainOptions& options) {
  if (train_set.empty() || val_set.empty()) throw std::invalid_argument("training and validation sets must be nonempty");
  if (options.fixed_beta && !(*options.fixed_beta >= 0.0)) throw std::invalid_argument("fixed_beta must be >= 0");
  const CvaeConfig& cfg = model.config();

  std::vector<float> weights;
  if (cfg.class_weighting) {
    std::vector<std::int64_t> counts(static_cast<std::size_t>(cfg.vocab_size), 0);
    for (const auto& ex : train_set) {
      for (int c : ex.chords) ++counts[static_cast<std::size_t>(c)];
    }
    for (double w : class_weights(counts)) weights.push_back(static_cast<float>(w));
  }
  const std::vector<float>* wptr = weights.empty() ? nullptr : &weights;

  nn::Adam<float> adam(model.params(), cfg.learning_rate);
  std::mt19937_64 rng(cfg.seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(options.start_epoch));
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  TrainHistory history;
  auto best_params = model.params();
  double best_val = std::numeric_limits<double>::infinity();
  int since_best = 0;

  const int last_epoch = options.start_epoch + cfg.max_epochs - 1;
  for (int epoch = options.start_epoch; epoch <= last_epoch; ++epoch) {
    const double beta = options.fixed_beta ? *options.fixed_beta : kl_beta(epoch, cfg.kl_anneal_epochs);
    std::shuffle(order.begin(), order.end(), rng);
    double recon_sum = 0.0;
    double kl_sum = 0.0;
    std::size_t frame_sum = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      std::vector<const Example*> batch;
      std::size_t frames = 0;
      for (std::size_t i = start; i < std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size)); ++i) {
        batch.push_back(&train_set[order[i]]);
        frames += static_cast<std::size_t>(train_set[order[i]].length());
      }
      auto eps = draw_noise<float>(batch, cfg.latent_dim, rng);
      auto grads = model.params().zero_grads();
      const auto loss = batch_loss(model, batch, eps, beta, wptr, &grads, Cvae::Mode{true, &rng});
      if (!std::isfinite(loss.reconstruction) || !std::isfinite(loss.kl)) {
        throw DivergenceError("loss became non-finite at epoch " + std::to_string(epoch) +
                              " (reconstruction=" + std::to_string(loss.reconstruction) +
                              ", kl=" + std::to_string(loss.kl) + ")");
      }
      adam.step(model.params(), grads);
      recon_sum += loss.reconstruction * static_cast<double>(frames);
      kl_sum += loss.kl * static_cast<double>(frames);
      frame_sum += frames;
    }

    const auto val = evaluate_loss(model, val_set, 1.0, wptr);
    if (!std::isfinite(val.reconstruction) || !std::isfinite(val.kl)) {
      throw DivergenceError("validation loss became non-finite at epoch " + std::to_string(epoch));
    }
    EpochRecord rec{epoch, recon_sum / static_cast<double>(frame_sum), kl_sum / static_cast<double>(frame_sum),
                    val.reconstruction, val.kl, beta};
    history.epochs.push_back(rec);
    if (options.on_epoch) options.on_epoch(rec);

    // Early stopping watches the full negative ELBO once the KL ramp is done.
    if (!options.fixed_beta && beta < 1.0) continue;
    const double monitored = val.reconstruction + beta * val.kl;
    if (monitored < best_val) {
      best_val = monitored;
      best_params = model.params();
      history.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.early_stop_patience) {
      history.early_stopped = true;
      break;
    }
  }
  if (history.best_epoch > 0) {
    model.params() = best_params;
  } else if (!history.epochs.empty()) {
    history.best_epoch = history.epochs.back().epoch;
  }
  return history;
}

std::string history_csv(const TrainHistory& history) {
  std::ostringstream out;
  out.precision(10);
  out << "epoch,train_recon,train_kl,val_recon,val_kl,beta\n";
  for (const auto& e : history.epochs) {
    out << e.epoch << ',' << e.train_recon << ',' << e.train_kl << ',' << e.val_recon << ',' << e.val_kl << ','
        << e.beta << '\n';
  }
  return out.str();
}

}  // namespace surprisenet
