#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace surprisenet {

using ChordSeq = std::vector<int>;

class ZeroProbabilityError : public std::runtime_error {
 public:
  ZeroProbabilityError(int from, int to);
  int from;
  int to;
};

/// First-order chord transition model with additive smoothing.
///
/// probs[i][j] = (counts[i][j] + alpha) / (sum_k counts[i][k] + alpha * N).
/// The first frame of a sequence is scored against a smoothed initial-state
/// distribution built the same way from first-frame counts.
class TransitionModel {
 public:
  TransitionModel(int n, double alpha, std::vector<std::int64_t> counts,
                  std::vector<std::int64_t> initial_counts);

  int size() const { return n_; }
  double alpha() const { return alpha_; }
  std::int64_t count(int from, int to) const { return counts_[index(from, to)]; }
  std::int64_t initial_count(int state) const { return initial_counts_[static_cast<std::size_t>(state)]; }
  double prob(int from, int to) const { return probs_[index(from, to)]; }
  double initial_prob(int state) const { return initial_probs_[static_cast<std::size_t>(state)]; }

  nlohmann::json to_json() const;
  static TransitionModel from_json(const nlohmann::json& j);

 private:
  std::size_t index(int from, int to) const {
    return static_cast<std::size_t>(from) * static_cast<std::size_t>(n_) + static_cast<std::size_t>(to);
  }

  int n_;
  double alpha_;
  std::vector<std::int64_t> counts_;
  std::vector<std::int64_t> initial_counts_;
  std::vector<double> probs_;
  std::vector<double> initial_probs_;
};

/// Per-frame surprisingness in nats.
using SurpriseContour = std::vector<double>;

TransitionModel fit_transitions(const std::vector<ChordSeq>& sequences, int n, double alpha = 0.01);

/// values[0] = -ln initial(c0); values[t] = -ln p(c_t | c_{t-1}).
SurpriseContour surprise_contour(const TransitionModel& model, const ChordSeq& chords);

double max_training_surprise(const TransitionModel& model, const std::vector<ChordSeq>& training);

/// Accepts one value per line or a single comma-separated line.
SurpriseContour parse_contour(std::string_view text);
std::string format_contour(const SurpriseContour& contour);

}  // namespace surprisenet
