#include "surprisenet/surprise.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

namespace surprisenet {
namespace {

std::vector<double> smoothed_row(const std::int64_t* counts, int n, double alpha) {
  const double total = static_cast<double>(std::accumulate(counts, counts + n, std::int64_t{0}));
  const double denom = total + alpha * n;
  std::vector<double> row(static_cast<std::size_t>(n), 0.0);
  if (denom <= 0.0) return row;  // unseen state with alpha = 0: row undefined, left at zero
  for (int j = 0; j < n; ++j) row[static_cast<std::size_t>(j)] = (static_cast<double>(counts[j]) + alpha) / denom;
  return row;
}

double neg_log(double p, int from, int to) {
  if (p <= 0.0) throw ZeroProbabilityError(from, to);
  return -std::log(p);
}

}  // namespace

ZeroProbabilityError::ZeroProbabilityError(int f, int t)
    : std::runtime_error("zero-probability transition (" + std::to_string(f) + " -> " + std::to_string(t) + ")"),
      from(f),
      to(t) {}

TransitionModel::TransitionModel(int n, double alpha, std::vector<std::int64_t> counts,
                                 std::vector<std::int64_t> initial_counts)
    : n_(n), alpha_(alpha), counts_(std::move(counts)), initial_counts_(std::move(initial_counts)) {
  if (n <= 0) throw std::invalid_argument("transition model needs N > 0");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("alpha must be finite and >= 0");
  const auto nn = static_cast<std::size_t>(n);
  if (counts_.size() != nn * nn || initial_counts_.size() != nn) {
    throw std::invalid_argument("transition count shapes do not match N");
  }
  if (std::any_of(counts_.begin(), counts_.end(), [](auto c) { return c < 0; }) ||
      std::any_of(initial_counts_.begin(), initial_counts_.end(), [](auto c) { return c < 0; })) {
    throw std::invalid_argument("transition counts must be nonnegative");
  }
  probs_.reserve(nn * nn);
  for (int i = 0; i < n; ++i) {
    auto row = smoothed_row(counts_.data() + index(i, 0), n, alpha);
    probs_.insert(probs_.end(), row.begin(), row.end());
  }
  initial_probs_ = smoothed_row(initial_counts_.data(), n, alpha);
}

nlohmann::json TransitionModel::to_json() const {
  nlohmann::json j;
  j["N"] = n_;
  j["alpha"] = alpha_;
  auto rows = nlohmann::json::array();
  for (int i = 0; i < n_; ++i) {
    rows.push_back(std::vector<std::int64_t>(counts_.begin() + static_cast<std::ptrdiff_t>(index(i, 0)),
                                             counts_.begin() + static_cast<std::ptrdiff_t>(index(i, 0)) + n_));
  }
  j["counts"] = std::move(rows);
  j["initial_counts"] = initial_counts_;
  return j;
}

TransitionModel TransitionModel::from_json(const nlohmann::json& j) {
  try {
    const int n = j.at("N").get<int>();
    std::vector<std::int64_t> counts;
    const auto& rows = j.at("counts");
    if (!rows.is_array() || static_cast<int>(rows.size()) != n) {
      throw std::invalid_argument("counts must have N rows");
    }
    for (const auto& row : rows) {
      auto r = row.get<std::vector<std::int64_t>>();
      if (static_cast<int>(r.size()) != n) throw std::invalid_argument("counts row length must equal N");
      counts.insert(counts.end(), r.begin(), r.end());
    }
    return TransitionModel(n, j.at("alpha").get<double>(), std::move(counts),
                           j.at("initial_counts").get<std::vector<std::int64_t>>());
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed transition model: ") + e.what());
  }
}

TransitionModel fit_transitions(const std::vector<ChordSeq>& sequences, int n, double alpha) {
  if (n <= 0) throw std::invalid_argument("N must be positive");
  if (alpha < 0.0) throw std::invalid_argument("alpha must be >= 0");
  const auto nn = static_cast<std::size_t>(n);
  std::vector<std::int64_t> counts(nn * nn, 0);
  std::vector<std::int64_t> initial(nn, 0);
  bool any = false;
  for (const auto& seq : sequences) {
    for (int c : seq) {
      if (c < 0 || c >= n) throw std::out_of_range("chord index " + std::to_string(c) + " >= N");
    }
    if (seq.empty()) continue;
    any = true;
    ++initial[static_cast<std::size_t>(seq.front())];
    for (std::size_t t = 1; t < seq.size(); ++t) {
      ++counts[static_cast<std::size_t>(seq[t - 1]) * nn + static_cast<std::size_t>(seq[t])];
    }
  }
  if (!any && alpha == 0.0) throw std::invalid_argument("empty input with alpha = 0 leaves every row undefined");
  return TransitionModel(n, alpha, std::move(counts), std::move(initial));
}

SurpriseContour surprise_contour(const TransitionModel& model, const ChordSeq& chords) {
  SurpriseContour out;
  out.reserve(chords.size());
  for (std::size_t t = 0; t < chords.size(); ++t) {
    const int c = chords[t];
    if (c < 0 || c >= model.size()) throw std::out_of_range("chord index outside transition model");
    if (t == 0) {
      out.push_back(neg_log(model.initial_prob(c), -1, c));
    } else {
      out.push_back(neg_log(model.prob(chords[t - 1], c), chords[t - 1], c));
    }
  }
  return out;
}

double max_training_surprise(const TransitionModel& model, const std::vector<ChordSeq>& training) {
  if (training.empty()) throw std::invalid_argument("training set is empty");
  double best = 0.0;
  for (const auto& seq : training) {
    for (double v : surprise_contour(model, seq)) best = std::max(best, v);
  }
  return best;
}

SurpriseContour parse_contour(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string_view::npos && text[first] == '[') {
    // JSON array of numbers.
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw std::invalid_argument(std::string("bad contour JSON: ") + e.what());
    }
    SurpriseContour out;
    for (const auto& v : doc) {
      if (!v.is_number() || !std::isfinite(v.get<double>()) || v.get<double>() < 0.0) {
        throw std::invalid_argument("bad contour value '" + v.dump() + "'");
      }
      out.push_back(v.get<double>());
    }
    if (out.empty()) throw std::invalid_argument("contour is empty");
    return out;
  }
  std::string s(text);
  std::replace(s.begin(), s.end(), ',', '\n');
  std::istringstream in(s);
  std::string tok;
  SurpriseContour out;
  while (in >> tok) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size() || !std::isfinite(v) || v < 0.0) {
      throw std::invalid_argument("bad contour value '" + tok + "'");
    }
    out.push_back(v);
  }
  if (out.empty()) throw std::invalid_argument("contour is empty");
  return out;
}

std::string format_contour(const SurpriseContour& contour) {
  std::ostringstream out;
  out << std::setprecision(17);
  for (double v : contour) out << v << '\n';
  return out.str();
}

}  // namespace surprisenet
