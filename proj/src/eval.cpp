#include "surprisenet/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>
#include <nlohmann/json.hpp>

namespace surprisenet {
namespace {

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) throw UndefinedCorrelation("rank correlation undefined for a constant sequence");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

bool is_unit(double rho) { return std::abs(std::abs(rho) - 1.0) < 1e-12; }

}  // namespace

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&v](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

double spearman_t_pvalue(double rho, std::size_t n) {
  if (n < 3) throw std::invalid_argument("p-value needs at least 3 pairs");
  if (is_unit(rho)) return 0.0;
  const double dof = static_cast<double>(n - 2);
  const double t = rho * std::sqrt(dof / ((1.0 - rho) * (1.0 + rho)));
  boost::math::students_t_distribution<double> dist(dof);
  return std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))), 0.0, 1.0);
}

CorrelationResult spearman(const std::vector<double>& x, const std::vector<double>& y, PValueMethod method) {
  if (x.size() != y.size()) throw std::invalid_argument("spearman: sequences differ in length");
  if (x.size() < 3) throw std::invalid_argument("spearman: need at least 3 pairs");
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw std::invalid_argument("spearman: non-finite value");
  }
  CorrelationResult r;
  r.n = x.size();
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  r.rho = pearson(rx, ry);
  if (is_unit(r.rho)) r.rho = r.rho > 0 ? 1.0 : -1.0;

  if (method == PValueMethod::kExactPermutation && r.n > 10) {
    throw std::invalid_argument("spearman: exact permutation p-value supports at most 10 pairs");
  }
  if (method == PValueMethod::kStudentT) {
    r.p_value = spearman_t_pvalue(r.rho, r.n);
    return r;
  }
  // Exact two-sided permutation p-value: share of orderings with |rho| at least as large.
  std::vector<std::size_t> perm(r.n);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<double> shuffled(r.n);
  const double observed = std::abs(r.rho) - 1e-12;
  long extreme = 0;
  long total = 0;
  do {
    for (std::size_t i = 0; i < r.n; ++i) shuffled[i] = ry[perm[i]];
    extreme += std::abs(pearson(rx, shuffled)) >= observed;
    ++total;
  } while (std::next_permutation(perm.begin(), perm.end()));
  r.p_value = static_cast<double>(extreme) / static_cast<double>(total);
  return r;
}

AdherenceResult contour_adherence(const std::vector<SurpriseContour>& given,
                                  const std::vector<SurpriseContour>& realized) {
  if (given.empty()) throw std::invalid_argument("contour adherence needs at least one piece");
  if (given.size() != realized.size()) throw std::invalid_argument("given and realized piece counts differ");
  AdherenceResult out;
  std::vector<double> gx;
  std::vector<double> ry;
  double rho_sum = 0.0;
  int rho_count = 0;
  for (std::size_t i = 0; i < given.size(); ++i) {
    if (given[i].size() != realized[i].size()) {
      throw std::invalid_argument("piece " + std::to_string(i) + ": given contour has " +
                                  std::to_string(given[i].size()) + " frames, realized has " +
                                  std::to_string(realized[i].size()));
    }
    gx.insert(gx.end(), given[i].begin(), given[i].end());
    ry.insert(ry.end(), realized[i].begin(), realized[i].end());
    try {
      auto r = spearman(given[i], realized[i]);
      rho_sum += r.rho;
      ++rho_count;
      out.per_piece.emplace_back(r);
    } catch (const std::invalid_argument&) {
      out.per_piece.emplace_back(std::nullopt);
    }
  }
  out.pooled = spearman(gx, ry);
  if (rho_count > 0) out.mean_piece_rho = rho_sum / rho_count;
  return out;
}

nlohmann::json to_json(const CorrelationResult& r) {
  return {{"rho", r.rho}, {"p_value", r.p_value}, {"n", r.n}};
}

nlohmann::json to_json(const AdherenceResult& r, const std::vector<std::string>& preset_kinds) {
  nlohmann::json j;
  j["pooled"] = to_json(r.pooled);
  j["mean_piece_rho"] = r.mean_piece_rho ? nlohmann::json(*r.mean_piece_rho) : nlohmann::json(nullptr);
  j["per_piece"] = nlohmann::json::array();
  for (std::size_t i = 0; i < r.per_piece.size(); ++i) {
    nlohmann::json row = r.per_piece[i] ? to_json(*r.per_piece[i]) : nlohmann::json{{"rho", nullptr}};
    if (i < preset_kinds.size()) row["preset"] = preset_kinds[i];
    j["per_piece"].push_back(std::move(row));
  }
  return j;
}

}  // namespace surprisenet
