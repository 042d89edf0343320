#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "surprisenet/surprise.hpp"

namespace surprisenet {

class UndefinedCorrelation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct CorrelationResult {
  double rho = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
};

enum class PValueMethod {
  kStudentT,          // t = rho * sqrt((n-2)/(1-rho^2)), n-2 degrees of freedom
  kExactPermutation,  // enumerate all n! orderings of y (n <= 10)
};

/// Fractional ranks (1-based, ties get the average rank).
std::vector<double> average_ranks(const std::vector<double>& v);

/// Spearman rank correlation with a two-sided p-value.
CorrelationResult spearman(const std::vector<double>& x, const std::vector<double>& y,
                           PValueMethod method = PValueMethod::kStudentT);

/// Two-sided p-value of a Spearman rho under the t approximation.
double spearman_t_pvalue(double rho, std::size_t n);

struct AdherenceResult {
  CorrelationResult pooled;
  /// Per-piece correlation; empty when a piece's contour is constant.
  std::vector<std::optional<CorrelationResult>> per_piece;
  std::optional<double> mean_piece_rho;
};

/// Pools every (given, realized) frame pair across pieces and correlates them.
AdherenceResult contour_adherence(const std::vector<SurpriseContour>& given,
                                  const std::vector<SurpriseContour>& realized);

nlohmann::json to_json(const CorrelationResult& r);
nlohmann::json to_json(const AdherenceResult& r, const std::vector<std::string>& preset_kinds = {});

}  // namespace surprisenet
