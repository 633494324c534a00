#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <numeric>
#include <vector>

#include "mlnira/core.hpp"

namespace mlnira {

struct WelchResult {
  double t = 0.0;
  double p = 1.0;
  double df = 0.0;
};

// Unequal-variance two-sample t-test with Welch-Satterthwaite degrees of
// freedom and a two-sided p-value.
inline WelchResult welch_t_test(const Eigen::Ref<const Eigen::VectorXd>& a,
                                const Eigen::Ref<const Eigen::VectorXd>& b) {
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  if (a.size() < 2 || b.size() < 2) throw ContractError("welch_t_test: need at least 2 values per sample");

  const double mean_a = a.mean();
  const double mean_b = b.mean();
  const double var_a = (a.array() - mean_a).square().sum() / (na - 1.0);
  const double var_b = (b.array() - mean_b).square().sum() / (nb - 1.0);

  const double se_a = var_a / na;
  const double se_b = var_b / nb;
  const double se2 = se_a + se_b;
  if (se2 <= 0.0) throw DataError("welch_t_test: both samples have zero variance");

  WelchResult result;
  result.t = (mean_a - mean_b) / std::sqrt(se2);
  result.df = se2 * se2 / (se_a * se_a / (na - 1.0) + se_b * se_b / (nb - 1.0));
  if (result.t == 0.0) {
    result.p = 1.0;
  } else {
    boost::math::students_t_distribution<double> dist(result.df);
    result.p = 2.0 * boost::math::cdf(dist, -std::abs(result.t));
  }
  return result;
}

enum class AdjustMethod { Holm, Bonferroni };

inline std::string to_string(AdjustMethod m) { return m == AdjustMethod::Holm ? "holm" : "bonferroni"; }
inline AdjustMethod adjust_method_from_string(const std::string& s) {
  if (s == "holm") return AdjustMethod::Holm;
  if (s == "bonferroni") return AdjustMethod::Bonferroni;
  throw ConfigError("unknown adjustment method '" + s + "' (expected holm or bonferroni)");
}

// Multiple-comparison correction; outputs are clipped to [0,1] and preserve
// the input order of hypotheses.
inline std::vector<double> adjust_p(const std::vector<double>& p_values, AdjustMethod method) {
  const std::size_t m = p_values.size();
  std::vector<double> adjusted(m);
  if (m == 0) return adjusted;

  if (method == AdjustMethod::Bonferroni) {
    for (std::size_t i = 0; i < m; ++i) {
      adjusted[i] = std::min(1.0, p_values[i] * static_cast<double>(m));
    }
    return adjusted;
  }

  // Holm step-down: scale the i-th smallest p by (m - i), then enforce
  // monotonicity with a running maximum.
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return p_values[x] < p_values[y]; });
  double running = 0.0;
  for (std::size_t rank = 0; rank < m; ++rank) {
    double scaled = std::min(1.0, p_values[order[rank]] * static_cast<double>(m - rank));
    running = std::max(running, scaled);
    adjusted[order[rank]] = running;
  }
  return adjusted;
}

}  // namespace mlnira
