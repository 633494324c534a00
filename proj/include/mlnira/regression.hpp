#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <vector>

#include "mlnira/data.hpp"

namespace mlnira {

constexpr double kVarianceFloor = 1e-6;   // lower bound for the random-intercept variance
constexpr double kNumericalZero = 1e-8;   // slopes below this count as structural zeros
constexpr double kLatentResidualVar = 3.289868133696452873;  // pi^2/3, logistic link

inline double sigmoid(double x) {
  if (x >= 0.0) {
    double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

inline double log1pexp(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

inline double conditional_probability(double eta) { return sigmoid(eta); }

inline double odds_ratio(double slope) { return std::exp(slope); }

// Baseline activation probability with every predictor at zero.
inline double intercept_probability(double fixed_intercept, double group_intercept = 0.0) {
  return sigmoid(fixed_intercept + group_intercept);
}

struct ParameterSet {
  double intercept = 0.0;
  Eigen::VectorXd slopes;             // one per predictor
  Eigen::VectorXd group_intercepts;   // one per group; empty if single-level
  double variance = 0.0;              // random-intercept variance; 0 if single-level
};

struct RegressionSpec {
  bool multilevel = false;
  std::vector<double> lambda_grid;    // strictly descending positive values
  double gamma = 0.25;                // EBIC model-space weight
  int max_iter = 500;
  double tol = 1e-5;
  bool record_objective_trace = false;
};

struct FitResult {
  ParameterSet params;
  double lambda = 0.0;
  double penalized_loglik = std::numeric_limits<double>::quiet_NaN();  // full objective incl. L1 term
  double quasi_loglik = std::numeric_limits<double>::quiet_NaN();      // objective without the L1 term
  int active_count = 0;
  double ebic = std::numeric_limits<double>::quiet_NaN();
  bool converged = false;
  int iterations = 0;
  bool separation = false;
  std::vector<double> objective_trace;  // filled when requested
};

inline double linear_predictor(const Eigen::Ref<const Eigen::VectorXd>& x,
                               const ParameterSet& params, int group = -1) {
  if (x.size() != params.slopes.size()) {
    throw ContractError("linear_predictor: row length does not match slopes");
  }
  double eta = params.intercept;
  if (x.size() > 0) eta += params.slopes.dot(x);
  if (params.group_intercepts.size() > 0) {
    if (group < 0 || group >= params.group_intercepts.size()) {
      throw ContractError("linear_predictor: group ordinal out of range");
    }
    eta += params.group_intercepts[group];
  }
  return eta;
}

namespace detail {

inline Eigen::VectorXd linear_predictors(const CenteredDesign& design, const ParameterSet& params) {
  Eigen::VectorXd eta = Eigen::VectorXd::Constant(design.outcome.size(), params.intercept);
  if (params.slopes.size() > 0) eta += design.predictors * params.slopes;
  if (params.group_intercepts.size() > 0) {
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      eta[i] += params.group_intercepts[design.group_index[static_cast<std::size_t>(i)]];
    }
  }
  return eta;
}

inline double bernoulli_loglik(const Eigen::VectorXd& y, const Eigen::VectorXd& eta) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) ll += y[i] * eta[i] - log1pexp(eta[i]);
  return ll;
}

}  // namespace detail

// Quasi-log-likelihood with the Laplace-style random-intercept penalty and the
// L1 slope penalty. Intercepts (fixed and per-group) are never penalized by
// lambda; group intercepts are shrunk only through the variance term.
inline double penalized_quasi_loglik(const CenteredDesign& design,
                                     const ParameterSet& params, double lambda) {
  if (params.slopes.size() != design.predictors.cols()) {
    throw ContractError("penalized_quasi_loglik: slope count mismatch");
  }
  const Eigen::Index n_groups_param = params.group_intercepts.size();
  if (n_groups_param > 0 && params.variance <= 0.0 &&
      params.group_intercepts.cwiseAbs().maxCoeff() > 0.0) {
    throw std::domain_error("penalized_quasi_loglik: zero variance with nonzero group intercepts");
  }
  Eigen::VectorXd eta = detail::linear_predictors(design, params);
  double ll = detail::bernoulli_loglik(design.outcome, eta);
  if (n_groups_param > 0 && params.variance > 0.0) {
    ll -= 0.5 * params.group_intercepts.squaredNorm() / params.variance;
  }
  if (params.slopes.size() > 0) ll -= lambda * params.slopes.cwiseAbs().sum();
  return ll;
}

// Subgradient of the penalized objective in the order
// [intercept, slopes..., group_intercepts...]. At an inactive slope the L1
// subgradient is clamped toward zero (soft-threshold direction), so slopes at
// zero stay exactly zero unless their score exceeds lambda.
inline Eigen::VectorXd penalized_score(const CenteredDesign& design,
                                       const ParameterSet& params, double lambda) {
  const Eigen::Index n = design.outcome.size();
  const Eigen::Index p = design.predictors.cols();
  const Eigen::Index g_count = params.group_intercepts.size();

  Eigen::VectorXd eta = detail::linear_predictors(design, params);
  Eigen::VectorXd resid(n);
  for (Eigen::Index i = 0; i < n; ++i) resid[i] = design.outcome[i] - sigmoid(eta[i]);

  Eigen::VectorXd score(1 + p + g_count);
  score[0] = resid.sum();
  for (Eigen::Index j = 0; j < p; ++j) {
    double raw = design.predictors.col(j).dot(resid);
    double beta_j = params.slopes[j];
    if (beta_j != 0.0) {
      score[1 + j] = raw - lambda * (beta_j > 0.0 ? 1.0 : -1.0);
    } else {
      double excess = std::abs(raw) - lambda;
      score[1 + j] = excess > 0.0 ? (raw > 0.0 ? excess : -excess) : 0.0;
    }
  }
  if (g_count > 0) {
    Eigen::VectorXd group_sums = Eigen::VectorXd::Zero(g_count);
    for (Eigen::Index i = 0; i < n; ++i) {
      group_sums[design.group_index[static_cast<std::size_t>(i)]] += resid[i];
    }
    score.tail(g_count) = group_sums - params.group_intercepts / params.variance;
  }
  return score;
}

// EBIC with the model-space term read as a binomial coefficient:
// -2*loglik + |M| ln(n) + 2 gamma ln C(p, |M|).
inline double ebic(double loglik, int active_count, int n_obs, int p_total, double gamma) {
  if (active_count < 0 || active_count > p_total) {
    throw ContractError("ebic: active_count outside [0, p_total]");
  }
  if (n_obs < 1) throw ContractError("ebic: n_obs must be positive");
  double model_space = std::lgamma(static_cast<double>(p_total) + 1.0) -
                       std::lgamma(static_cast<double>(active_count) + 1.0) -
                       std::lgamma(static_cast<double>(p_total - active_count) + 1.0);
  return -2.0 * loglik + active_count * std::log(static_cast<double>(n_obs)) + 2.0 * gamma * model_space;
}

namespace detail {

struct OptimizerState {
  double intercept = 0.0;
  Eigen::VectorXd slopes;
  Eigen::VectorXd group_intercepts;
  double variance = 0.0;
  Eigen::VectorXd eta;
};

// One penalized fit at a fixed lambda, warm-started from `st`. Penalized
// gradient ascent with the quadratic-approximation step and Armijo
// backtracking; slopes that would cross zero are projected onto zero. The
// score is Jacobi-preconditioned (per-coordinate curvature) so that a floored
// variance cannot throttle the step for the fixed effects. For multilevel
// fits the variance alternates in blocks: ascend delta to tolerance at the
// current variance, then take a method-of-moments step Q = mean(b^2).
inline FitResult fit_one(const RegressionSpec& spec, const CenteredDesign& design,
                         OptimizerState& st, double lambda) {
  constexpr double kArmijo = 1e-4;
  constexpr int kMaxHalvings = 30;
  constexpr int kMaxOuter = 60;

  const Eigen::Index n = design.outcome.size();
  const Eigen::Index p = design.predictors.cols();
  const Eigen::Index g_count = spec.multilevel ? design.n_groups : 0;
  const Eigen::VectorXd& y = design.outcome;

  st.eta = Eigen::VectorXd::Constant(n, st.intercept);
  if (p > 0) st.eta += design.predictors * st.slopes;
  for (Eigen::Index i = 0; i < n && g_count > 0; ++i) {
    st.eta[i] += st.group_intercepts[design.group_index[static_cast<std::size_t>(i)]];
  }

  auto objective_at = [&](const Eigen::VectorXd& eta, const Eigen::VectorXd& slopes,
                          const Eigen::VectorXd& b, double q) {
    double val = bernoulli_loglik(y, eta);
    if (g_count > 0) val -= 0.5 * b.squaredNorm() / q;
    if (p > 0) val -= lambda * slopes.cwiseAbs().sum();
    return val;
  };

  double obj = objective_at(st.eta, st.slopes, st.group_intercepts, st.variance);
  FitResult result;
  result.lambda = lambda;
  if (spec.record_objective_trace) result.objective_trace.push_back(obj);

  int steps = 0;
  bool inner_converged = false;
  bool stalled = false;
  bool converged = false;

  Eigen::VectorXd resid(n), direction_x(n);

  Eigen::VectorXd weights(n);

  for (int outer = 0; outer < kMaxOuter; ++outer) {
    inner_converged = false;
    while (steps < spec.max_iter) {
      for (Eigen::Index i = 0; i < n; ++i) {
        double mu = sigmoid(st.eta[i]);
        resid[i] = y[i] - mu;
        weights[i] = mu * (1.0 - mu);
      }

      // Clamped subgradient of the penalized objective.
      double g_intercept = resid.sum();
      Eigen::VectorXd g_slopes(p);
      for (Eigen::Index j = 0; j < p; ++j) {
        double raw = design.predictors.col(j).dot(resid);
        double beta_j = st.slopes[j];
        if (beta_j != 0.0) {
          g_slopes[j] = raw - lambda * (beta_j > 0.0 ? 1.0 : -1.0);
        } else {
          double excess = std::abs(raw) - lambda;
          g_slopes[j] = excess > 0.0 ? (raw > 0.0 ? excess : -excess) : 0.0;
        }
      }
      Eigen::VectorXd g_groups(g_count);
      Eigen::VectorXd group_weight(g_count);
      if (g_count > 0) {
        g_groups.setZero();
        group_weight.setZero();
        for (Eigen::Index i = 0; i < n; ++i) {
          int g = design.group_index[static_cast<std::size_t>(i)];
          g_groups[g] += resid[i];
          group_weight[g] += weights[i];
        }
        g_groups -= st.group_intercepts / st.variance;
      }

      // Jacobi preconditioning: divide each score entry by its own curvature.
      const double weight_sum = weights.sum();
      double d_intercept = g_intercept / std::max(weight_sum, 1e-10);
      Eigen::VectorXd d_slopes(p);
      for (Eigen::Index j = 0; j < p; ++j) {
        double curv_j = design.predictors.col(j).array().square().matrix().dot(weights);
        d_slopes[j] = g_slopes[j] / std::max(curv_j, 1e-10);
      }
      Eigen::VectorXd d_groups(g_count);
      for (Eigen::Index g = 0; g < g_count; ++g) {
        d_groups[g] = g_groups[g] / std::max(group_weight[g] + 1.0 / st.variance, 1e-10);
      }

      double ascent = g_intercept * d_intercept + g_slopes.dot(d_slopes) +
                      (g_count > 0 ? g_groups.dot(d_groups) : 0.0);
      if (ascent < 1e-20) {
        inner_converged = true;
        break;
      }

      // Curvature of the objective along the ascent direction sizes the step.
      direction_x.setConstant(d_intercept);
      if (p > 0) direction_x += design.predictors * d_slopes;
      if (g_count > 0) {
        for (Eigen::Index i = 0; i < n; ++i) {
          direction_x[i] += d_groups[design.group_index[static_cast<std::size_t>(i)]];
        }
      }
      double curvature = direction_x.array().square().matrix().dot(weights);
      if (g_count > 0) curvature += d_groups.squaredNorm() / st.variance;

      double step = 1.0;
      if (std::isfinite(curvature) && curvature > 0.0) step = std::min(1.0, ascent / curvature);

      bool accepted = false;
      double rel_change = 0.0;
      for (int halving = 0; halving <= kMaxHalvings; ++halving, step *= 0.5) {
        double c_intercept = st.intercept + step * d_intercept;
        Eigen::VectorXd c_slopes = st.slopes + step * d_slopes;
        Eigen::VectorXd c_eta = st.eta + step * direction_x;
        // Project slopes that crossed zero back onto zero, fixing eta to match.
        for (Eigen::Index j = 0; j < p; ++j) {
          if (st.slopes[j] != 0.0 && c_slopes[j] * st.slopes[j] < 0.0) {
            c_eta -= c_slopes[j] * design.predictors.col(j);
            c_slopes[j] = 0.0;
          }
        }
        Eigen::VectorXd c_groups = g_count > 0 ? Eigen::VectorXd(st.group_intercepts + step * d_groups)
                                               : st.group_intercepts;
        double c_obj = objective_at(c_eta, c_slopes, c_groups, st.variance);
        if (c_obj >= obj + kArmijo * step * ascent) {
          rel_change = std::abs(c_intercept - st.intercept) / std::max(1.0, std::abs(st.intercept));
          for (Eigen::Index j = 0; j < p; ++j) {
            rel_change = std::max(rel_change,
                                  std::abs(c_slopes[j] - st.slopes[j]) / std::max(1.0, std::abs(st.slopes[j])));
          }
          for (Eigen::Index g = 0; g < g_count; ++g) {
            rel_change = std::max(rel_change, std::abs(c_groups[g] - st.group_intercepts[g]) /
                                                  std::max(1.0, std::abs(st.group_intercepts[g])));
          }
          st.intercept = c_intercept;
          st.slopes = std::move(c_slopes);
          st.group_intercepts = std::move(c_groups);
          st.eta = std::move(c_eta);
          obj = c_obj;
          accepted = true;
          break;
        }
      }
      if (!accepted) {
        stalled = true;  // no ascent possible at machine precision
        break;
      }
      ++steps;
      if (spec.record_objective_trace) result.objective_trace.push_back(obj);
      if (rel_change < spec.tol) {
        inner_converged = true;
        break;
      }
    }

    if (g_count == 0) {
      converged = inner_converged || stalled;
      break;
    }

    double q_new = std::max(st.group_intercepts.squaredNorm() / static_cast<double>(g_count), kVarianceFloor);
    double q_rel = std::abs(q_new - st.variance) / std::max(1.0, st.variance);
    obj += 0.5 * st.group_intercepts.squaredNorm() * (1.0 / st.variance - 1.0 / q_new);
    st.variance = q_new;
    if ((inner_converged || stalled) && q_rel < spec.tol) {
      converged = true;
      break;
    }
    if (steps >= spec.max_iter) break;
    stalled = false;  // the variance moved; retry the ascent at the new value
  }

  result.params.intercept = st.intercept;
  result.params.slopes = st.slopes;
  result.params.group_intercepts = g_count > 0 ? st.group_intercepts : Eigen::VectorXd();
  result.params.variance = g_count > 0 ? st.variance : 0.0;
  result.penalized_loglik = obj;
  result.quasi_loglik = obj + (p > 0 ? lambda * st.slopes.cwiseAbs().sum() : 0.0);
  result.converged = converged;
  result.iterations = steps;
  result.active_count = 0;
  for (Eigen::Index j = 0; j < p; ++j) {
    if (std::abs(st.slopes[j]) > kNumericalZero) ++result.active_count;
  }
  int extreme = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(st.eta[i]) > 30.0) ++extreme;
  }
  result.separation = extreme * 10 > n;
  // EBIC compares models across lambda, so it scores the quasi-log-likelihood
  // (the L1 term would make the criterion lambda-dependent).
  result.ebic = ebic(result.quasi_loglik, result.active_count, static_cast<int>(n),
                     static_cast<int>(p), spec.gamma);
  return result;
}

inline OptimizerState initial_state(const RegressionSpec& spec, const CenteredDesign& design) {
  OptimizerState st;
  double mean = design.outcome.mean();
  mean = std::min(std::max(mean, 1e-6), 1.0 - 1e-6);
  st.intercept = logit(mean);
  st.slopes = Eigen::VectorXd::Zero(design.predictors.cols());
  if (spec.multilevel) {
    st.group_intercepts = Eigen::VectorXd::Zero(design.n_groups);
    st.variance = 1.0;
  }
  return st;
}

}  // namespace detail

// Fits the whole descending lambda path, warm-starting each fit from the
// previous solution. Non-converged fits are returned flagged, not dropped.
inline std::vector<FitResult> fit_path(const RegressionSpec& spec, const CenteredDesign& design) {
  if (spec.lambda_grid.empty()) throw ConfigError("fit_path: empty lambda grid");
  for (std::size_t i = 0; i < spec.lambda_grid.size(); ++i) {
    if (!(spec.lambda_grid[i] > 0.0)) throw ConfigError("fit_path: lambda values must be positive");
    if (i > 0 && !(spec.lambda_grid[i] < spec.lambda_grid[i - 1])) {
      throw ConfigError("fit_path: lambda grid must be strictly descending");
    }
  }
  if (design.outcome.size() < 2) throw DataError("fit_path: need at least 2 observations");
  if (spec.multilevel && design.n_groups < 1) throw ContractError("fit_path: invalid group count");

  detail::OptimizerState state = detail::initial_state(spec, design);
  std::vector<FitResult> path;
  path.reserve(spec.lambda_grid.size());
  for (double lambda : spec.lambda_grid) {
    path.push_back(detail::fit_one(spec, design, state, lambda));
  }
  return path;
}

// Smallest lambda at which every slope stays at zero, from the score of the
// null (intercept-only, plus group intercepts when multilevel) model.
inline double lambda_max(const CenteredDesign& design, bool multilevel) {
  RegressionSpec null_spec;
  null_spec.multilevel = multilevel;
  null_spec.lambda_grid = {1e300};
  null_spec.max_iter = 500;
  null_spec.tol = 1e-8;
  detail::OptimizerState st = detail::initial_state(null_spec, design);
  FitResult null_fit = detail::fit_one(null_spec, design, st, 1e300);

  Eigen::VectorXd eta = detail::linear_predictors(design, null_fit.params);
  double best = 0.0;
  Eigen::VectorXd resid(design.outcome.size());
  for (Eigen::Index i = 0; i < resid.size(); ++i) resid[i] = design.outcome[i] - sigmoid(eta[i]);
  for (Eigen::Index j = 0; j < design.predictors.cols(); ++j) {
    best = std::max(best, std::abs(design.predictors.col(j).dot(resid)));
  }
  return std::max(best, 1e-8);
}

inline std::vector<double> make_lambda_grid(double lambda_hi, int count = 50, double min_ratio = 0.01) {
  if (count < 1) throw ConfigError("lambda grid needs at least 1 value");
  if (!(lambda_hi > 0.0)) throw ConfigError("lambda grid upper end must be positive");
  if (!(min_ratio > 0.0 && min_ratio < 1.0)) throw ConfigError("lambda min ratio must lie in (0,1)");
  std::vector<double> grid;
  grid.reserve(static_cast<std::size_t>(count));
  if (count == 1) {
    grid.push_back(lambda_hi);
    return grid;
  }
  for (int i = 0; i < count; ++i) {
    grid.push_back(lambda_hi * std::pow(min_ratio, static_cast<double>(i) / static_cast<double>(count - 1)));
  }
  return grid;
}

// Converged fit with minimal EBIC; ties resolve toward larger lambda, i.e.
// the sparser model earlier on the descending path.
inline const FitResult& select_best(const std::vector<FitResult>& path) {
  if (path.empty()) throw ContractError("select_best: empty path");
  int best = -1;
  for (int i = 0; i < static_cast<int>(path.size()); ++i) {
    const auto& fit = path[static_cast<std::size_t>(i)];
    if (!fit.converged) continue;
    if (best < 0 || fit.ebic < path[static_cast<std::size_t>(best)].ebic) best = i;
  }
  if (best < 0) throw EstimationError("no converged fit on the regularization path");
  return path[static_cast<std::size_t>(best)];
}

inline double icc_from_variance(double variance) {
  return variance / (variance + kLatentResidualVar);
}

// Latent-scale intraclass correlation: intercept-only multilevel fit for the
// node, then Q / (Q + pi^2/3).
inline double compute_icc(const BinaryDataset& data, const std::string& node,
                          int max_iter = 2000, double tol = 1e-6) {
  if (data.group_names.size() < 2) throw ConfigError("compute_icc: need at least 2 groups");
  const int col = find_node(data.node_names, node);

  CenteredDesign design;
  design.outcome_node = node;
  design.outcome = data.responses.col(col).cast<double>();
  design.predictors.resize(data.responses.rows(), 0);
  design.group_index = data.group_index;
  design.n_groups = static_cast<int>(data.group_names.size());

  RegressionSpec spec;
  spec.multilevel = true;
  spec.lambda_grid = {1e-3};
  spec.max_iter = max_iter;
  spec.tol = tol;
  FitResult fit = fit_path(spec, design).front();
  if (!fit.converged) {
    throw EstimationError("compute_icc: intercept-only fit for node '" + node + "' did not converge after " +
                          std::to_string(fit.iterations) + " iterations");
  }
  return icc_from_variance(fit.params.variance);
}

}  // namespace mlnira
