#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "mlnira/data.hpp"
#include "mlnira/sampler.hpp"

namespace mlnira {

// Ground-truth parameters for a nested Ising population.
struct GeneratorSpec {
  std::vector<std::string> node_names;  // empty = X1..XM
  int group_count = 1;
  int rows_per_group = 100;
  Eigen::MatrixXd weights;              // symmetric, zero diagonal
  Eigen::VectorXd tau;                  // fixed thresholds
  double group_intercept_sd = 0.0;
  double beta = 1.0;
  std::uint64_t seed = 1;
};

struct SyntheticData {
  BinaryDataset data;
  Eigen::MatrixXd true_group_intercepts;  // M x G, the drawn offsets
};

namespace detail {

inline void validate_generator(const GeneratorSpec& spec) {
  const Eigen::Index m = spec.tau.size();
  if (m < 1) throw ConfigError("generator: need at least one node");
  if (spec.weights.rows() != m || spec.weights.cols() != m) {
    throw ConfigError("generator: weight matrix shape must match tau");
  }
  for (Eigen::Index j = 0; j < m; ++j) {
    if (spec.weights(j, j) != 0.0) throw ConfigError("generator: weight diagonal must be zero");
    for (Eigen::Index k = j + 1; k < m; ++k) {
      if (spec.weights(j, k) != spec.weights(k, j)) throw ConfigError("generator: weights must be symmetric");
    }
  }
  if (spec.group_count < 1) throw ConfigError("generator: need at least one group");
  if (spec.rows_per_group < 1) throw ConfigError("generator: rows_per_group must be >= 1");
  if (spec.group_intercept_sd < 0.0) throw ConfigError("generator: group intercept sd must be >= 0");
  if (!(spec.beta > 0.0)) throw ConfigError("generator: beta must be positive");
  if (!spec.node_names.empty() && static_cast<Eigen::Index>(spec.node_names.size()) != m) {
    throw ConfigError("generator: node name count mismatch");
  }
}

inline std::string padded_label(const char* prefix, int index, int total) {
  int digits = 1;
  for (int v = total; v >= 10; v /= 10) ++digits;
  std::string num = std::to_string(index + 1);
  while (static_cast<int>(num.size()) < digits) num.insert(num.begin(), '0');
  return prefix + num;
}

}  // namespace detail

// Independent rows drawn straight from the enumerated distribution; used for
// small systems where the chain is unnecessary.
inline Eigen::MatrixXi exact_sample(const Eigen::MatrixXd& weights, const Eigen::VectorXd& theta,
                                    double beta, int n_rows, Rng& rng) {
  const int m = static_cast<int>(theta.size());
  Eigen::VectorXd probs = exact_distribution(weights, theta, beta);
  Eigen::VectorXd cumulative(probs.size());
  double acc = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    cumulative[i] = acc;
  }
  Eigen::MatrixXi rows(n_rows, m);
  for (int r = 0; r < n_rows; ++r) {
    double u = rng.uniform01();
    int idx = 0;
    while (idx + 1 < cumulative.size() && u > cumulative[idx]) ++idx;
    for (int j = 0; j < m; ++j) rows(r, j) = (idx >> j) & 1;
  }
  return rows;
}

// Draws group offsets b ~ N(0, sd^2) per node and group, then samples each
// group's rows at theta = tau + b[:,g]. Small systems sample exactly; larger
// ones run the chain with the default burn-in and thinning. Group g uses
// stream g+1 of the seed, so generation parallelizes reproducibly.
inline SyntheticData synth_generate(const GeneratorSpec& spec) {
  detail::validate_generator(spec);
  const int m = static_cast<int>(spec.tau.size());
  const int g_count = spec.group_count;

  std::vector<std::string> node_names = spec.node_names;
  if (node_names.empty()) {
    for (int j = 0; j < m; ++j) node_names.push_back(detail::padded_label("X", j, m));
  }

  Rng offset_rng(stream_seed(spec.seed, 0));
  Eigen::MatrixXd offsets(m, g_count);
  for (int g = 0; g < g_count; ++g) {
    for (int j = 0; j < m; ++j) offsets(j, g) = offset_rng.normal(0.0, spec.group_intercept_sd);
  }

  Eigen::MatrixXi responses(static_cast<Eigen::Index>(g_count) * spec.rows_per_group, m);
  std::vector<std::string> group_ids(static_cast<std::size_t>(responses.rows()));
  std::vector<Eigen::MatrixXi> blocks(static_cast<std::size_t>(g_count));
  parallel_for(g_count, 0, [&](int g) {
    Rng rng(stream_seed(spec.seed, static_cast<std::uint64_t>(g) + 1));
    Eigen::VectorXd theta = spec.tau + offsets.col(g);
    if (m <= 15) {
      blocks[static_cast<std::size_t>(g)] = exact_sample(spec.weights, theta, spec.beta, spec.rows_per_group, rng);
    } else {
      blocks[static_cast<std::size_t>(g)] =
          detail::run_chain(spec.weights, theta, spec.beta, 10 * m, m, spec.rows_per_group, rng);
    }
  });
  for (int g = 0; g < g_count; ++g) {
    std::string label = detail::padded_label("g", g, g_count);
    responses.middleRows(static_cast<Eigen::Index>(g) * spec.rows_per_group, spec.rows_per_group) =
        blocks[static_cast<std::size_t>(g)];
    for (int r = 0; r < spec.rows_per_group; ++r) {
      group_ids[static_cast<std::size_t>(g) * spec.rows_per_group + static_cast<std::size_t>(r)] = label;
    }
  }

  SyntheticData out;
  out.data = make_binary_dataset(std::move(node_names), std::move(group_ids), std::move(responses));
  out.true_group_intercepts = offsets;
  return out;
}

// ---------------------------------------------------------------------------
// Independent references used by the test suites
// ---------------------------------------------------------------------------

struct IrlsFit {
  Eigen::VectorXd coefficients;  // intercept first, then slopes
  bool converged = false;
  bool separation = false;
  int iterations = 0;
};

// Unpenalized single-level logistic MLE by iteratively reweighted least
// squares. Deliberately a different algorithm from the penalized ascent path
// it serves as an oracle for.
inline IrlsFit reference_logistic_fit(const CenteredDesign& design, int max_iter = 60, double tol = 1e-10) {
  const Eigen::Index n = design.outcome.size();
  const Eigen::Index p = design.predictors.cols();
  Eigen::MatrixXd x(n, p + 1);
  x.col(0).setOnes();
  if (p > 0) x.rightCols(p) = design.predictors;

  IrlsFit fit;
  fit.coefficients = Eigen::VectorXd::Zero(p + 1);
  Eigen::VectorXd eta(n), mu(n), working(n);
  for (int iter = 0; iter < max_iter; ++iter) {
    fit.iterations = iter + 1;
    eta = x * fit.coefficients;
    Eigen::MatrixXd weighted = x;
    for (Eigen::Index i = 0; i < n; ++i) {
      mu[i] = sigmoid(eta[i]);
      double w = std::max(mu[i] * (1.0 - mu[i]), 1e-12);
      weighted.row(i) *= w;
      working[i] = design.outcome[i] - mu[i];
    }
    Eigen::VectorXd step = (x.transpose() * weighted).ldlt().solve(x.transpose() * working);
    fit.coefficients += step;
    if (step.cwiseAbs().maxCoeff() < tol) {
      fit.converged = true;
      break;
    }
  }
  eta = x * fit.coefficients;
  fit.separation = eta.cwiseAbs().maxCoeff() > 30.0;
  return fit;
}

// Expected total score over the scored nodes under the exact distribution.
inline double exact_mean_total(const Eigen::MatrixXd& weights, const Eigen::VectorXd& theta, double beta,
                               const std::vector<int>& scored_nodes) {
  Eigen::VectorXd probs = exact_distribution(weights, theta, beta);
  double mean = 0.0;
  for (Eigen::Index idx = 0; idx < probs.size(); ++idx) {
    int score = 0;
    for (int node : scored_nodes) score += (static_cast<int>(idx) >> node) & 1;
    mean += probs[idx] * score;
  }
  return mean;
}

// ---------------------------------------------------------------------------
// Generator spec I/O and the bundled default population
// ---------------------------------------------------------------------------

inline GeneratorSpec generator_spec_from_json(const nlohmann::json& j) {
  GeneratorSpec spec;
  if (j.contains("node_names")) spec.node_names = j.at("node_names").get<std::vector<std::string>>();
  spec.group_count = j.at("group_count").get<int>();
  spec.rows_per_group = j.at("rows_per_group").get<int>();
  spec.weights = detail::matrix_from_json(j.at("weights"));
  spec.tau = detail::vector_from_json(j.at("tau"));
  if (j.contains("group_intercept_sd")) spec.group_intercept_sd = j.at("group_intercept_sd").get<double>();
  if (j.contains("beta")) spec.beta = j.at("beta").get<double>();
  if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
  detail::validate_generator(spec);
  return spec;
}

inline nlohmann::json generator_spec_to_json(const GeneratorSpec& spec) {
  nlohmann::json j;
  if (!spec.node_names.empty()) j["node_names"] = spec.node_names;
  j["group_count"] = spec.group_count;
  j["rows_per_group"] = spec.rows_per_group;
  j["weights"] = detail::matrix_to_json(spec.weights);
  j["tau"] = detail::vector_to_json(spec.tau);
  j["group_intercept_sd"] = spec.group_intercept_sd;
  j["beta"] = spec.beta;
  j["seed"] = spec.seed;
  return j;
}

// Seven nodes in 32 groups of 125 rows: a ring with one cross-link, varied
// negative thresholds, and a moderate between-group intercept spread.
inline GeneratorSpec default_generator_spec() {
  GeneratorSpec spec;
  spec.group_count = 32;
  spec.rows_per_group = 125;
  spec.group_intercept_sd = 0.8;
  spec.seed = 20230620;
  const int m = 7;
  spec.weights = Eigen::MatrixXd::Zero(m, m);
  auto link = [&](int a, int b, double w) {
    spec.weights(a, b) = w;
    spec.weights(b, a) = w;
  };
  link(0, 1, 1.1);
  link(1, 2, 0.9);
  link(2, 3, 1.0);
  link(3, 4, 0.8);
  link(4, 5, 1.2);
  link(5, 6, 0.9);
  link(0, 4, 0.7);
  spec.tau.resize(m);
  spec.tau << -1.6, -1.2, -1.9, -1.4, -1.1, -1.7, -1.3;
  return spec;
}

}  // namespace mlnira
