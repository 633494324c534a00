#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <string>

#include "mlnira/network.hpp"
#include "mlnira/rng.hpp"

namespace mlnira {

// burn_in and thin of 0 resolve to the defaults 10*M and M at run time.
struct SamplerConfig {
  double beta = 1.0;  // inverse temperature
  int burn_in = 0;
  int thin = 0;
  int n_samples = 5000;
  std::uint64_t seed = 1;
};

inline int resolved_burn_in(const SamplerConfig& cfg, int nodes) {
  return cfg.burn_in > 0 ? cfg.burn_in : 10 * nodes;
}
inline int resolved_thin(const SamplerConfig& cfg, int nodes) {
  return cfg.thin > 0 ? cfg.thin : nodes;
}

// State vectors hold exact 0.0/1.0 entries.
using StateVector = Eigen::VectorXd;

// H(s) = -1/2 s'Ws - theta's  over s in {0,1}^M.
inline double energy(const Eigen::Ref<const StateVector>& s,
                     const Eigen::Ref<const Eigen::MatrixXd>& weights,
                     const Eigen::Ref<const Eigen::VectorXd>& theta) {
  if (weights.rows() != s.size() || weights.cols() != s.size() || theta.size() != s.size()) {
    throw ContractError("energy: shape mismatch");
  }
  return -0.5 * s.dot(weights * s) - theta.dot(s);
}

// Energy change of flipping node k, in O(M) via the local form.
inline double delta_energy(const Eigen::Ref<const StateVector>& s, int k,
                           const Eigen::Ref<const Eigen::MatrixXd>& weights,
                           const Eigen::Ref<const Eigen::VectorXd>& theta) {
  return (2.0 * s[k] - 1.0) * (weights.row(k).dot(s) + theta[k]);
}

inline double acceptance_probability(double delta_h, double beta) {
  return std::min(1.0, std::exp(-beta * delta_h));
}

// One single-site update: pick a node uniformly, propose the flip, accept
// with min{1, exp(-beta dH)}. Exactly one draw for the node and one for the
// accept decision, so trajectories are reproducible draw-for-draw.
inline void mh_step(StateVector& s, const Eigen::Ref<const Eigen::MatrixXd>& weights,
                    const Eigen::Ref<const Eigen::VectorXd>& theta, double beta, Rng& rng) {
  const int k = rng.uniform_int(static_cast<int>(s.size()));
  const double dh = delta_energy(s, k, weights, theta);
  const double u = rng.uniform01();
  if (u <= acceptance_probability(dh, beta)) s[k] = 1.0 - s[k];
}

struct SampleProvenance {
  std::uint64_t model_hash = 0;
  std::string level;
  std::uint64_t seed = 0;
  SamplerConfig config;
};

struct SampleMatrix {
  Eigen::MatrixXi rows;  // n_samples x M, entries in {0,1}
  std::vector<std::string> node_names;
  SampleProvenance provenance;
};

namespace detail {

// Chain driver shared by generate_sample and the synthetic generator.
inline Eigen::MatrixXi run_chain(const Eigen::MatrixXd& weights, const Eigen::VectorXd& theta,
                                 double beta, int burn_in, int thin, int n_samples, Rng& rng) {
  const int m = static_cast<int>(theta.size());
  StateVector s(m);
  for (int j = 0; j < m; ++j) s[j] = rng.uniform01() < 0.5 ? 1.0 : 0.0;
  for (int step = 0; step < burn_in; ++step) mh_step(s, weights, theta, beta, rng);

  Eigen::MatrixXi out(n_samples, m);
  for (int row = 0; row < n_samples; ++row) {
    for (int step = 0; step < thin; ++step) mh_step(s, weights, theta, beta, rng);
    for (int j = 0; j < m; ++j) out(row, j) = s[j] > 0.5 ? 1 : 0;
  }
  return out;
}

}  // namespace detail

// Simulates a population from the model at the requested threshold level.
// NIRA passes its shifted threshold vectors through theta_override.
inline SampleMatrix generate_sample(const NetworkModel& model, ThresholdLevel level,
                                    const SamplerConfig& cfg,
                                    const std::optional<Eigen::VectorXd>& theta_override = {},
                                    ThresholdMode mode = ThresholdMode::Total) {
  if (cfg.n_samples < 1) throw ConfigError("generate_sample: n_samples must be >= 1");
  if (!(cfg.beta > 0.0)) throw ConfigError("generate_sample: beta must be positive");
  const int m = model.node_count();
  Eigen::VectorXd theta;
  if (theta_override) {
    if (theta_override->size() != m) throw ContractError("generate_sample: theta override length mismatch");
    theta = *theta_override;
  } else {
    theta = effective_thresholds(model, level, mode);
  }

  Rng rng(cfg.seed);
  SampleMatrix samples;
  samples.rows = detail::run_chain(model.weights, theta, cfg.beta, resolved_burn_in(cfg, m),
                                   resolved_thin(cfg, m), cfg.n_samples, rng);
  samples.node_names = model.node_names;
  samples.provenance = SampleProvenance{model_hash(model), level_label(model, level), cfg.seed, cfg};
  return samples;
}

// Full enumeration of pi(s) = exp(-beta H(s)) / Z; the sampler's test oracle.
// State index i encodes the configuration bitwise: node j active iff bit j.
inline Eigen::VectorXd exact_distribution(const Eigen::Ref<const Eigen::MatrixXd>& weights,
                                          const Eigen::Ref<const Eigen::VectorXd>& theta, double beta) {
  const int m = static_cast<int>(theta.size());
  if (m > 15) throw ConfigError("exact_distribution: enumeration supports at most 15 nodes");
  if (weights.rows() != m || weights.cols() != m) throw ContractError("exact_distribution: shape mismatch");
  const int n_states = 1 << m;

  Eigen::VectorXd log_weights(n_states);
  StateVector s(m);
  for (int idx = 0; idx < n_states; ++idx) {
    for (int j = 0; j < m; ++j) s[j] = (idx >> j) & 1 ? 1.0 : 0.0;
    log_weights[idx] = -beta * energy(s, weights, theta);
  }
  double shift = log_weights.maxCoeff();
  Eigen::VectorXd probs = (log_weights.array() - shift).exp();
  probs /= probs.sum();
  return probs;
}

inline std::string samples_to_csv(const SampleMatrix& samples) {
  std::string out = csv_row(samples.node_names);
  for (Eigen::Index r = 0; r < samples.rows.rows(); ++r) {
    std::vector<std::string> fields;
    fields.reserve(static_cast<std::size_t>(samples.rows.cols()));
    for (Eigen::Index c = 0; c < samples.rows.cols(); ++c) {
      fields.push_back(std::to_string(samples.rows(r, c)));
    }
    out += csv_row(fields);
  }
  return out;
}

}  // namespace mlnira
