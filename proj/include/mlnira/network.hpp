#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "mlnira/regression.hpp"

namespace mlnira {

enum class EdgeRule { And, Or };
enum class ThresholdMode { Total, RandomOnly };

inline std::string to_string(EdgeRule rule) { return rule == EdgeRule::And ? "AND" : "OR"; }
inline EdgeRule edge_rule_from_string(const std::string& s) {
  if (s == "AND" || s == "and") return EdgeRule::And;
  if (s == "OR" || s == "or") return EdgeRule::Or;
  throw ConfigError("unknown edge rule '" + s + "' (expected AND or OR)");
}

// Estimated Ising network: symmetric weights, one fixed threshold per node,
// and (for multilevel fits) one random threshold per node and group.
struct NetworkModel {
  std::vector<std::string> node_names;
  Eigen::MatrixXd weights;             // M x M, symmetric, zero diagonal
  Eigen::VectorXd fixed_thresholds;    // length M
  Eigen::MatrixXd random_thresholds;   // M x G; zero columns when single-level
  std::vector<std::string> group_names;
  EdgeRule rule = EdgeRule::And;
  double beta_inverse_temperature = 1.0;
  Eigen::VectorXd per_node_ebic;
  int format_version = 1;

  int node_count() const { return static_cast<int>(node_names.size()); }
  int group_count() const { return static_cast<int>(group_names.size()); }
};

// Threshold level selector: the population-average thresholds or one group's.
struct ThresholdLevel {
  int group = -1;  // -1 = fixed level

  static ThresholdLevel fixed() { return ThresholdLevel{}; }
  static ThresholdLevel group_level(int index) { return ThresholdLevel{index}; }
  bool is_fixed() const { return group < 0; }
};

inline int group_index_of(const NetworkModel& model, const std::string& name) {
  for (int g = 0; g < model.group_count(); ++g) {
    if (model.group_names[static_cast<std::size_t>(g)] == name) return g;
  }
  throw ConfigError("unknown group '" + name + "'");
}

inline ThresholdLevel parse_level(const NetworkModel& model, const std::string& label) {
  if (label.empty() || label == "fixed") return ThresholdLevel::fixed();
  return ThresholdLevel::group_level(group_index_of(model, label));
}

inline std::string level_label(const NetworkModel& model, ThresholdLevel level) {
  if (level.is_fixed()) return "fixed";
  return model.group_names[static_cast<std::size_t>(level.group)];
}

// Symmetrization of the two directed nodewise coefficients. AND keeps an edge
// only when both are nonzero; OR keeps the nonzero one and averages when both
// are present.
inline double combine_edges(double coef_jk, double coef_kj, EdgeRule rule) {
  const bool zero_jk = std::abs(coef_jk) < kNumericalZero;
  const bool zero_kj = std::abs(coef_kj) < kNumericalZero;
  if (rule == EdgeRule::And) {
    return (zero_jk || zero_kj) ? 0.0 : 0.5 * (coef_jk + coef_kj);
  }
  if (zero_jk && zero_kj) return 0.0;
  if (zero_jk) return coef_kj;
  if (zero_kj) return coef_jk;
  return 0.5 * (coef_jk + coef_kj);
}

// One selected nodewise regression, keyed by outcome node.
struct NodewiseFit {
  std::string outcome;
  std::vector<std::string> predictor_names;
  FitResult best;
};

// Pulls the fixed intercepts into the threshold vector and the per-group
// intercepts into the M x G threshold matrix (G = 0 for single-level fits).
inline std::pair<Eigen::VectorXd, Eigen::MatrixXd> extract_thresholds(const std::vector<NodewiseFit>& fits) {
  if (fits.empty()) throw ContractError("extract_thresholds: no fits");
  const int m = static_cast<int>(fits.size());
  const Eigen::Index g_count = fits.front().best.params.group_intercepts.size();
  Eigen::VectorXd tau(m);
  Eigen::MatrixXd random(m, g_count);
  for (int j = 0; j < m; ++j) {
    const auto& params = fits[static_cast<std::size_t>(j)].best.params;
    if (params.group_intercepts.size() != g_count) {
      throw ContractError("extract_thresholds: inconsistent group counts across fits");
    }
    tau[j] = params.intercept;
    if (g_count > 0) random.row(j) = params.group_intercepts.transpose();
  }
  return {tau, random};
}

inline double effective_threshold(const NetworkModel& model, int node, ThresholdLevel level,
                                  ThresholdMode mode = ThresholdMode::Total) {
  if (node < 0 || node >= model.node_count()) throw ContractError("effective_threshold: node out of range");
  if (level.is_fixed()) return model.fixed_thresholds[node];
  if (level.group >= model.group_count()) {
    throw ConfigError("effective_threshold: group index " + std::to_string(level.group) + " out of range");
  }
  double random_part = model.random_thresholds(node, level.group);
  return mode == ThresholdMode::Total ? model.fixed_thresholds[node] + random_part : random_part;
}

inline Eigen::VectorXd effective_thresholds(const NetworkModel& model, ThresholdLevel level,
                                            ThresholdMode mode = ThresholdMode::Total) {
  Eigen::VectorXd theta(model.node_count());
  for (int j = 0; j < model.node_count(); ++j) theta[j] = effective_threshold(model, j, level, mode);
  return theta;
}

struct IsingFitConfig {
  EdgeRule rule = EdgeRule::And;
  double gamma = 0.25;
  int lambda_count = 50;
  double lambda_min_ratio = 0.01;
  int max_iter = 500;
  double tol = 1e-5;
  int threads = 0;  // 0 = hardware concurrency
  double beta_inverse_temperature = 1.0;
};

namespace detail {

inline void check_fittable(const BinaryDataset& data, bool multilevel) {
  if (data.node_names.size() < 2) throw DataError("network estimation needs at least 2 nodes");
  if (multilevel && data.group_names.size() < 2) {
    throw ConfigError("multilevel estimation needs at least 2 groups");
  }
  for (int j = 0; j < static_cast<int>(data.node_names.size()); ++j) {
    int ones = data.responses.col(j).sum();
    if (ones == 0 || ones == data.responses.rows()) {
      throw EstimationError("node '" + data.node_names[static_cast<std::size_t>(j)] +
                            "': responses are constant, nodewise regression is degenerate");
    }
  }
}

inline NetworkModel fit_ising(const BinaryDataset& data, const IsingFitConfig& cfg, bool multilevel) {
  check_fittable(data, multilevel);
  const int m = static_cast<int>(data.node_names.size());

  std::vector<NodewiseFit> fits(static_cast<std::size_t>(m));
  parallel_for(m, cfg.threads, [&](int j) {
    const std::string& node = data.node_names[static_cast<std::size_t>(j)];
    try {
      CenteredDesign design = group_mean_center(data, node, /*pool_groups=*/!multilevel);
      RegressionSpec spec;
      spec.multilevel = multilevel;
      spec.gamma = cfg.gamma;
      spec.max_iter = cfg.max_iter;
      spec.tol = cfg.tol;
      spec.lambda_grid = make_lambda_grid(lambda_max(design, multilevel), cfg.lambda_count, cfg.lambda_min_ratio);
      std::vector<FitResult> path = fit_path(spec, design);
      NodewiseFit& slot = fits[static_cast<std::size_t>(j)];
      slot.outcome = node;
      slot.predictor_names = design.predictor_names;
      slot.best = select_best(path);
    } catch (const EstimationError& e) {
      throw EstimationError("node '" + node + "': " + e.what());
    }
  });

  // Directed coefficient matrix, then symmetrize under the configured rule.
  Eigen::MatrixXd directed = Eigen::MatrixXd::Zero(m, m);
  for (int j = 0; j < m; ++j) {
    const auto& fit = fits[static_cast<std::size_t>(j)];
    for (std::size_t c = 0; c < fit.predictor_names.size(); ++c) {
      int k = find_node(data.node_names, fit.predictor_names[c]);
      directed(j, k) = fit.best.params.slopes[static_cast<Eigen::Index>(c)];
    }
  }

  NetworkModel model;
  model.node_names = data.node_names;
  model.rule = cfg.rule;
  model.beta_inverse_temperature = cfg.beta_inverse_temperature;
  model.weights = Eigen::MatrixXd::Zero(m, m);
  for (int j = 0; j < m; ++j) {
    for (int k = j + 1; k < m; ++k) {
      double w = combine_edges(directed(j, k), directed(k, j), cfg.rule);
      model.weights(j, k) = w;
      model.weights(k, j) = w;
    }
  }
  auto [tau, random] = extract_thresholds(fits);
  model.fixed_thresholds = tau;
  model.random_thresholds = random;
  model.group_names = multilevel ? data.group_names : std::vector<std::string>{};
  model.per_node_ebic.resize(m);
  for (int j = 0; j < m; ++j) model.per_node_ebic[j] = fits[static_cast<std::size_t>(j)].best.ebic;
  return model;
}

}  // namespace detail

inline NetworkModel fit_multilevel_ising(const BinaryDataset& data, const IsingFitConfig& cfg = {}) {
  return detail::fit_ising(data, cfg, /*multilevel=*/true);
}

inline NetworkModel fit_single_ising(const BinaryDataset& data, const IsingFitConfig& cfg = {}) {
  return detail::fit_ising(data, cfg, /*multilevel=*/false);
}

// ---------------------------------------------------------------------------
// EBIC reporting
// ---------------------------------------------------------------------------

struct EbicTable {
  std::vector<std::string> node_names;
  std::vector<std::string> model_labels;
  Eigen::MatrixXd values;  // nodes x models
};

inline EbicTable ebic_report(const std::vector<const NetworkModel*>& models,
                             const std::vector<std::string>& labels = {}) {
  if (models.empty()) throw ContractError("ebic_report: no models");
  EbicTable table;
  table.node_names = models.front()->node_names;
  table.values.resize(static_cast<Eigen::Index>(table.node_names.size()),
                      static_cast<Eigen::Index>(models.size()));
  for (std::size_t c = 0; c < models.size(); ++c) {
    const NetworkModel* model = models[c];
    if (model->node_names != table.node_names) {
      throw DataError("ebic_report: models disagree on node set or order");
    }
    table.model_labels.push_back(c < labels.size() ? labels[c] : "model_" + std::to_string(c + 1));
    table.values.col(static_cast<Eigen::Index>(c)) = model->per_node_ebic;
  }
  return table;
}

inline std::string ebic_table_csv(const EbicTable& table) {
  std::vector<std::string> header{"node"};
  header.insert(header.end(), table.model_labels.begin(), table.model_labels.end());
  std::string out = csv_row(header);
  for (Eigen::Index r = 0; r < table.values.rows(); ++r) {
    std::vector<std::string> fields{table.node_names[static_cast<std::size_t>(r)]};
    for (Eigen::Index c = 0; c < table.values.cols(); ++c) {
      fields.push_back(format_double(table.values(r, c)));
    }
    out += csv_row(fields);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Persistence (versioned structured text; write -> read -> write is
// byte-identical thanks to canonical key order and round-trip-exact numbers)
// ---------------------------------------------------------------------------

namespace detail {

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, Eigen::Index cols_hint = -1) {
  if (!j.is_array()) throw DataError("model artifact: expected an array of rows");
  Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  Eigen::Index cols = rows > 0 ? static_cast<Eigen::Index>(j.at(0).size()) : std::max<Eigen::Index>(cols_hint, 0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j.at(static_cast<std::size_t>(r));
    if (static_cast<Eigen::Index>(row.size()) != cols) throw DataError("model artifact: ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

inline nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

inline Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = j.at(static_cast<std::size_t>(i)).get<double>();
  return v;
}

}  // namespace detail

inline void validate_model(const NetworkModel& model) {
  const int m = model.node_count();
  if (m < 1) throw DataError("model has no nodes");
  if (model.weights.rows() != m || model.weights.cols() != m) throw DataError("weight matrix shape mismatch");
  if (model.fixed_thresholds.size() != m) throw DataError("threshold vector length mismatch");
  if (model.group_count() > 0) {
    if (model.random_thresholds.rows() != m || model.random_thresholds.cols() != model.group_count()) {
      throw DataError("random threshold matrix shape mismatch");
    }
  } else if (model.random_thresholds.cols() != 0) {
    throw DataError("single-level model must not carry random thresholds");
  }
  if (!(model.beta_inverse_temperature > 0.0)) throw DataError("inverse temperature must be positive");
  for (int j = 0; j < m; ++j) {
    if (model.weights(j, j) != 0.0) throw DataError("weight matrix diagonal must be zero");
    for (int k = j + 1; k < m; ++k) {
      if (std::abs(model.weights(j, k) - model.weights(k, j)) > 1e-12) {
        throw DataError("weight matrix must be symmetric");
      }
    }
  }
  if (model.per_node_ebic.size() != 0 && model.per_node_ebic.size() != m) {
    throw DataError("per-node EBIC length mismatch");
  }
}

inline nlohmann::json model_to_json(const NetworkModel& model) {
  nlohmann::json j;
  j["format_version"] = model.format_version;
  j["node_names"] = model.node_names;
  j["group_names"] = model.group_names;
  j["weights"] = detail::matrix_to_json(model.weights);
  j["fixed_thresholds"] = detail::vector_to_json(model.fixed_thresholds);
  j["random_thresholds"] = detail::matrix_to_json(model.random_thresholds);
  j["rule"] = to_string(model.rule);
  j["beta_inverse_temperature"] = model.beta_inverse_temperature;
  j["per_node_ebic"] = detail::vector_to_json(model.per_node_ebic);
  return j;
}

inline std::string model_to_string(const NetworkModel& model) {
  return model_to_json(model).dump(2) + "\n";
}

inline NetworkModel model_from_json(const nlohmann::json& j) {
  NetworkModel model;
  model.format_version = j.at("format_version").get<int>();
  if (model.format_version != 1) {
    throw DataError("unsupported model format_version " + std::to_string(model.format_version));
  }
  model.node_names = j.at("node_names").get<std::vector<std::string>>();
  model.group_names = j.at("group_names").get<std::vector<std::string>>();
  model.weights = detail::matrix_from_json(j.at("weights"));
  model.fixed_thresholds = detail::vector_from_json(j.at("fixed_thresholds"));
  model.random_thresholds = detail::matrix_from_json(j.at("random_thresholds"));
  if (model.random_thresholds.rows() == 0) {
    model.random_thresholds.resize(model.node_count(), 0);
  }
  model.rule = edge_rule_from_string(j.at("rule").get<std::string>());
  model.beta_inverse_temperature = j.at("beta_inverse_temperature").get<double>();
  model.per_node_ebic = detail::vector_from_json(j.at("per_node_ebic"));
  validate_model(model);
  return model;
}

inline void save_model(const NetworkModel& model, const std::string& path) {
  validate_model(model);
  write_text_file(path, model_to_string(model));
}

inline NetworkModel load_model(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  try {
    return model_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
}

inline std::uint64_t model_hash(const NetworkModel& model) {
  return fnv1a64(model_to_string(model));
}

inline std::string edge_list_csv(const NetworkModel& model) {
  std::string out = csv_row({"node_a", "node_b", "weight"});
  for (int j = 0; j < model.node_count(); ++j) {
    for (int k = j + 1; k < model.node_count(); ++k) {
      if (std::abs(model.weights(j, k)) < kNumericalZero) continue;
      out += csv_row({model.node_names[static_cast<std::size_t>(j)],
                      model.node_names[static_cast<std::size_t>(k)],
                      format_double(model.weights(j, k))});
    }
  }
  return out;
}

}  // namespace mlnira
