#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <nlohmann/json.hpp>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "mlnira/sampler.hpp"
#include "mlnira/stats.hpp"

namespace mlnira {

enum class Direction { Alleviate, Aggravate };

inline std::string to_string(Direction d) { return d == Direction::Alleviate ? "alleviate" : "aggravate"; }
inline Direction direction_from_string(const std::string& s) {
  if (s == "alleviate") return Direction::Alleviate;
  if (s == "aggravate") return Direction::Aggravate;
  throw ConfigError("unknown direction '" + s + "' (expected alleviate or aggravate)");
}

// Axis over which the shift magnitude's standard deviation is taken:
// across the nodes of the level's threshold vector (default), or across the
// groups of the target node's group-specific thresholds.
enum class SdAxis { Nodes, Groups };

inline std::string to_string(SdAxis a) { return a == SdAxis::Nodes ? "nodes" : "groups"; }
inline SdAxis sd_axis_from_string(const std::string& s) {
  if (s == "nodes") return SdAxis::Nodes;
  if (s == "groups") return SdAxis::Groups;
  throw ConfigError("unknown sd axis '" + s + "' (expected nodes or groups)");
}

inline std::string to_string(ThresholdMode m) { return m == ThresholdMode::Total ? "total" : "random_only"; }
inline ThresholdMode threshold_mode_from_string(const std::string& s) {
  if (s == "total") return ThresholdMode::Total;
  if (s == "random_only") return ThresholdMode::RandomOnly;
  throw ConfigError("unknown threshold mode '" + s + "' (expected total or random_only)");
}

struct InterventionSpec {
  int target_node = 0;
  Direction direction = Direction::Alleviate;
  double magnitude_sd = 2.0;  // shift in threshold-SD units
  ThresholdLevel level;
};

// Double-network setup: intervene on one subnetwork, score the other.
struct SubnetworkPartition {
  std::vector<int> intervention_nodes;
  std::vector<int> outcome_nodes;
};

inline SubnetworkPartition partition_from_names(const NetworkModel& model,
                                                const std::vector<std::string>& intervention,
                                                const std::vector<std::string>& outcome) {
  SubnetworkPartition part;
  for (const auto& name : intervention) part.intervention_nodes.push_back(find_node(model.node_names, name));
  for (const auto& name : outcome) part.outcome_nodes.push_back(find_node(model.node_names, name));
  if (part.intervention_nodes.empty() || part.outcome_nodes.empty()) {
    throw ConfigError("partition: both node sets must be nonempty");
  }
  for (int node : part.intervention_nodes) {
    for (int other : part.outcome_nodes) {
      if (node == other) {
        throw ConfigError("partition: node '" + model.node_names[static_cast<std::size_t>(node)] +
                          "' appears in both sets");
      }
    }
  }
  return part;
}

// Sample standard deviation (n-1 denominator) of a threshold vector.
inline double threshold_sd(const Eigen::Ref<const Eigen::VectorXd>& theta) {
  if (theta.size() < 2) throw ConfigError("threshold_sd: need at least 2 entries");
  const double mean = theta.mean();
  return std::sqrt((theta.array() - mean).square().sum() / static_cast<double>(theta.size() - 1));
}

// Shifts the target node's effective threshold by +/- k*SD while leaving
// every other entry untouched; minus for alleviation, plus for aggravation.
inline Eigen::VectorXd apply_intervention(const NetworkModel& model, const InterventionSpec& spec,
                                          ThresholdMode mode = ThresholdMode::Total,
                                          SdAxis axis = SdAxis::Nodes) {
  if (spec.target_node < 0 || spec.target_node >= model.node_count()) {
    throw ConfigError("apply_intervention: target node out of range");
  }
  if (spec.magnitude_sd < 0.0) throw ConfigError("apply_intervention: magnitude must be non-negative");

  Eigen::VectorXd theta = effective_thresholds(model, spec.level, mode);
  double sd = 0.0;
  if (spec.magnitude_sd > 0.0) {
    if (axis == SdAxis::Nodes) {
      sd = threshold_sd(theta);
    } else {
      if (model.group_count() < 2) {
        throw ConfigError("apply_intervention: sd over groups needs a multilevel model with >= 2 groups");
      }
      // Shift-invariant, so the fixed part of the threshold drops out.
      sd = threshold_sd(model.random_thresholds.row(spec.target_node).transpose());
    }
  }
  const double shift = spec.magnitude_sd * sd;
  theta[spec.target_node] += spec.direction == Direction::Aggravate ? shift : -shift;
  return theta;
}

// Per-row sums over the scored columns.
inline Eigen::VectorXi total_scores(const SampleMatrix& samples, const std::vector<int>& scored_nodes) {
  Eigen::VectorXi totals = Eigen::VectorXi::Zero(samples.rows.rows());
  for (int node : scored_nodes) {
    if (node < 0 || node >= samples.rows.cols()) throw ContractError("total_scores: node index out of range");
    totals += samples.rows.col(node);
  }
  return totals;
}

struct ScenarioResult {
  std::optional<InterventionSpec> spec;  // empty for the baseline scenario
  SampleMatrix samples;
  double mean_total = 0.0;
  Eigen::VectorXd per_node_marginals;
};

struct ComparisonRow {
  std::string target;
  Direction direction = Direction::Alleviate;
  double mean_total = 0.0;
  double t = 0.0;
  double p = 1.0;
  double p_adjusted = 1.0;
  bool significant = false;
};

struct ComparisonReport {
  double baseline_mean = 0.0;
  std::vector<ComparisonRow> rows;      // one per intervention target, in target order
  std::vector<std::string> ranking;     // significant targets first (see rank_targets)
  std::string adjust_method;
  std::string level;
  std::string direction;
  double alpha = 0.05;
  std::uint64_t model_hash = 0;
};

// Significant scenarios first, ordered by mean total (ascending when looking
// for intervention targets, descending for prevention targets); the
// non-significant remainder follows under the same ordering.
inline std::vector<std::string> rank_targets(const std::vector<ComparisonRow>& rows, Direction direction) {
  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (rows[a].significant != rows[b].significant) return rows[a].significant;
    if (rows[a].mean_total != rows[b].mean_total) {
      return direction == Direction::Alleviate ? rows[a].mean_total < rows[b].mean_total
                                               : rows[a].mean_total > rows[b].mean_total;
    }
    return false;
  });
  std::vector<std::string> ranking;
  ranking.reserve(rows.size());
  for (std::size_t idx : order) ranking.push_back(rows[idx].target);
  return ranking;
}

struct NiraConfig {
  Direction direction = Direction::Alleviate;
  double magnitude_sd = 2.0;
  AdjustMethod adjust = AdjustMethod::Holm;
  double alpha = 0.05;
  SdAxis sd_axis = SdAxis::Nodes;
  ThresholdMode threshold_mode = ThresholdMode::Total;
  int threads = 0;
  std::optional<SubnetworkPartition> partition;
};

struct NiraOutcome {
  std::vector<ScenarioResult> scenarios;  // index 0 = baseline, then one per target
  ComparisonReport report;
};

// The full protocol: simulate a fresh baseline population plus one population
// per intervention target (equal sizes, per-scenario seed streams), score
// them, and compare each scenario against the baseline.
inline NiraOutcome run_nira(const NetworkModel& model, ThresholdLevel level,
                            const SamplerConfig& sampler_cfg, const NiraConfig& cfg) {
  validate_model(model);
  if (!level.is_fixed() && level.group >= model.group_count()) {
    throw ConfigError("run_nira: group index out of range");
  }

  std::vector<int> targets;
  std::vector<int> scored;
  if (cfg.partition) {
    targets = cfg.partition->intervention_nodes;
    scored = cfg.partition->outcome_nodes;
  } else {
    for (int j = 0; j < model.node_count(); ++j) {
      targets.push_back(j);
      scored.push_back(j);
    }
  }

  const int n_scenarios = static_cast<int>(targets.size()) + 1;
  std::vector<ScenarioResult> scenarios(static_cast<std::size_t>(n_scenarios));
  parallel_for(n_scenarios, cfg.threads, [&](int i) {
    ScenarioResult& scenario = scenarios[static_cast<std::size_t>(i)];
    std::optional<Eigen::VectorXd> theta;
    if (i == 0) {
      theta = effective_thresholds(model, level, cfg.threshold_mode);
    } else {
      InterventionSpec spec;
      spec.target_node = targets[static_cast<std::size_t>(i - 1)];
      spec.direction = cfg.direction;
      spec.magnitude_sd = cfg.magnitude_sd;
      spec.level = level;
      scenario.spec = spec;
      theta = apply_intervention(model, spec, cfg.threshold_mode, cfg.sd_axis);
    }
    SamplerConfig scenario_cfg = sampler_cfg;
    scenario_cfg.seed = stream_seed(sampler_cfg.seed, static_cast<std::uint64_t>(i));
    scenario.samples = generate_sample(model, level, scenario_cfg, theta, cfg.threshold_mode);
    scenario.mean_total = total_scores(scenario.samples, scored).cast<double>().mean();
    scenario.per_node_marginals = scenario.samples.rows.cast<double>().colwise().mean();
  });

  const Eigen::VectorXd baseline_totals = total_scores(scenarios.front().samples, scored).cast<double>();

  ComparisonReport report;
  report.baseline_mean = scenarios.front().mean_total;
  report.adjust_method = to_string(cfg.adjust);
  report.level = level_label(model, level);
  report.direction = to_string(cfg.direction);
  report.alpha = cfg.alpha;
  report.model_hash = model_hash(model);

  std::vector<double> p_values;
  for (std::size_t i = 1; i < scenarios.size(); ++i) {
    const ScenarioResult& scenario = scenarios[i];
    ComparisonRow row;
    row.target = model.node_names[static_cast<std::size_t>(scenario.spec->target_node)];
    row.direction = cfg.direction;
    row.mean_total = scenario.mean_total;
    try {
      Eigen::VectorXd totals = total_scores(scenario.samples, scored).cast<double>();
      WelchResult welch = welch_t_test(baseline_totals, totals);
      row.t = welch.t;
      row.p = welch.p;
    } catch (const DataError& e) {
      throw EstimationError("scenario '" + row.target + "': " + e.what());
    }
    p_values.push_back(row.p);
    report.rows.push_back(std::move(row));
  }
  std::vector<double> adjusted = adjust_p(p_values, cfg.adjust);
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    report.rows[i].p_adjusted = adjusted[i];
    report.rows[i].significant = adjusted[i] < cfg.alpha;
  }
  report.ranking = rank_targets(report.rows, cfg.direction);
  return NiraOutcome{std::move(scenarios), std::move(report)};
}

// ---------------------------------------------------------------------------
// Report serialization
// ---------------------------------------------------------------------------

inline std::string comparison_report_csv(const ComparisonReport& report) {
  std::string out = csv_row({"target", "direction", "level", "mean_total", "t", "p", "p_adjusted", "significant"});
  out += csv_row({"baseline", report.direction, report.level, format_double(report.baseline_mean), "", "", "", ""});
  for (const auto& row : report.rows) {
    out += csv_row({row.target, to_string(row.direction), report.level, format_double(row.mean_total),
                    format_double(row.t), format_double(row.p), format_double(row.p_adjusted),
                    row.significant ? "true" : "false"});
  }
  return out;
}

inline nlohmann::json comparison_report_to_json(const ComparisonReport& report) {
  nlohmann::json j;
  j["baseline_mean"] = report.baseline_mean;
  j["adjust_method"] = report.adjust_method;
  j["level"] = report.level;
  j["direction"] = report.direction;
  j["alpha"] = report.alpha;
  j["model_hash"] = hex64(report.model_hash);
  j["ranking"] = report.ranking;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : report.rows) {
    nlohmann::json r;
    r["target"] = row.target;
    r["direction"] = to_string(row.direction);
    r["mean_total"] = row.mean_total;
    r["t"] = row.t;
    r["p"] = row.p;
    r["p_adjusted"] = row.p_adjusted;
    r["significant"] = row.significant;
    rows.push_back(std::move(r));
  }
  j["scenarios"] = std::move(rows);
  return j;
}

inline std::string ranking_text(const ComparisonReport& report) {
  std::string out;
  for (std::size_t i = 0; i < report.ranking.size(); ++i) {
    const std::string& target = report.ranking[i];
    bool significant = false;
    for (const auto& row : report.rows) {
      if (row.target == target) {
        significant = row.significant;
        break;
      }
    }
    out += std::to_string(i + 1) + ". " + target + (significant ? "" : " (not significant)") + "\n";
  }
  return out;
}

}  // namespace mlnira
