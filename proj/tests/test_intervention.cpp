#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "mlnira/intervention.hpp"
#include "mlnira/synthetic.hpp"

using namespace mlnira;

namespace {

NetworkModel model_from(const Eigen::MatrixXd& weights, const Eigen::VectorXd& theta,
                        std::vector<std::string> names = {}) {
  NetworkModel model;
  const int m = static_cast<int>(theta.size());
  if (names.empty()) {
    for (int j = 0; j < m; ++j) names.push_back(std::string(1, static_cast<char>('A' + j)));
  }
  model.node_names = std::move(names);
  model.weights = weights;
  model.fixed_thresholds = theta;
  model.random_thresholds.resize(m, 0);
  model.per_node_ebic = Eigen::VectorXd::Zero(m);
  return model;
}

// Star network: hub A coupled to four leaves, leaves uncoupled among
// themselves. Thresholds are spread so the SD-scaled shift is nonzero, and
// the hub sits far enough from saturation to respond in both directions.
NetworkModel hub_model() {
  const int m = 5;
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(m, m);
  for (int j = 1; j < m; ++j) w(0, j) = w(j, 0) = 1.5;
  Eigen::VectorXd theta(m);
  theta << -3.0, -1.0, -0.8, -0.6, -0.4;
  return model_from(w, theta);
}

std::vector<int> all_nodes(const NetworkModel& model) {
  std::vector<int> nodes;
  for (int j = 0; j < model.node_count(); ++j) nodes.push_back(j);
  return nodes;
}

}  // namespace

TEST_CASE("threshold standard deviation") {
  Eigen::VectorXd constant = Eigen::VectorXd::Constant(3, -1.0);
  CHECK(threshold_sd(constant) == 0.0);

  Eigen::VectorXd two(2);
  two << 0.0, 2.0;
  CHECK(threshold_sd(two) == Catch::Approx(std::sqrt(2.0)).margin(1e-12));

  Eigen::VectorXd shifted = two.array() + 5.3;
  CHECK(threshold_sd(shifted) == Catch::Approx(threshold_sd(two)).margin(1e-12));

  Eigen::VectorXd one(1);
  one << 0.5;
  CHECK_THROWS_AS(threshold_sd(one), ConfigError);
}

TEST_CASE("intervention shifts only the target threshold by k*SD") {
  Eigen::VectorXd theta(3);
  theta << -1.0, -2.0, -3.0;  // SD = 1
  NetworkModel model = model_from(Eigen::MatrixXd::Zero(3, 3), theta);

  InterventionSpec spec;
  spec.target_node = 0;
  spec.direction = Direction::Alleviate;
  spec.magnitude_sd = 2.0;
  spec.level = ThresholdLevel::fixed();

  Eigen::VectorXd shifted = apply_intervention(model, spec);
  CHECK(shifted[0] == Catch::Approx(-3.0).margin(1e-12));
  CHECK(shifted[1] == -2.0);
  CHECK(shifted[2] == -3.0);

  spec.magnitude_sd = 0.0;
  CHECK(apply_intervention(model, spec) == theta);

  // aggravation mirrors alleviation around the original value
  spec.magnitude_sd = 2.0;
  spec.direction = Direction::Aggravate;
  Eigen::VectorXd aggravated = apply_intervention(model, spec);
  CHECK(aggravated[0] - theta[0] == Catch::Approx(theta[0] - shifted[0]).margin(1e-12));

  spec.target_node = 9;
  CHECK_THROWS_AS(apply_intervention(model, spec), ConfigError);
}

TEST_CASE("group-axis SD uses the target node's spread across groups") {
  NetworkModel model = model_from(Eigen::MatrixXd::Zero(2, 2), Eigen::VectorXd::Constant(2, -1.0));
  model.group_names = {"g1", "g2", "g3"};
  model.random_thresholds.resize(2, 3);
  model.random_thresholds << 1.0, 0.0, -1.0, 0.2, 0.0, -0.2;

  InterventionSpec spec;
  spec.target_node = 0;
  spec.direction = Direction::Alleviate;
  spec.magnitude_sd = 1.0;
  spec.level = ThresholdLevel::group_level(1);

  Eigen::VectorXd shifted = apply_intervention(model, spec, ThresholdMode::Total, SdAxis::Groups);
  CHECK(shifted[0] == Catch::Approx(-1.0 - 1.0).margin(1e-12));  // sd across (1,0,-1) = 1
  CHECK(shifted[1] == -1.0);
}

TEST_CASE("total scores sum the scored columns per row") {
  SampleMatrix samples;
  samples.rows.resize(2, 3);
  samples.rows << 1, 0, 1, 0, 1, 1;
  samples.node_names = {"A", "B", "C"};

  Eigen::VectorXi all = total_scores(samples, {0, 1, 2});
  CHECK(all[0] == 2);
  CHECK(all[1] == 2);

  Eigen::VectorXi subset = total_scores(samples, {0, 2});
  CHECK(subset[0] == 2);
  CHECK(subset[1] == 1);

  SampleMatrix zeros;
  zeros.rows = Eigen::MatrixXi::Zero(4, 3);
  CHECK(total_scores(zeros, {0, 1, 2}).sum() == 0);
}

TEST_CASE("welch t-test hand case and edge cases") {
  Eigen::VectorXd a(5), b(5);
  a << 1, 2, 3, 4, 5;
  b << 3, 4, 5, 6, 7;
  WelchResult r = welch_t_test(a, b);
  CHECK(r.t == Catch::Approx(-2.0).margin(1e-12));
  CHECK(r.df == Catch::Approx(8.0).margin(1e-12));
  CHECK(r.p == Catch::Approx(0.0805).margin(5e-4));

  WelchResult same = welch_t_test(a, a);
  CHECK(same.t == 0.0);
  CHECK(same.p == 1.0);

  Eigen::VectorXd flat_a = Eigen::VectorXd::Zero(4);
  Eigen::VectorXd flat_b = Eigen::VectorXd::Ones(4);
  CHECK_THROWS_AS(welch_t_test(flat_a, flat_b), DataError);

  Eigen::VectorXd tiny(1);
  tiny << 1.0;
  CHECK_THROWS_AS(welch_t_test(tiny, a), ContractError);
}

TEST_CASE("p-value adjustment") {
  CHECK(adjust_p({0.03}, AdjustMethod::Holm) == std::vector<double>{0.03});

  std::vector<double> bonf = adjust_p({0.01, 0.04}, AdjustMethod::Bonferroni);
  CHECK(bonf[0] == Catch::Approx(0.02).margin(1e-12));
  CHECK(bonf[1] == Catch::Approx(0.08).margin(1e-12));

  std::vector<double> holm = adjust_p({0.01, 0.04}, AdjustMethod::Holm);
  CHECK(holm[0] == Catch::Approx(0.02).margin(1e-12));
  CHECK(holm[1] == Catch::Approx(0.04).margin(1e-12));

  // clipped to [0,1], adjusted >= raw, order patterns preserved
  std::vector<double> raw{0.9, 0.5, 0.004, 0.31};
  for (AdjustMethod method : {AdjustMethod::Holm, AdjustMethod::Bonferroni}) {
    std::vector<double> adj = adjust_p(raw, method);
    for (std::size_t i = 0; i < raw.size(); ++i) {
      CHECK(adj[i] >= raw[i]);
      CHECK(adj[i] <= 1.0);
    }
    for (std::size_t i = 0; i < raw.size(); ++i) {
      for (std::size_t j = 0; j < raw.size(); ++j) {
        if (raw[i] < raw[j]) CHECK(adj[i] <= adj[j]);
      }
    }
  }
}

TEST_CASE("target ranking: significant first, ordered by mean total") {
  auto row = [](const std::string& name, double mean, bool sig) {
    ComparisonRow r;
    r.target = name;
    r.mean_total = mean;
    r.significant = sig;
    return r;
  };
  std::vector<ComparisonRow> rows{row("A", 3.1, true), row("B", 2.7, true), row("C", 3.3, false)};
  CHECK(rank_targets(rows, Direction::Alleviate) == std::vector<std::string>{"B", "A", "C"});

  std::vector<ComparisonRow> agg{row("A", 3.9, true), row("B", 3.5, false)};
  CHECK(rank_targets(agg, Direction::Aggravate) == std::vector<std::string>{"A", "B"});

  std::vector<ComparisonRow> none{row("A", 3.9, false), row("B", 3.5, false), row("C", 3.7, false)};
  CHECK(rank_targets(none, Direction::Alleviate) == std::vector<std::string>{"B", "C", "A"});
}

TEST_CASE("independence keeps intervention effects local to the target") {
  Eigen::VectorXd theta(4);
  theta << -0.2, -0.6, -1.0, -1.4;
  NetworkModel model = model_from(Eigen::MatrixXd::Zero(4, 4), theta);

  SamplerConfig sampler;
  sampler.n_samples = 20000;
  sampler.seed = 333;
  NiraConfig cfg;
  cfg.direction = Direction::Alleviate;

  NiraOutcome outcome = run_nira(model, ThresholdLevel::fixed(), sampler, cfg);
  REQUIRE(outcome.scenarios.size() == 5);

  const double sd = threshold_sd(theta);
  for (int t = 0; t < 4; ++t) {
    const ScenarioResult& scenario = outcome.scenarios[static_cast<std::size_t>(t + 1)];
    for (int j = 0; j < 4; ++j) {
      double expected = sigmoid(theta[j] - (j == t ? 2.0 * sd : 0.0));
      CHECK(std::abs(scenario.per_node_marginals[j] - expected) < 0.02);
      if (j == t) {
        CHECK(scenario.per_node_marginals[j] < outcome.scenarios[0].per_node_marginals[j]);
      }
    }
  }
}

TEST_CASE("own marginal moves with the intervention on exact-oracle models") {
  Rng rng(745);
  for (int rep = 0; rep < 5; ++rep) {
    const int m = 4;
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(m, m);
    for (int j = 0; j < m; ++j) {
      for (int k = j + 1; k < m; ++k) w(j, k) = w(k, j) = rng.uniform01();
    }
    Eigen::VectorXd theta(m);
    for (int j = 0; j < m; ++j) theta[j] = -2.0 + 1.5 * rng.uniform01();
    NetworkModel model = model_from(w, theta);

    for (Direction direction : {Direction::Alleviate, Direction::Aggravate}) {
      for (int target = 0; target < m; ++target) {
        InterventionSpec spec;
        spec.target_node = target;
        spec.direction = direction;
        spec.level = ThresholdLevel::fixed();
        Eigen::VectorXd shifted = apply_intervention(model, spec);

        auto marginal = [&](const Eigen::VectorXd& th) {
          Eigen::VectorXd pi = exact_distribution(w, th, 1.0);
          double p = 0.0;
          for (int idx = 0; idx < (1 << m); ++idx) {
            if ((idx >> target) & 1) p += pi[idx];
          }
          return p;
        };
        double base = marginal(theta);
        double moved = marginal(shifted);
        if (direction == Direction::Alleviate) CHECK(moved < base);
        else CHECK(moved > base);
      }
    }
  }
}

TEST_CASE("intervening on the hub moves the mean total the most, both directions") {
  NetworkModel model = hub_model();
  const int m = model.node_count();

  // exact reference: the hub scenario is the extreme one in each direction
  std::vector<double> exact_down, exact_up;
  for (int target = 0; target < m; ++target) {
    InterventionSpec spec;
    spec.target_node = target;
    spec.level = ThresholdLevel::fixed();
    spec.direction = Direction::Alleviate;
    exact_down.push_back(
        exact_mean_total(model.weights, apply_intervention(model, spec), 1.0, all_nodes(model)));
    spec.direction = Direction::Aggravate;
    exact_up.push_back(
        exact_mean_total(model.weights, apply_intervention(model, spec), 1.0, all_nodes(model)));
  }
  for (int t = 1; t < m; ++t) {
    CHECK(exact_down[0] < exact_down[static_cast<std::size_t>(t)]);
    CHECK(exact_up[0] > exact_up[static_cast<std::size_t>(t)]);
  }

  SamplerConfig sampler;
  sampler.n_samples = 5000;
  sampler.seed = 11;
  NiraConfig cfg;
  cfg.direction = Direction::Alleviate;
  NiraOutcome outcome = run_nira(model, ThresholdLevel::fixed(), sampler, cfg);
  CHECK(outcome.report.ranking.front() == "A");
  for (std::size_t i = 0; i < outcome.report.rows.size(); ++i) {
    CHECK(std::abs(outcome.report.rows[i].mean_total - exact_down[i]) < 0.06);
  }

  cfg.direction = Direction::Aggravate;
  NiraOutcome up = run_nira(model, ThresholdLevel::fixed(), sampler, cfg);
  CHECK(up.report.ranking.front() == "A");
  CHECK(up.report.rows[0].mean_total > up.report.baseline_mean);
}

TEST_CASE("baseline scenario equals a direct sampler run on the derived stream") {
  NetworkModel model = hub_model();
  SamplerConfig sampler;
  sampler.n_samples = 400;
  sampler.seed = 2024;
  NiraConfig cfg;

  NiraOutcome outcome = run_nira(model, ThresholdLevel::fixed(), sampler, cfg);
  SamplerConfig direct_cfg = sampler;
  direct_cfg.seed = stream_seed(sampler.seed, 0);
  SampleMatrix direct = generate_sample(model, ThresholdLevel::fixed(), direct_cfg);
  CHECK(outcome.scenarios[0].samples.rows == direct.rows);
  CHECK(outcome.report.baseline_mean ==
        Catch::Approx(direct.rows.cast<double>().rowwise().sum().mean()).margin(1e-12));
}

TEST_CASE("double-network scoring never includes the intervention nodes") {
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(4, 4);
  w(0, 2) = w(2, 0) = 1.0;
  w(1, 3) = w(3, 1) = 1.0;
  Eigen::VectorXd theta(4);
  theta << -0.5, -1.0, -0.8, -1.2;
  NetworkModel model = model_from(w, theta, {"D1", "D2", "A1", "A2"});

  SamplerConfig sampler;
  sampler.n_samples = 800;
  sampler.seed = 77;
  NiraConfig cfg;
  cfg.partition = partition_from_names(model, {"D1", "D2"}, {"A1", "A2"});

  NiraOutcome outcome = run_nira(model, ThresholdLevel::fixed(), sampler, cfg);
  CHECK(outcome.scenarios.size() == 3);  // baseline + one per intervention node
  for (const auto& scenario : outcome.scenarios) {
    double outcome_mean = scenario.samples.rows.rightCols(2).cast<double>().rowwise().sum().mean();
    CHECK(scenario.mean_total == Catch::Approx(outcome_mean).margin(1e-12));
  }
  for (const auto& row : outcome.report.rows) {
    CHECK((row.target == "D1" || row.target == "D2"));
  }

  CHECK_THROWS_AS(partition_from_names(model, {"D1"}, {"D1", "A1"}), ConfigError);
  CHECK_THROWS_AS(partition_from_names(model, {}, {"A1"}), ConfigError);
}

TEST_CASE("reports are deterministic under a fixed seed") {
  NetworkModel model = hub_model();
  SamplerConfig sampler;
  sampler.n_samples = 600;
  sampler.seed = 4242;
  NiraConfig cfg;
  cfg.threads = 2;

  NiraOutcome first = run_nira(model, ThresholdLevel::fixed(), sampler, cfg);
  NiraOutcome second = run_nira(model, ThresholdLevel::fixed(), sampler, cfg);
  CHECK(comparison_report_csv(first.report) == comparison_report_csv(second.report));
  CHECK(comparison_report_to_json(first.report).dump(2) == comparison_report_to_json(second.report).dump(2));

  std::string csv = comparison_report_csv(first.report);
  CHECK(csv.rfind("target,direction,level,mean_total,t,p,p_adjusted,significant\n", 0) == 0);
  CHECK(csv.find("baseline,alleviate,fixed,") != std::string::npos);
}

TEST_CASE("null interventions rarely reach adjusted significance") {
  Eigen::VectorXd theta(4);
  theta << -0.3, -0.7, -1.1, -1.5;
  NetworkModel model = model_from(Eigen::MatrixXd::Zero(4, 4), theta);

  int flagged_seeds = 0;
  for (int seed = 0; seed < 10; ++seed) {
    SamplerConfig sampler;
    sampler.n_samples = 1000;
    sampler.thin = 40;  // near-independent draws keep the test calibrated
    sampler.seed = 500 + static_cast<std::uint64_t>(seed);
    NiraConfig cfg;
    cfg.magnitude_sd = 0.0;
    NiraOutcome outcome = run_nira(model, ThresholdLevel::fixed(), sampler, cfg);
    for (const auto& row : outcome.report.rows) {
      if (row.significant) {
        ++flagged_seeds;
        break;
      }
    }
  }
  CHECK(flagged_seeds <= 2);
}

TEST_CASE("group-level runs use that group's thresholds") {
  NetworkModel model = hub_model();
  model.group_names = {"north", "south"};
  model.random_thresholds = Eigen::MatrixXd::Zero(5, 2);
  model.random_thresholds(0, 0) = 1.2;
  model.random_thresholds(0, 1) = -1.2;
  model.random_thresholds(2, 0) = -0.6;
  model.random_thresholds(2, 1) = 0.6;

  SamplerConfig sampler;
  sampler.n_samples = 4000;
  sampler.seed = 99;
  NiraConfig cfg;
  cfg.magnitude_sd = 0.0;  // baseline-only comparison of levels

  NiraOutcome north = run_nira(model, ThresholdLevel::group_level(0), sampler, cfg);
  NiraOutcome south = run_nira(model, ThresholdLevel::group_level(1), sampler, cfg);
  double exact_north = exact_mean_total(model.weights, effective_thresholds(model, ThresholdLevel::group_level(0)),
                                        1.0, all_nodes(model));
  double exact_south = exact_mean_total(model.weights, effective_thresholds(model, ThresholdLevel::group_level(1)),
                                        1.0, all_nodes(model));
  CHECK(std::abs(north.report.baseline_mean - exact_north) < 0.1);
  CHECK(std::abs(south.report.baseline_mean - exact_south) < 0.1);
  CHECK(north.report.level == "north");
  CHECK(south.report.level == "south");
}
