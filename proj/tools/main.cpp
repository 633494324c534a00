// Command-line workflow: synth -> fit -> compare/icc -> nira, with a JSON
// model artifact persisted between stages. All data goes to files under
// --out; diagnostics go to stderr; exit code 0 iff no error.

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "mlnira/mlnira.hpp"

namespace fs = std::filesystem;
namespace ml = mlnira;

namespace {

struct FitOptions {
  std::string input;
  std::string group_column = "group";
  std::vector<std::string> nodes;
  int cutoff = 1;
  std::string model = "multilevel";
  std::string rule = "AND";
  double gamma = 0.25;
  int lambda_count = 50;
  double lambda_min_ratio = 0.01;
  int max_iter = 500;
  double tol = 1e-5;
  double beta = 1.0;
  int threads = 0;
  std::string out;
};

struct CompareOptions {
  std::string model_a;
  std::string model_b;
  std::string out;
};

struct NiraOptions {
  std::string model_path;
  std::string direction = "alleviate";
  std::string level = "fixed";
  double magnitude = 2.0;
  std::string adjust = "holm";
  double alpha = 0.05;
  std::string sd_axis = "nodes";
  std::string threshold_mode = "total";
  double beta = 0.0;  // 0 = use the model's inverse temperature
  int burn_in = 0;
  int thin = 0;
  int n_samples = 5000;
  std::uint64_t seed = 1;
  std::vector<std::string> intervention_nodes;
  std::vector<std::string> outcome_nodes;
  int threads = 0;
  std::string out;
};

struct SynthOptions {
  std::string spec_path;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string group_column = "group";
  std::string out;
};

struct IccOptions {
  std::string input;
  std::string group_column = "group";
  std::vector<std::string> nodes;
  int cutoff = 1;
  std::string out;
};

fs::path prepare_out_dir(const std::string& out) {
  if (out.empty()) throw ml::ConfigError("--out directory is required");
  fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ml::ConfigError("cannot create output directory '" + out + "': " + ec.message());
  return dir;
}

void run_fit(const FitOptions& opt) {
  if (opt.input.empty()) throw ml::ConfigError("fit: --input is required");
  if (opt.model != "single" && opt.model != "multilevel") {
    throw ml::ConfigError("fit: --model must be single or multilevel");
  }
  fs::path dir = prepare_out_dir(opt.out);

  ml::OrdinalDataset raw = ml::load_ordinal_csv(opt.input, opt.group_column, opt.nodes);
  ml::BinaryDataset data = ml::dichotomize(raw, opt.cutoff);

  ml::IsingFitConfig cfg;
  cfg.rule = ml::edge_rule_from_string(opt.rule);
  cfg.gamma = opt.gamma;
  cfg.lambda_count = opt.lambda_count;
  cfg.lambda_min_ratio = opt.lambda_min_ratio;
  cfg.max_iter = opt.max_iter;
  cfg.tol = opt.tol;
  cfg.threads = opt.threads;
  cfg.beta_inverse_temperature = opt.beta;

  const bool multilevel = opt.model == "multilevel";
  ml::NetworkModel model = multilevel ? ml::fit_multilevel_ising(data, cfg) : ml::fit_single_ising(data, cfg);

  ml::save_model(model, (dir / "model.json").string());
  ml::EbicTable table = ml::ebic_report({&model}, {opt.model});
  ml::write_text_file((dir / "ebic.csv").string(), ml::ebic_table_csv(table));
  ml::write_text_file((dir / "edges.csv").string(), ml::edge_list_csv(model));
  std::cerr << "fit: wrote " << (dir / "model.json").string() << " (" << model.node_count() << " nodes, "
            << model.group_count() << " groups)\n";
}

void run_compare(const CompareOptions& opt) {
  if (opt.model_a.empty() || opt.model_b.empty()) {
    throw ml::ConfigError("compare: --model-a and --model-b are required");
  }
  fs::path dir = prepare_out_dir(opt.out);
  ml::NetworkModel a = ml::load_model(opt.model_a);
  ml::NetworkModel b = ml::load_model(opt.model_b);

  std::string label_a = a.group_count() > 0 ? "multilevel" : "single";
  std::string label_b = b.group_count() > 0 ? "multilevel" : "single";
  if (label_a == label_b) {
    label_a += "_a";
    label_b += "_b";
  }
  ml::EbicTable table = ml::ebic_report({&a, &b}, {label_a, label_b});
  ml::write_text_file((dir / "ebic_compare.csv").string(), ml::ebic_table_csv(table));

  int lower = 0;
  for (Eigen::Index r = 0; r < table.values.rows(); ++r) {
    if (table.values(r, 0) < table.values(r, 1)) ++lower;
  }
  std::string verdict = label_a + " EBIC lower than " + label_b + " on " + std::to_string(lower) + " of " +
                        std::to_string(table.values.rows()) + " nodes\n";
  ml::write_text_file((dir / "verdict.txt").string(), verdict);
  std::cerr << "compare: " << verdict;
}

void run_nira(const NiraOptions& opt) {
  if (opt.model_path.empty()) throw ml::ConfigError("nira: --model is required");
  fs::path dir = prepare_out_dir(opt.out);
  ml::NetworkModel model = ml::load_model(opt.model_path);

  if (opt.level != "fixed" && model.group_count() == 0) {
    throw ml::ConfigError("nira: model is single-level; only --level fixed is available");
  }
  ml::ThresholdLevel level = ml::parse_level(model, opt.level);

  ml::SamplerConfig sampler;
  sampler.beta = opt.beta > 0.0 ? opt.beta : model.beta_inverse_temperature;
  sampler.burn_in = opt.burn_in;
  sampler.thin = opt.thin;
  sampler.n_samples = opt.n_samples;
  sampler.seed = opt.seed;

  ml::NiraConfig cfg;
  cfg.direction = ml::direction_from_string(opt.direction);
  cfg.magnitude_sd = opt.magnitude;
  cfg.adjust = ml::adjust_method_from_string(opt.adjust);
  cfg.alpha = opt.alpha;
  cfg.sd_axis = ml::sd_axis_from_string(opt.sd_axis);
  cfg.threshold_mode = ml::threshold_mode_from_string(opt.threshold_mode);
  cfg.threads = opt.threads;
  if (!opt.intervention_nodes.empty() || !opt.outcome_nodes.empty()) {
    if (opt.intervention_nodes.empty() || opt.outcome_nodes.empty()) {
      throw ml::ConfigError("nira: --intervention-nodes and --outcome-nodes must be given together");
    }
    cfg.partition = ml::partition_from_names(model, opt.intervention_nodes, opt.outcome_nodes);
  }

  ml::NiraOutcome outcome = ml::run_nira(model, level, sampler, cfg);
  const ml::ComparisonReport& report = outcome.report;

  ml::write_text_file((dir / "report.csv").string(), ml::comparison_report_csv(report));
  nlohmann::json j = ml::comparison_report_to_json(report);
  j["sampler"] = {{"beta", sampler.beta},
                  {"burn_in", ml::resolved_burn_in(sampler, model.node_count())},
                  {"thin", ml::resolved_thin(sampler, model.node_count())},
                  {"n_samples", sampler.n_samples},
                  {"seed", sampler.seed}};
  ml::write_text_file((dir / "report.json").string(), j.dump(2) + "\n");
  ml::write_text_file((dir / "ranking.txt").string(), ml::ranking_text(report));

  std::vector<std::string> labels{"baseline"};
  std::vector<double> values{report.baseline_mean};
  for (const auto& row : report.rows) {
    labels.push_back(row.target);
    values.push_back(row.mean_total);
  }
  std::string title = "Mean total score per scenario (" + report.direction + ", level=" + report.level + ")";
  ml::write_text_file((dir / "chart.svg").string(), ml::bar_chart_svg(labels, values, 0, title, "mean total score"));
  std::string chart_csv = ml::csv_row({"scenario", "mean_total", "is_baseline"});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    chart_csv += ml::csv_row({labels[i], ml::format_double(values[i]), i == 0 ? "true" : "false"});
  }
  ml::write_text_file((dir / "chart_data.csv").string(), chart_csv);
  std::cerr << "nira: top target " << (report.ranking.empty() ? "(none)" : report.ranking.front()) << " ("
            << report.direction << ", level=" << report.level << ")\n";
}

void run_synth(const SynthOptions& opt) {
  fs::path dir = prepare_out_dir(opt.out);
  ml::GeneratorSpec spec;
  if (opt.spec_path.empty()) {
    spec = ml::default_generator_spec();
  } else {
    try {
      spec = ml::generator_spec_from_json(nlohmann::json::parse(ml::read_text_file(opt.spec_path)));
    } catch (const nlohmann::json::exception& e) {
      throw ml::DataError(opt.spec_path + ": " + e.what());
    }
  }
  if (opt.seed_given) spec.seed = opt.seed;

  ml::SyntheticData synth = ml::synth_generate(spec);
  ml::write_text_file((dir / "data.csv").string(), ml::dataset_to_csv(synth.data, opt.group_column));

  nlohmann::json truth;
  truth["spec"] = ml::generator_spec_to_json(spec);
  truth["node_names"] = synth.data.node_names;
  truth["group_names"] = synth.data.group_names;
  truth["true_group_intercepts"] = ml::detail::matrix_to_json(synth.true_group_intercepts);
  ml::write_text_file((dir / "truth.json").string(), truth.dump(2) + "\n");
  std::cerr << "synth: wrote " << synth.data.responses.rows() << " rows x " << synth.data.responses.cols()
            << " nodes in " << synth.data.group_names.size() << " groups\n";
}

void run_icc(const IccOptions& opt) {
  if (opt.input.empty()) throw ml::ConfigError("icc: --input is required");
  fs::path dir = prepare_out_dir(opt.out);
  ml::OrdinalDataset raw = ml::load_ordinal_csv(opt.input, opt.group_column, opt.nodes);
  ml::BinaryDataset data = ml::dichotomize(raw, opt.cutoff);

  std::string csv = ml::csv_row({"node", "icc"});
  for (const auto& node : data.node_names) {
    csv += ml::csv_row({node, ml::format_double(ml::compute_icc(data, node))});
  }
  ml::write_text_file((dir / "icc.csv").string(), csv);
  std::cerr << "icc: wrote " << (dir / "icc.csv").string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ising networks from nested binary data, with simulated node interventions"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Options file (TOML, [subcommand] sections; command-line flags win)");
  app.fallthrough();

  FitOptions fit_opt;
  auto* fit = app.add_subcommand("fit", "Estimate a network and persist the model artifact");
  fit->fallthrough();
  fit->add_option("--input", fit_opt.input, "Input CSV (header row, one group column)");
  fit->add_option("--group-column", fit_opt.group_column, "Name of the group column");
  fit->add_option("--nodes", fit_opt.nodes, "Response columns to use (default: all but the group column)")->delimiter(',');
  fit->add_option("--cutoff", fit_opt.cutoff, "Dichotomization cutoff (cell >= cutoff -> 1)");
  fit->add_option("--model", fit_opt.model, "single or multilevel");
  fit->add_option("--rule", fit_opt.rule, "Edge rule: AND or OR");
  fit->add_option("--gamma", fit_opt.gamma, "EBIC gamma");
  fit->add_option("--lambda-count", fit_opt.lambda_count, "Number of penalty values on the path");
  fit->add_option("--lambda-min-ratio", fit_opt.lambda_min_ratio, "Smallest penalty as a fraction of the largest");
  fit->add_option("--max-iter", fit_opt.max_iter, "Iteration cap per penalized fit");
  fit->add_option("--tol", fit_opt.tol, "Relative-change convergence tolerance");
  fit->add_option("--beta", fit_opt.beta, "Inverse temperature stored in the artifact");
  fit->add_option("--threads", fit_opt.threads, "Worker threads (0 = auto)");
  fit->add_option("--out", fit_opt.out, "Output directory");
  fit->callback([&]() { run_fit(fit_opt); });

  CompareOptions cmp_opt;
  auto* cmp = app.add_subcommand("compare", "Side-by-side per-node EBIC of two model artifacts");
  cmp->fallthrough();
  cmp->add_option("--model-a", cmp_opt.model_a, "First model artifact");
  cmp->add_option("--model-b", cmp_opt.model_b, "Second model artifact");
  cmp->add_option("--out", cmp_opt.out, "Output directory");
  cmp->callback([&]() { run_compare(cmp_opt); });

  NiraOptions nira_opt;
  auto* nira = app.add_subcommand("nira", "Simulated node interventions against a simulated baseline");
  nira->fallthrough();
  nira->add_option("--model", nira_opt.model_path, "Model artifact to intervene on");
  nira->add_option("--direction", nira_opt.direction, "alleviate or aggravate");
  nira->add_option("--level", nira_opt.level, "fixed or a group name");
  nira->add_option("--k", nira_opt.magnitude, "Shift magnitude in threshold-SD units");
  nira->add_option("--adjust", nira_opt.adjust, "p adjustment: holm or bonferroni");
  nira->add_option("--alpha", nira_opt.alpha, "Significance level on adjusted p");
  nira->add_option("--sd-axis", nira_opt.sd_axis, "SD across nodes or across groups");
  nira->add_option("--threshold-mode", nira_opt.threshold_mode, "total or random_only group thresholds");
  nira->add_option("--beta", nira_opt.beta, "Inverse temperature (default: model value)");
  nira->add_option("--burn-in", nira_opt.burn_in, "Burn-in steps (0 = 10*M)");
  nira->add_option("--thin", nira_opt.thin, "Steps between retained samples (0 = M)");
  nira->add_option("--n-samples", nira_opt.n_samples, "Samples per scenario");
  nira->add_option("--seed", nira_opt.seed, "Master seed; scenarios derive their own streams");
  nira->add_option("--intervention-nodes", nira_opt.intervention_nodes, "Targets (double-network designs)")->delimiter(',');
  nira->add_option("--outcome-nodes", nira_opt.outcome_nodes, "Scored nodes (double-network designs)")->delimiter(',');
  nira->add_option("--threads", nira_opt.threads, "Worker threads (0 = auto)");
  nira->add_option("--out", nira_opt.out, "Output directory");
  nira->callback([&]() { run_nira(nira_opt); });

  SynthOptions synth_opt;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic nested dataset with known parameters");
  synth->fallthrough();
  synth->add_option("--spec", synth_opt.spec_path, "Generator parameters (JSON; default: bundled population)");
  auto* seed_opt = synth->add_option("--seed", synth_opt.seed, "Override the generator seed");
  synth->add_option("--group-column", synth_opt.group_column, "Group column name in the output CSV");
  synth->add_option("--out", synth_opt.out, "Output directory");
  synth->callback([&]() {
    synth_opt.seed_given = seed_opt->count() > 0;
    run_synth(synth_opt);
  });

  IccOptions icc_opt;
  auto* icc = app.add_subcommand("icc", "Per-node latent-scale intraclass correlation");
  icc->fallthrough();
  icc->add_option("--input", icc_opt.input, "Input CSV (header row, one group column)");
  icc->add_option("--group-column", icc_opt.group_column, "Name of the group column");
  icc->add_option("--nodes", icc_opt.nodes, "Response columns to use (default: all but the group column)")->delimiter(',');
  icc->add_option("--cutoff", icc_opt.cutoff, "Dichotomization cutoff");
  icc->add_option("--out", icc_opt.out, "Output directory");
  icc->callback([&]() { run_icc(icc_opt); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
