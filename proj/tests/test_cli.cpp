// End-to-end checks of the command-line tool: every command writes its files,
// runs are byte-deterministic under a fixed seed, the artifact round-trip
// loses nothing relative to an in-process pipeline, and errors exit nonzero.

#include <catch2/catch_amalgamated.hpp>
#include <cstdlib>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

#include "mlnira/mlnira.hpp"

namespace fs = std::filesystem;
using namespace mlnira;

namespace {

const std::string cli = MLNIRA_CLI_PATH;

int run(const std::string& args) {
  std::string cmd = cli + " " + args + " 2>/dev/null";
  int status = std::system(cmd.c_str());
  if (status == -1) return -1;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("mlnira_cli_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

std::string small_spec_json() {
  GeneratorSpec spec;
  spec.group_count = 4;
  spec.rows_per_group = 150;
  spec.weights = Eigen::MatrixXd::Zero(3, 3);
  spec.weights(0, 1) = spec.weights(1, 0) = 1.2;
  spec.weights(1, 2) = spec.weights(2, 1) = 1.0;
  spec.tau.resize(3);
  spec.tau << -0.8, -1.2, -1.0;
  spec.group_intercept_sd = 0.6;
  spec.seed = 321;
  return generator_spec_to_json(spec).dump(2) + "\n";
}

}  // namespace

TEST_CASE("the full command-line pipeline") {
  TempDir dir("pipeline");
  write_text_file(dir / "gen.json", small_spec_json());

  SECTION("synth, fit, nira, compare, icc all produce their files") {
    REQUIRE(run("synth --spec " + (dir / "gen.json") + " --out " + (dir / "synth")) == 0);
    REQUIRE(fs::exists(dir / "synth/data.csv"));
    REQUIRE(fs::exists(dir / "synth/truth.json"));

    REQUIRE(run("fit --input " + (dir / "synth/data.csv") + " --group-column group --out " + (dir / "fit")) == 0);
    REQUIRE(fs::exists(dir / "fit/model.json"));
    REQUIRE(fs::exists(dir / "fit/ebic.csv"));
    REQUIRE(fs::exists(dir / "fit/edges.csv"));

    NetworkModel model = load_model(dir / "fit/model.json");
    CHECK(model.node_count() == 3);
    CHECK(model.group_count() == 4);

    REQUIRE(run("fit --input " + (dir / "synth/data.csv") + " --group-column group --model single --out " +
                (dir / "fit_single")) == 0);
    NetworkModel single = load_model(dir / "fit_single/model.json");
    CHECK(single.group_count() == 0);

    REQUIRE(run("compare --model-a " + (dir / "fit/model.json") + " --model-b " +
                (dir / "fit_single/model.json") + " --out " + (dir / "cmp")) == 0);
    REQUIRE(fs::exists(dir / "cmp/ebic_compare.csv"));
    std::string verdict = read_text_file(dir / "cmp/verdict.txt");
    CHECK(verdict.find("multilevel EBIC lower than single on") != std::string::npos);

    REQUIRE(run("nira --model " + (dir / "fit/model.json") +
                " --direction alleviate --level fixed --n-samples 800 --seed 5 --out " + (dir / "nira")) == 0);
    for (const char* name : {"report.csv", "report.json", "ranking.txt", "chart.svg", "chart_data.csv"}) {
      REQUIRE(fs::exists(dir / (std::string("nira/") + name)));
    }
    std::string svg = read_text_file(dir / "nira/chart.svg");
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("baseline") != std::string::npos);

    REQUIRE(run("icc --input " + (dir / "synth/data.csv") + " --group-column group --out " + (dir / "icc")) == 0);
    std::string icc_csv = read_text_file(dir / "icc/icc.csv");
    CHECK(icc_csv.rfind("node,icc\n", 0) == 0);
  }
}

TEST_CASE("artifacts and reports are byte-identical across reruns") {
  TempDir dir("determinism");
  write_text_file(dir / "gen.json", small_spec_json());
  REQUIRE(run("synth --spec " + (dir / "gen.json") + " --out " + (dir / "s1")) == 0);
  REQUIRE(run("synth --spec " + (dir / "gen.json") + " --out " + (dir / "s2")) == 0);
  CHECK(read_text_file(dir / "s1/data.csv") == read_text_file(dir / "s2/data.csv"));

  const std::string fit_args = " --input " + (dir / "s1/data.csv") + " --group-column group --out ";
  REQUIRE(run("fit" + fit_args + (dir / "f1")) == 0);
  REQUIRE(run("fit" + fit_args + (dir / "f2")) == 0);
  CHECK(read_text_file(dir / "f1/model.json") == read_text_file(dir / "f2/model.json"));
  CHECK(read_text_file(dir / "f1/ebic.csv") == read_text_file(dir / "f2/ebic.csv"));

  const std::string nira_args = " --model " + (dir / "f1/model.json") +
                                " --direction aggravate --level g2 --n-samples 500 --seed 9 --out ";
  REQUIRE(run("nira" + nira_args + (dir / "n1")) == 0);
  REQUIRE(run("nira" + nira_args + (dir / "n2")) == 0);
  CHECK(read_text_file(dir / "n1/report.csv") == read_text_file(dir / "n2/report.csv"));
  CHECK(read_text_file(dir / "n1/report.json") == read_text_file(dir / "n2/report.json"));
  CHECK(read_text_file(dir / "n1/chart.svg") == read_text_file(dir / "n2/chart.svg"));
}

TEST_CASE("the persisted artifact reproduces the in-process pipeline") {
  TempDir dir("roundtrip");
  write_text_file(dir / "gen.json", small_spec_json());
  REQUIRE(run("synth --spec " + (dir / "gen.json") + " --out " + (dir / "synth")) == 0);
  REQUIRE(run("fit --input " + (dir / "synth/data.csv") + " --group-column group --out " + (dir / "fit")) == 0);
  REQUIRE(run("nira --model " + (dir / "fit/model.json") +
              " --direction alleviate --level fixed --n-samples 700 --seed 31 --out " + (dir / "nira")) == 0);

  // same pipeline without touching disk
  GeneratorSpec spec = generator_spec_from_json(nlohmann::json::parse(small_spec_json()));
  SyntheticData synth = synth_generate(spec);
  NetworkModel model = fit_multilevel_ising(synth.data);
  SamplerConfig sampler;
  sampler.n_samples = 700;
  sampler.seed = 31;
  NiraConfig cfg;
  NiraOutcome outcome = run_nira(model, ThresholdLevel::fixed(), sampler, cfg);

  CHECK(read_text_file(dir / "fit/model.json") == model_to_string(model));
  CHECK(read_text_file(dir / "nira/report.csv") == comparison_report_csv(outcome.report));
}

TEST_CASE("config files supply defaults and flags win") {
  TempDir dir("config");
  write_text_file(dir / "gen.json", small_spec_json());
  REQUIRE(run("synth --spec " + (dir / "gen.json") + " --out " + (dir / "synth")) == 0);
  REQUIRE(run("fit --input " + (dir / "synth/data.csv") + " --group-column group --out " + (dir / "fit")) == 0);

  write_text_file(dir / "run.toml",
                  "[nira]\nmodel = \"" + (dir / "fit/model.json") +
                      "\"\ndirection = \"aggravate\"\nn-samples = 321\nseed = 12\nout = \"" + (dir / "nira") +
                      "\"\n");
  REQUIRE(run("nira --config " + (dir / "run.toml")) == 0);
  nlohmann::json report = nlohmann::json::parse(read_text_file(dir / "nira/report.json"));
  CHECK(report["direction"] == "aggravate");
  CHECK(report["sampler"]["n_samples"] == 321);

  // a flag on the command line overrides the config value
  REQUIRE(run("nira --config " + (dir / "run.toml") + " --direction alleviate --out " + (dir / "nira2")) == 0);
  nlohmann::json second = nlohmann::json::parse(read_text_file(dir / "nira2/report.json"));
  CHECK(second["direction"] == "alleviate");
}

TEST_CASE("errors exit nonzero with nothing on stdout") {
  TempDir dir("errors");
  CHECK(run("fit --input " + (dir / "missing.csv") + " --group-column g --out " + (dir / "out")) != 0);
  CHECK(run("nira --model " + (dir / "missing.json") + " --out " + (dir / "out")) != 0);
  CHECK(run("definitely-not-a-command") != 0);

  // group level against a single-level artifact
  write_text_file(dir / "gen.json", small_spec_json());
  REQUIRE(run("synth --spec " + (dir / "gen.json") + " --out " + (dir / "synth")) == 0);
  REQUIRE(run("fit --input " + (dir / "synth/data.csv") +
              " --group-column group --model single --out " + (dir / "fit")) == 0);
  CHECK(run("nira --model " + (dir / "fit/model.json") + " --level g1 --out " + (dir / "nira")) != 0);
}
