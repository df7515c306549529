#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "omiga/cli.hpp"
#include "omiga/dataset.hpp"
#include "omiga/trainer.hpp"

using namespace omiga;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path temp_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("omiga_cli_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string read_file(const fs::path& p) {
  std::ifstream f(p);
  REQUIRE(f);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

std::string matrix_cfg() { return std::string(OMIGA_CONFIG_DIR) + "/matrix.json"; }

int run(std::initializer_list<std::string> args) {
  return cli::run(std::vector<std::string>(args));
}

}  // namespace

TEST_CASE("gen-data writes a loadable dataset deterministically") {
  const fs::path out1 = temp_dir("gen1") / "d";
  const fs::path out2 = temp_dir("gen2") / "d";
  CHECK(run({"gen-data", "--env", matrix_cfg(), "--quality", "uniform", "--episodes", "100",
             "--seed", "0", "--out", out1.string()}) == 0);
  CHECK(run({"gen-data", "--env", matrix_cfg(), "--quality", "uniform", "--episodes", "100",
             "--seed", "0", "--out", out2.string()}) == 0);
  CHECK(read_file(out1 / "transitions.jsonl") == read_file(out2 / "transitions.jsonl"));
  Dataset ds = load(out1.string());
  CHECK(ds.manifest.n_episodes == 100);
}

TEST_CASE("mix-data blends and validates proportions") {
  const fs::path base = temp_dir("mix");
  const fs::path d1 = base / "a", d2 = base / "b", out = base / "m";
  REQUIRE(run({"gen-data", "--env", matrix_cfg(), "--quality", "expert", "--episodes", "40",
               "--seed", "1", "--out", d1.string()}) == 0);
  REQUIRE(run({"gen-data", "--env", matrix_cfg(), "--quality", "poor", "--episodes", "40",
               "--seed", "2", "--out", d2.string()}) == 0);
  CHECK(run({"mix-data", "--dataset", d1.string(), "--dataset", d2.string(), "--proportions",
             "0.5,0.5", "--seed", "3", "--out", out.string()}) == 0);
  Dataset mixed = load(out.string());
  CHECK(mixed.manifest.n_episodes == 40);
  CHECK(run({"mix-data", "--dataset", d1.string(), "--dataset", d2.string(), "--proportions",
             "0.7,0.4", "--seed", "3", "--out", out.string()}) == 1);
}

TEST_CASE("train and eval round-trip through run directories") {
  const fs::path base = temp_dir("train");
  const fs::path data = base / "d", rundir = base / "run";
  REQUIRE(run({"gen-data", "--env", matrix_cfg(), "--quality", "uniform", "--episodes", "500",
               "--seed", "0", "--out", data.string()}) == 0);
  CHECK(run({"train", "--dataset", data.string(), "--env", matrix_cfg(), "--alpha", "1",
             "--steps", "300", "--seed", "0", "--out", rundir.string(), "--hidden", "8",
             "--mixer-hidden", "4", "--eval-interval", "100", "--eval-episodes", "8"}) == 0);
  CHECK(fs::exists(rundir / "metrics.csv"));
  CHECK(fs::exists(rundir / "checkpoint.json"));
  CHECK(fs::exists(rundir / "run.json"));
  const std::string csv = read_file(rundir / "metrics.csv");
  CHECK(csv.rfind("step,v_loss,q_loss,pi_loss,mean_w,eval_return\n", 0) == 0);
  // header + 3 rows
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);

  CHECK(run({"eval", "--checkpoint", (rundir / "checkpoint.json").string(), "--env",
             matrix_cfg(), "--episodes", "16", "--seed", "1", "--mode", "greedy"}) == 0);
}

TEST_CASE("bc-train produces the same run layout") {
  const fs::path base = temp_dir("bc");
  const fs::path data = base / "d", rundir = base / "run";
  REQUIRE(run({"gen-data", "--env", matrix_cfg(), "--quality", "medium", "--episodes", "200",
               "--seed", "0", "--out", data.string()}) == 0);
  CHECK(run({"bc-train", "--dataset", data.string(), "--env", matrix_cfg(), "--steps", "200",
             "--seed", "0", "--out", rundir.string(), "--hidden", "8", "--mixer-hidden", "4",
             "--eval-interval", "100", "--eval-episodes", "8"}) == 0);
  const json rj = json::parse(read_file(rundir / "run.json"));
  CHECK(rj.at("algo") == "bc");
}

TEST_CASE("oracle-solve emits the expected report keys and values") {
  const fs::path base = temp_dir("oracle");
  // one-hot payoff so the fixed point is the hand-computed constant
  const fs::path cfg = base / "and.json";
  std::ofstream(cfg) << R"({"env_name": "matrix_game", "n_agents": 2,
                            "payoff_table": [[1.0, 0.0], [0.0, 0.0]], "horizon": 1})";
  const fs::path report = base / "report.json";
  CHECK(run({"oracle-solve", "--env", cfg.string(), "--alpha", "1", "--quality", "uniform",
             "--out", report.string()}) == 0);
  const json j = json::parse(read_file(report));
  for (const char* key : {"V_star", "u_star", "pi_star", "alpha", "gamma", "iterations",
                          "residual"})
    CHECK(j.contains(key));
  CHECK(j.at("V_star")[0].get<double>() ==
        doctest::Approx(std::log((std::exp(1.0) + 3.0) / 4.0)).epsilon(1e-9));
  CHECK(j.at("pi_star")[0][0].get<double>() == doctest::Approx(0.4754).epsilon(1e-3));
}

TEST_CASE("report aggregates runs and rejects mixed environments") {
  const fs::path base = temp_dir("report");
  auto fake_run = [&](const std::string& name, const std::string& env_name, double ret) {
    const fs::path dir = base / name;
    fs::create_directories(dir);
    json rj{{"algo", "omiga"},       {"variant", "full"},  {"env_name", env_name},
            {"env_config", "x"},     {"dataset", "d"},     {"alpha", 1.0},
            {"gamma", 0.99},         {"steps", 10},        {"seed", 0},
            {"eval_mode", "stochastic"}, {"final_eval_return", ret}};
    std::ofstream(dir / "run.json") << rj.dump(2);
    std::ofstream(dir / "metrics.csv")
        << "step,v_loss,q_loss,pi_loss,mean_w,eval_return\n10,0,0,0,0," << ret << "\n";
    return dir.string();
  };
  const std::string r1 = fake_run("r1", "matrix_game", 0.5);
  const std::string r2 = fake_run("r2", "matrix_game", 0.7);
  const fs::path out = base / "report.csv";
  CHECK(run({"report", r1, r2, "--out", out.string()}) == 0);
  const std::string csv = read_file(out);
  CHECK(csv.find("omiga,full") != std::string::npos);
  CHECK(csv.find("0.6") != std::string::npos);  // mean of 0.5 and 0.7

  const std::string r3 = fake_run("r3", "coop_grid", 1.0);
  CHECK(run({"report", r1, r3}) == 1);
}

TEST_CASE("verify passes on both shipped configs with default tolerances") {
  const fs::path base = temp_dir("verify");
  CHECK(run({"verify", "--env", matrix_cfg(), "--alpha", "1", "--seed", "0", "--steps", "4000",
             "--out", (base / "m").string()}) == 0);
  CHECK(run({"verify", "--env", std::string(OMIGA_CONFIG_DIR) + "/coop_grid.json", "--seed",
             "0", "--out", (base / "g").string()}) == 0);
  const json report = json::parse(read_file(base / "m" / "report.json"));
  CHECK(report.at("overall_pass") == true);
  CHECK(report.at("checks").size() >= 8);
}

TEST_CASE("unknown flags and missing arguments exit with one") {
  CHECK(run({"train", "--bogus"}) == 1);
  CHECK(run({"no-such-command"}) == 1);
  CHECK(run({}) == 1);
  CHECK(run({"gen-data"}) == 1);  // missing required flags
}

TEST_CASE("numeric failures exit with two") {
  const fs::path base = temp_dir("numfail");
  // a huge payoff overflows the squared TD error on the first step
  const fs::path cfg = base / "huge.json";
  std::ofstream(cfg) << R"({"env_name": "matrix_game", "n_agents": 2,
                            "payoff_table": [[1e200, 0.0], [0.0, 0.0]], "horizon": 1})";
  const fs::path data = base / "d", rundir = base / "run";
  REQUIRE(run({"gen-data", "--env", cfg.string(), "--quality", "uniform", "--episodes", "50",
               "--seed", "0", "--out", data.string()}) == 0);
  CHECK(run({"train", "--dataset", data.string(), "--env", cfg.string(), "--steps", "50",
             "--seed", "0", "--out", rundir.string(), "--hidden", "4", "--mixer-hidden", "4",
             "--eval-interval", "50", "--eval-episodes", "4"}) == 2);
}
