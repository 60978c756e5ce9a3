#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "msj/commands.hpp"

using namespace msj;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("msj_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string first_line(const fs::path& file) {
  std::ifstream in(file);
  std::string line;
  std::getline(in, line);
  return line;
}

std::size_t line_count(const fs::path& file) {
  std::ifstream in(file);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

}  // namespace

TEST(Config, SweepForms) {
  EXPECT_EQ(detail::parse_sweep(nlohmann::json(2.5)), (std::vector<double>{2.5}));
  EXPECT_EQ(detail::parse_sweep(nlohmann::json::parse("[1, 2]")), (std::vector<double>{1, 2}));
  EXPECT_EQ(detail::parse_sweep(nlohmann::json::parse(R"({"values": [3]})")), (std::vector<double>{3}));
  const auto grid = detail::parse_sweep(nlohmann::json::parse(R"({"from": 0.5, "to": 7.5, "step": 0.5})"));
  ASSERT_EQ(grid.size(), 15u);
  EXPECT_DOUBLE_EQ(grid.back(), 7.5);
  EXPECT_THROW(detail::parse_sweep(nlohmann::json::parse(R"({"from": 0, "to": 1, "step": 0})")), ConfigError);
}

TEST(Config, JsonRoundTrip) {
  const auto j = nlohmann::json::parse(R"({
    "mode": "compare",
    "workload": {"k": 8, "classes": [{"need": 1, "fraction": 0.9}, {"need": 8, "fraction": 0.1}]},
    "policies": ["msf", {"kind": "msfq", "ell": 3}],
    "sweep": {"from": 1, "to": 3, "step": 1},
    "horizon": 5000, "warmup": 500, "seeds": [1, 2], "out": "x", "tolerance": 0.2, "threads": 2
  })");
  const auto c = config_from_json(j);
  EXPECT_EQ(c.mode, Mode::compare);
  EXPECT_EQ(c.lambdas, (std::vector<double>{1, 2, 3}));
  EXPECT_EQ(c.policies.size(), 2u);
  EXPECT_EQ(c.workload_at(2.0)[0].arrival_rate, 1.8);
  EXPECT_EQ(config_from_json(config_to_json(c)), c);
}

TEST(Config, PathWorkloadWithK) {
  const auto dir = temp_dir("path_workload");
  std::ofstream(dir / "table.csv") << "need,fraction,mean_size\n1,0.9,1\n16,0.1,1\n";
  std::ofstream(dir / "cfg.json") << R"({"workload": {"path": "table.csv", "k": 16}, "lambdas": [2]})";
  const auto c = load_config((dir / "cfg.json").string());
  EXPECT_EQ(fs::path(c.workload.path), (dir / "table.csv").lexically_normal());
  const auto spec = c.workload_at(2.0);
  EXPECT_EQ(spec.k(), 16);
  EXPECT_TRUE(spec.is_one_or_all());
  EXPECT_EQ(config_from_json(config_to_json(c)), c);
}

TEST(Config, DefaultsAndValidation) {
  ExperimentConfig c;
  EXPECT_EQ(c.workload_at(7.5).k(), 32);
  EXPECT_NEAR(c.workload_at(7.5)[0].arrival_rate, 6.75, 1e-12);
  c.horizon = -1;
  EXPECT_THROW(c.validate(), ConfigError);
  c.horizon = 10;
  c.warmup = 10;
  EXPECT_THROW(c.validate(), ConfigError);
  c.warmup.reset();
  c.mode = Mode::analyze;
  c.policies = {PolicyConfig{PolicyKind::fcfs}};
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"mode": "fly"})")), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"horizon": "long"})")), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/cfg.json"), ConfigError);
}

TEST(Commands, ParallelForKeepsIndexOrder) {
  std::vector<int> out(100, -1);
  parallel_for(out.size(), 4, [&](std::size_t i) { out[i] = static_cast<int>(i * i); });
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out[i], static_cast<int>(i * i));
  EXPECT_THROW(parallel_for(10, 3, [](std::size_t i) {
                 if (i == 7) throw ConfigError("boom");
               }),
               ConfigError);
}

TEST(Commands, SimulateWritesFiles) {
  ExperimentConfig c;
  c.workload.inline_table = nlohmann::json::parse(
      R"({"k": 8, "classes": [{"need": 1, "fraction": 0.9}, {"need": 8, "fraction": 0.1}]})");
  c.policies = {PolicyConfig{PolicyKind::msf}, PolicyConfig{PolicyKind::msfq}};
  c.lambdas = {2.0};
  c.horizon = 500;
  c.series_stride = 5;
  c.write_jobs = true;
  c.out = temp_dir("simulate").string();
  std::ostringstream log;
  EXPECT_EQ(cmd_simulate(c, log), kExitOk);
  const fs::path out(c.out);
  EXPECT_EQ(first_line(out / "results.csv"), "policy,lambda,seed,class,mean_T,ci,weight");
  EXPECT_EQ(line_count(out / "results.csv"), 1u + 2 * 4);
  EXPECT_EQ(first_line(out / "runs/msfq_lam2_seed1/phases.csv"), "phase,entry,exit");
  EXPECT_EQ(first_line(out / "runs/msfq_lam2_seed1/series.csv"), "t,n1,n8");
  EXPECT_EQ(first_line(out / "runs/msf_lam2_seed1/jobs.csv"), "id,class,arrival,start,completion");
  EXPECT_FALSE(fs::exists(out / "runs/msf_lam2_seed1/phases.csv"));
  std::ifstream echo(out / "config.json");
  EXPECT_EQ(config_from_json(nlohmann::json::parse(echo)), c);
}

TEST(Commands, SimulateRejectsIncompatiblePolicy) {
  ExperimentConfig c;
  c.workload.inline_table = nlohmann::json::parse(
      R"({"k": 6, "classes": [{"need": 1, "fraction": 0.5}, {"need": 2, "fraction": 0.5}]})");
  c.policies = {PolicyConfig{PolicyKind::msfq}};
  c.lambdas = {1.0};
  c.out = temp_dir("reject").string();
  std::ostringstream log;
  EXPECT_THROW(cmd_simulate(c, log), ConfigError);
  EXPECT_FALSE(fs::exists(fs::path(c.out) / "results.csv"));
}

TEST(Commands, AnalyzeMarksInfeasibleRows) {
  ExperimentConfig c;
  c.mode = Mode::analyze;
  c.lambdas = {6.0, 8.0};
  c.ells = {0, 31};
  c.out = temp_dir("analyze").string();
  std::ostringstream log;
  EXPECT_EQ(cmd_analyze(c, log), kExitOk);
  const fs::path out(c.out);
  EXPECT_EQ(first_line(out / "analysis.csv"), "policy,lambda,ell,stable,E_T,E_T_small,E_T_large,E_T_weighted,m1,m2,m3,m4");
  EXPECT_EQ(line_count(out / "analysis.csv"), 5u);
  std::ifstream in(out / "analysis.json");
  const auto j = nlohmann::json::parse(in);
  ASSERT_EQ(j.size(), 4u);
  EXPECT_EQ(j[0]["policy"], "msf");
  EXPECT_TRUE(j[0].contains("E_T"));
  EXPECT_TRUE(j[3]["infeasible"].get<bool>());
}

TEST(Commands, CompareExitCodes) {
  ExperimentConfig c;
  c.mode = Mode::compare;
  c.lambdas = {6.0};
  c.ells = {31};
  c.horizon = 2e4;
  c.out = temp_dir("compare").string();
  std::ostringstream log;
  c.tolerance = 1e-9;
  EXPECT_EQ(cmd_compare(c, log), kExitTolerance);
  EXPECT_EQ(first_line(fs::path(c.out) / "compare.csv"), "policy,lambda,analytic_E_T,sim_E_T,sim_ci,rel_error,pass");
  c.tolerance = 10.0;
  EXPECT_EQ(cmd_compare(c, log), kExitOk);
}

TEST(Commands, StabilityBoundaries) {
  ExperimentConfig c;
  c.mode = Mode::stability;
  c.lambdas = {7.0, 8.0};
  c.out = temp_dir("stability").string();
  std::ostringstream log;
  EXPECT_EQ(cmd_stability(c, log), kExitOk);
  std::ifstream in(fs::path(c.out) / "stability.json");
  const auto j = nlohmann::json::parse(in);
  EXPECT_NEAR(j["one_or_all_boundary"].get<double>(), 7.8049, 1e-4);
  EXPECT_EQ(line_count(fs::path(c.out) / "stability.csv"), 3u);
}
