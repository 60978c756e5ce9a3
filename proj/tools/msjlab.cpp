// msjlab: simulate, analyze, compare and check stability of multiserver-job
// scheduling policies.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "msj/commands.hpp"

namespace {

struct Overrides {
  std::string config;
  std::string workload;
  std::optional<int> k;
  std::vector<double> lambdas;
  std::vector<std::string> policies;
  std::vector<int> ells;
  std::vector<std::uint64_t> seeds;
  std::optional<double> horizon;
  std::optional<double> warmup;
  std::string out;
  std::optional<double> tolerance;
  std::optional<std::size_t> series_stride;
  std::optional<unsigned> threads;
  bool write_jobs = false;
  bool print_config = false;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-c,--config", o.config, "experiment config (JSON)")->check(CLI::ExistingFile);
  cmd->add_option("--workload", o.workload, "class table (.csv or .json)");
  cmd->add_option("--k", o.k, "number of servers (overrides the table)");
  cmd->add_option("--lambda", o.lambdas, "total arrival rate(s)");
  cmd->add_option("--policy", o.policies, "policy name(s), e.g. msf, msfq, first_fit");
  cmd->add_option("--ell", o.ells, "quickswap threshold(s)");
  cmd->add_option("--seed", o.seeds, "random seed(s)");
  cmd->add_option("--horizon", o.horizon, "simulated time");
  cmd->add_option("--warmup", o.warmup, "discarded initial time (default 10% of horizon)");
  cmd->add_option("--out", o.out, "output directory (default $MSJLAB_OUT or ./msjlab-out)");
  cmd->add_option("--tolerance", o.tolerance, "compare: relative error bound");
  cmd->add_option("--series-stride", o.series_stride, "record n(t) every m-th change (0: off)");
  cmd->add_option("--threads", o.threads, "worker threads (0: all cores)");
  cmd->add_flag("--jobs", o.write_jobs, "write per-job jobs.csv files");
  cmd->add_flag("--print-config", o.print_config, "print the effective config and exit");
}

msj::ExperimentConfig build_config(msj::Mode mode, const Overrides& o) {
  msj::ExperimentConfig c = o.config.empty() ? msj::ExperimentConfig{} : msj::load_config(o.config);
  c.mode = mode;
  if (!o.workload.empty()) {
    c.workload = {};
    c.workload.path = o.workload;
  }
  if (o.k) {
    if (c.workload.inline_table) {
      (*c.workload.inline_table)["k"] = *o.k;
    } else {
      c.workload.k = o.k;
    }
  }
  if (!o.lambdas.empty()) c.lambdas = o.lambdas;
  if (!o.policies.empty()) {
    c.policies.clear();
    for (const auto& p : o.policies) c.policies.push_back({msj::policy_kind_from_string(p)});
  }
  if (!o.ells.empty()) {
    if (mode == msj::Mode::analyze || mode == msj::Mode::compare) {
      c.ells = o.ells;
    } else {
      if (o.ells.size() != 1) throw msj::ConfigError("--ell takes one value outside analyze/compare");
      for (auto& p : c.policies) {
        if (p.kind == msj::PolicyKind::msfq || p.kind == msj::PolicyKind::static_quickswap) p.threshold = o.ells[0];
      }
    }
  }
  if (!o.seeds.empty()) c.seeds = o.seeds;
  if (o.horizon) c.horizon = *o.horizon;
  if (o.warmup) c.warmup = *o.warmup;
  if (!o.out.empty()) {
    c.out = o.out;
  } else if (c.out.empty()) {
    const char* env = std::getenv("MSJLAB_OUT");
    c.out = env && *env ? env : "msjlab-out";
  }
  if (o.tolerance) c.tolerance = *o.tolerance;
  if (o.series_stride) c.series_stride = *o.series_stride;
  if (o.threads) c.threads = *o.threads;
  if (o.write_jobs) c.write_jobs = true;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiserver-job scheduling simulator and MSFQ analysis"};
  app.require_subcommand(1);
  Overrides o;
  struct Sub {
    msj::Mode mode;
    const char* help;
  };
  std::vector<std::pair<CLI::App*, msj::Mode>> subs;
  for (auto [mode, help] : {Sub{msj::Mode::simulate, "run simulations over policies, rates and seeds"},
                            Sub{msj::Mode::analyze, "evaluate the MSFQ mean response time approximation"},
                            Sub{msj::Mode::compare, "compare the approximation against simulation"},
                            Sub{msj::Mode::stability, "report stability boundaries"}}) {
    auto* cmd = app.add_subcommand(msj::to_string(mode), help);
    add_common(cmd, o);
    subs.emplace_back(cmd, mode);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? msj::kExitOk : msj::kExitConfig;
  }

  try {
    for (auto [cmd, mode] : subs) {
      if (!cmd->parsed()) continue;
      const auto config = build_config(mode, o);
      if (o.print_config) {
        std::cout << msj::config_to_json(config).dump(2) << '\n';
        return msj::kExitOk;
      }
      return msj::run_experiment(config, std::cout);
    }
  } catch (const msj::ConfigError& e) {
    std::cerr << "msjlab: " << e.what() << '\n';
    return msj::kExitConfig;
  } catch (const msj::UnstableError& e) {
    std::cerr << "msjlab: " << e.what() << '\n';
    return msj::kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "msjlab: " << e.what() << '\n';
    return msj::kExitConfig;
  }
  return msj::kExitConfig;
}
