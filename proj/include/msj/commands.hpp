#pragma once

// The four experiment drivers behind the command-line tool. Each reads an
// ExperimentConfig, writes its files under config.out, prints a short table
// and returns the process exit code.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "msj/analysis/msfq.hpp"
#include "msj/analysis/stability.hpp"
#include "msj/config.hpp"
#include "msj/io.hpp"
#include "msj/metrics.hpp"
#include "msj/simulator.hpp"

namespace msj {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitTolerance = 2;

// Runs task(i) for i in [0, n) on up to `threads` workers. Results are
// stored by index, so output order never depends on scheduling.
inline void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& task) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          task(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

namespace detail {

inline std::string run_tag(const PolicyConfig& p, double lambda, std::uint64_t seed) {
  std::string label = p.label();
  for (char& ch : label) {
    if (ch == '(' || ch == ')') ch = '_';
  }
  while (!label.empty() && label.back() == '_') label.pop_back();
  return label + "_lam" + format_real(lambda) + "_seed" + std::to_string(seed);
}

inline void write_config_echo(const ExperimentConfig& c) {
  auto out = open_output(std::filesystem::path(c.out) / "config.json");
  out << config_to_json(c).dump(2) << '\n';
}

// Thresholds evaluated for one policy in analyze/compare mode.
inline std::vector<int> thresholds_for(const ExperimentConfig& c, const PolicyConfig& p, int k) {
  if (p.kind == PolicyKind::msf) return {0};
  if (!c.ells.empty()) return c.ells;
  return {p.threshold.value_or(k - 1)};
}

inline std::string analytic_label(int ell) { return ell == 0 ? "msf" : "msfq(" + std::to_string(ell) + ")"; }

}  // namespace detail

// ---------------------------------------------------------------------------

inline int cmd_simulate(const ExperimentConfig& c, std::ostream& log) {
  c.validate();
  if (c.policies.empty()) throw ConfigError("simulate: no policies given");
  struct Cell {
    std::size_t policy;
    double lambda;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (std::size_t p = 0; p < c.policies.size(); ++p) {
    for (double l : c.lambdas) {
      for (auto s : c.seeds) cells.push_back({p, l, s});
    }
  }
  // Validate every workload/policy pair before spending time on runs.
  for (double l : c.lambdas) {
    const auto spec = c.workload_at(l);
    for (const auto& p : c.policies) Scheduler(p, spec);
  }
  detail::write_config_echo(c);

  std::vector<std::vector<ResultRow>> rows(cells.size());
  std::vector<std::string> notes(cells.size());
  parallel_for(cells.size(), c.threads, [&](std::size_t i) {
    const auto& cell = cells[i];
    const auto& policy = c.policies[cell.policy];
    const auto spec = c.workload_at(cell.lambda);
    RunOptions o;
    o.horizon = c.horizon;
    o.warmup = c.warmup;
    o.seed = cell.seed;
    o.series_stride = c.series_stride;
    o.keep_jobs = true;
    const auto ev = run(spec, policy, o);
    const auto stats = aggregate(ev);
    rows[i] = result_rows(policy.label(), cell.lambda, cell.seed, stats);
    for (const auto& w : stats.warnings) notes[i] += policy.label() + " lambda=" + format_real(cell.lambda) + ": " + w + "\n";

    const auto dir = std::filesystem::path(c.out) / "runs" / detail::run_tag(policy, cell.lambda, cell.seed);
    if (!ev.phases.empty()) {
      auto f = open_output(dir / "phases.csv");
      write_phases_csv(f, ev);
    }
    if (c.series_stride > 0) {
      auto f = open_output(dir / "series.csv");
      write_series_csv(f, ev);
    }
    if (c.write_jobs) {
      auto f = open_output(dir / "jobs.csv");
      write_jobs_csv(f, ev);
    }
  });

  std::vector<ResultRow> all;
  for (auto& r : rows) all.insert(all.end(), r.begin(), r.end());
  auto f = open_output(std::filesystem::path(c.out) / "results.csv");
  write_results_csv(f, all);

  for (const auto& n : notes) log << n;
  log << std::left << std::setw(24) << "policy" << std::setw(10) << "lambda" << std::setw(8) << "seed"
      << std::setw(14) << "E[T]" << "E[T^w]\n";
  for (const auto& r : all) {
    if (r.cls != "weighted") continue;
    const auto& pooled = *std::find_if(all.begin(), all.end(), [&](const ResultRow& x) {
      return x.policy == r.policy && x.lambda == r.lambda && x.seed == r.seed && x.cls == "all";
    });
    char line[160];
    std::snprintf(line, sizeof line, "%-24s%-10g%-8llu%-14.4f%.4f\n", r.policy.c_str(), r.lambda,
                  static_cast<unsigned long long>(r.seed), pooled.mean, r.mean);
    log << line;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

inline int cmd_analyze(const ExperimentConfig& c, std::ostream& log) {
  c.validate();
  std::vector<PolicyConfig> policies = c.policies;
  if (policies.empty()) policies.push_back({PolicyKind::msfq});
  using nlohmann::json;
  json results = json::array();
  std::ostringstream csv;
  csv << "policy,lambda,ell,stable,E_T,E_T_small,E_T_large,E_T_weighted,m1,m2,m3,m4\n";
  for (double l : c.lambdas) {
    const auto spec = c.workload_at(l);
    if (!spec.is_one_or_all()) throw ConfigError("analyze: workload must be one-or-all");
    for (const auto& p : policies) {
      for (int ell : detail::thresholds_for(c, p, spec.k())) {
        const auto params = analysis::MsfqParams::from_workload(spec, ell);
        params.validate();
        const std::string label = detail::analytic_label(ell);
        try {
          const auto r = analysis::analyze_msfq(params);
          auto j = analysis::to_json(r);
          j["policy"] = label;
          j["lambda"] = l;
          results.push_back(j);
          const auto& m = r.moments.m;
          csv << label << ',' << format_real(l) << ',' << ell << ",1," << format_real(r.mean_response) << ','
              << format_real(r.mean_response_small) << ',' << format_real(r.mean_response_large) << ','
              << format_real(r.weighted_response) << ',' << format_real(m[0]) << ',' << format_real(m[1]) << ','
              << format_real(m[2]) << ',' << format_real(m[3]) << '\n';
          char line[160];
          std::snprintf(line, sizeof line, "%-12s lambda=%-8g E[T]=%-12.4f E[T^w]=%.4f\n", label.c_str(), l,
                        r.mean_response, r.weighted_response);
          log << line;
        } catch (const UnstableError&) {
          results.push_back({{"policy", label}, {"lambda", l}, {"params", analysis::to_json(params)}, {"infeasible", true}});
          csv << label << ',' << format_real(l) << ',' << ell << ",0,nan,nan,nan,nan,nan,nan,nan,nan\n";
          log << label << " lambda=" << l << " infeasible (outside the stability region)\n";
        }
      }
    }
  }
  detail::write_config_echo(c);
  open_output(std::filesystem::path(c.out) / "analysis.csv") << csv.str();
  open_output(std::filesystem::path(c.out) / "analysis.json") << results.dump(2) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct CompareRow {
  std::string policy;
  double lambda = 0;
  bool feasible = true;
  double analytic = std::nan("");
  double simulated = std::nan("");
  double ci = std::nan("");
  double rel_error = std::nan("");
  bool pass = false;
};

inline int cmd_compare(const ExperimentConfig& c, std::ostream& log) {
  c.validate();
  std::vector<PolicyConfig> policies = c.policies;
  if (policies.empty()) policies.push_back({PolicyKind::msfq});
  struct Cell {
    double lambda;
    int ell;
  };
  std::vector<Cell> cells;
  for (double l : c.lambdas) {
    const auto spec = c.workload_at(l);
    if (!spec.is_one_or_all()) throw ConfigError("compare: workload must be one-or-all");
    for (const auto& p : policies) {
      for (int ell : detail::thresholds_for(c, p, spec.k())) {
        analysis::MsfqParams::from_workload(spec, ell).validate();
        cells.push_back({l, ell});
      }
    }
  }
  detail::write_config_echo(c);

  std::vector<CompareRow> rows(cells.size());
  parallel_for(cells.size(), c.threads, [&](std::size_t i) {
    const auto [l, ell] = cells[i];
    const auto spec = c.workload_at(l);
    CompareRow& row = rows[i];
    row.policy = detail::analytic_label(ell);
    row.lambda = l;
    try {
      row.analytic = analysis::analyze_msfq(spec, ell).mean_response;
    } catch (const UnstableError&) {
      row.feasible = false;
      return;
    }
    // Seeds are independent replications; pool their means.
    PolicyConfig policy{PolicyKind::msfq};
    policy.threshold = ell;
    double sum = 0, var = 0;
    for (auto seed : c.seeds) {
      RunOptions o;
      o.horizon = c.horizon;
      o.warmup = c.warmup;
      o.seed = seed;
      const auto s = aggregate(run(spec, policy, o));
      sum += s.mean;
      var += (s.ci / kBatchT) * (s.ci / kBatchT);
    }
    const auto n = static_cast<double>(c.seeds.size());
    row.simulated = sum / n;
    row.ci = kBatchT * std::sqrt(var) / n;
    row.rel_error = std::abs(row.simulated - row.analytic) / row.simulated;
    row.pass = row.rel_error <= c.tolerance;
  });

  std::ostringstream csv;
  csv << "policy,lambda,analytic_E_T,sim_E_T,sim_ci,rel_error,pass\n";
  bool all_pass = true;
  for (const auto& r : rows) {
    if (!r.feasible) {
      csv << r.policy << ',' << format_real(r.lambda) << ",nan,nan,nan,nan,infeasible\n";
      log << r.policy << " lambda=" << r.lambda << " infeasible (outside the stability region)\n";
      continue;
    }
    all_pass = all_pass && r.pass;
    csv << r.policy << ',' << format_real(r.lambda) << ',' << format_real(r.analytic) << ','
        << format_real(r.simulated) << ',' << format_real(r.ci) << ',' << format_real(r.rel_error) << ','
        << (r.pass ? "pass" : "fail") << '\n';
    char line[200];
    std::snprintf(line, sizeof line, "%-12s lambda=%-8g analytic=%-10.4f sim=%.4f+-%.4f rel=%.4f %s\n",
                  r.policy.c_str(), r.lambda, r.analytic, r.simulated, r.ci, r.rel_error, r.pass ? "pass" : "FAIL");
    log << line;
  }
  open_output(std::filesystem::path(c.out) / "compare.csv") << csv.str();
  return all_pass ? kExitOk : kExitTolerance;
}

// ---------------------------------------------------------------------------

inline int cmd_stability(const ExperimentConfig& c, std::ostream& log) {
  c.validate();
  const auto unit = c.workload_at(1.0);
  const auto bound = analysis::stability_boundary(unit);
  const bool one_or_all = unit.is_one_or_all() && unit.k() >= 2;
  auto show = [](double x) { return std::isinf(x) ? std::string("unbounded") : format_real(x); };

  log << "general boundary (sufficient, floor(k/j)): " << show(bound.sufficient) << '\n';
  log << "general boundary (necessary, k/j):         " << show(bound.necessary) << '\n';
  std::optional<double> ooa;
  if (one_or_all) {
    ooa = analysis::stability_boundary_one_or_all(unit);
    log << "one-or-all boundary:                       " << show(*ooa) << '\n';
  }

  std::ostringstream csv;
  csv << "lambda,one_or_all_stable,one_or_all_margin,sufficient_stable,sufficient_margin,necessary_unstable,necessary_margin\n";
  for (double l : c.lambdas) {
    const auto spec = c.workload_at(l);
    const auto g = analysis::stability_general(spec);
    std::string ooa_stable = "na", ooa_margin = "nan";
    if (one_or_all) {
      const auto v = analysis::stability_one_or_all(analysis::one_or_all_rates(spec));
      ooa_stable = v.stable ? "1" : "0";
      ooa_margin = format_real(v.margin);
    }
    csv << format_real(l) << ',' << ooa_stable << ',' << ooa_margin << ',' << (g.sufficient_stable ? 1 : 0) << ','
        << format_real(g.sufficient_margin) << ',' << (g.necessary_unstable ? 1 : 0) << ','
        << format_real(g.necessary_margin) << '\n';
    log << "lambda=" << l << ": " << (g.sufficient_stable ? "stabilizable" : (g.necessary_unstable ? "unstable" : "undetermined"))
        << '\n';
  }
  detail::write_config_echo(c);
  open_output(std::filesystem::path(c.out) / "stability.csv") << csv.str();
  auto number_or_text = [](double x) { return std::isinf(x) ? nlohmann::json("unbounded") : nlohmann::json(x); };
  nlohmann::json b{{"sufficient_boundary", number_or_text(bound.sufficient)},
                   {"necessary_boundary", number_or_text(bound.necessary)},
                   {"one_or_all_boundary", ooa ? number_or_text(*ooa) : nlohmann::json(nullptr)}};
  open_output(std::filesystem::path(c.out) / "stability.json") << b.dump(2) << '\n';
  return kExitOk;
}

inline int run_experiment(const ExperimentConfig& c, std::ostream& log) {
  switch (c.mode) {
    case Mode::simulate: return cmd_simulate(c, log);
    case Mode::analyze: return cmd_analyze(c, log);
    case Mode::compare: return cmd_compare(c, log);
    case Mode::stability: return cmd_stability(c, log);
  }
  return kExitConfig;
}

}  // namespace msj
