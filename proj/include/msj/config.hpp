#pragma once

// Experiment configuration: one JSON document describing the workload, the
// policies, the arrival-rate sweep and the simulation settings.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "msj/errors.hpp"
#include "msj/policy.hpp"
#include "msj/workload.hpp"

namespace msj {

enum class Mode { simulate, analyze, compare, stability };

inline std::string to_string(Mode m) {
  switch (m) {
    case Mode::simulate: return "simulate";
    case Mode::analyze: return "analyze";
    case Mode::compare: return "compare";
    case Mode::stability: return "stability";
  }
  return "?";
}

inline Mode mode_from_string(const std::string& s) {
  for (auto m : {Mode::simulate, Mode::analyze, Mode::compare, Mode::stability}) {
    if (to_string(m) == s) return m;
  }
  throw ConfigError("unknown mode '" + s + "'");
}

// Inline table or a path to a CSV/JSON class table.
struct WorkloadSource {
  std::optional<nlohmann::json> inline_table;
  std::string path;
  std::optional<int> k;  // path tables only: overrides the table's k

  friend bool operator==(const WorkloadSource&, const WorkloadSource&) = default;
};

// k = 32, 90% single-server jobs, 10% all-server jobs, unit mean sizes.
inline WorkloadSpec default_workload(double lambda) {
  return WorkloadSpec::from_fractions(32, {1, 32}, {0.9, 0.1}, {1.0, 1.0}, lambda);
}

struct ExperimentConfig {
  Mode mode = Mode::simulate;
  WorkloadSource workload;
  std::vector<PolicyConfig> policies;
  std::vector<double> lambdas;  // total arrival rates; empty sweep is a no-op
  std::vector<int> ells;        // analyze: thresholds to evaluate; empty means the policies' own
  double horizon = 1e5;
  std::optional<double> warmup;
  std::vector<std::uint64_t> seeds{1};
  std::string out;
  std::size_t series_stride = 0;
  bool write_jobs = false;
  double tolerance = 0.10;  // compare: relative error bound
  unsigned threads = 0;     // 0: hardware concurrency

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;

  // Workload with total arrival rate `lambda` and the table's class mix.
  WorkloadSpec workload_at(double lambda) const {
    if (workload.inline_table) {
      auto doc = *workload.inline_table;
      if (workload.k) doc["k"] = *workload.k;
      return workload_from_json(doc, lambda);
    }
    if (workload.path.empty()) return default_workload(lambda);
    return load_workload(workload.path, format_from_path(workload.path), lambda, workload.k);
  }

  void validate() const {
    if (!(horizon > 0)) throw ConfigError("config: horizon must be positive");
    if (warmup && (!(*warmup >= 0) || !(*warmup < horizon))) {
      throw ConfigError("config: need 0 <= warmup < horizon");
    }
    if (seeds.empty()) throw ConfigError("config: at least one seed is required");
    for (double l : lambdas) {
      if (!(l >= 0) || !std::isfinite(l)) throw ConfigError("config: arrival rates must be finite and nonnegative");
    }
    if (!(tolerance > 0)) throw ConfigError("config: tolerance must be positive");
    if (mode == Mode::analyze || mode == Mode::compare) {
      for (const auto& p : policies) {
        if (p.kind != PolicyKind::msfq && p.kind != PolicyKind::msf) {
          throw ConfigError("config: " + to_string(mode) + " needs msfq or msf policies");
        }
      }
    }
  }
};

namespace detail {

inline std::vector<double> parse_sweep(const nlohmann::json& j) {
  if (j.is_number()) return {j.get<double>()};
  if (j.is_array()) return j.get<std::vector<double>>();
  if (j.contains("values")) return j["values"].get<std::vector<double>>();
  const double from = j.at("from").get<double>();
  const double to = j.at("to").get<double>();
  const double step = j.at("step").get<double>();
  if (!(step > 0)) throw ConfigError("config: sweep step must be positive");
  std::vector<double> out;
  // Index-based so the grid has no accumulated rounding drift.
  for (long i = 0;; ++i) {
    const double v = from + static_cast<double>(i) * step;
    if (v > to + 1e-9 * step) break;
    out.push_back(v);
  }
  return out;
}

}  // namespace detail

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  try {
    ExperimentConfig c;
    if (j.contains("mode")) c.mode = mode_from_string(j["mode"].get<std::string>());
    if (j.contains("workload")) {
      const auto& w = j["workload"];
      if (w.is_string()) {
        c.workload.path = w.get<std::string>();
      } else if (w.contains("path")) {
        c.workload.path = w["path"].get<std::string>();
        if (w.contains("k")) c.workload.k = w["k"].get<int>();
      } else {
        c.workload.inline_table = w;
      }
    }
    if (j.contains("policies")) {
      for (const auto& p : j["policies"]) c.policies.push_back(policy_from_json(p));
    }
    if (j.contains("lambdas")) c.lambdas = detail::parse_sweep(j["lambdas"]);
    if (j.contains("sweep")) c.lambdas = detail::parse_sweep(j["sweep"]);
    if (j.contains("ells")) c.ells = j["ells"].get<std::vector<int>>();
    if (j.contains("horizon")) c.horizon = j["horizon"].get<double>();
    if (j.contains("warmup") && !j["warmup"].is_null()) c.warmup = j["warmup"].get<double>();
    if (j.contains("seeds")) c.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    if (j.contains("seed")) c.seeds = {j["seed"].get<std::uint64_t>()};
    if (j.contains("out")) c.out = j["out"].get<std::string>();
    if (j.contains("series_stride")) c.series_stride = j["series_stride"].get<std::size_t>();
    if (j.contains("write_jobs")) c.write_jobs = j["write_jobs"].get<bool>();
    if (j.contains("tolerance")) c.tolerance = j["tolerance"].get<double>();
    if (j.contains("threads")) c.threads = j["threads"].get<unsigned>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["mode"] = to_string(c.mode);
  if (c.workload.inline_table) {
    j["workload"] = *c.workload.inline_table;
  } else {
    nlohmann::json w{{"path", c.workload.path}};
    if (c.workload.k) w["k"] = *c.workload.k;
    j["workload"] = w;
  }
  j["policies"] = nlohmann::json::array();
  for (const auto& p : c.policies) j["policies"].push_back(policy_to_json(p));
  j["lambdas"] = c.lambdas;
  j["ells"] = c.ells;
  j["horizon"] = c.horizon;
  j["warmup"] = c.warmup ? nlohmann::json(*c.warmup) : nlohmann::json(nullptr);
  j["seeds"] = c.seeds;
  j["out"] = c.out;
  j["series_stride"] = c.series_stride;
  j["write_jobs"] = c.write_jobs;
  j["tolerance"] = c.tolerance;
  j["threads"] = c.threads;
  return j;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config: " + path + ": " + e.what());
  }
  auto c = config_from_json(j);
  // Table paths are relative to the config file.
  const std::filesystem::path table(c.workload.path);
  if (!c.workload.path.empty() && table.is_relative()) {
    c.workload.path = (std::filesystem::path(path).parent_path() / table).lexically_normal().string();
  }
  return c;
}

}  // namespace msj
