#pragma once

// CSV export of event logs and aggregated results. Reals are written with 17
// significant digits so files read back to identical doubles.

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "msj/errors.hpp"
#include "msj/metrics.hpp"
#include "msj/simulator.hpp"
#include "msj/workload.hpp"

namespace msj {

inline std::string format_real(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline void write_jobs_csv(std::ostream& out, const EventLog& log) {
  out << "id,class,arrival,start,completion\n";
  for (const auto& j : log.jobs) {
    out << j.id << ',' << log.spec[j.cls].need << ',' << format_real(j.arrival) << ','
        << format_real(j.start) << ',' << format_real(j.completion) << '\n';
  }
}

// Reads records written by write_jobs_csv; `class` holds the need and is
// mapped back to the class index of `spec`.
inline std::vector<JobRecord> read_jobs_csv(std::istream& in, const WorkloadSpec& spec) {
  std::string line;
  if (!std::getline(in, line) || detail::trim(line) != "id,class,arrival,start,completion") {
    throw ConfigError("jobs.csv: unexpected header");
  }
  std::vector<JobRecord> jobs;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != 5) throw ConfigError("jobs.csv: malformed row '" + line + "'");
    JobRecord r;
    r.id = std::stoull(cells[0]);
    const auto cls = spec.index_of_need(std::stoi(cells[1]));
    if (!cls) throw ConfigError("jobs.csv: need " + cells[1] + " not in workload");
    r.cls = static_cast<std::uint32_t>(*cls);
    r.arrival = std::stod(cells[2]);
    r.start = std::stod(cells[3]);
    r.completion = std::stod(cells[4]);
    jobs.push_back(r);
  }
  return jobs;
}

inline void write_phases_csv(std::ostream& out, const EventLog& log) {
  out << "phase,entry,exit\n";
  for (const auto& p : log.phases) {
    out << p.label << ',' << format_real(p.entry) << ',' << format_real(p.exit) << '\n';
  }
}

inline void write_series_csv(std::ostream& out, const EventLog& log) {
  out << 't';
  for (const auto& c : log.spec.classes()) out << ",n" << c.need;
  out << '\n';
  for (const auto& p : log.series) {
    out << format_real(p.t);
    for (long n : p.n) out << ',' << n;
    out << '\n';
  }
}

struct ResultRow {
  std::string policy;
  double lambda = 0;
  std::uint64_t seed = 0;
  std::string cls;  // need, or "all" / "weighted" for summary rows
  double mean = std::nan("");
  double ci = std::nan("");
  double weight = std::nan("");
};

inline std::vector<ResultRow> result_rows(const std::string& policy, double lambda, std::uint64_t seed,
                                          const ResponseStats& s) {
  std::vector<ResultRow> rows;
  for (const auto& c : s.classes) {
    rows.push_back({policy, lambda, seed, std::to_string(c.need), c.mean.value_or(std::nan("")), c.ci, c.weight});
  }
  rows.push_back({policy, lambda, seed, "all", s.mean, s.ci, 1.0});
  rows.push_back({policy, lambda, seed, "weighted", s.weighted, s.weighted_ci, 1.0});
  return rows;
}

inline void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
  out << "policy,lambda,seed,class,mean_T,ci,weight\n";
  for (const auto& r : rows) {
    out << r.policy << ',' << format_real(r.lambda) << ',' << r.seed << ',' << r.cls << ','
        << format_real(r.mean) << ',' << format_real(r.ci) << ',' << format_real(r.weight) << '\n';
  }
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  return out;
}

}  // namespace msj
