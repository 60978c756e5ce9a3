#pragma once

// Job classes, workloads, arrival streams and class-table ingestion.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "msj/errors.hpp"

namespace msj {

struct ClassSpec {
  int need = 1;             // servers occupied while in service
  double arrival_rate = 0;  // jobs per time unit
  double mean_size = 1;     // mean service duration, 1/mu

  double service_rate() const { return 1.0 / mean_size; }
};

// A validated k-server workload. Classes are kept in the order given.
class WorkloadSpec {
 public:
  WorkloadSpec() = default;

  WorkloadSpec(int k, std::vector<ClassSpec> classes) : k_(k), classes_(std::move(classes)) {
    if (k_ < 1) throw ConfigError("workload: k must be at least 1");
    if (classes_.empty()) throw ConfigError("workload: no job classes");
    for (std::size_t i = 0; i < classes_.size(); ++i) {
      const auto& c = classes_[i];
      if (c.need < 1 || c.need > k_) {
        throw ConfigError("workload: class need " + std::to_string(c.need) + " outside 1.." +
                          std::to_string(k_));
      }
      if (!(c.arrival_rate >= 0) || !std::isfinite(c.arrival_rate)) {
        throw ConfigError("workload: negative or non-finite arrival rate");
      }
      if (!(c.mean_size > 0) || !std::isfinite(c.mean_size)) {
        throw ConfigError("workload: mean_size must be positive");
      }
      for (std::size_t j = 0; j < i; ++j) {
        if (classes_[j].need == c.need) {
          throw ConfigError("workload: duplicate class need " + std::to_string(c.need));
        }
      }
    }
  }

  int k() const { return k_; }
  const std::vector<ClassSpec>& classes() const { return classes_; }
  std::size_t size() const { return classes_.size(); }
  const ClassSpec& operator[](std::size_t i) const { return classes_[i]; }

  double total_rate() const {
    double sum = 0;
    for (const auto& c : classes_) sum += c.arrival_rate;
    return sum;
  }

  // p_i = lambda_i / lambda; all zero when the workload carries no load.
  std::vector<double> fractions() const {
    std::vector<double> p(classes_.size(), 0.0);
    const double total = total_rate();
    if (total > 0) {
      for (std::size_t i = 0; i < p.size(); ++i) p[i] = classes_[i].arrival_rate / total;
    }
    return p;
  }

  std::optional<std::size_t> index_of_need(int need) const {
    for (std::size_t i = 0; i < classes_.size(); ++i) {
      if (classes_[i].need == need) return i;
    }
    return std::nullopt;
  }

  // Needs drawn only from {1, k}.
  bool is_one_or_all() const {
    return std::all_of(classes_.begin(), classes_.end(),
                       [&](const ClassSpec& c) { return c.need == 1 || c.need == k_; });
  }

  // Same fractions, total arrival rate replaced by `lambda`.
  WorkloadSpec with_total_rate(double lambda) const {
    return from_fractions(k_, needs(), fractions_or_uniform(), mean_sizes(), lambda);
  }

  std::vector<int> needs() const {
    std::vector<int> out;
    for (const auto& c : classes_) out.push_back(c.need);
    return out;
  }

  std::vector<double> mean_sizes() const {
    std::vector<double> out;
    for (const auto& c : classes_) out.push_back(c.mean_size);
    return out;
  }

  static WorkloadSpec from_fractions(int k, const std::vector<int>& needs,
                                     const std::vector<double>& fractions,
                                     const std::vector<double>& mean_sizes, double lambda) {
    if (needs.size() != fractions.size() || needs.size() != mean_sizes.size()) {
      throw ConfigError("workload: mismatched column lengths");
    }
    if (!(lambda >= 0)) throw ConfigError("workload: total arrival rate must be nonnegative");
    std::vector<ClassSpec> classes;
    for (std::size_t i = 0; i < needs.size(); ++i) {
      if (!(fractions[i] >= 0)) throw ConfigError("workload: negative fraction");
      classes.push_back({needs[i], fractions[i] * lambda, mean_sizes[i]});
    }
    return WorkloadSpec(k, std::move(classes));
  }

 private:
  std::vector<double> fractions_or_uniform() const {
    if (total_rate() > 0) return fractions();
    return std::vector<double>(classes_.size(), 1.0 / static_cast<double>(classes_.size()));
  }

  int k_ = 1;
  std::vector<ClassSpec> classes_;
};

struct Job {
  std::uint64_t id = 0;
  std::size_t cls = 0;  // index into WorkloadSpec::classes()
  int need = 1;
  double size = 0;
  double arrival = 0;
};

// ---------------------------------------------------------------------------
// Class tables

enum class TableFormat { json, csv };

inline TableFormat format_from_path(const std::string& path) {
  const auto dot = path.rfind('.');
  std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == "csv") return TableFormat::csv;
  if (ext == "json") return TableFormat::json;
  throw ConfigError("workload: cannot infer table format from '" + path + "'");
}

namespace detail {

inline WorkloadSpec build_from_rows(int k, const std::vector<int>& needs,
                                    const std::vector<std::optional<double>>& rates,
                                    const std::vector<std::optional<double>>& fractions,
                                    const std::vector<double>& sizes,
                                    std::optional<double> total_rate) {
  const bool any_rate = std::any_of(rates.begin(), rates.end(), [](auto& r) { return r.has_value(); });
  const bool any_frac =
      std::any_of(fractions.begin(), fractions.end(), [](auto& f) { return f.has_value(); });
  if (any_rate && any_frac) throw ConfigError("workload: rows mix 'rate' and 'fraction'");
  if (!any_rate && !any_frac) throw ConfigError("workload: rows need 'rate' or 'fraction'");
  if (any_rate) {
    std::vector<ClassSpec> classes;
    for (std::size_t i = 0; i < needs.size(); ++i) {
      if (!rates[i]) throw ConfigError("workload: row without rate");
      classes.push_back({needs[i], *rates[i], sizes[i]});
    }
    WorkloadSpec spec(k, std::move(classes));
    return total_rate ? spec.with_total_rate(*total_rate) : spec;
  }
  if (!total_rate) throw ConfigError("workload: fractions given but no total arrival rate");
  std::vector<double> p;
  for (const auto& f : fractions) {
    if (!f) throw ConfigError("workload: row without fraction");
    p.push_back(*f);
  }
  double sum = 0;
  for (double x : p) sum += x;
  if (!(sum > 0)) throw ConfigError("workload: fractions sum to zero");
  for (double& x : p) x /= sum;
  return WorkloadSpec::from_fractions(k, needs, p, sizes, *total_rate);
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_double(const std::string& s, const char* what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(std::string("workload: cannot parse ") + what + " '" + s + "'");
  }
}

}  // namespace detail

// JSON object {k, lambda?, classes: [{need, rate | fraction, mean_size}]}.
// `total_rate` overrides the document's "lambda" when given.
inline WorkloadSpec workload_from_json(const nlohmann::json& doc,
                                       std::optional<double> total_rate = std::nullopt) {
  try {
    const auto& rows = doc.at("classes");
    std::vector<int> needs;
    std::vector<std::optional<double>> rates, fractions;
    std::vector<double> sizes;
    int max_need = 1;
    for (const auto& row : rows) {
      needs.push_back(row.at("need").get<int>());
      max_need = std::max(max_need, needs.back());
      rates.push_back(row.contains("rate") ? std::optional(row["rate"].get<double>()) : std::nullopt);
      fractions.push_back(row.contains("fraction") ? std::optional(row["fraction"].get<double>())
                                                   : std::nullopt);
      sizes.push_back(row.value("mean_size", 1.0));
    }
    const int k = doc.contains("k") ? doc["k"].get<int>() : max_need;
    if (!total_rate && doc.contains("lambda")) total_rate = doc["lambda"].get<double>();
    return detail::build_from_rows(k, needs, rates, fractions, sizes, total_rate);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("workload: ") + e.what());
  }
}

inline nlohmann::json workload_to_json(const WorkloadSpec& spec) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& c : spec.classes()) {
    rows.push_back({{"need", c.need}, {"rate", c.arrival_rate}, {"mean_size", c.mean_size}});
  }
  return {{"k", spec.k()}, {"classes", rows}};
}

// CSV with header need,rate,mean_size (or need,fraction,mean_size). The file
// carries no k; it defaults to the largest need.
inline WorkloadSpec workload_from_csv(std::istream& in, std::optional<int> k = std::nullopt,
                                      std::optional<double> total_rate = std::nullopt) {
  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    line = detail::trim(line);
    if (line.empty() || line[0] == '#') continue;
    header = detail::split_csv_line(line);
    break;
  }
  if (header.empty()) throw ConfigError("workload: empty CSV table");
  auto column = [&](const char* name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    return std::nullopt;
  };
  const auto need_col = column("need");
  const auto rate_col = column("rate");
  const auto frac_col = column("fraction");
  const auto size_col = column("mean_size");
  if (!need_col || !size_col) throw ConfigError("workload: CSV needs 'need' and 'mean_size' columns");
  if (rate_col && frac_col) throw ConfigError("workload: rows mix 'rate' and 'fraction'");

  std::vector<int> needs;
  std::vector<std::optional<double>> rates, fractions;
  std::vector<double> sizes;
  int max_need = 1;
  while (std::getline(in, line)) {
    line = detail::trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size()) throw ConfigError("workload: ragged CSV row '" + line + "'");
    const double need = detail::parse_double(cells[*need_col], "need");
    if (need != std::floor(need)) throw ConfigError("workload: non-integer need");
    needs.push_back(static_cast<int>(need));
    max_need = std::max(max_need, needs.back());
    sizes.push_back(detail::parse_double(cells[*size_col], "mean_size"));
    rates.push_back(rate_col ? std::optional(detail::parse_double(cells[*rate_col], "rate"))
                             : std::nullopt);
    fractions.push_back(frac_col ? std::optional(detail::parse_double(cells[*frac_col], "fraction"))
                                 : std::nullopt);
  }
  return detail::build_from_rows(k.value_or(max_need), needs, rates, fractions, sizes, total_rate);
}

inline WorkloadSpec load_workload(const std::string& path, TableFormat format,
                                  std::optional<double> total_rate = std::nullopt,
                                  std::optional<int> k = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw ConfigError("workload: cannot open '" + path + "'");
  if (format == TableFormat::csv) return workload_from_csv(in, k, total_rate);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("workload: " + path + ": " + e.what());
  }
  if (k) doc["k"] = *k;
  return workload_from_json(doc, total_rate);
}

inline WorkloadSpec load_workload(const std::string& path,
                                  std::optional<double> total_rate = std::nullopt) {
  return load_workload(path, format_from_path(path), total_rate);
}

// ---------------------------------------------------------------------------
// Load

struct LoadShare {
  std::vector<double> per_class;  // rho_j = need_j * lambda_j / mu_j
  double total = 0;
};

inline LoadShare load_share(const WorkloadSpec& spec) {
  LoadShare out;
  for (const auto& c : spec.classes()) {
    out.per_class.push_back(c.need * c.arrival_rate * c.mean_size);
    out.total += out.per_class.back();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Arrivals

// Engine for one class. Seeded from (seed, need, salt) so each class owns an
// independent substream regardless of which other classes exist.
inline std::mt19937_64 substream(std::uint64_t seed, std::uint64_t key, std::uint64_t salt = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32),
                    static_cast<std::uint32_t>(salt), 0x6d736aU};
  return std::mt19937_64(seq);
}

// Merged Poisson arrival stream; jobs come out in nondecreasing arrival time
// with ids numbered in that order.
class ArrivalStream {
 public:
  ArrivalStream(const WorkloadSpec& spec, std::uint64_t seed) {
    for (std::size_t i = 0; i < spec.size(); ++i) {
      const auto& c = spec[i];
      Source src{i, c.need, c.arrival_rate, c.service_rate(),
                 substream(seed, static_cast<std::uint64_t>(c.need))};
      if (src.rate > 0) {
        src.next_time = std::exponential_distribution<double>(src.rate)(src.engine);
        src.next_size = std::exponential_distribution<double>(src.mu)(src.engine);
      }
      sources_.push_back(std::move(src));
    }
  }

  // Arrival time of the next job (+inf when every class is silent).
  double peek_time() const {
    const auto* s = earliest();
    return s ? s->next_time : std::numeric_limits<double>::infinity();
  }

  Job next() {
    auto* s = earliest();
    Job job{next_id_++, s->cls, s->need, s->next_size, s->next_time};
    s->next_time += std::exponential_distribution<double>(s->rate)(s->engine);
    s->next_size = std::exponential_distribution<double>(s->mu)(s->engine);
    return job;
  }

 private:
  struct Source {
    std::size_t cls;
    int need;
    double rate;
    double mu;
    std::mt19937_64 engine;
    double next_time = std::numeric_limits<double>::infinity();
    double next_size = 0;
  };

  // Ties go to the lower class index.
  const Source* earliest() const {
    const Source* best = nullptr;
    for (const auto& s : sources_) {
      if (s.rate > 0 && (!best || s.next_time < best->next_time)) best = &s;
    }
    return best;
  }
  Source* earliest() { return const_cast<Source*>(std::as_const(*this).earliest()); }

  std::vector<Source> sources_;
  std::uint64_t next_id_ = 0;
};

inline std::vector<Job> generate_arrivals(const WorkloadSpec& spec, double horizon,
                                          std::uint64_t seed) {
  if (!(horizon > 0)) throw ConfigError("generate_arrivals: horizon must be positive");
  ArrivalStream stream(spec, seed);
  std::vector<Job> jobs;
  while (stream.peek_time() <= horizon) jobs.push_back(stream.next());
  return jobs;
}

}  // namespace msj
