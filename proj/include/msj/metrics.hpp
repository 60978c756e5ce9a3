#pragma once

// Per-class, overall and load-weighted mean response times with batch-means
// confidence intervals.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "msj/simulator.hpp"
#include "msj/workload.hpp"

namespace msj {

inline constexpr std::size_t kBatches = 20;
// Two-sided 95% Student t quantile with kBatches - 1 degrees of freedom.
inline constexpr double kBatchT = 2.093;

struct ClassResponse {
  int need = 1;
  std::size_t count = 0;
  std::optional<double> mean;  // absent when no job completed
  double ci = 0;               // 95% half-width; NaN when a batch is empty
  double weight = 0;           // rho_j / rho from the declared rates
};

struct ResponseStats {
  std::vector<ClassResponse> classes;
  std::size_t count = 0;
  double mean = 0;  // E[T], pooled over classes
  double ci = 0;
  double weighted = 0;  // E[T^w] over classes with completions
  double weighted_ci = 0;
  std::vector<std::string> warnings;
};

namespace detail {

inline double batch_half_width(const std::vector<double>& means) {
  const auto n = static_cast<double>(means.size());
  if (means.size() < 2) return std::nan("");
  double sum = 0;
  for (double m : means) sum += m;
  const double avg = sum / n;
  double ss = 0;
  for (double m : means) ss += (m - avg) * (m - avg);
  return kBatchT * std::sqrt(ss / (n - 1)) / std::sqrt(n);
}

}  // namespace detail

// Jobs arriving in [warmup, horizon) that completed by the horizon. Batches
// are equal windows of arrival time.
inline ResponseStats aggregate(const std::vector<JobRecord>& jobs, const WorkloadSpec& spec, double warmup,
                               double horizon) {
  const std::size_t nc = spec.size();
  const auto load = load_share(spec);
  ResponseStats out;
  out.classes.resize(nc);
  for (std::size_t c = 0; c < nc; ++c) {
    out.classes[c].need = spec[c].need;
    out.classes[c].weight = load.total > 0 ? load.per_class[c] / load.total : 0.0;
  }

  std::vector<double> sum(nc, 0.0);
  std::vector<std::vector<double>> bsum(nc, std::vector<double>(kBatches, 0.0));
  std::vector<std::vector<std::size_t>> bcount(nc, std::vector<std::size_t>(kBatches, 0));
  const double width = (horizon - warmup) / static_cast<double>(kBatches);
  for (const auto& j : jobs) {
    if (j.arrival < warmup || j.arrival >= horizon) continue;
    const double t = j.response();
    sum[j.cls] += t;
    ++out.classes[j.cls].count;
    auto b = static_cast<std::size_t>((j.arrival - warmup) / width);
    if (b >= kBatches) b = kBatches - 1;
    bsum[j.cls][b] += t;
    ++bcount[j.cls][b];
  }

  double total = 0;
  double weight_present = 0;
  for (std::size_t c = 0; c < nc; ++c) {
    auto& cr = out.classes[c];
    out.count += cr.count;
    total += sum[c];
    if (cr.count == 0) {
      if (spec[c].arrival_rate > 0) {
        out.warnings.push_back("class with need " + std::to_string(cr.need) +
                               " has no completions; excluded from the weighted mean");
      }
      continue;
    }
    cr.mean = sum[c] / static_cast<double>(cr.count);
    weight_present += cr.weight;
    std::vector<double> means;
    bool full = true;
    for (std::size_t b = 0; b < kBatches; ++b) {
      if (bcount[c][b] == 0) {
        full = false;
        break;
      }
      means.push_back(bsum[c][b] / static_cast<double>(bcount[c][b]));
    }
    cr.ci = full ? detail::batch_half_width(means) : std::nan("");
  }
  if (out.count > 0) out.mean = total / static_cast<double>(out.count);

  // E[T^w] renormalized over the classes that completed jobs.
  for (const auto& cr : out.classes) {
    if (cr.mean && weight_present > 0) out.weighted += cr.weight / weight_present * *cr.mean;
  }

  std::vector<double> pooled, weighted;
  bool pooled_ok = true, weighted_ok = weight_present > 0;
  for (std::size_t b = 0; b < kBatches; ++b) {
    double s = 0, w = 0;
    std::size_t n = 0;
    for (std::size_t c = 0; c < nc; ++c) {
      s += bsum[c][b];
      n += bcount[c][b];
      if (!out.classes[c].mean) continue;
      if (bcount[c][b] == 0) {
        weighted_ok = false;
      } else {
        w += out.classes[c].weight / weight_present * bsum[c][b] / static_cast<double>(bcount[c][b]);
      }
    }
    if (n == 0) pooled_ok = false;
    pooled.push_back(n ? s / static_cast<double>(n) : 0.0);
    weighted.push_back(w);
  }
  out.ci = pooled_ok ? detail::batch_half_width(pooled) : std::nan("");
  out.weighted_ci = weighted_ok ? detail::batch_half_width(weighted) : std::nan("");
  return out;
}

inline ResponseStats aggregate(const EventLog& log, const WorkloadSpec& spec, double warmup) {
  return aggregate(log.jobs, spec, warmup, log.horizon);
}

inline ResponseStats aggregate(const EventLog& log) { return aggregate(log, log.spec, log.warmup); }

}  // namespace msj
