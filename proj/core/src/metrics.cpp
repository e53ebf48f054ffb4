#include "jaclab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace jaclab {

std::size_t ThresholdSpec::count() const {
  if (step <= 0.0 || low > high) {
    throw std::invalid_argument("ThresholdSpec: need step > 0 and low <= high");
  }
  return static_cast<std::size_t>(std::llround((high - low) / step)) + 1;
}

double mean_success(const std::vector<double>& final_distances,
                    const ThresholdSpec& spec) {
  if (final_distances.empty()) {
    throw std::invalid_argument("mean_success: empty input");
  }
  const std::size_t n_thresholds = spec.count();
  const double inv_n = 1.0 / static_cast<double>(final_distances.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < n_thresholds; ++i) {
    const double t = spec.threshold(i);
    std::size_t hits = 0;
    for (double d : final_distances) hits += (d <= t) ? 1 : 0;
    acc += static_cast<double>(hits) * inv_n;
  }
  return acc / static_cast<double>(n_thresholds) * 100.0;
}

std::string BucketResult::label(const BucketSpec& spec,
                                std::size_t bucket) const {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g-%g", spec.edges[bucket],
                spec.edges[bucket + 1]);
  return buf;
}

BucketResult bucketize(const std::vector<double>& initial_distances,
                       const BucketSpec& spec) {
  if (spec.edges.size() < 2) {
    throw std::invalid_argument("bucketize: need at least two edges");
  }
  for (std::size_t i = 0; i + 1 < spec.edges.size(); ++i) {
    if (!(spec.edges[i] < spec.edges[i + 1])) {
      throw std::invalid_argument("bucketize: edges must strictly increase");
    }
  }
  BucketResult out;
  out.groups.resize(spec.edges.size() - 1);
  for (std::size_t i = 0; i < initial_distances.size(); ++i) {
    const double d = initial_distances[i];
    if (d < spec.edges.front() || d >= spec.edges.back()) {
      out.overflow.push_back(i);
      continue;
    }
    const auto it =
        std::upper_bound(spec.edges.begin(), spec.edges.end(), d);
    out.groups[static_cast<std::size_t>(it - spec.edges.begin()) - 1].push_back(i);
  }
  return out;
}

double frobenius_error(const Mat& j_true, const Mat& j_hat) {
  return (j_true - j_hat).frobenius();
}

bool pd_criterion(const Mat& j_true, const Mat& j_hat) {
  if (j_true.rows() != j_hat.rows() || j_true.cols() != j_hat.cols()) {
    throw std::invalid_argument("pd_criterion: shape mismatch");
  }
  return is_positive_definite(j_true * pinv(j_hat));
}

PdPartition classify_pd_trajectories(
    const std::vector<std::vector<bool>>& per_step_pd) {
  PdPartition out;
  for (std::size_t i = 0; i < per_step_pd.size(); ++i) {
    const auto& flags = per_step_pd[i];
    const bool always =
        std::all_of(flags.begin(), flags.end(), [](bool b) { return b; });
    (always ? out.always_pd : out.not_always_pd).push_back(i);
  }
  const double n = static_cast<double>(per_step_pd.size());
  if (n > 0) {
    out.pct_always = 100.0 * static_cast<double>(out.always_pd.size()) / n;
    out.pct_not_always =
        100.0 * static_cast<double>(out.not_always_pd.size()) / n;
  }
  return out;
}

PdPartition classify_pd_trajectories(const std::vector<EvalTrace>& traces) {
  std::vector<std::vector<bool>> flags;
  flags.reserve(traces.size());
  for (const auto& tr : traces) {
    std::vector<bool> f;
    f.reserve(tr.steps.size());
    for (const auto& s : tr.steps) f.push_back(pd_criterion(s.j_true, s.j_hat));
    flags.push_back(std::move(f));
  }
  return classify_pd_trajectories(flags);
}

ConditionStats condition_stats(const std::vector<double>& cond_values) {
  if (cond_values.empty()) {
    throw std::invalid_argument("condition_stats: empty input");
  }
  ConditionStats out;
  std::vector<double> finite;
  for (double c : cond_values) {
    if (std::isinf(c)) continue;
    finite.push_back(c);
  }
  out.fraction_infinite =
      1.0 - static_cast<double>(finite.size()) /
                static_cast<double>(cond_values.size());
  if (!finite.empty()) {
    double sum = 0.0;
    for (double c : finite) sum += c;
    out.mean = sum / static_cast<double>(finite.size());
    double var = 0.0;
    for (double c : finite) var += (c - out.mean) * (c - out.mean);
    out.stddev = std::sqrt(var / static_cast<double>(finite.size()));
    std::vector<double> sorted = finite;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t h = sorted.size() / 2;
    out.median = sorted.size() % 2 == 1
                     ? sorted[h]
                     : 0.5 * (sorted[h - 1] + sorted[h]);
    out.log_values.reserve(finite.size());
    for (double c : finite) out.log_values.push_back(std::log(c));
  }
  return out;
}

ConditionStats condition_stats(const std::vector<Mat>& jacobians) {
  std::vector<double> conds;
  conds.reserve(jacobians.size());
  for (const auto& j : jacobians) conds.push_back(cond(j));
  return condition_stats(conds);
}

std::string format_csv_value(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace jaclab
