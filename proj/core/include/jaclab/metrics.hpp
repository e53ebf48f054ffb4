// Evaluation statistics: threshold-averaged success percentages, initial-
// distance bucketing, Frobenius error, condition-number summaries, and the
// positive-definiteness convergence criterion.
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "jaclab/control.hpp"
#include "jaclab/linalg.hpp"

namespace jaclab {

// Inclusive threshold grid low, low+step, ..., high built by integer
// stepping so the grid never drifts.
struct ThresholdSpec {
  double low = 0.001;
  double high = 0.1;
  double step = 0.001;

  std::size_t count() const;
  double threshold(std::size_t i) const { return low + static_cast<double>(i) * step; }
};

// Mean over the threshold grid of the fraction of final distances <= t
// (ties succeed), times 100.
double mean_success(const std::vector<double>& final_distances,
                    const ThresholdSpec& spec);

struct BucketSpec {
  std::vector<double> edges;  // strictly increasing; buckets are [e_i, e_{i+1})
};

struct BucketResult {
  std::vector<std::vector<std::size_t>> groups;  // indices per bucket
  std::vector<std::size_t> overflow;             // outside [front, back)
  std::string label(const BucketSpec& spec, std::size_t bucket) const;
};

BucketResult bucketize(const std::vector<double>& initial_distances,
                       const BucketSpec& spec);

double frobenius_error(const Mat& j_true, const Mat& j_hat);

// is_positive_definite(J* pinv(J^)); the Lyapunov local-convergence check.
bool pd_criterion(const Mat& j_true, const Mat& j_hat);

struct PdPartition {
  std::vector<std::size_t> always_pd;
  std::vector<std::size_t> not_always_pd;
  double pct_always = 0.0;
  double pct_not_always = 0.0;
};

// A trajectory is "always PD" iff the criterion holds at every step.
PdPartition classify_pd_trajectories(
    const std::vector<std::vector<bool>>& per_step_pd);
PdPartition classify_pd_trajectories(const std::vector<EvalTrace>& traces);

struct ConditionStats {
  double mean = 0.0;     // over finite values
  double median = 0.0;   // over finite values
  double stddev = 0.0;   // over finite values
  double fraction_infinite = 0.0;
  std::vector<double> log_values;  // natural log of the finite values
};

ConditionStats condition_stats(const std::vector<double>& cond_values);
ConditionStats condition_stats(const std::vector<Mat>& jacobians);

// "inf" for the infinite sentinel, shortest round-trip decimal otherwise.
std::string format_csv_value(double v);

}  // namespace jaclab
