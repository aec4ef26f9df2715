// Accuracy, multi-repetition aggregation (mean / sample std / 95% CI), and
// the one-sided Mann-Whitney U test used to compare approaches.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "paircon/core/tensor.hpp"

namespace paircon::evalstats {

// Index of the largest value, first occurrence winning ties.
inline int argmax_first(const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("argmax_first: empty input");
  int best = 0;
  for (int i = 1; i < static_cast<int>(values.size()); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

// Fraction of rows whose argmax logit (ties broken toward the lowest class
// index) equals the label. logits is [N, C]; labels has N entries in [0, C).
template <typename T>
double top1_accuracy(const core::Tensor<T>& logits, const std::vector<int>& labels) {
  if (logits.ndim() != 2) throw std::invalid_argument("top1_accuracy: logits must be [N, C]");
  const int64_t n = logits.dim(0), c = logits.dim(1);
  if (n == 0 || c == 0) throw std::invalid_argument("top1_accuracy: empty input");
  if (static_cast<int64_t>(labels.size()) != n)
    throw std::invalid_argument("top1_accuracy: logits/labels length mismatch");

  int64_t correct = 0;
  for (int64_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || labels[i] >= c)
      throw std::invalid_argument("top1_accuracy: label out of range");
    int64_t arg = 0;
    for (int64_t j = 1; j < c; ++j)
      if (logits[i * c + j] > logits[i * c + arg]) arg = j;
    correct += arg == labels[i];
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

struct Aggregate {
  int n = 0;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation (n - 1 denominator)
  double ci_low = 0.0;  // mean -/+ 1.96 * stddev / sqrt(n)
  double ci_high = 0.0;
};

inline Aggregate aggregate_values(const std::vector<double>& values) {
  const int n = static_cast<int>(values.size());
  if (n < 2) throw std::invalid_argument("aggregate_values: need at least two values");
  Aggregate a;
  a.n = n;
  a.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - a.mean) * (v - a.mean);
  a.stddev = std::sqrt(ss / (n - 1));
  const double half = 1.96 * a.stddev / std::sqrt(static_cast<double>(n));
  a.ci_low = a.mean - half;
  a.ci_high = a.mean + half;
  return a;
}

// One result of a full train/evaluate repetition.
struct RunResult {
  int repetition = 0;
  double validation_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::string config_fingerprint;
};

inline void validate(const RunResult& r) {
  if (!(r.validation_accuracy >= 0.0 && r.validation_accuracy <= 1.0) ||
      !(r.test_accuracy >= 0.0 && r.test_accuracy <= 1.0))
    throw std::invalid_argument("RunResult: accuracies must lie in [0, 1]");
}

struct MannWhitneyResult {
  double u = 0.0;  // U statistic of x (pairs where x exceeds y, ties half)
  double p = 1.0;  // one-sided p-value, alternative: x stochastically greater
  bool exact = false;
};

namespace detail {

// Number of arrangements (choices of which pooled ranks belong to x) with
// each U value, for n xs and m ys with distinct values. Recurse on the
// largest remaining value: an x beats all remaining ys (U gains m'), a y
// beats nothing, so f(u; n', m') = f(u - m'; n' - 1, m') + f(u; n', m' - 1).
// Counts fit a double exactly for n, m <= 20 (max total C(40,20) < 2^53).
inline std::vector<double> u_distribution(int n, int m) {
  const size_t umax = static_cast<size_t>(n) * m;
  // prev = f(.; ., mm - 1), starting from mm = 0 where only U = 0 occurs.
  std::vector<std::vector<double>> prev(static_cast<size_t>(n) + 1,
                                        std::vector<double>(umax + 1, 0.0));
  for (auto& row : prev) row[0] = 1.0;
  for (int mm = 1; mm <= m; ++mm) {
    std::vector<std::vector<double>> layer(static_cast<size_t>(n) + 1,
                                           std::vector<double>(umax + 1, 0.0));
    layer[0][0] = 1.0;
    for (int i = 1; i <= n; ++i)
      for (size_t u = 0; u <= umax; ++u)
        layer[i][u] = (u >= static_cast<size_t>(mm) ? layer[i - 1][u - mm] : 0.0) + prev[i][u];
    prev = std::move(layer);
  }
  return prev[static_cast<size_t>(n)];
}

inline double normal_upper_tail(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

}  // namespace detail

// U from midranks. Exact one-sided p (x stochastically greater) by dynamic
// programming over the U distribution when there are no ties and both sizes
// are at most 20; otherwise a normal approximation with tie correction and a
// 0.5 continuity correction. Degenerate zero-variance data yields p = 1.
inline MannWhitneyResult mann_whitney_u(const std::vector<double>& x,
                                        const std::vector<double>& y) {
  const int n = static_cast<int>(x.size()), m = static_cast<int>(y.size());
  if (n == 0 || m == 0) throw std::invalid_argument("mann_whitney_u: empty sample");
  for (double v : x)
    if (!std::isfinite(v)) throw std::invalid_argument("mann_whitney_u: non-finite value");
  for (double v : y)
    if (!std::isfinite(v)) throw std::invalid_argument("mann_whitney_u: non-finite value");

  // Midranks over the pooled sample.
  std::vector<std::pair<double, int>> pooled;  // (value, 0 for x / 1 for y)
  pooled.reserve(static_cast<size_t>(n + m));
  for (double v : x) pooled.emplace_back(v, 0);
  for (double v : y) pooled.emplace_back(v, 1);
  std::sort(pooled.begin(), pooled.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  double rank_sum_x = 0.0;
  double tie_term = 0.0;  // sum of t^3 - t over tie groups
  bool any_tie = false;
  const int total = n + m;
  for (int i = 0; i < total;) {
    int j = i;
    while (j < total && pooled[j].first == pooled[i].first) ++j;
    const int t = j - i;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (int k = i; k < j; ++k)
      if (pooled[k].second == 0) rank_sum_x += midrank;
    if (t > 1) {
      any_tie = true;
      tie_term += static_cast<double>(t) * t * t - t;
    }
    i = j;
  }

  MannWhitneyResult r;
  r.u = rank_sum_x - 0.5 * n * (n + 1);

  if (!any_tie && n <= 20 && m <= 20) {
    r.exact = true;
    const auto dist = detail::u_distribution(n, m);
    double tail = 0.0, all = 0.0;
    const auto u_int = static_cast<int64_t>(std::llround(r.u));
    for (int64_t u = 0; u < static_cast<int64_t>(dist.size()); ++u) {
      all += dist[static_cast<size_t>(u)];
      if (u >= u_int) tail += dist[static_cast<size_t>(u)];
    }
    r.p = tail / all;
    return r;
  }

  const double nm = static_cast<double>(n) * m;
  const double mean_u = 0.5 * nm;
  const double variance =
      nm / 12.0 *
      (static_cast<double>(total + 1) -
       tie_term / (static_cast<double>(total) * (static_cast<double>(total) - 1.0)));
  if (variance <= 0.0) {  // every pooled value identical
    r.p = 1.0;
    return r;
  }
  const double z = (r.u - mean_u - 0.5) / std::sqrt(variance);
  r.p = std::min(1.0, std::max(detail::normal_upper_tail(z), 1e-300));
  return r;
}

struct ApproachSummary {
  std::string name;
  Aggregate stats;
  std::vector<double> values;
};

struct Comparison {
  std::vector<ApproachSummary> ranked;  // descending mean
  std::string best;
  std::string runner_up;
  double p_value = 1.0;  // one-sided Mann-Whitney, best greater than runner-up
  bool tied_best = false;
};

// Ranks approaches by mean and tests best against runner-up. Requires at
// least two approaches with equal, >= 2 repetition counts.
inline Comparison compare_approaches(
    const std::vector<std::pair<std::string, std::vector<double>>>& approaches) {
  if (approaches.size() < 2)
    throw std::invalid_argument("compare_approaches: need at least two approaches");
  const size_t reps = approaches.front().second.size();
  for (const auto& [name, values] : approaches)
    if (values.size() != reps)
      throw std::invalid_argument("compare_approaches: unequal repetition counts");

  Comparison c;
  for (const auto& [name, values] : approaches)
    c.ranked.push_back({name, aggregate_values(values), values});
  std::stable_sort(c.ranked.begin(), c.ranked.end(),
                   [](const ApproachSummary& a, const ApproachSummary& b) {
                     return a.stats.mean > b.stats.mean;
                   });
  c.best = c.ranked[0].name;
  c.runner_up = c.ranked[1].name;
  c.tied_best = c.ranked[0].stats.mean == c.ranked[1].stats.mean;
  c.p_value = mann_whitney_u(c.ranked[0].values, c.ranked[1].values).p;
  return c;
}

}  // namespace paircon::evalstats
