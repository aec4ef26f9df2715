// Central finite-difference validation of reverse-mode gradients, run in
// double precision on a random subsample of parameter entries.
//
// Networks with ReLU / max-pool units are only piecewise differentiable: along
// any single parameter axis the loss is piecewise smooth, and a probe interval
// [theta - h, theta + h] that straddles an activation-pattern change yields a
// central difference that mixes the one-sided slopes instead of estimating the
// derivative at theta. Such probes say nothing about gradient correctness, so
// the harness detects them with two complementary tests and replaces flagged
// probes with fresh draws:
//   1. Central differences at step h and h/2 must agree. On a smooth interval
//      they differ by O(h^2); a kink at offset t from theta shifts them apart
//      by c*t/(2h) (c = slope change), catching kinks away from the center.
//   2. Second differences L(+s) - 2 L(0) + L(-s) must scale like s^2 between
//      s = h and s = h/2. A kink near the center contributes c*(s - |t|),
//      which scales like s, catching exactly the kinks test 1 is blind to (a
//      kink at theta corrupts every symmetric difference identically). The two
//      blind spots do not overlap: test 2 vanishes only near t = h/3, where
//      test 1 sees c/6.
// A genuinely wrong analytic gradient is still caught, because the probes then
// agree with each other but not with the analytic value.
#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "paircon/core/rng.hpp"
#include "paircon/nn/layers.hpp"

namespace paircon::nn {

struct GradCheckOptions {
  double h = 1e-3;
  double fraction = 0.01;  // share of parameter entries to probe
  int min_samples = 50;
  int max_samples = 400;
  uint64_t seed = 1234;
  // Relative disagreement between the h and h/2 central differences beyond
  // which a probe is treated as straddling a nondifferentiability.
  double guard_rel = 1e-4;
};

// loss_fn must run a fresh forward pass and return the scalar loss; grad_fn
// must populate every ParamRef grad for the current parameter values. Returns
// the max relative error max(|a - n|) / max(|a|, |n|, 1e-8) over validly
// measurable samples, where n is the step-h central difference.
inline double gradient_check(const std::vector<ParamRef<double>>& params,
                             const std::function<double()>& loss_fn,
                             const std::function<void()>& grad_fn,
                             const GradCheckOptions& opts = {}) {
  if (params.empty()) throw std::invalid_argument("gradient_check: no parameters");
  grad_fn();
  const double l0 = loss_fn();  // unperturbed loss, shared by every probe axis

  int64_t total = 0;
  for (const auto& p : params) total += p.value->size();
  if (total == 0) throw std::invalid_argument("gradient_check: empty parameters");

  int64_t want = static_cast<int64_t>(std::ceil(opts.fraction * static_cast<double>(total)));
  want = std::max<int64_t>(want, opts.min_samples);
  want = std::min<int64_t>(want, opts.max_samples);
  want = std::min<int64_t>(want, total);

  // Draw spare candidates so probes discarded by the smoothness guard can be
  // replaced without reseeding.
  const int64_t pool = std::min<int64_t>(total, want * 4);

  core::Rng rng(opts.seed);
  const auto picks = rng.sample_without_replacement(static_cast<uint64_t>(total),
                                                    static_cast<uint64_t>(pool));

  double max_rel = 0.0;
  int64_t valid = 0;
  for (uint64_t flat : picks) {
    if (valid == want) break;
    size_t pi = 0;
    int64_t off = static_cast<int64_t>(flat);
    while (off >= params[pi].value->size()) {
      off -= params[pi].value->size();
      ++pi;
    }
    double& theta = (*params[pi].value)[off];
    const double analytic = (*params[pi].grad)[off];
    const double saved = theta;

    theta = saved + opts.h;
    const double lp = loss_fn();
    theta = saved - opts.h;
    const double lm = loss_fn();
    theta = saved + 0.5 * opts.h;
    const double lph = loss_fn();
    theta = saved - 0.5 * opts.h;
    const double lmh = loss_fn();
    theta = saved;

    if (!std::isfinite(lp) || !std::isfinite(lm) || !std::isfinite(lph) ||
        !std::isfinite(lmh) || !std::isfinite(l0) || !std::isfinite(analytic))
      throw std::runtime_error("gradient_check: non-finite value encountered");

    const double numeric = (lp - lm) / (2.0 * opts.h);
    const double numeric_half = (lph - lmh) / opts.h;
    const double dd = std::fabs(numeric - numeric_half);
    if (dd > opts.guard_rel * std::max({std::fabs(numeric), std::fabs(numeric_half), 1e-8}))
      continue;  // probe interval contains a kink; not a derivative measurement

    // Second differences: s1 ~ h^2 L'' and s2 ~ (h/2)^2 L'' on smooth
    // intervals, so 4*s2 - s1 cancels; a near-center kink breaks the scaling.
    const double s1 = lp - 2.0 * l0 + lm;
    const double s2 = lph - 2.0 * l0 + lmh;
    const double curve_floor = 1e-12 * std::max(1.0, std::fabs(l0));
    if (std::fabs(4.0 * s2 - s1) >
        std::max(0.125 * std::max(std::fabs(s1), 4.0 * std::fabs(s2)), curve_floor))
      continue;  // kink too close to the center for symmetric differences

    ++valid;
    const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
    max_rel = std::max(max_rel, std::fabs(analytic - numeric) / denom);
  }

  const int64_t need = std::min<int64_t>(want, opts.min_samples);
  if (valid < std::max<int64_t>(need, 1))
    throw std::runtime_error(
        "gradient_check: too many probes crossed nondifferentiable points");
  return max_rel;
}

}  // namespace paircon::nn
