#pragma once

#include "ebproxy/types.hpp"

namespace ebproxy {

// ---------------------------------------------------------------------------
// Decision rules on the stabilized scale: naive, regression, parametric EB
// shrinkage, and the kernel-based nonparametric EB rule.
// ---------------------------------------------------------------------------

/// Densities below this floor are clamped before forming f'/f ratios.
inline constexpr double kDensityFloor = 1e-12;

/// Bandwidth used throughout the small-area experiments (n around 161).
inline constexpr double kReferenceBandwidth = 0.4;

/// General default: 1 / sqrt(log n).
double default_bandwidth(Eigen::Index n);

/// Sample proportions counts[i] / sample_sizes[i].
Vector naive_estimate(const AreaDataset& data);

/// Least-squares predictor x * beta_hat, with no EB stage.
NormalVector regression_estimate(const Matrix& x, const NormalVector& y);

/// Moment estimate tau2_hat = max(0, sum z_i^2 / n - 1) and the resulting
/// shrinkage factor tau2_hat / (tau2_hat + 1), always in [0, 1).
double peb_shrink_factor(const NormalVector& z);

/// nu_hat = factor * z, shrinking toward the zero vector. Callers working on
/// regression residuals add the fitted values back afterwards.
NormalVector peb_shrink(const NormalVector& z);

struct KernelDensityEval {
  Vector f_hat;        // density at each input point, floored at kDensityFloor
  Vector f_prime_hat;  // derivative at each input point
  double bandwidth = 0.0;
};

enum class KernelMode {
  LeaveOneIn,   // each point contributes to its own density (default)
  LeaveOneOut,  // sensitivity variant excluding the point itself
};

/// Normal-kernel density and derivative estimates evaluated at each of the
/// input points:
///   f_hat(z)  = 1/(n h)   * sum_j phi((z - Z_j)/h)
///   f'_hat(z) = 1/(n h^2) * sum_j phi'((z - Z_j)/h)
/// Plain O(n^2) double loop; at n in the hundreds this is microseconds.
KernelDensityEval kernel_eval(const NormalVector& points, double h,
                              KernelMode mode = KernelMode::LeaveOneIn);

/// Same estimates evaluated at arbitrary query locations (all sample points
/// contribute to every query).
KernelDensityEval kernel_eval_at(const NormalVector& points, double h,
                                 const Vector& queries);

/// Kernel empirical-Bayes rule nu_hat_i = Z_i + f'_hat(Z_i) / f_hat(Z_i).
///
/// With truncate on, moves larger than 2*log(n) are cut back to exactly
/// 2*log(n) in the same direction; off by default.
NormalVector npeb_estimate(const NormalVector& z, double h,
                           bool truncate = false,
                           KernelMode mode = KernelMode::LeaveOneIn);

}  // namespace ebproxy
