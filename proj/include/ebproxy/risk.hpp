#pragma once

#include "ebproxy/types.hpp"

namespace ebproxy {

// ---------------------------------------------------------------------------
// Risk estimators for PEB and NPEB, the oracle Bayes-risk functional, and the
// three-step transform-selection scheme.
// ---------------------------------------------------------------------------

struct NamedTransform {
  std::string id;
  AffineTransform transform;
};

/// The candidate transforms considered in the selection step: either an
/// explicit list, or the continuous family { B = X beta } spanned by a design
/// matrix (closed-form argmin available for PEB only).
class CandidateSet {
 public:
  /// Requires a nonempty list with unique ids.
  static CandidateSet explicit_list(std::vector<NamedTransform> transforms);

  static CandidateSet ols_span(Matrix x);

  bool is_ols_span() const { return ols_span_.has_value(); }
  const Matrix& design() const { return *ols_span_; }
  const std::vector<NamedTransform>& transforms() const { return transforms_; }

 private:
  std::vector<NamedTransform> transforms_;
  std::optional<Matrix> ols_span_;
};

/// Plug-in risk estimate for the PEB rule on z:
///   max{ 0, n (sum z_i^2 - n) / sum z_i^2 },  0 when sum z_i^2 = 0.
double peb_risk_estimate(const NormalVector& z);

struct NpebRisk {
  double value = 0.0;  // clamped at zero
  double raw = 0.0;    // n - sum (f'/f)^2 as computed, may be negative
};

/// Kernel plug-in risk estimate for the NPEB rule on z:
///   n - sum_i ( f'_hat(Z_i) / f_hat(Z_i) )^2.
NpebRisk npeb_risk_estimate(const NormalVector& z, double h);

/// Bayes risk of the best coordinatewise rule when the prior is the empirical
/// distribution of nu:
///   R(nu) = 1 - integral (f_nu'(z))^2 / f_nu(z) dz,
/// with f_nu the exact n-component normal mixture (not a kernel estimate).
/// Integration is by trapezoid refinement over [min nu - 8, max nu + 8],
/// halving the step until successive values differ by less than
/// quadrature_tol. The result is clamped to [0, 1].
double oracle_bayes_risk(const Vector& nu, double quadrature_tol = 1e-8);

struct Selection {
  RiskReport report;
  NamedTransform chosen;
};

/// Step I + II of the scheme: estimate the risk of every candidate transform
/// under the given estimator kind (Peb or Npeb) and pick the minimizer.
///
/// Over an OLS span with PEB the argmin is closed form: minimizing sum z_i^2
/// over B in the column span is the least-squares projection, so the single
/// evaluated candidate is the OLS residual transform. NPEB selection over a
/// continuous span is not supported; supply an explicit list.
Selection select_transform(const CandidateSet& candidates,
                           const NormalVector& y,
                           const EstimatorKind& estimator);

/// Step III on top of select_transform: mu_hat = T^-1(Delta(T(y))) with Delta
/// the PEB or NPEB rule.
NormalVector three_step_estimate(const CandidateSet& candidates,
                                 const NormalVector& y,
                                 const EstimatorKind& estimator);

}  // namespace ebproxy
