#pragma once

#include "ebproxy/types.hpp"

namespace ebproxy {

// ---------------------------------------------------------------------------
// Variance-stabilizing arcsin transform between the binomial and normal
// scales, and construction of candidate affine transforms from covariates.
// ---------------------------------------------------------------------------

/// sqrt(4m) * asin(sqrt((count + 0.25) / (pool*m + 0.5))).
///
/// The leading sqrt(4m) factor always uses the base sample size m, also when
/// the count comes from a pooled sample of pool*m trials (pool = 3 for the
/// temporal covariate, 4 for the spatial one), so covariates land on the same
/// scale as the response. Accepts real-valued counts; the vector overload
/// below restricts to integers.
double arcsin_forward(double count, int m, int pool = 1);

/// Vector form. Requires 0 <= counts[i] <= pool*m; throws ValidationError
/// naming the first offending index.
NormalVector arcsin_forward(const IntVector& counts, int m, int pool = 1);

/// Back-transform: (sin(mu_hat / sqrt(4m)))^2.
///
/// Arguments outside [0, sqrt(4m)*pi/2] are clamped to the boundary first;
/// shrinkage can push estimates slightly outside the image of the forward
/// transform and the back-map must stay total.
double arcsin_inverse(double mu_hat, int m);

/// Elementwise back-transform; every output lies in [0, 1].
Vector arcsin_inverse(const NormalVector& mu_hat, int m);

/// Least-squares fit of y on the columns of x, via rank-revealing
/// column-pivoted QR. Rank tolerance is 1e-10 relative to the largest
/// diagonal of R.
struct OlsFit {
  Vector beta;
  Vector fitted;  // x * beta
  Eigen::Index rank;
};

/// Throws ValidationError naming a redundant column when x is rank deficient.
OlsFit ols_fit(const Matrix& x, const Vector& y);

/// Transform with A = I and B = x * beta_hat; applying it yields the OLS
/// residuals of y on x. Requires n >= p >= 1 and full column rank.
AffineTransform ols_residual_transform(const Matrix& x, const NormalVector& y);

/// Transform with A = I and B = sum_k weights[k] * columns[k].
AffineTransform shift_transform(const std::vector<NormalVector>& columns,
                                const Vector& weights);

}  // namespace ebproxy
