#include "ebproxy/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace ebproxy {

double arcsin_forward(double count, int m, int pool) {
  if (m < 1 || pool < 1) {
    throw ValidationError("arcsin transform needs m >= 1 and pool >= 1");
  }
  const double denom = static_cast<double>(pool) * m + 0.5;
  const double ratio = (count + 0.25) / denom;
  return std::sqrt(4.0 * m) * std::asin(std::sqrt(ratio));
}

NormalVector arcsin_forward(const IntVector& counts, int m, int pool) {
  if (m < 1 || pool < 1) {
    throw ValidationError("arcsin transform needs m >= 1 and pool >= 1");
  }
  const long long cap = static_cast<long long>(pool) * m;
  Vector out(counts.size());
  for (Eigen::Index i = 0; i < counts.size(); ++i) {
    if (counts[i] < 0 || counts[i] > cap) {
      throw ValidationError("count " + std::to_string(counts[i]) +
                            " outside [0, " + std::to_string(cap) +
                            "] at index " + std::to_string(i));
    }
    out[i] = arcsin_forward(static_cast<double>(counts[i]), m, pool);
  }
  return NormalVector(std::move(out));
}

double arcsin_inverse(double mu_hat, int m) {
  if (m < 1) {
    throw ValidationError("arcsin inverse needs m >= 1");
  }
  const double half_pi = std::numbers::pi / 2.0;
  double angle = mu_hat / std::sqrt(4.0 * m);
  angle = std::clamp(angle, 0.0, half_pi);
  const double s = std::sin(angle);
  return s * s;
}

Vector arcsin_inverse(const NormalVector& mu_hat, int m) {
  Vector out(mu_hat.size());
  for (Eigen::Index i = 0; i < mu_hat.size(); ++i) {
    out[i] = arcsin_inverse(mu_hat.values[i], m);
  }
  return out;
}

OlsFit ols_fit(const Matrix& x, const Vector& y) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  if (p < 1) {
    throw ValidationError("design matrix needs at least one column");
  }
  if (n < p) {
    throw ValidationError("design matrix has more columns (" +
                          std::to_string(p) + ") than rows (" +
                          std::to_string(n) + ")");
  }
  if (y.size() != n) {
    throw ValidationError("response length " + std::to_string(y.size()) +
                          " does not match design rows " + std::to_string(n));
  }

  Eigen::ColPivHouseholderQR<Matrix> qr(x);
  qr.setThreshold(1e-10);
  if (qr.rank() < p) {
    // The columns pivoted past the numerical rank are the redundant ones;
    // report the first of them.
    const auto& perm = qr.colsPermutation().indices();
    const Eigen::Index deficient = perm[qr.rank()];
    throw ValidationError("design matrix is rank deficient: column " +
                          std::to_string(deficient) +
                          " lies in the span of the others");
  }

  OlsFit fit;
  fit.beta = qr.solve(y);
  fit.fitted = x * fit.beta;
  fit.rank = qr.rank();
  return fit;
}

AffineTransform ols_residual_transform(const Matrix& x, const NormalVector& y) {
  OlsFit fit = ols_fit(x, y.values);
  return AffineTransform::shift(std::move(fit.fitted));
}

AffineTransform shift_transform(const std::vector<NormalVector>& columns,
                                const Vector& weights) {
  if (static_cast<Eigen::Index>(columns.size()) != weights.size()) {
    throw ValidationError("got " + std::to_string(columns.size()) +
                          " columns for " + std::to_string(weights.size()) +
                          " weights");
  }
  if (columns.empty()) {
    throw ValidationError("shift transform needs at least one column");
  }
  const Eigen::Index n = columns.front().size();
  Vector b = Vector::Zero(n);
  for (std::size_t k = 0; k < columns.size(); ++k) {
    if (columns[k].size() != n) {
      throw ValidationError("column " + std::to_string(k) + " has length " +
                            std::to_string(columns[k].size()) + ", expected " +
                            std::to_string(n));
    }
    b += weights[static_cast<Eigen::Index>(k)] * columns[k].values;
  }
  return AffineTransform::shift(std::move(b));
}

}  // namespace ebproxy
