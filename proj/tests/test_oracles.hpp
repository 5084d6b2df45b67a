#pragma once

// Independent reference implementations used only by tests. These stay
// deliberately naive (direct textbook formulas, long double accumulation) so
// they can vouch for the optimized library paths.

#include "ebproxy/types.hpp"

#include <cmath>
#include <random>

namespace ebproxy::testing {

struct KernelOracle {
  Vector f;
  Vector f_prime;
};

/// Direct double-loop normal-kernel sums, written independently of the
/// library implementation.
inline KernelOracle kernel_brute_force(const Vector& z, double h) {
  const Eigen::Index n = z.size();
  const long double norm = 0.3989422804014326779L;  // 1/sqrt(2 pi)
  KernelOracle out;
  out.f.resize(n);
  out.f_prime.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    long double f = 0.0L;
    long double fp = 0.0L;
    for (Eigen::Index j = 0; j < n; ++j) {
      const long double u = (static_cast<long double>(z[i]) - z[j]) / h;
      const long double phi = norm * std::exp(-0.5L * u * u);
      f += phi;
      fp += -u * phi;
    }
    out.f[i] = static_cast<double>(f / (n * static_cast<long double>(h)));
    out.f_prime[i] =
        static_cast<double>(fp / (n * static_cast<long double>(h) * h));
  }
  return out;
}

/// Normal-equations least squares (X^T X)^-1 X^T y; numerically cruder than
/// the library's QR route, which is the point.
inline Vector normal_equations_beta(const Matrix& x, const Vector& y) {
  return (x.transpose() * x).inverse() * (x.transpose() * y);
}

inline Matrix random_orthonormal(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix a(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      a(i, j) = gauss(rng);
    }
  }
  Eigen::HouseholderQR<Matrix> qr(a);
  Matrix q = qr.householderQ() * Matrix::Identity(n, n);
  return q;
}

inline Vector random_vector(Eigen::Index n, std::mt19937_64& rng,
                            double scale = 1.0) {
  std::normal_distribution<double> gauss(0.0, scale);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    v[i] = gauss(rng);
  }
  return v;
}

}  // namespace ebproxy::testing
