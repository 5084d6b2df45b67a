#include "ebproxy/estimators.hpp"

#include "ebproxy/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace ebproxy {

namespace {
const double kInvSqrt2Pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
}

double default_bandwidth(Eigen::Index n) {
  if (n < 2) {
    throw ValidationError("bandwidth default needs n >= 2");
  }
  return 1.0 / std::sqrt(std::log(static_cast<double>(n)));
}

Vector naive_estimate(const AreaDataset& data) {
  Vector out(data.n());
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    out[i] = static_cast<double>(data.counts[i]) / data.sample_sizes[i];
  }
  return out;
}

NormalVector regression_estimate(const Matrix& x, const NormalVector& y) {
  OlsFit fit = ols_fit(x, y.values);
  return NormalVector(std::move(fit.fitted));
}

double peb_shrink_factor(const NormalVector& z) {
  const Eigen::Index n = z.size();
  if (n < 2) {
    throw ValidationError("PEB shrinkage needs n >= 2");
  }
  const double mean_sq = z.values.squaredNorm() / static_cast<double>(n);
  const double tau2 = std::max(0.0, mean_sq - 1.0);
  return tau2 / (tau2 + 1.0);
}

NormalVector peb_shrink(const NormalVector& z) {
  return NormalVector(peb_shrink_factor(z) * z.values);
}

namespace {

void check_kernel_args(Eigen::Index n, double h) {
  if (n < 2) {
    throw ValidationError("kernel evaluation needs n >= 2");
  }
  if (!(h > 0.0)) {
    throw ValidationError("kernel bandwidth must be positive");
  }
}

}  // namespace

KernelDensityEval kernel_eval(const NormalVector& points, double h,
                              KernelMode mode) {
  const Eigen::Index n = points.size();
  check_kernel_args(n, h);
  if (mode == KernelMode::LeaveOneIn) {
    return kernel_eval_at(points, h, points.values);
  }

  const Vector& z = points.values;
  const double f_scale = kInvSqrt2Pi / ((n - 1) * h);
  const double fp_scale = kInvSqrt2Pi / ((n - 1) * h * h);

  KernelDensityEval eval;
  eval.bandwidth = h;
  eval.f_hat.resize(n);
  eval.f_prime_hat.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double f_sum = 0.0;
    double fp_sum = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) {
        continue;
      }
      const double u = (z[i] - z[j]) / h;
      const double e = std::exp(-0.5 * u * u);
      f_sum += e;
      fp_sum -= u * e;  // phi'(u) = -u phi(u)
    }
    eval.f_hat[i] = std::max(f_scale * f_sum, kDensityFloor);
    eval.f_prime_hat[i] = fp_scale * fp_sum;
  }
  return eval;
}

KernelDensityEval kernel_eval_at(const NormalVector& points, double h,
                                 const Vector& queries) {
  const Eigen::Index n = points.size();
  check_kernel_args(n, h);

  const Vector& z = points.values;
  const double f_scale = kInvSqrt2Pi / (static_cast<double>(n) * h);
  const double fp_scale = kInvSqrt2Pi / (static_cast<double>(n) * h * h);

  KernelDensityEval eval;
  eval.bandwidth = h;
  eval.f_hat.resize(queries.size());
  eval.f_prime_hat.resize(queries.size());
  for (Eigen::Index i = 0; i < queries.size(); ++i) {
    double f_sum = 0.0;
    double fp_sum = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double u = (queries[i] - z[j]) / h;
      const double e = std::exp(-0.5 * u * u);
      f_sum += e;
      fp_sum -= u * e;
    }
    eval.f_hat[i] = std::max(f_scale * f_sum, kDensityFloor);
    eval.f_prime_hat[i] = fp_scale * fp_sum;
  }
  return eval;
}

NormalVector npeb_estimate(const NormalVector& z, double h, bool truncate,
                           KernelMode mode) {
  const KernelDensityEval eval = kernel_eval(z, h, mode);
  const Eigen::Index n = z.size();
  const double cap = 2.0 * std::log(static_cast<double>(n));

  Vector out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double move = eval.f_prime_hat[i] / eval.f_hat[i];
    if (truncate && std::abs(move) > cap) {
      move = std::copysign(cap, move);
    }
    out[i] = z.values[i] + move;
  }
  return NormalVector(std::move(out));
}

}  // namespace ebproxy
