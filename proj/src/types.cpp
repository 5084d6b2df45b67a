#include "ebproxy/types.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace ebproxy {

namespace {
constexpr double kOrthonormalTol = 1e-10;
}

AreaDataset validate_dataset(AreaDataset raw) {
  const Eigen::Index n = raw.counts.size();
  if (raw.sample_sizes.size() != n) {
    throw ValidationError("sample_sizes length " +
                          std::to_string(raw.sample_sizes.size()) +
                          " does not match counts length " + std::to_string(n));
  }
  if (raw.covariates.size() != 0 && raw.covariates.rows() != n) {
    throw ValidationError("covariate matrix has " +
                          std::to_string(raw.covariates.rows()) +
                          " rows for " + std::to_string(n) + " areas");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (raw.sample_sizes[i] < 1) {
      throw ValidationError("sample size below 1 at index " + std::to_string(i));
    }
    if (raw.counts[i] < 0) {
      throw ValidationError("negative count at index " + std::to_string(i));
    }
    if (raw.counts[i] > raw.sample_sizes[i]) {
      throw ValidationError("count exceeds sample size at index " +
                            std::to_string(i));
    }
  }
  return raw;
}

NormalVector::NormalVector(Vector v, bool unit_var)
    : values(std::move(v)), unit_variance(unit_var) {
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw ValidationError("non-finite value at index " + std::to_string(i));
    }
  }
}

AffineTransform AffineTransform::identity(Eigen::Index n) {
  AffineTransform t;
  t.shift_ = Vector::Zero(n);
  return t;
}

AffineTransform AffineTransform::shift(Vector b) {
  AffineTransform t;
  t.shift_ = std::move(b);
  return t;
}

AffineTransform AffineTransform::rotation_shift(Matrix a, Vector b) {
  if (a.rows() != a.cols()) {
    throw ValidationError("rotation matrix must be square");
  }
  if (a.rows() != b.size()) {
    throw ValidationError("rotation dimension " + std::to_string(a.rows()) +
                          " does not match shift length " +
                          std::to_string(b.size()));
  }
  const Matrix gram = a.transpose() * a;
  const double defect =
      (gram - Matrix::Identity(a.cols(), a.cols())).cwiseAbs().maxCoeff();
  if (defect > kOrthonormalTol) {
    throw ValidationError("rotation is not orthonormal (A^T A deviates by " +
                          std::to_string(defect) + ")");
  }
  AffineTransform t;
  t.rotation_ = std::move(a);
  t.shift_ = std::move(b);
  return t;
}

NormalVector AffineTransform::apply(const NormalVector& v) const {
  if (v.size() != shift_.size()) {
    throw ValidationError("transform of size " + std::to_string(shift_.size()) +
                          " applied to vector of size " +
                          std::to_string(v.size()));
  }
  if (rotation_) {
    return NormalVector((*rotation_) * v.values - shift_);
  }
  return NormalVector(v.values - shift_);
}

NormalVector AffineTransform::invert(const NormalVector& v) const {
  if (v.size() != shift_.size()) {
    throw ValidationError("transform of size " + std::to_string(shift_.size()) +
                          " inverted on vector of size " +
                          std::to_string(v.size()));
  }
  if (rotation_) {
    return NormalVector(rotation_->transpose() * (v.values + shift_));
  }
  return NormalVector(v.values + shift_);
}

EstimatorKind EstimatorKind::npeb(double bandwidth, bool truncate) {
  if (!(bandwidth > 0.0)) {
    throw ValidationError("NPEB bandwidth must be positive, got " +
                          std::to_string(bandwidth));
  }
  return {Tag::Npeb, bandwidth, truncate};
}

std::string to_string(EstimatorKind::Tag tag) {
  switch (tag) {
    case EstimatorKind::Tag::Naive:
      return "naive";
    case EstimatorKind::Tag::Regression:
      return "regression";
    case EstimatorKind::Tag::Peb:
      return "peb";
    case EstimatorKind::Tag::Npeb:
      return "npeb";
  }
  return "unknown";
}

RiskReport RiskReport::from_entries(std::vector<RiskEntry> entries) {
  if (entries.empty()) {
    throw ValidationError("risk report needs at least one entry");
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < entries.size(); ++i) {
    const bool lower = entries[i].risk < entries[best].risk;
    const bool tie_wins = entries[i].risk == entries[best].risk &&
                          entries[i].transform_id < entries[best].transform_id;
    if (lower || tie_wins) {
      best = i;
    }
  }
  RiskReport report;
  report.entries = std::move(entries);
  report.selected = best;
  return report;
}

}  // namespace ebproxy
