#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ebproxy {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using IntVector = Eigen::VectorXi;

/// Thrown when input data violates a documented invariant. Carries a message
/// naming the first offending index or field.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// AreaDataset: per-area binomial counts, sample sizes, covariate matrix.
// ---------------------------------------------------------------------------

struct AreaDataset {
  IntVector counts;        // successes per area
  IntVector sample_sizes;  // binomial trials per area, each >= 1
  Matrix covariates;       // n x p, p may be 0

  Eigen::Index n() const { return counts.size(); }
  Eigen::Index num_covariates() const { return covariates.cols(); }
};

/// Checks 0 <= counts[i] <= sample_sizes[i], sample_sizes[i] >= 1 and the
/// covariate row count. Returns the dataset unchanged on success; throws
/// ValidationError naming the first failing row otherwise.
AreaDataset validate_dataset(AreaDataset raw);

// ---------------------------------------------------------------------------
// NormalVector: a vector of (approximately) unit-variance normal observations
// or means on the stabilized scale.
// ---------------------------------------------------------------------------

struct NormalVector {
  Vector values;
  bool unit_variance = true;

  NormalVector() = default;
  explicit NormalVector(Vector v, bool unit_var = true);

  Eigen::Index size() const { return values.size(); }
  double operator[](Eigen::Index i) const { return values[i]; }
};

// ---------------------------------------------------------------------------
// AffineTransform: T(y) = A y - B with A orthonormal. The rotation is stored
// as a tagged value (identity vs explicit matrix); every transform used by the
// simulation engine has A = I, so the common case carries no matrix.
// ---------------------------------------------------------------------------

class AffineTransform {
 public:
  AffineTransform() = default;

  /// A = I, B = 0.
  static AffineTransform identity(Eigen::Index n);

  /// A = I, B = b.
  static AffineTransform shift(Vector b);

  /// Explicit orthonormal A with shift b. Rejects A with A^T A != I beyond
  /// tolerance 1e-10, or mismatched dimensions.
  static AffineTransform rotation_shift(Matrix a, Vector b);

  /// A v - B.
  NormalVector apply(const NormalVector& v) const;

  /// A^T (v + B); inverse because A^-1 = A^T for orthonormal A.
  NormalVector invert(const NormalVector& v) const;

  bool has_rotation() const { return rotation_.has_value(); }
  const Matrix& rotation() const { return *rotation_; }
  const Vector& shift_vector() const { return shift_; }
  Eigen::Index size() const { return shift_.size(); }

 private:
  std::optional<Matrix> rotation_;  // nullopt means identity
  Vector shift_;
};

// ---------------------------------------------------------------------------
// EstimatorKind: which decision rule to run on the transformed scale.
// ---------------------------------------------------------------------------

struct EstimatorKind {
  enum class Tag { Naive, Regression, Peb, Npeb };

  Tag tag = Tag::Naive;
  double bandwidth = 0.0;  // Npeb only, must be > 0
  bool truncate = false;   // Npeb only

  static EstimatorKind naive() { return {Tag::Naive, 0.0, false}; }
  static EstimatorKind regression() { return {Tag::Regression, 0.0, false}; }
  static EstimatorKind peb() { return {Tag::Peb, 0.0, false}; }
  static EstimatorKind npeb(double bandwidth, bool truncate = false);

  bool is_npeb() const { return tag == Tag::Npeb; }
};

std::string to_string(EstimatorKind::Tag tag);

// ---------------------------------------------------------------------------
// RiskReport: estimated risk per (transform, estimator) candidate plus the
// selected minimizer.
// ---------------------------------------------------------------------------

struct RiskEntry {
  std::string transform_id;
  EstimatorKind estimator;
  double risk = 0.0;      // clamped estimate, nonnegative
  double raw_risk = 0.0;  // unclamped value (equals risk for PEB when positive)
};

struct RiskReport {
  std::vector<RiskEntry> entries;
  std::size_t selected = 0;

  /// Builds a report with `selected` pointing at the minimal-risk entry.
  /// Ties are broken by the lowest transform_id so that the winner does not
  /// depend on entry order.
  static RiskReport from_entries(std::vector<RiskEntry> entries);

  const RiskEntry& selected_entry() const { return entries[selected]; }
};

}  // namespace ebproxy
