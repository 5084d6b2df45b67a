#include "ebproxy/risk.hpp"

#include "ebproxy/estimators.hpp"
#include "ebproxy/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <utility>

namespace ebproxy {

namespace {

const double kInvSqrt2Pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);

// (f'_nu)^2 / f_nu at z for the exact n-component mixture. Densities near
// the underflow limit contribute nothing to the Fisher integral.
double score_integrand(const Vector& nu, double z) {
  const Eigen::ArrayXd d = z - nu.array();
  const Eigen::ArrayXd e = (-0.5 * d.square()).exp();
  const double scale = kInvSqrt2Pi / static_cast<double>(nu.size());
  const double f = e.sum() * scale;
  const double fp = -(d * e).sum() * scale;
  if (f < 1e-300) {
    return 0.0;
  }
  return fp * fp / f;
}

}  // namespace

CandidateSet CandidateSet::explicit_list(std::vector<NamedTransform> transforms) {
  if (transforms.empty()) {
    throw ValidationError("candidate set must be nonempty");
  }
  std::set<std::string> ids;
  for (const auto& t : transforms) {
    if (!ids.insert(t.id).second) {
      throw ValidationError("duplicate transform id '" + t.id + "'");
    }
  }
  CandidateSet set;
  set.transforms_ = std::move(transforms);
  return set;
}

CandidateSet CandidateSet::ols_span(Matrix x) {
  if (x.cols() < 1) {
    throw ValidationError("OLS span needs at least one design column");
  }
  CandidateSet set;
  set.ols_span_ = std::move(x);
  return set;
}

double peb_risk_estimate(const NormalVector& z) {
  const double n = static_cast<double>(z.size());
  if (z.size() < 1) {
    throw ValidationError("risk estimate needs n >= 1");
  }
  const double sum_sq = z.values.squaredNorm();
  if (sum_sq == 0.0) {
    return 0.0;
  }
  return std::max(0.0, n * (sum_sq - n) / sum_sq);
}

NpebRisk npeb_risk_estimate(const NormalVector& z, double h) {
  const KernelDensityEval eval = kernel_eval(z, h);
  double score_sq = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double ratio = eval.f_prime_hat[i] / eval.f_hat[i];
    score_sq += ratio * ratio;
  }
  NpebRisk risk;
  risk.raw = static_cast<double>(z.size()) - score_sq;
  risk.value = std::max(0.0, risk.raw);
  return risk;
}

double oracle_bayes_risk(const Vector& nu, double quadrature_tol) {
  if (nu.size() < 1) {
    throw ValidationError("oracle Bayes risk needs n >= 1");
  }
  for (Eigen::Index i = 0; i < nu.size(); ++i) {
    if (!std::isfinite(nu[i])) {
      throw ValidationError("non-finite mean at index " + std::to_string(i));
    }
  }
  if (!(quadrature_tol > 0.0)) {
    throw ValidationError("quadrature tolerance must be positive");
  }

  const double lo = nu.minCoeff() - 8.0;
  const double hi = nu.maxCoeff() + 8.0;
  const double range = hi - lo;

  // Start fine enough to resolve unit-width mixture bumps, then halve the
  // step until two successive trapezoid values agree within tolerance.
  Eigen::Index intervals = 64;
  while (range / static_cast<double>(intervals) > 0.125) {
    intervals *= 2;
  }

  double step = range / static_cast<double>(intervals);
  double total = 0.5 * (score_integrand(nu, lo) + score_integrand(nu, hi));
  for (Eigen::Index k = 1; k < intervals; ++k) {
    total += score_integrand(nu, lo + step * static_cast<double>(k));
  }
  double integral = total * step;

  constexpr int kMaxRefinements = 16;
  for (int r = 0; r < kMaxRefinements; ++r) {
    double midpoint_sum = 0.0;
    for (Eigen::Index k = 0; k < intervals; ++k) {
      midpoint_sum +=
          score_integrand(nu, lo + step * (static_cast<double>(k) + 0.5));
    }
    total += midpoint_sum;
    intervals *= 2;
    step *= 0.5;
    const double refined = total * step;
    const double change = std::abs(refined - integral);
    integral = refined;
    if (change < quadrature_tol) {
      break;
    }
  }

  return std::clamp(1.0 - integral, 0.0, 1.0);
}

namespace {

RiskEntry evaluate_candidate(const NamedTransform& candidate,
                             const NormalVector& y,
                             const EstimatorKind& estimator) {
  const NormalVector z = candidate.transform.apply(y);
  RiskEntry entry;
  entry.transform_id = candidate.id;
  entry.estimator = estimator;
  switch (estimator.tag) {
    case EstimatorKind::Tag::Peb: {
      const double n = static_cast<double>(z.size());
      const double sum_sq = z.values.squaredNorm();
      entry.raw_risk = sum_sq == 0.0 ? 0.0 : n * (sum_sq - n) / sum_sq;
      entry.risk = peb_risk_estimate(z);
      break;
    }
    case EstimatorKind::Tag::Npeb: {
      const NpebRisk r = npeb_risk_estimate(z, estimator.bandwidth);
      entry.raw_risk = r.raw;
      entry.risk = r.value;
      break;
    }
    default:
      throw ValidationError("transform selection requires a PEB or NPEB "
                            "estimator, got " + to_string(estimator.tag));
  }
  return entry;
}

}  // namespace

Selection select_transform(const CandidateSet& candidates,
                           const NormalVector& y,
                           const EstimatorKind& estimator) {
  if (estimator.tag != EstimatorKind::Tag::Peb &&
      estimator.tag != EstimatorKind::Tag::Npeb) {
    throw ValidationError("transform selection requires a PEB or NPEB "
                          "estimator, got " + to_string(estimator.tag));
  }

  if (candidates.is_ols_span()) {
    if (estimator.tag != EstimatorKind::Tag::Peb) {
      throw ValidationError(
          "NPEB selection over a continuous span is not supported; "
          "enumerate an explicit candidate list instead");
    }
    // Minimizing sum z_i^2 over B = X beta is the least-squares projection,
    // so the span's argmin is evaluated directly.
    NamedTransform chosen{"ols-residual",
                          ols_residual_transform(candidates.design(), y)};
    std::vector<RiskEntry> entries{evaluate_candidate(chosen, y, estimator)};
    Selection sel{RiskReport::from_entries(std::move(entries)),
                  std::move(chosen)};
    return sel;
  }

  std::vector<RiskEntry> entries;
  entries.reserve(candidates.transforms().size());
  for (const auto& candidate : candidates.transforms()) {
    entries.push_back(evaluate_candidate(candidate, y, estimator));
  }
  RiskReport report = RiskReport::from_entries(std::move(entries));
  NamedTransform chosen = candidates.transforms()[report.selected];
  return Selection{std::move(report), std::move(chosen)};
}

NormalVector three_step_estimate(const CandidateSet& candidates,
                                 const NormalVector& y,
                                 const EstimatorKind& estimator) {
  const Selection sel = select_transform(candidates, y, estimator);
  const NormalVector z = sel.chosen.transform.apply(y);
  NormalVector shrunk;
  switch (estimator.tag) {
    case EstimatorKind::Tag::Peb:
      shrunk = peb_shrink(z);
      break;
    case EstimatorKind::Tag::Npeb:
      shrunk = npeb_estimate(z, estimator.bandwidth, estimator.truncate);
      break;
    default:
      throw ValidationError("unreachable: selection already validated");
  }
  return sel.chosen.transform.invert(shrunk);
}

}  // namespace ebproxy
