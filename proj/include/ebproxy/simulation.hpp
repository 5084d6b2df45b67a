#pragma once

#include "ebproxy/types.hpp"

#include <cstdint>
#include <random>

namespace ebproxy {

// ---------------------------------------------------------------------------
// Synthetic-population generation and the Monte Carlo scenario engine for the
// small-area proportion experiments.
// ---------------------------------------------------------------------------

struct PopulationParams {
  int n = 161;
  double mean = 0.75;
  double sd = 0.13;
  /// Share of total variance placed on the sub-quarter random effect; 0.45
  /// puts corr(p_i, p_is) near 0.6.
  double intraclass_share = 0.45;
  int group_size = 5;  // areas per sub-quarter; the last group absorbs the remainder
  /// The abrupt-change scenario pins the first `abrupt_count` areas to
  /// p_t = abrupt_value; generation re-draws those areas until p_i exceeds it.
  int abrupt_count = 16;
  double abrupt_value = 0.3;
  double clamp_lo = 0.05;
  double clamp_hi = 0.98;
};

struct Population {
  Vector p;                     // true proportions, all in (0, 1)
  std::vector<int> subquarter;  // group index per area
  Vector p_temporal;            // p_t per area (scenario-dependent)
  Vector p_spatial;             // mean of p over the sub-quarter excluding the area

  Eigen::Index n() const { return p.size(); }
};

/// Draws p from the sub-quarter random-effects model
///   p_i = clamp(mean + u_{q(i)} + e_i, clamp_lo, clamp_hi),
/// u_q ~ N(0, share * sd^2), e_i ~ N(0, (1-share) * sd^2), then derives the
/// spatial means. p_temporal starts equal to p (the no-change state).
Population generate_population(const PopulationParams& params,
                               std::mt19937_64& rng);

/// Recomputes p_spatial from p and the sub-quarter partition. Groups must
/// have at least two members so every area has a neighborhood.
void compute_spatial_means(Population& pop);

enum class TemporalScenario { NoChange, AbruptChange };

/// NoChange sets p_temporal = p everywhere. AbruptChange sets the first 16
/// (params.abrupt_count) entries to 0.3 and the rest to p; those areas must
/// satisfy p_i > 0.3.
Population apply_temporal_scenario(Population pop, TemporalScenario scenario,
                                   int abrupt_count = 16,
                                   double abrupt_value = 0.3);

enum class ScenarioKind {
  TemporalNoChange,  // temporal covariate, p_t = p
  TemporalAbrupt,    // temporal covariate, 16 abrupt changes
  Spatial,           // spatial covariate only
  Combined,          // both covariates, abrupt temporal changes
};

bool scenario_uses_temporal(ScenarioKind kind);
bool scenario_uses_spatial(ScenarioKind kind);
std::string to_string(ScenarioKind kind);

/// How a method builds its transform from the replication's covariates.
struct TransformRecipe {
  enum class Kind {
    None,          // estimator works on raw proportions / the plain response
    OlsResiduals,  // B = X beta_hat on [1, covariates of the scenario]
    Shift,         // B = spatial_weight * S + temporal_weight * T
  };

  Kind kind = Kind::None;
  double spatial_weight = 0.0;
  double temporal_weight = 0.0;

  static TransformRecipe none() { return {}; }
  static TransformRecipe ols() { return {Kind::OlsResiduals, 0.0, 0.0}; }
  static TransformRecipe shift(double spatial_w, double temporal_w) {
    return {Kind::Shift, spatial_w, temporal_w};
  }
  /// Shift with zero weights: the identity transform.
  static TransformRecipe identity() { return shift(0.0, 0.0); }
};

struct MethodSpec {
  std::string label;
  EstimatorKind estimator;
  TransformRecipe recipe;
};

/// The method roster of the corresponding result table: Naive, Reg, NPEB1
/// (least-squares residual transform), NPEB2 (shift by the scenario's
/// covariate), PEB, plus NPEB3/NPEB4 (spatial-temporal mixes with weights 0.3
/// and 0.6) for the combined scenario.
std::vector<MethodSpec> default_methods(ScenarioKind kind, double bandwidth,
                                        bool truncate = false);

/// Extra recipe from the spatial study: NPEB applied with no transform at
/// all. Not part of any table roster; request it by label ("NPEB0").
MethodSpec npeb_identity_method(double bandwidth, bool truncate = false);

struct ScenarioConfig {
  ScenarioKind scenario = ScenarioKind::TemporalNoChange;
  std::vector<int> sample_sizes = {25, 50, 100};  // one table row per m
  int replications = 1000;
  std::uint64_t seed = 1;
  std::vector<MethodSpec> methods;  // empty selects the default roster
  double bandwidth = 0.0;           // <= 0 selects default_bandwidth(n)
  bool truncate = false;
  PopulationParams population;
  /// Sensitivity flag: re-draw the population every replication instead of
  /// fixing it once per scenario.
  bool redraw_population = false;
  /// Pre-loaded population; overrides synthetic generation when set.
  std::optional<Population> fixed_population;
  int threads = 0;  // 0 = hardware concurrency
};

struct ReplicationResult {
  std::vector<double> losses;  // sum (p_hat - p)^2 per method
  IntVector y_counts;          // the shared draws: every method sees these
  IntVector t_counts;          // empty when the scenario has no temporal part
  IntVector s_counts;          // empty when the scenario has no spatial part
};

/// One Monte Carlo replication: draws Y ~ B(m, p), T ~ B(3m, p_t),
/// S ~ B(4m, p_s) as the scenario requires, runs every method on the same
/// draws, and returns the squared-error losses on the proportion scale.
ReplicationResult simulate_replication(const Population& pop,
                                       ScenarioKind scenario,
                                       const std::vector<MethodSpec>& methods,
                                       int m, std::mt19937_64& rng);

struct RiskTable {
  std::vector<int> sample_sizes;     // rows
  std::vector<std::string> methods;  // columns
  Matrix mean;                       // Monte Carlo mean of the loss
  Matrix se;                         // standard error of that mean
};

/// Runs the full scenario: population drawn once (seed-derived), then
/// `replications` independent replication streams per sample size, averaged
/// into one table cell per (m, method). Fully determined by (config, seed).
RiskTable run_scenario(const ScenarioConfig& config);

/// CSV rendering: header m,<label>,<label>_se,... with '.' decimals.
std::string to_csv(const RiskTable& table);

/// Markdown rendering: one column per method, cells "mean (se)".
std::string to_markdown(const RiskTable& table);

}  // namespace ebproxy
