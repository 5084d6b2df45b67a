#include "ebproxy/simulation.hpp"

#include "ebproxy/estimators.hpp"
#include "ebproxy/rng.hpp"
#include "ebproxy/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <thread>
#include <utility>

namespace ebproxy {

namespace {

constexpr std::uint64_t kPopulationStream = 0;

std::uint64_t replication_stream(std::size_t m_index, int replication) {
  return (static_cast<std::uint64_t>(m_index + 1) << 32) |
         static_cast<std::uint64_t>(replication);
}

std::string format_double(double value, const char* fmt) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, value);
  return buf;
}

}  // namespace

Population generate_population(const PopulationParams& params,
                               std::mt19937_64& rng) {
  if (params.n < 2) {
    throw ValidationError("population needs at least 2 areas");
  }
  if (params.group_size < 2) {
    throw ValidationError("sub-quarters need at least 2 areas each");
  }
  if (!(params.sd > 0.0) || !(params.mean > 0.0) || !(params.mean < 1.0)) {
    throw ValidationError("population mean must be in (0,1) and sd positive");
  }
  if (params.intraclass_share < 0.0 || params.intraclass_share > 1.0) {
    throw ValidationError("intraclass share must be in [0,1]");
  }
  if (!(params.clamp_lo > 0.0) || !(params.clamp_hi < 1.0) ||
      params.clamp_lo >= params.clamp_hi) {
    throw ValidationError("clamp bounds must satisfy 0 < lo < hi < 1");
  }
  if (params.abrupt_count > 0 && params.abrupt_value >= params.clamp_hi) {
    throw ValidationError("abrupt-change value must lie below the upper clamp");
  }

  const int n = params.n;
  const int num_groups = std::max(1, n / params.group_size);
  const double sigma_b = params.sd * std::sqrt(params.intraclass_share);
  const double sigma_w = params.sd * std::sqrt(1.0 - params.intraclass_share);

  std::normal_distribution<double> std_normal(0.0, 1.0);

  Vector group_effect(num_groups);
  for (int g = 0; g < num_groups; ++g) {
    group_effect[g] = sigma_b * std_normal(rng);
  }

  Population pop;
  pop.p.resize(n);
  pop.subquarter.resize(n);
  for (int i = 0; i < n; ++i) {
    const int group = std::min(i / params.group_size, num_groups - 1);
    pop.subquarter[i] = group;
    double p = std::clamp(params.mean + group_effect[group] +
                              sigma_w * std_normal(rng),
                          params.clamp_lo, params.clamp_hi);
    if (i < params.abrupt_count) {
      // Keep the abrupt-change block strictly above the scenario value so
      // the change is a genuine drop.
      int attempts = 0;
      while (p <= params.abrupt_value) {
        if (++attempts > 100000) {
          throw ValidationError("could not draw p above the abrupt-change "
                                "value for area " + std::to_string(i));
        }
        p = std::clamp(params.mean + group_effect[group] +
                           sigma_w * std_normal(rng),
                       params.clamp_lo, params.clamp_hi);
      }
    }
    pop.p[i] = p;
  }

  compute_spatial_means(pop);
  pop.p_temporal = pop.p;
  return pop;
}

void compute_spatial_means(Population& pop) {
  const Eigen::Index n = pop.n();
  if (static_cast<Eigen::Index>(pop.subquarter.size()) != n) {
    throw ValidationError("sub-quarter assignment does not cover every area");
  }
  int num_groups = 0;
  for (int g : pop.subquarter) {
    num_groups = std::max(num_groups, g + 1);
  }
  Vector group_sum = Vector::Zero(num_groups);
  Eigen::VectorXi group_count = Eigen::VectorXi::Zero(num_groups);
  for (Eigen::Index i = 0; i < n; ++i) {
    group_sum[pop.subquarter[i]] += pop.p[i];
    group_count[pop.subquarter[i]] += 1;
  }
  pop.p_spatial.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int g = pop.subquarter[i];
    if (group_count[g] < 2) {
      throw ValidationError("sub-quarter " + std::to_string(g) +
                            " has a single area; neighborhoods need at "
                            "least two");
    }
    pop.p_spatial[i] = (group_sum[g] - pop.p[i]) / (group_count[g] - 1);
  }
}

Population apply_temporal_scenario(Population pop, TemporalScenario scenario,
                                   int abrupt_count, double abrupt_value) {
  if (scenario == TemporalScenario::NoChange) {
    pop.p_temporal = pop.p;
    return pop;
  }
  if (pop.n() < abrupt_count) {
    throw ValidationError("abrupt-change scenario needs at least " +
                          std::to_string(abrupt_count) + " areas");
  }
  pop.p_temporal = pop.p;
  for (int i = 0; i < abrupt_count; ++i) {
    if (pop.p[i] <= abrupt_value) {
      throw ValidationError("area " + std::to_string(i) + " has p = " +
                            std::to_string(pop.p[i]) +
                            ", not above the abrupt-change value " +
                            std::to_string(abrupt_value));
    }
    pop.p_temporal[i] = abrupt_value;
  }
  return pop;
}

bool scenario_uses_temporal(ScenarioKind kind) {
  return kind == ScenarioKind::TemporalNoChange ||
         kind == ScenarioKind::TemporalAbrupt ||
         kind == ScenarioKind::Combined;
}

bool scenario_uses_spatial(ScenarioKind kind) {
  return kind == ScenarioKind::Spatial || kind == ScenarioKind::Combined;
}

std::string to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::TemporalNoChange:
      return "temporal-nochange";
    case ScenarioKind::TemporalAbrupt:
      return "temporal-abrupt";
    case ScenarioKind::Spatial:
      return "spatial";
    case ScenarioKind::Combined:
      return "combined";
  }
  return "unknown";
}

std::vector<MethodSpec> default_methods(ScenarioKind kind, double bandwidth,
                                        bool truncate) {
  const EstimatorKind npeb = EstimatorKind::npeb(bandwidth, truncate);
  const double ws = scenario_uses_spatial(kind) && !scenario_uses_temporal(kind)
                        ? 1.0
                        : 0.0;
  const double wt = scenario_uses_temporal(kind) ? 1.0 : 0.0;

  std::vector<MethodSpec> methods;
  methods.push_back({"Naive", EstimatorKind::naive(), TransformRecipe::none()});
  methods.push_back(
      {"Reg", EstimatorKind::regression(), TransformRecipe::none()});
  methods.push_back({"NPEB1", npeb, TransformRecipe::ols()});
  methods.push_back({"NPEB2", npeb, TransformRecipe::shift(ws, wt)});
  if (kind == ScenarioKind::Combined) {
    methods.push_back({"NPEB3", npeb, TransformRecipe::shift(0.3, 0.7)});
    methods.push_back({"NPEB4", npeb, TransformRecipe::shift(0.6, 0.4)});
  }
  methods.push_back({"PEB", EstimatorKind::peb(), TransformRecipe::ols()});
  return methods;
}

MethodSpec npeb_identity_method(double bandwidth, bool truncate) {
  return {"NPEB0", EstimatorKind::npeb(bandwidth, truncate),
          TransformRecipe::identity()};
}

namespace {

AffineTransform materialize_transform(const TransformRecipe& recipe,
                                      const Matrix& design,
                                      const NormalVector& y,
                                      const NormalVector* temporal,
                                      const NormalVector* spatial) {
  switch (recipe.kind) {
    case TransformRecipe::Kind::OlsResiduals:
      return ols_residual_transform(design, y);
    case TransformRecipe::Kind::Shift: {
      Vector b = Vector::Zero(y.size());
      if (recipe.temporal_weight != 0.0) {
        if (temporal == nullptr) {
          throw ValidationError("shift recipe weights the temporal covariate "
                                "but the scenario draws none");
        }
        b += recipe.temporal_weight * temporal->values;
      }
      if (recipe.spatial_weight != 0.0) {
        if (spatial == nullptr) {
          throw ValidationError("shift recipe weights the spatial covariate "
                                "but the scenario draws none");
        }
        b += recipe.spatial_weight * spatial->values;
      }
      return AffineTransform::shift(std::move(b));
    }
    case TransformRecipe::Kind::None:
      break;
  }
  throw ValidationError("EB methods need a transform recipe");
}

}  // namespace

ReplicationResult simulate_replication(const Population& pop,
                                       ScenarioKind scenario,
                                       const std::vector<MethodSpec>& methods,
                                       int m, std::mt19937_64& rng) {
  if (m < 1) {
    throw ValidationError("sample size m must be at least 1");
  }
  if (methods.empty()) {
    throw ValidationError("replication needs at least one method");
  }
  const Eigen::Index n = pop.n();

  ReplicationResult result;

  // Shared draws: every method sees the same counts, in a fixed draw order
  // that does not depend on the method list.
  result.y_counts.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    std::binomial_distribution<int> dist(m, pop.p[i]);
    result.y_counts[i] = dist(rng);
  }
  if (scenario_uses_temporal(scenario)) {
    result.t_counts.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      std::binomial_distribution<int> dist(3 * m, pop.p_temporal[i]);
      result.t_counts[i] = dist(rng);
    }
  }
  if (scenario_uses_spatial(scenario)) {
    result.s_counts.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      std::binomial_distribution<int> dist(4 * m, pop.p_spatial[i]);
      result.s_counts[i] = dist(rng);
    }
  }

  const NormalVector y = arcsin_forward(result.y_counts, m, 1);
  std::optional<NormalVector> temporal;
  std::optional<NormalVector> spatial;
  if (result.t_counts.size() > 0) {
    temporal = arcsin_forward(result.t_counts, m, 3);
  }
  if (result.s_counts.size() > 0) {
    spatial = arcsin_forward(result.s_counts, m, 4);
  }

  // Design matrix: intercept plus the covariates the scenario provides.
  const Eigen::Index p = 1 + (temporal ? 1 : 0) + (spatial ? 1 : 0);
  Matrix design(n, p);
  design.col(0).setOnes();
  Eigen::Index col = 1;
  if (temporal) {
    design.col(col++) = temporal->values;
  }
  if (spatial) {
    design.col(col++) = spatial->values;
  }

  result.losses.reserve(methods.size());
  for (const MethodSpec& method : methods) {
    Vector p_hat;
    switch (method.estimator.tag) {
      case EstimatorKind::Tag::Naive: {
        p_hat.resize(n);
        for (Eigen::Index i = 0; i < n; ++i) {
          p_hat[i] = static_cast<double>(result.y_counts[i]) / m;
        }
        break;
      }
      case EstimatorKind::Tag::Regression: {
        p_hat = arcsin_inverse(regression_estimate(design, y), m);
        break;
      }
      case EstimatorKind::Tag::Peb: {
        const AffineTransform t = materialize_transform(
            method.recipe, design, y, temporal ? &*temporal : nullptr,
            spatial ? &*spatial : nullptr);
        p_hat = arcsin_inverse(t.invert(peb_shrink(t.apply(y))), m);
        break;
      }
      case EstimatorKind::Tag::Npeb: {
        const AffineTransform t = materialize_transform(
            method.recipe, design, y, temporal ? &*temporal : nullptr,
            spatial ? &*spatial : nullptr);
        const NormalVector z = t.apply(y);
        const NormalVector shrunk = npeb_estimate(
            z, method.estimator.bandwidth, method.estimator.truncate);
        p_hat = arcsin_inverse(t.invert(shrunk), m);
        break;
      }
    }
    result.losses.push_back((p_hat - pop.p).squaredNorm());
  }
  return result;
}

namespace {

Population scenario_population(const ScenarioConfig& config,
                               std::uint64_t pop_seed) {
  Population pop;
  if (config.fixed_population) {
    pop = *config.fixed_population;
  } else {
    std::mt19937_64 rng = make_rng(pop_seed);
    pop = generate_population(config.population, rng);
  }
  const TemporalScenario temporal =
      (config.scenario == ScenarioKind::TemporalAbrupt ||
       config.scenario == ScenarioKind::Combined)
          ? TemporalScenario::AbruptChange
          : TemporalScenario::NoChange;
  return apply_temporal_scenario(std::move(pop), temporal,
                                 config.population.abrupt_count,
                                 config.population.abrupt_value);
}

}  // namespace

RiskTable run_scenario(const ScenarioConfig& config) {
  if (config.replications < 1) {
    throw ValidationError("replications must be at least 1");
  }
  if (config.sample_sizes.empty()) {
    throw ValidationError("at least one sample size is required");
  }
  for (int m : config.sample_sizes) {
    if (m < 1) {
      throw ValidationError("sample sizes must be at least 1");
    }
  }

  const std::uint64_t pop_seed = derive_seed(config.seed, kPopulationStream);
  const Population base_pop = scenario_population(config, pop_seed);

  std::vector<MethodSpec> methods = config.methods;
  if (methods.empty()) {
    const double h = config.bandwidth > 0.0 ? config.bandwidth
                                            : default_bandwidth(base_pop.n());
    methods = default_methods(config.scenario, h, config.truncate);
  }

  const std::size_t num_methods = methods.size();
  const int reps = config.replications;
  int threads = config.threads > 0
                    ? config.threads
                    : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::clamp(threads, 1, reps);

  RiskTable table;
  table.sample_sizes = config.sample_sizes;
  for (const auto& method : methods) {
    table.methods.push_back(method.label);
  }
  table.mean.resize(static_cast<Eigen::Index>(config.sample_sizes.size()),
                    static_cast<Eigen::Index>(num_methods));
  table.se.resize(table.mean.rows(), table.mean.cols());

  for (std::size_t mi = 0; mi < config.sample_sizes.size(); ++mi) {
    const int m = config.sample_sizes[mi];
    Matrix losses(reps, static_cast<Eigen::Index>(num_methods));

    auto worker = [&](int r_begin, int r_end) {
      for (int r = r_begin; r < r_end; ++r) {
        const std::uint64_t stream = replication_stream(mi, r);
        Population local;
        const Population* pop = &base_pop;
        if (config.redraw_population) {
          ScenarioConfig redraw = config;
          redraw.fixed_population.reset();
          local = scenario_population(redraw, derive_seed(pop_seed, stream));
          pop = &local;
        }
        std::mt19937_64 rng = make_rng(derive_seed(config.seed, stream));
        const ReplicationResult rep =
            simulate_replication(*pop, config.scenario, methods, m, rng);
        for (std::size_t k = 0; k < num_methods; ++k) {
          losses(r, static_cast<Eigen::Index>(k)) = rep.losses[k];
        }
      }
    };

    if (threads == 1) {
      worker(0, reps);
    } else {
      std::vector<std::thread> pool;
      const int chunk = (reps + threads - 1) / threads;
      for (int t = 0; t < threads; ++t) {
        const int begin = t * chunk;
        const int end = std::min(reps, begin + chunk);
        if (begin < end) {
          pool.emplace_back(worker, begin, end);
        }
      }
      for (auto& th : pool) {
        th.join();
      }
    }

    // Aggregate in index order so the result does not depend on the thread
    // partition.
    for (std::size_t k = 0; k < num_methods; ++k) {
      const auto colk = losses.col(static_cast<Eigen::Index>(k));
      const double mean = colk.mean();
      double se = 0.0;
      if (reps > 1) {
        const double var =
            (colk.array() - mean).square().sum() / (reps - 1.0);
        se = std::sqrt(var / reps);
      }
      table.mean(static_cast<Eigen::Index>(mi), static_cast<Eigen::Index>(k)) =
          mean;
      table.se(static_cast<Eigen::Index>(mi), static_cast<Eigen::Index>(k)) =
          se;
    }
  }
  return table;
}

std::string to_csv(const RiskTable& table) {
  std::string out = "m";
  for (const auto& label : table.methods) {
    out += "," + label + "," + label + "_se";
  }
  out += "\n";
  for (Eigen::Index r = 0; r < table.mean.rows(); ++r) {
    out += std::to_string(table.sample_sizes[static_cast<std::size_t>(r)]);
    for (Eigen::Index c = 0; c < table.mean.cols(); ++c) {
      out += "," + format_double(table.mean(r, c), "%.8g");
      out += "," + format_double(table.se(r, c), "%.8g");
    }
    out += "\n";
  }
  return out;
}

std::string to_markdown(const RiskTable& table) {
  std::string out = "| m |";
  for (const auto& label : table.methods) {
    out += " " + label + " |";
  }
  out += "\n|---|";
  for (std::size_t k = 0; k < table.methods.size(); ++k) {
    out += "---|";
  }
  out += "\n";
  for (Eigen::Index r = 0; r < table.mean.rows(); ++r) {
    out += "| " +
           std::to_string(table.sample_sizes[static_cast<std::size_t>(r)]) +
           " |";
    for (Eigen::Index c = 0; c < table.mean.cols(); ++c) {
      out += " " + format_double(table.mean(r, c), "%.4g") + " (" +
             format_double(table.se(r, c), "%.2g") + ") |";
    }
    out += "\n";
  }
  return out;
}

}  // namespace ebproxy
