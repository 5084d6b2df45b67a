#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ebproxy/dataset_io.hpp"
#include "ebproxy/rng.hpp"
#include "ebproxy/simulation.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

using namespace ebproxy;
using doctest::Approx;

namespace {

double correlation(const Vector& a, const Vector& b) {
  const double ma = a.mean();
  const double mb = b.mean();
  const double cov = ((a.array() - ma) * (b.array() - mb)).sum();
  const double va = (a.array() - ma).square().sum();
  const double vb = (b.array() - mb).square().sum();
  return cov / std::sqrt(va * vb);
}

Population default_population(std::uint64_t seed = 7) {
  PopulationParams params;
  std::mt19937_64 rng = make_rng(seed);
  return generate_population(params, rng);
}

}  // namespace

TEST_CASE("generate_population hits the target moments") {
  const Population pop = default_population();
  CHECK(pop.n() == 161);
  const double mean = pop.p.mean();
  const double sd =
      std::sqrt((pop.p.array() - mean).square().sum() / (pop.n() - 1.0));
  CHECK(std::abs(mean - 0.75) < 0.03);
  CHECK(std::abs(sd - 0.13) < 0.03);
  for (Eigen::Index i = 0; i < pop.n(); ++i) {
    CHECK(pop.p[i] > 0.0);
    CHECK(pop.p[i] < 1.0);
  }
}

TEST_CASE("generate_population builds 31 sub-quarters of 5 plus one of 6") {
  const Population pop = default_population();
  std::vector<int> sizes(32, 0);
  for (int g : pop.subquarter) {
    REQUIRE(g >= 0);
    REQUIRE(g < 32);
    sizes[static_cast<std::size_t>(g)] += 1;
  }
  int fives = 0;
  int sixes = 0;
  for (int s : sizes) {
    if (s == 5) ++fives;
    if (s == 6) ++sixes;
  }
  CHECK(fives == 31);
  CHECK(sixes == 1);
}

TEST_CASE("spatial means correlate with the area proportions") {
  const Population pop = default_population();
  const double corr = correlation(pop.p, pop.p_spatial);
  CHECK(corr >= 0.45);
  CHECK(corr <= 0.75);
}

TEST_CASE("no group effect means no spatial correlation") {
  PopulationParams params;
  params.intraclass_share = 0.0;
  std::mt19937_64 rng = make_rng(8);
  const Population pop = generate_population(params, rng);
  CHECK(std::abs(correlation(pop.p, pop.p_spatial)) < 0.15);
}

TEST_CASE("the first sixteen areas stay above the abrupt-change value") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Population pop = default_population(seed);
    for (int i = 0; i < 16; ++i) {
      CHECK(pop.p[i] > 0.3);
    }
  }
}

TEST_CASE("temporal scenarios set p_t without leaking state") {
  const Population pop = default_population();

  const Population no_change =
      apply_temporal_scenario(pop, TemporalScenario::NoChange);
  CHECK((no_change.p_temporal - no_change.p).cwiseAbs().maxCoeff() == 0.0);

  const Population abrupt =
      apply_temporal_scenario(pop, TemporalScenario::AbruptChange);
  int changed = 0;
  for (Eigen::Index i = 0; i < abrupt.n(); ++i) {
    if (abrupt.p_temporal[i] != abrupt.p[i]) {
      ++changed;
      CHECK(abrupt.p_temporal[i] == 0.3);
      CHECK(i < 16);
    }
  }
  CHECK(changed == 16);

  // Re-deriving the no-change state from a fresh copy is unaffected by the
  // abrupt application above.
  const Population again =
      apply_temporal_scenario(pop, TemporalScenario::NoChange);
  CHECK((again.p_temporal - pop.p).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("the naive loss is exactly the plug-in squared error") {
  const Population pop = apply_temporal_scenario(default_population(),
                                                 TemporalScenario::NoChange);
  std::mt19937_64 rng = make_rng(99);
  const auto methods = default_methods(ScenarioKind::TemporalNoChange, 0.4);
  const ReplicationResult rep = simulate_replication(
      pop, ScenarioKind::TemporalNoChange, methods, 25, rng);
  double expected = 0.0;
  for (Eigen::Index i = 0; i < pop.n(); ++i) {
    const double diff = rep.y_counts[i] / 25.0 - pop.p[i];
    expected += diff * diff;
  }
  CHECK(rep.losses[0] == Approx(expected).epsilon(1e-12));
}

TEST_CASE("every method is consistent at a huge sample size") {
  // Consistency of all methods needs the no-change scenario: under abrupt
  // changes the regression predictor keeps an O(1) bias at every m.
  const Population pop = apply_temporal_scenario(default_population(),
                                                 TemporalScenario::NoChange);
  std::mt19937_64 rng = make_rng(100);
  auto methods = default_methods(ScenarioKind::TemporalNoChange, 0.4);
  methods.push_back(npeb_identity_method(0.4));
  const ReplicationResult rep = simulate_replication(
      pop, ScenarioKind::TemporalNoChange, methods, 1000000, rng);
  for (std::size_t k = 0; k < methods.size(); ++k) {
    INFO(methods[k].label);
    CHECK(rep.losses[k] < 0.01);
  }
}

TEST_CASE("EB methods stay consistent under abrupt changes") {
  const Population pop = apply_temporal_scenario(
      default_population(), TemporalScenario::AbruptChange);
  std::mt19937_64 rng = make_rng(101);
  auto methods = default_methods(ScenarioKind::Combined, 0.4);
  const ReplicationResult rep = simulate_replication(
      pop, ScenarioKind::Combined, methods, 1000000, rng);
  for (std::size_t k = 0; k < methods.size(); ++k) {
    if (methods[k].label == "Reg") {
      continue;  // regression keeps its misspecification bias
    }
    INFO(methods[k].label);
    CHECK(rep.losses[k] < 0.01);
  }
}

TEST_CASE("methods share one set of count draws") {
  const Population pop = apply_temporal_scenario(
      default_population(), TemporalScenario::AbruptChange);
  const auto all = default_methods(ScenarioKind::TemporalAbrupt, 0.4);
  const std::vector<MethodSpec> naive_only = {all[0]};

  std::mt19937_64 rng_a = make_rng(derive_seed(5, 1));
  std::mt19937_64 rng_b = make_rng(derive_seed(5, 1));
  const ReplicationResult a = simulate_replication(
      pop, ScenarioKind::TemporalAbrupt, naive_only, 25, rng_a);
  const ReplicationResult b = simulate_replication(
      pop, ScenarioKind::TemporalAbrupt, all, 25, rng_b);

  CHECK(a.y_counts == b.y_counts);
  CHECK(a.t_counts == b.t_counts);
  CHECK(a.losses[0] == b.losses[0]);
}

TEST_CASE("run_scenario is deterministic") {
  ScenarioConfig config;
  config.scenario = ScenarioKind::TemporalAbrupt;
  config.sample_sizes = {25};
  config.replications = 5;
  config.seed = 31;
  config.bandwidth = 0.4;
  const std::string a = to_csv(run_scenario(config));
  const std::string b = to_csv(run_scenario(config));
  CHECK(a == b);

  config.threads = 1;
  const std::string serial = to_csv(run_scenario(config));
  config.threads = 2;
  const std::string parallel = to_csv(run_scenario(config));
  CHECK(serial == parallel);
}

TEST_CASE("the Monte Carlo naive risk matches the analytic value") {
  ScenarioConfig config;
  config.scenario = ScenarioKind::TemporalNoChange;
  config.sample_sizes = {25};
  config.replications = 400;
  config.seed = 7;
  config.bandwidth = 0.4;
  std::mt19937_64 rng = make_rng(derive_seed(config.seed, 0));
  config.fixed_population = generate_population(config.population, rng);

  const RiskTable table = run_scenario(config);
  const double analytic =
      (config.fixed_population->p.array() *
       (1.0 - config.fixed_population->p.array())).sum() / 25.0;
  const double mc = table.mean(0, 0);
  const double se = table.se(0, 0);
  CHECK(std::abs(mc - analytic) < 3.0 * se);
  // The no-change m=25 naive cell sits in the published band.
  CHECK(mc > 1.0);
  CHECK(mc < 1.25);
}

TEST_CASE("abrupt changes reorder the methods") {
  ScenarioConfig config;
  config.scenario = ScenarioKind::TemporalAbrupt;
  config.sample_sizes = {50};
  config.replications = 200;
  config.seed = 2;
  config.bandwidth = 0.4;
  const RiskTable t = run_scenario(config);
  // columns: Naive, Reg, NPEB1, NPEB2, PEB
  const double naive = t.mean(0, 0);
  const double reg = t.mean(0, 1);
  const double npeb1 = t.mean(0, 2);
  const double npeb2 = t.mean(0, 3);
  const double peb = t.mean(0, 4);
  CHECK(npeb2 < peb);
  CHECK(npeb2 < npeb1);
  CHECK(peb < naive);
  CHECK(npeb1 < naive);
  CHECK(naive < reg);
}

TEST_CASE("risk falls with the sample size for every method") {
  ScenarioConfig config;
  config.scenario = ScenarioKind::Combined;
  config.sample_sizes = {25, 100};
  config.replications = 200;
  config.seed = 11;
  config.bandwidth = 0.4;
  const RiskTable t = run_scenario(config);
  REQUIRE(t.methods.size() == 7);  // Naive, Reg, NPEB1-4, PEB
  for (Eigen::Index c = 0; c < t.mean.cols(); ++c) {
    CHECK(t.mean(1, c) < t.mean(0, c));
  }
}

TEST_CASE("redrawing the population stays deterministic") {
  ScenarioConfig config;
  config.scenario = ScenarioKind::Spatial;
  config.sample_sizes = {25};
  config.replications = 4;
  config.seed = 9;
  config.bandwidth = 0.4;
  config.redraw_population = true;
  const std::string a = to_csv(run_scenario(config));
  const std::string b = to_csv(run_scenario(config));
  CHECK(a == b);

  config.redraw_population = false;
  CHECK(to_csv(run_scenario(config)) != a);
}

TEST_CASE("table renderers carry labels, rows and standard errors") {
  ScenarioConfig config;
  config.scenario = ScenarioKind::TemporalNoChange;
  config.sample_sizes = {25, 50};
  config.replications = 3;
  config.seed = 12;
  config.bandwidth = 0.4;
  const RiskTable t = run_scenario(config);

  const std::string csv = to_csv(t);
  CHECK(csv.find("m,Naive,Naive_se,Reg,Reg_se,NPEB1,NPEB1_se,NPEB2,NPEB2_se,"
                 "PEB,PEB_se\n") == 0);
  CHECK(csv.find("\n25,") != std::string::npos);
  CHECK(csv.find("\n50,") != std::string::npos);

  const std::string md = to_markdown(t);
  CHECK(md.find("| m |") == 0);
  CHECK(md.find("NPEB2") != std::string::npos);
  CHECK(md.find("(") != std::string::npos);
}

TEST_CASE("population files round-trip and validate") {
  const std::string path = "tmp_population_roundtrip.csv";
  {
    std::ofstream out(path);
    out << "area_id,p,subquarter_id\n";
    out << "a1,0.70,q1\n";
    out << "a2,0.80,q1\n";
    out << "a3,0.60,q2\n";
    out << "a4,0.90,q2\n";
  }
  const Population pop = read_population(path);
  CHECK(pop.n() == 4);
  CHECK(pop.p[0] == Approx(0.70));
  CHECK(pop.p_spatial[0] == Approx(0.80));
  CHECK(pop.p_spatial[3] == Approx(0.60));
  CHECK(pop.subquarter[2] == pop.subquarter[3]);
  std::remove(path.c_str());
}

TEST_CASE("population parse errors name the line") {
  const std::string path = "tmp_population_badline.csv";
  {
    std::ofstream out(path);
    out << "area_id,p,subquarter_id\n";
    out << "a1,0.70,q1\n";
    out << "a2,not-a-number,q1\n";
  }
  try {
    read_population(path);
    FAIL("expected a parse error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find(":3") != std::string::npos);
  }
  std::remove(path.c_str());
}

TEST_CASE("a singleton sub-quarter is rejected") {
  const std::string path = "tmp_population_singleton.csv";
  {
    std::ofstream out(path);
    out << "area_id,p,subquarter_id\n";
    out << "a1,0.70,q1\n";
    out << "a2,0.80,q1\n";
    out << "a3,0.60,q2\n";
  }
  CHECK_THROWS_AS(read_population(path), ValidationError);
  std::remove(path.c_str());
}

TEST_CASE("scenario kinds expose their covariate usage") {
  CHECK(scenario_uses_temporal(ScenarioKind::TemporalAbrupt));
  CHECK(!scenario_uses_spatial(ScenarioKind::TemporalAbrupt));
  CHECK(scenario_uses_spatial(ScenarioKind::Spatial));
  CHECK(!scenario_uses_temporal(ScenarioKind::Spatial));
  CHECK(scenario_uses_temporal(ScenarioKind::Combined));
  CHECK(scenario_uses_spatial(ScenarioKind::Combined));
}

TEST_CASE("default rosters match the published column sets") {
  const auto temporal = default_methods(ScenarioKind::TemporalAbrupt, 0.4);
  REQUIRE(temporal.size() == 5);
  CHECK(temporal[0].label == "Naive");
  CHECK(temporal[1].label == "Reg");
  CHECK(temporal[2].label == "NPEB1");
  CHECK(temporal[3].label == "NPEB2");
  CHECK(temporal[4].label == "PEB");
  CHECK(temporal[3].recipe.temporal_weight == 1.0);
  CHECK(temporal[3].recipe.spatial_weight == 0.0);

  const auto spatial = default_methods(ScenarioKind::Spatial, 0.4);
  CHECK(spatial[3].recipe.spatial_weight == 1.0);
  CHECK(spatial[3].recipe.temporal_weight == 0.0);

  const auto combined = default_methods(ScenarioKind::Combined, 0.4);
  REQUIRE(combined.size() == 7);
  CHECK(combined[4].label == "NPEB3");
  CHECK(combined[4].recipe.spatial_weight == Approx(0.3));
  CHECK(combined[4].recipe.temporal_weight == Approx(0.7));
  CHECK(combined[5].label == "NPEB4");
  CHECK(combined[5].recipe.spatial_weight == Approx(0.6));
  CHECK(combined[5].recipe.temporal_weight == Approx(0.4));
}

TEST_CASE("a shift recipe without its covariate is rejected") {
  const Population pop = apply_temporal_scenario(default_population(),
                                                 TemporalScenario::NoChange);
  std::mt19937_64 rng = make_rng(1);
  const std::vector<MethodSpec> bad = {
      {"NPEB2", EstimatorKind::npeb(0.4), TransformRecipe::shift(1.0, 0.0)}};
  CHECK_THROWS_AS(simulate_replication(pop, ScenarioKind::TemporalNoChange,
                                       bad, 25, rng),
                  ValidationError);
}
