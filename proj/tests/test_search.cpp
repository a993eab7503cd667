#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "autotune/search.hpp"

using namespace autotune;
using namespace autotune::search;

namespace {

envs::EnvSpec tiny_spec() { return envs::make_env_spec(envs::EnvId::bouncing_ball, 16, 20); }

SearchConfig oracle_cfg(uint64_t seed = 0) {
  SearchConfig cfg;
  cfg.method = Method::oracle_test;
  cfg.seed = seed;
  cfg.rounds = 40;
  return cfg;
}

}  // namespace

TEST_CASE("update rule arithmetic") {
  UpdateRule rule;  // alpha 0.05, hi 0.7, lo 0.3
  const double p_up[] = {0.9};
  CHECK(update_mean(rule, p_up, ParamVector{{1.0}})[0] == doctest::Approx(1.05));
  const double p_hold[] = {0.5};
  CHECK(update_mean(rule, p_hold, ParamVector{{1.0}})[0] == 1.0);
  const double p_down[] = {0.1};
  CHECK(update_mean(rule, p_down, ParamVector{{1.0}})[0] == doctest::Approx(0.95));

  std::vector<Decision> decisions;
  const double probs[] = {0.9, 0.5, 0.1};
  update_mean(rule, probs, ParamVector{{1.0, 1.0, 1.0}}, &decisions);
  CHECK(decisions == std::vector<Decision>{Decision::up, Decision::hold, Decision::down});

  const double bad[] = {1.5};
  CHECK_THROWS_AS(update_mean(rule, bad, ParamVector{{1.0}}), std::invalid_argument);
  // oracle endpoints are legal inputs
  const double endpoint[] = {1.0};
  CHECK(update_mean(rule, endpoint, ParamVector{{1.0}})[0] == doctest::Approx(1.05));
}

TEST_CASE("update rule validation") {
  UpdateRule bad;
  bad.alpha = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = UpdateRule{};
  bad.lo_threshold = 0.6;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = UpdateRule{};
  bad.hi_threshold = 1.2;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("dead zone holds the mean exactly; motion is bounded") {
  UpdateRule rule;
  Rng rng(6);
  for (int t = 0; t < 500; ++t) {
    ParamVector mean{{rng.uniform(0.01, 10.0), rng.uniform(0.01, 10.0)}};
    // all probabilities inside [lo, hi]: exact no-op
    const double hold[] = {rng.uniform(rule.lo_threshold, rule.hi_threshold),
                           rng.uniform(rule.lo_threshold, rule.hi_threshold)};
    CHECK(update_mean(rule, hold, mean).values == mean.values);

    // arbitrary probabilities: per-round change bounded by a factor (1 +/- alpha)
    const double any[] = {rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0)};
    const ParamVector next = update_mean(rule, any, mean);
    for (size_t i = 0; i < mean.size(); ++i) {
      CHECK(next[i] >= mean[i] * (1.0 - rule.alpha) - 1e-15);
      CHECK(next[i] <= mean[i] * (1.0 + rule.alpha) + 1e-15);
    }
  }
}

TEST_CASE("update clamps at the positive floor") {
  UpdateRule rule;
  rule.alpha = 0.9;
  const double down[] = {0.0};
  ParamVector mean{{2e-4}};
  const auto next = update_mean(rule, down, mean);
  CHECK(next[0] == kParamFloor);
}

TEST_CASE("oracle comparator definition") {
  const auto up = oracle_comparator(ParamVector{{2.0}}, ParamVector{{1.0}}, 0.05);
  CHECK(up[0] == 1.0);
  const auto eq = oracle_comparator(ParamVector{{1.0}}, ParamVector{{1.0}}, 0.05);
  CHECK(eq[0] == 0.5);
  const auto down = oracle_comparator(ParamVector{{0.5}}, ParamVector{{1.0}}, 0.05);
  CHECK(down[0] == 0.0);
}

TEST_CASE("buffers are bounded FIFOs and d_sp requires gen_params") {
  BufferPair buffers(3, 2);
  const auto spec = tiny_spec();
  const auto params = envs::preset_real_params(spec.env_id);
  const envs::Controller ctrl{envs::Controller::Kind::random, 1};

  for (int i = 0; i < 5; ++i) buffers.push_sp(envs::rollout(spec, params, ctrl, 100 + i));
  CHECK(buffers.d_sp.size() == 3);
  // FIFO: oldest evicted; entries all still carry gen_params
  for (const auto& t : buffers.d_sp) CHECK(t.gen_params.has_value());

  envs::Trajectory unlabeled = envs::rollout(spec, params, ctrl, 7);
  unlabeled.gen_params.reset();
  CHECK_THROWS_AS(buffers.push_sp(std::move(unlabeled)), std::logic_error);

  for (int i = 0; i < 4; ++i) buffers.push_policy(envs::rollout(spec, params, ctrl, 200 + i));
  CHECK(buffers.d_policy.size() == 2);
}

TEST_CASE("config validation enforces r_policy < r_sp") {
  SearchConfig cfg;
  cfg.r_policy = 2.0;
  cfg.r_sp = 1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

// Closed-form geometric recurrence: from mean = 2x truth with alpha = 0.05,
// mean_k = 2 * 0.95^k, and the first sub-10% round is k = 12.
TEST_CASE("oracle search converges on the closed-form schedule") {
  const auto spec = tiny_spec();
  const ParamVector real = envs::preset_real_params(spec.env_id);
  ParamVector start = real;
  for (auto& v : start.values) v *= 2.0;
  const envs::PseudoRealEnv env(spec, real);

  AutotuneRun run(spec, start, oracle_cfg());
  std::vector<int> first_below(real.size(), -1);
  for (int k = 1; k <= 40; ++k) {
    const RoundRecord rec = run.run_round(env);
    const auto err = percent_error(rec.mean_after, real);
    for (size_t i = 0; i < err.size(); ++i) {
      if (first_below[i] < 0 && err[i] < 10.0) first_below[i] = k;
      if (k >= 13) CHECK(err[i] <= 10.0);  // stays inside the (alpha+eta) band
      const double expected = 100.0 * std::abs(2.0 * std::pow(0.95, std::min(k, 13)) - 1.0);
      CHECK(err[i] == doctest::Approx(expected).epsilon(1e-9));
    }
  }
  for (int k : first_below) CHECK(k == 12);
}

TEST_CASE("oracle error is non-increasing and recovers from out-of-support starts") {
  const auto spec = tiny_spec();
  const ParamVector real = envs::preset_real_params(spec.env_id);
  // truth at 2.5x the initial mean: outside the r_sp = 1 support
  ParamVector start = real;
  for (auto& v : start.values) v /= 2.5;
  const envs::PseudoRealEnv env(spec, real);

  AutotuneRun run(spec, start, oracle_cfg());
  auto prev = percent_error(start, real);
  const int bound = static_cast<int>(std::ceil(std::log(2.5) / std::log(1.05))) + 1;  // 20
  for (int k = 1; k <= 40; ++k) {
    const auto rec = run.run_round(env);
    const auto err = percent_error(rec.mean_after, real);
    for (size_t i = 0; i < err.size(); ++i) {
      CHECK(err[i] <= prev[i] + 1e-12);
      if (k >= bound) CHECK(err[i] <= 100.0 * (0.05 + 0.05));
    }
    prev = err;
  }
}

TEST_CASE("dr baseline never mutates the mean") {
  const auto spec = tiny_spec();
  const ParamVector real = envs::preset_real_params(spec.env_id);
  ParamVector start = real;
  for (auto& v : start.values) v *= 2.0;
  const envs::PseudoRealEnv env(spec, real);

  SearchConfig cfg;
  cfg.method = Method::dr_baseline;
  cfg.rounds = 3;
  cfg.policy_rollouts_per_round = 2;
  AutotuneRun run(spec, start, cfg);
  for (int k = 1; k <= 3; ++k) {
    const auto rec = run.run_round(env);
    CHECK(rec.mean_after.values == start.values);
    for (const auto d : rec.decisions) CHECK(d == Decision::hold);
  }
  CHECK(run.buffers().d_policy.size() == 6);
}

TEST_CASE("dr baseline and autotune share the rollout seeding path") {
  const auto spec = tiny_spec();
  const ParamVector real = envs::preset_real_params(spec.env_id);
  ParamVector start = real;
  for (auto& v : start.values) v *= 1.2;
  const envs::PseudoRealEnv env(spec, real);

  SearchConfig at;
  at.method = Method::autotune;
  at.seed = 5;
  at.rounds = 1;
  at.r_policy = 0.5;  // match r_dr so the distributions coincide
  at.r_sp = 1.0;
  at.policy_rollouts_per_round = 3;
  at.sp_rollouts_per_round = 1;
  at.sim_param_itrs = 0;
  at.pretrain_trajs = 0;
  at.pretrain_steps = 0;
  at.real_rollouts_per_update = 1;

  SearchConfig dr = at;
  dr.method = Method::dr_baseline;
  dr.r_dr = 0.5;

  AutotuneRun run_at(spec, start, at);
  AutotuneRun run_dr(spec, start, dr);
  run_at.run_round(env);
  run_dr.run_round(env);

  REQUIRE(run_at.buffers().d_policy.size() == 3);
  REQUIRE(run_dr.buffers().d_policy.size() == 3);
  for (size_t i = 0; i < 3; ++i) {
    const auto& a = run_at.buffers().d_policy[i];
    const auto& b = run_dr.buffers().d_policy[i];
    CHECK(a.gen_params->values == b.gen_params->values);
    CHECK(a.actions == b.actions);
    for (size_t t = 0; t < a.length(); ++t) CHECK(a.frames[t].rgb == b.frames[t].rgb);
  }
}

namespace {

SearchConfig stub_regression_cfg(double alpha) {
  SearchConfig cfg;
  cfg.method = Method::regression_baseline;
  cfg.rounds = 60;
  cfg.rule.alpha = alpha;
  cfg.pretrain_trajs = 0;
  cfg.pretrain_steps = 0;
  cfg.sim_param_itrs = 0;
  cfg.sp_rollouts_per_round = 0;
  cfg.policy_rollouts_per_round = 0;
  cfg.real_rollouts_per_update = 0;
  return cfg;
}

}  // namespace

TEST_CASE("perfect regressor converges geometrically with ratio (1 - alpha)") {
  const auto spec = tiny_spec();
  const ParamVector real = envs::preset_real_params(spec.env_id);
  ParamVector start = real;
  for (auto& v : start.values) v *= 2.0;
  const envs::PseudoRealEnv env(spec, real);

  const double alpha = 0.05;
  AutotuneRun run(spec, start, stub_regression_cfg(alpha));
  run.set_regressor_override(
      [&](std::span<const envs::Trajectory>, const ParamVector&) { return real; });

  for (int k = 1; k <= 30; ++k) {
    const auto rec = run.run_round(env);
    for (size_t i = 0; i < real.size(); ++i) {
      const double expected = real[i] + std::pow(1.0 - alpha, k) * (start[i] - real[i]);
      CHECK(rec.mean_after[i] == doctest::Approx(expected).epsilon(1e-9));
    }
  }
}

TEST_CASE("regressor returning the current mean is a fixed point") {
  const auto spec = tiny_spec();
  const ParamVector real = envs::preset_real_params(spec.env_id);
  ParamVector start = real;
  for (auto& v : start.values) v *= 1.7;
  const envs::PseudoRealEnv env(spec, real);

  AutotuneRun run(spec, start, stub_regression_cfg(0.05));
  run.set_regressor_override(
      [](std::span<const envs::Trajectory>, const ParamVector& mean) { return mean; });
  for (int k = 1; k <= 5; ++k) {
    const auto rec = run.run_round(env);
    CHECK(rec.mean_after.values == start.values);
  }
}

TEST_CASE("regression update clamps at the parameter floor") {
  const auto spec = tiny_spec();
  const ParamVector real = envs::preset_real_params(spec.env_id);
  const envs::PseudoRealEnv env(spec, real);

  AutotuneRun run(spec, real, stub_regression_cfg(0.9));
  run.set_regressor_override([&](std::span<const envs::Trajectory>, const ParamVector&) {
    ParamVector zeros = real;
    for (auto& v : zeros.values) v = 0.0;
    return zeros;
  });
  ParamVector last = real;
  for (int k = 1; k <= 60; ++k) last = run.run_round(env).mean_after;
  for (size_t i = 0; i < last.size(); ++i) CHECK(last[i] == kParamFloor);
}

TEST_CASE("aggregate predictions are invariant to duplication and order") {
  const auto spec = tiny_spec();
  const ParamVector mean = envs::preset_real_params(spec.env_id);
  spm::SpmModel model(spec, mean, spm::SpmConfig{}, 3);
  const envs::PseudoRealEnv env(spec, mean);
  const envs::Controller ctrl{envs::Controller::Kind::random, 2};
  const auto trajs = env.rollout_batch(ctrl, 10, 3);

  const auto single = aggregate_real_predictions(model, std::span(trajs).subspan(0, 1), mean);
  CHECK(single == model.predict(trajs[0], mean));

  const auto base = aggregate_real_predictions(model, trajs, mean);
  std::vector<envs::Trajectory> doubled(trajs.begin(), trajs.end());
  doubled.insert(doubled.end(), trajs.begin(), trajs.end());
  const auto dup = aggregate_real_predictions(model, doubled, mean);
  for (size_t i = 0; i < base.size(); ++i) CHECK(dup[i] == doctest::Approx(base[i]).epsilon(1e-12));

  std::vector<envs::Trajectory> permuted{trajs[2], trajs[0], trajs[1]};
  const auto perm = aggregate_real_predictions(model, permuted, mean);
  for (size_t i = 0; i < base.size(); ++i)
    CHECK(perm[i] == doctest::Approx(base[i]).epsilon(1e-12));

  CHECK_THROWS_AS(aggregate_real_predictions(model, {}, mean), std::invalid_argument);
}

TEST_CASE("pretraining fills d_sp with in-support trajectories") {
  const auto spec = tiny_spec();
  const ParamVector real = envs::preset_real_params(spec.env_id);
  ParamVector start = real;
  for (auto& v : start.values) v *= 0.5;

  SearchConfig cfg;
  cfg.method = Method::autotune;
  cfg.pretrain_trajs = 12;
  cfg.pretrain_steps = 2;
  cfg.batch_size = 8;
  AutotuneRun run(spec, start, cfg);
  run.pretrain_phase();

  CHECK(run.buffers().d_sp.size() == 12);
  const ParamDistribution dist{start, cfg.r_sp};
  for (const auto& t : run.buffers().d_sp) {
    REQUIRE(t.gen_params.has_value());
    for (size_t i = 0; i < start.size(); ++i) {
      CHECK((*t.gen_params)[i] >= dist.lo(i) - 1e-12);
      CHECK((*t.gen_params)[i] <= dist.hi(i) + 1e-12);
    }
  }
}
