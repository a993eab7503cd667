#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <deque>
#include <filesystem>

#include "autotune/spm.hpp"

using namespace autotune;
using namespace autotune::spm;

namespace {

// small env profile keeps the unit tests fast
envs::EnvSpec tiny_spec() { return envs::make_env_spec(envs::EnvId::bouncing_ball, 16, 20); }

std::deque<envs::Trajectory> tiny_buffer(const envs::EnvSpec& spec, int count, uint64_t seed,
                                         double range = 1.0) {
  const ParamDistribution dist{envs::preset_real_params(spec.env_id), range};
  const envs::Controller ctrl{envs::Controller::Kind::random, seed};
  auto trajs = envs::rollout_batch(spec, dist, ctrl, seed, count);
  return {trajs.begin(), trajs.end()};
}

SpmConfig tiny_cfg() {
  SpmConfig cfg;
  cfg.window = 10;
  return cfg;
}

}  // namespace

TEST_CASE("label and mask rule") {
  // sim=2, cand=1, mean=1, eta=0.05 -> label 1, unmasked
  auto [l1, m1] = label_and_mask(2.0, 1.0, 1.0, 0.05);
  CHECK(l1 == 1);
  CHECK(m1 == 1);
  // sim=1, cand=1.02 inside the band -> masked out
  auto [l2, m2] = label_and_mask(1.0, 1.02, 1.0, 0.05);
  CHECK(m2 == 0);
  auto [l3, m3] = label_and_mask(0.4, 1.0, 1.0, 0.05);
  CHECK(l3 == 0);
  CHECK(m3 == 1);
}

TEST_CASE("label consistency: swapping sim and candidate flips the label") {
  Rng rng(31);
  for (int t = 0; t < 2000; ++t) {
    const double mean = rng.uniform(0.1, 5.0);
    const double sim = rng.uniform(0.0, 2.0 * mean);
    const double cand = rng.uniform(0.0, 2.0 * mean);
    const double eta = 0.05;
    auto [l, m] = label_and_mask(sim, cand, mean, eta);
    auto [ls, ms] = label_and_mask(cand, sim, mean, eta);
    CHECK(m == ms);
    if (m == 1) CHECK(l == (1 - ls));
  }
}

TEST_CASE("training pairs respect bounds, labels, and the equality band") {
  const auto spec = tiny_spec();
  const auto buffer = tiny_buffer(spec, 1, 7);
  const ParamVector mean = envs::preset_real_params(spec.env_id);
  const auto& sim = *buffer[0].gen_params;

  Rng rng(3);
  const SpmConfig cfg = tiny_cfg();
  double sum = 0.0;
  int count = 0;
  for (int rep = 0; rep < 2500; ++rep) {
    const auto pairs = make_training_pairs(buffer[0], mean, rng, 4, cfg);
    CHECK(pairs.size() == 4);
    for (const auto& p : pairs) {
      CHECK(p.window_start >= 0);
      CHECK(p.window_start + cfg.window <= static_cast<int>(buffer[0].length()));
      for (size_t i = 0; i < mean.size(); ++i) {
        CHECK(p.candidate[i] >= 0.0);
        CHECK(p.candidate[i] <= 2.0 * mean[i]);
        const auto [l, m] = label_and_mask(sim[i], p.candidate[i], mean[i], cfg.eta);
        CHECK(p.label[i] == l);
        CHECK(p.mask[i] == m);
      }
      sum += p.candidate[0] / mean[0];
      ++count;
    }
  }
  // candidate moments: uniform on [0, 2*mean] has mean = mean
  CHECK(sum / count == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("training pairs reject short or unlabeled trajectories") {
  const auto spec = tiny_spec();
  auto buffer = tiny_buffer(spec, 1, 7);
  const ParamVector mean = envs::preset_real_params(spec.env_id);
  Rng rng(3);

  envs::Trajectory short_traj = buffer[0];
  short_traj.frames.resize(5);
  short_traj.actions.resize(5);
  CHECK_THROWS_AS(make_training_pairs(short_traj, mean, rng, 1, tiny_cfg()),
                  std::invalid_argument);

  envs::Trajectory unlabeled = buffer[0];
  unlabeled.gen_params.reset();
  CHECK_THROWS_AS(make_training_pairs(unlabeled, mean, rng, 1, tiny_cfg()),
                  std::invalid_argument);
}

TEST_CASE("fresh model answers exactly 0.5 everywhere") {
  const auto spec = tiny_spec();
  const ParamVector mean = envs::preset_real_params(spec.env_id);
  SpmModel model(spec, mean, tiny_cfg(), 11);
  const auto buffer = tiny_buffer(spec, 1, 8);
  const auto probs =
      model.forward_window(std::span(buffer[0].frames).subspan(0, 10),
                           std::span(buffer[0].actions).subspan(0, 10), mean);
  for (double p : probs) CHECK(p == 0.5);
}

TEST_CASE("forward is a pure function of its inputs") {
  const auto spec = tiny_spec();
  const ParamVector mean = envs::preset_real_params(spec.env_id);
  SpmModel model(spec, mean, tiny_cfg(), 12);
  const auto buffer = tiny_buffer(spec, 2, 9);
  ParamVector cand = mean;
  cand[0] *= 1.3;
  const auto a = model.forward_window(std::span(buffer[0].frames).subspan(3, 10),
                                      std::span(buffer[0].actions).subspan(3, 10), cand);
  const auto b = model.forward_window(std::span(buffer[0].frames).subspan(3, 10),
                                      std::span(buffer[0].actions).subspan(3, 10), cand);
  CHECK(a == b);
}

TEST_CASE("predict equals the mean of per-window forwards") {
  const auto spec = tiny_spec();  // episode 20 -> 2 windows
  const ParamVector mean = envs::preset_real_params(spec.env_id);
  SpmModel model(spec, mean, tiny_cfg(), 13);
  auto buffer = tiny_buffer(spec, 1, 10);

  // train briefly so outputs are nontrivial
  Rng rng(5);
  model.train(buffer, mean, {5, 16}, rng);

  const auto& traj = buffer[0];
  const auto w0 = model.forward_window(std::span(traj.frames).subspan(0, 10),
                                       std::span(traj.actions).subspan(0, 10), mean);
  const auto w1 = model.forward_window(std::span(traj.frames).subspan(10, 10),
                                       std::span(traj.actions).subspan(10, 10), mean);
  const auto p = model.predict(traj, mean);
  for (size_t i = 0; i < p.size(); ++i)
    CHECK(p[i] == doctest::Approx(0.5 * (w0[i] + w1[i])).epsilon(1e-12));

  // a 10-frame trajectory is a single window
  envs::Trajectory one = traj;
  one.frames.resize(10);
  one.actions.resize(10);
  const auto p1 = model.predict(one, mean);
  for (size_t i = 0; i < p.size(); ++i) CHECK(p1[i] == w0[i]);

  envs::Trajectory tooshort = traj;
  tooshort.frames.resize(8);
  tooshort.actions.resize(8);
  CHECK_THROWS_AS(model.predict(tooshort, mean), std::invalid_argument);
}

TEST_CASE("training is deterministic given the seed") {
  const auto spec = tiny_spec();
  const ParamVector mean = envs::preset_real_params(spec.env_id);
  auto buffer = tiny_buffer(spec, 12, 20);

  auto run = [&](uint64_t seed) {
    SpmModel model(spec, mean, tiny_cfg(), seed);
    Rng rng(seed + 1);
    return model.train(buffer, mean, {8, 16}, rng).loss_curve;
  };
  const auto a = run(7), b = run(7);
  CHECK(a == b);
}

TEST_CASE("training loss strictly decreases on a fixed batch") {
  const auto spec = envs::make_env_spec(envs::EnvId::bouncing_ball, 32, 20);
  const ParamVector mean = envs::preset_real_params(spec.env_id);
  auto buffer = tiny_buffer(spec, 8, 21);

  for (uint64_t seed : {1ull, 2ull, 3ull}) {
    SpmModel model(spec, mean, tiny_cfg(), seed);
    Rng rng(seed);
    TrainOptions options{10, 32};
    options.fixed_batch = true;
    const auto metrics = model.train(buffer, mean, options, rng);
    REQUIRE(metrics.loss_curve.size() == 10);
    for (size_t s = 1; s < metrics.loss_curve.size(); ++s) {
      INFO("seed ", seed, " step ", s);
      CHECK(metrics.loss_curve[s] < metrics.loss_curve[s - 1]);
    }
  }
}

TEST_CASE("loss after training is below the initial loss (3 seeds)") {
  const auto spec = tiny_spec();
  const ParamVector mean = envs::preset_real_params(spec.env_id);
  auto buffer = tiny_buffer(spec, 20, 22);
  for (uint64_t seed : {4ull, 5ull, 6ull}) {
    SpmModel model(spec, mean, tiny_cfg(), seed);
    Rng rng(seed);
    const auto metrics = model.train(buffer, mean, {200, 32}, rng);
    CHECK(metrics.loss_curve.back() < metrics.loss_curve.front());
  }
}

TEST_CASE("train reports held-out accuracy per parameter") {
  const auto spec = tiny_spec();
  const ParamVector mean = envs::preset_real_params(spec.env_id);
  auto buffer = tiny_buffer(spec, 20, 23);
  SpmModel model(spec, mean, tiny_cfg(), 3);
  Rng rng(3);
  const auto metrics = model.train(buffer, mean, {3, 16}, rng);
  CHECK(metrics.heldout_accuracy.size() == mean.size());
  CHECK(metrics.heldout_pairs > 0);
  for (double a : metrics.heldout_accuracy) {
    CHECK(a >= 0.0);
    CHECK(a <= 1.0);
  }
  std::deque<envs::Trajectory> empty;
  CHECK_THROWS_AS(model.train(empty, mean, {1, 16}, rng), std::invalid_argument);
}

TEST_CASE("model checkpoints restore predictions exactly") {
  const auto spec = tiny_spec();
  const ParamVector mean = envs::preset_real_params(spec.env_id);
  auto buffer = tiny_buffer(spec, 10, 24);

  SpmModel model(spec, mean, tiny_cfg(), 31);
  Rng rng(9);
  model.train(buffer, mean, {5, 16}, rng);
  const auto before = model.predict(buffer[0], mean);

  const auto path = std::filesystem::temp_directory_path() / "autotune_spm_ckpt.bin";
  model.save(path);
  SpmModel restored(spec, mean, tiny_cfg(), 99);  // different init
  restored.load(path);
  CHECK(restored.predict(buffer[0], mean) == before);
  std::filesystem::remove(path);
}

TEST_CASE("extra feature hook changes the head input contract") {
  const auto spec = tiny_spec();
  const ParamVector mean = envs::preset_real_params(spec.env_id);
  SpmConfig cfg = tiny_cfg();
  cfg.extra_feature_dim = 3;
  SpmModel model(spec, mean, cfg, 17);
  const auto buffer = tiny_buffer(spec, 1, 25);
  const std::vector<double> extra{0.1, -0.2, 0.3};
  const auto probs =
      model.forward_window(std::span(buffer[0].frames).subspan(0, 10),
                           std::span(buffer[0].actions).subspan(0, 10), mean, extra);
  CHECK(probs.size() == mean.size());
  CHECK_THROWS_AS(model.forward_window(std::span(buffer[0].frames).subspan(0, 10),
                                       std::span(buffer[0].actions).subspan(0, 10), mean),
                  std::invalid_argument);
}

TEST_CASE("regression predictions are clamped to [0, p_max]") {
  const auto spec = tiny_spec();
  const ParamVector mean = envs::preset_real_params(spec.env_id);
  RegressionModel model(spec, mean, tiny_cfg(), 41);
  const auto buffer = tiny_buffer(spec, 1, 26);
  const ParamVector pred = model.predict(buffer[0]);
  for (size_t i = 0; i < pred.size(); ++i) {
    CHECK(pred[i] >= 0.0);
    CHECK(pred[i] <= model.p_max()[i]);
  }
}

TEST_CASE("regression converges to a constant target") {
  const auto spec = tiny_spec();
  const ParamVector real = envs::preset_real_params(spec.env_id);
  // every trajectory generated at the same parameters
  std::deque<envs::Trajectory> buffer;
  const envs::Controller ctrl{envs::Controller::Kind::random, 3};
  for (int i = 0; i < 20; ++i)
    buffer.push_back(envs::rollout(spec, real, ctrl, derive_seed(900, i)));

  RegressionModel model(spec, real, tiny_cfg(), 5);
  Rng rng(5);
  model.train(buffer, {400, 32}, rng);
  const ParamVector pred = model.predict(buffer[0]);
  for (size_t i = 0; i < real.size(); ++i) {
    INFO("param ", i);
    CHECK(std::abs(pred[i] - real[i]) / model.p_max()[i] <= 0.02);
  }
}

TEST_CASE("regression training is deterministic given the seed") {
  const auto spec = tiny_spec();
  const ParamVector mean = envs::preset_real_params(spec.env_id);
  auto buffer = tiny_buffer(spec, 12, 27);
  auto run = [&](uint64_t seed) {
    RegressionModel model(spec, mean, tiny_cfg(), seed);
    Rng rng(seed + 2);
    model.train(buffer, {6, 16}, rng);
    return model.predict(buffer[0]).values;
  };
  CHECK(run(8) == run(8));
}
