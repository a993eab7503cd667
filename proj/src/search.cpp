#include "autotune/search.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace autotune::search {

void UpdateRule::validate() const {
  if (alpha <= 0.0) throw std::invalid_argument("UpdateRule: alpha must be positive");
  if (!(lo_threshold < 0.5 && 0.5 < hi_threshold))
    throw std::invalid_argument("UpdateRule: need lo_threshold < 0.5 < hi_threshold");
  if (hi_threshold >= 1.0 || lo_threshold <= 0.0)
    throw std::invalid_argument("UpdateRule: thresholds must lie inside (0,1)");
}

std::string to_string(Decision d) {
  switch (d) {
    case Decision::up: return "up";
    case Decision::down: return "down";
    case Decision::hold: return "hold";
  }
  return "?";
}

ParamVector update_mean(const UpdateRule& rule, std::span<const double> probs,
                        const ParamVector& mean, std::vector<Decision>* decisions) {
  rule.validate();
  if (probs.size() != mean.size()) throw std::invalid_argument("update_mean: size mismatch");
  if (decisions) decisions->assign(mean.size(), Decision::hold);
  ParamVector out = mean;
  for (size_t i = 0; i < mean.size(); ++i) {
    const double p = probs[i];
    if (!(p >= 0.0 && p <= 1.0))
      throw std::invalid_argument("update_mean: probability outside [0,1]");
    if (p > rule.hi_threshold) {
      out[i] = mean[i] * (1.0 + rule.alpha);
      if (decisions) (*decisions)[i] = Decision::up;
    } else if (p < rule.lo_threshold) {
      out[i] = mean[i] * (1.0 - rule.alpha);
      if (decisions) (*decisions)[i] = Decision::down;
    }
    out[i] = std::max(out[i], kParamFloor);
  }
  return out;
}

std::vector<double> aggregate_real_predictions(spm::SpmModel& model,
                                               std::span<const envs::Trajectory> real_trajs,
                                               const ParamVector& mean) {
  if (real_trajs.empty())
    throw std::invalid_argument("aggregate_real_predictions: no trajectories");
  std::vector<double> agg(mean.size(), 0.0);
  for (const auto& traj : real_trajs) {
    const auto probs = model.predict(traj, mean);
    for (size_t i = 0; i < agg.size(); ++i) agg[i] += probs[i];
  }
  for (auto& p : agg) p /= static_cast<double>(real_trajs.size());
  return agg;
}

std::vector<double> oracle_comparator(const ParamVector& real, const ParamVector& mean,
                                      double eta) {
  if (real.size() != mean.size()) throw std::invalid_argument("oracle_comparator: size mismatch");
  std::vector<double> probs(real.size(), 0.5);
  for (size_t i = 0; i < real.size(); ++i) {
    if (real[i] > mean[i] * (1.0 + eta))
      probs[i] = 1.0;
    else if (real[i] < mean[i] * (1.0 - eta))
      probs[i] = 0.0;
  }
  return probs;
}

void BufferPair::push_sp(envs::Trajectory traj) {
  if (!traj.gen_params.has_value())
    throw std::logic_error("BufferPair: d_sp trajectories must carry gen_params");
  if (d_sp.size() >= sp_capacity) d_sp.pop_front();
  d_sp.push_back(std::move(traj));
}

void BufferPair::push_policy(envs::Trajectory traj) {
  if (d_policy.size() >= policy_capacity) d_policy.pop_front();
  d_policy.push_back(std::move(traj));
}

Method method_from_string(const std::string& s) {
  if (s == "autotune") return Method::autotune;
  if (s == "dr_baseline") return Method::dr_baseline;
  if (s == "regression_baseline") return Method::regression_baseline;
  if (s == "oracle_test") return Method::oracle_test;
  throw std::invalid_argument("unknown method '" + s + "'");
}

std::string to_string(Method m) {
  switch (m) {
    case Method::autotune: return "autotune";
    case Method::dr_baseline: return "dr_baseline";
    case Method::regression_baseline: return "regression_baseline";
    case Method::oracle_test: return "oracle_test";
  }
  return "?";
}

void SearchConfig::validate() const {
  rule.validate();
  if (!(r_policy < r_sp))
    throw std::invalid_argument("SearchConfig: requires r_policy < r_sp");
  if (r_sp <= 0.0 || r_policy < 0.0 || r_dr < 0.0)
    throw std::invalid_argument("SearchConfig: ranges must be positive");
  if (rounds < 0 || pretrain_trajs < 0 || pretrain_steps < 0 || sim_param_itrs < 0)
    throw std::invalid_argument("SearchConfig: counts must be non-negative");
  if (batch_size < 1) throw std::invalid_argument("SearchConfig: batch_size must be >= 1");
  if (spm.eta < 0.0) throw std::invalid_argument("SearchConfig: eta must be >= 0");
}

AutotuneRun::AutotuneRun(const envs::EnvSpec& spec, const ParamVector& initial_mean,
                         const SearchConfig& cfg)
    : spec_(spec), cfg_(cfg), initial_mean_(initial_mean), mean_(initial_mean),
      buffers_(cfg.buffer_sp_capacity, cfg.buffer_policy_capacity) {
  cfg_.validate();
  if (!mean_.all_positive())
    throw std::invalid_argument("AutotuneRun: initial mean must be strictly positive");
  switch (cfg_.method) {
    case Method::autotune:
      spm_model_ = std::make_unique<spm::SpmModel>(spec_, initial_mean_, cfg_.spm, cfg_.seed);
      break;
    case Method::regression_baseline:
      regression_model_ =
          std::make_unique<spm::RegressionModel>(spec_, initial_mean_, cfg_.spm, cfg_.seed);
      break;
    case Method::dr_baseline:
    case Method::oracle_test:
      break;
  }
}

AutotuneRun::~AutotuneRun() = default;
AutotuneRun::AutotuneRun(AutotuneRun&&) noexcept = default;

spm::TrainMetrics AutotuneRun::pretrain_phase() {
  spm::TrainMetrics metrics;
  if (cfg_.method != Method::autotune && cfg_.method != Method::regression_baseline)
    return metrics;

  // Pretraining always excites with a random policy.
  envs::Controller random_ctrl{envs::Controller::Kind::random, cfg_.controller.seed};
  const ParamDistribution dist{mean_, cfg_.r_sp};
  auto trajs = envs::rollout_batch(spec_, dist, random_ctrl,
                                   derive_seed(cfg_.seed, stream::kPretrainRollout),
                                   cfg_.pretrain_trajs);
  for (auto& t : trajs) buffers_.push_sp(std::move(t));

  Rng rng(derive_seed(cfg_.seed, stream::kPretrainTrain));
  spm::TrainOptions options{cfg_.pretrain_steps, cfg_.batch_size};
  if (cfg_.pretrain_steps > 0 && !buffers_.d_sp.empty()) {
    if (cfg_.method == Method::autotune)
      metrics = spm_model_->train(buffers_.d_sp, mean_, options, rng);
    else
      metrics = regression_model_->train(buffers_.d_sp, options, rng);
  }
  return metrics;
}

RoundRecord AutotuneRun::run_round(const envs::PseudoRealEnv& real_env) {
  const int k = ++round_;
  RoundRecord rec;
  rec.round = k;
  const size_t n = mean_.size();

  if (cfg_.method == Method::oracle_test) {
    rec.probs = oracle_comparator(real_env.hidden_truth(), mean_, cfg_.spm.eta);
    mean_ = update_mean(cfg_.rule, rec.probs, mean_, &rec.decisions);
    rec.mean_after = mean_;
    return rec;
  }

  // (a) policy phase: narrow-range rollouts the policy learner would consume.
  const double policy_range = cfg_.method == Method::dr_baseline ? cfg_.r_dr : cfg_.r_policy;
  auto policy_trajs = envs::rollout_batch(spec_, ParamDistribution{mean_, policy_range},
                                          cfg_.controller,
                                          derive_seed(cfg_.seed, stream::kPolicyRollout,
                                                      static_cast<uint64_t>(k)),
                                          cfg_.policy_rollouts_per_round);
  for (auto& t : policy_trajs) buffers_.push_policy(std::move(t));

  if (cfg_.method == Method::dr_baseline) {
    // Fixed distribution; nothing is trained or updated.
    rec.decisions.assign(n, Decision::hold);
    rec.mean_after = mean_;
    return rec;
  }

  // (b) sim-param phase: wide-range rollouts plus model training.
  auto sp_trajs = envs::rollout_batch(spec_, ParamDistribution{mean_, cfg_.r_sp},
                                      cfg_.controller,
                                      derive_seed(cfg_.seed, stream::kSpRollout,
                                                  static_cast<uint64_t>(k)),
                                      cfg_.sp_rollouts_per_round);
  for (auto& t : sp_trajs) buffers_.push_sp(std::move(t));

  if (cfg_.sim_param_itrs > 0 && !buffers_.d_sp.empty()) {
    Rng train_rng(derive_seed(cfg_.seed, stream::kRoundTrain, static_cast<uint64_t>(k)));
    spm::TrainOptions options{cfg_.sim_param_itrs, cfg_.batch_size};
    spm::TrainMetrics metrics;
    if (cfg_.method == Method::autotune)
      metrics = spm_model_->train(buffers_.d_sp, mean_, options, train_rng);
    else
      metrics = regression_model_->train(buffers_.d_sp, options, train_rng);
    rec.spm_accuracy = metrics.heldout_accuracy;
    rec.train_loss = metrics.final_loss();
  }

  // (c) update from the real world.
  auto real_trajs = real_env.rollout_batch(
      cfg_.controller, derive_seed(cfg_.seed, stream::kRealRollout, static_cast<uint64_t>(k)),
      cfg_.real_rollouts_per_update);

  if (cfg_.method == Method::autotune) {
    rec.probs = aggregate_real_predictions(*spm_model_, real_trajs, mean_);
    mean_ = update_mean(cfg_.rule, rec.probs, mean_, &rec.decisions);
  } else {
    ParamVector pred;
    if (regressor_override_) {
      pred = regressor_override_(real_trajs, mean_);
    } else {
      if (real_trajs.empty())
        throw std::invalid_argument("run_round: regression update needs real trajectories");
      pred.values.assign(n, 0.0);
      for (const auto& traj : real_trajs) {
        const ParamVector p = regression_model_->predict(traj);
        for (size_t i = 0; i < n; ++i) pred[i] += p[i];
      }
      for (auto& v : pred.values) v /= static_cast<double>(real_trajs.size());
    }
    rec.probs.resize(n);
    rec.decisions.assign(n, Decision::hold);
    for (size_t i = 0; i < n; ++i) {
      // report the normalized prediction in place of a probability
      const double pmax =
          regression_model_ ? regression_model_->p_max()[i] : 2.0 * initial_mean_[i];
      rec.probs[i] = std::min(std::max(pred[i] / pmax, 0.0), 1.0);
      const double next = std::max(mean_[i] + cfg_.rule.alpha * (pred[i] - mean_[i]),
                                   kParamFloor);
      if (next > mean_[i])
        rec.decisions[i] = Decision::up;
      else if (next < mean_[i])
        rec.decisions[i] = Decision::down;
      mean_[i] = next;
    }
  }
  rec.mean_after = mean_;
  return rec;
}

void AutotuneRun::restore(int round, ParamVector mean) {
  if (mean.size() != mean_.size()) throw std::invalid_argument("restore: mean size mismatch");
  round_ = round;
  mean_ = std::move(mean);
}

}  // namespace autotune::search
