#pragma once

#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "autotune/env.hpp"
#include "autotune/params.hpp"
#include "autotune/spm.hpp"

namespace autotune::search {

// Confidence-thresholded multiplicative mean update: probabilities above
// hi_threshold push a parameter up by a factor (1 + alpha), below
// lo_threshold down by (1 - alpha); the dead zone in between holds.
struct UpdateRule {
  double alpha = 0.05;
  double hi_threshold = 0.7;
  double lo_threshold = 0.3;
  void validate() const;  // throws unless lo < 0.5 < hi and alpha > 0
};

enum class Decision { up, down, hold };
std::string to_string(Decision d);

ParamVector update_mean(const UpdateRule& rule, std::span<const double> probs,
                        const ParamVector& mean, std::vector<Decision>* decisions = nullptr);

// spm predictions at candidate = mean for each real trajectory, averaged.
std::vector<double> aggregate_real_predictions(spm::SpmModel& model,
                                               std::span<const envs::Trajectory> real_trajs,
                                               const ParamVector& mean);

// Test double for the classifier: answers from the hidden truth, with the
// same equality band semantics.
std::vector<double> oracle_comparator(const ParamVector& real, const ParamVector& mean,
                                      double eta);

// Bounded FIFO trajectory buffers. d_sp entries must carry gen_params.
struct BufferPair {
  BufferPair(size_t sp_capacity, size_t policy_capacity)
      : sp_capacity(sp_capacity), policy_capacity(policy_capacity) {}

  void push_sp(envs::Trajectory traj);
  void push_policy(envs::Trajectory traj);

  size_t sp_capacity, policy_capacity;
  std::deque<envs::Trajectory> d_sp, d_policy;
};

enum class Method { autotune, dr_baseline, regression_baseline, oracle_test };
Method method_from_string(const std::string& s);
std::string to_string(Method m);

struct SearchConfig {
  Method method = Method::autotune;
  uint64_t seed = 0;
  double r_sp = 1.0;
  double r_policy = 0.1;
  double r_dr = 0.5;
  UpdateRule rule;
  int rounds = 40;  // K
  int pretrain_trajs = 200;
  int pretrain_steps = 1000;
  int sim_param_itrs = 300;
  int policy_rollouts_per_round = 10;
  int sp_rollouts_per_round = 10;
  int real_rollouts_per_update = 5;
  int batch_size = 128;
  size_t buffer_sp_capacity = 500;
  size_t buffer_policy_capacity = 1000;
  envs::Controller controller;
  spm::SpmConfig spm;

  void validate() const;  // r_policy < r_sp and positivity checks
};

struct RoundRecord {
  int round = 0;
  ParamVector mean_after;
  std::vector<double> probs;         // aggregate probabilities (empty for dr)
  std::vector<Decision> decisions;
  std::vector<double> spm_accuracy;  // held-out accuracy from this round's training
  double train_loss = 0.0;
};

// Prediction override used by tests to isolate the update recurrences.
using RegressorOverride =
    std::function<ParamVector(std::span<const envs::Trajectory>, const ParamVector& mean)>;

// One auto-tuning run: owns the distribution mean, buffers, and model.
class AutotuneRun {
 public:
  AutotuneRun(const envs::EnvSpec& spec, const ParamVector& initial_mean,
              const SearchConfig& cfg);
  ~AutotuneRun();
  AutotuneRun(AutotuneRun&&) noexcept;

  // Fills d_sp from the initial distribution with a random controller and
  // pretrains the model. No-op for oracle_test and dr_baseline.
  spm::TrainMetrics pretrain_phase();

  RoundRecord run_round(const envs::PseudoRealEnv& real_env);

  const ParamVector& mean() const { return mean_; }
  int round() const { return round_; }
  const SearchConfig& config() const { return cfg_; }
  BufferPair& buffers() { return buffers_; }
  spm::SpmModel* spm_model() { return spm_model_.get(); }
  spm::RegressionModel* regression_model() { return regression_model_.get(); }

  void set_regressor_override(RegressorOverride fn) { regressor_override_ = std::move(fn); }
  // Resume support: restores the round counter and mean (model weights are
  // restored separately through the model checkpoints).
  void restore(int round, ParamVector mean);

 private:
  envs::EnvSpec spec_;
  SearchConfig cfg_;
  ParamVector initial_mean_, mean_;
  int round_ = 0;
  BufferPair buffers_;
  std::unique_ptr<spm::SpmModel> spm_model_;
  std::unique_ptr<spm::RegressionModel> regression_model_;
  RegressorOverride regressor_override_;
};

}  // namespace autotune::search
