#pragma once

#include <deque>
#include <filesystem>
#include <span>
#include <vector>

#include "autotune/env.hpp"
#include "autotune/nn/layers.hpp"
#include "autotune/nn/optim.hpp"
#include "autotune/params.hpp"
#include "autotune/rng.hpp"

namespace autotune::spm {

struct SpmConfig {
  int window = 10;          // frames stacked per classifier input
  int encoding_levels = 6;  // L sinusoidal levels per candidate scalar
  double eta = 0.05;        // equality band, fraction of the distribution mean
  int pairs_per_traj = 4;
  double learning_rate = 1e-3;
  // When true, candidate encodings normalize by 2x the current mean instead of
  // the frozen construction-time bound.
  bool track_pmax = false;
  int extra_feature_dim = 0;  // optional per-window state features, default unused
};

// One training pair: a window of a simulated trajectory plus a candidate
// parameter vector with per-parameter comparison labels. mask == 0 marks the
// "about equal" band excluded from the loss.
struct SpmPair {
  int window_start = 0;
  ParamVector candidate;
  std::vector<uint8_t> label;
  std::vector<uint8_t> mask;
};

// label = (sim > candidate); mask = 0 inside the equality band
// |sim - candidate| <= eta * mean.
std::pair<uint8_t, uint8_t> label_and_mask(double sim, double candidate, double mean,
                                           double eta);

std::vector<SpmPair> make_training_pairs(const envs::Trajectory& traj,
                                         const ParamVector& dist_mean, Rng& rng,
                                         int pairs_per_traj, const SpmConfig& cfg);

struct TrainMetrics {
  std::vector<double> loss_curve;
  std::vector<double> heldout_accuracy;  // per parameter (classifier); empty when no held-out data
  std::vector<double> heldout_error;     // per parameter (regression, normalized MAE)
  int heldout_pairs = 0;
  double final_loss() const { return loss_curve.empty() ? 0.0 : loss_curve.back(); }
};

struct TrainOptions {
  int steps = 0;
  int batch_size = 128;
  bool scramble_labels = false;  // null-model control: labels replaced by fair coins
  bool fixed_batch = false;      // diagnostic: reuse the first assembled batch every step
};

// Shared conv encoder over the stacked frame window plus one two-layer MLP
// head per parameter; each head sees (encoded frames, window actions,
// sinusoidal encoding of its candidate scalar) and emits one logit.
class SpmModel {
 public:
  SpmModel(const envs::EnvSpec& spec, const ParamVector& initial_mean, const SpmConfig& cfg,
           uint64_t init_seed);

  std::vector<double> forward_window(std::span<const envs::Frame> frames,
                                     std::span<const std::vector<double>> actions,
                                     const ParamVector& candidate,
                                     std::span<const double> extra = {});

  // Mean of forward_window over non-overlapping stride-`window` windows; the
  // final partial window is dropped.
  std::vector<double> predict(const envs::Trajectory& traj, const ParamVector& candidate);

  TrainMetrics train(const std::deque<envs::Trajectory>& buffer, const ParamVector& dist_mean,
                     const TrainOptions& options, Rng& rng);

  const std::vector<double>& p_max() const { return p_max_; }
  void set_p_max(const std::vector<double>& p) { p_max_ = p; }
  const SpmConfig& config() const { return cfg_; }
  size_t param_count();

  void save(const std::filesystem::path& path);
  void load(const std::filesystem::path& path);

 private:
  friend struct SpmBatch;
  int head_input_dim() const;
  void forward_batch(struct SpmBatch& batch);
  double train_step(const std::deque<envs::Trajectory>& buffer,
                    std::span<const size_t> train_indices, const ParamVector& dist_mean,
                    const TrainOptions& options, Rng& rng,
                    std::vector<struct SpmRow>* row_cache);

  envs::EnvSpec spec_;
  SpmConfig cfg_;
  size_t n_params_;
  std::vector<double> p_max_;
  nn::LayerStack encoder_;
  std::vector<nn::LayerStack> heads_;
  nn::Adam adam_;
  std::vector<nn::Tensor*> all_params_, all_grads_;
};

// Baseline that predicts normalized parameters directly from the same
// window encoding.
class RegressionModel {
 public:
  RegressionModel(const envs::EnvSpec& spec, const ParamVector& initial_mean,
                  const SpmConfig& cfg, uint64_t init_seed);

  // Window-averaged prediction, clamped to [0, p_max].
  ParamVector predict(const envs::Trajectory& traj);

  TrainMetrics train(const std::deque<envs::Trajectory>& buffer, const TrainOptions& options,
                     Rng& rng);

  const std::vector<double>& p_max() const { return p_max_; }
  void save(const std::filesystem::path& path);
  void load(const std::filesystem::path& path);

 private:
  std::vector<double> forward_windows(const envs::Trajectory& traj);
  double train_step(const std::deque<envs::Trajectory>& buffer,
                    std::span<const size_t> train_indices, const TrainOptions& options, Rng& rng);

  envs::EnvSpec spec_;
  SpmConfig cfg_;
  size_t n_params_;
  std::vector<double> p_max_;
  nn::LayerStack encoder_;
  nn::LayerStack head_;
  nn::Adam adam_;
  std::vector<nn::Tensor*> all_params_, all_grads_;
};

}  // namespace autotune::spm
