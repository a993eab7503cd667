#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "autotune/params.hpp"
#include "autotune/rng.hpp"

namespace autotune::envs {

enum class EnvId { bouncing_ball, damped_pendulum, sliding_block };

EnvId env_id_from_string(const std::string& s);
std::string to_string(EnvId id);
std::vector<std::string> env_id_names();

struct EnvSpec {
  EnvId env_id = EnvId::bouncing_ball;
  ParamSchema schema;
  double dt = 0.02;
  int frame_size = 32;  // {16, 32, 64}
  int action_dim = 1;
  int episode_len = 60;
  // throws std::invalid_argument on out-of-range fields
  void validate() const;
};

// Continuous physical state plus step index; layout is env-specific
// (documented per env in env.cpp).
struct EnvState {
  std::vector<double> q;
  int step = 0;
};

struct Frame {
  int width = 0, height = 0;
  std::vector<uint8_t> rgb;  // 3 bytes per pixel, row-major

  uint8_t at(int x, int y, int c) const { return rgb[3 * (static_cast<size_t>(y) * width + x) + c]; }
};

struct Trajectory {
  std::vector<Frame> frames;
  std::vector<std::vector<double>> actions;
  std::optional<ParamVector> gen_params;  // absent on pseudo-real rollouts

  size_t length() const { return frames.size(); }
};

// Stands in for the learned policy: emits actions bounded in [-1, 1].
struct Controller {
  enum class Kind { random, sinusoid, scripted_reach };
  Kind kind = Kind::random;
  uint64_t seed = 0;
};

Controller::Kind controller_kind_from_string(const std::string& s);
std::string to_string(Controller::Kind k);

EnvSpec make_env_spec(EnvId id, int frame_size = 32, int episode_len = 60);
EnvSpec make_env_spec(const std::string& env_id, int frame_size = 32, int episode_len = 60);

// Fixed per-env "real world" parameter presets used by the sim-to-sim harness.
ParamVector preset_real_params(EnvId id);

EnvState env_reset(const EnvSpec& spec, const ParamVector& params, Rng& rng);
EnvState env_step(const EnvSpec& spec, const EnvState& state, std::span<const double> action,
                  const ParamVector& params);
Frame render(const EnvSpec& spec, const EnvState& state, const ParamVector& params);

Trajectory rollout(const EnvSpec& spec, const ParamVector& params, const Controller& controller,
                   uint64_t episode_seed);

// Samples params per episode from dist and rolls out count episodes. Episodes
// fan out across OpenMP threads (bounded by AUTOTUNE_SIM_THREADS) and are
// merged by index, so results do not depend on thread count.
std::vector<Trajectory> rollout_batch(const EnvSpec& spec, const ParamDistribution& dist,
                                      const Controller& controller, uint64_t batch_seed,
                                      int count);

// Simulator instance with fixed hidden parameters standing in for the real
// world; consumer-visible trajectories omit gen_params.
class PseudoRealEnv {
 public:
  PseudoRealEnv(EnvSpec spec, ParamVector real_params);

  Trajectory rollout(const Controller& controller, uint64_t episode_seed) const;
  std::vector<Trajectory> rollout_batch(const Controller& controller, uint64_t batch_seed,
                                        int count) const;

  const EnvSpec& spec() const { return spec_; }
  // Evaluation-only accessor; the update path never reads it.
  const ParamVector& hidden_truth() const { return real_params_; }

 private:
  EnvSpec spec_;
  ParamVector real_params_;
};

// Debug dump (binary PPM, one file per frame).
void write_ppm(const Frame& frame, const std::filesystem::path& path);
void dump_trajectory_ppm(const Trajectory& traj, const std::filesystem::path& dir,
                         const std::string& prefix);

}  // namespace autotune::envs
