#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "autotune/env.hpp"
#include "autotune/search.hpp"

namespace autotune::harness {

// Fully resolved run configuration. Parsed from a `key = value` text file
// (one pair per line, '#' comments); unknown keys and invariant violations
// are rejected with the offending line number.
struct RunConfig {
  std::string env_id = "bouncing_ball";
  search::Method method = search::Method::autotune;
  uint64_t seed = 0;
  int frame_size = 32;
  int episode_len = 60;
  std::string controller = "random";

  double r_sp = 1.0;
  double r_policy = 0.1;
  double r_dr = 0.5;
  double alpha = 0.05;
  double hi_threshold = 0.7;
  double lo_threshold = 0.3;
  double eta = 0.05;

  int rounds = 40;
  int pretrain_trajs = 200;
  int pretrain_steps = 1000;
  int sim_param_itrs = 300;
  int policy_rollouts_per_round = 10;
  int sp_rollouts_per_round = 10;
  int real_rollouts_per_update = 5;
  int batch_size = 128;
  int pairs_per_traj = 4;
  int encoding_levels = 6;
  double learning_rate = 1e-3;
  bool track_pmax = false;
  int buffer_sp = 500;
  int buffer_policy = 1000;

  // 2x-0.5x | 4/3x-3/4x | 3/2x-2/3x | uniform:<factor>
  std::string misparam_preset = "2x-0.5x";
  std::vector<double> misparam_factors;  // explicit per-parameter override
  bool dump_frames = false;
  std::string out_dir = "runs/out";

  // CLI-only; suppresses every hidden-truth output column.
  bool blind = false;
  bool resume = false;

  void validate() const;  // throws ConfigError
  // (high, low) multipliers for the preset; uniform presets return (f, f)
  std::pair<double, double> preset_factors() const;

  // Canonical serialization (fixed key order). out_dir, blind, resume and
  // dump_frames are not part of the experiment identity and are excluded
  // from the hash.
  std::string canonical_text(bool include_output_fields) const;
  uint64_t config_hash() const;

  search::SearchConfig search_config() const;
  envs::EnvSpec env_spec() const;
};

RunConfig parse_config(const std::filesystem::path& path);
// Applies `key=value` strings (same grammar as file lines) on top of a config.
void apply_override(RunConfig& cfg, const std::string& key, const std::string& value);

}  // namespace autotune::harness
