#include "autotune/harness/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "autotune/errors.hpp"

namespace autotune::harness {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

double parse_double(const std::string& v, const std::string& ctx) {
  try {
    size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing characters");
    return d;
  } catch (const std::exception&) {
    throw ConfigError(ctx + ": expected a number, got '" + v + "'");
  }
}

long parse_long(const std::string& v, const std::string& ctx) {
  try {
    size_t used = 0;
    const long x = std::stol(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing characters");
    return x;
  } catch (const std::exception&) {
    throw ConfigError(ctx + ": expected an integer, got '" + v + "'");
  }
}

bool parse_bool(const std::string& v, const std::string& ctx) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(ctx + ": expected a boolean, got '" + v + "'");
}

std::vector<double> parse_double_list(const std::string& v, const std::string& ctx) {
  std::vector<double> out;
  if (trim(v).empty()) return out;
  std::stringstream ss(v);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(parse_double(trim(tok), ctx));
  return out;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

void apply_override(RunConfig& cfg, const std::string& key, const std::string& value) {
  const std::string ctx = "config key '" + key + "'";
  if (key == "env") {
    cfg.env_id = value;
    envs::env_id_from_string(value);  // validates
  } else if (key == "method") {
    cfg.method = search::method_from_string(value);
  } else if (key == "seed") {
    cfg.seed = static_cast<uint64_t>(parse_long(value, ctx));
  } else if (key == "frame_size") {
    cfg.frame_size = static_cast<int>(parse_long(value, ctx));
  } else if (key == "episode_len") {
    cfg.episode_len = static_cast<int>(parse_long(value, ctx));
  } else if (key == "controller") {
    cfg.controller = value;
    envs::controller_kind_from_string(value);
  } else if (key == "r_sp") {
    cfg.r_sp = parse_double(value, ctx);
  } else if (key == "r_policy") {
    cfg.r_policy = parse_double(value, ctx);
  } else if (key == "r_dr") {
    cfg.r_dr = parse_double(value, ctx);
  } else if (key == "alpha") {
    cfg.alpha = parse_double(value, ctx);
  } else if (key == "hi_threshold") {
    cfg.hi_threshold = parse_double(value, ctx);
  } else if (key == "lo_threshold") {
    cfg.lo_threshold = parse_double(value, ctx);
  } else if (key == "eta") {
    cfg.eta = parse_double(value, ctx);
  } else if (key == "rounds") {
    cfg.rounds = static_cast<int>(parse_long(value, ctx));
  } else if (key == "pretrain_trajs") {
    cfg.pretrain_trajs = static_cast<int>(parse_long(value, ctx));
  } else if (key == "pretrain_steps") {
    cfg.pretrain_steps = static_cast<int>(parse_long(value, ctx));
  } else if (key == "sim_param_itrs") {
    cfg.sim_param_itrs = static_cast<int>(parse_long(value, ctx));
  } else if (key == "policy_rollouts_per_round") {
    cfg.policy_rollouts_per_round = static_cast<int>(parse_long(value, ctx));
  } else if (key == "sp_rollouts_per_round") {
    cfg.sp_rollouts_per_round = static_cast<int>(parse_long(value, ctx));
  } else if (key == "real_rollouts_per_update") {
    cfg.real_rollouts_per_update = static_cast<int>(parse_long(value, ctx));
  } else if (key == "batch_size") {
    cfg.batch_size = static_cast<int>(parse_long(value, ctx));
  } else if (key == "pairs_per_traj") {
    cfg.pairs_per_traj = static_cast<int>(parse_long(value, ctx));
  } else if (key == "encoding_levels") {
    cfg.encoding_levels = static_cast<int>(parse_long(value, ctx));
  } else if (key == "learning_rate") {
    cfg.learning_rate = parse_double(value, ctx);
  } else if (key == "track_pmax") {
    cfg.track_pmax = parse_bool(value, ctx);
  } else if (key == "buffer_sp") {
    cfg.buffer_sp = static_cast<int>(parse_long(value, ctx));
  } else if (key == "buffer_policy") {
    cfg.buffer_policy = static_cast<int>(parse_long(value, ctx));
  } else if (key == "misparam_preset") {
    cfg.misparam_preset = value;
  } else if (key == "misparam_factors") {
    cfg.misparam_factors = parse_double_list(value, ctx);
  } else if (key == "dump_frames") {
    cfg.dump_frames = parse_bool(value, ctx);
  } else if (key == "out_dir") {
    cfg.out_dir = value;
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config file " + path.string());
  RunConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                        ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      apply_override(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

void RunConfig::validate() const {
  try {
    envs::env_id_from_string(env_id);
    envs::controller_kind_from_string(controller);
    env_spec();           // frame size, episode length, schema
    search_config().validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  if (!(r_policy < r_sp))
    throw ConfigError("requires r_policy < r_sp (got r_policy=" + fmt(r_policy) +
                      ", r_sp=" + fmt(r_sp) + ")");
  if (r_dr <= 0.0) throw ConfigError("r_dr must be positive");
  if (eta < 0.0) throw ConfigError("eta must be >= 0");
  if (rounds < 0) throw ConfigError("rounds must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (pairs_per_traj < 1) throw ConfigError("pairs_per_traj must be >= 1");
  if (encoding_levels < 1) throw ConfigError("encoding_levels must be >= 1");
  if (learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
  if (buffer_sp < 1 || buffer_policy < 1) throw ConfigError("buffer capacities must be >= 1");
  if (real_rollouts_per_update < 0) throw ConfigError("real_rollouts_per_update must be >= 0");
  preset_factors();  // validates the preset string
  if (!misparam_factors.empty()) {
    const size_t n = env_spec().schema.size();
    if (misparam_factors.size() != n)
      throw ConfigError("misparam_factors needs " + std::to_string(n) + " entries");
    for (double f : misparam_factors)
      if (f <= 0.0) throw ConfigError("misparam_factors must be positive");
  }
}

std::pair<double, double> RunConfig::preset_factors() const {
  if (misparam_preset == "2x-0.5x") return {2.0, 0.5};
  if (misparam_preset == "4/3x-3/4x") return {4.0 / 3.0, 3.0 / 4.0};
  if (misparam_preset == "3/2x-2/3x") return {3.0 / 2.0, 2.0 / 3.0};
  if (misparam_preset.rfind("uniform:", 0) == 0) {
    const double f = parse_double(misparam_preset.substr(8), "misparam_preset");
    if (f <= 0.0) throw ConfigError("misparam_preset uniform factor must be positive");
    return {f, f};
  }
  throw ConfigError("unknown misparam_preset '" + misparam_preset + "'");
}

std::string RunConfig::canonical_text(bool include_output_fields) const {
  std::ostringstream os;
  os << "env=" << env_id << "\n";
  os << "method=" << search::to_string(method) << "\n";
  os << "seed=" << seed << "\n";
  os << "frame_size=" << frame_size << "\n";
  os << "episode_len=" << episode_len << "\n";
  os << "controller=" << controller << "\n";
  os << "r_sp=" << fmt(r_sp) << "\n";
  os << "r_policy=" << fmt(r_policy) << "\n";
  os << "r_dr=" << fmt(r_dr) << "\n";
  os << "alpha=" << fmt(alpha) << "\n";
  os << "hi_threshold=" << fmt(hi_threshold) << "\n";
  os << "lo_threshold=" << fmt(lo_threshold) << "\n";
  os << "eta=" << fmt(eta) << "\n";
  os << "rounds=" << rounds << "\n";
  os << "pretrain_trajs=" << pretrain_trajs << "\n";
  os << "pretrain_steps=" << pretrain_steps << "\n";
  os << "sim_param_itrs=" << sim_param_itrs << "\n";
  os << "policy_rollouts_per_round=" << policy_rollouts_per_round << "\n";
  os << "sp_rollouts_per_round=" << sp_rollouts_per_round << "\n";
  os << "real_rollouts_per_update=" << real_rollouts_per_update << "\n";
  os << "batch_size=" << batch_size << "\n";
  os << "pairs_per_traj=" << pairs_per_traj << "\n";
  os << "encoding_levels=" << encoding_levels << "\n";
  os << "learning_rate=" << fmt(learning_rate) << "\n";
  os << "track_pmax=" << (track_pmax ? "true" : "false") << "\n";
  os << "buffer_sp=" << buffer_sp << "\n";
  os << "buffer_policy=" << buffer_policy << "\n";
  os << "misparam_preset=" << misparam_preset << "\n";
  os << "misparam_factors=";
  for (size_t i = 0; i < misparam_factors.size(); ++i)
    os << (i ? "," : "") << fmt(misparam_factors[i]);
  os << "\n";
  if (include_output_fields) {
    os << "dump_frames=" << (dump_frames ? "true" : "false") << "\n";
    os << "out_dir=" << out_dir << "\n";
  }
  return os.str();
}

uint64_t RunConfig::config_hash() const {
  // FNV-1a 64 over the canonical serialization
  const std::string text = canonical_text(false);
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

search::SearchConfig RunConfig::search_config() const {
  search::SearchConfig sc;
  sc.method = method;
  sc.seed = seed;
  sc.r_sp = r_sp;
  sc.r_policy = r_policy;
  sc.r_dr = r_dr;
  sc.rule.alpha = alpha;
  sc.rule.hi_threshold = hi_threshold;
  sc.rule.lo_threshold = lo_threshold;
  sc.rounds = rounds;
  sc.pretrain_trajs = pretrain_trajs;
  sc.pretrain_steps = pretrain_steps;
  sc.sim_param_itrs = sim_param_itrs;
  sc.policy_rollouts_per_round = policy_rollouts_per_round;
  sc.sp_rollouts_per_round = sp_rollouts_per_round;
  sc.real_rollouts_per_update = real_rollouts_per_update;
  sc.batch_size = batch_size;
  sc.buffer_sp_capacity = static_cast<size_t>(buffer_sp);
  sc.buffer_policy_capacity = static_cast<size_t>(buffer_policy);
  sc.controller.kind = envs::controller_kind_from_string(controller);
  sc.controller.seed = seed;
  sc.spm.eta = eta;
  sc.spm.pairs_per_traj = pairs_per_traj;
  sc.spm.encoding_levels = encoding_levels;
  sc.spm.learning_rate = learning_rate;
  sc.spm.track_pmax = track_pmax;
  return sc;
}

envs::EnvSpec RunConfig::env_spec() const {
  return envs::make_env_spec(env_id, frame_size, episode_len);
}

}  // namespace autotune::harness
