#include "autotune/harness/runner.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "autotune/errors.hpp"

namespace autotune::harness {

namespace {

constexpr int kCheckpointEvery = 10;  // rounds between state/model snapshots

struct RunState {
  int round = 0;
  ParamVector mean;
  std::string model_file;
};

void write_state(const std::filesystem::path& path, const RunState& st) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write state file " + path.string());
  os << "# autotune_state_v1\n";
  os << "round=" << st.round << "\n";
  os << "mean=";
  char buf[40];
  for (size_t i = 0; i < st.mean.size(); ++i) {
    // full precision so resume restores the exact double
    std::snprintf(buf, sizeof(buf), "%.17g", st.mean[i]);
    os << (i ? "," : "") << buf;
  }
  os << "\n";
  os << "model=" << st.model_file << "\n";
}

RunState read_state(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read state file " + path.string());
  RunState st;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    if (key == "round") st.round = std::stoi(value);
    if (key == "model") st.model_file = value;
    if (key == "mean") {
      std::stringstream ss(value);
      std::string tok;
      while (std::getline(ss, tok, ',')) st.mean.values.push_back(std::stod(tok));
    }
  }
  return st;
}

std::vector<double> choose_factors(const RunConfig& cfg, size_t n) {
  if (!cfg.misparam_factors.empty()) return cfg.misparam_factors;
  const auto [high, low] = cfg.preset_factors();
  Rng rng(derive_seed(cfg.seed, stream::kMisparam));
  std::vector<double> factors(n);
  for (auto& f : factors) f = rng.coin() ? high : low;
  return factors;
}

void save_checkpoints(search::AutotuneRun& run, const std::filesystem::path& out,
                      RunState& st) {
  if (run.spm_model() != nullptr) {
    run.spm_model()->save(out / "model.ckpt");
    st.model_file = "model.ckpt";
  } else if (run.regression_model() != nullptr) {
    run.regression_model()->save(out / "model.ckpt");
    st.model_file = "model.ckpt";
  }
  st.round = run.round();
  st.mean = run.mean();
  write_state(out / "state.txt", st);
}

}  // namespace

RunSummary cmd_run(const RunConfig& cfg) {
  cfg.validate();
  const envs::EnvSpec spec = cfg.env_spec();
  const ParamVector real = envs::preset_real_params(spec.env_id);
  const std::vector<double> factors = choose_factors(cfg, real.size());
  const ParamVector initial_mean = misparametrize(real, factors);
  const envs::PseudoRealEnv real_env(spec, real);

  const std::filesystem::path out(cfg.out_dir);
  std::error_code ec;
  std::filesystem::create_directories(out, ec);
  if (ec) throw IoError("cannot create output directory " + out.string());
  {
    std::ofstream os(out / "config_resolved.cfg");
    if (!os) throw IoError("cannot write resolved config");
    os << cfg.canonical_text(true);
  }

  search::AutotuneRun run(spec, initial_mean, cfg.search_config());

  spm::TrainMetrics pretrain_metrics;
  RunState st;
  const bool resuming = cfg.resume && std::filesystem::exists(out / "state.txt");
  if (resuming) {
    st = read_state(out / "state.txt");
    run.restore(st.round, st.mean);
    if (!st.model_file.empty()) {
      if (run.spm_model() != nullptr) run.spm_model()->load(out / st.model_file);
      if (run.regression_model() != nullptr) run.regression_model()->load(out / st.model_file);
    }
  } else {
    pretrain_metrics = run.pretrain_phase();
  }

  if (cfg.dump_frames) {
    const auto demo_real = real_env.rollout(cfg.search_config().controller,
                                            derive_seed(cfg.seed, stream::kRealRollout, 0));
    envs::dump_trajectory_ppm(demo_real, out / "frames", "real");
    Rng demo_rng(derive_seed(cfg.seed, stream::kSpRollout, 0));
    const ParamVector demo_params =
        sample_params(ParamDistribution{run.mean(), cfg.r_sp}, demo_rng);
    const auto demo_sim = envs::rollout(spec, demo_params, cfg.search_config().controller,
                                        derive_seed(cfg.seed, stream::kSpRollout, 0));
    envs::dump_trajectory_ppm(demo_sim, out / "frames", "sim");
  }

  MetricsWriter writer(out / "metrics.csv", cfg.blind, cfg.config_hash());
  std::vector<double> last_accuracy = pretrain_metrics.heldout_accuracy;
  writer.write_round(run.round(), spec.schema, run.mean(), {}, {}, last_accuracy,
                     cfg.blind ? nullptr : &real);

  for (int k = run.round() + 1; k <= cfg.rounds; ++k) {
    const search::RoundRecord rec = run.run_round(real_env);
    if (!rec.spm_accuracy.empty()) last_accuracy = rec.spm_accuracy;
    writer.write_round(rec.round, spec.schema, rec.mean_after, rec.probs, rec.decisions,
                       rec.spm_accuracy, cfg.blind ? nullptr : &real);
    if (k % kCheckpointEvery == 0 || k == cfg.rounds) save_checkpoints(run, out, st);
  }
  if (cfg.rounds == 0) save_checkpoints(run, out, st);

  RunSummary summary;
  summary.env_id = cfg.env_id;
  summary.method = search::to_string(cfg.method);
  summary.seed = cfg.seed;
  summary.rounds = cfg.rounds;
  summary.config_hash = cfg.config_hash();
  summary.has_truth = !cfg.blind;
  for (const auto& e : spec.schema.entries) summary.param_names.push_back(e.name);
  summary.final_mean = run.mean().values;
  if (!cfg.blind) {
    summary.initial_percent_error = percent_error(initial_mean, real);
    summary.final_percent_error = percent_error(run.mean(), real);
  }
  summary.spm_accuracy = last_accuracy;
  write_summary(out / "summary.csv", summary);

  std::ostringstream msg;
  msg << "run " << search::to_string(cfg.method) << " env=" << cfg.env_id
      << " seed=" << cfg.seed << " rounds=" << cfg.rounds;
  if (!cfg.blind)
    msg << " initial%err=" << format_double(summary.mean_initial_percent_error())
        << " final%err=" << format_double(summary.mean_final_percent_error());
  std::cout << msg.str() << "\n";
  return summary;
}

int exit_code_for_current_exception() {
  try {
    throw;
  } catch (const ConfigError&) {
    return 2;
  } catch (const NumericError&) {
    return 3;
  } catch (const IoError&) {
    return 4;
  } catch (const std::filesystem::filesystem_error&) {
    return 4;
  } catch (const std::exception&) {
    return 1;
  }
}

}  // namespace autotune::harness
