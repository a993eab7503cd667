#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "autotune/env.hpp"
#include "autotune/harness/config.hpp"
#include "autotune/harness/metrics.hpp"
#include "autotune/harness/runner.hpp"
#include "autotune/nn/gradcheck.hpp"

namespace {

int do_run(const std::string& config_path, std::optional<long long> seed,
           std::optional<std::string> out_dir, bool blind, bool resume) {
  autotune::harness::RunConfig cfg = autotune::harness::parse_config(config_path);
  if (seed) cfg.seed = static_cast<uint64_t>(*seed);
  if (out_dir) cfg.out_dir = *out_dir;
  cfg.blind = blind;
  cfg.resume = resume;
  cfg.validate();
  autotune::harness::cmd_run(cfg);
  return 0;
}

int do_compare(const std::vector<std::string>& dirs, std::optional<std::string> out_csv) {
  std::vector<std::filesystem::path> paths(dirs.begin(), dirs.end());
  std::optional<std::filesystem::path> out;
  if (out_csv) out = *out_csv;
  std::cout << autotune::harness::compare_runs(paths, out);
  return 0;
}

int do_envs_list() {
  for (const auto& name : autotune::envs::env_id_names()) {
    const auto spec = autotune::envs::make_env_spec(name);
    std::cout << name << " (N=" << spec.schema.size() << "):";
    for (const auto& e : spec.schema.entries)
      std::cout << " " << e.name
                << (e.kind == autotune::ParamKind::dynamics ? "[dyn]" : "[vis]");
    std::cout << "\n";
  }
  return 0;
}

int do_check_gradients() {
  const auto results = autotune::nn::gradcheck_all(200, 1e-4, 20240);
  bool ok = true;
  for (const auto& r : results) {
    const bool pass = r.max_rel_err <= 1e-3;
    ok = ok && pass;
    std::printf("%-8s probes=%d max_rel_err=%.3e %s\n", r.layer.c_str(), r.probes,
                r.max_rel_err, pass ? "ok" : "FAIL");
  }
  return ok ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"simulator auto-calibration harness"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<long long> seed;
  std::optional<std::string> out_dir;
  bool blind = false, resume = false;
  auto* run = app.add_subcommand("run", "execute a configured run");
  run->add_option("--config", config_path, "config file path")->required();
  run->add_option("--seed", seed, "override the config seed");
  run->add_option("--out", out_dir, "override the output directory");
  run->add_flag("--blind", blind, "suppress hidden-truth output columns");
  run->add_flag("--resume", resume, "continue from the run's state file");

  std::vector<std::string> compare_dirs;
  std::optional<std::string> compare_out;
  auto* compare = app.add_subcommand("compare", "summarize completed runs");
  compare->add_option("dirs", compare_dirs, "run directories")->required()->expected(-2);
  compare->add_option("--out", compare_out, "also write a compare CSV");

  auto* envs_cmd = app.add_subcommand("envs", "environment info");
  auto* envs_list = envs_cmd->add_subcommand("list", "list environments and parameters");

  auto* check = app.add_subcommand("check", "self checks");
  auto* check_grad = check->add_subcommand("gradients", "finite-difference gradient check");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return do_run(config_path, seed, out_dir, blind, resume);
    if (compare->parsed()) return do_compare(compare_dirs, compare_out);
    if (envs_cmd->parsed() && envs_list->parsed()) return do_envs_list();
    if (check->parsed() && check_grad->parsed()) return do_check_gradients();
    std::cerr << app.help();
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return autotune::harness::exit_code_for_current_exception();
  }
}
