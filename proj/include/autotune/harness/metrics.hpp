#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "autotune/params.hpp"
#include "autotune/search.hpp"

namespace autotune::harness {

inline constexpr const char* kMetricsSchemaTag = "autotune_metrics_v1";
inline constexpr const char* kSummarySchemaTag = "autotune_summary_v1";

// Streams one CSV row per (round, parameter). Blind mode drops the
// hidden-truth columns (hidden_real, percent_error) from header and rows.
class MetricsWriter {
 public:
  MetricsWriter(const std::filesystem::path& path, bool blind, uint64_t config_hash);

  void write_round(int round, const ParamSchema& schema, const ParamVector& mean,
                   const std::vector<double>& probs,              // empty -> blank column
                   const std::vector<search::Decision>& decisions,  // empty -> hold
                   const std::vector<double>& spm_accuracy,       // empty -> blank column
                   const ParamVector* hidden_real);               // null in blind mode

 private:
  std::ofstream os_;
  bool blind_;
  std::string hash_hex_;
};

struct RunSummary {
  std::string env_id;
  std::string method;
  uint64_t seed = 0;
  int rounds = 0;
  uint64_t config_hash = 0;
  bool has_truth = true;
  std::vector<std::string> param_names;
  std::vector<double> final_mean;
  std::vector<double> initial_percent_error;  // empty when !has_truth
  std::vector<double> final_percent_error;    // empty when !has_truth
  std::vector<double> spm_accuracy;           // empty when not applicable

  double mean_final_percent_error() const;
  double mean_initial_percent_error() const;
};

void write_summary(const std::filesystem::path& path, const RunSummary& summary);
RunSummary read_summary(const std::filesystem::path& path);  // throws IoError

// Per-method mean +/- std of the final percent error across runs; also writes
// a per-parameter breakdown. Returns the printable table.
std::string compare_runs(const std::vector<std::filesystem::path>& run_dirs,
                         const std::optional<std::filesystem::path>& out_csv);

std::string format_double(double v);

}  // namespace autotune::harness
