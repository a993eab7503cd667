#include "autotune/harness/metrics.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "autotune/errors.hpp"

namespace autotune::harness {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

namespace {

std::string hex64(uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

int64_t now_epoch_seconds() {
  return std::chrono::duration_cast<std::chrono::seconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(tok);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

}  // namespace

MetricsWriter::MetricsWriter(const std::filesystem::path& path, bool blind, uint64_t config_hash)
    : os_(path), blind_(blind), hash_hex_(hex64(config_hash)) {
  if (!os_) throw IoError("cannot open metrics file " + path.string());
  os_ << "# " << kMetricsSchemaTag << "\n";
  os_ << "round,param,mean,aggregate_prob,decision,spm_accuracy";
  if (!blind_) os_ << ",hidden_real,percent_error";
  os_ << ",config_hash,timestamp\n";
}

void MetricsWriter::write_round(int round, const ParamSchema& schema, const ParamVector& mean,
                                const std::vector<double>& probs,
                                const std::vector<search::Decision>& decisions,
                                const std::vector<double>& spm_accuracy,
                                const ParamVector* hidden_real) {
  const int64_t ts = now_epoch_seconds();
  for (size_t i = 0; i < schema.size(); ++i) {
    os_ << round << "," << schema.entries[i].name << "," << format_double(mean[i]) << ",";
    if (i < probs.size()) os_ << format_double(probs[i]);
    os_ << ",";
    os_ << (i < decisions.size() ? search::to_string(decisions[i]) : "hold") << ",";
    if (i < spm_accuracy.size()) os_ << format_double(spm_accuracy[i]);
    if (!blind_) {
      os_ << ",";
      if (hidden_real) {
        const double err = 100.0 * std::abs(mean[i] - (*hidden_real)[i]) / (*hidden_real)[i];
        os_ << format_double((*hidden_real)[i]) << "," << format_double(err);
      } else {
        os_ << ",";
      }
    }
    os_ << "," << hash_hex_ << "," << ts << "\n";
  }
  os_.flush();
}

double RunSummary::mean_final_percent_error() const {
  if (final_percent_error.empty()) return std::nan("");
  double s = 0.0;
  for (double e : final_percent_error) s += e;
  return s / static_cast<double>(final_percent_error.size());
}

double RunSummary::mean_initial_percent_error() const {
  if (initial_percent_error.empty()) return std::nan("");
  double s = 0.0;
  for (double e : initial_percent_error) s += e;
  return s / static_cast<double>(initial_percent_error.size());
}

void write_summary(const std::filesystem::path& path, const RunSummary& s) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open summary file " + path.string());
  os << "# " << kSummarySchemaTag << "\n";
  os << "# env=" << s.env_id << "\n";
  os << "# method=" << s.method << "\n";
  os << "# seed=" << s.seed << "\n";
  os << "# rounds=" << s.rounds << "\n";
  os << "# config_hash=" << hex64(s.config_hash) << "\n";
  os << "param,final_mean";
  if (s.has_truth) os << ",initial_percent_error,final_percent_error";
  os << ",spm_accuracy\n";
  for (size_t i = 0; i < s.param_names.size(); ++i) {
    os << s.param_names[i] << "," << format_double(s.final_mean[i]);
    if (s.has_truth)
      os << "," << format_double(s.initial_percent_error[i]) << ","
         << format_double(s.final_percent_error[i]);
    os << ",";
    if (i < s.spm_accuracy.size()) os << format_double(s.spm_accuracy[i]);
    os << "\n";
  }
}

RunSummary read_summary(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open summary file " + path.string());
  RunSummary s;
  std::string line;
  bool saw_tag = false, saw_header = false;
  bool has_acc_col = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line.rfind("# ", 0) == 0) {
      const std::string body = line.substr(2);
      if (body == kSummarySchemaTag) {
        saw_tag = true;
      } else {
        const auto eq = body.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = body.substr(0, eq), value = body.substr(eq + 1);
        if (key == "env") s.env_id = value;
        if (key == "method") s.method = value;
        if (key == "seed") s.seed = std::stoull(value);
        if (key == "rounds") s.rounds = std::stoi(value);
        if (key == "config_hash") s.config_hash = std::stoull(value, nullptr, 16);
      }
      continue;
    }
    if (!saw_header) {
      const auto cols = split_csv(line);
      s.has_truth = cols.size() >= 3 && cols[2] == "initial_percent_error";
      has_acc_col = !cols.empty() && cols.back() == "spm_accuracy";
      saw_header = true;
      continue;
    }
    const auto cols = split_csv(line);
    if (cols.size() < 2) throw IoError("malformed summary row in " + path.string());
    size_t c = 0;
    s.param_names.push_back(cols[c++]);
    s.final_mean.push_back(std::stod(cols[c++]));
    if (s.has_truth) {
      s.initial_percent_error.push_back(std::stod(cols[c++]));
      s.final_percent_error.push_back(std::stod(cols[c++]));
    }
    if (has_acc_col && c < cols.size() && !cols[c].empty())
      s.spm_accuracy.push_back(std::stod(cols[c]));
  }
  if (!saw_tag) throw IoError("missing schema tag in " + path.string());
  if (s.param_names.empty()) throw IoError("no parameter rows in " + path.string());
  return s;
}

std::string compare_runs(const std::vector<std::filesystem::path>& run_dirs,
                         const std::optional<std::filesystem::path>& out_csv) {
  if (run_dirs.size() < 2) throw ConfigError("compare needs at least two run directories");
  std::vector<RunSummary> runs;
  for (const auto& dir : run_dirs) {
    if (!std::filesystem::is_directory(dir))
      throw IoError("run directory not found: " + dir.string());
    runs.push_back(read_summary(dir / "summary.csv"));
    if (!runs.back().has_truth)
      throw ConfigError("cannot compare blind run (no truth columns): " + dir.string());
  }
  for (const auto& r : runs) {
    if (r.env_id != runs.front().env_id || r.param_names != runs.front().param_names)
      throw ConfigError("compare: mismatched envs/schemas across runs");
  }

  struct Agg {
    std::vector<double> values;  // mean final percent error per run
    std::vector<std::vector<double>> per_param;
  };
  std::map<std::string, Agg> by_method;
  for (const auto& r : runs) {
    auto& agg = by_method[r.method];
    agg.values.push_back(r.mean_final_percent_error());
    agg.per_param.push_back(r.final_percent_error);
  }

  auto mean_std = [](const std::vector<double>& xs) {
    double m = 0.0;
    for (double x : xs) m += x;
    m /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - m) * (x - m);
    var /= static_cast<double>(xs.size());
    return std::pair<double, double>(m, std::sqrt(var));
  };

  std::ostringstream table;
  table << "method,runs,final_percent_error_mean,final_percent_error_std\n";
  for (const auto& [method, agg] : by_method) {
    const auto [m, sd] = mean_std(agg.values);
    table << method << "," << agg.values.size() << "," << format_double(m) << ","
          << format_double(sd) << "\n";
  }

  if (out_csv) {
    std::ofstream os(*out_csv);
    if (!os) throw IoError("cannot open compare output " + out_csv->string());
    os << "# autotune_compare_v1\n";
    os << "kind,method,param,runs,mean,std\n";
    for (const auto& [method, agg] : by_method) {
      const auto [m, sd] = mean_std(agg.values);
      os << "aggregate," << method << ",," << agg.values.size() << "," << format_double(m) << ","
         << format_double(sd) << "\n";
      const auto& names = runs.front().param_names;
      for (size_t i = 0; i < names.size(); ++i) {
        std::vector<double> xs;
        for (const auto& pp : agg.per_param) xs.push_back(pp[i]);
        const auto [pm, psd] = mean_std(xs);
        os << "param," << method << "," << names[i] << "," << xs.size() << ","
           << format_double(pm) << "," << format_double(psd) << "\n";
      }
    }
  }
  return table.str();
}

}  // namespace autotune::harness
