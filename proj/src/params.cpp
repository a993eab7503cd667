#include "autotune/params.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace autotune {

int ParamSchema::index_of(std::string_view name) const {
  for (size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

void ParamSchema::validate() const {
  if (entries.empty()) throw std::invalid_argument("ParamSchema: needs at least one parameter");
  std::unordered_set<std::string> seen;
  for (const auto& e : entries) {
    if (e.name.empty()) throw std::invalid_argument("ParamSchema: empty parameter name");
    if (!seen.insert(e.name).second)
      throw std::invalid_argument("ParamSchema: duplicate parameter name '" + e.name + "'");
    if (e.reference_scale <= 0.0)
      throw std::invalid_argument("ParamSchema: reference_scale must be positive for '" + e.name +
                                  "'");
  }
}

bool ParamVector::all_positive() const {
  return std::all_of(values.begin(), values.end(), [](double v) { return v > 0.0; });
}

double ParamDistribution::lo(size_t i) const {
  return std::max(mean[i] * (1.0 - range_fraction / 2.0), kParamFloor);
}

double ParamDistribution::hi(size_t i) const {
  return std::max(mean[i] * (1.0 + range_fraction / 2.0), kParamFloor);
}

void ParamDistribution::validate() const {
  if (range_fraction < 0.0)
    throw std::invalid_argument("ParamDistribution: range_fraction must be >= 0");
  if (!mean.all_positive())
    throw std::invalid_argument("ParamDistribution: mean entries must be strictly positive");
}

ParamVector sample_params(const ParamDistribution& dist, Rng& rng) {
  ParamVector out;
  out.values.resize(dist.mean.size());
  for (size_t i = 0; i < dist.mean.size(); ++i) {
    out[i] = rng.uniform(dist.lo(i), dist.hi(i));
  }
  return out;
}

std::vector<double> percent_error(const ParamVector& mean, const ParamVector& real) {
  if (mean.size() != real.size())
    throw std::invalid_argument("percent_error: length mismatch");
  std::vector<double> out(mean.size());
  for (size_t i = 0; i < mean.size(); ++i) {
    if (real[i] <= 0.0)
      throw std::invalid_argument("percent_error: real entries must be strictly positive");
    out[i] = 100.0 * std::abs(mean[i] - real[i]) / real[i];
  }
  return out;
}

ParamVector misparametrize(const ParamVector& real, std::span<const double> factors) {
  if (factors.size() != real.size())
    throw std::invalid_argument("misparametrize: factor count mismatch");
  ParamVector out;
  out.values.resize(real.size());
  for (size_t i = 0; i < real.size(); ++i) {
    if (factors[i] <= 0.0) throw std::invalid_argument("misparametrize: factors must be positive");
    out[i] = real[i] * factors[i];
  }
  return out;
}

ParamVector misparametrize(const ParamVector& real, double high_factor, double low_factor,
                           Rng& rng) {
  std::vector<double> factors(real.size());
  for (auto& f : factors) f = rng.coin() ? high_factor : low_factor;
  return misparametrize(real, factors);
}

}  // namespace autotune
