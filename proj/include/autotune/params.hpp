#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "autotune/rng.hpp"

namespace autotune {

// Values are clamped at this floor (in each parameter's native unit) so they
// stay strictly positive through sampling and search updates.
inline constexpr double kParamFloor = 1e-4;

enum class ParamKind { dynamics, visual };

struct ParamSchema {
  struct Entry {
    std::string name;
    ParamKind kind = ParamKind::dynamics;
    double reference_scale = 1.0;  // reporting only
  };

  std::vector<Entry> entries;

  size_t size() const { return entries.size(); }
  // -1 when absent
  int index_of(std::string_view name) const;
  // throws std::invalid_argument on duplicate/empty names or N == 0
  void validate() const;
};

// Ordered values indexed against a ParamSchema.
struct ParamVector {
  std::vector<double> values;

  ParamVector() = default;
  explicit ParamVector(std::vector<double> v) : values(std::move(v)) {}

  size_t size() const { return values.size(); }
  double operator[](size_t i) const { return values[i]; }
  double& operator[](size_t i) { return values[i]; }

  bool all_positive() const;
};

// Independent per-parameter uniform distributions whose support width is
// proportional to the mean: [mean*(1 - r/2), mean*(1 + r/2)], floor-clamped.
struct ParamDistribution {
  ParamVector mean;
  double range_fraction = 0.0;  // r

  double lo(size_t i) const;
  double hi(size_t i) const;
  // throws std::invalid_argument when mean is non-positive or r < 0
  void validate() const;
};

ParamVector sample_params(const ParamDistribution& dist, Rng& rng);

// 100 * |mean_i - real_i| / real_i; throws on non-positive real entries.
std::vector<double> percent_error(const ParamVector& mean, const ParamVector& real);

// Element-wise real_i * factors_i; throws on non-positive factors or length mismatch.
ParamVector misparametrize(const ParamVector& real, std::span<const double> factors);

// Fair coin per parameter between high_factor and low_factor.
ParamVector misparametrize(const ParamVector& real, double high_factor, double low_factor,
                           Rng& rng);

}  // namespace autotune
