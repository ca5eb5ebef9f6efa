#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace ofs {

struct WavelengthGrid {
  std::size_t q_count = 0;
  double lo = 0.0;
  double hi = 1.0;

  /// Q evenly spaced samples from lo to hi inclusive.
  std::vector<double> samples() const;
};

struct TransmissionProfile {
  std::vector<double> values;
};

struct AbsorptionSpectrum {
  std::vector<double> values;
};

struct FilterLibrary {
  WavelengthGrid grid;
  std::vector<TransmissionProfile> filters;
  AbsorptionSpectrum absorption;
  std::uint64_t seed = 0;

  std::size_t size() const noexcept { return filters.size(); }
  const TransmissionProfile& operator[](std::size_t i) const { return filters[i]; }

  /// Throws InvalidConfiguration if the library invariants do not hold
  /// (shape, value ranges, pairwise-distinct d1/d2).
  void validate() const;
};

/// Deterministic synthetic library: each filter is a clipped superposition of
/// 3-12 Lorentzian resonances over a sinusoidal background, and the absorption
/// spectrum is a comb of 12 Gaussian lines with decreasing depth.
FilterLibrary generate_library(std::uint64_t seed, std::size_t L, std::size_t Q);

/// Absorption-weighted transmission ratio sum(a*T)/sum(T) of one filter.
double transmission_ratio(const TransmissionProfile& x, const AbsorptionSpectrum& a);

double d1(const TransmissionProfile& x, const TransmissionProfile& y, const AbsorptionSpectrum& a);

/// sum over zeta in [0, Q/2] of zeta^2 * |DFT(T)_zeta|, zeta in integer bins.
double second_moment(const TransmissionProfile& x);
double second_moment(std::span<const double> values);

double d2(const TransmissionProfile& x, const TransmissionProfile& y);

/// Indices of the `count` filters with the largest second moment; ties go to
/// the lower index.
std::vector<std::size_t> baseline_selection(const FilterLibrary& lib, std::size_t count);

void to_json(nlohmann::json& j, const FilterLibrary& lib);
void from_json(const nlohmann::json& j, FilterLibrary& lib);

void save_library(const FilterLibrary& lib, const std::string& path);
FilterLibrary load_library(const std::string& path);

}  // namespace ofs
