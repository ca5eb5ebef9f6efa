#include "ofs/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include <nlohmann/json.hpp>

#include "ofs/errors.hpp"
#include "ofs/random.hpp"

namespace ofs {

namespace {

constexpr double kClipLo = 0.01;
constexpr double kClipHi = 0.99;
constexpr std::size_t kAbsorptionLines = 12;

TransmissionProfile synth_filter(std::uint64_t seed, std::size_t Q) {
  Rng rng(seed);
  const double q_count = static_cast<double>(Q);

  const double base = rng.uniform(0.35, 0.65);
  const double bg_amp = rng.uniform(0.0, 0.3);
  const double bg_cycles = rng.uniform(0.3, 2.0);
  const double bg_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);

  // Per-filter strength spreads the library between nearly smooth profiles
  // and ones dominated by sharp resonances.
  const double strength = rng.uniform(0.1, 0.6);
  const double width0 = std::cbrt(1.0 / rng.uniform(1.0 / 125.0, 8.0));
  const std::size_t n_res = 3 + static_cast<std::size_t>(rng.below(10));

  struct Resonance {
    double center, width, amplitude;
  };
  std::vector<Resonance> res(n_res);
  for (auto& r : res) {
    r.center = rng.uniform(0.0, q_count);
    r.width = std::clamp(width0 * rng.uniform(0.8, 1.25), 0.5, 5.0);
    r.amplitude = strength * rng.uniform(-1.0, 1.0);
  }

  TransmissionProfile p;
  p.values.resize(Q);
  for (std::size_t q = 0; q < Q; ++q) {
    const double x = static_cast<double>(q);
    double t = base + bg_amp * std::sin(2.0 * std::numbers::pi * bg_cycles * x / q_count + bg_phase);
    for (const auto& r : res) {
      const double dx = x - r.center;
      t += r.amplitude * r.width * r.width / (dx * dx + r.width * r.width);
    }
    p.values[q] = std::clamp(t, kClipLo, kClipHi);
  }
  return p;
}

AbsorptionSpectrum synth_absorption(std::uint64_t seed, std::size_t Q) {
  Rng rng(derive_seed(seed, {0xab5ULL}));
  const double q_count = static_cast<double>(Q);
  const double spacing = q_count / static_cast<double>(kAbsorptionLines);

  AbsorptionSpectrum a;
  a.values.assign(Q, 0.0);
  for (std::size_t k = 0; k < kAbsorptionLines; ++k) {
    const double center = spacing * (static_cast<double>(k) + 0.5) + rng.uniform(-0.3, 0.3) * spacing;
    const double width = rng.uniform(1.5, 4.0);
    const double depth = 1.0 - 0.75 * static_cast<double>(k) / static_cast<double>(kAbsorptionLines - 1);
    for (std::size_t q = 0; q < Q; ++q) {
      const double dx = (static_cast<double>(q) - center) / width;
      a.values[q] += depth * std::exp(-0.5 * dx * dx);
    }
  }
  return a;
}

double total(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0); }

}  // namespace

std::vector<double> WavelengthGrid::samples() const {
  std::vector<double> s(q_count);
  const double step = (hi - lo) / static_cast<double>(q_count - 1);
  for (std::size_t q = 0; q < q_count; ++q) s[q] = lo + step * static_cast<double>(q);
  s.back() = hi;
  return s;
}

void FilterLibrary::validate() const {
  if (grid.q_count < 2 || !(grid.lo < grid.hi)) throw InvalidConfiguration("library: invalid wavelength grid");
  if (filters.size() < 2) throw InvalidConfiguration("library: need at least two filters");
  if (absorption.values.size() != grid.q_count) throw InvalidConfiguration("library: absorption length mismatch");
  bool positive = false;
  for (double v : absorption.values) {
    if (!(v >= 0.0)) throw InvalidConfiguration("library: negative absorption");
    positive = positive || v > 0.0;
  }
  if (!positive) throw InvalidConfiguration("library: absorption is identically zero");

  std::vector<double> ratio(filters.size()), moment(filters.size());
  for (std::size_t i = 0; i < filters.size(); ++i) {
    const auto& f = filters[i].values;
    if (f.size() != grid.q_count) throw InvalidConfiguration("library: profile length mismatch");
    for (double v : f)
      if (!(v >= 0.0 && v <= 1.0)) throw InvalidConfiguration("library: transmission outside [0,1]");
    ratio[i] = transmission_ratio(filters[i], absorption);
    moment[i] = second_moment(filters[i]);
  }
  for (std::size_t i = 0; i < filters.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (ratio[i] == ratio[j] || moment[i] == moment[j])
        throw InvalidConfiguration("library: filters " + std::to_string(j) + " and " + std::to_string(i) +
                                   " are indistinguishable");
}

FilterLibrary generate_library(std::uint64_t seed, std::size_t L, std::size_t Q) {
  if (L < 2) throw InvalidConfiguration("generate_library: L must be at least 2");
  if (Q < 16) throw InvalidConfiguration("generate_library: Q must be at least 16");

  FilterLibrary lib;
  lib.seed = seed;
  lib.grid = WavelengthGrid{Q, 1600.0, 1700.0};
  lib.absorption = synth_absorption(seed, Q);
  lib.filters.reserve(L);

  std::vector<double> ratio, moment;
  for (std::size_t i = 0; i < L; ++i) {
    for (std::uint64_t attempt = 0;; ++attempt) {
      auto f = synth_filter(derive_seed(seed, {i, attempt}), Q);
      const double r = transmission_ratio(f, lib.absorption);
      const double m = second_moment(f);
      bool distinct = true;
      for (std::size_t j = 0; j < i && distinct; ++j) distinct = r != ratio[j] && m != moment[j];
      if (distinct) {
        lib.filters.push_back(std::move(f));
        ratio.push_back(r);
        moment.push_back(m);
        break;
      }
    }
  }
  return lib;
}

double transmission_ratio(const TransmissionProfile& x, const AbsorptionSpectrum& a) {
  if (x.values.size() != a.values.size()) throw InvalidArgument("transmission_ratio: grid mismatch");
  const double t = total(x.values);
  if (!(t > 0.0)) throw DegenerateFilter("filter has zero total transmission");
  double w = 0.0;
  for (std::size_t q = 0; q < x.values.size(); ++q) w += a.values[q] * x.values[q];
  return w / t;
}

double d1(const TransmissionProfile& x, const TransmissionProfile& y, const AbsorptionSpectrum& a) {
  return std::abs(transmission_ratio(x, a) - transmission_ratio(y, a));
}

double second_moment(std::span<const double> values) {
  const std::size_t Q = values.size();
  if (Q < 2) throw InvalidArgument("second_moment: profile needs at least two samples");
  std::vector<double> cs(Q), sn(Q);
  for (std::size_t k = 0; k < Q; ++k) {
    const double ang = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(Q);
    cs[k] = std::cos(ang);
    sn[k] = std::sin(ang);
  }
  // The zero bin carries no weight; removing the mean first makes constant
  // profiles score exactly zero instead of rounding noise.
  const double mean = total(values) / static_cast<double>(Q);
  std::vector<double> centered(values.begin(), values.end());
  for (auto& v : centered) v -= mean;
  double moment = 0.0;
  for (std::size_t z = 1; z <= Q / 2; ++z) {
    double re = 0.0, im = 0.0;
    std::size_t idx = 0;
    for (std::size_t q = 0; q < Q; ++q) {
      re += centered[q] * cs[idx];
      im -= centered[q] * sn[idx];
      idx += z;
      if (idx >= Q) idx -= Q;
    }
    const double zeta = static_cast<double>(z);
    moment += zeta * zeta * std::hypot(re, im);
  }
  return moment;
}

double second_moment(const TransmissionProfile& x) { return second_moment(std::span<const double>(x.values)); }

double d2(const TransmissionProfile& x, const TransmissionProfile& y) {
  if (x.values.size() != y.values.size()) throw InvalidArgument("d2: grid mismatch");
  return std::abs(second_moment(x) - second_moment(y));
}

std::vector<std::size_t> baseline_selection(const FilterLibrary& lib, std::size_t count) {
  if (count > lib.size()) throw InvalidConfiguration("baseline_selection: count exceeds library size");
  std::vector<double> moment(lib.size());
  for (std::size_t i = 0; i < lib.size(); ++i) moment[i] = second_moment(lib[i]);
  std::vector<std::size_t> idx(lib.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return moment[a] > moment[b]; });
  idx.resize(count);
  return idx;
}

void to_json(nlohmann::json& j, const FilterLibrary& lib) {
  nlohmann::json filters = nlohmann::json::array();
  for (const auto& f : lib.filters) filters.push_back(f.values);
  j = nlohmann::json{{"seed", lib.seed},
                     {"Q", lib.grid.q_count},
                     {"lo", lib.grid.lo},
                     {"hi", lib.grid.hi},
                     {"filters", std::move(filters)},
                     {"absorption", lib.absorption.values}};
}

void from_json(const nlohmann::json& j, FilterLibrary& lib) {
  lib.seed = j.at("seed").get<std::uint64_t>();
  lib.grid.q_count = j.at("Q").get<std::size_t>();
  lib.grid.lo = j.at("lo").get<double>();
  lib.grid.hi = j.at("hi").get<double>();
  lib.filters.clear();
  for (const auto& f : j.at("filters")) lib.filters.push_back(TransmissionProfile{f.get<std::vector<double>>()});
  lib.absorption.values = j.at("absorption").get<std::vector<double>>();
  lib.validate();
}

void save_library(const FilterLibrary& lib, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << nlohmann::json(lib).dump() << '\n';
}

FilterLibrary load_library(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  return nlohmann::json::parse(in).get<FilterLibrary>();
}

}  // namespace ofs
