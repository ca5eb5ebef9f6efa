#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ofs/spectra.hpp"

namespace ofs {

using FilterIndex = std::int32_t;

/// A filter selection: M library indices, order irrelevant to the objective.
struct Candidate {
  std::vector<FilterIndex> genes;

  std::size_t size() const noexcept { return genes.size(); }
  FilterIndex operator[](std::size_t i) const { return genes[i]; }
  FilterIndex& operator[](std::size_t i) { return genes[i]; }
  friend bool operator==(const Candidate&, const Candidate&) = default;
};

/// Per-filter pixel counts (portfolio form), length L, summing to N.
struct WeightVector {
  std::vector<int> weights;
};

struct SimulatorConfig {
  double c_star = 1.0;
  double photon_noise_alpha = 0.0;
  double read_noise_sigma = 0.0;
  double gain = 1.0;
  int N = 64;
  int M = 8;
  int retrieval_iters = 2;
  int K = 100;

  void validate() const;
};

/// Desk-scale defaults, calibrated so the baseline candidate on the seed-7
/// library has std(D) close to 1e-2.
SimulatorConfig desk_config();

void to_json(nlohmann::json& j, const SimulatorConfig& cfg);
void from_json(const nlohmann::json& j, SimulatorConfig& cfg);

struct EvalResult {
  double estimate = 0.0;
  std::vector<double> samples;     // D^2 draws
  std::vector<double> deviations;  // the underlying D draws
  std::size_t failures = 0;        // retrieval failures, recorded as D = +1
  std::size_t K = 0;
};

/// Outcome of one forward-plus-retrieval simulation.
struct Deviation {
  double value = 0.0;
  bool failed = false;
};

/// The first r = N - floor(N/M)*M genes receive weight k+1, the rest k.
WeightVector phi2(const Candidate& c, int N, std::size_t L);

/// Recovers an M-gene candidate whose phi2 image is `w` when `w` follows the
/// even-repetition pattern. Throws NotRepresentable for more than M nonzero
/// entries.
Candidate phi1_inverse_check(const WeightVector& w, int M);

std::size_t distinct_count(const Candidate& c);

/// Validates that every gene indexes into a library of size L.
void check_candidate(const Candidate& c, std::size_t L);

/// Beer-Lambert forward model with weighted Gauss-Newton retrieval of
/// (concentration, albedo scale). Precomputes per-filter moment tables so a
/// single noisy retrieval costs O(M) rather than O(M*Q).
class Simulator {
 public:
  Simulator(const FilterLibrary& lib, SimulatorConfig cfg);

  const SimulatorConfig& config() const noexcept { return cfg_; }
  std::size_t library_size() const noexcept { return signal_.size(); }

  /// D = 1 - c_hat / c_star for one noisy measurement.
  Deviation sample_D(const Candidate& c, std::uint64_t noise_seed) const;

  /// K draws with sub-seeds derived from (stream_seed, 1..K).
  EvalResult evaluate(const Candidate& c, std::size_t K, std::uint64_t stream_seed) const;
  EvalResult evaluate(const Candidate& c, std::uint64_t stream_seed) const {
    return evaluate(c, static_cast<std::size_t>(cfg_.K), stream_seed);
  }

  /// Noiseless signal gain * sum_q T_q exp(-c_star a_q) for filter i.
  double noiseless_signal(std::size_t i) const { return cfg_.gain * signal_[i]; }

 private:
  struct Response {
    double s, ds;  // sum_q T exp(-c a) and its derivative in c
  };
  Response response(std::size_t filter, double c) const;

  FilterLibrary lib_;
  SimulatorConfig cfg_;
  double a_max_ = 0.0;
  std::vector<double> expo_;                  // exp(-c_star a_q)
  std::vector<double> signal_;                // sum_q T_q exp(-c_star a_q)
  std::vector<std::vector<double>> moments_;  // sum_q T_q a_q^n exp(-c_star a_q)
};

Deviation sample_D(const Candidate& c, const SimulatorConfig& cfg, const FilterLibrary& lib, std::uint64_t noise_seed);
EvalResult evaluate(const Candidate& c, std::size_t K, const SimulatorConfig& cfg, const FilterLibrary& lib,
                    std::uint64_t stream_seed);

/// Lower bound (var_ratio - 1) / (1 - mean_ratio_sq) on E^2/Var required for
/// the lower-mean, higher-variance candidate to win under F = E[D^2].
double tradeoff_bound(double var_ratio, double mean_ratio_sq);

}  // namespace ofs
