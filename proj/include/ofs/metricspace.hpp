#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ofs/instrument.hpp"
#include "ofs/random.hpp"
#include "ofs/spectra.hpp"

namespace ofs {

enum class MetricId { d1, d2 };

std::string to_string(MetricId id);
MetricId metric_from_string(const std::string& s);

/// Dense row-major square matrix used as an assignment cost.
class CostMatrix {
 public:
  explicit CostMatrix(std::size_t n, double fill = 0.0) : n_(n), data_(n * n, fill) {}
  std::size_t size() const noexcept { return n_; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * n_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }

 private:
  std::size_t n_;
  std::vector<double> data_;
};

struct AssignmentResult {
  std::vector<std::size_t> permutation;  // row i is matched to column permutation[i]
  double value = 0.0;
};

/// Exact minimum-cost perfect matching (shortest augmenting path, O(n^3)).
AssignmentResult lap_solve(const CostMatrix& cost);

/// A metric on library filters, tabulated once per library. Also holds, for
/// every anchor filter, all filters ordered by distance to it (ties broken by
/// index) and the inverse rank table.
class FilterMetric {
 public:
  FilterMetric(const FilterLibrary& lib, MetricId id);
  /// From an explicit symmetric distance table; used for constructed spaces.
  FilterMetric(std::vector<std::vector<double>> table, MetricId id);

  MetricId id() const noexcept { return id_; }
  std::size_t size() const noexcept { return n_; }

  double operator()(std::size_t x, std::size_t y) const { return dist_[x * n_ + y]; }

  /// Filters sorted by ascending distance to `anchor`.
  const FilterIndex* order(std::size_t anchor) const { return &order_[anchor * n_]; }
  /// Zero-based position of `f` in order(anchor).
  std::size_t rank(std::size_t anchor, std::size_t f) const { return rank_[anchor * n_ + f]; }

 private:
  void build_orders();

  MetricId id_;
  std::size_t n_ = 0;
  std::vector<double> dist_;
  std::vector<FilterIndex> order_;
  std::vector<std::uint32_t> rank_;
};

std::size_t hamming(const Candidate& x, const Candidate& y);

double lap_metric(const FilterMetric& d, const Candidate& x, const Candidate& y);
AssignmentResult lap_star(const FilterMetric& d, const Candidate& x, const Candidate& y);

struct MetricContext {
  MetricId metric_id = MetricId::d1;
  double delta_min_tilde = 0.0;
  double delta_min_hat = 0.0;
  double delta_max_hat = 0.0;
  double gamma = 0.0;
  std::size_t R = 10;
  std::uint64_t seed = 0;
};

void to_json(nlohmann::json& j, const MetricContext& ctx);
void from_json(const nlohmann::json& j, MetricContext& ctx);

/// Estimates the scale of the candidate space from R uniform points of
/// dimension M: mean nearest-filter distance (times 100), the greedy
/// farthest-point LAP value, and gamma such that tau(delta_max_hat) = 1 - 1e-5.
MetricContext explore(const FilterMetric& d, std::size_t M, std::size_t R, std::uint64_t seed);

/// gamma = sqrt(-ln 1e-5) / delta_max_hat.
double gamma_for(double delta_max_hat);

/// Maximum-entropy density on (0,1) with fixed mean: a truncated exponential
/// p(s) = rate * exp(-rate s) / (1 - exp(-rate)); rate = 0 is uniform.
struct StepSizeDistribution {
  double mean = 0.5;
  double rate = 0.0;

  /// Analytic mean 1/rate - 1/(exp(rate) - 1).
  double analytic_mean() const;
  double pdf(double s) const;
  double cdf(double s) const;
  double sample(Rng& rng) const;
};

StepSizeDistribution build_stepsize_distribution(double m);

/// tau(d) = 1 - exp(-gamma^2 d^2) and its inverse.
double distance_to_step(double d, double gamma);
double step_to_distance(double s, double gamma);

/// Rank r in [1, n] with probability (1/r) / H_n.
std::size_t harmonic_sample(std::size_t n, Rng& rng);

struct DDMutationParams {
  std::size_t budget = 1000;  // LAP evaluations
  std::size_t lambda = 5;
  std::size_t retries = 10;
};

struct DDMutationResult {
  Candidate candidate;
  double value = 0.0;  // LAP(d, x0, candidate)
  std::size_t lap_evaluations = 0;
};

/// Inverse-LAP mutation: searches for y with LAP(d, x0, y) close to `target`
/// using a (1+lambda) scheme over rank-ordered, harmonically sampled filter
/// replacements. Never touches the simulator.
DDMutationResult dd_mutation(const Candidate& x0, const FilterMetric& d, double target, const DDMutationParams& params,
                             Rng& rng);

struct PrecisionSummary {
  std::vector<double> steps;      // s^(i)
  std::vector<double> distances;  // S^(i)
  std::vector<double> means;      // mean relative deviation per target
  double median = 0.0;
  std::size_t lap_evaluations = 0;
};

PrecisionSummary precision_experiment(const FilterMetric& d, const MetricContext& ctx, std::size_t M,
                                      std::size_t grid_points, std::size_t repeats, std::uint64_t seed,
                                      const DDMutationParams& params = {});

Candidate random_candidate(std::size_t L, std::size_t M, Rng& rng);

}  // namespace ofs
