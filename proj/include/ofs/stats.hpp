#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ofs/instrument.hpp"
#include "ofs/metricspace.hpp"

namespace ofs {

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  double degrees_of_freedom = 0.0;  // Welch only
};

/// Two-sided Welch t-test. A zero standard error gives p = 1 when the means
/// agree and p = 0 otherwise.
TestResult welch_test(std::span<const double> a, std::span<const double> b);

enum class Alternative { two_sided, less };
enum class MwuMethod { automatic, exact, asymptotic };

/// Mann-Whitney U with midranks; statistic is U of sample `a`. `less` tests
/// whether `a` is stochastically smaller than `b`. The automatic method
/// enumerates the exact null distribution unless both samples exceed 20.
TestResult mwu_test(std::span<const double> a, std::span<const double> b, Alternative alt = Alternative::two_sided,
                    MwuMethod method = MwuMethod::automatic);

enum class NeighborhoodMetric { hamming, d1, d2 };

std::string to_string(NeighborhoodMetric m);
NeighborhoodMetric neighborhood_metric_from_string(const std::string& s);

struct NeighborhoodReport {
  NeighborhoodMetric metric = NeighborhoodMetric::hamming;
  std::size_t n = 0;
  std::size_t K = 0;
  std::vector<std::vector<double>> p_matrix;   // [parent][mutant]
  std::vector<std::vector<double>> distances;  // parent-to-mutant distance in the arm's metric
  double threshold = 0.0;                      // 0.05 / n^2
  double rejection_fraction = 0.0;
  double target_lo = 0.0, target_hi = 0.0;     // distance-arm step range
  std::vector<Candidate> parents;
  std::vector<std::vector<Candidate>> mutants;
};

/// n random parents, n one-step mutants each, Welch test of their K-sample
/// D^2 populations. The distance arm needs `d` and `ctx` for the same metric.
NeighborhoodReport neighborhood_experiment(const Simulator& sim, NeighborhoodMetric metric, std::size_t n,
                                           std::size_t K, const FilterMetric* d, const MetricContext* ctx,
                                           std::uint64_t seed);

/// CSV rows (i,j,p).
std::string neighborhood_csv(const NeighborhoodReport& r);
/// JSON summary (metric, n, K, threshold, rejection_fraction).
std::string neighborhood_summary_json(const NeighborhoodReport& r);

}  // namespace ofs
