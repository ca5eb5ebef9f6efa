#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ofs/instrument.hpp"
#include "ofs/metricspace.hpp"
#include "ofs/random.hpp"

namespace ofs {

enum class Algorithm { ea_plus, ea_crossover, dd_ea, umda, umda_u, umda_u_pls, umda_u_pls_dist };

std::string to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& s);

struct OptimizerConfig {
  Algorithm algorithm = Algorithm::ea_plus;
  std::size_t mu = 10;
  std::size_t lambda = 20;
  std::size_t budget = 2000;
  double mutation_rate = 1.0;  // expected number of mutated components
  double mean_m = 0.1;         // step-size mean for the distance-driven EA
  MetricId metric = MetricId::d1;
  std::size_t L = 200;
  std::size_t M = 8;
  std::uint64_t seed = 0;
  DDMutationParams inner;

  void validate() const;
  /// Number of objective evaluations a run performs: floor(b / lambda) * lambda.
  std::size_t evaluations() const { return (budget / lambda) * lambda; }
};

void to_json(nlohmann::json& j, const OptimizerConfig& cfg);
void from_json(const nlohmann::json& j, OptimizerConfig& cfg);

/// Objective value of a candidate. `t` is the 1-based evaluation index within
/// the run, which noisy objectives use to derive their noise stream.
using Objective = std::function<double(const Candidate&, std::size_t t)>;

/// F_K through the simulator, with the noise stream of evaluation t derived
/// from (stream_seed, t).
Objective simulator_objective(const Simulator& sim, std::size_t K, std::uint64_t stream_seed);

/// Number of genes different from 0; minimum 0 at the all-zero candidate.
Objective toy_objective();

struct LogRecord {
  std::size_t t = 0;
  double f = 0.0;
  double g = 0.0;
  Candidate candidate;
};

struct RunLog {
  std::vector<LogRecord> records;
  Candidate best;
  double best_value = std::numeric_limits<double>::infinity();
  std::uint64_t seed = 0;
  nlohmann::json config;
  nlohmann::json context;  // metric context, null for solvers without one

  /// Final best-so-far g^(b); +inf for an empty log.
  double final_g() const { return records.empty() ? best_value : records.back().g; }
};

/// CSV body (t,f,g,genes) followed by one "# {json}" footer line.
void write_runlog(const RunLog& log, const std::string& path);
RunLog read_runlog(const std::string& path);
std::string runlog_csv(const RunLog& log);

Candidate ea_mutate(const Candidate& x, double rate, std::size_t L, Rng& rng);
Candidate uniform_crossover(const Candidate& p1, const Candidate& p2, Rng& rng);

RunLog run_ea(const OptimizerConfig& cfg, const Objective& objective, Rng& rng);
RunLog run_dd_ea(const OptimizerConfig& cfg, const Objective& objective, const FilterMetric& d,
                 const MetricContext& ctx, Rng& rng);
RunLog run_umda(const OptimizerConfig& cfg, const Objective& objective, Rng& rng);
RunLog run_umda_u(const OptimizerConfig& cfg, const Objective& objective, Rng& rng);
RunLog run_umda_u_pls(const OptimizerConfig& cfg, const Objective& objective, Rng& rng);
RunLog run_umda_u_pls_dist(const OptimizerConfig& cfg, const Objective& objective, const FilterMetric& d, Rng& rng);

/// Dispatches on cfg.algorithm. Distance-based solvers need `d` and `ctx`.
RunLog run_solver(const OptimizerConfig& cfg, const Objective& objective, const FilterMetric* d,
                  const MetricContext* ctx, Rng& rng);

/// Lower clamp for UMDA probabilities: 1 / ((L - 1) M).
double umda_p_min(std::size_t L, std::size_t M);

/// Clamps every entry of a probability row into [p_min, 1 - p_min].
void clamp_row(std::vector<double>& row, double p_min);

/// Sequential no-repeat sampling from a shared row; position i > 0 optionally
/// weights filter j by the summed distance to the genes already drawn.
Candidate sample_pls(const std::vector<double>& p, std::size_t M, const FilterMetric* d, Rng& rng);

}  // namespace ofs
