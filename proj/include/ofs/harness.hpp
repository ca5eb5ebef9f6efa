#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ofs/instrument.hpp"
#include "ofs/metricspace.hpp"
#include "ofs/optimizers.hpp"
#include "ofs/spectra.hpp"
#include "ofs/stats.hpp"

namespace ofs {

struct LibrarySpec {
  std::uint64_t seed = 7;
  std::size_t L = 200;
  std::size_t Q = 256;
  std::string path;  // a pinned library file; overrides (seed, L, Q) when set

  FilterLibrary load() const;
};

struct SolverSpec {
  std::string name;
  OptimizerConfig config;
};

struct ExperimentConfig {
  LibrarySpec library;
  SimulatorConfig simulator = desk_config();
  std::vector<SolverSpec> solvers;
  std::size_t n_runs = 1;
  std::string output_dir = "campaign";
  std::uint64_t master_seed = 0;
  std::size_t explore_R = 10;
  std::size_t baseline_K = 10000;

  void validate() const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& cfg);
void from_json(const nlohmann::json& j, ExperimentConfig& cfg);
ExperimentConfig load_experiment_config(const std::string& path);

/// SHA-256 hex digest.
std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::string& path);

/// Shared per-campaign state: library, simulator, and lazily explored metric
/// contexts keyed by metric.
class Workspace {
 public:
  explicit Workspace(const ExperimentConfig& cfg);

  const ExperimentConfig& config() const noexcept { return cfg_; }
  const FilterLibrary& library() const noexcept { return lib_; }
  const Simulator& simulator() const noexcept { return sim_; }
  const FilterMetric& metric(MetricId id);
  const MetricContext& context(MetricId id);
  Candidate baseline() const;

  /// Run seed of (solver index, run index), derived from the master seed.
  std::uint64_t run_seed(std::size_t solver, std::size_t run) const;
  RunLog run(std::size_t solver, std::size_t run);

 private:
  ExperimentConfig cfg_;
  FilterLibrary lib_;
  Simulator sim_;
  std::map<MetricId, FilterMetric> metrics_;
  std::map<MetricId, MetricContext> contexts_;
};

struct BaselineRecord {
  Candidate candidate;
  std::size_t K = 0;
  double estimate = 0.0;
  std::size_t K_big = 0;
  double estimate_big = 0.0;
  double f_max = 0.0;  // estimate_big / 4
};

void to_json(nlohmann::json& j, const BaselineRecord& b);
void from_json(const nlohmann::json& j, BaselineRecord& b);

BaselineRecord evaluate_baseline(const Simulator& sim, const FilterLibrary& lib, std::size_t K, std::size_t K_big,
                                 std::uint64_t seed);

struct CampaignResult {
  std::vector<std::string> log_paths;  // relative to the output directory
  std::string baseline_path;
  std::string manifest_path;
  nlohmann::json manifest;
};

/// Log file name for a (solver, run) cell.
std::string log_file_name(const std::string& solver, std::size_t run);

/// Runs every (solver, run) cell, writes one log per cell, the baseline record
/// and a manifest listing every artifact with its SHA-256.
CampaignResult run_campaign(const ExperimentConfig& cfg);

/// Logs of a finished campaign, grouped by solver name in run order.
std::map<std::string, std::vector<RunLog>> load_campaign_logs(const ExperimentConfig& cfg);

struct RankRow {
  std::string solver;
  std::size_t runs = 0;
  double mean_final = 0.0;
  double p_value = 1.0;          // MWU of reference vs this solver
  double share_all_distinct = 0.0;
  double share_above_audit = 0.0;  // distinct_count > audit_threshold
};

struct RankTable {
  std::string reference;
  std::size_t budget = 0;
  std::size_t audit_threshold = 0;
  std::vector<RankRow> rows;
};

/// g at evaluation index min(b, log length).
double final_g_at(const RunLog& log, std::size_t budget);

RankTable rank_solvers(const std::map<std::string, std::vector<RunLog>>& logs, const std::string& reference,
                       std::size_t budget, std::size_t M, Alternative alt = Alternative::less);
std::string rank_table_csv(const RankTable& t);

struct PoolEntry {
  Candidate candidate;
  double value = 0.0;
};

struct DiverseMember {
  Candidate candidate;
  double estimate = 0.0;
};

struct DiverseSet {
  std::vector<DiverseMember> solutions;
  double D_min = 0.0;
  double f_max = 0.0;
};

void to_json(nlohmann::json& j, const DiverseSet& s);
void from_json(const nlohmann::json& j, DiverseSet& s);

/// Greedy in ascending value order: keep a candidate when its value is at most
/// f_max and its LAP distance to every kept one is at least D_min.
DiverseSet select_diverse(const std::vector<PoolEntry>& pool, double D_min, double f_max, const FilterMetric& d);

/// Fresh F_K estimates with per-member sub-seeds, re-sorted ascending.
DiverseSet reevaluate(const DiverseSet& set, std::size_t K_big, const Simulator& sim, std::uint64_t seed);

/// Half the mean LAP distance between uniformly random candidate pairs.
double calibrate_d_min(const FilterMetric& d, std::size_t M, std::size_t pairs, std::uint64_t seed);

/// Every evaluated candidate of the given logs.
std::vector<PoolEntry> pool_from_logs(const std::vector<RunLog>& logs);

}  // namespace ofs
