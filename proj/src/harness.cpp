#include "ofs/harness.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "ofs/errors.hpp"
#include "ofs/random.hpp"

namespace fs = std::filesystem;

namespace ofs {

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

bool needs_metric(Algorithm a) { return a == Algorithm::dd_ea || a == Algorithm::umda_u_pls_dist; }

}  // namespace

FilterLibrary LibrarySpec::load() const {
  if (!path.empty()) return load_library(path);
  return generate_library(seed, L, Q);
}

void ExperimentConfig::validate() const {
  simulator.validate();
  if (n_runs < 1) throw InvalidConfiguration("experiment: n_runs must be at least 1");
  if (solvers.empty()) throw InvalidConfiguration("experiment: no solvers configured");
  if (explore_R < 1) throw InvalidConfiguration("experiment: explore_R must be at least 1");
  if (baseline_K < 1) throw InvalidConfiguration("experiment: baseline_K must be at least 1");
  for (std::size_t i = 0; i < solvers.size(); ++i) {
    if (solvers[i].name.empty() || solvers[i].name.find_first_of("/\\ ") != std::string::npos)
      throw InvalidConfiguration("experiment: solver names must be nonempty and contain no spaces or slashes");
    for (std::size_t j = 0; j < i; ++j)
      if (solvers[i].name == solvers[j].name) throw InvalidConfiguration("experiment: duplicate solver " + solvers[i].name);
  }
}

void to_json(nlohmann::json& j, const ExperimentConfig& cfg) {
  nlohmann::json lib{{"seed", cfg.library.seed}, {"L", cfg.library.L}, {"Q", cfg.library.Q}};
  if (!cfg.library.path.empty()) lib["path"] = cfg.library.path;
  nlohmann::json solvers = nlohmann::json::array();
  for (const auto& s : cfg.solvers) {
    nlohmann::json e = s.config;
    e["name"] = s.name;
    solvers.push_back(std::move(e));
  }
  j = nlohmann::json{{"library", lib},
                     {"simulator", cfg.simulator},
                     {"solvers", solvers},
                     {"n_runs", cfg.n_runs},
                     {"output_dir", cfg.output_dir},
                     {"master_seed", cfg.master_seed},
                     {"explore_R", cfg.explore_R},
                     {"baseline_K", cfg.baseline_K}};
}

void from_json(const nlohmann::json& j, ExperimentConfig& cfg) {
  ExperimentConfig def;
  if (j.contains("library")) {
    const auto& l = j.at("library");
    cfg.library.seed = l.value("seed", def.library.seed);
    cfg.library.L = l.value("L", def.library.L);
    cfg.library.Q = l.value("Q", def.library.Q);
    cfg.library.path = l.value("path", std::string());
  }
  cfg.simulator = j.contains("simulator") ? j.at("simulator").get<SimulatorConfig>() : desk_config();
  cfg.solvers.clear();
  for (const auto& s : j.at("solvers")) {
    SolverSpec spec;
    spec.config = s.get<OptimizerConfig>();
    spec.name = s.value("name", to_string(spec.config.algorithm));
    cfg.solvers.push_back(std::move(spec));
  }
  cfg.n_runs = j.value("n_runs", def.n_runs);
  cfg.output_dir = j.value("output_dir", def.output_dir);
  cfg.master_seed = j.value("master_seed", def.master_seed);
  cfg.explore_R = j.value("explore_R", def.explore_R);
  cfg.baseline_K = j.value("baseline_K", def.baseline_K);
}

ExperimentConfig load_experiment_config(const std::string& path) {
  try {
    auto cfg = nlohmann::json::parse(read_text(path)).get<ExperimentConfig>();
    cfg.validate();
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidConfiguration(path + ": " + e.what());
  }
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw IoError("sha256 failed");
  std::string hex;
  hex.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

std::string sha256_file(const std::string& path) { return sha256_hex(read_text(path)); }

Workspace::Workspace(const ExperimentConfig& cfg)
    : cfg_(cfg), lib_(cfg.library.load()), sim_(lib_, cfg.simulator) {}

const FilterMetric& Workspace::metric(MetricId id) {
  auto it = metrics_.find(id);
  if (it == metrics_.end()) it = metrics_.emplace(id, FilterMetric(lib_, id)).first;
  return it->second;
}

const MetricContext& Workspace::context(MetricId id) {
  auto it = contexts_.find(id);
  if (it == contexts_.end()) {
    const auto seed = derive_seed(cfg_.master_seed, {0xc0, static_cast<std::uint64_t>(id)});
    it = contexts_.emplace(id, explore(metric(id), static_cast<std::size_t>(cfg_.simulator.M), cfg_.explore_R, seed))
             .first;
  }
  return it->second;
}

Candidate Workspace::baseline() const {
  Candidate c;
  for (auto i : baseline_selection(lib_, static_cast<std::size_t>(cfg_.simulator.M)))
    c.genes.push_back(static_cast<FilterIndex>(i));
  return c;
}

std::uint64_t Workspace::run_seed(std::size_t solver, std::size_t run) const {
  return derive_seed(cfg_.master_seed, {0x5e, solver, run});
}

RunLog Workspace::run(std::size_t solver, std::size_t run) {
  OptimizerConfig oc = cfg_.solvers.at(solver).config;
  oc.L = lib_.size();
  oc.M = static_cast<std::size_t>(cfg_.simulator.M);
  oc.seed = run_seed(solver, run);
  const FilterMetric* d = nullptr;
  const MetricContext* ctx = nullptr;
  if (needs_metric(oc.algorithm)) {
    d = &metric(oc.metric);
    if (oc.algorithm == Algorithm::dd_ea) ctx = &context(oc.metric);
  }
  Rng rng(oc.seed);
  const auto objective = simulator_objective(sim_, static_cast<std::size_t>(cfg_.simulator.K), derive_seed(oc.seed, {0xe}));
  return run_solver(oc, objective, d, ctx, rng);
}

void to_json(nlohmann::json& j, const BaselineRecord& b) {
  j = nlohmann::json{{"genes", b.candidate.genes}, {"K", b.K},       {"estimate", b.estimate},
                     {"K_big", b.K_big},           {"estimate_big", b.estimate_big}, {"f_max", b.f_max}};
}

void from_json(const nlohmann::json& j, BaselineRecord& b) {
  b.candidate.genes = j.at("genes").get<std::vector<FilterIndex>>();
  b.K = j.at("K").get<std::size_t>();
  b.estimate = j.at("estimate").get<double>();
  b.K_big = j.at("K_big").get<std::size_t>();
  b.estimate_big = j.at("estimate_big").get<double>();
  b.f_max = j.at("f_max").get<double>();
}

BaselineRecord evaluate_baseline(const Simulator& sim, const FilterLibrary& lib, std::size_t K, std::size_t K_big,
                                 std::uint64_t seed) {
  BaselineRecord b;
  for (auto i : baseline_selection(lib, static_cast<std::size_t>(sim.config().M)))
    b.candidate.genes.push_back(static_cast<FilterIndex>(i));
  b.K = K;
  b.estimate = sim.evaluate(b.candidate, K, derive_seed(seed, {1})).estimate;
  b.K_big = K_big;
  b.estimate_big = sim.evaluate(b.candidate, K_big, derive_seed(seed, {2})).estimate;
  b.f_max = b.estimate_big / 4.0;
  return b;
}

std::string log_file_name(const std::string& solver, std::size_t run) {
  return fmt::format("logs/{}__run{:03d}.csv", solver, run);
}

CampaignResult run_campaign(const ExperimentConfig& cfg) {
  cfg.validate();
  const fs::path out(cfg.output_dir);
  std::error_code ec;
  fs::create_directories(out / "logs", ec);
  const fs::path probe = out / ".write_probe";
  {
    std::ofstream p(probe);
    if (ec || !p) throw IoError("output directory " + out.string() + " is not writable");
  }
  fs::remove(probe);

  Workspace ws(cfg);
  CampaignResult res;
  std::vector<std::pair<std::string, std::string>> artifacts;
  for (std::size_t s = 0; s < cfg.solvers.size(); ++s) {
    for (std::size_t r = 0; r < cfg.n_runs; ++r) {
      const auto rel = log_file_name(cfg.solvers[s].name, r);
      const auto text = runlog_csv(ws.run(s, r));
      write_text(out / rel, text);
      res.log_paths.push_back(rel);
      artifacts.emplace_back(rel, sha256_hex(text));
    }
  }

  const auto base = evaluate_baseline(ws.simulator(), ws.library(), static_cast<std::size_t>(cfg.simulator.K),
                                      cfg.baseline_K, derive_seed(cfg.master_seed, {0xba5e}));
  const std::string base_text = nlohmann::json(base).dump(2) + "\n";
  res.baseline_path = "baseline.json";
  write_text(out / res.baseline_path, base_text);
  artifacts.emplace_back(res.baseline_path, sha256_hex(base_text));

  std::sort(artifacts.begin(), artifacts.end());
  // Where a campaign is written does not change what it computes.
  nlohmann::json identity = cfg;
  identity.erase("output_dir");
  const std::string config_hash = sha256_hex(identity.dump());
  nlohmann::json list = nlohmann::json::array();
  for (const auto& [path, sha] : artifacts) list.push_back({{"path", path}, {"sha", sha}});
  res.manifest = {{"campaign_id", config_hash.substr(0, 16)}, {"config_hash", config_hash}, {"artifacts", list}};
  res.manifest_path = "manifest.json";
  write_text(out / res.manifest_path, res.manifest.dump(2) + "\n");
  return res;
}

std::map<std::string, std::vector<RunLog>> load_campaign_logs(const ExperimentConfig& cfg) {
  std::map<std::string, std::vector<RunLog>> logs;
  const fs::path out(cfg.output_dir);
  for (const auto& s : cfg.solvers) {
    auto& v = logs[s.name];
    for (std::size_t r = 0; r < cfg.n_runs; ++r) {
      const fs::path p = out / log_file_name(s.name, r);
      if (!fs::exists(p)) throw InvalidInput("missing log " + p.string());
      v.push_back(read_runlog(p.string()));
    }
  }
  return logs;
}

double final_g_at(const RunLog& log, std::size_t budget) {
  if (log.records.empty()) throw InvalidInput("empty run log");
  const std::size_t n = std::min(budget, log.records.size());
  if (n == 0) throw InvalidInput("budget must be positive");
  return log.records[n - 1].g;
}

RankTable rank_solvers(const std::map<std::string, std::vector<RunLog>>& logs, const std::string& reference,
                       std::size_t budget, std::size_t M, Alternative alt) {
  const auto ref = logs.find(reference);
  if (ref == logs.end()) throw InvalidInput("no logs for reference solver " + reference);
  auto finals = [&](const std::vector<RunLog>& v) {
    std::vector<double> g;
    for (const auto& l : v) g.push_back(final_g_at(l, budget));
    return g;
  };
  for (const auto& [name, v] : logs)
    if (v.size() < 2) throw InvalidInput("solver " + name + " has fewer than two runs");

  RankTable t;
  t.reference = reference;
  t.budget = budget;
  t.audit_threshold = 3 * M / 4;
  const auto ref_g = finals(ref->second);
  for (const auto& [name, v] : logs) {
    RankRow row;
    row.solver = name;
    row.runs = v.size();
    const auto g = finals(v);
    for (double x : g) row.mean_final += x / static_cast<double>(g.size());
    row.p_value = mwu_test(ref_g, g, alt).p_value;
    for (const auto& l : v) {
      const auto dc = distinct_count(l.best);
      row.share_all_distinct += dc == M ? 1.0 : 0.0;
      row.share_above_audit += dc > t.audit_threshold ? 1.0 : 0.0;
    }
    row.share_all_distinct /= static_cast<double>(v.size());
    row.share_above_audit /= static_cast<double>(v.size());
    t.rows.push_back(row);
  }
  return t;
}

std::string rank_table_csv(const RankTable& t) {
  fmt::memory_buffer out;
  fmt::format_to(std::back_inserter(out), "solver,runs,mean_final_g,p_value,share_distinct_eq_M,share_distinct_gt_{}\n",
                 t.audit_threshold);
  for (const auto& r : t.rows)
    fmt::format_to(std::back_inserter(out), "{},{},{},{},{},{}\n", r.solver, r.runs, r.mean_final, r.p_value,
                   r.share_all_distinct, r.share_above_audit);
  return fmt::to_string(out);
}

void to_json(nlohmann::json& j, const DiverseSet& s) {
  nlohmann::json sol = nlohmann::json::array();
  for (const auto& m : s.solutions) sol.push_back({{"genes", m.candidate.genes}, {"estimate", m.estimate}});
  j = nlohmann::json{{"D_min", s.D_min}, {"f_max", s.f_max}, {"solutions", sol}};
}

void from_json(const nlohmann::json& j, DiverseSet& s) {
  s.D_min = j.at("D_min").get<double>();
  s.f_max = j.at("f_max").get<double>();
  s.solutions.clear();
  for (const auto& m : j.at("solutions"))
    s.solutions.push_back(
        DiverseMember{Candidate{m.at("genes").get<std::vector<FilterIndex>>()}, m.at("estimate").get<double>()});
}

DiverseSet select_diverse(const std::vector<PoolEntry>& pool, double D_min, double f_max, const FilterMetric& d) {
  std::vector<std::size_t> order(pool.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pool[a].value < pool[b].value; });

  DiverseSet out;
  out.D_min = D_min;
  out.f_max = f_max;
  for (auto i : order) {
    const auto& e = pool[i];
    if (!(e.value <= f_max)) continue;
    bool far = true;
    for (const auto& m : out.solutions)
      if (lap_metric(d, e.candidate, m.candidate) < D_min) {
        far = false;
        break;
      }
    if (far) out.solutions.push_back(DiverseMember{e.candidate, e.value});
  }
  return out;
}

DiverseSet reevaluate(const DiverseSet& set, std::size_t K_big, const Simulator& sim, std::uint64_t seed) {
  if (K_big < 1) throw InvalidArgument("reevaluate: K must be positive");
  DiverseSet out = set;
  for (std::size_t i = 0; i < out.solutions.size(); ++i)
    out.solutions[i].estimate = sim.evaluate(out.solutions[i].candidate, K_big, derive_seed(seed, {i + 1})).estimate;
  std::stable_sort(out.solutions.begin(), out.solutions.end(),
                   [](const DiverseMember& a, const DiverseMember& b) { return a.estimate < b.estimate; });
  return out;
}

double calibrate_d_min(const FilterMetric& d, std::size_t M, std::size_t pairs, std::uint64_t seed) {
  if (pairs == 0) throw InvalidArgument("calibrate_d_min: need at least one pair");
  Rng rng(seed);
  double acc = 0.0;
  for (std::size_t i = 0; i < pairs; ++i) {
    const auto x = random_candidate(d.size(), M, rng);
    const auto y = random_candidate(d.size(), M, rng);
    acc += lap_metric(d, x, y);
  }
  return 0.5 * acc / static_cast<double>(pairs);
}

std::vector<PoolEntry> pool_from_logs(const std::vector<RunLog>& logs) {
  std::vector<PoolEntry> pool;
  for (const auto& l : logs)
    for (const auto& r : l.records) pool.push_back(PoolEntry{r.candidate, r.f});
  return pool;
}

}  // namespace ofs
