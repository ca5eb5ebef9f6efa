#include "ofs/optimizers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

#include "ofs/errors.hpp"

namespace ofs {

namespace {

struct Individual {
  Candidate c;
  double f = std::numeric_limits<double>::infinity();
};

class Recorder {
 public:
  Recorder(RunLog& log, const Objective& objective) : log_(log), objective_(objective) {}

  double operator()(const Candidate& c) {
    const std::size_t t = log_.records.size() + 1;
    const double f = objective_(c, t);
    if (f < log_.best_value || log_.records.empty()) {
      log_.best_value = f;
      log_.best = c;
    }
    log_.records.push_back(LogRecord{t, f, log_.best_value, c});
    return f;
  }

 private:
  RunLog& log_;
  const Objective& objective_;
};

RunLog start_log(const OptimizerConfig& cfg) {
  RunLog log;
  log.seed = cfg.seed;
  log.config = cfg;
  log.records.reserve(cfg.evaluations());
  return log;
}

// Stable, so equal values keep evaluation order.
void truncate(std::vector<Individual>& pop, std::size_t mu) {
  std::stable_sort(pop.begin(), pop.end(), [](const Individual& a, const Individual& b) { return a.f < b.f; });
  pop.resize(std::min(mu, pop.size()));
}

std::size_t categorical(const std::vector<double>& w, Rng& rng) {
  double total = 0.0;
  for (double v : w) total += v;
  if (!(total > 0.0)) throw SamplingDegeneracy("no admissible filter has positive weight");
  double u = rng.uniform() * total;
  std::size_t last = 0;
  for (std::size_t j = 0; j < w.size(); ++j) {
    if (w[j] <= 0.0) continue;
    last = j;
    if (u < w[j]) return j;
    u -= w[j];
  }
  return last;
}

std::vector<std::size_t> ranked(const std::vector<double>& f) {
  std::vector<std::size_t> idx(f.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return f[a] < f[b]; });
  return idx;
}

enum class SharedSampling { independent, pls, pls_dist };

RunLog run_shared_row(const OptimizerConfig& cfg, const Objective& objective, SharedSampling mode,
                      const FilterMetric* d, Rng& rng) {
  cfg.validate();
  RunLog log = start_log(cfg);
  Recorder eval(log, objective);
  const std::size_t L = cfg.L, M = cfg.M;
  if (mode != SharedSampling::independent && L <= M)
    throw InvalidConfiguration("no-repeat sampling needs more filters than components");
  const double p_min = umda_p_min(L, M);
  std::vector<double> p(L, 1.0 / static_cast<double>(L));

  std::vector<Candidate> pop(cfg.lambda);
  std::vector<double> f(cfg.lambda);
  for (std::size_t gen = 0; gen < cfg.budget / cfg.lambda; ++gen) {
    for (std::size_t k = 0; k < cfg.lambda; ++k) {
      if (mode == SharedSampling::independent) {
        pop[k].genes.resize(M);
        for (auto& g : pop[k].genes) g = static_cast<FilterIndex>(categorical(p, rng));
      } else {
        pop[k] = sample_pls(p, M, mode == SharedSampling::pls_dist ? d : nullptr, rng);
      }
      f[k] = eval(pop[k]);
    }
    const auto order = ranked(f);
    std::fill(p.begin(), p.end(), 0.0);
    const double unit = 1.0 / static_cast<double>(cfg.mu * M);
    for (std::size_t r = 0; r < cfg.mu; ++r)
      for (auto g : pop[order[r]].genes) p[static_cast<std::size_t>(g)] += unit;
    clamp_row(p, p_min);
  }
  return log;
}

}  // namespace

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::ea_plus: return "ea_plus";
    case Algorithm::ea_crossover: return "ea_crossover";
    case Algorithm::dd_ea: return "dd_ea";
    case Algorithm::umda: return "umda";
    case Algorithm::umda_u: return "umda_u";
    case Algorithm::umda_u_pls: return "umda_u_pls";
    case Algorithm::umda_u_pls_dist: return "umda_u_pls_dist";
  }
  return "?";
}

Algorithm algorithm_from_string(const std::string& s) {
  for (auto a : {Algorithm::ea_plus, Algorithm::ea_crossover, Algorithm::dd_ea, Algorithm::umda, Algorithm::umda_u,
                 Algorithm::umda_u_pls, Algorithm::umda_u_pls_dist})
    if (to_string(a) == s) return a;
  throw InvalidConfiguration("unknown algorithm '" + s + "'");
}

void OptimizerConfig::validate() const {
  if (mu == 0 || lambda == 0 || budget == 0) throw InvalidConfiguration("optimizer: mu, lambda and budget must be positive");
  if (mu > lambda || lambda > budget) throw InvalidConfiguration("optimizer: need mu <= lambda <= budget");
  if (L < 2 || M < 1) throw InvalidConfiguration("optimizer: need L >= 2 and M >= 1");
  if (!(mutation_rate > 0.0) || mutation_rate > static_cast<double>(M))
    throw InvalidConfiguration("optimizer: mutation rate must lie in (0, M]");
  if (!(mean_m > 0.0 && mean_m < 1.0)) throw InvalidConfiguration("optimizer: step-size mean must lie in (0, 1)");
}

void to_json(nlohmann::json& j, const OptimizerConfig& cfg) {
  j = nlohmann::json{{"algorithm", to_string(cfg.algorithm)},
                     {"mu", cfg.mu},
                     {"lambda", cfg.lambda},
                     {"budget", cfg.budget},
                     {"mutation_rate", cfg.mutation_rate},
                     {"mean_m", cfg.mean_m},
                     {"metric", to_string(cfg.metric)},
                     {"L", cfg.L},
                     {"M", cfg.M},
                     {"seed", cfg.seed},
                     {"inner", {{"budget", cfg.inner.budget}, {"lambda", cfg.inner.lambda}, {"retries", cfg.inner.retries}}}};
}

void from_json(const nlohmann::json& j, OptimizerConfig& cfg) {
  OptimizerConfig def;
  cfg.algorithm = algorithm_from_string(j.at("algorithm").get<std::string>());
  cfg.mu = j.value("mu", def.mu);
  cfg.lambda = j.value("lambda", def.lambda);
  cfg.budget = j.value("budget", def.budget);
  cfg.mutation_rate = j.value("mutation_rate", def.mutation_rate);
  cfg.mean_m = j.value("mean_m", def.mean_m);
  cfg.metric = metric_from_string(j.value("metric", std::string("d1")));
  cfg.L = j.value("L", def.L);
  cfg.M = j.value("M", def.M);
  cfg.seed = j.value("seed", def.seed);
  if (j.contains("inner")) {
    const auto& in = j.at("inner");
    cfg.inner.budget = in.value("budget", def.inner.budget);
    cfg.inner.lambda = in.value("lambda", def.inner.lambda);
    cfg.inner.retries = in.value("retries", def.inner.retries);
  }
}

Objective simulator_objective(const Simulator& sim, std::size_t K, std::uint64_t stream_seed) {
  return [&sim, K, stream_seed](const Candidate& c, std::size_t t) {
    return sim.evaluate(c, K, derive_seed(stream_seed, {t})).estimate;
  };
}

Objective toy_objective() {
  return [](const Candidate& c, std::size_t) {
    return static_cast<double>(std::count_if(c.genes.begin(), c.genes.end(), [](FilterIndex g) { return g != 0; }));
  };
}

Candidate ea_mutate(const Candidate& x, double rate, std::size_t L, Rng& rng) {
  const std::size_t M = x.size();
  if (M == 0) return x;
  if (!(rate > 0.0) || rate > static_cast<double>(M)) throw InvalidArgument("ea_mutate: rate must lie in (0, M]");
  const double p = rate / static_cast<double>(M);
  std::size_t k = 0;
  for (std::size_t i = 0; i < M; ++i) k += rng.uniform() < p ? 1 : 0;
  k = std::max<std::size_t>(k, 1);

  std::vector<std::size_t> pos(M);
  std::iota(pos.begin(), pos.end(), std::size_t{0});
  Candidate y = x;
  for (std::size_t i = 0; i < k; ++i) {
    std::swap(pos[i], pos[i + rng.below(M - i)]);
    y[pos[i]] = static_cast<FilterIndex>(rng.below(L));
  }
  return y;
}

Candidate uniform_crossover(const Candidate& p1, const Candidate& p2, Rng& rng) {
  if (p1.size() != p2.size()) throw InvalidArgument("uniform_crossover: parents differ in length");
  Candidate child = p1;
  for (std::size_t i = 0; i < child.size(); ++i)
    if (rng.coin()) child[i] = p2[i];
  return child;
}

namespace {

RunLog run_elitist(const OptimizerConfig& cfg, const Objective& objective, const FilterMetric* d,
                   const MetricContext* ctx, Rng& rng) {
  cfg.validate();
  RunLog log = start_log(cfg);
  Recorder eval(log, objective);

  std::optional<StepSizeDistribution> steps;
  if (cfg.algorithm == Algorithm::dd_ea) {
    if (d == nullptr || ctx == nullptr) throw InvalidConfiguration("dd_ea needs a metric and an explored context");
    steps = build_stepsize_distribution(cfg.mean_m);
    log.context = *ctx;
  }

  // The initial population is never evaluated; it ranks behind every offspring.
  std::vector<Individual> pop(cfg.mu);
  for (auto& ind : pop) ind.c = random_candidate(cfg.L, cfg.M, rng);

  for (std::size_t gen = 0; gen < cfg.budget / cfg.lambda; ++gen) {
    const std::size_t mu = pop.size();
    for (std::size_t k = 0; k < cfg.lambda; ++k) {
      Candidate child;
      if (cfg.algorithm == Algorithm::ea_plus) {
        child = ea_mutate(pop[rng.below(mu)].c, cfg.mutation_rate, cfg.L, rng);
      } else {
        const auto& a = pop[rng.below(mu)].c;
        const auto& b = pop[rng.below(mu)].c;
        child = uniform_crossover(a, b, rng);
        if (cfg.algorithm == Algorithm::dd_ea) {
          const double S = step_to_distance(steps->sample(rng), ctx->gamma);
          child = dd_mutation(child, *d, S, cfg.inner, rng).candidate;
        } else {
          child = ea_mutate(child, cfg.mutation_rate, cfg.L, rng);
        }
      }
      const double f = eval(child);
      pop.push_back(Individual{std::move(child), f});
    }
    truncate(pop, cfg.mu);
  }
  return log;
}

}  // namespace

RunLog run_ea(const OptimizerConfig& cfg, const Objective& objective, Rng& rng) {
  if (cfg.algorithm != Algorithm::ea_plus && cfg.algorithm != Algorithm::ea_crossover)
    throw InvalidConfiguration("run_ea: algorithm must be ea_plus or ea_crossover");
  return run_elitist(cfg, objective, nullptr, nullptr, rng);
}

RunLog run_dd_ea(const OptimizerConfig& cfg, const Objective& objective, const FilterMetric& d,
                 const MetricContext& ctx, Rng& rng) {
  OptimizerConfig c = cfg;
  c.algorithm = Algorithm::dd_ea;
  return run_elitist(c, objective, &d, &ctx, rng);
}

double umda_p_min(std::size_t L, std::size_t M) {
  return 1.0 / (static_cast<double>(L - 1) * static_cast<double>(M));
}

void clamp_row(std::vector<double>& row, double p_min) {
  for (auto& v : row) v = std::clamp(v, p_min, 1.0 - p_min);
}

RunLog run_umda(const OptimizerConfig& cfg, const Objective& objective, Rng& rng) {
  cfg.validate();
  RunLog log = start_log(cfg);
  Recorder eval(log, objective);
  const std::size_t L = cfg.L, M = cfg.M;
  const double p_min = umda_p_min(L, M);
  std::vector<std::vector<double>> P(M, std::vector<double>(L, 1.0 / static_cast<double>(L)));

  std::vector<Candidate> pop(cfg.lambda);
  std::vector<double> f(cfg.lambda);
  for (std::size_t gen = 0; gen < cfg.budget / cfg.lambda; ++gen) {
    for (std::size_t k = 0; k < cfg.lambda; ++k) {
      pop[k].genes.resize(M);
      for (std::size_t i = 0; i < M; ++i) pop[k][i] = static_cast<FilterIndex>(categorical(P[i], rng));
      f[k] = eval(pop[k]);
    }
    const auto order = ranked(f);
    const double unit = 1.0 / static_cast<double>(cfg.mu);
    for (std::size_t i = 0; i < M; ++i) {
      std::fill(P[i].begin(), P[i].end(), 0.0);
      for (std::size_t r = 0; r < cfg.mu; ++r) P[i][static_cast<std::size_t>(pop[order[r]][i])] += unit;
      clamp_row(P[i], p_min);
    }
  }
  return log;
}

RunLog run_umda_u(const OptimizerConfig& cfg, const Objective& objective, Rng& rng) {
  return run_shared_row(cfg, objective, SharedSampling::independent, nullptr, rng);
}

RunLog run_umda_u_pls(const OptimizerConfig& cfg, const Objective& objective, Rng& rng) {
  return run_shared_row(cfg, objective, SharedSampling::pls, nullptr, rng);
}

RunLog run_umda_u_pls_dist(const OptimizerConfig& cfg, const Objective& objective, const FilterMetric& d, Rng& rng) {
  if (d.size() != cfg.L) throw InvalidConfiguration("umda_u_pls_dist: metric size differs from L");
  RunLog log = run_shared_row(cfg, objective, SharedSampling::pls_dist, &d, rng);
  log.config["metric"] = to_string(d.id());
  return log;
}

Candidate sample_pls(const std::vector<double>& p, std::size_t M, const FilterMetric* d, Rng& rng) {
  const std::size_t L = p.size();
  if (M > L) throw SamplingDegeneracy("more components than filters");
  Candidate c;
  c.genes.reserve(M);
  std::vector<double> w(L);
  std::vector<double> dist_sum(L, 0.0);
  std::vector<bool> used(L, false);
  for (std::size_t i = 0; i < M; ++i) {
    for (std::size_t j = 0; j < L; ++j) {
      w[j] = used[j] ? 0.0 : p[j];
      if (d != nullptr && i > 0) w[j] *= dist_sum[j];
    }
    const std::size_t g = categorical(w, rng);
    used[g] = true;
    c.genes.push_back(static_cast<FilterIndex>(g));
    if (d != nullptr)
      for (std::size_t j = 0; j < L; ++j) dist_sum[j] += (*d)(j, g);
  }
  return c;
}

RunLog run_solver(const OptimizerConfig& cfg, const Objective& objective, const FilterMetric* d,
                  const MetricContext* ctx, Rng& rng) {
  switch (cfg.algorithm) {
    case Algorithm::ea_plus:
    case Algorithm::ea_crossover: return run_ea(cfg, objective, rng);
    case Algorithm::dd_ea:
      if (d == nullptr || ctx == nullptr) throw InvalidConfiguration("dd_ea needs a metric context");
      return run_dd_ea(cfg, objective, *d, *ctx, rng);
    case Algorithm::umda: return run_umda(cfg, objective, rng);
    case Algorithm::umda_u: return run_umda_u(cfg, objective, rng);
    case Algorithm::umda_u_pls: return run_umda_u_pls(cfg, objective, rng);
    case Algorithm::umda_u_pls_dist:
      if (d == nullptr) throw InvalidConfiguration("umda_u_pls_dist needs a base metric");
      return run_umda_u_pls_dist(cfg, objective, *d, rng);
  }
  throw InvalidConfiguration("unknown algorithm");
}

}  // namespace ofs
