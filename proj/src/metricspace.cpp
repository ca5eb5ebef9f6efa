#include "ofs/metricspace.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "ofs/errors.hpp"

namespace ofs {

std::string to_string(MetricId id) { return id == MetricId::d1 ? "d1" : "d2"; }

MetricId metric_from_string(const std::string& s) {
  if (s == "d1") return MetricId::d1;
  if (s == "d2") return MetricId::d2;
  throw InvalidArgument("unknown filter metric '" + s + "'");
}

AssignmentResult lap_solve(const CostMatrix& cost) {
  const std::size_t n = cost.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (!std::isfinite(cost(i, j))) throw InvalidArgument("lap_solve: non-finite cost entry");

  AssignmentResult res;
  if (n == 0) return res;

  // Potentials u (rows), v (columns); p[j] is the row matched to column j.
  // Index 0 is a sentinel, rows and columns are 1-based below.
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);

  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  res.permutation.assign(n, 0);
  for (std::size_t j = 1; j <= n; ++j) res.permutation[p[j] - 1] = j - 1;
  for (std::size_t i = 0; i < n; ++i) res.value += cost(i, res.permutation[i]);
  return res;
}

FilterMetric::FilterMetric(const FilterLibrary& lib, MetricId id) : id_(id), n_(lib.size()) {
  std::vector<double> key(n_);
  for (std::size_t i = 0; i < n_; ++i)
    key[i] = id == MetricId::d1 ? transmission_ratio(lib[i], lib.absorption) : second_moment(lib[i]);
  dist_.resize(n_ * n_);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = 0; j < n_; ++j) dist_[i * n_ + j] = std::abs(key[i] - key[j]);
  build_orders();
}

FilterMetric::FilterMetric(std::vector<std::vector<double>> table, MetricId id) : id_(id), n_(table.size()) {
  dist_.resize(n_ * n_);
  for (std::size_t i = 0; i < n_; ++i) {
    if (table[i].size() != n_) throw InvalidArgument("FilterMetric: distance table must be square");
    for (std::size_t j = 0; j < n_; ++j) dist_[i * n_ + j] = table[i][j];
  }
  build_orders();
}

void FilterMetric::build_orders() {
  order_.resize(n_ * n_);
  rank_.resize(n_ * n_);
  for (std::size_t a = 0; a < n_; ++a) {
    FilterIndex* row = &order_[a * n_];
    std::iota(row, row + n_, FilterIndex{0});
    const double* da = &dist_[a * n_];
    std::stable_sort(row, row + n_, [da](FilterIndex x, FilterIndex y) { return da[x] < da[y]; });
    for (std::size_t r = 0; r < n_; ++r) rank_[a * n_ + static_cast<std::size_t>(row[r])] = static_cast<std::uint32_t>(r);
  }
}

std::size_t hamming(const Candidate& x, const Candidate& y) {
  if (x.size() != y.size()) throw InvalidArgument("hamming: length mismatch");
  std::size_t h = 0;
  for (std::size_t i = 0; i < x.size(); ++i) h += x[i] != y[i] ? 1 : 0;
  return h;
}

AssignmentResult lap_star(const FilterMetric& d, const Candidate& x, const Candidate& y) {
  if (x.size() != y.size()) throw InvalidArgument("lap: length mismatch");
  const std::size_t n = x.size();
  CostMatrix cost(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      cost(i, j) = d(static_cast<std::size_t>(x[i]), static_cast<std::size_t>(y[j]));
  return lap_solve(cost);
}

double lap_metric(const FilterMetric& d, const Candidate& x, const Candidate& y) { return lap_star(d, x, y).value; }

void to_json(nlohmann::json& j, const MetricContext& ctx) {
  j = nlohmann::json{{"metric_id", to_string(ctx.metric_id)},
                     {"delta_min_tilde", ctx.delta_min_tilde},
                     {"delta_min_hat", ctx.delta_min_hat},
                     {"delta_max_hat", ctx.delta_max_hat},
                     {"gamma", ctx.gamma},
                     {"R", ctx.R},
                     {"seed", ctx.seed}};
}

void from_json(const nlohmann::json& j, MetricContext& ctx) {
  ctx.metric_id = metric_from_string(j.at("metric_id").get<std::string>());
  ctx.delta_min_tilde = j.value("delta_min_tilde", 0.0);
  ctx.delta_min_hat = j.at("delta_min_hat").get<double>();
  ctx.delta_max_hat = j.at("delta_max_hat").get<double>();
  ctx.gamma = j.at("gamma").get<double>();
  ctx.R = j.at("R").get<std::size_t>();
  ctx.seed = j.at("seed").get<std::uint64_t>();
}

Candidate random_candidate(std::size_t L, std::size_t M, Rng& rng) {
  Candidate c;
  c.genes.resize(M);
  for (auto& g : c.genes) g = static_cast<FilterIndex>(rng.below(L));
  return c;
}

double gamma_for(double delta_max_hat) { return std::sqrt(-std::log(1e-5)) / delta_max_hat; }

MetricContext explore(const FilterMetric& d, std::size_t M, std::size_t R, std::uint64_t seed) {
  if (R < 1) throw InvalidArgument("explore: R must be >= 1");
  if (M < 1 || d.size() < 2) throw InvalidArgument("explore: need M >= 1 and at least two filters");
  const std::size_t L = d.size();
  Rng rng(seed);

  double min_sum = 0.0, max_hat = 0.0;
  for (std::size_t r = 0; r < R; ++r) {
    const Candidate x = random_candidate(L, M, rng);
    double nearest = std::numeric_limits<double>::infinity();
    Candidate far = x;
    for (std::size_t i = 0; i < M; ++i) {
      const auto xi = static_cast<std::size_t>(x[i]);
      const FilterIndex* ord = d.order(xi);
      for (std::size_t t = 0; t < L; ++t) {
        if (static_cast<std::size_t>(ord[t]) != xi) {
          nearest = std::min(nearest, d(xi, static_cast<std::size_t>(ord[t])));
          break;
        }
      }
      far[i] = ord[L - 1];
    }
    min_sum += nearest;
    max_hat = std::max(max_hat, lap_metric(d, x, far));
  }

  MetricContext ctx;
  ctx.metric_id = d.id();
  ctx.R = R;
  ctx.seed = seed;
  ctx.delta_min_tilde = min_sum / static_cast<double>(R);
  if (!(ctx.delta_min_tilde > 0.0) || !(max_hat > 0.0))
    throw ExplorationFailure("explore: all sampled filter distances are zero");
  ctx.delta_min_hat = 100.0 * ctx.delta_min_tilde;
  ctx.delta_max_hat = max_hat;
  ctx.gamma = gamma_for(max_hat);
  return ctx;
}

double StepSizeDistribution::analytic_mean() const {
  if (std::abs(rate) < 1e-4) return 0.5 - rate / 12.0 + rate * rate * rate / 720.0;
  return 1.0 / rate - 1.0 / std::expm1(rate);
}

double StepSizeDistribution::pdf(double s) const {
  if (s <= 0.0 || s >= 1.0) return 0.0;
  if (rate == 0.0) return 1.0;
  return rate * std::exp(-rate * s) / -std::expm1(-rate);
}

double StepSizeDistribution::cdf(double s) const {
  if (s <= 0.0) return 0.0;
  if (s >= 1.0) return 1.0;
  if (rate == 0.0) return s;
  return std::expm1(-rate * s) / std::expm1(-rate);
}

double StepSizeDistribution::sample(Rng& rng) const {
  const double u = rng.uniform_open();
  double s = rate == 0.0 ? u : -std::log1p(u * std::expm1(-rate)) / rate;
  if (!(s > 0.0)) s = std::numeric_limits<double>::min();
  if (!(s < 1.0)) s = std::nextafter(1.0, 0.0);
  return s;
}

StepSizeDistribution build_stepsize_distribution(double m) {
  if (!(m > 0.0 && m < 1.0)) throw InvalidArgument("build_stepsize_distribution: mean must lie in (0, 1)");
  StepSizeDistribution dist;
  dist.mean = m;
  if (m == 0.5) return dist;

  // The mean is strictly decreasing in the rate.
  double lo = -(1.0 / (1.0 - m) + 50.0), hi = 1.0 / m + 50.0;
  for (int it = 0; it < 400 && hi - lo > 0.0; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    dist.rate = mid;
    (dist.analytic_mean() > m ? lo : hi) = mid;
  }
  dist.rate = 0.5 * (lo + hi);
  return dist;
}

double distance_to_step(double d, double gamma) { return -std::expm1(-gamma * gamma * d * d); }

double step_to_distance(double s, double gamma) {
  if (!(s > 0.0 && s < 1.0)) throw InvalidArgument("step_to_distance: step must lie in (0, 1)");
  if (!(gamma > 0.0)) throw InvalidArgument("step_to_distance: gamma must be positive");
  return std::sqrt(-std::log1p(-s)) / gamma;
}

std::size_t harmonic_sample(std::size_t n, Rng& rng) {
  if (n == 0) throw InvalidArgument("harmonic_sample: empty list");
  if (n == 1) return 1;
  double h = 0.0;
  for (std::size_t k = 1; k <= n; ++k) h += 1.0 / static_cast<double>(k);
  const double u = rng.uniform() * h;
  double acc = 0.0;
  for (std::size_t k = 1; k <= n; ++k) {
    acc += 1.0 / static_cast<double>(k);
    if (u < acc) return k;
  }
  return n;
}

DDMutationResult dd_mutation(const Candidate& x0, const FilterMetric& d, double target, const DDMutationParams& params,
                             Rng& rng) {
  if (!(target > 0.0)) throw InvalidArgument("dd_mutation: target distance must be positive");
  const std::size_t M = x0.size();
  const std::size_t L = d.size();
  check_candidate(x0, L);
  if (params.lambda == 0) throw InvalidArgument("dd_mutation: lambda must be positive");

  DDMutationResult best{x0, 0.0, 0};
  std::vector<std::size_t> perm(M);
  std::iota(perm.begin(), perm.end(), std::size_t{0});

  const std::size_t generations = params.budget / params.lambda;
  for (std::size_t gen = 0; gen < generations; ++gen) {
    const Candidate parent = best.candidate;
    const std::vector<std::size_t> parent_perm = perm;
    const double v = best.value;

    for (std::size_t j = 0; j < params.lambda; ++j) {
      Candidate y = parent;
      for (std::size_t r = 0; r < params.retries; ++r) {
        const auto k = static_cast<std::size_t>(rng.below(M));
        const std::size_t pos = parent_perm[k];
        const auto anchor = static_cast<std::size_t>(x0[k]);
        const std::size_t p = d.rank(anchor, static_cast<std::size_t>(parent[pos]));
        const FilterIndex* ord = d.order(anchor);
        if (p != 0 && v > target) y[pos] = ord[p - harmonic_sample(p, rng)];
        if (p != L - 1 && v < target) y[pos] = ord[p + harmonic_sample(L - 1 - p, rng)];
        if (y != parent) break;
      }

      AssignmentResult res = lap_star(d, x0, y);
      ++best.lap_evaluations;
      if (res.value == target) {
        best.candidate = std::move(y);
        best.value = res.value;
        return best;
      }
      if (std::abs(res.value - target) < std::abs(best.value - target)) {
        best.candidate = std::move(y);
        best.value = res.value;
        perm = std::move(res.permutation);
      }
    }
  }
  return best;
}

PrecisionSummary precision_experiment(const FilterMetric& d, const MetricContext& ctx, std::size_t M,
                                      std::size_t grid_points, std::size_t repeats, std::uint64_t seed,
                                      const DDMutationParams& params) {
  if (grid_points < 2 || repeats < 1) throw InvalidArgument("precision_experiment: need >= 2 targets and >= 1 repeat");
  constexpr double lo = 1e-4, hi = 1.0 - 1e-5;
  PrecisionSummary out;
  for (std::size_t i = 0; i < grid_points; ++i) {
    const double s = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(grid_points - 1);
    const double S = step_to_distance(s, ctx.gamma);
    double acc = 0.0;
    for (std::size_t j = 0; j < repeats; ++j) {
      Rng rng(derive_seed(seed, {i, j}));
      const Candidate x = random_candidate(d.size(), M, rng);
      const auto res = dd_mutation(x, d, S, params, rng);
      out.lap_evaluations += res.lap_evaluations;
      acc += std::abs(lap_metric(d, x, res.candidate) - S) / S;
    }
    out.steps.push_back(s);
    out.distances.push_back(S);
    out.means.push_back(acc / static_cast<double>(repeats));
  }
  std::vector<double> sorted = out.means;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  out.median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  return out;
}

}  // namespace ofs
