#include "ofs/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <tuple>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "ofs/errors.hpp"
#include "ofs/random.hpp"

namespace ofs {

namespace {

double mean_of(std::span<const double> x) { return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size()); }

double var_of(std::span<const double> x, double m) {
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

double normal_sf(double z) {
  return boost::math::cdf(boost::math::complement(boost::math::normal_distribution<double>(), z));
}

// Midranks of the pooled sample; a occupies the first na entries.
std::vector<double> midranks(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size() + b.size();
  std::vector<double> v(n);
  std::copy(a.begin(), a.end(), v.begin());
  std::copy(b.begin(), b.end(), v.begin() + static_cast<std::ptrdiff_t>(a.size()));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
  std::vector<double> r(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = mid;
    i = j + 1;
  }
  return r;
}

// Exact null distribution of the doubled rank sum of a random size-na subset.
// Returns P(U <= u) and P(U >= u).
std::pair<double, double> exact_tails(const std::vector<double>& ranks, std::size_t na, double rank_sum_a) {
  std::vector<std::size_t> r2(ranks.size());
  std::size_t total = 0;
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    r2[i] = static_cast<std::size_t>(std::lround(2.0 * ranks[i]));
    total += r2[i];
  }
  // count[k][s]: number of k-subsets with doubled rank sum s.
  std::vector<std::vector<double>> count(na + 1, std::vector<double>(total + 1, 0.0));
  count[0][0] = 1.0;
  std::size_t seen = 0;
  for (std::size_t i = 0; i < r2.size(); ++i) {
    seen += r2[i];
    for (std::size_t k = std::min(na, i + 1); k >= 1; --k)
      for (std::size_t s = seen; s >= r2[i]; --s) {
        count[k][s] += count[k - 1][s - r2[i]];
        if (s == r2[i]) break;
      }
  }
  const auto obs = static_cast<std::size_t>(std::lround(2.0 * rank_sum_a));
  double lo = 0.0, hi = 0.0, all = 0.0;
  for (std::size_t s = 0; s <= total; ++s) {
    const double c = count[na][s];
    all += c;
    if (s <= obs) lo += c;
    if (s >= obs) hi += c;
  }
  return {lo / all, hi / all};
}

}  // namespace

TestResult welch_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw InvalidArgument("welch_test: each sample needs at least two values");
  const double ma = mean_of(a), mb = mean_of(b);
  const double qa = var_of(a, ma) / static_cast<double>(a.size());
  const double qb = var_of(b, mb) / static_cast<double>(b.size());
  const double se2 = qa + qb;
  TestResult r;
  if (!(se2 > 0.0)) {
    r.degrees_of_freedom = static_cast<double>(a.size() + b.size() - 2);
    if (ma == mb) {
      r.statistic = 0.0;
      r.p_value = 1.0;
    } else {
      r.statistic = ma < mb ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
      r.p_value = 0.0;
    }
    return r;
  }
  r.statistic = (ma - mb) / std::sqrt(se2);
  r.degrees_of_freedom =
      se2 * se2 / (qa * qa / static_cast<double>(a.size() - 1) + qb * qb / static_cast<double>(b.size() - 1));
  const boost::math::students_t_distribution<double> t(r.degrees_of_freedom);
  r.p_value = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(t, std::abs(r.statistic))));
  return r;
}

TestResult mwu_test(std::span<const double> a, std::span<const double> b, Alternative alt, MwuMethod method) {
  if (a.empty() || b.empty()) throw InvalidArgument("mwu_test: samples must be nonempty");
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const auto ranks = midranks(a, b);
  const double rank_sum_a = std::accumulate(ranks.begin(), ranks.begin() + static_cast<std::ptrdiff_t>(a.size()), 0.0);
  TestResult r;
  r.statistic = rank_sum_a - na * (na + 1.0) / 2.0;

  if (method == MwuMethod::automatic)
    method = std::min(a.size(), b.size()) > 20 ? MwuMethod::asymptotic : MwuMethod::exact;

  double p_lo, p_hi;  // P(U <= u), P(U >= u)
  if (method == MwuMethod::exact) {
    std::tie(p_lo, p_hi) = exact_tails(ranks, a.size(), rank_sum_a);
  } else {
    const double n = na + nb;
    std::vector<double> sorted = ranks;
    std::sort(sorted.begin(), sorted.end());
    double ties = 0.0;
    for (std::size_t i = 0; i < sorted.size();) {
      std::size_t j = i;
      while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
      const double t = static_cast<double>(j - i);
      ties += t * t * t - t;
      i = j;
    }
    const double mu = na * nb / 2.0;
    const double var = na * nb / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
    if (!(var > 0.0)) {
      p_lo = p_hi = 1.0;
    } else {
      const double sd = std::sqrt(var);
      p_lo = normal_sf((mu - r.statistic - 0.5) / sd);
      p_hi = normal_sf((r.statistic - mu - 0.5) / sd);
      p_lo = std::min(1.0, p_lo);
      p_hi = std::min(1.0, p_hi);
    }
  }
  r.p_value = alt == Alternative::less ? p_lo : std::min(1.0, 2.0 * std::min(p_lo, p_hi));
  return r;
}

std::string to_string(NeighborhoodMetric m) {
  switch (m) {
    case NeighborhoodMetric::hamming: return "hamming";
    case NeighborhoodMetric::d1: return "d1";
    case NeighborhoodMetric::d2: return "d2";
  }
  return "?";
}

NeighborhoodMetric neighborhood_metric_from_string(const std::string& s) {
  if (s == "hamming") return NeighborhoodMetric::hamming;
  if (s == "d1") return NeighborhoodMetric::d1;
  if (s == "d2") return NeighborhoodMetric::d2;
  throw InvalidConfiguration("unknown neighborhood metric '" + s + "'");
}

NeighborhoodReport neighborhood_experiment(const Simulator& sim, NeighborhoodMetric metric, std::size_t n,
                                           std::size_t K, const FilterMetric* d, const MetricContext* ctx,
                                           std::uint64_t seed) {
  if (n == 0 || K < 2) throw InvalidConfiguration("neighborhood: need n >= 1 and K >= 2");
  const bool distance_arm = metric != NeighborhoodMetric::hamming;
  if (distance_arm && (d == nullptr || ctx == nullptr))
    throw InvalidConfiguration("neighborhood: distance arm needs an explored metric context");
  const std::size_t L = sim.library_size();
  const auto M = static_cast<std::size_t>(sim.config().M);
  if (L < 2) throw InvalidConfiguration("neighborhood: library too small");

  NeighborhoodReport rep;
  rep.metric = metric;
  rep.n = n;
  rep.K = K;
  rep.threshold = 0.05 / static_cast<double>(n * n);
  if (distance_arm) {
    rep.target_lo = 10.0 * ctx->delta_min_hat;
    rep.target_hi = 15.0 * ctx->delta_min_hat;
  }
  rep.p_matrix.assign(n, std::vector<double>(n, 1.0));
  rep.distances.assign(n, std::vector<double>(n, 0.0));
  rep.mutants.assign(n, {});

  std::size_t rejected = 0;
  for (std::size_t i = 0; i < n; ++i) {
    Rng prng(derive_seed(seed, {0, i}));
    const Candidate parent = random_candidate(L, M, prng);
    const auto parent_eval = sim.evaluate(parent, K, derive_seed(seed, {1, i}));
    rep.parents.push_back(parent);
    for (std::size_t j = 0; j < n; ++j) {
      Rng rng(derive_seed(seed, {3, i, j}));
      Candidate y = parent;
      if (!distance_arm) {
        const std::size_t k = j % M;
        auto g = static_cast<FilterIndex>(rng.below(L - 1));
        if (g >= parent[k]) ++g;
        y[k] = g;
        rep.distances[i][j] = static_cast<double>(hamming(parent, y));
      } else {
        const double S = rng.uniform(rep.target_lo, rep.target_hi);
        y = dd_mutation(parent, *d, S, DDMutationParams{}, rng).candidate;
        rep.distances[i][j] = lap_metric(*d, parent, y);
      }
      const auto mutant_eval = sim.evaluate(y, K, derive_seed(seed, {2, i, j}));
      const double p = welch_test(parent_eval.samples, mutant_eval.samples).p_value;
      rep.p_matrix[i][j] = p;
      rejected += p < rep.threshold ? 1 : 0;
      rep.mutants[i].push_back(std::move(y));
    }
  }
  rep.rejection_fraction = static_cast<double>(rejected) / static_cast<double>(n * n);
  return rep;
}

std::string neighborhood_csv(const NeighborhoodReport& r) {
  fmt::memory_buffer out;
  fmt::format_to(std::back_inserter(out), "i,j,p\n");
  for (std::size_t i = 0; i < r.p_matrix.size(); ++i)
    for (std::size_t j = 0; j < r.p_matrix[i].size(); ++j)
      fmt::format_to(std::back_inserter(out), "{},{},{}\n", i, j, r.p_matrix[i][j]);
  return fmt::to_string(out);
}

std::string neighborhood_summary_json(const NeighborhoodReport& r) {
  nlohmann::json j{{"metric", to_string(r.metric)},
                   {"n", r.n},
                   {"K", r.K},
                   {"threshold", r.threshold},
                   {"rejection_fraction", r.rejection_fraction}};
  return j.dump(2) + "\n";
}

}  // namespace ofs
