#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "ofs/errors.hpp"
#include "ofs/metricspace.hpp"

using namespace ofs;

namespace {

const FilterLibrary& lib7() {
  static const FilterLibrary lib = generate_library(7, 200, 256);
  return lib;
}

const FilterMetric& metric(MetricId id) {
  static const FilterMetric m1(lib7(), MetricId::d1);
  static const FilterMetric m2(lib7(), MetricId::d2);
  return id == MetricId::d1 ? m1 : m2;
}

double brute_force(const FilterMetric& d, const Candidate& x, const Candidate& y) {
  std::vector<std::size_t> p(x.size());
  std::iota(p.begin(), p.end(), std::size_t{0});
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
      s += d(static_cast<std::size_t>(x[i]), static_cast<std::size_t>(y[p[i]]));
    best = std::min(best, s);
  } while (std::next_permutation(p.begin(), p.end()));
  return best;
}

// Independent root of 1/l - 1/(e^l - 1) = m by plain bisection.
double bisect_rate(double m) {
  auto g = [](double l) { return 1.0 / l - 1.0 / std::expm1(l); };
  double lo = 1e-6, hi = 200.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) > m ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("hamming distance") {
  CHECK(hamming(Candidate{{1, 2, 3}}, Candidate{{1, 2, 3}}) == 0);
  CHECK(hamming(Candidate{{1, 2, 3}}, Candidate{{1, 2, 4}}) == 1);
  CHECK(hamming(Candidate{{1, 2}}, Candidate{{2, 1}}) == 2);
  CHECK_THROWS_AS(hamming(Candidate{{1, 2}}, Candidate{{1}}), InvalidArgument);
}

TEST_CASE("lap_solve matches brute force on random matrices") {
  Rng rng(1);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + rng.below(6);
    CostMatrix c(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) c(i, j) = rng.uniform(0.0, 10.0);
    const auto res = lap_solve(c);
    std::vector<std::size_t> p(n);
    std::iota(p.begin(), p.end(), std::size_t{0});
    double best = std::numeric_limits<double>::infinity();
    do {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += c(i, p[i]);
      best = std::min(best, s);
    } while (std::next_permutation(p.begin(), p.end()));
    CHECK(res.value == doctest::Approx(best).epsilon(1e-12));
    double direct = 0.0;
    auto seen = res.permutation;
    for (std::size_t i = 0; i < n; ++i) direct += c(i, res.permutation[i]);
    CHECK(direct == doctest::Approx(res.value).epsilon(1e-12));
    std::sort(seen.begin(), seen.end());
    for (std::size_t i = 0; i < n; ++i) CHECK(seen[i] == i);
  }
  CostMatrix bad(2, 1.0);
  bad(0, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(lap_solve(bad), InvalidArgument);
}

TEST_CASE("LAP metric equals the permutation minimum for M up to 7") {
  Rng rng(2);
  for (auto id : {MetricId::d1, MetricId::d2}) {
    const auto& d = metric(id);
    for (int t = 0; t < 60; ++t) {
      const std::size_t M = 2 + rng.below(6);
      const auto x = random_candidate(200, M, rng);
      const auto y = random_candidate(200, M, rng);
      const double v = lap_metric(d, x, y);
      CHECK(v == doctest::Approx(brute_force(d, x, y)).epsilon(1e-12));
      const auto star = lap_star(d, x, y);
      CHECK(star.value == v);
    }
  }
}

TEST_CASE("LAP metric is invariant under reordering and satisfies the metric axioms") {
  Rng rng(3);
  for (auto id : {MetricId::d1, MetricId::d2}) {
    const auto& d = metric(id);
    for (int t = 0; t < 300; ++t) {
      const auto x = random_candidate(200, 8, rng);
      auto shuffled = x;
      for (std::size_t i = shuffled.size(); i > 1; --i) std::swap(shuffled[i - 1], shuffled[rng.below(i)]);
      CHECK(lap_metric(d, x, shuffled) == 0.0);
      const auto y = random_candidate(200, 8, rng);
      const auto z = random_candidate(200, 8, rng);
      const double xy = lap_metric(d, x, y), yz = lap_metric(d, y, z), xz = lap_metric(d, x, z);
      const double tol = id == MetricId::d1 ? 1e-9 : 1e-9 * std::max(1.0, xz);
      CHECK(xz <= xy + yz + tol);
      CHECK(std::abs(xy - lap_metric(d, y, x)) <= tol);
      if (distinct_count(x) == 8 && x != y) {
        auto sx = x.genes, sy = y.genes;
        std::sort(sx.begin(), sx.end());
        std::sort(sy.begin(), sy.end());
        if (sx != sy) CHECK(xy > 0.0);
      }
    }
  }
}

TEST_CASE("filter orderings and ranks") {
  const auto& d = metric(MetricId::d1);
  for (std::size_t anchor : {0u, 17u, 199u}) {
    const FilterIndex* ord = d.order(anchor);
    CHECK(static_cast<std::size_t>(ord[0]) == anchor);
    for (std::size_t t = 1; t < d.size(); ++t) {
      CHECK(d(anchor, static_cast<std::size_t>(ord[t - 1])) <= d(anchor, static_cast<std::size_t>(ord[t])));
      CHECK(d.rank(anchor, static_cast<std::size_t>(ord[t])) == t);
    }
  }
  // Ties are broken by filter index.
  FilterMetric tied({{0, 1, 1}, {1, 0, 1}, {1, 1, 0}}, MetricId::d1);
  CHECK(tied.order(2)[1] == 0);
  CHECK(tied.order(2)[2] == 1);
}

TEST_CASE("explore on a two-filter space") {
  const double t = 0.37;
  FilterMetric two({{0.0, t}, {t, 0.0}}, MetricId::d1);
  const auto ctx = explore(two, 3, 5, 1);
  CHECK(ctx.delta_min_tilde == doctest::Approx(t));
  CHECK(ctx.delta_min_hat == doctest::Approx(100.0 * t));
  CHECK(ctx.delta_max_hat > 0.0);
  CHECK(ctx.gamma == doctest::Approx(std::sqrt(-std::log(1e-5)) / ctx.delta_max_hat));

  FilterMetric flat({{0.0, 0.0}, {0.0, 0.0}}, MetricId::d1);
  CHECK_THROWS_AS(explore(flat, 3, 5, 1), ExplorationFailure);
}

TEST_CASE("explore on the desk library") {
  for (auto id : {MetricId::d1, MetricId::d2}) {
    const auto a = explore(metric(id), 8, 10, 42);
    const auto b = explore(metric(id), 8, 10, 42);
    CHECK(a.delta_min_hat < a.delta_max_hat);
    CHECK(a.delta_min_hat == b.delta_min_hat);
    CHECK(a.delta_max_hat == b.delta_max_hat);
    CHECK(distance_to_step(a.delta_max_hat, a.gamma) == doctest::Approx(1.0 - 1e-5).epsilon(1e-12));
    const nlohmann::json j = a;
    for (const char* key : {"metric_id", "delta_min_hat", "delta_max_hat", "gamma", "R", "seed"}) CHECK(j.contains(key));
    const auto back = j.get<MetricContext>();
    CHECK(back.gamma == a.gamma);
    CHECK(back.metric_id == id);
  }
}

TEST_CASE("step-size distribution") {
  const auto uniform = build_stepsize_distribution(0.5);
  CHECK(uniform.rate == 0.0);
  CHECK(uniform.cdf(0.3) == doctest::Approx(0.3));

  const auto d = build_stepsize_distribution(0.1);
  CHECK(std::abs(d.analytic_mean() - 0.1) < 1e-10);
  CHECK(d.rate == doctest::Approx(bisect_rate(0.1)).epsilon(1e-9));
  CHECK(d.rate == doctest::Approx(9.9955).epsilon(1e-4));

  const auto hi = build_stepsize_distribution(0.8);
  CHECK(hi.rate < 0.0);
  CHECK(std::abs(hi.analytic_mean() - 0.8) < 1e-10);

  Rng rng(4);
  double s = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double x = d.sample(rng);
    CHECK_UNARY(x > 0.0);
    CHECK_UNARY(x < 1.0);
    s += x;
  }
  // Standard error from the analytic second moment.
  const double l = d.rate;
  const double m2 = 2.0 / (l * l) - (1.0 + 2.0 / l) / std::expm1(l);
  const double se = std::sqrt((m2 - 0.01) / n);
  CHECK(std::abs(s / n - 0.1) < 3.0 * se);

  CHECK_THROWS_AS(build_stepsize_distribution(0.0), InvalidArgument);
  CHECK_THROWS_AS(build_stepsize_distribution(1.0), InvalidArgument);
}

TEST_CASE("step/distance mapping") {
  const double gamma = 2.7;
  Rng rng(6);
  for (int i = 0; i < 100; ++i) {
    const double d0 = rng.uniform(0.01, 1.0);
    CHECK(step_to_distance(distance_to_step(d0, gamma), gamma) == doctest::Approx(d0).epsilon(1e-12));
  }
  CHECK(step_to_distance(1e-300, gamma) < 1e-140);
  CHECK(step_to_distance(1.0 - std::exp(-1.0), gamma) == doctest::Approx(1.0 / gamma).epsilon(1e-12));
  CHECK_THROWS_AS(step_to_distance(0.0, gamma), InvalidArgument);
  CHECK_THROWS_AS(step_to_distance(1.0, gamma), InvalidArgument);
}

TEST_CASE("harmonic sampling") {
  Rng rng(7);
  for (int i = 0; i < 100; ++i) CHECK(harmonic_sample(1, rng) == 1);
  const int n = 100000;
  int count[4] = {0, 0, 0, 0};
  for (int i = 0; i < n; ++i) ++count[harmonic_sample(3, rng)];
  const double p[4] = {0.0, 6.0 / 11.0, 3.0 / 11.0, 2.0 / 11.0};
  for (int r = 1; r <= 3; ++r) {
    const double se = std::sqrt(p[r] * (1.0 - p[r]) / n);
    CHECK(std::abs(count[r] / static_cast<double>(n) - p[r]) < 3.0 * se);
  }
}

TEST_CASE("dd_mutation contract") {
  const auto& d = metric(MetricId::d1);
  const auto ctx = explore(d, 8, 10, 11);
  Rng rng(8);
  const auto x0 = random_candidate(200, 8, rng);

  DDMutationParams none{0, 5, 10};
  Rng r0(1);
  const auto same = dd_mutation(x0, d, ctx.delta_min_hat / 200.0, none, r0);
  CHECK(same.candidate == x0);
  CHECK(same.lap_evaluations == 0);

  Rng ra(9), rb(9);
  const auto a = dd_mutation(x0, d, 0.05, {}, ra);
  const auto b = dd_mutation(x0, d, 0.05, {}, rb);
  CHECK(a.candidate == b.candidate);
  CHECK(a.lap_evaluations <= 1000);
  CHECK(a.value == doctest::Approx(lap_metric(d, x0, a.candidate)).epsilon(1e-12));
  CHECK(std::abs(a.value - 0.05) / 0.05 < 0.05);
  CHECK_THROWS_AS(dd_mutation(x0, d, 0.0, {}, ra), InvalidArgument);
}

TEST_CASE("precision experiment shape") {
  const auto& d = metric(MetricId::d1);
  const auto ctx = explore(d, 8, 10, 11);
  const auto ps = precision_experiment(d, ctx, 8, 12, 2, 5, DDMutationParams{200, 5, 10});
  CHECK(ps.means.size() == 12);
  CHECK(ps.steps.front() == doctest::Approx(1e-4));
  CHECK(ps.steps.back() == doctest::Approx(1.0 - 1e-5));
  CHECK(ps.distances.back() == doctest::Approx(ctx.delta_max_hat).epsilon(1e-9));
  CHECK(ps.lap_evaluations <= 12 * 2 * 200);
}
