#include <doctest.h>

#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "ofs/errors.hpp"
#include "ofs/instrument.hpp"
#include "ofs/metricspace.hpp"
#include "ofs/random.hpp"

using namespace ofs;

namespace {

const FilterLibrary& lib7() {
  static const FilterLibrary lib = generate_library(7, 200, 256);
  return lib;
}

const Simulator& desk() {
  static const Simulator sim(lib7(), desk_config());
  return sim;
}

Candidate baseline() {
  Candidate c;
  for (auto i : baseline_selection(lib7(), 8)) c.genes.push_back(static_cast<FilterIndex>(i));
  return c;
}

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

double var_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

}  // namespace

TEST_CASE("phi2 weights follow the even repetition pattern") {
  Candidate c16;
  for (int i = 0; i < 16; ++i) c16.genes.push_back(i * 3);
  const auto w = phi2(c16, 640, 100);
  for (int i = 0; i < 16; ++i) CHECK(w.weights[static_cast<std::size_t>(i * 3)] == 40);
  CHECK(std::accumulate(w.weights.begin(), w.weights.end(), 0) == 640);

  const auto w3 = phi2(Candidate{{4, 1, 7}}, 7, 10);
  CHECK(w3.weights[4] == 3);
  CHECK(w3.weights[1] == 2);
  CHECK(w3.weights[7] == 2);

  const auto wa = phi2(Candidate{{5, 5}}, 4, 10);
  CHECK(wa.weights[5] == 4);
  CHECK(std::count_if(wa.weights.begin(), wa.weights.end(), [](int x) { return x > 0; }) == 1);

  CHECK_THROWS_AS(phi2(Candidate{{0, 1, 2}}, 2, 10), InvalidArgument);
  CHECK_THROWS_AS(phi2(Candidate{{0, 11}}, 4, 10), InvalidArgument);
}

TEST_CASE("phi1 inverse recovers the distinct multiset") {
  Rng rng(5);
  for (int t = 0; t < 200; ++t) {
    const int M = 1 + static_cast<int>(rng.below(8));
    const int N = M + static_cast<int>(rng.below(60));
    const auto c = random_candidate(12, static_cast<std::size_t>(M), rng);
    const auto w = phi2(c, N, 12);
    const auto back = phi1_inverse_check(w, M);
    REQUIRE(back.size() == static_cast<std::size_t>(M));
    auto a = c.genes, b = back.genes;
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
    std::sort(b.begin(), b.end());
    b.erase(std::unique(b.begin(), b.end()), b.end());
    CHECK(a == b);
    CHECK(phi2(back, N, 12).weights == w.weights);
  }

  WeightVector crowded{{1, 1, 1, 1}};
  CHECK_THROWS_AS(phi1_inverse_check(crowded, 3), NotRepresentable);

  WeightVector single{{0, 0, 9, 0}};
  CHECK(phi1_inverse_check(single, 3).genes == std::vector<FilterIndex>{2, 2, 2});
}

TEST_CASE("distinct count") {
  CHECK(distinct_count(Candidate{{3, 3, 3, 3}}) == 1);
  CHECK(distinct_count(Candidate{{0, 1, 2, 3}}) == 4);
  CHECK(distinct_count(Candidate{{1, 1, 2, 3}}) == 3);
}

TEST_CASE("simulator config JSON keys and validation") {
  const auto cfg = desk_config();
  const nlohmann::json j = cfg;
  for (const char* key : {"c_star", "photon_noise_alpha", "read_noise_sigma", "gain", "N", "M", "retrieval_iters", "K"})
    CHECK(j.contains(key));
  CHECK(j.size() == 8);
  const auto back = j.get<SimulatorConfig>();
  CHECK(back.gain == cfg.gain);
  CHECK(back.N == cfg.N);

  auto bad = cfg;
  bad.N = 4;
  CHECK_THROWS_AS(bad.validate(), InvalidConfiguration);
  bad = cfg;
  bad.retrieval_iters = 0;
  CHECK_THROWS_AS(bad.validate(), InvalidConfiguration);
}

TEST_CASE("zero noise retrieval is exact") {
  auto cfg = desk_config();
  cfg.photon_noise_alpha = 0.0;
  cfg.read_noise_sigma = 0.0;
  const Simulator sim(lib7(), cfg);
  Rng rng(11);
  for (int t = 0; t < 20; ++t) {
    const auto c = random_candidate(200, 8, rng);
    if (distinct_count(c) < 2) continue;
    const auto d = sim.sample_D(c, 77 + static_cast<std::uint64_t>(t));
    CHECK(d.value == 0.0);
    CHECK_FALSE(d.failed);
    CHECK(sim.evaluate(c, 5, 3).estimate == 0.0);
  }
}

TEST_CASE("sampling is deterministic and K=1 returns a single square") {
  const auto c = baseline();
  const auto a = desk().sample_D(c, 1234);
  const auto b = desk().sample_D(c, 1234);
  CHECK(a.value == b.value);
  const auto e = desk().evaluate(c, 1, 99);
  REQUIRE(e.samples.size() == 1);
  CHECK(e.estimate == e.samples[0]);
  CHECK(e.samples[0] == e.deviations[0] * e.deviations[0]);
  const auto big = desk().evaluate(c, 50, 7);
  CHECK(big.estimate == doctest::Approx(mean_of(big.samples)).epsilon(1e-15));
  CHECK(big.estimate >= 0.0);
  CHECK(sample_D(c, desk_config(), lib7(), 1234).value == a.value);
}

TEST_CASE("identical filters give a flagged failure") {
  const auto r = desk().sample_D(Candidate{{4, 4, 4, 4, 4, 4, 4, 4}}, 1);
  CHECK(r.failed);
  CHECK(r.value == 1.0);
  const auto e = desk().evaluate(Candidate{{4, 4, 4, 4, 4, 4, 4, 4}}, 3, 1);
  CHECK(e.failures == 3);
  CHECK(e.estimate == 1.0);
}

TEST_CASE("desk-scale baseline noise is near one percent") {
  const auto e = desk().evaluate(baseline(), 10000, 2024);
  const double sd = std::sqrt(var_of(e.deviations));
  CHECK(sd > 0.5e-2);
  CHECK(sd < 2e-2);
  CHECK(e.failures == 0);
}

TEST_CASE("retrieval error is approximately Gaussian") {
  const auto e = desk().evaluate(baseline(), 10000, 31);
  const auto& x = e.deviations;
  const double n = static_cast<double>(x.size());
  const double m = mean_of(x);
  double m2 = 0, m3 = 0, m4 = 0;
  for (double v : x) {
    const double d = v - m;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  const double skew = m3 / std::pow(m2, 1.5);
  const double exkurt = m4 / (m2 * m2) - 3.0;
  // Jarque-Bera statistic against the chi-square(2) 1% critical value.
  const double jb = n / 6.0 * (skew * skew + exkurt * exkurt / 4.0);
  CHECK(jb < 9.2103);
}

TEST_CASE("estimate variance scales as 1/K") {
  const auto c = baseline();
  std::vector<double> small, large;
  for (std::uint64_t r = 0; r < 200; ++r) {
    small.push_back(desk().evaluate(c, 100, derive_seed(500, {r})).estimate);
    large.push_back(desk().evaluate(c, 400, derive_seed(600, {r})).estimate);
  }
  const double ratio = var_of(small) / var_of(large);
  CHECK(ratio >= 2.5);
  CHECK(ratio <= 6.0);
}

TEST_CASE("dominating candidate has the lower objective at large K") {
  Rng rng(8);
  const auto base = baseline();
  const auto eb = desk().evaluate(base, 10000, 1);
  int compared = 0;
  for (int t = 0; t < 30 && compared < 3; ++t) {
    const auto c = random_candidate(200, 8, rng);
    const auto ec = desk().evaluate(c, 10000, 1);
    const double mb = mean_of(eb.deviations), mc = mean_of(ec.deviations);
    const double vb = var_of(eb.deviations), vc = var_of(ec.deviations);
    const bool c_dominates = mc * mc < mb * mb && vc < vb;
    const bool b_dominates = mb * mb < mc * mc && vb < vc;
    if (!c_dominates && !b_dominates) continue;
    ++compared;
    const double fb = desk().evaluate(base, 10000, 2).estimate;
    const double fc = desk().evaluate(c, 10000, 2).estimate;
    CHECK((fc < fb) == c_dominates);
  }
  CHECK(compared > 0);
}

TEST_CASE("trade-off bound") {
  CHECK(tradeoff_bound(1.5, 0.5) == doctest::Approx(1.0));
  CHECK(tradeoff_bound(2.0, 0.0) == doctest::Approx(1.0));
  CHECK(tradeoff_bound(1.0 + 1e-9, 0.3) < 1e-8);
  CHECK_THROWS_AS(tradeoff_bound(1.0, 0.5), InvalidArgument);
  CHECK_THROWS_AS(tradeoff_bound(2.0, 1.0), InvalidArgument);
  CHECK_THROWS_AS(tradeoff_bound(2.0, -0.1), InvalidArgument);
}
