#include "ofs/instrument.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <nlohmann/json.hpp>

#include "ofs/errors.hpp"
#include "ofs/random.hpp"

namespace ofs {

namespace {

// Taylor terms kept for exp(-(c - c_star) a) around c_star.
constexpr std::size_t kTaylorTerms = 24;

}  // namespace

void SimulatorConfig::validate() const {
  if (!(c_star > 0.0)) throw InvalidConfiguration("simulator: c_star must be positive");
  if (!(photon_noise_alpha >= 0.0) || !(read_noise_sigma >= 0.0))
    throw InvalidConfiguration("simulator: noise parameters must be nonnegative");
  if (!(gain > 0.0)) throw InvalidConfiguration("simulator: gain must be positive");
  if (M < 1 || N < M) throw InvalidConfiguration("simulator: need N >= M >= 1");
  if (retrieval_iters < 1) throw InvalidConfiguration("simulator: retrieval_iters must be >= 1");
  if (K < 1) throw InvalidConfiguration("simulator: K must be >= 1");
}

SimulatorConfig desk_config() {
  SimulatorConfig cfg;
  cfg.c_star = 1.0;
  cfg.photon_noise_alpha = 1.0;
  cfg.read_noise_sigma = 30.0;
  cfg.gain = 15000.0;
  cfg.N = 64;
  cfg.M = 8;
  cfg.retrieval_iters = 2;
  cfg.K = 100;
  return cfg;
}

void to_json(nlohmann::json& j, const SimulatorConfig& cfg) {
  j = nlohmann::json{{"c_star", cfg.c_star},
                     {"photon_noise_alpha", cfg.photon_noise_alpha},
                     {"read_noise_sigma", cfg.read_noise_sigma},
                     {"gain", cfg.gain},
                     {"N", cfg.N},
                     {"M", cfg.M},
                     {"retrieval_iters", cfg.retrieval_iters},
                     {"K", cfg.K}};
}

void from_json(const nlohmann::json& j, SimulatorConfig& cfg) {
  cfg.c_star = j.at("c_star").get<double>();
  cfg.photon_noise_alpha = j.at("photon_noise_alpha").get<double>();
  cfg.read_noise_sigma = j.at("read_noise_sigma").get<double>();
  cfg.gain = j.at("gain").get<double>();
  cfg.N = j.at("N").get<int>();
  cfg.M = j.at("M").get<int>();
  cfg.retrieval_iters = j.at("retrieval_iters").get<int>();
  cfg.K = j.at("K").get<int>();
  cfg.validate();
}

WeightVector phi2(const Candidate& c, int N, std::size_t L) {
  const int M = static_cast<int>(c.size());
  if (M < 1 || N < M) throw InvalidArgument("phi2: need N >= M >= 1");
  check_candidate(c, L);
  const int k = N / M;
  const int r = N - k * M;
  WeightVector w;
  w.weights.assign(L, 0);
  for (int p = 0; p < M; ++p) w.weights[static_cast<std::size_t>(c[static_cast<std::size_t>(p)])] += k + (p < r ? 1 : 0);
  return w;
}

Candidate phi1_inverse_check(const WeightVector& w, int M) {
  if (M < 1) throw InvalidArgument("phi1_inverse_check: M must be positive");
  std::vector<std::size_t> nz;
  int N = 0;
  for (std::size_t i = 0; i < w.weights.size(); ++i) {
    if (w.weights[i] < 0) throw InvalidArgument("phi1_inverse_check: negative weight");
    if (w.weights[i] > 0) nz.push_back(i);
    N += w.weights[i];
  }
  if (nz.empty() || N < M) throw InvalidArgument("phi1_inverse_check: weights must sum to N >= M");
  if (nz.size() > static_cast<std::size_t>(M))
    throw NotRepresentable("phi1_inverse_check: more than M filters carry weight");

  const int k = N / M;
  const int r = N - k * M;

  // Copies n_i of filter i must satisfy n_i*k <= w_i <= n_i*(k+1).
  std::vector<int> copies(nz.size());
  int assigned = 0;
  bool even = true;
  for (std::size_t t = 0; t < nz.size(); ++t) {
    const int wi = w.weights[nz[t]];
    copies[t] = std::max(1, (wi + k) / (k + 1));
    if (copies[t] * k > wi) even = false;
    assigned += copies[t];
  }
  for (std::size_t t = 0; t < nz.size() && assigned < M; ++t) {
    const int wi = w.weights[nz[t]];
    const int room = wi / k - copies[t];
    const int add = std::clamp(room, 0, M - assigned);
    copies[t] += add;
    assigned += add;
  }
  if (assigned != M) even = false;

  if (!even) {
    // Not an image of phi2: fall back to largest-remainder apportionment so
    // the distinct-filter multiset is still recovered.
    std::vector<double> share(nz.size());
    assigned = 0;
    for (std::size_t t = 0; t < nz.size(); ++t) {
      share[t] = static_cast<double>(w.weights[nz[t]]) * M / N;
      copies[t] = std::max(1, static_cast<int>(share[t]));
      assigned += copies[t];
    }
    while (assigned > M) {
      auto it = std::max_element(copies.begin(), copies.end());
      --*it;
      --assigned;
    }
    std::vector<std::size_t> order(nz.size());
    for (std::size_t t = 0; t < order.size(); ++t) order[t] = t;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return share[a] - copies[a] > share[b] - copies[b]; });
    for (std::size_t t = 0; assigned < M; t = (t + 1) % order.size()) {
      ++copies[order[t]];
      ++assigned;
    }
  }

  // Positions [0, r) carry weight k+1; place each filter's surplus copies there.
  Candidate front, back;
  for (std::size_t t = 0; t < nz.size(); ++t) {
    const int surplus = even ? w.weights[nz[t]] - copies[t] * k : 0;
    for (int n = 0; n < copies[t]; ++n) {
      (n < surplus ? front : back).genes.push_back(static_cast<FilterIndex>(nz[t]));
    }
  }
  if (even && static_cast<int>(front.size()) != r) {
    // Surplus copies do not line up with the k+1 prefix; order by index so the
    // result is still deterministic.
    std::sort(front.genes.begin(), front.genes.end());
    std::sort(back.genes.begin(), back.genes.end());
  }
  front.genes.insert(front.genes.end(), back.genes.begin(), back.genes.end());
  return front;
}

std::size_t distinct_count(const Candidate& c) {
  auto g = c.genes;
  std::sort(g.begin(), g.end());
  return static_cast<std::size_t>(std::unique(g.begin(), g.end()) - g.begin());
}

void check_candidate(const Candidate& c, std::size_t L) {
  for (auto g : c.genes)
    if (g < 0 || static_cast<std::size_t>(g) >= L) throw InvalidArgument("candidate gene outside library");
}

Simulator::Simulator(const FilterLibrary& lib, SimulatorConfig cfg) : lib_(lib), cfg_(cfg) {
  cfg_.validate();
  const auto& a = lib_.absorption.values;
  const std::size_t Q = a.size();
  a_max_ = *std::max_element(a.begin(), a.end());
  expo_.resize(Q);
  for (std::size_t q = 0; q < Q; ++q) expo_[q] = std::exp(-cfg_.c_star * a[q]);

  signal_.resize(lib_.size());
  moments_.resize(lib_.size());
  std::vector<double> term(Q);
  for (std::size_t i = 0; i < lib_.size(); ++i) {
    const auto& T = lib_[i].values;
    if (T.size() != Q) throw InvalidConfiguration("simulator: profile length mismatch");
    for (std::size_t q = 0; q < Q; ++q) term[q] = T[q] * expo_[q];
    auto& mom = moments_[i];
    mom.resize(kTaylorTerms + 1);
    for (std::size_t n = 0; n <= kTaylorTerms; ++n) {
      double s = 0.0;
      for (std::size_t q = 0; q < Q; ++q) {
        s += term[q];
        term[q] *= a[q];
      }
      mom[n] = s;
    }
    signal_[i] = mom[0];
  }
}

Simulator::Response Simulator::response(std::size_t filter, double c) const {
  const double delta = c - cfg_.c_star;
  const auto& mom = moments_[filter];
  if (delta == 0.0) return {mom[0], -mom[1]};
  if (std::abs(delta) * a_max_ <= 1.0) {
    double s = 0.0, ds = 0.0, coef = 1.0;
    for (std::size_t n = 0; n < kTaylorTerms; ++n) {
      s += coef * mom[n];
      ds -= coef * mom[n + 1];
      coef *= -delta / static_cast<double>(n + 1);
    }
    return {s, ds};
  }
  const auto& a = lib_.absorption.values;
  const auto& T = lib_[filter].values;
  double s = 0.0, ds = 0.0;
  for (std::size_t q = 0; q < a.size(); ++q) {
    const double e = T[q] * std::exp(-c * a[q]);
    s += e;
    ds -= a[q] * e;
  }
  return {s, ds};
}

Deviation Simulator::sample_D(const Candidate& c, std::uint64_t noise_seed) const {
  const WeightVector w = phi2(c, cfg_.N, library_size());
  Rng rng(noise_seed);

  struct Pixel {
    std::size_t filter;
    double measured, weight;
  };
  std::vector<Pixel> pixels;
  pixels.reserve(c.size());
  for (std::size_t i = 0; i < w.weights.size(); ++i) {
    if (w.weights[i] == 0) continue;
    const double s = cfg_.gain * signal_[i];
    const double var =
        (cfg_.photon_noise_alpha * s + cfg_.read_noise_sigma * cfg_.read_noise_sigma) / static_cast<double>(w.weights[i]);
    const double y = var > 0.0 ? s + std::sqrt(var) * rng.normal() : s;
    pixels.push_back({i, y, var > 0.0 ? 1.0 / var : 1.0});
  }

  double conc = cfg_.c_star, scale = 1.0;
  for (int it = 0; it < cfg_.retrieval_iters; ++it) {
    double h00 = 0.0, h01 = 0.0, h11 = 0.0, b0 = 0.0, b1 = 0.0;
    for (const auto& p : pixels) {
      const auto resp = response(p.filter, conc);
      const double jc = scale * cfg_.gain * resp.ds;
      const double ja = cfg_.gain * resp.s;
      const double r = p.measured - scale * cfg_.gain * resp.s;
      h00 += p.weight * jc * jc;
      h01 += p.weight * jc * ja;
      h11 += p.weight * ja * ja;
      b0 += p.weight * jc * r;
      b1 += p.weight * ja * r;
    }
    const double det = h00 * h11 - h01 * h01;
    if (!(det > 1e-12 * h00 * h11)) return {1.0, true};
    conc += (h11 * b0 - h01 * b1) / det;
    scale += (h00 * b1 - h01 * b0) / det;
    if (!std::isfinite(conc) || !std::isfinite(scale)) return {1.0, true};
  }
  return {1.0 - conc / cfg_.c_star, false};
}

EvalResult Simulator::evaluate(const Candidate& c, std::size_t K, std::uint64_t stream_seed) const {
  if (K < 1) throw InvalidArgument("evaluate: K must be >= 1");
  EvalResult res;
  res.K = K;
  res.samples.resize(K);
  res.deviations.resize(K);
  double sum = 0.0;
  for (std::size_t i = 0; i < K; ++i) {
    const Deviation d = sample_D(c, derive_seed(stream_seed, {i + 1}));
    res.deviations[i] = d.value;
    res.samples[i] = d.value * d.value;
    res.failures += d.failed ? 1 : 0;
    sum += res.samples[i];
  }
  res.estimate = sum / static_cast<double>(K);
  return res;
}

Deviation sample_D(const Candidate& c, const SimulatorConfig& cfg, const FilterLibrary& lib, std::uint64_t noise_seed) {
  return Simulator(lib, cfg).sample_D(c, noise_seed);
}

EvalResult evaluate(const Candidate& c, std::size_t K, const SimulatorConfig& cfg, const FilterLibrary& lib,
                    std::uint64_t stream_seed) {
  return Simulator(lib, cfg).evaluate(c, K, stream_seed);
}

double tradeoff_bound(double var_ratio, double mean_ratio_sq) {
  if (!(var_ratio > 1.0)) throw InvalidArgument("tradeoff_bound: var_ratio must exceed 1");
  if (!(mean_ratio_sq >= 0.0 && mean_ratio_sq < 1.0))
    throw InvalidArgument("tradeoff_bound: mean_ratio_sq must lie in [0, 1)");
  return (var_ratio - 1.0) / (1.0 - mean_ratio_sq);
}

}  // namespace ofs
