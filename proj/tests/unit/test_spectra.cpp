#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <numbers>

#include "ofs/errors.hpp"
#include "ofs/random.hpp"
#include "ofs/spectra.hpp"

using namespace ofs;

namespace {

TransmissionProfile cosine(std::size_t Q, double k, double amp = 1.0, double offset = 0.0) {
  TransmissionProfile p;
  for (std::size_t q = 0; q < Q; ++q)
    p.values.push_back(offset + amp * std::cos(2.0 * std::numbers::pi * k * static_cast<double>(q) / static_cast<double>(Q)));
  return p;
}

const FilterLibrary& lib7() {
  static const FilterLibrary lib = generate_library(7, 200, 256);
  return lib;
}

}  // namespace

TEST_CASE("generated library respects clipping bounds and size") {
  const auto& lib = lib7();
  CHECK(lib.size() == 200);
  CHECK(lib.grid.q_count == 256);
  for (const auto& f : lib.filters) {
    REQUIRE(f.values.size() == 256);
    for (double v : f.values) {
      CHECK(v >= 0.01);
      CHECK(v <= 0.99);
    }
  }
  CHECK_NOTHROW(lib.validate());
}

TEST_CASE("library generation is deterministic") {
  const auto a = generate_library(7, 200, 256);
  const auto& b = lib7();
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].values == b[i].values);
  CHECK(a.absorption.values == b.absorption.values);
  const auto c = generate_library(8, 200, 256);
  CHECK(c[0].values != a[0].values);
}

TEST_CASE("library preconditions") {
  CHECK_THROWS_AS(generate_library(7, 1, 256), InvalidConfiguration);
  CHECK_THROWS_AS(generate_library(7, 200, 15), InvalidConfiguration);
}

TEST_CASE("wavelength grid samples are strictly increasing") {
  const auto s = lib7().grid.samples();
  REQUIRE(s.size() == 256);
  for (std::size_t i = 1; i < s.size(); ++i) CHECK(s[i] > s[i - 1]);
}

TEST_CASE("d1 identity, symmetry and hand-computed value") {
  const auto& lib = lib7();
  CHECK(d1(lib[3], lib[3], lib.absorption) == 0.0);
  CHECK(d1(lib[3], lib[9], lib.absorption) == d1(lib[9], lib[3], lib.absorption));

  AbsorptionSpectrum a{{0.5, 1.0, 2.0, 0.0}};
  TransmissionProfile x{{1.0, 1.0, 1.0, 1.0}};
  TransmissionProfile y{{0.0, 0.0, 1.0, 0.0}};
  CHECK(d1(x, y, a) == doctest::Approx(std::abs(0.875 - 2.0)).epsilon(1e-15));

  TransmissionProfile zero{{0.0, 0.0, 0.0, 0.0}};
  CHECK_THROWS_AS(d1(zero, x, a), DegenerateFilter);
}

TEST_CASE("second moment closed forms") {
  const std::size_t Q = 64;
  CHECK(second_moment(TransmissionProfile{std::vector<double>(Q, 0.375)}) == 0.0);
  CHECK(std::abs(second_moment(TransmissionProfile{std::vector<double>(Q, 0.4)})) < 1e-9);
  for (double k : {1.0, 5.0, 17.0, 31.0}) {
    const double expected = k * k * static_cast<double>(Q) / 2.0;
    CHECK(second_moment(cosine(Q, k)) == doctest::Approx(expected).epsilon(1e-10));
  }
  CHECK(d2(cosine(Q, 2), cosine(Q, 3)) == doctest::Approx(5.0 * Q / 2.0).epsilon(1e-10));
  CHECK_THROWS_AS(second_moment(std::span<const double>()), InvalidArgument);
}

TEST_CASE("second moment ignores constant offsets and grows with high-frequency content") {
  const std::size_t Q = 128;
  auto p = cosine(Q, 3, 0.2, 0.5);
  auto shifted = p;
  for (auto& v : shifted.values) v += 0.17;
  CHECK(second_moment(shifted) == doctest::Approx(second_moment(p)).epsilon(1e-12));

  auto sharper = p;
  const auto hf = cosine(Q, 50, 0.01);
  for (std::size_t q = 0; q < Q; ++q) sharper.values[q] += hf.values[q];
  CHECK(second_moment(sharper) > second_moment(p));
  CHECK(second_moment(lib7()[0]) >= 0.0);
}

TEST_CASE("d1 and d2 are metrics on library filters") {
  const auto& lib = lib7();
  Rng rng(99);
  for (int t = 0; t < 300; ++t) {
    const auto& x = lib[rng.below(lib.size())];
    const auto& y = lib[rng.below(lib.size())];
    const auto& z = lib[rng.below(lib.size())];
    CHECK(d1(x, z, lib.absorption) <= d1(x, y, lib.absorption) + d1(y, z, lib.absorption) + 1e-12);
    CHECK(d2(x, z) <= d2(x, y) + d2(y, z) + 1e-9);
    CHECK(d2(x, y) == d2(y, x));
  }
  for (std::size_t i = 0; i < 20; ++i)
    for (std::size_t j = 0; j < i; ++j) {
      CHECK(d1(lib[i], lib[j], lib.absorption) > 0.0);
      CHECK(d2(lib[i], lib[j]) > 0.0);
    }
}

TEST_CASE("baseline selection ranks by descending second moment") {
  const auto& lib = lib7();
  const auto all = baseline_selection(lib, lib.size());
  REQUIRE(all.size() == lib.size());
  for (std::size_t i = 1; i < all.size(); ++i) CHECK(second_moment(lib[all[i - 1]]) >= second_moment(lib[all[i]]));
  const auto top = baseline_selection(lib, 1);
  CHECK(top[0] == all[0]);
  CHECK_THROWS_AS(baseline_selection(lib, lib.size() + 1), InvalidConfiguration);

  FilterLibrary flat = lib;
  flat.filters = {TransmissionProfile{std::vector<double>(256, 0.25)}, TransmissionProfile{std::vector<double>(256, 0.5)},
                  TransmissionProfile{std::vector<double>(256, 0.75)}};
  for (const auto& f : flat.filters) CHECK(second_moment(f) == 0.0);
  CHECK(baseline_selection(flat, 3) == std::vector<std::size_t>{0, 1, 2});
}

TEST_CASE("library JSON round trip") {
  const auto& lib = lib7();
  const std::string path = "ofs_test_library.json";
  save_library(lib, path);
  const auto back = load_library(path);
  std::remove(path.c_str());
  REQUIRE(back.size() == lib.size());
  for (std::size_t i = 0; i < lib.size(); ++i) CHECK(back[i].values == lib[i].values);
  CHECK(back.absorption.values == lib.absorption.values);
  CHECK(back.seed == lib.seed);
}
