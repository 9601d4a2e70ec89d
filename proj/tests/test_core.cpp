#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "cphmm/errors.hpp"
#include "cphmm/logsum.hpp"
#include "cphmm/model.hpp"
#include "test_util.hpp"

using namespace cphmm;

TEST_CASE("logsumexp basics") {
  const double half = std::log(0.5);
  CHECK(std::abs(logsumexp(std::vector<double>{half, half})) < 1e-15);
  CHECK(logsumexp(std::vector<double>{-1000.0, -1000.0}) ==
        doctest::Approx(-1000.0 + std::log(2.0)).epsilon(1e-12));
  CHECK(logsumexp(std::vector<double>{0.0}) == 0.0);
  CHECK(is_log_zero(logsumexp(std::vector<double>{kLogZero, kLogZero})));
  CHECK(logsumexp2(kLogZero, -2.5) == -2.5);
  CHECK(is_log_zero(logsumexp2(kLogZero, kLogZero)));
}

TEST_CASE("logsumexp properties: shift invariance and naive agreement") {
  std::mt19937_64 g(11);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t k = 1 + g() % 8;
    std::vector<double> z(k);
    for (double& v : z) v = testutil::uniform(g, -30.0, 5.0);
    double naive = 0.0;
    for (double v : z) naive += std::exp(v);
    CHECK(logsumexp(z) == doctest::Approx(std::log(naive)).epsilon(1e-12));
    const double shift = testutil::uniform(g, -2000.0, 2000.0);
    std::vector<double> shifted = z;
    for (double& v : shifted) v += shift;
    CHECK(std::abs(logsumexp(shifted) - (logsumexp(z) + shift)) < 1e-9);
  }
}

TEST_CASE("poisson log emission") {
  const auto model = EmissionModel::poisson({1.0, 5.0});
  CHECK(log_emission(model, 0, 0.0) == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(log_emission(model, 1, 3.0) ==
        doctest::Approx(3.0 * std::log(5.0) - 5.0 - std::log(6.0))
            .epsilon(1e-13));
  CHECK(log_emission(model, 0, 7.0, true) == 0.0);  // missing
  CHECK_THROWS_AS(log_emission(model, 0, -1.0), InvalidObservationError);
  CHECK_THROWS_AS(log_emission(model, 0, 1.5), InvalidObservationError);
  CHECK_THROWS_AS(EmissionModel::poisson({1.0, 0.0}), Error);
}

TEST_CASE("normal log emission") {
  const auto model = EmissionModel::normal({0.0, 2.0}, 1.0);
  CHECK(log_emission(model, 0, 0.0) ==
        doctest::Approx(-0.9189385).epsilon(1e-7));
  CHECK(log_emission(model, 1, 2.0) ==
        doctest::Approx(-0.5 * std::log(2.0 * M_PI)).epsilon(1e-12));
  CHECK(log_emission(model, 1, -1.0, true) == 0.0);
  CHECK_THROWS_AS(EmissionModel::normal({0.0}, 0.0), Error);
  CHECK_THROWS_AS(EmissionModel::normal({0.0}, -1.0), Error);
}

TEST_CASE("log emission agrees with direct density evaluation") {
  std::mt19937_64 g(17);
  for (int rep = 0; rep < 1000; ++rep) {
    const double lambda = testutil::uniform(g, 0.1, 10.0);
    const auto pois = EmissionModel::poisson({lambda});
    const double k = std::floor(testutil::uniform(g, 0.0, 20.0));
    double factorial = 1.0;
    for (double j = 2.0; j <= k; ++j) factorial *= j;
    const double pmf = std::exp(-lambda) * std::pow(lambda, k) / factorial;
    CHECK(std::abs(log_emission(pois, 0, k) - std::log(pmf)) < 1e-12);

    const double mu = testutil::uniform(g, -5.0, 5.0);
    const double sigma = testutil::uniform(g, 0.1, 3.0);
    // keep the raw density representable; the direct evaluation underflows
    // outside a few sigma while the log form does not
    const double x = mu + sigma * testutil::uniform(g, -6.0, 6.0);
    const auto norm = EmissionModel::normal({mu}, sigma);
    const double density = std::exp(-(x - mu) * (x - mu) / (2 * sigma * sigma)) /
                           (sigma * std::sqrt(2.0 * M_PI));
    CHECK(std::abs(log_emission(norm, 0, x) - std::log(density)) < 1e-12);
  }
}

TEST_CASE("level transitions") {
  const auto chain = ChainSpec::level(3, {0.03, 0.2, 0.5});
  CHECK(transition_log(chain, 0, 0) ==
        doctest::Approx(std::log(0.97)).epsilon(1e-14));
  CHECK(transition_log(chain, 0, 1) ==
        doctest::Approx(std::log(0.015)).epsilon(1e-14));
  const auto two = ChainSpec::level(2, {0.5, 0.5});
  CHECK(transition_log(two, 0, 1) ==
        doctest::Approx(std::log(0.5)).epsilon(1e-14));
  // single state: nowhere to go
  const auto one = ChainSpec::level(1, {0.3});
  CHECK(transition_log(one, 0, 0) == 0.0);
  CHECK_THROWS_AS(ChainSpec::level(3, {0.1, 0.2}), Error);
  CHECK_THROWS_AS(ChainSpec::level(2, {0.1, 1.5}), Error);
  CHECK_THROWS_AS(ChainSpec::level(2, {0.1, 0.1}, {0.9, 0.3}), Error);
}

TEST_CASE("level transition rows sum to one") {
  std::mt19937_64 g(3);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t l = 1 + g() % 6;
    std::vector<double> eta(l);
    for (double& e : eta) e = testutil::uniform(g, 0.01, 0.99);
    const auto chain = ChainSpec::level(l, eta);
    for (std::size_t r = 0; r < l; ++r) {
      double row = 0.0;
      for (std::size_t s = 0; s < l; ++s)
        row += std::exp(transition_log(chain, r, s));
      CHECK(std::abs(row - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("segment transitions are a two-band matrix") {
  const auto chain = ChainSpec::segment(3, 0.5);
  CHECK(is_log_zero(transition_log(chain, 0, 2)));
  CHECK(is_log_zero(transition_log(chain, 1, 0)));
  CHECK(transition_log(chain, 0, 1) ==
        doctest::Approx(std::log(0.5)).epsilon(1e-14));
  CHECK(transition_log(chain, 2, 2) ==
        doctest::Approx(std::log(0.5)).epsilon(1e-14));
  for (std::size_t k = 1; k <= 6; ++k) {
    const auto c = ChainSpec::segment(k, 0.3);
    std::size_t finite = 0;
    for (std::size_t r = 0; r < k; ++r)
      for (std::size_t s = 0; s < k; ++s)
        if (!is_log_zero(transition_log(c, r, s))) ++finite;
    CHECK(finite <= 2 * k - 1);
  }
  CHECK_THROWS_AS(ChainSpec::segment(2, 0.0), Error);
  CHECK_THROWS_AS(ChainSpec::segment(2, 1.0), Error);
}

TEST_CASE("evidence constructors") {
  const Evidence seg = make_segment_evidence(5, 3);
  CHECK(seg.allowed(0, 0));
  CHECK_FALSE(seg.allowed(0, 1));
  CHECK_FALSE(seg.allowed(0, 2));
  for (std::size_t i = 1; i < 4; ++i)
    for (std::size_t s = 0; s < 3; ++s) CHECK(seg.allowed(i, s));
  CHECK_FALSE(seg.allowed(4, 0));
  CHECK_FALSE(seg.allowed(4, 1));
  CHECK(seg.allowed(4, 2));

  const Evidence lvl = make_level_evidence(1, 4);
  for (std::size_t s = 0; s < 4; ++s) CHECK(lvl.allowed(0, s));

  CHECK_THROWS_AS(make_segment_evidence(2, 3), InfeasibleEvidenceError);
}

TEST_CASE("evidence editing") {
  Evidence ev(4, 3);
  ev.restrict_to(2, {1});
  CHECK(ev.allowed_count(2) == 1);
  CHECK(ev.allowed(2, 1));
  ev.forbid(0, 0);
  CHECK(ev.allowed_count(0) == 2);
  CHECK_THROWS_AS(ev.restrict_to(1, {}), Error);
  CHECK_THROWS_AS(ev.restrict_to(1, {7}), Error);
}

TEST_CASE("observation series validation") {
  CHECK_THROWS_AS(ObservationSeries(std::vector<double>{}), Error);
  CHECK_THROWS_AS(ObservationSeries({1.0, 2.0}, {true}), Error);
  const ObservationSeries s({1.0, 2.0, 3.0}, {false, true, false});
  CHECK(s.size() == 3);
  CHECK(s.observed_count() == 2);
  CHECK(s.is_missing(1));
  CHECK_FALSE(s.is_missing(0));
}
