#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "qsem/quantum_states.hpp"
#include "qsem/random.hpp"
#include "test_support.hpp"

using namespace qsem;
using qsem::test::close_rel;
using qsem::test::oracle_cutoff;
using qsem::test::rel_gap;

namespace {
constexpr double kPi = 3.141592653589793238462643383279;
}  // namespace

TEST_CASE("parameter validation and phase reduction") {
  CHECK_THROWS_AS(SqueezedCoherentParams(-1.0, 0.0, 0.1),
                  std::invalid_argument);
  const SqueezedCoherentParams wrapped(1.0, -kPi / 2.0, 0.0);
  CHECK(wrapped.phase == doctest::Approx(3.0 * kPi / 2.0));
  const SqueezedCoherentParams full_turn(1.0, 2.0 * kPi, 0.0);
  CHECK(full_turn.phase == doctest::Approx(0.0).epsilon(1e-12));

  CHECK_THROWS_AS(OpaConfig(1.0, 1.2, 1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(OpaConfig(-0.1, 0.5, 1.0, 1.0), std::invalid_argument);
  const OpaConfig opa(1.0, 0.58, 0.85, 0.85);
  CHECK(opa.eta() == doctest::Approx(0.7225));
}

TEST_CASE("squeezed vacuum moments") {
  const PhotonMoments m = squeezed_moments({0.0, 0.0, 0.5});
  CHECK(m.mean == doctest::Approx(0.27154).epsilon(1e-4));
  // exact squeezed-vacuum variance: 2 sinh^2 r cosh^2 r
  const double sh = std::sinh(0.5), ch = std::cosh(0.5);
  CHECK(m.variance == doctest::Approx(2.0 * sh * sh * ch * ch).epsilon(1e-12));
}

TEST_CASE("coherent state is Poissonian") {
  const PhotonMoments m = squeezed_moments({2.0, 0.0, 0.0});
  CHECK(m.mean == doctest::Approx(4.0));
  CHECK(m.variance == doctest::Approx(4.0));
  CHECK(m.fano == doctest::Approx(1.0));
}

TEST_CASE("displaced squeezed state against the Fock oracle") {
  const SqueezedCoherentParams s(2.0, 0.0, 0.5);
  const PhotonMoments closed = squeezed_moments(s);
  CHECK(closed.mean == doctest::Approx(1.7430581).epsilon(1e-6));

  const PhotonMoments oracle = fock_oracle_moments(s, 80);
  CHECK(rel_gap(closed.mean, oracle.mean) < 1e-6);
  CHECK(rel_gap(closed.variance, oracle.variance) < 1e-6);
  CHECK(rel_gap(closed.fano, oracle.fano) < 1e-6);
}

TEST_CASE("fock oracle reference points") {
  SUBCASE("vacuum") {
    const PhotonMoments m = fock_oracle_moments({0.0, 0.0, 0.0}, 8);
    CHECK(m.mean == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(m.variance == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("coherent, cutoff 60") {
    const PhotonMoments m = fock_oracle_moments({2.0, 0.0, 0.0}, 60);
    CHECK(std::abs(m.mean - 4.0) < 1e-8);
    CHECK(std::abs(m.variance - 4.0) < 1e-8);
  }
  SUBCASE("tail reported when the cutoff is too small") {
    CHECK_THROWS_AS(fock_oracle_moments({2.0, 0.0, 0.5}, 5),
                    std::runtime_error);
  }
}

TEST_CASE("closed form tracks the oracle over a parameter sweep") {
  Rng rng(7);
  for (int trial = 0; trial < 40; ++trial) {
    const double mag = 5.0 * rng.uniform();
    const double phase = 2.0 * kPi * rng.uniform();
    const double r = 3.0 * rng.uniform() - 1.5;
    const SqueezedCoherentParams s(mag, phase, r);
    const PhotonMoments closed = squeezed_moments(s);
    const PhotonMoments oracle =
        fock_oracle_moments(s, oracle_cutoff(closed, r));
    CHECK(close_rel(closed.mean, oracle.mean, 1e-6));
    CHECK(close_rel(closed.variance, oracle.variance, 1e-6));
  }
}

TEST_CASE("intensity gain branches") {
  CHECK(intensity_gain({1.0, 0.0, 0.0}) == doctest::Approx(1.0));
  CHECK(intensity_gain({1.0, 0.0, 0.5}) ==
        doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  CHECK(intensity_gain({1.0, kPi / 2.0, 0.5}) ==
        doctest::Approx(std::exp(1.0)).epsilon(1e-12));
  CHECK_THROWS_AS(intensity_gain({0.0, 0.0, 0.5}), std::invalid_argument);
}

TEST_CASE("single-mode Fano factor") {
  for (double phase : {0.0, 0.3, 1.2, kPi / 2.0})
    CHECK(single_mode_fano({1.0, phase, 0.0}) == doctest::Approx(1.0));
  CHECK(single_mode_fano({1.0, 0.0, 0.1}) ==
        doctest::Approx(std::exp(-0.2)).epsilon(1e-12));
  CHECK(single_mode_fano({1.0, kPi / 2.0, 0.1}) ==
        doctest::Approx(std::exp(0.2)).epsilon(1e-12));
  CHECK_THROWS_AS(single_mode_fano({0.0, 0.0, 0.1}), std::invalid_argument);
}

TEST_CASE("large-alpha approximation error is below a percent at alpha=10") {
  const SqueezedCoherentParams s(10.0, 0.0, 0.1);
  const double approx = single_mode_fano(s);
  const PhotonMoments exact = squeezed_moments(s);
  const PhotonMoments oracle = fock_oracle_moments(s, 260);
  CHECK(rel_gap(exact.fano, oracle.fano) < 1e-6);
  CHECK(rel_gap(approx, oracle.fano) < 0.01);
}

TEST_CASE("squeezing branch product identity") {
  for (int i = 0; i <= 40; ++i) {
    const double r = 2.0 * i / 40.0;
    const double product = single_mode_fano({1.0, 0.0, r}) *
                           single_mode_fano({1.0, kPi / 2.0, r});
    CHECK(std::abs(product - 1.0) < 1e-12);
  }
}

TEST_CASE("phase symmetry of the moments") {
  Rng rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    const double mag = 4.0 * rng.uniform();
    const double phase = 2.0 * kPi * rng.uniform();
    const double r = 2.0 * rng.uniform() - 1.0;
    const PhotonMoments base = squeezed_moments({mag, phase, r});
    const PhotonMoments shifted = squeezed_moments({mag, phase + kPi, r});
    const PhotonMoments mirrored = squeezed_moments({mag, -phase, r});
    CHECK(close_rel(base.mean, shifted.mean, 1e-12));
    CHECK(close_rel(base.variance, shifted.variance, 1e-12));
    CHECK(close_rel(base.mean, mirrored.mean, 1e-12));
    CHECK(close_rel(base.variance, mirrored.variance, 1e-12));
  }
}

TEST_CASE("classical OPA output power") {
  const OpaConfig no_overlap(1.0, 0.0, 0.9, 0.8);
  for (OpaBranch b : {OpaBranch::amplify, OpaBranch::deamplify})
    CHECK(opa_output_power(2.0, 5.0, no_overlap, b) ==
          doctest::Approx(0.72 * 2.0).epsilon(1e-12));

  const OpaConfig ideal(1.0, 1.0, 1.0, 1.0);
  CHECK(opa_output_power(1.0, 1.0, ideal, OpaBranch::deamplify) ==
        doctest::Approx(std::exp(-1.0)).epsilon(1e-12));

  const OpaConfig fitted(1.0, 0.58, 1.0, 1.0);
  CHECK(opa_output_power(1.0, 1.0, fitted, OpaBranch::amplify) ==
        doctest::Approx(0.42 + 0.58 * std::exp(1.0)).epsilon(1e-12));
  CHECK(opa_output_power(1.0, 1.0, fitted, OpaBranch::amplify) ==
        doctest::Approx(1.9966).epsilon(1e-4));
}

TEST_CASE("OPA Fano factor consistency and limits") {
  SUBCASE("no pump") {
    const OpaConfig cfg(1.3, 0.58, 0.85, 0.85);
    CHECK(opa_output_fano(0.0, cfg, OpaBranch::deamplify) ==
          doctest::Approx(1.0).epsilon(1e-15));
    CHECK(opa_output_fano(0.0, cfg, OpaBranch::amplify) ==
          doctest::Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("single-mode limit chi=1, eta=1") {
    const OpaConfig cfg(1.0, 1.0, 1.0, 1.0);
    for (int i = 0; i <= 30; ++i) {
      const double u = 3.0 * i / 30.0;
      const double pump = u * u;  // beta = 1
      const double deamp = opa_output_fano(pump, cfg, OpaBranch::deamplify);
      const double amp = opa_output_fano(pump, cfg, OpaBranch::amplify);
      CHECK(std::abs(deamp - single_mode_fano({1.0, 0.0, u})) < 1e-12);
      CHECK(std::abs(amp - single_mode_fano({1.0, kPi / 2.0, u})) < 1e-12);
    }
  }
  SUBCASE("deamplified branch stays at or below one") {
    Rng rng(3);
    for (int trial = 0; trial < 200; ++trial) {
      const OpaConfig cfg(2.0 * rng.uniform(), rng.uniform(), rng.uniform(),
                          rng.uniform());
      const double pump = 9.0 * rng.uniform();
      const double f = opa_output_fano(pump, cfg, OpaBranch::deamplify);
      CHECK(f <= 1.0 + 1e-12);
      if (cfg.eta() > 0.01 && cfg.chi > 0.01 && cfg.beta * std::sqrt(pump) >
          0.01)
        CHECK(f < 1.0);
    }
    const OpaConfig zero_eta(1.0, 0.5, 0.0, 1.0);
    CHECK(opa_output_fano(1.0, zero_eta, OpaBranch::deamplify) ==
          doctest::Approx(1.0).epsilon(1e-15));
    const OpaConfig zero_chi(1.0, 0.0, 0.85, 0.85);
    CHECK(opa_output_fano(1.0, zero_chi, OpaBranch::deamplify) ==
          doctest::Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("turning point at the fitted overlap and efficiency") {
    const OpaConfig cfg(1.0, 0.58, 0.85, 0.85);
    double best_f = 2.0;
    double best_u = 0.0;
    for (int i = 0; i <= 300; ++i) {
      const double u = 3.0 * i / 300.0;
      const double f = opa_output_fano(u * u, cfg, OpaBranch::deamplify);
      if (f < best_f) {
        best_f = f;
        best_u = u;
      }
    }
    CHECK(best_u > 0.05);   // interior minimum,
    CHECK(best_u < 2.95);   // not at either edge
    CHECK(best_f < 0.9);
    CHECK(std::abs(opa_output_fano(100.0, cfg, OpaBranch::deamplify) - 1.0) <
          1e-3);
  }
}

TEST_CASE("loss map") {
  const PhotonMoments m = PhotonMoments::from_mean_variance(10.0, 5.0);
  SUBCASE("identity at eta=1") {
    const PhotonMoments out = apply_loss(m, 1.0);
    CHECK(out.mean == doctest::Approx(10.0));
    CHECK(out.fano == doctest::Approx(0.5));
  }
  SUBCASE("interpolation toward Poissonian") {
    const PhotonMoments out = apply_loss(m, 0.5);
    CHECK(out.fano == doctest::Approx(0.75).epsilon(1e-12));
  }
  SUBCASE("frozen value at the compound efficiency") {
    PhotonMoments in = PhotonMoments::from_mean_variance(
        1.0, std::exp(-0.2));
    const PhotonMoments out = apply_loss(in, 0.7225);
    CHECK(out.fano == doctest::Approx(0.8690330).epsilon(1e-6));
  }
  SUBCASE("monoid action") {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
      const double mean = 20.0 * rng.uniform();
      const double fano = 2.0 * rng.uniform() + 1e-3;
      const double e1 = rng.uniform();
      const double e2 = rng.uniform();
      const PhotonMoments in =
          PhotonMoments::from_mean_variance(mean, fano * mean);
      const PhotonMoments two_step = apply_loss(apply_loss(in, e1), e2);
      const PhotonMoments one_step = apply_loss(in, e1 * e2);
      CHECK(close_rel(two_step.mean, one_step.mean, 1e-12));
      CHECK(close_rel(two_step.fano, one_step.fano, 1e-12));
    }
  }
}

TEST_CASE("loss map against binomial thinning of the oracle distribution") {
  const SqueezedCoherentParams s(2.0, 0.0, 0.5);
  const FockDistribution dist = fock_number_distribution(s, 80);
  const double eta = 0.7225;

  // cumulative distribution for inverse-CDF sampling
  std::vector<double> cdf(dist.probabilities.size());
  double acc = 0.0;
  for (std::size_t n = 0; n < cdf.size(); ++n) {
    acc += dist.probabilities[n];
    cdf[n] = acc;
  }

  Rng rng(20260808);
  const int draws = 400000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < draws; ++i) {
    const double u = rng.uniform() * acc;
    std::size_t n = 0;
    while (n + 1 < cdf.size() && cdf[n] < u) ++n;
    int detected = 0;
    for (std::size_t k = 0; k < n; ++k)
      if (rng.uniform() <= eta) ++detected;
    sum += detected;
    sum2 += static_cast<double>(detected) * detected;
  }
  const double mean = sum / draws;
  const double var = sum2 / draws - mean * mean;
  const PhotonMoments expected = apply_loss(squeezed_moments(s), eta);
  CHECK(mean == doctest::Approx(expected.mean).epsilon(0.01));
  CHECK(var / mean == doctest::Approx(expected.fano).epsilon(0.02));
}

TEST_CASE("mode mismatch composition") {
  const SqueezedCoherentParams s(2.0, 0.0, 0.5);
  SUBCASE("chi = 1 reproduces the single-mode moments") {
    const PhotonMoments full = mode_mismatch_moments(s, 1.0);
    const PhotonMoments direct = squeezed_moments(s);
    CHECK(close_rel(full.mean, direct.mean, 1e-12));
    CHECK(close_rel(full.variance, direct.variance, 1e-12));
  }
  SUBCASE("chi = 0 passes the seed through plus the squeezed vacuum") {
    const PhotonMoments none = mode_mismatch_moments(s, 0.0);
    const PhotonMoments vac = squeezed_moments({0.0, 0.0, 0.5});
    CHECK(none.mean == doctest::Approx(4.0 + vac.mean).epsilon(1e-12));
    CHECK(none.variance ==
          doctest::Approx(4.0 + vac.variance).epsilon(1e-12));
  }
  SUBCASE("large seed recovers the ratio structure of the detected Fano") {
    // compare the additive-moment composition against the approximate
    // closed form at a macroscopic seed amplitude
    const double chi = 0.58;
    const double r = 0.4;
    const SqueezedCoherentParams big(300.0, 0.0, r);
    const PhotonMoments mixed = mode_mismatch_moments(big, chi);
    const OpaConfig cfg(1.0, chi, 1.0, 1.0);
    const double approx = opa_output_fano(r * r, cfg, OpaBranch::deamplify);
    CHECK(mixed.fano == doctest::Approx(approx).epsilon(1e-3));
  }
}

TEST_CASE("log-space evaluation survives strong squeezing") {
  const double f_low = single_mode_fano({1.0, 0.0, 50.0});
  CHECK(std::isfinite(f_low));
  CHECK(f_low == doctest::Approx(std::exp(-100.0)).epsilon(1e-9));
  const double f_high = single_mode_fano({1.0, kPi / 2.0, 50.0});
  CHECK(std::isfinite(f_high));
  CHECK(f_high == doctest::Approx(std::exp(100.0)).epsilon(1e-9));
  const OpaConfig cfg(1.0, 0.58, 0.9, 0.9);
  CHECK(std::isfinite(opa_output_fano(2500.0, cfg, OpaBranch::amplify)));
  CHECK(std::isfinite(opa_output_fano(2500.0, cfg, OpaBranch::deamplify)));
}
