#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "qsem/spectral.hpp"
#include "qsem/trace_sim.hpp"
#include "test_support.hpp"

using namespace qsem;

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

SemMeasurementConfig gain_cfg(double g0, double mod_freq_hz) {
  return SemMeasurementConfig(g0, kTwoPi * mod_freq_hz, 1e10, 1.0, 1.0, 0.0);
}

struct SampleStats {
  double mean;
  double variance;
};

SampleStats stats_of(const std::vector<double>& x) {
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  return {mean, var / static_cast<double>(x.size() - 1)};
}

}  // namespace

TEST_CASE("config validation") {
  CHECK_THROWS_AS(PulseTrainConfig(0.0, 1e6, 1.0, 1.0, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(PulseTrainConfig(1e6, -1.0, 1.0, 1.0, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(PulseTrainConfig(1e6, 1e6, 1.0, 1e-6, 1),
                  std::invalid_argument);  // fewer than two pulses
  CHECK_THROWS_AS(TechnicalNoiseConfig(-0.1, 1e3), std::invalid_argument);
  CHECK_THROWS_AS(DetectorConfig(1.2, 0.0, 1e8), std::invalid_argument);
}

TEST_CASE("simulate_trace rejects out-of-regime configs") {
  const TechnicalNoiseConfig tn(0.0, 1e3);
  const DetectorConfig det(1.0, 0.0, 1e8);
  SUBCASE("modulation above Nyquist") {
    const PulseTrainConfig pt(1e6, 1e6, 1.0, 0.01, 1);
    CHECK_THROWS_AS(simulate_trace(pt, gain_cfg(1.01, 6e5), tn, det),
                    std::invalid_argument);
  }
  SUBCASE("photon number below the Gaussian regime") {
    const PulseTrainConfig pt(1e6, 500.0, 1.0, 0.01, 1);
    CHECK_THROWS_AS(simulate_trace(pt, gain_cfg(1.01, 1e4), tn, det),
                    std::invalid_argument);
  }
  SUBCASE("technical corner above the modulation frequency") {
    const PulseTrainConfig pt(1e6, 1e6, 1.0, 0.01, 1);
    const TechnicalNoiseConfig bad(0.5, 2e4);
    CHECK_THROWS_AS(simulate_trace(pt, gain_cfg(1.01, 1e4), bad, det),
                    std::invalid_argument);
  }
}

TEST_CASE("deterministic traces") {
  const PulseTrainConfig pt(1e6, 1e6, 0.9, 0.05, 12345);
  const TechnicalNoiseConfig tn(0.5, 1e3);
  const DetectorConfig det(0.85, 1.0, 1e8);
  const auto a = simulate_trace(pt, gain_cfg(1.01, 1e4), tn, det);
  const auto b = simulate_trace(pt, gain_cfg(1.01, 1e4), tn, det);
  REQUIRE(a.samples.size() == b.samples.size());
  CHECK(a.samples == b.samples);  // bit identical
  CHECK(a.samples.size() == 50000);

  const PulseTrainConfig other_seed(1e6, 1e6, 0.9, 0.05, 54321);
  const auto c = simulate_trace(other_seed, gain_cfg(1.01, 1e4), tn, det);
  CHECK(a.samples != c.samples);
}

TEST_CASE("coherent trace reproduces Poissonian statistics") {
  const double mu = 1e4;
  const PulseTrainConfig pt(1e6, mu, 1.0, 0.2, 777);
  const TechnicalNoiseConfig tn(0.0, 1e3);
  const DetectorConfig det(1.0, 0.0, 1e8);
  const auto trace = simulate_trace(pt, gain_cfg(1.0, 1e4), tn, det);
  const auto [mean, variance] = stats_of(trace.samples);
  const std::size_t n = trace.samples.size();

  const double mean_se = std::sqrt(mu / static_cast<double>(n));
  CHECK(std::abs(mean - mu) < 4.0 * mean_se);
  const double fano = variance / mean;
  const double fano_se = std::sqrt(2.0 / static_cast<double>(n));
  CHECK(std::abs(fano - 1.0) < 4.0 * fano_se);
}

TEST_CASE("ensemble mean includes the average gain and the efficiency") {
  const double mu = 2e4;
  const double eta = 0.85;
  const double g0 = 1.2;  // strong modulation to make the average visible
  const PulseTrainConfig pt(1e6, mu, 1.0, 0.2, 991);
  const TechnicalNoiseConfig tn(0.0, 1e3);
  const DetectorConfig det(eta, 0.0, 1e8);
  const auto trace = simulate_trace(pt, gain_cfg(g0, 1e4), tn, det);
  const auto [mean, variance] = stats_of(trace.samples);
  const double expected = mu * (1.0 + 0.5 * (g0 - 1.0)) * eta;
  const double se = std::sqrt(variance / static_cast<double>(
                                  trace.samples.size()));
  CHECK(std::abs(mean - expected) < 4.0 * se);
}

TEST_CASE("detected Fano follows the thinning law") {
  const double mu = 1e4;
  const double fano_in = std::exp(-0.2);
  const double eta = 0.7225;
  const PulseTrainConfig pt(1e6, mu, fano_in, 0.4, 4242);
  const TechnicalNoiseConfig tn(0.0, 1e3);
  const DetectorConfig det(eta, 0.0, 1e8);
  const auto trace = simulate_trace(pt, gain_cfg(1.0, 1e4), tn, det);
  const auto [mean, variance] = stats_of(trace.samples);
  const double fano_detected = variance / mean;
  const double expected = 1.0 - eta + eta * fano_in;
  const double se = std::sqrt(2.0 / static_cast<double>(trace.samples.size()));
  CHECK(std::abs(fano_detected - expected) < 4.0 * se);
}

TEST_CASE("squeezed trace keeps its configured Fano factor") {
  const double fano_in = 0.8187;
  const PulseTrainConfig pt(1e6, 1e4, fano_in, 0.4, 31337);
  const TechnicalNoiseConfig tn(0.0, 1e3);
  const DetectorConfig det(1.0, 0.0, 1e8);
  const auto trace = simulate_trace(pt, gain_cfg(1.0, 1e4), tn, det);
  const auto [mean, variance] = stats_of(trace.samples);
  const double se = std::sqrt(2.0 / static_cast<double>(trace.samples.size()));
  CHECK(std::abs(variance / mean - fano_in) < 4.0 * se);
}

TEST_CASE("technical noise stays below its corner region") {
  const double mu = 1e4;
  const double corner = 1e3;
  const double rho_t = 30.0;
  const PulseTrainConfig pt(1e6, mu, 1.0, 0.6, 5150);
  const TechnicalNoiseConfig tn(rho_t, corner);
  const DetectorConfig det(1.0, 0.0, 1e8);
  const auto trace = simulate_trace(pt, gain_cfg(1.0, 1e4), tn, det);

  const auto psd = estimate_psd(trace, 200.0, 64, "rectangular");
  const double shot = 2.0 * mu / 1e6;

  const auto band_mean = [&](double lo, double hi) {
    double acc = 0.0;
    int count = 0;
    for (std::size_t k = 0; k < psd.freqs.size(); ++k)
      if (psd.freqs[k] >= lo && psd.freqs[k] <= hi) {
        acc += psd.values[k];
        ++count;
      }
    REQUIRE(count > 0);
    return acc / count;
  };

  // strong excess well below the corner
  const double low = band_mean(200.0, corner);
  CHECK(low > (1.0 + 0.3 * rho_t) * shot);
  // a few corners up, the excess has collapsed to a percent of its
  // baseband value and the floor is shot-dominated again
  const double high = band_mean(6.0 * corner, 20.0 * corner);
  CHECK(high - shot < 0.03 * (low - shot));
  CHECK(high < 1.4 * shot);
  CHECK(high > 0.85 * shot);
}

TEST_CASE("electronic noise adds the configured white floor") {
  const double psd_level = 4.0;
  const DetectorConfig det(1.0, psd_level, 1e8);
  const auto trace = simulate_electronic_trace(det, 1e6, 0.2, 404);
  const auto [mean, variance] = stats_of(trace.samples);
  CHECK(std::abs(mean) < 4.0 * std::sqrt(variance / trace.samples.size()));
  // per-sample variance psd * rate / 2
  CHECK(variance ==
        doctest::Approx(psd_level * 1e6 / 2.0).epsilon(0.05));
  CHECK(trace.meta.kind == "electronic");
}

TEST_CASE("two-beam experiment") {
  const double mu = 1e4;
  const TechnicalNoiseConfig tn(0.0, 1e3);
  const DetectorConfig det(1.0, 0.0, 1e8);
  const auto sem = gain_cfg(1.0, 1e4);

  SUBCASE("power mismatch rejected") {
    const PulseTrainConfig a(1e6, mu, 0.9, 0.01, 1);
    const PulseTrainConfig b(1e6, 2.0 * mu, 1.0, 0.01, 2);
    CHECK_THROWS_AS(two_beam_experiment(a, b, sem, tn, det),
                    std::invalid_argument);
  }
  SUBCASE("reference must be coherent") {
    const PulseTrainConfig a(1e6, mu, 0.9, 0.01, 1);
    const PulseTrainConfig b(1e6, mu, 0.9, 0.01, 2);
    CHECK_THROWS_AS(two_beam_experiment(a, b, sem, tn, det),
                    std::invalid_argument);
  }
  SUBCASE("identical seeds and unit Fano give identical traces") {
    const PulseTrainConfig a(1e6, mu, 1.0, 0.01, 99);
    const auto [t1, t2] = two_beam_experiment(a, a, sem, tn, det);
    CHECK(t1.samples == t2.samples);
  }
  SUBCASE("floors differ by the configured squeezing") {
    const PulseTrainConfig sq(1e6, mu, 0.912, 0.5, 11);
    const PulseTrainConfig ref(1e6, mu, 1.0, 0.5, 12);
    const auto [t_sq, t_ref] = two_beam_experiment(sq, ref, sem, tn, det);
    const auto psd_sq = estimate_psd(t_sq, 400.0, 100, "hann");
    const auto psd_ref = estimate_psd(t_ref, 400.0, 100, "hann");
    const auto est = estimate_fano(psd_sq, psd_ref, nullptr, 2e4, 4.5e5);
    CHECK(est.value == doctest::Approx(0.912).epsilon(0.01));
    CHECK(to_db(est.value, 1.0) == doctest::Approx(-0.4).epsilon(0.12));
  }
}

TEST_CASE("no peak without gain modulation") {
  const PulseTrainConfig pt(1e6, 1e4, 1.0, 0.5, 2024);
  const TechnicalNoiseConfig tn(0.0, 1e3);
  const DetectorConfig det(1.0, 0.0, 1e8);
  const auto trace = simulate_trace(pt, gain_cfg(1.0, 1e5), tn, det);
  const auto psd = estimate_psd(trace, 400.0, 100, "hann");
  const auto peak = extract_peak(psd, 1e5);
  // |peak| below 3 floor standard errors within the integration band
  const double floor_sigma =
      peak.local_floor / std::sqrt(100.0) * std::sqrt(5.0) *
      psd.bin_width_hz;
  CHECK(std::abs(peak.peak_power) < 3.0 * floor_sigma);
}

TEST_CASE("binary round trip preserves samples and provenance") {
  namespace fs = std::filesystem;
  const PulseTrainConfig pt(1e6, 1e4, 0.95, 0.01, 777);
  const TechnicalNoiseConfig tn(0.2, 1e3);
  const DetectorConfig det(0.9, 0.5, 1e8);
  const auto trace = simulate_trace(pt, gain_cfg(1.02, 1e4), tn, det);

  const std::string stem =
      (fs::temp_directory_path() / "qsem_trace_roundtrip").string();
  write_trace_binary(trace, stem);
  const auto loaded = read_trace_binary(stem);
  CHECK(loaded.samples == trace.samples);
  CHECK(loaded.sample_rate == trace.sample_rate);
  REQUIRE(loaded.meta.pulse.has_value());
  CHECK(loaded.meta.pulse->seed == 777);
  CHECK(loaded.meta.pulse->fano == doctest::Approx(0.95));
  REQUIRE(loaded.meta.detector.has_value());
  CHECK(loaded.meta.detector->efficiency == doctest::Approx(0.9));
  CHECK(loaded.meta.kind == "optical");
  std::remove((stem + ".f64").c_str());
  std::remove((stem + ".json").c_str());
}

TEST_CASE("csv export for small traces") {
  namespace fs = std::filesystem;
  const PulseTrainConfig pt(1e6, 1e4, 1.0, 1e-4, 5);
  const TechnicalNoiseConfig tn(0.0, 1e3);
  const DetectorConfig det(1.0, 0.0, 1e8);
  const auto trace = simulate_trace(pt, gain_cfg(1.0, 1e4), tn, det);
  const std::string path =
      (fs::temp_directory_path() / "qsem_trace.csv").string();
  write_trace_csv(trace, path);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "time_s,energy_photons");
  std::size_t rows = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == trace.samples.size());
  std::remove(path.c_str());
}

TEST_CASE("photon number from average power") {
  // 2 mW at 80 MHz and 820 nm
  const double mu = photons_per_pulse_from_power(2e-3, 8e7, 820e-9);
  CHECK(mu == doctest::Approx(1.032e8).epsilon(1e-3));
}
