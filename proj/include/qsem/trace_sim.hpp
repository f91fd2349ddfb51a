#pragma once
// Monte Carlo generation of per-pulse detected pulse energies for a pulsed
// probe with a prescribed Fano factor, modulated stimulated-emission gain,
// low-frequency technical noise, detection loss and electronic noise. One
// sample per laser pulse; the femtosecond envelope is never resolved.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qsem/sem_noise.hpp"

namespace qsem {

struct PulseTrainConfig {
  PulseTrainConfig(double rep_rate, double photons_per_pulse, double fano,
                   double duration, std::uint64_t seed);

  double rep_rate;           // pulses per second
  double photons_per_pulse;  // mean photons per pulse
  double fano;               // Fano factor of the probe at the detector input
  double duration;           // seconds
  std::uint64_t seed;
};

struct TechnicalNoiseConfig {
  TechnicalNoiseConfig(double rho_t, double corner_freq);

  double rho_t;        // DC technical-to-shot density ratio
  double corner_freq;  // low-pass corner, Hz
};

struct DetectorConfig {
  DetectorConfig(double efficiency, double electronic_noise_psd,
                 double bandwidth);

  double efficiency;            // quantum efficiency in [0, 1]
  double electronic_noise_psd;  // one-sided, photons^2 per Hz
  double bandwidth;             // Hz, metadata
};

struct TraceMetadata {
  std::optional<PulseTrainConfig> pulse;
  std::optional<SemMeasurementConfig> sem;
  std::optional<TechnicalNoiseConfig> technical;
  std::optional<DetectorConfig> detector;
  std::uint64_t clipped_samples = 0;
  std::string kind = "optical";  // "optical" or "electronic"
};

struct TraceRecord {
  std::vector<double> samples;  // detected per-pulse energies, photons
  double sample_rate = 0.0;     // samples per second (= rep_rate)
  TraceMetadata meta;
};

// Per-pulse energy sequence: shot noise as a Gaussian surrogate with
// variance fano * photons_per_pulse, multiplicative AR(1) technical noise
// calibrated against the shot density, modulated gain from sem (only g0
// and omega0 are read), Gaussian binomial thinning at the detector and
// additive white electronic noise. Deterministic for a given seed.
// Negative samples are clipped to zero; the run aborts if more than 1e-6
// of the samples clip.
TraceRecord simulate_trace(const PulseTrainConfig& pt,
                           const SemMeasurementConfig& sem,
                           const TechnicalNoiseConfig& tn,
                           const DetectorConfig& det);

// Power-matched pair: the reference repeats the squeezed configuration
// with fano = 1. Each trace consumes its own RNG stream.
std::pair<TraceRecord, TraceRecord> two_beam_experiment(
    const PulseTrainConfig& squeezed, const PulseTrainConfig& reference,
    const SemMeasurementConfig& sem, const TechnicalNoiseConfig& tn,
    const DetectorConfig& det);

// Dark trace: electronic noise only, no light and no clipping.
TraceRecord simulate_electronic_trace(const DetectorConfig& det,
                                      double rep_rate, double duration,
                                      std::uint64_t seed);

// Mean photons per pulse of a pulse train with the given average power,
// repetition rate and wavelength.
double photons_per_pulse_from_power(double avg_power_w, double rep_rate_hz,
                                    double wavelength_m);

// Binary trace export: <stem>.f64 holds little-endian doubles, the JSON
// sidecar <stem>.json carries sample_rate, configs, seed and clip count.
void write_trace_binary(const TraceRecord& rec, const std::string& stem);
TraceRecord read_trace_binary(const std::string& stem);

// Plain CSV (time_s, energy_photons) for small traces.
void write_trace_csv(const TraceRecord& rec, const std::string& path);

}  // namespace qsem
