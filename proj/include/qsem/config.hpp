#pragma once
// Experiment configuration: one key-value document with sections binds
// every module config. Parsing is strict (unknown sections or keys are
// rejected) and module bounds are re-validated by constructing the module
// configs. A few derived keys accept the literal "auto"; the resolved
// serialisation always carries concrete numbers.

#include <cstdint>
#include <optional>
#include <string>

#include "qsem/fitting.hpp"
#include "qsem/quantum_states.hpp"
#include "qsem/sem_noise.hpp"
#include "qsem/trace_sim.hpp"

namespace qsem {

struct ExperimentConfig {
  // [opa]
  double opa_beta = 1.0;
  double opa_chi = 0.58;
  double opa_eta_p = 0.85;
  double opa_eta_d = 0.85;
  double opa_pump_power = 1.0;

  // [pulse_train]  photons_per_pulse = auto derives from power/wavelength
  double rep_rate_hz = 8.0e7;
  std::optional<double> photons_per_pulse;
  double average_power_w = 2.0e-3;
  double wavelength_nm = 820.0;
  double probe_fano = 0.912;  // Fano of the probe at the detector input
  double duration_s = 0.1;
  std::uint64_t seed = 20260808;

  // [sem]  kappa/p0/fano = auto follow the emulated detection chain
  double g0 = 1.01;
  double mod_freq_hz = 4.0e6;
  std::optional<double> kappa;     // auto: 2 / rep_rate^2
  std::optional<double> p0;        // auto: efficiency * photons/pulse * rate
  std::optional<double> sem_fano;  // auto: 1 - eff + eff * probe_fano

  // [technical_noise]
  double rho_t = 1.0;
  std::optional<double> corner_freq_hz;  // auto: mod_freq / 8

  // [detector]  electronic auto: a tenth of the coherent shot floor
  double efficiency = 0.85;
  std::optional<double> electronic_noise_psd;
  double bandwidth_hz = 1.0e8;

  // [spectral]
  double rbw_hz = 1000.0;
  double vbw_hz = 10.0;
  std::string window = "hann";
  double band_lo_hz = 2.5e6;
  double band_hi_hz = 1.0e7;

  // [fit]
  int fit_max_iterations = 200;
  double fit_tolerance = 1e-10;
  std::string fano_axis = "pump_power";  // pump_power | deamplification
  std::string fano_shape = "fixed";      // fixed | free
  double fit_beta_init = 1.0;
  double fit_chi_init = 0.5;
  double fit_eta_init = 0.8;

  // [output]
  std::string output_directory = "qsem_out";

  double resolved_photons_per_pulse() const;
  double resolved_kappa() const;
  double resolved_p0() const;
  double resolved_sem_fano() const;
  double resolved_corner_freq_hz() const;
  double resolved_electronic_noise_psd() const;

  OpaConfig opa() const;
  PulseTrainConfig pulse_train() const;            // squeezed probe, seed
  PulseTrainConfig reference_pulse_train() const;  // fano = 1, seed + 1
  SemMeasurementConfig sem() const;
  SemMeasurementConfig sem_with_gain(double g0_override) const;
  TechnicalNoiseConfig technical() const;
  DetectorConfig detector() const;
  FitOptions fit_options() const;
  std::size_t spectral_averages() const;

  // Re-runs every module constructor plus the cross-config checks.
  void validate() const;
};

// Parse an INI-style document; origin labels error messages.
ExperimentConfig parse_config_text(const std::string& text,
                                   const std::string& origin);

// File load, then QSEM_<SECTION>_<KEY> environment overrides, then
// validation. Empty path loads the defaults (still env-overridable).
ExperimentConfig load_config(const std::string& path);

// Resolved snapshot: every key with its concrete value, reparseable.
std::string serialize_config(const ExperimentConfig& cfg);

}  // namespace qsem
