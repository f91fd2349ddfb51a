#pragma once
// Analytical model of the modulated stimulated-emission gain measurement:
// phase-insensitive amplifier moments, signal/noise spectral components at
// the modulation sideband, SNR, and the squeezing improvement factor.

#include "qsem/quantum_states.hpp"

namespace qsem {

// Parameters of the sideband measurement. kappa is the free instrument
// scale that maps photon flux to PSD units; fano is the Fano factor of the
// detected probe; rho_t is the ratio of DC technical noise density to the
// coherent shot-noise density.
struct SemMeasurementConfig {
  SemMeasurementConfig(double g0, double omega0, double p0, double kappa,
                       double fano, double rho_t);

  double g0;      // peak gain, >= 1
  double omega0;  // modulation angular frequency, rad/s
  double p0;      // mean photon flux, photons/s
  double kappa;   // PSD units per unit photon flux
  double fano;    // detected Fano factor
  double rho_t;   // technical-to-shot noise ratio at DC

  double delta() const { return 0.5 * (g0 - 1.0); }
};

// Microscopic sample description. excitation_constant is the free
// proportionality scalar in N2 = c N0 I_E sigma_a.
struct SampleParams {
  SampleParams(double sigma_a, double sigma_s, double n0, double i_e,
               double i_s, double area, double excitation_constant = 1.0);

  double sigma_a;
  double sigma_s;
  double n0;
  double i_e;
  double i_s;
  double area;
  double excitation_constant;
};

// Spectral components at the modulation sideband. signal_peak is the
// deterministic spectral weight at omega0 (per-side convention of the
// two-sided decomposition); quantum_floor and technical_band are noise
// densities in the same kappa-scaled units.
struct PsdComponents {
  double signal_peak = 0.0;
  double quantum_floor = 0.0;
  double technical_band = 0.0;
};

// Excited population N2 = c N0 I_E sigma_a.
double excited_population(const SampleParams& sp);

// Stimulated-emission gain G = 1 + N2 sigma_s / A.
double physical_gain(const SampleParams& sp);

// Phase-insensitive amplifier output moments:
// mean -> g mean + (g - 1),
// var  -> g^2 var + g(g-1) mean + g(g-1). All three terms retained.
PhotonMoments amplifier_output_moments(double mean_in, double var_in,
                                       double gain);

// Time-dependent gain (1 + Delta) + Delta cos(omega0 t), Delta=(g0-1)/2.
double modulated_gain(const SemMeasurementConfig& cfg, double t);

// Deterministic sideband weight (g0 - 1)^2 p0^2 / 16.
double signal_psd_peak(const SemMeasurementConfig& cfg);

// Noise densities at the sideband centre: quantum_floor = kappa F p0 g0,
// technical_band = (g0 - 1)^2 kappa p0 rho_t / 16. signal_peak is filled
// in as well so one call describes the whole sideband.
PsdComponents noise_psd_at_sideband(const SemMeasurementConfig& cfg);

// Single-pole model of the baseband technical noise density at angular
// offset delta_omega from DC: rho_t kappa p0 / (1 + (delta_omega/corner)^2).
double technical_input_psd(const SemMeasurementConfig& cfg, double delta_omega,
                           double corner_omega);

// SNR = (g0-1)^2 (p0/kappa)^{-1}... evaluated exactly as
// (g0-1)^2 p0/kappa / (16 F g0 + (g0-1)^2 rho_t).
double snr(const SemMeasurementConfig& cfg);

// Ratio of squeezed-probe SNR to coherent-probe SNR at equal power:
// (1 + (g0-1)^2 rho_t/(16 g0)) / (F + (g0-1)^2 rho_t/(16 g0)).
double snr_improvement(const SemMeasurementConfig& cfg);

}  // namespace qsem
