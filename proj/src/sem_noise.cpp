#include "qsem/sem_noise.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace qsem {

namespace {

void require_finite(double v, const char* name) {
  if (!std::isfinite(v))
    throw std::invalid_argument(std::string(name) + " must be finite");
}

void require_nonneg(double v, const char* name) {
  require_finite(v, name);
  if (v < 0.0)
    throw std::invalid_argument(std::string(name) + " must be >= 0");
}

void require_positive(double v, const char* name) {
  require_finite(v, name);
  if (v <= 0.0)
    throw std::invalid_argument(std::string(name) + " must be > 0");
}

}  // namespace

SemMeasurementConfig::SemMeasurementConfig(double g0_, double omega0_,
                                           double p0_, double kappa_,
                                           double fano_, double rho_t_)
    : g0(g0_), omega0(omega0_), p0(p0_), kappa(kappa_), fano(fano_),
      rho_t(rho_t_) {
  require_finite(g0_, "g0");
  if (g0 < 1.0) throw std::invalid_argument("g0 must be >= 1");
  require_positive(omega0_, "omega0");
  require_positive(p0_, "p0");
  require_positive(kappa_, "kappa");
  require_positive(fano_, "fano");
  require_nonneg(rho_t_, "rho_t");
}

SampleParams::SampleParams(double sigma_a_, double sigma_s_, double n0_,
                           double i_e_, double i_s_, double area_,
                           double excitation_constant_)
    : sigma_a(sigma_a_), sigma_s(sigma_s_), n0(n0_), i_e(i_e_), i_s(i_s_),
      area(area_), excitation_constant(excitation_constant_) {
  require_nonneg(sigma_a_, "sigma_a");
  require_nonneg(sigma_s_, "sigma_s");
  require_nonneg(n0_, "n0");
  require_nonneg(i_e_, "i_e");
  require_nonneg(i_s_, "i_s");
  require_positive(area_, "area");
  require_nonneg(excitation_constant_, "excitation_constant");
}

double excited_population(const SampleParams& sp) {
  return sp.excitation_constant * sp.n0 * sp.i_e * sp.sigma_a;
}

double physical_gain(const SampleParams& sp) {
  return 1.0 + excited_population(sp) * sp.sigma_s / sp.area;
}

PhotonMoments amplifier_output_moments(double mean_in, double var_in,
                                       double gain) {
  require_nonneg(mean_in, "mean_in");
  require_nonneg(var_in, "var_in");
  require_finite(gain, "gain");
  if (gain < 1.0) throw std::invalid_argument("gain must be >= 1");
  const double mean = gain * mean_in + (gain - 1.0);
  const double variance = gain * gain * var_in +
                          gain * (gain - 1.0) * mean_in +
                          gain * (gain - 1.0);
  return PhotonMoments::from_mean_variance(mean, variance);
}

double modulated_gain(const SemMeasurementConfig& cfg, double t) {
  const double d = cfg.delta();
  return (1.0 + d) + d * std::cos(cfg.omega0 * t);
}

double signal_psd_peak(const SemMeasurementConfig& cfg) {
  const double g = cfg.g0 - 1.0;
  return g * g * cfg.p0 * cfg.p0 / 16.0;
}

PsdComponents noise_psd_at_sideband(const SemMeasurementConfig& cfg) {
  PsdComponents c;
  c.signal_peak = signal_psd_peak(cfg);
  c.quantum_floor = cfg.kappa * cfg.fano * cfg.p0 * cfg.g0;
  const double g = cfg.g0 - 1.0;
  c.technical_band = g * g * cfg.kappa * cfg.p0 * cfg.rho_t / 16.0;
  return c;
}

double technical_input_psd(const SemMeasurementConfig& cfg, double delta_omega,
                           double corner_omega) {
  require_positive(corner_omega, "corner_omega");
  const double x = delta_omega / corner_omega;
  return cfg.rho_t * cfg.kappa * cfg.p0 / (1.0 + x * x);
}

double snr(const SemMeasurementConfig& cfg) {
  const double g = cfg.g0 - 1.0;
  return g * g * cfg.p0 / cfg.kappa /
         (16.0 * cfg.fano * cfg.g0 + g * g * cfg.rho_t);
}

double snr_improvement(const SemMeasurementConfig& cfg) {
  const double g = cfg.g0 - 1.0;
  const double technical = g * g * cfg.rho_t / (16.0 * cfg.g0);
  return (1.0 + technical) / (cfg.fano + technical);
}

}  // namespace qsem
