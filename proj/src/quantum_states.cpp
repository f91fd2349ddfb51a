#include "qsem/quantum_states.hpp"

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

#include "qsem/text.hpp"

namespace qsem {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

double reduce_phase(double phase) {
  double p = std::fmod(phase, kTwoPi);
  if (p < 0.0) p += kTwoPi;
  return p;
}

void require_finite(double v, const char* name) {
  if (!std::isfinite(v))
    throw std::invalid_argument(std::string(name) + " must be finite");
}

void require_unit_interval(double v, const char* name) {
  require_finite(v, name);
  if (v < 0.0 || v > 1.0)
    throw std::invalid_argument(std::string(name) + " must be in [0, 1]");
}

// log(w0 e^{a0} + w1 e^{a1]) with w0, w1 >= 0, not both zero.
double log_mix_exp(double w0, double a0, double w1, double a1) {
  double m;
  if (w0 > 0.0 && w1 > 0.0)
    m = std::max(a0, a1);
  else if (w0 > 0.0)
    m = a0;
  else
    m = a1;
  const double t0 = (w0 > 0.0) ? w0 * std::exp(a0 - m) : 0.0;
  const double t1 = (w1 > 0.0) ? w1 * std::exp(a1 - m) : 0.0;
  return m + std::log(t0 + t1);
}

double branch_sign(OpaBranch branch) {
  return branch == OpaBranch::amplify ? 1.0 : -1.0;
}

// Ratio (w0 e^{4u} weighting pattern) used by both Fano expressions:
// (w0 + w1 e^{2a}) / (w0 + w1 e^{a}) generalised below. Exponentials are
// moved to log space once the argument is large enough to overflow the
// direct evaluation.
double stable_exp_ratio(double w_lo, double e_num, double w_hi_num,
                        double e_den, double w_hi_den) {
  // (w_lo + w_hi_num e^{e_num}) / (w_lo + w_hi_den e^{e_den})
  if (std::abs(e_num) > 40.0 || std::abs(e_den) > 40.0) {
    return std::exp(log_mix_exp(w_lo, 0.0, w_hi_num, e_num) -
                    log_mix_exp(w_lo, 0.0, w_hi_den, e_den));
  }
  return (w_lo + w_hi_num * std::exp(e_num)) /
         (w_lo + w_hi_den * std::exp(e_den));
}

}  // namespace

SqueezedCoherentParams::SqueezedCoherentParams(double alpha_mag_,
                                               double phase_, double r_)
    : alpha_mag(alpha_mag_), phase(reduce_phase(phase_)), r(r_) {
  require_finite(alpha_mag_, "alpha_mag");
  require_finite(phase_, "phase");
  require_finite(r_, "r");
  if (alpha_mag < 0.0)
    throw std::invalid_argument("alpha_mag must be non-negative");
}

double SqueezedCoherentParams::re_alpha() const {
  return alpha_mag * std::cos(phase);
}

double SqueezedCoherentParams::im_alpha() const {
  return alpha_mag * std::sin(phase);
}

OpaConfig::OpaConfig(double beta_, double chi_, double eta_p_, double eta_d_)
    : beta(beta_), chi(chi_), eta_p(eta_p_), eta_d(eta_d_) {
  require_finite(beta_, "beta");
  if (beta < 0.0) throw std::invalid_argument("beta must be non-negative");
  require_unit_interval(chi_, "chi");
  require_unit_interval(eta_p_, "eta_p");
  require_unit_interval(eta_d_, "eta_d");
}

PhotonMoments PhotonMoments::from_mean_variance(double mean, double variance) {
  if (!(mean >= 0.0) || !(variance >= 0.0))
    throw std::invalid_argument("moments must be non-negative");
  PhotonMoments m;
  m.mean = mean;
  m.variance = variance;
  m.fano = mean > 0.0 ? variance / mean : 1.0;
  return m;
}

PhotonMoments squeezed_moments(const SqueezedCoherentParams& s) {
  const double x = s.re_alpha();
  const double y = s.im_alpha();
  const double sh = std::sinh(s.r);
  const double sh2 = std::sinh(2.0 * s.r);
  const double mean =
      x * x * std::exp(-2.0 * s.r) + y * y * std::exp(2.0 * s.r) + sh * sh;
  const double variance = x * x * std::exp(-4.0 * s.r) +
                          y * y * std::exp(4.0 * s.r) + 0.5 * sh2 * sh2;
  return PhotonMoments::from_mean_variance(mean, variance);
}

double intensity_gain(const SqueezedCoherentParams& s) {
  if (s.alpha_mag <= 0.0)
    throw std::invalid_argument("intensity_gain needs a non-vacuum seed");
  const double c2 = std::cos(s.phase) * std::cos(s.phase);
  const double s2 = std::sin(s.phase) * std::sin(s.phase);
  if (std::abs(s.r) > 10.0)
    return std::exp(log_mix_exp(c2, -2.0 * s.r, s2, 2.0 * s.r));
  return c2 * std::exp(-2.0 * s.r) + s2 * std::exp(2.0 * s.r);
}

double single_mode_fano(const SqueezedCoherentParams& s) {
  if (s.alpha_mag <= 0.0)
    throw std::invalid_argument("single_mode_fano needs a non-vacuum seed");
  const double c2 = std::cos(s.phase) * std::cos(s.phase);
  const double s2 = std::sin(s.phase) * std::sin(s.phase);
  if (std::abs(s.r) > 10.0) {
    return std::exp(log_mix_exp(c2, -4.0 * s.r, s2, 4.0 * s.r) -
                    log_mix_exp(c2, -2.0 * s.r, s2, 2.0 * s.r));
  }
  const double num = c2 * std::exp(-4.0 * s.r) + s2 * std::exp(4.0 * s.r);
  const double den = c2 * std::exp(-2.0 * s.r) + s2 * std::exp(2.0 * s.r);
  return num / den;
}

double opa_output_power(double p_in, double p_pump, const OpaConfig& cfg,
                        OpaBranch branch) {
  if (!(p_in >= 0.0)) throw std::invalid_argument("p_in must be >= 0");
  if (!(p_pump >= 0.0)) throw std::invalid_argument("p_pump must be >= 0");
  const double u = branch_sign(branch) * cfg.beta * std::sqrt(p_pump);
  return (1.0 - cfg.chi + cfg.chi * std::exp(u)) * cfg.eta() * p_in;
}

double opa_output_fano(double p_pump, const OpaConfig& cfg, OpaBranch branch) {
  if (!(p_pump >= 0.0)) throw std::invalid_argument("p_pump must be >= 0");
  const double u = branch_sign(branch) * cfg.beta * std::sqrt(p_pump);
  const double ratio =
      stable_exp_ratio(1.0 - cfg.chi, 4.0 * u, cfg.chi, 2.0 * u, cfg.chi);
  return 1.0 - cfg.eta() + cfg.eta() * ratio;
}

PhotonMoments apply_loss(const PhotonMoments& m, double eta) {
  require_unit_interval(eta, "eta");
  const double mean = eta * m.mean;
  const double fano = 1.0 - eta + eta * m.fano;
  return PhotonMoments::from_mean_variance(mean, fano * mean);
}

PhotonMoments mode_mismatch_moments(const SqueezedCoherentParams& s,
                                    double chi) {
  require_unit_interval(chi, "chi");
  const SqueezedCoherentParams squeezed(s.alpha_mag * std::sqrt(chi), s.phase,
                                        s.r);
  const SqueezedCoherentParams untouched(s.alpha_mag * std::sqrt(1.0 - chi),
                                         s.phase, 0.0);
  const PhotonMoments a = squeezed_moments(squeezed);
  const PhotonMoments b = squeezed_moments(untouched);
  return PhotonMoments::from_mean_variance(a.mean + b.mean,
                                           a.variance + b.variance);
}

FockDistribution fock_number_distribution(const SqueezedCoherentParams& s,
                                          std::size_t cutoff) {
  if (cutoff < 1) throw std::invalid_argument("cutoff must be >= 1");

  const double ch = std::cosh(s.r);
  const double sh = std::sinh(s.r);
  const double th = std::tanh(s.r);
  const std::complex<double> alpha(s.re_alpha(), s.im_alpha());

  // Vacuum probability of the displaced squeezed state. The squeezing
  // transports the displacement to mu = Re[alpha] e^{-r} + i Im[alpha] e^{r}.
  const double mu_re = s.re_alpha() * std::exp(-s.r);
  const double mu_im = s.im_alpha() * std::exp(s.r);
  const double log_p0 = -mu_re * mu_re * (1.0 + th) -
                        mu_im * mu_im * (1.0 - th) - std::log(ch);
  if (log_p0 < -700.0)
    throw std::runtime_error(
        "fock_number_distribution: state too energetic for double-precision "
        "evaluation");
  const double p0 = std::exp(log_p0);

  // Unnormalised amplitudes from the annihilation condition
  // (cosh(r) a + sinh(r) a^dag - alpha) |psi> = 0, which gives
  // cosh(r) sqrt(n+1) u_{n+1} = alpha u_n - sinh(r) sqrt(n) u_{n-1}.
  std::vector<std::complex<double>> u(cutoff + 1);
  u[0] = 1.0;
  if (cutoff >= 1) u[1] = alpha / ch;
  for (std::size_t n = 1; n < cutoff; ++n) {
    u[n + 1] = (alpha * u[n] -
                sh * std::sqrt(static_cast<double>(n)) * u[n - 1]) /
               (ch * std::sqrt(static_cast<double>(n + 1)));
    if (!std::isfinite(u[n + 1].real()) || !std::isfinite(u[n + 1].imag()))
      throw std::runtime_error(
          "fock_number_distribution: amplitude overflow, reduce cutoff or "
          "state energy");
  }

  FockDistribution dist;
  dist.probabilities.resize(cutoff + 1);
  double total = 0.0;
  for (std::size_t n = 0; n <= cutoff; ++n) {
    dist.probabilities[n] = p0 * std::norm(u[n]);
    total += dist.probabilities[n];
  }
  dist.tail_mass = std::max(0.0, 1.0 - total);
  return dist;
}

PhotonMoments fock_oracle_moments(const SqueezedCoherentParams& s,
                                  std::size_t cutoff, double tail_tolerance) {
  const FockDistribution dist = fock_number_distribution(s, cutoff);
  if (dist.tail_mass > tail_tolerance)
    throw std::runtime_error(
        "fock_oracle_moments: cutoff " + std::to_string(cutoff) +
        " leaves tail mass " + format_double(dist.tail_mass) +
        " above tolerance " + format_double(tail_tolerance));

  double total = 0.0;
  double first = 0.0;
  double second = 0.0;
  for (std::size_t n = 0; n < dist.probabilities.size(); ++n) {
    const double p = dist.probabilities[n];
    const double k = static_cast<double>(n);
    total += p;
    first += k * p;
    second += k * k * p;
  }
  const double mean = first / total;
  const double variance = std::max(0.0, second / total - mean * mean);
  return PhotonMoments::from_mean_variance(mean, variance);
}

}  // namespace qsem
