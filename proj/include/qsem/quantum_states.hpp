#pragma once
// Photon statistics of squeezed coherent states from single-pass optical
// parametric amplification: closed-form number moments, classical
// amplification and Fano-factor models with mode mismatch and loss, and a
// truncated Fock-basis reference implementation used to validate the
// closed forms.

#include <cstddef>
#include <vector>

namespace qsem {

// Coherent seed amplitude |alpha| >= 0, seed phase in radians (reduced to
// [0, 2pi) on construction) and signed squeezing parameter r.
struct SqueezedCoherentParams {
  SqueezedCoherentParams(double alpha_mag, double phase, double r);

  double alpha_mag;
  double phase;
  double r;

  double re_alpha() const;
  double im_alpha() const;
};

// Single-pass OPA description: effective nonlinearity beta (per sqrt of
// pump power), pump/seed mode overlap chi, propagation and detection
// efficiencies. Pump power enters the operations as a parameter.
struct OpaConfig {
  OpaConfig(double beta, double chi, double eta_p, double eta_d);

  double beta;
  double chi;
  double eta_p;
  double eta_d;

  double eta() const { return eta_p * eta_d; }
};

struct PhotonMoments {
  double mean = 0.0;
  double variance = 0.0;
  double fano = 1.0;  // variance/mean; defined as 1 when mean == 0

  static PhotonMoments from_mean_variance(double mean, double variance);
};

enum class OpaBranch { amplify, deamplify };

// Exact mean/variance/Fano of the squeezed coherent state. The variance
// keeps the full squeezed-vacuum term 2 sinh^2(r) cosh^2(r).
PhotonMoments squeezed_moments(const SqueezedCoherentParams& s);

// Large-|alpha| classical intensity gain cos^2(phi) e^{-2r} + sin^2(phi)
// e^{2r}; the spontaneous term is dropped. Rejects alpha_mag == 0.
double intensity_gain(const SqueezedCoherentParams& s);

// Large-|alpha| Fano factor approximation (spontaneous terms dropped).
// Rejects alpha_mag == 0; use squeezed_moments().fano for the exact value.
double single_mode_fano(const SqueezedCoherentParams& s);

// Classical output power of the mode-mismatched OPA:
// (1 - chi + chi exp(+-beta sqrt(p_pump))) * eta * p_in.
double opa_output_power(double p_in, double p_pump, const OpaConfig& cfg,
                        OpaBranch branch);

// Detected Fano factor of the mode-mismatched, lossy OPA output:
// 1 - eta + eta (1 - chi + chi e^{+-4u}) / (1 - chi + chi e^{+-2u}) with
// u = beta sqrt(p_pump). Both exponents share the branch sign.
double opa_output_fano(double p_pump, const OpaConfig& cfg, OpaBranch branch);

// Beam-splitter loss: mean -> eta mean, F -> 1 - eta + eta F.
PhotonMoments apply_loss(const PhotonMoments& m, double eta);

// Additive two-fraction mode-mismatch composition: a squeezed fraction of
// amplitude sqrt(chi) alpha and an untouched fraction sqrt(1-chi) alpha,
// treated as statistically independent.
PhotonMoments mode_mismatch_moments(const SqueezedCoherentParams& s,
                                    double chi);

// Photon-number distribution of the squeezed coherent state on the
// truncated basis n = 0..cutoff. tail_mass is the probability lying above
// the cutoff.
struct FockDistribution {
  std::vector<double> probabilities;
  double tail_mass = 0.0;
};

FockDistribution fock_number_distribution(const SqueezedCoherentParams& s,
                                          std::size_t cutoff);

// Brute-force moments from the truncated number distribution. Throws if
// the tail mass above the cutoff exceeds tail_tolerance.
PhotonMoments fock_oracle_moments(const SqueezedCoherentParams& s,
                                  std::size_t cutoff,
                                  double tail_tolerance = 1e-10);

}  // namespace qsem
