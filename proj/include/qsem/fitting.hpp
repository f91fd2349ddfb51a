#pragma once
// Parameter recovery for the classical amplification curve and the Fano
// factor curve: damped least squares (Levenberg-Marquardt) with analytic
// Jacobians. chi and eta live behind a logistic transform, beta behind a
// softplus, so the inner solver is unconstrained.

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace qsem {

// x holds pump powers (strictly increasing, >= 0). For amplification fits
// y_amp/y_deamp are normalised gains of the two branches; for Fano fits
// the observations sit in y_deamp (y_amp is ignored). y_err, when present,
// supplies per-point standard errors for inverse-variance weighting.
struct CurveDataset {
  std::vector<double> x;
  std::vector<double> y_amp;
  std::vector<double> y_deamp;
  std::vector<double> y_err;
};

struct FitResult {
  std::map<std::string, double> params;
  double residual_norm = 0.0;  // weighted sum of squared residuals
  int iterations = 0;
  bool converged = false;
  std::vector<std::string> param_names;
  std::vector<std::vector<double>> covariance;  // order of param_names
  std::vector<double> cost_history;             // accepted steps only
};

struct FitOptions {
  int max_iterations = 200;
  double gradient_tol = 1e-10;
  double step_tol = 1e-14;
};

enum class FanoAxis { pump_power, deamplification };

// Joint fit of both branches of the normalised amplification curve
// g(P) = 1 - chi + chi exp(+-beta sqrt(P)) with shared (beta, chi).
FitResult fit_amplification(const CurveDataset& data, double beta_init,
                            double chi_init, const FitOptions& opts = {});

struct FanoFitSetup {
  // Both fixed -> only eta is free; both empty -> (beta, chi, eta) jointly.
  std::optional<double> fixed_beta;
  std::optional<double> fixed_chi;
  double beta_init = 1.0;
  double chi_init = 0.5;
  double eta_init = 0.8;
  FanoAxis axis = FanoAxis::pump_power;
};

// Deamplified-branch Fano curve
// F = 1 - eta + eta (1 - chi + chi e^{-4u}) / (1 - chi + chi e^{-2u}),
// u = beta sqrt(P). With axis = deamplification the abscissa is the
// classical deamplification, inverted through the amplification model;
// that mode requires fixed (beta, chi) since beta cancels on that axis.
FitResult fit_fano_curve(const CurveDataset& data, const FanoFitSetup& setup,
                         const FitOptions& opts = {});

// Pump power solving 1 - chi + chi exp(-beta sqrt(P)) = g_meas on the
// deamplified branch, by monotone bisection to 1e-10 relative.
double invert_deamplification(double g_meas, double beta, double chi);

// CSV import: columns pump_power,y_amp,y_deamp[,y_err] or pump_power,y
// for single-series Fano data. A non-numeric first line is a header.
// Parse errors report the offending line number.
CurveDataset read_curve_csv(const std::string& path);

void write_fit_report(const FitResult& result, const std::string& path);

}  // namespace qsem
