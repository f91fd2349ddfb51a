#include "qsem/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <stdexcept>

#include "qsem/errors.hpp"
#include "qsem/text.hpp"

namespace qsem {

namespace {

// ---- bound transforms ----------------------------------------------------

double sigmoid(double u) {
  if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
  const double e = std::exp(u);
  return e / (1.0 + e);
}

double logit(double p) {
  p = std::clamp(p, 1e-9, 1.0 - 1e-9);
  return std::log(p / (1.0 - p));
}

double softplus(double u) {
  if (u > 30.0) return u;
  return std::log1p(std::exp(u));
}

double softplus_inv(double p) {
  p = std::max(p, 1e-9);
  if (p > 30.0) return p;
  return std::log(std::expm1(p));
}

double softplus_slope(double u) { return sigmoid(u); }

// ---- small dense solver ----------------------------------------------------

bool solve_linear(std::vector<double> a, std::vector<double> b,
                  std::size_t n, std::vector<double>& out) {
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t row = col + 1; row < n; ++row)
      if (std::abs(a[row * n + col]) > std::abs(a[pivot * n + col]))
        pivot = row;
    if (std::abs(a[pivot * n + col]) < 1e-300) return false;
    if (pivot != col) {
      for (std::size_t k = 0; k < n; ++k)
        std::swap(a[col * n + k], a[pivot * n + k]);
      std::swap(b[col], b[pivot]);
    }
    const double inv = 1.0 / a[col * n + col];
    for (std::size_t row = col + 1; row < n; ++row) {
      const double f = a[row * n + col] * inv;
      if (f == 0.0) continue;
      for (std::size_t k = col; k < n; ++k) a[row * n + k] -= f * a[col * n + k];
      b[row] -= f * b[col];
    }
  }
  out.assign(n, 0.0);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= a[i * n + k] * out[k];
    out[i] = s / a[i * n + i];
  }
  return true;
}

// ---- Levenberg-Marquardt core ----------------------------------------------

struct LmEval {
  std::vector<double> residuals;
  std::vector<double> jacobian;  // m x n, row-major
};

using EvalFn = std::function<void(const std::vector<double>&, LmEval&)>;

struct LmOutcome {
  std::vector<double> u;
  double cost = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> cost_history;
  std::vector<double> jtj;  // at the solution
  std::size_t m = 0;
};

double cost_of(const std::vector<double>& r) {
  double c = 0.0;
  for (double v : r) c += v * v;
  return c;
}

LmOutcome lm_minimize(const EvalFn& eval, std::vector<double> u,
                      std::size_t m, const FitOptions& opts) {
  const std::size_t n = u.size();
  LmEval cur{std::vector<double>(m), std::vector<double>(m * n)};
  LmEval trial{std::vector<double>(m), std::vector<double>(m * n)};
  eval(u, cur);
  double cost = cost_of(cur.residuals);

  LmOutcome out;
  out.cost_history.push_back(cost);

  double lambda = 1e-3;
  int iter = 0;
  bool converged = false;

  std::vector<double> grad(n), hess(n * n), step(n), u_trial(n);
  while (iter < opts.max_iterations) {
    ++iter;
    // gradient and normal matrix
    std::fill(grad.begin(), grad.end(), 0.0);
    std::fill(hess.begin(), hess.end(), 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t a = 0; a < n; ++a) {
        const double ja = cur.jacobian[i * n + a];
        grad[a] += ja * cur.residuals[i];
        for (std::size_t b = a; b < n; ++b)
          hess[a * n + b] += ja * cur.jacobian[i * n + b];
      }
    }
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < a; ++b) hess[a * n + b] = hess[b * n + a];

    double gmax = 0.0;
    for (double g : grad) gmax = std::max(gmax, std::abs(g));
    if (gmax < opts.gradient_tol) {
      converged = true;
      break;
    }

    double diag_max = 0.0;
    for (std::size_t a = 0; a < n; ++a)
      diag_max = std::max(diag_max, hess[a * n + a]);

    bool accepted = false;
    while (iter <= opts.max_iterations) {
      std::vector<double> damped = hess;
      for (std::size_t a = 0; a < n; ++a)
        damped[a * n + a] +=
            lambda * (hess[a * n + a] + 1e-12 * (diag_max + 1.0));
      std::vector<double> rhs(n);
      for (std::size_t a = 0; a < n; ++a) rhs[a] = -grad[a];
      if (!solve_linear(damped, rhs, n, step)) {
        lambda *= 4.0;
        if (lambda > 1e14) break;
        continue;
      }
      for (std::size_t a = 0; a < n; ++a) u_trial[a] = u[a] + step[a];
      eval(u_trial, trial);
      const double trial_cost = cost_of(trial.residuals);
      if (std::isfinite(trial_cost) && trial_cost <= cost) {
        // accepted step: cost never increases
        u = u_trial;
        std::swap(cur.residuals, trial.residuals);
        std::swap(cur.jacobian, trial.jacobian);
        const double drop = cost - trial_cost;
        cost = trial_cost;
        out.cost_history.push_back(cost);
        lambda = std::max(lambda / 3.0, 1e-14);
        accepted = true;
        double smax = 0.0, umax = 0.0;
        for (std::size_t a = 0; a < n; ++a) {
          smax = std::max(smax, std::abs(step[a]));
          umax = std::max(umax, std::abs(u[a]));
        }
        if (smax < opts.step_tol * (1.0 + umax) ||
            drop < opts.step_tol * (1.0 + cost))
          iter = opts.max_iterations;  // stalled; gradient check decides
        break;
      }
      lambda *= 4.0;
      if (lambda > 1e14) break;
    }
    if (!accepted) break;
  }

  if (!converged) {
    // final gradient check (covers the stall exits)
    std::vector<double> grad2(n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t a = 0; a < n; ++a)
        grad2[a] += cur.jacobian[i * n + a] * cur.residuals[i];
    double gmax = 0.0;
    for (double g : grad2) gmax = std::max(gmax, std::abs(g));
    converged = gmax < std::max(opts.gradient_tol, 1e-8 * (1.0 + cost));
  }

  out.u = u;
  out.cost = cost;
  out.iterations = iter;
  out.converged = converged;
  out.m = m;
  out.jtj.assign(n * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b)
        out.jtj[a * n + b] += cur.jacobian[i * n + a] * cur.jacobian[i * n + b];
  return out;
}

std::vector<std::vector<double>> covariance_from(
    const LmOutcome& lm, const std::vector<double>& dext_du, bool weighted) {
  const std::size_t n = dext_du.size();
  std::vector<std::vector<double>> cov;
  std::vector<double> inv(n * n, 0.0);
  for (std::size_t col = 0; col < n; ++col) {
    std::vector<double> e(n, 0.0);
    e[col] = 1.0;
    std::vector<double> x;
    if (!solve_linear(lm.jtj, e, n, x)) return cov;  // leave empty
    for (std::size_t row = 0; row < n; ++row) inv[row * n + col] = x[row];
  }
  const double dof =
      static_cast<double>(lm.m > n ? lm.m - n : 1);
  const double scale = weighted ? 1.0 : lm.cost / dof;
  cov.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      cov[a][b] = scale * dext_du[a] * inv[a * n + b] * dext_du[b];
  return cov;
}

// ---- dataset checks ---------------------------------------------------------

void validate_common(const CurveDataset& data, bool need_both_branches) {
  const std::size_t n = data.x.size();
  if (n == 0) throw std::invalid_argument("dataset is empty");
  for (double v : data.x)
    if (!std::isfinite(v) || v < 0.0)
      throw std::invalid_argument("pump powers must be finite and >= 0");
  if (need_both_branches &&
      (data.y_amp.size() != n || data.y_deamp.size() != n))
    throw std::invalid_argument(
        "dataset needs both y_amp and y_deamp for a joint branch fit");
  if (!need_both_branches && data.y_deamp.size() != n)
    throw std::invalid_argument("dataset needs y_deamp observations");
  if (!data.y_err.empty()) {
    if (data.y_err.size() != n)
      throw std::invalid_argument("y_err length mismatch");
    for (double e : data.y_err)
      if (!(e > 0.0)) throw std::invalid_argument("y_err must be > 0");
  }
  std::set<double> distinct(data.x.begin(), data.x.end());
  if (distinct.size() < 3)
    throw std::invalid_argument(
        "degenerate data: need at least 3 distinct pump powers");
}

}  // namespace

FitResult fit_amplification(const CurveDataset& data, double beta_init,
                            double chi_init, const FitOptions& opts) {
  validate_common(data, true);
  const std::size_t npts = data.x.size();
  const std::size_t m = 2 * npts;

  auto weight = [&](std::size_t i) {
    return data.y_err.empty() ? 1.0 : 1.0 / data.y_err[i];
  };

  const EvalFn eval = [&](const std::vector<double>& u, LmEval& ev) {
    const double beta = softplus(u[0]);
    const double chi = sigmoid(u[1]);
    const double dbeta = softplus_slope(u[0]);
    const double dchi = chi * (1.0 - chi);
    for (std::size_t i = 0; i < npts; ++i) {
      const double sx = std::sqrt(data.x[i]);
      const double w = weight(i);
      for (int half = 0; half < 2; ++half) {
        const double sgn = half == 0 ? 1.0 : -1.0;
        const double y = half == 0 ? data.y_amp[i] : data.y_deamp[i];
        const double e = std::exp(sgn * beta * sx);
        const double model = 1.0 - chi + chi * e;
        const std::size_t row = 2 * i + static_cast<std::size_t>(half);
        ev.residuals[row] = (model - y) * w;
        ev.jacobian[row * 2 + 0] = chi * sgn * sx * e * dbeta * w;
        ev.jacobian[row * 2 + 1] = (e - 1.0) * dchi * w;
      }
    }
  };

  const std::vector<double> u0 = {softplus_inv(beta_init), logit(chi_init)};
  const LmOutcome lm = lm_minimize(eval, u0, m, opts);

  FitResult res;
  res.param_names = {"beta", "chi"};
  res.params["beta"] = softplus(lm.u[0]);
  res.params["chi"] = sigmoid(lm.u[1]);
  res.residual_norm = lm.cost;
  res.iterations = lm.iterations;
  res.converged = lm.converged;
  res.cost_history = lm.cost_history;
  const std::vector<double> slopes = {
      softplus_slope(lm.u[0]),
      sigmoid(lm.u[1]) * (1.0 - sigmoid(lm.u[1]))};
  // covariance reported in (beta, chi) space
  std::vector<double> unit(slopes.size());
  for (std::size_t i = 0; i < slopes.size(); ++i)
    unit[i] = slopes[i] > 0.0 ? 1.0 / slopes[i] : 0.0;
  res.covariance = covariance_from(lm, unit, !data.y_err.empty());
  return res;
}

FitResult fit_fano_curve(const CurveDataset& data, const FanoFitSetup& setup,
                         const FitOptions& opts) {
  validate_common(data, false);
  const bool fixed = setup.fixed_beta.has_value() ||
                     setup.fixed_chi.has_value();
  if (fixed && (!setup.fixed_beta || !setup.fixed_chi))
    throw std::invalid_argument(
        "fix beta and chi together or leave both free");
  if (!fixed && setup.axis == FanoAxis::deamplification)
    throw std::invalid_argument(
        "beta is not identifiable on the deamplification axis; supply fixed "
        "(beta, chi)");

  // On the deamplification axis the abscissa is a measured gain; map it
  // back to pump power once, with the fixed shape parameters.
  std::vector<double> pump(data.x.size());
  if (setup.axis == FanoAxis::deamplification) {
    for (std::size_t i = 0; i < data.x.size(); ++i) {
      try {
        pump[i] = invert_deamplification(data.x[i], *setup.fixed_beta,
                                         *setup.fixed_chi);
      } catch (const std::invalid_argument& e) {
        throw std::invalid_argument("data point " + std::to_string(i) + ": " +
                                    e.what());
      }
    }
  } else {
    pump = data.x;
  }

  const std::size_t npts = pump.size();
  auto weight = [&](std::size_t i) {
    return data.y_err.empty() ? 1.0 : 1.0 / data.y_err[i];
  };

  const std::size_t n = fixed ? 1 : 3;  // eta | beta, chi, eta
  const EvalFn eval = [&](const std::vector<double>& u, LmEval& ev) {
    const double beta = fixed ? *setup.fixed_beta : softplus(u[0]);
    const double chi = fixed ? *setup.fixed_chi : sigmoid(u[1]);
    const double eta = fixed ? sigmoid(u[0]) : sigmoid(u[2]);
    const double dbeta = fixed ? 0.0 : softplus_slope(u[0]);
    const double dchi = fixed ? 0.0 : chi * (1.0 - chi);
    const double deta = eta * (1.0 - eta);
    for (std::size_t i = 0; i < npts; ++i) {
      const double sx = std::sqrt(pump[i]);
      const double e2 = std::exp(-2.0 * beta * sx);
      const double e4 = std::exp(-4.0 * beta * sx);
      const double a = 1.0 - chi + chi * e4;
      const double b = 1.0 - chi + chi * e2;
      const double ratio = a / b;
      const double model = 1.0 - eta + eta * ratio;
      const double w = weight(i);
      ev.residuals[i] = (model - data.y_deamp[i]) * w;
      if (fixed) {
        ev.jacobian[i] = (ratio - 1.0) * deta * w;
      } else {
        const double da_db = chi * (-4.0 * sx) * e4;
        const double db_db = chi * (-2.0 * sx) * e2;
        const double dr_dbeta = (da_db * b - a * db_db) / (b * b);
        const double dr_dchi =
            ((e4 - 1.0) * b - a * (e2 - 1.0)) / (b * b);
        ev.jacobian[i * 3 + 0] = eta * dr_dbeta * dbeta * w;
        ev.jacobian[i * 3 + 1] = eta * dr_dchi * dchi * w;
        ev.jacobian[i * 3 + 2] = (ratio - 1.0) * deta * w;
      }
    }
  };

  LmOutcome lm;
  if (fixed) {
    lm = lm_minimize(eval, {logit(setup.eta_init)}, npts, opts);
  } else {
    // The three-parameter surface has shallow side valleys where the
    // logistic transforms saturate; a deterministic multi-start around the
    // supplied init is enough to land in the global basin.
    bool first = true;
    for (double bscale : {1.0, 0.5, 2.0}) {
      for (double chi0 : {setup.chi_init, 0.3, 0.7}) {
        for (double eta0 : {setup.eta_init, 0.55, 0.9}) {
          const LmOutcome candidate = lm_minimize(
              eval,
              {softplus_inv(setup.beta_init * bscale), logit(chi0),
               logit(eta0)},
              npts, opts);
          if (first || candidate.cost < lm.cost) {
            lm = candidate;
            first = false;
          }
        }
      }
    }
  }

  FitResult res;
  std::vector<double> slopes;
  if (fixed) {
    res.param_names = {"eta"};
    res.params["eta"] = sigmoid(lm.u[0]);
    res.params["beta"] = *setup.fixed_beta;
    res.params["chi"] = *setup.fixed_chi;
    slopes = {sigmoid(lm.u[0]) * (1.0 - sigmoid(lm.u[0]))};
  } else {
    res.param_names = {"beta", "chi", "eta"};
    res.params["beta"] = softplus(lm.u[0]);
    res.params["chi"] = sigmoid(lm.u[1]);
    res.params["eta"] = sigmoid(lm.u[2]);
    slopes = {softplus_slope(lm.u[0]),
              sigmoid(lm.u[1]) * (1.0 - sigmoid(lm.u[1])),
              sigmoid(lm.u[2]) * (1.0 - sigmoid(lm.u[2]))};
  }
  res.residual_norm = lm.cost;
  res.iterations = lm.iterations;
  res.converged = lm.converged;
  res.cost_history = lm.cost_history;
  std::vector<double> unit(n);
  for (std::size_t i = 0; i < n; ++i)
    unit[i] = slopes[i] > 0.0 ? 1.0 / slopes[i] : 0.0;
  res.covariance = covariance_from(lm, unit, !data.y_err.empty());
  return res;
}

double invert_deamplification(double g_meas, double beta, double chi) {
  if (!(beta > 0.0)) throw std::invalid_argument("beta must be > 0");
  if (!(chi > 0.0) || chi > 1.0)
    throw std::invalid_argument("chi must be in (0, 1]");
  if (!(g_meas <= 1.0) || !(g_meas > 1.0 - chi))
    throw std::invalid_argument(
        "deamplification outside the achievable range (1 - chi, 1]");
  if (g_meas == 1.0) return 0.0;

  const auto gain = [&](double p) {
    return 1.0 - chi + chi * std::exp(-beta * std::sqrt(p));
  };

  double lo = 0.0;
  double hi = 1.0;
  int expand = 0;
  while (gain(hi) > g_meas) {
    hi *= 2.0;
    if (++expand > 600)
      throw std::runtime_error("invert_deamplification: bracket failure");
  }
  // monotone bisection to 1e-10 relative on the pump power
  while (hi - lo > 1e-10 * hi) {
    const double mid = 0.5 * (lo + hi);
    if (gain(mid) > g_meas)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

CurveDataset read_curve_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);

  CurveDataset data;
  std::string line;
  std::size_t line_no = 0;
  std::size_t columns = 0;
  bool saw_data = false;

  while (std::getline(in, line)) {
    ++line_no;
    // tolerate trailing CR from foreign line endings
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string trimmed = line;
    trimmed.erase(0, trimmed.find_first_not_of(" \t"));
    if (trimmed.empty() || trimmed[0] == '#') continue;

    std::vector<std::string> fields;
    std::stringstream ss(trimmed);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);

    std::vector<double> row;
    bool numeric = true;
    for (const auto& f : fields) {
      try {
        std::size_t pos = 0;
        row.push_back(std::stod(f, &pos));
        while (pos < f.size() && std::isspace(static_cast<unsigned char>(f[pos])))
          ++pos;
        if (pos != f.size()) numeric = false;
      } catch (const std::exception&) {
        numeric = false;
      }
      if (!numeric) break;
    }

    if (!numeric) {
      if (!saw_data) continue;  // header line
      throw ConfigError(path + ":" + std::to_string(line_no) +
                        ": non-numeric field in data row");
    }
    if (row.size() < 2 || row.size() > 4)
      throw ConfigError(path + ":" + std::to_string(line_no) +
                        ": expected 2 to 4 comma-separated columns");
    if (!saw_data) {
      columns = row.size();
      saw_data = true;
    } else if (row.size() != columns) {
      throw ConfigError(path + ":" + std::to_string(line_no) +
                        ": inconsistent column count");
    }

    data.x.push_back(row[0]);
    if (columns == 2) {
      data.y_deamp.push_back(row[1]);
    } else {
      data.y_amp.push_back(row[1]);
      data.y_deamp.push_back(row[2]);
      if (columns == 4) data.y_err.push_back(row[3]);
    }
    if (data.x.size() > 1 && data.x.back() <= data.x[data.x.size() - 2])
      throw ConfigError(path + ":" + std::to_string(line_no) +
                        ": pump powers must be strictly increasing");
  }

  if (!saw_data) throw ConfigError(path + ": no data rows");
  return data;
}

void write_fit_report(const FitResult& result, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "converged: " << (result.converged ? "yes" : "no") << "\n";
  out << "iterations: " << result.iterations << "\n";
  out << "residual_norm: " << format_double(result.residual_norm) << "\n";
  for (std::size_t i = 0; i < result.param_names.size(); ++i) {
    const std::string& name = result.param_names[i];
    out << name << ": " << format_double(result.params.at(name));
    if (result.covariance.size() == result.param_names.size())
      out << " +- " << format_double(std::sqrt(std::max(
                 0.0, result.covariance[i][i])));
    out << "\n";
  }
  for (const auto& [name, value] : result.params) {
    if (std::find(result.param_names.begin(), result.param_names.end(),
                  name) == result.param_names.end())
      out << name << " (fixed): " << format_double(value) << "\n";
  }
  if (!result.covariance.empty()) {
    out << "covariance:\n";
    for (const auto& row : result.covariance) {
      for (std::size_t k = 0; k < row.size(); ++k)
        out << (k ? "," : "  ") << format_double(row[k]);
      out << "\n";
    }
  }
  if (!out) throw IoError("short write on " + path);
}

}  // namespace qsem
