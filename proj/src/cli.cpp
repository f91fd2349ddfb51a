#include "qsem/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <vector>

#include <CLI11.hpp>

#include "qsem/errors.hpp"
#include "qsem/fitting.hpp"
#include "qsem/quantum_states.hpp"
#include "qsem/sem_noise.hpp"
#include "qsem/spectral.hpp"
#include "qsem/text.hpp"
#include "qsem/trace_sim.hpp"

namespace qsem::cli {

namespace {

namespace fs = std::filesystem;

constexpr std::size_t kTraceCsvLimit = 65536;

void make_output_dir(const std::string& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + out_dir);
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << text;
  if (!out) throw IoError("short write on " + path);
}

void write_resolved_config(const ExperimentConfig& cfg,
                           const std::string& out_dir) {
  write_text_file(out_dir + "/resolved_config.ini", serialize_config(cfg));
}

std::string join_path(const std::string& dir, const std::string& name) {
  return dir + "/" + name;
}

}  // namespace

SweepSpec parse_sweep(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos)
    throw ConfigError("--sweep expects KEY=LO:HI:N, got '" + text + "'");
  SweepSpec spec;
  spec.key = text.substr(0, eq);
  const std::string rest = text.substr(eq + 1);
  const auto c1 = rest.find(':');
  const auto c2 = rest.find(':', c1 == std::string::npos ? c1 : c1 + 1);
  if (c1 == std::string::npos || c2 == std::string::npos)
    throw ConfigError("--sweep expects KEY=LO:HI:N, got '" + text + "'");
  try {
    spec.lo = std::stod(rest.substr(0, c1));
    spec.hi = std::stod(rest.substr(c1 + 1, c2 - c1 - 1));
    const long long n = std::stoll(rest.substr(c2 + 1));
    if (n < 1) throw std::invalid_argument("count");
    spec.count = static_cast<std::size_t>(n);
  } catch (const std::exception&) {
    throw ConfigError("--sweep expects numeric LO:HI:N, got '" + text + "'");
  }
  if (spec.key != "pump_power" && spec.key != "fano" && spec.key != "rho_t" &&
      spec.key != "g0")
    throw ConfigError("--sweep key must be pump_power, fano, rho_t or g0");
  if (!(spec.lo <= spec.hi))
    throw ConfigError("--sweep bounds must satisfy LO <= HI");
  return spec;
}

int cmd_predict(const ExperimentConfig& cfg,
                const std::optional<SweepSpec>& sweep,
                const std::string& out_dir, bool quiet) {
  make_output_dir(out_dir);
  write_resolved_config(cfg, out_dir);

  const OpaConfig opa = cfg.opa();
  const OpaConfig opa_normalised(cfg.opa_beta, cfg.opa_chi, 1.0, 1.0);

  std::vector<double> values;
  std::string key = sweep ? sweep->key : "none";
  if (sweep) {
    if (sweep->count == 1) {
      values.push_back(sweep->lo);
    } else {
      for (std::size_t i = 0; i < sweep->count; ++i)
        values.push_back(sweep->lo + (sweep->hi - sweep->lo) *
                                         static_cast<double>(i) /
                                         static_cast<double>(sweep->count - 1));
    }
  } else {
    values.push_back(0.0);
  }

  std::string csv =
      "sweep_key,sweep_value,pump_power,fano,gain_amplify,gain_deamplify,"
      "snr,delta_snr,delta_snr_db,signal_peak,quantum_floor,technical_band\n";

  for (double v : values) {
    const double pump = key == "pump_power" ? v : cfg.opa_pump_power;
    const double g0 = key == "g0" ? v : cfg.g0;
    const double rho = key == "rho_t" ? v : cfg.rho_t;
    double fano;
    if (key == "fano")
      fano = v;
    else if (key == "pump_power")
      fano = opa_output_fano(pump, opa, OpaBranch::deamplify);
    else
      fano = cfg.resolved_sem_fano();

    const SemMeasurementConfig sem(g0, 2.0 * M_PI * cfg.mod_freq_hz,
                                   cfg.resolved_p0(), cfg.resolved_kappa(),
                                   fano, rho);
    const double g_amp =
        opa_output_power(1.0, pump, opa_normalised, OpaBranch::amplify);
    const double g_deamp =
        opa_output_power(1.0, pump, opa_normalised, OpaBranch::deamplify);
    const double improvement = snr_improvement(sem);
    const PsdComponents psd = noise_psd_at_sideband(sem);

    csv += key + "," + format_double(v) + "," + format_double(pump) + "," +
           format_double(fano) + "," + format_double(g_amp) + "," +
           format_double(g_deamp) + "," + format_double(snr(sem)) + "," +
           format_double(improvement) + "," +
           format_double(10.0 * std::log10(improvement)) + "," +
           format_double(psd.signal_peak) + "," +
           format_double(psd.quantum_floor) + "," +
           format_double(psd.technical_band) + "\n";
  }

  write_text_file(join_path(out_dir, "predict.csv"), csv);
  if (!quiet) {
    std::cout << "predict: wrote " << values.size() << " row"
              << (values.size() == 1 ? "" : "s") << " to "
              << join_path(out_dir, "predict.csv") << "\n";
    if (values.size() == 1) {
      const SemMeasurementConfig sem = cfg.sem();
      std::cout << "  snr = " << format_double(snr(sem)) << ", delta_snr = "
                << format_double(snr_improvement(sem)) << " ("
                << format_double(10.0 * std::log10(snr_improvement(sem)))
                << " dB)\n";
    }
  }
  return 0;
}

int cmd_simulate(const ExperimentConfig& cfg, const std::string& out_dir,
                 bool quiet) {
  make_output_dir(out_dir);
  write_resolved_config(cfg, out_dir);

  const SemMeasurementConfig sem_on = cfg.sem();
  const SemMeasurementConfig sem_off = cfg.sem_with_gain(1.0);
  const TechnicalNoiseConfig tech = cfg.technical();
  const DetectorConfig det = cfg.detector();
  const double mu = cfg.resolved_photons_per_pulse();

  const PulseTrainConfig sq(cfg.rep_rate_hz, mu, cfg.probe_fano,
                            cfg.duration_s, cfg.seed);
  const PulseTrainConfig ref(cfg.rep_rate_hz, mu, 1.0, cfg.duration_s,
                             cfg.seed + 1);
  const PulseTrainConfig sq_floor(cfg.rep_rate_hz, mu, cfg.probe_fano,
                                  cfg.duration_s, cfg.seed + 2);
  const PulseTrainConfig ref_floor(cfg.rep_rate_hz, mu, 1.0, cfg.duration_s,
                                   cfg.seed + 3);

  const auto [trace_sq_sem, trace_co_sem] =
      two_beam_experiment(sq, ref, sem_on, tech, det);
  const auto [trace_sq_floor, trace_co_floor] =
      two_beam_experiment(sq_floor, ref_floor, sem_off, tech, det);
  const TraceRecord trace_elec = simulate_electronic_trace(
      det, cfg.rep_rate_hz, cfg.duration_s, cfg.seed + 4);

  const struct {
    const char* stem;
    const TraceRecord* trace;
  } named[] = {{"squeezed_sem", &trace_sq_sem},
               {"coherent_sem", &trace_co_sem},
               {"squeezed_floor", &trace_sq_floor},
               {"shot_floor", &trace_co_floor},
               {"electronic", &trace_elec}};

  const std::size_t averages = cfg.spectral_averages();
  std::vector<PsdEstimate> psds;
  for (const auto& entry : named) {
    write_trace_binary(*entry.trace, join_path(out_dir, entry.stem));
    if (entry.trace->samples.size() <= kTraceCsvLimit)
      write_trace_csv(*entry.trace,
                      join_path(out_dir, std::string(entry.stem) + ".csv"));
    psds.push_back(
        estimate_psd(*entry.trace, cfg.rbw_hz, averages, cfg.window));
    write_psd_csv(psds.back(), join_path(out_dir, std::string("psd_") +
                                                      entry.stem + ".csv"));
  }

  // Four-curve noise figure relative to the coherent shot floor.
  const PsdEstimate& psd_sq_sem = psds[0];
  const PsdEstimate& psd_co_sem = psds[1];
  const PsdEstimate& psd_sq_floor = psds[2];
  const PsdEstimate& psd_shot = psds[3];
  const PsdEstimate& psd_elec = psds[4];

  std::vector<double> shot_band;
  for (std::size_t k = 0; k < psd_shot.freqs.size(); ++k)
    if (psd_shot.freqs[k] >= cfg.band_lo_hz &&
        psd_shot.freqs[k] <= cfg.band_hi_hz)
      shot_band.push_back(psd_shot.values[k]);
  if (shot_band.size() < 8)
    throw std::runtime_error(
        "analysis band holds fewer than 8 bins at this rbw");
  std::nth_element(shot_band.begin(), shot_band.begin() + shot_band.size() / 2,
                   shot_band.end());
  const double shot_reference = shot_band[shot_band.size() / 2];

  std::string curves =
      "freq_hz,squeezed_sem_db,coherent_sem_db,squeezed_floor_db,"
      "shot_floor_db\n";
  for (std::size_t k = 0; k < psd_shot.freqs.size(); ++k) {
    curves += format_double(psd_shot.freqs[k]);
    for (const PsdEstimate* p :
         {&psd_sq_sem, &psd_co_sem, &psd_sq_floor, &psd_shot}) {
      const double value = std::max(p->values[k], 1e-300 * shot_reference);
      curves += "," + format_double(to_db(value, shot_reference));
    }
    curves += "\n";
  }
  write_text_file(join_path(out_dir, "sem_noise_curves.csv"), curves);

  // Headline numbers: sideband peak against the analytic weight, floor
  // ratio against the thinned probe Fano.
  const double f0 = cfg.mod_freq_hz;
  const PeakExtraction peak_sq = extract_peak(psd_sq_sem, f0);
  const PeakExtraction peak_co = extract_peak(psd_co_sem, f0);
  // kappa maps the sideband weight onto the one-sided band power of the
  // emulated analyzer, exactly as it maps the flux onto the floor density
  const double analytic_peak =
      cfg.resolved_kappa() * signal_psd_peak(sem_on);

  const double guard_hz = 8.0 * psd_sq_sem.rbw_hz;
  FanoEstimate fano_est;
  bool fano_valid = true;
  std::string fano_note;
  try {
    const double lo = cfg.band_lo_hz;
    const double hi = std::min(cfg.band_hi_hz, f0 - guard_hz);
    fano_est = estimate_fano(psd_sq_sem, psd_co_sem, &psd_elec, lo, hi);
  } catch (const std::exception& e) {
    fano_valid = false;
    fano_note = e.what();
  }
  const double expected_fano = cfg.resolved_sem_fano();

  std::string summary;
  summary += "samples_per_trace: " +
             std::to_string(trace_sq_sem.samples.size()) + "\n";
  summary += "psd_rbw_hz: " + format_double(psd_sq_sem.rbw_hz) + "\n";
  summary += "psd_averages: " + std::to_string(psd_sq_sem.vbw_averages) + "\n";
  summary += "peak_power_squeezed: " + format_double(peak_sq.peak_power) + "\n";
  summary += "peak_power_coherent: " + format_double(peak_co.peak_power) + "\n";
  summary += "peak_power_analytic: " + format_double(analytic_peak) + "\n";
  summary += "floor_squeezed: " + format_double(peak_sq.local_floor) + "\n";
  summary += "floor_coherent: " + format_double(peak_co.local_floor) + "\n";
  if (fano_valid) {
    summary += "fano_estimate: " + format_double(fano_est.value) + "\n";
    summary += "fano_std_error: " + format_double(fano_est.std_error) + "\n";
  } else {
    summary += "fano_estimate: unavailable (" + fano_note + ")\n";
  }
  summary += "fano_expected_detected: " + format_double(expected_fano) + "\n";
  write_text_file(join_path(out_dir, "summary.txt"), summary);

  if (!quiet) {
    std::cout << "simulate: wrote traces, PSDs and sem_noise_curves.csv to "
              << out_dir << "\n"
              << summary;
  }
  return 0;
}

int cmd_fit(const ExperimentConfig& cfg, const std::string& dataset_path,
            const std::string& mode, const std::string& out_dir, bool quiet) {
  if (mode != "amplification" && mode != "fano")
    throw ConfigError("--mode must be amplification or fano");
  make_output_dir(out_dir);
  write_resolved_config(cfg, out_dir);

  const CurveDataset data = read_curve_csv(dataset_path);
  const FitOptions opts = cfg.fit_options();

  FitResult result;
  std::string curve_csv;
  if (mode == "amplification") {
    result = fit_amplification(data, cfg.fit_beta_init, cfg.fit_chi_init,
                               opts);
    const double beta = result.params.at("beta");
    const double chi = result.params.at("chi");
    curve_csv = "pump_power,gain_amplify,gain_deamplify\n";
    const double xmax = data.x.back();
    for (int i = 0; i <= 200; ++i) {
      const double p = xmax * static_cast<double>(i) / 200.0;
      const double sp = std::sqrt(p);
      curve_csv += format_double(p) + "," +
                   format_double(1.0 - chi + chi * std::exp(beta * sp)) + "," +
                   format_double(1.0 - chi + chi * std::exp(-beta * sp)) +
                   "\n";
    }
  } else {
    FanoFitSetup setup;
    setup.axis = cfg.fano_axis == "deamplification"
                     ? FanoAxis::deamplification
                     : FanoAxis::pump_power;
    if (cfg.fano_shape == "fixed") {
      setup.fixed_beta = cfg.opa_beta;
      setup.fixed_chi = cfg.opa_chi;
    }
    setup.beta_init = cfg.fit_beta_init;
    setup.chi_init = cfg.fit_chi_init;
    setup.eta_init = cfg.fit_eta_init;
    result = fit_fano_curve(data, setup, opts);

    const double beta = result.params.at("beta");
    const double chi = result.params.at("chi");
    const double eta = result.params.at("eta");
    const auto fano_at = [&](double pump) {
      const double u = beta * std::sqrt(pump);
      const double a = 1.0 - chi + chi * std::exp(-4.0 * u);
      const double b = 1.0 - chi + chi * std::exp(-2.0 * u);
      return 1.0 - eta + eta * a / b;
    };
    curve_csv = std::string(setup.axis == FanoAxis::deamplification
                                ? "deamplification"
                                : "pump_power") +
                ",fano\n";
    const double xlo = data.x.front();
    const double xhi = data.x.back();
    for (int i = 0; i <= 200; ++i) {
      const double x = xlo + (xhi - xlo) * static_cast<double>(i) / 200.0;
      const double pump = setup.axis == FanoAxis::deamplification
                              ? invert_deamplification(x, beta, chi)
                              : x;
      curve_csv += format_double(x) + "," + format_double(fano_at(pump)) +
                   "\n";
    }
  }

  write_fit_report(result, join_path(out_dir, "fit_report.txt"));
  write_text_file(join_path(out_dir, "fitted_curve.csv"), curve_csv);

  if (!quiet) {
    std::cout << "fit: " << (result.converged ? "converged" : "NOT converged")
              << " after " << result.iterations << " iterations, residual "
              << format_double(result.residual_norm) << "\n";
    for (const auto& name : result.param_names)
      std::cout << "  " << name << " = "
                << format_double(result.params.at(name)) << "\n";
  }
  if (!result.converged) {
    std::cerr << "fit did not converge; see "
              << join_path(out_dir, "fit_report.txt") << "\n";
    return 2;
  }
  return 0;
}

int run(int argc, char** argv) {
  CLI::App app{"squeezed-light stimulated emission microscopy toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string sweep_text;
  std::string mode = "amplification";
  std::string dataset_path;
  std::uint64_t seed_override = 0;
  bool seed_given = false;
  bool quiet = false;

  app.add_option("--config", config_path, "configuration file (INI sections)");
  app.add_option("--out", out_dir, "output directory (overrides config)");
  auto* seed_opt =
      app.add_option("--seed", seed_override, "override pulse_train.seed");
  app.add_flag("--quiet", quiet, "suppress console output");

  auto* predict =
      app.add_subcommand("predict", "analytic SNR / Fano / PSD predictions");
  predict->fallthrough();
  predict->add_option("--sweep", sweep_text,
                      "KEY=LO:HI:N over pump_power, fano, rho_t or g0");

  auto* simulate = app.add_subcommand(
      "simulate", "Monte Carlo traces, PSDs and noise curves");
  simulate->fallthrough();

  auto* fit = app.add_subcommand("fit", "least-squares parameter recovery");
  fit->fallthrough();
  fit->add_option("dataset", dataset_path, "CSV dataset")->required();
  fit->add_option("--mode", mode, "amplification or fano");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  seed_given = seed_opt->count() > 0;

  try {
    ExperimentConfig cfg = load_config(config_path);
    if (seed_given) {
      cfg.seed = seed_override;
      cfg.validate();
    }
    const std::string dir = out_dir.empty() ? cfg.output_directory : out_dir;

    if (predict->parsed()) {
      std::optional<SweepSpec> sweep;
      if (!sweep_text.empty()) sweep = parse_sweep(sweep_text);
      return cmd_predict(cfg, sweep, dir, quiet);
    }
    if (simulate->parsed()) return cmd_simulate(cfg, dir, quiet);
    if (fit->parsed()) return cmd_fit(cfg, dataset_path, mode, dir, quiet);
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace qsem::cli
