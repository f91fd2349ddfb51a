#include "qsem/trace_sim.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "qsem/errors.hpp"
#include "qsem/random.hpp"
#include "qsem/text.hpp"

namespace qsem {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kPlanck = 6.62607015e-34;       // J s
constexpr double kLightSpeed = 299792458.0;      // m/s
constexpr double kMaxClipFraction = 1e-6;
constexpr double kMinPhotonsPerPulse = 1e3;

void require_finite(double v, const char* name) {
  if (!std::isfinite(v))
    throw std::invalid_argument(std::string(name) + " must be finite");
}

}  // namespace

PulseTrainConfig::PulseTrainConfig(double rep_rate_, double photons_per_pulse_,
                                   double fano_, double duration_,
                                   std::uint64_t seed_)
    : rep_rate(rep_rate_), photons_per_pulse(photons_per_pulse_), fano(fano_),
      duration(duration_), seed(seed_) {
  require_finite(rep_rate_, "rep_rate");
  require_finite(photons_per_pulse_, "photons_per_pulse");
  require_finite(fano_, "fano");
  require_finite(duration_, "duration");
  if (rep_rate <= 0.0) throw std::invalid_argument("rep_rate must be > 0");
  if (photons_per_pulse <= 0.0)
    throw std::invalid_argument("photons_per_pulse must be > 0");
  if (fano <= 0.0) throw std::invalid_argument("fano must be > 0");
  if (duration * rep_rate < 2.0)
    throw std::invalid_argument("duration must cover at least two pulses");
}

TechnicalNoiseConfig::TechnicalNoiseConfig(double rho_t_, double corner_freq_)
    : rho_t(rho_t_), corner_freq(corner_freq_) {
  require_finite(rho_t_, "rho_t");
  require_finite(corner_freq_, "corner_freq");
  if (rho_t < 0.0) throw std::invalid_argument("rho_t must be >= 0");
  if (corner_freq <= 0.0)
    throw std::invalid_argument("corner_freq must be > 0");
}

DetectorConfig::DetectorConfig(double efficiency_,
                               double electronic_noise_psd_, double bandwidth_)
    : efficiency(efficiency_), electronic_noise_psd(electronic_noise_psd_),
      bandwidth(bandwidth_) {
  require_finite(efficiency_, "efficiency");
  require_finite(electronic_noise_psd_, "electronic_noise_psd");
  require_finite(bandwidth_, "bandwidth");
  if (efficiency < 0.0 || efficiency > 1.0)
    throw std::invalid_argument("efficiency must be in [0, 1]");
  if (electronic_noise_psd < 0.0)
    throw std::invalid_argument("electronic_noise_psd must be >= 0");
  if (bandwidth <= 0.0) throw std::invalid_argument("bandwidth must be > 0");
}

TraceRecord simulate_trace(const PulseTrainConfig& pt,
                           const SemMeasurementConfig& sem,
                           const TechnicalNoiseConfig& tn,
                           const DetectorConfig& det) {
  const double mod_freq = sem.omega0 / kTwoPi;
  if (mod_freq >= 0.5 * pt.rep_rate)
    throw std::invalid_argument(
        "modulation frequency must stay below half the repetition rate");
  if (tn.corner_freq >= mod_freq)
    throw std::invalid_argument(
        "technical noise corner must stay below the modulation frequency");
  if (pt.photons_per_pulse < kMinPhotonsPerPulse)
    throw std::invalid_argument(
        "photons_per_pulse below 1e3: Gaussian surrogate statistics invalid");

  const std::size_t n =
      static_cast<std::size_t>(std::floor(pt.duration * pt.rep_rate));
  const double mu = pt.photons_per_pulse;
  const double shot_sigma_rel = std::sqrt(pt.fano / mu);
  const double eta = det.efficiency;
  const double elec_sigma =
      det.electronic_noise_psd > 0.0
          ? std::sqrt(det.electronic_noise_psd * pt.rep_rate / 2.0)
          : 0.0;

  // AR(1) relative-intensity noise, calibrated so its one-sided PSD at DC
  // equals rho_t times the coherent shot density 2 mu / rep_rate.
  const bool technical = tn.rho_t > 0.0;
  const double ar_a =
      technical ? std::exp(-kTwoPi * tn.corner_freq / pt.rep_rate) : 0.0;
  const double ar_sigma =
      technical ? (1.0 - ar_a) * std::sqrt(tn.rho_t / mu) : 0.0;

  Rng rng(pt.seed);
  double tau = technical
                   ? ar_sigma / std::sqrt(1.0 - ar_a * ar_a) * rng.normal()
                   : 0.0;

  TraceRecord rec;
  rec.sample_rate = pt.rep_rate;
  rec.samples.resize(n);
  std::uint64_t clipped = 0;

  for (std::size_t i = 0; i < n; ++i) {
    if (technical && i > 0) tau = ar_a * tau + ar_sigma * rng.normal();
    const double t = static_cast<double>(i) / pt.rep_rate;
    double energy = mu * (1.0 + tau) * (1.0 + shot_sigma_rel * rng.normal());
    energy *= modulated_gain(sem, t);
    if (eta < 1.0) {
      const double thin_var = eta * (1.0 - eta) * std::max(energy, 0.0);
      energy = eta * energy + std::sqrt(thin_var) * rng.normal();
    }
    if (elec_sigma > 0.0) energy += elec_sigma * rng.normal();
    if (energy < 0.0) {
      ++clipped;
      energy = 0.0;
    }
    rec.samples[i] = energy;
  }

  if (static_cast<double>(clipped) >
      kMaxClipFraction * static_cast<double>(n))
    throw std::runtime_error("simulate_trace: clip fraction above 1e-6, "
                             "Gaussian surrogate out of its regime");

  rec.meta.pulse = pt;
  rec.meta.sem = sem;
  rec.meta.technical = tn;
  rec.meta.detector = det;
  rec.meta.clipped_samples = clipped;
  rec.meta.kind = "optical";
  return rec;
}

std::pair<TraceRecord, TraceRecord> two_beam_experiment(
    const PulseTrainConfig& squeezed, const PulseTrainConfig& reference,
    const SemMeasurementConfig& sem, const TechnicalNoiseConfig& tn,
    const DetectorConfig& det) {
  if (squeezed.photons_per_pulse != reference.photons_per_pulse)
    throw std::invalid_argument(
        "two_beam_experiment: traces must be power matched");
  if (reference.fano != 1.0)
    throw std::invalid_argument(
        "two_beam_experiment: reference trace must carry fano = 1");
  return {simulate_trace(squeezed, sem, tn, det),
          simulate_trace(reference, sem, tn, det)};
}

TraceRecord simulate_electronic_trace(const DetectorConfig& det,
                                      double rep_rate, double duration,
                                      std::uint64_t seed) {
  require_finite(rep_rate, "rep_rate");
  require_finite(duration, "duration");
  if (rep_rate <= 0.0) throw std::invalid_argument("rep_rate must be > 0");
  if (duration * rep_rate < 2.0)
    throw std::invalid_argument("duration must cover at least two samples");

  const std::size_t n =
      static_cast<std::size_t>(std::floor(duration * rep_rate));
  const double sigma = std::sqrt(det.electronic_noise_psd * rep_rate / 2.0);

  Rng rng(seed);
  TraceRecord rec;
  rec.sample_rate = rep_rate;
  rec.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) rec.samples[i] = sigma * rng.normal();
  rec.meta.detector = det;
  rec.meta.kind = "electronic";
  return rec;
}

double photons_per_pulse_from_power(double avg_power_w, double rep_rate_hz,
                                    double wavelength_m) {
  require_finite(avg_power_w, "avg_power_w");
  if (avg_power_w <= 0.0 || rep_rate_hz <= 0.0 || wavelength_m <= 0.0)
    throw std::invalid_argument(
        "power, repetition rate and wavelength must be > 0");
  const double photon_energy = kPlanck * kLightSpeed / wavelength_m;
  return avg_power_w / rep_rate_hz / photon_energy;
}

namespace {

using nlohmann::json;

json pulse_to_json(const PulseTrainConfig& c) {
  return json{{"rep_rate_hz", c.rep_rate},
              {"photons_per_pulse", c.photons_per_pulse},
              {"fano", c.fano},
              {"duration_s", c.duration},
              {"seed", c.seed}};
}

json sem_to_json(const SemMeasurementConfig& c) {
  return json{{"g0", c.g0},          {"omega0_rad_s", c.omega0},
              {"p0_photons_s", c.p0}, {"kappa", c.kappa},
              {"fano", c.fano},       {"rho_t", c.rho_t}};
}

json technical_to_json(const TechnicalNoiseConfig& c) {
  return json{{"rho_t", c.rho_t}, {"corner_freq_hz", c.corner_freq}};
}

json detector_to_json(const DetectorConfig& c) {
  return json{{"efficiency", c.efficiency},
              {"electronic_noise_psd", c.electronic_noise_psd},
              {"bandwidth_hz", c.bandwidth}};
}

PulseTrainConfig pulse_from_json(const json& j) {
  return PulseTrainConfig(j.at("rep_rate_hz").get<double>(),
                          j.at("photons_per_pulse").get<double>(),
                          j.at("fano").get<double>(),
                          j.at("duration_s").get<double>(),
                          j.at("seed").get<std::uint64_t>());
}

SemMeasurementConfig sem_from_json(const json& j) {
  return SemMeasurementConfig(
      j.at("g0").get<double>(), j.at("omega0_rad_s").get<double>(),
      j.at("p0_photons_s").get<double>(), j.at("kappa").get<double>(),
      j.at("fano").get<double>(), j.at("rho_t").get<double>());
}

TechnicalNoiseConfig technical_from_json(const json& j) {
  return TechnicalNoiseConfig(j.at("rho_t").get<double>(),
                              j.at("corner_freq_hz").get<double>());
}

DetectorConfig detector_from_json(const json& j) {
  return DetectorConfig(j.at("efficiency").get<double>(),
                        j.at("electronic_noise_psd").get<double>(),
                        j.at("bandwidth_hz").get<double>());
}

}  // namespace

void write_trace_binary(const TraceRecord& rec, const std::string& stem) {
  static_assert(sizeof(double) == 8, "trace files hold 64-bit floats");
  {
    std::ofstream out(stem + ".f64", std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + stem + ".f64 for writing");
    out.write(reinterpret_cast<const char*>(rec.samples.data()),
              static_cast<std::streamsize>(rec.samples.size() *
                                           sizeof(double)));
    if (!out) throw IoError("short write on " + stem + ".f64");
  }

  json j;
  j["kind"] = rec.meta.kind;
  j["sample_rate_hz"] = rec.sample_rate;
  j["samples"] = rec.samples.size();
  j["clipped_samples"] = rec.meta.clipped_samples;
  if (rec.meta.pulse) j["pulse_train"] = pulse_to_json(*rec.meta.pulse);
  if (rec.meta.sem) j["sem"] = sem_to_json(*rec.meta.sem);
  if (rec.meta.technical)
    j["technical_noise"] = technical_to_json(*rec.meta.technical);
  if (rec.meta.detector) j["detector"] = detector_to_json(*rec.meta.detector);

  std::ofstream side(stem + ".json", std::ios::trunc);
  if (!side) throw IoError("cannot open " + stem + ".json for writing");
  side << j.dump(2) << "\n";
  if (!side) throw IoError("short write on " + stem + ".json");
}

TraceRecord read_trace_binary(const std::string& stem) {
  std::ifstream side(stem + ".json");
  if (!side) throw IoError("cannot open " + stem + ".json");
  json j;
  try {
    side >> j;
  } catch (const json::exception& e) {
    throw ConfigError(stem + ".json: " + e.what());
  }

  TraceRecord rec;
  rec.sample_rate = j.at("sample_rate_hz").get<double>();
  rec.meta.kind = j.at("kind").get<std::string>();
  rec.meta.clipped_samples = j.at("clipped_samples").get<std::uint64_t>();
  if (j.contains("pulse_train"))
    rec.meta.pulse = pulse_from_json(j.at("pulse_train"));
  if (j.contains("sem")) rec.meta.sem = sem_from_json(j.at("sem"));
  if (j.contains("technical_noise"))
    rec.meta.technical = technical_from_json(j.at("technical_noise"));
  if (j.contains("detector"))
    rec.meta.detector = detector_from_json(j.at("detector"));

  const std::size_t n = j.at("samples").get<std::size_t>();
  std::ifstream in(stem + ".f64", std::ios::binary);
  if (!in) throw IoError("cannot open " + stem + ".f64");
  rec.samples.resize(n);
  in.read(reinterpret_cast<char*>(rec.samples.data()),
          static_cast<std::streamsize>(n * sizeof(double)));
  if (static_cast<std::size_t>(in.gcount()) != n * sizeof(double))
    throw IoError(stem + ".f64 shorter than its sidecar declares");
  return rec;
}

void write_trace_csv(const TraceRecord& rec, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "time_s,energy_photons\n";
  for (std::size_t i = 0; i < rec.samples.size(); ++i) {
    out << format_double(static_cast<double>(i) / rec.sample_rate) << ','
        << format_double(rec.samples[i]) << '\n';
  }
  if (!out) throw IoError("short write on " + path);
}

}  // namespace qsem
