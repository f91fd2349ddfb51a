#include "qsem/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "qsem/errors.hpp"
#include "qsem/spectral.hpp"
#include "qsem/text.hpp"

namespace qsem {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t");
  return s.substr(begin, end - begin + 1);
}

double parse_double(const std::string& v, const std::string& context) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return d;
  } catch (const std::exception&) {
    throw ConfigError(context + ": cannot parse '" + v + "' as a number");
  }
}

std::optional<double> parse_auto_double(const std::string& v,
                                        const std::string& context) {
  if (v == "auto") return std::nullopt;
  return parse_double(v, context);
}

std::uint64_t parse_u64(const std::string& v, const std::string& context) {
  try {
    std::size_t pos = 0;
    const unsigned long long u = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return static_cast<std::uint64_t>(u);
  } catch (const std::exception&) {
    throw ConfigError(context + ": cannot parse '" + v +
                      "' as an unsigned integer");
  }
}

int parse_int(const std::string& v, const std::string& context) {
  try {
    std::size_t pos = 0;
    const int i = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return i;
  } catch (const std::exception&) {
    throw ConfigError(context + ": cannot parse '" + v + "' as an integer");
  }
}

struct KeyBinding {
  const char* section;
  const char* key;
  std::function<void(ExperimentConfig&, const std::string&,
                     const std::string&)>
      set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define QSEM_DOUBLE_KEY(section, key, field)                              \
  KeyBinding{section, key,                                                \
             [](ExperimentConfig& c, const std::string& v,                \
                const std::string& ctx) { c.field = parse_double(v, ctx); }, \
             [](const ExperimentConfig& c) { return format_double(c.field); }}

#define QSEM_AUTO_KEY(section, key, field, resolver)                        \
  KeyBinding{section, key,                                                  \
             [](ExperimentConfig& c, const std::string& v,                  \
                const std::string& ctx) {                                   \
               c.field = parse_auto_double(v, ctx);                         \
             },                                                             \
             [](const ExperimentConfig& c) {                                \
               return format_double(c.resolver());                          \
             }}

#define QSEM_STRING_KEY(section, key, field)                           \
  KeyBinding{section, key,                                             \
             [](ExperimentConfig& c, const std::string& v,             \
                const std::string&) { c.field = v; },                  \
             [](const ExperimentConfig& c) { return c.field; }}

const std::vector<KeyBinding>& bindings() {
  static const std::vector<KeyBinding> table = {
      QSEM_DOUBLE_KEY("opa", "beta", opa_beta),
      QSEM_DOUBLE_KEY("opa", "chi", opa_chi),
      QSEM_DOUBLE_KEY("opa", "eta_p", opa_eta_p),
      QSEM_DOUBLE_KEY("opa", "eta_d", opa_eta_d),
      QSEM_DOUBLE_KEY("opa", "pump_power", opa_pump_power),

      QSEM_DOUBLE_KEY("pulse_train", "rep_rate_hz", rep_rate_hz),
      QSEM_AUTO_KEY("pulse_train", "photons_per_pulse", photons_per_pulse,
                    resolved_photons_per_pulse),
      QSEM_DOUBLE_KEY("pulse_train", "average_power_w", average_power_w),
      QSEM_DOUBLE_KEY("pulse_train", "wavelength_nm", wavelength_nm),
      QSEM_DOUBLE_KEY("pulse_train", "fano", probe_fano),
      QSEM_DOUBLE_KEY("pulse_train", "duration_s", duration_s),
      KeyBinding{"pulse_train", "seed",
                 [](ExperimentConfig& c, const std::string& v,
                    const std::string& ctx) { c.seed = parse_u64(v, ctx); },
                 [](const ExperimentConfig& c) { return format_u64(c.seed); }},

      QSEM_DOUBLE_KEY("sem", "g0", g0),
      QSEM_DOUBLE_KEY("sem", "mod_freq_hz", mod_freq_hz),
      QSEM_AUTO_KEY("sem", "kappa", kappa, resolved_kappa),
      QSEM_AUTO_KEY("sem", "p0", p0, resolved_p0),
      QSEM_AUTO_KEY("sem", "fano", sem_fano, resolved_sem_fano),

      QSEM_DOUBLE_KEY("technical_noise", "rho_t", rho_t),
      QSEM_AUTO_KEY("technical_noise", "corner_freq_hz", corner_freq_hz,
                    resolved_corner_freq_hz),

      QSEM_DOUBLE_KEY("detector", "efficiency", efficiency),
      QSEM_AUTO_KEY("detector", "electronic_noise_psd", electronic_noise_psd,
                    resolved_electronic_noise_psd),
      QSEM_DOUBLE_KEY("detector", "bandwidth_hz", bandwidth_hz),

      QSEM_DOUBLE_KEY("spectral", "rbw_hz", rbw_hz),
      QSEM_DOUBLE_KEY("spectral", "vbw_hz", vbw_hz),
      QSEM_STRING_KEY("spectral", "window", window),
      QSEM_DOUBLE_KEY("spectral", "band_lo_hz", band_lo_hz),
      QSEM_DOUBLE_KEY("spectral", "band_hi_hz", band_hi_hz),

      KeyBinding{"fit", "max_iterations",
                 [](ExperimentConfig& c, const std::string& v,
                    const std::string& ctx) {
                   c.fit_max_iterations = parse_int(v, ctx);
                 },
                 [](const ExperimentConfig& c) {
                   return std::to_string(c.fit_max_iterations);
                 }},
      QSEM_DOUBLE_KEY("fit", "tolerance", fit_tolerance),
      QSEM_STRING_KEY("fit", "fano_axis", fano_axis),
      QSEM_STRING_KEY("fit", "fano_shape", fano_shape),
      QSEM_DOUBLE_KEY("fit", "beta_init", fit_beta_init),
      QSEM_DOUBLE_KEY("fit", "chi_init", fit_chi_init),
      QSEM_DOUBLE_KEY("fit", "eta_init", fit_eta_init),

      QSEM_STRING_KEY("output", "directory", output_directory),
  };
  return table;
}

#undef QSEM_DOUBLE_KEY
#undef QSEM_AUTO_KEY
#undef QSEM_STRING_KEY

const KeyBinding* find_binding(const std::string& section,
                               const std::string& key) {
  for (const auto& b : bindings())
    if (section == b.section && key == b.key) return &b;
  return nullptr;
}

std::string env_name(const KeyBinding& b) {
  std::string name = "QSEM_" + std::string(b.section) + "_" + b.key;
  std::transform(name.begin(), name.end(), name.begin(),
                 [](unsigned char c) { return std::toupper(c); });
  return name;
}

}  // namespace

double ExperimentConfig::resolved_photons_per_pulse() const {
  if (photons_per_pulse) return *photons_per_pulse;
  return photons_per_pulse_from_power(average_power_w, rep_rate_hz,
                                      wavelength_nm * 1e-9);
}

double ExperimentConfig::resolved_kappa() const {
  if (kappa) return *kappa;
  return 2.0 / (rep_rate_hz * rep_rate_hz);
}

double ExperimentConfig::resolved_p0() const {
  if (p0) return *p0;
  return efficiency * resolved_photons_per_pulse() * rep_rate_hz;
}

double ExperimentConfig::resolved_sem_fano() const {
  if (sem_fano) return *sem_fano;
  return 1.0 - efficiency + efficiency * probe_fano;
}

double ExperimentConfig::resolved_corner_freq_hz() const {
  if (corner_freq_hz) return *corner_freq_hz;
  return mod_freq_hz / 8.0;
}

double ExperimentConfig::resolved_electronic_noise_psd() const {
  if (electronic_noise_psd) return *electronic_noise_psd;
  // a tenth of the one-sided coherent shot floor of the detected probe
  return 0.1 * 2.0 * efficiency * resolved_photons_per_pulse() / rep_rate_hz;
}

OpaConfig ExperimentConfig::opa() const {
  return OpaConfig(opa_beta, opa_chi, opa_eta_p, opa_eta_d);
}

PulseTrainConfig ExperimentConfig::pulse_train() const {
  return PulseTrainConfig(rep_rate_hz, resolved_photons_per_pulse(),
                          probe_fano, duration_s, seed);
}

PulseTrainConfig ExperimentConfig::reference_pulse_train() const {
  return PulseTrainConfig(rep_rate_hz, resolved_photons_per_pulse(), 1.0,
                          duration_s, seed + 1);
}

SemMeasurementConfig ExperimentConfig::sem() const { return sem_with_gain(g0); }

SemMeasurementConfig ExperimentConfig::sem_with_gain(
    double g0_override) const {
  return SemMeasurementConfig(
      g0_override, 2.0 * 3.141592653589793238462643 * mod_freq_hz,
      resolved_p0(), resolved_kappa(), resolved_sem_fano(), rho_t);
}

TechnicalNoiseConfig ExperimentConfig::technical() const {
  return TechnicalNoiseConfig(rho_t, resolved_corner_freq_hz());
}

DetectorConfig ExperimentConfig::detector() const {
  return DetectorConfig(efficiency, resolved_electronic_noise_psd(),
                        bandwidth_hz);
}

FitOptions ExperimentConfig::fit_options() const {
  FitOptions o;
  o.max_iterations = fit_max_iterations;
  o.gradient_tol = fit_tolerance;
  return o;
}

std::size_t ExperimentConfig::spectral_averages() const {
  return averages_for_vbw(rbw_hz, vbw_hz);
}

void ExperimentConfig::validate() const {
  try {
    opa();
    pulse_train();
    reference_pulse_train();
    sem();
    technical();
    detector();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid configuration: ") + e.what());
  }
  if (window != "rectangular" && window != "hann" && window != "blackman")
    throw ConfigError("spectral.window must be rectangular, hann or blackman");
  if (!(rbw_hz > 0.0) || !(vbw_hz > 0.0))
    throw ConfigError("spectral.rbw_hz and vbw_hz must be > 0");
  if (!(band_lo_hz > 0.0) || !(band_lo_hz < band_hi_hz))
    throw ConfigError("spectral band must satisfy 0 < band_lo < band_hi");
  if (fit_max_iterations < 1)
    throw ConfigError("fit.max_iterations must be >= 1");
  if (!(fit_tolerance > 0.0)) throw ConfigError("fit.tolerance must be > 0");
  if (fano_axis != "pump_power" && fano_axis != "deamplification")
    throw ConfigError("fit.fano_axis must be pump_power or deamplification");
  if (fano_shape != "fixed" && fano_shape != "free")
    throw ConfigError("fit.fano_shape must be fixed or free");
  if (output_directory.empty())
    throw ConfigError("output.directory must not be empty");
  if (!(opa_pump_power >= 0.0))
    throw ConfigError("opa.pump_power must be >= 0");
}

ExperimentConfig parse_config_text(const std::string& text,
                                   const std::string& origin) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::string section;
  std::size_t line_no = 0;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const std::string context = origin + ":" + std::to_string(line_no);

    if (t.front() == '[') {
      if (t.back() != ']')
        throw ConfigError(context + ": malformed section header");
      section = trim(t.substr(1, t.size() - 2));
      bool known = false;
      for (const auto& b : bindings())
        if (section == b.section) known = true;
      if (!known)
        throw ConfigError(context + ": unknown section [" + section + "]");
      continue;
    }

    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(context + ": expected key = value");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (section.empty())
      throw ConfigError(context + ": key outside any section");
    const KeyBinding* binding = find_binding(section, key);
    if (!binding)
      throw ConfigError(context + ": unknown key " + section + "." + key);
    binding->set(cfg, value, context);
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  ExperimentConfig cfg;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    cfg = parse_config_text(buf.str(), path);
  }
  for (const auto& b : bindings()) {
    const char* env = std::getenv(env_name(b).c_str());
    if (env) b.set(cfg, env, "environment " + env_name(b));
  }
  cfg.validate();
  return cfg;
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::string out;
  std::string section;
  for (const auto& b : bindings()) {
    if (section != b.section) {
      if (!section.empty()) out += "\n";
      section = b.section;
      out += "[" + section + "]\n";
    }
    out += std::string(b.key) + " = " + b.get(cfg) + "\n";
  }
  return out;
}

}  // namespace qsem
