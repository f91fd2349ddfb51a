#include "qsem/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <stdexcept>

#include "qsem/errors.hpp"
#include "qsem/fft.hpp"
#include "qsem/text.hpp"

namespace qsem {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

struct WindowShape {
  std::vector<double> w;
  double sum_w = 0.0;
  double sum_w2 = 0.0;
  double enbw_bins = 0.0;
  int mainlobe_halfwidth = 1;
};

double nominal_enbw(const std::string& name) {
  if (name == "rectangular") return 1.0;
  if (name == "hann") return 1.5;
  if (name == "blackman") return 1.7267556025;
  throw std::invalid_argument("unknown window: " + name);
}

WindowShape make_window(const std::string& name, std::size_t length) {
  WindowShape shape;
  shape.w.resize(length);
  if (name == "rectangular") {
    std::fill(shape.w.begin(), shape.w.end(), 1.0);
    shape.mainlobe_halfwidth = 1;
  } else if (name == "hann") {
    for (std::size_t i = 0; i < length; ++i)
      shape.w[i] = 0.5 - 0.5 * std::cos(kTwoPi * static_cast<double>(i) /
                                        static_cast<double>(length));
    shape.mainlobe_halfwidth = 2;
  } else if (name == "blackman") {
    for (std::size_t i = 0; i < length; ++i) {
      const double x = kTwoPi * static_cast<double>(i) /
                       static_cast<double>(length);
      shape.w[i] = 0.42 - 0.5 * std::cos(x) + 0.08 * std::cos(2.0 * x);
    }
    shape.mainlobe_halfwidth = 3;
  } else {
    throw std::invalid_argument("unknown window: " + name);
  }
  for (double v : shape.w) {
    shape.sum_w += v;
    shape.sum_w2 += v * v;
  }
  shape.enbw_bins = static_cast<double>(length) * shape.sum_w2 /
                    (shape.sum_w * shape.sum_w);
  return shape;
}

int mainlobe_halfwidth_of(const std::string& name) {
  if (name == "rectangular") return 1;
  if (name == "blackman") return 3;
  return 2;  // hann and fallback
}

double median_of(std::vector<double> values) {
  if (values.empty())
    throw std::invalid_argument("median of an empty range");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  double m = values[mid];
  if (values.size() % 2 == 0) {
    const double lower =
        *std::max_element(values.begin(), values.begin() + mid);
    m = 0.5 * (m + lower);
  }
  return m;
}

}  // namespace

PsdEstimate estimate_psd(const std::vector<double>& samples,
                         double sample_rate_hz, double rbw_hz,
                         std::size_t averages, const std::string& window) {
  const std::size_t n = samples.size();
  if (n < 16) throw std::invalid_argument("trace too short to estimate");
  if (!(sample_rate_hz > 0.0))
    throw std::invalid_argument("sample_rate must be > 0");
  if (!(rbw_hz > 0.0)) throw std::invalid_argument("rbw must be > 0");
  if (averages < 1) throw std::invalid_argument("averages must be >= 1");

  const double enbw0 = nominal_enbw(window);
  const std::size_t ideal =
      static_cast<std::size_t>(std::llround(enbw0 * sample_rate_hz / rbw_hz));
  const std::size_t seg_len = FftPlan::nearest_even_5smooth(ideal);
  if (seg_len > n)
    throw std::invalid_argument(
        "trace too short for requested rbw (segment exceeds trace)");

  std::size_t hop = 0;
  if (averages > 1) {
    hop = (n - seg_len) / (averages - 1);
    if (hop < (seg_len + 1) / 2)
      throw std::invalid_argument(
          "trace too short for requested rbw/averages (overlap above 50%)");
  }

  const WindowShape shape = make_window(window, seg_len);

  double mean = 0.0;
  for (double v : samples) mean += v;
  mean /= static_cast<double>(n);

  FftPlan plan(seg_len);
  std::vector<std::complex<double>> buf(seg_len);
  std::vector<std::complex<double>> spec(seg_len);
  const std::size_t half = seg_len / 2;
  std::vector<double> acc(half, 0.0);

  for (std::size_t s = 0; s < averages; ++s) {
    const std::size_t offset = s * hop;
    for (std::size_t i = 0; i < seg_len; ++i)
      buf[i] = {(samples[offset + i] - mean) * shape.w[i], 0.0};
    plan.forward(buf.data(), spec.data());
    for (std::size_t j = 1; j <= half; ++j) acc[j - 1] += std::norm(spec[j]);
  }

  PsdEstimate psd;
  psd.freqs.resize(half);
  psd.values.resize(half);
  const double df = sample_rate_hz / static_cast<double>(seg_len);
  const double norm = 1.0 / (static_cast<double>(averages) * sample_rate_hz *
                             shape.sum_w2);
  for (std::size_t j = 1; j <= half; ++j) {
    psd.freqs[j - 1] = df * static_cast<double>(j);
    const double sided = (2 * j == seg_len) ? 1.0 : 2.0;
    psd.values[j - 1] = sided * acc[j - 1] * norm;
  }
  psd.rbw_hz = shape.enbw_bins * df;
  psd.vbw_averages = averages;
  psd.window = window;
  psd.sample_rate_hz = sample_rate_hz;
  psd.bin_width_hz = df;
  psd.enbw_bins = shape.enbw_bins;
  psd.segment_length = seg_len;
  return psd;
}

PsdEstimate estimate_psd(const TraceRecord& trace, double rbw_hz,
                         std::size_t averages, const std::string& window) {
  return estimate_psd(trace.samples, trace.sample_rate, rbw_hz, averages,
                      window);
}

PeakExtraction extract_peak(const PsdEstimate& psd, double f0_hz,
                            const PeakOptions& opts) {
  if (psd.freqs.empty()) throw std::invalid_argument("empty PSD");
  if (f0_hz < psd.freqs.front() || f0_hz > psd.freqs.back())
    throw std::invalid_argument("peak frequency outside the PSD range");

  const double df = psd.bin_width_hz;
  const std::ptrdiff_t count = static_cast<std::ptrdiff_t>(psd.freqs.size());
  std::ptrdiff_t centre =
      static_cast<std::ptrdiff_t>(std::llround(f0_hz / df)) - 1;
  centre = std::clamp<std::ptrdiff_t>(centre, 0, count - 1);

  const int hw = opts.peak_halfwidth_bins >= 0
                     ? opts.peak_halfwidth_bins
                     : mainlobe_halfwidth_of(psd.window);
  const int guard = opts.guard_bins >= 0 ? opts.guard_bins : 3 * hw;
  if (guard < hw)
    throw std::invalid_argument(
        "floor sidebands overlap the peak guard band");
  if (opts.floor_bins < 4)
    throw std::invalid_argument("floor_bins must be at least 4");

  const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, centre - hw);
  const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(count - 1, centre + hw);
  double integrated = 0.0;
  for (std::ptrdiff_t k = lo; k <= hi; ++k) integrated += psd.values[k] * df;

  std::vector<double> floor_bins;
  for (std::ptrdiff_t k = centre - guard - opts.floor_bins;
       k < centre - guard; ++k)
    if (k >= 0 && k < count) floor_bins.push_back(psd.values[k]);
  for (std::ptrdiff_t k = centre + guard + 1;
       k <= centre + guard + opts.floor_bins; ++k)
    if (k >= 0 && k < count) floor_bins.push_back(psd.values[k]);
  if (floor_bins.size() < 8)
    throw std::invalid_argument(
        "not enough flanking bins to estimate the local floor");

  PeakExtraction out;
  out.local_floor = median_of(std::move(floor_bins));
  out.peak_power =
      integrated - out.local_floor * static_cast<double>(hi - lo + 1) * df;
  return out;
}

FanoEstimate estimate_fano(const PsdEstimate& test, const PsdEstimate& ref,
                           const PsdEstimate* electronic, double band_lo_hz,
                           double band_hi_hz) {
  const auto compatible = [&](const PsdEstimate& other) {
    return other.freqs.size() == test.freqs.size() &&
           std::abs(other.bin_width_hz - test.bin_width_hz) <
               1e-9 * test.bin_width_hz;
  };
  if (!compatible(ref) || (electronic && !compatible(*electronic)))
    throw std::invalid_argument(
        "estimate_fano: PSD grids do not match (same rbw and sample rate "
        "required)");
  if (!(band_lo_hz < band_hi_hz))
    throw std::invalid_argument("estimate_fano: empty band");

  std::vector<double> ratios;
  for (std::size_t k = 0; k < test.freqs.size(); ++k) {
    const double f = test.freqs[k];
    if (f < band_lo_hz || f > band_hi_hz) continue;
    const double dark = electronic ? electronic->values[k] : 0.0;
    const double den = ref.values[k] - dark;
    if (den <= 0.0)
      throw std::runtime_error(
          "estimate_fano: reference at " + format_double(f) +
          " Hz does not clear the electronic floor");
    ratios.push_back((test.values[k] - dark) / den);
  }
  if (ratios.size() < 8)
    throw std::invalid_argument("estimate_fano: fewer than 8 bins in band");

  FanoEstimate est;
  est.value = median_of(ratios);
  if (!(est.value > 0.0))
    throw std::runtime_error(
        "estimate_fano: non-positive estimate, electronic subtraction "
        "exceeds the test floor");
  std::vector<double> dev(ratios.size());
  for (std::size_t i = 0; i < ratios.size(); ++i)
    dev[i] = std::abs(ratios[i] - est.value);
  const double mad = median_of(std::move(dev));
  // Std error of the median under an approximately normal bin dispersion.
  est.std_error = 1.2533 * 1.4826 * mad /
                  std::sqrt(static_cast<double>(ratios.size()));
  est.band_lo_hz = band_lo_hz;
  est.band_hi_hz = band_hi_hz;
  return est;
}

double per_pulse_energy_kappa(double rep_rate_hz) {
  if (!(rep_rate_hz > 0.0))
    throw std::invalid_argument("rep_rate must be > 0");
  return 2.0 / (rep_rate_hz * rep_rate_hz);
}

std::size_t averages_for_vbw(double rbw_hz, double vbw_hz) {
  if (!(rbw_hz > 0.0) || !(vbw_hz > 0.0))
    throw std::invalid_argument("rbw and vbw must be > 0");
  const long long k = std::llround(rbw_hz / vbw_hz);
  return k < 1 ? 1 : static_cast<std::size_t>(k);
}

double to_db(double value, double reference) {
  if (!(value > 0.0) || !(reference > 0.0))
    throw std::invalid_argument("to_db needs positive value and reference");
  return 10.0 * std::log10(value / reference);
}

void write_psd_csv(const PsdEstimate& psd, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "freq_hz,psd,rbw_hz,averages,window\n";
  for (std::size_t k = 0; k < psd.freqs.size(); ++k) {
    out << format_double(psd.freqs[k]) << ',' << format_double(psd.values[k])
        << ',' << format_double(psd.rbw_hz) << ',' << psd.vbw_averages << ','
        << psd.window << '\n';
  }
  if (!out) throw IoError("short write on " + path);
}

}  // namespace qsem
