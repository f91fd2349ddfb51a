#pragma once
// Spectrum-analyzer emulation: Welch-averaged one-sided PSD with the
// resolution bandwidth realised through the segment length and the window
// equivalent noise bandwidth, video bandwidth through segment averaging,
// peak and floor extraction, and Fano estimation from power-matched pairs.
//
// Convention: PSDs are one-sided over (0, sample_rate/2], in units^2/Hz,
// taken about the trace mean. Summing values * bin_width reproduces the
// trace variance (exactly so for a rectangular single-segment estimate).
// A tone of amplitude a integrates to a^2/2.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "qsem/trace_sim.hpp"

namespace qsem {

struct PsdEstimate {
  std::vector<double> freqs;   // Hz, (0, fs/2]
  std::vector<double> values;  // one-sided PSD
  double rbw_hz = 0.0;         // enbw_bins * fs / segment_length
  std::size_t vbw_averages = 0;
  std::string window;
  double sample_rate_hz = 0.0;
  double bin_width_hz = 0.0;
  double enbw_bins = 0.0;
  std::size_t segment_length = 0;
};

struct FanoEstimate {
  double value = 0.0;
  double std_error = 0.0;
  double band_lo_hz = 0.0;
  double band_hi_hz = 0.0;
};

struct PeakExtraction {
  double peak_power = 0.0;   // band-integrated, floor removed
  double local_floor = 0.0;  // density from flanking bins
};

struct PeakOptions {
  int peak_halfwidth_bins = -1;  // -1: window main lobe
  int guard_bins = -1;           // -1: 3x the peak halfwidth
  int floor_bins = 64;           // flank width used for the floor median
};

// Welch estimate at the requested resolution bandwidth. The implied
// segment length is rounded to the closest even 5-smooth integer and the
// effective rbw is reported in the result. Segments are spread evenly
// over the trace, overlapping at most 50%.
PsdEstimate estimate_psd(const std::vector<double>& samples,
                         double sample_rate_hz, double rbw_hz,
                         std::size_t averages,
                         const std::string& window = "hann");
PsdEstimate estimate_psd(const TraceRecord& trace, double rbw_hz,
                         std::size_t averages,
                         const std::string& window = "hann");

// Band-integrated power of the peak at f0 minus the local floor estimated
// from flanking bins outside a guard band.
PeakExtraction extract_peak(const PsdEstimate& psd, double f0_hz,
                            const PeakOptions& opts = {});

// Median over the band of (test - electronic) / (reference - electronic).
// Pass electronic = nullptr when no dark trace was taken.
FanoEstimate estimate_fano(const PsdEstimate& test, const PsdEstimate& ref,
                           const PsdEstimate* electronic, double band_lo_hz,
                           double band_hi_hz);

// Instrument scale that maps the analytic flux-based spectral components
// onto one-sided PSDs of per-pulse-energy traces: kappa = 2 / rep_rate^2.
double per_pulse_energy_kappa(double rep_rate_hz);

// Spectrum-analyzer equivalence: video bandwidth realised as
// round(rbw / vbw) segment averages.
std::size_t averages_for_vbw(double rbw_hz, double vbw_hz);

double to_db(double value, double reference);

// CSV export with columns freq_hz, psd, rbw_hz, averages, window.
void write_psd_csv(const PsdEstimate& psd, const std::string& path);

}  // namespace qsem
