#pragma once
// Complex FFT for the spectrum estimator. Mixed-radix Cooley-Tukey for
// lengths whose factors are 2, 3 and 5; Bluestein's algorithm on a
// power-of-two grid for everything else, so any length works.

#include <complex>
#include <cstddef>
#include <memory>
#include <vector>

namespace qsem {

class FftPlan {
 public:
  explicit FftPlan(std::size_t n);

  std::size_t size() const { return n_; }

  // out must not alias in; both hold size() elements.
  void forward(const std::complex<double>* in, std::complex<double>* out);
  void inverse(const std::complex<double>* in, std::complex<double>* out);

  std::vector<std::complex<double>> forward(
      const std::vector<std::complex<double>>& in);

  static bool is_5smooth(std::size_t n);
  // Closest even 5-smooth integer to target (>= 8).
  static std::size_t nearest_even_5smooth(std::size_t target);

 private:
  void smooth_fft(const std::complex<double>* in, std::complex<double>* out,
                  std::size_t n, std::size_t stride) const;
  void bluestein(const std::complex<double>* in, std::complex<double>* out);

  std::size_t n_ = 0;
  bool smooth_ = false;
  std::vector<std::complex<double>> twiddle_;  // exp(-2 pi i k / n)

  // Bluestein state
  std::unique_ptr<FftPlan> pad_plan_;
  std::vector<std::complex<double>> chirp_;      // exp(+i pi k^2 / n)
  std::vector<std::complex<double>> chirp_fft_;  // FFT of the padded chirp
  std::vector<std::complex<double>> work_a_;
  std::vector<std::complex<double>> work_b_;
};

}  // namespace qsem
