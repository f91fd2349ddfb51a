#include "qsem/fft.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace qsem {

namespace {

constexpr double kPi = 3.141592653589793238462643383279;

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace

bool FftPlan::is_5smooth(std::size_t n) {
  if (n == 0) return false;
  for (std::size_t f : {2, 3, 5})
    while (n % f == 0) n /= f;
  return n == 1;
}

std::size_t FftPlan::nearest_even_5smooth(std::size_t target) {
  if (target < 8) target = 8;
  const double goal = std::log(static_cast<double>(target));
  double best_err = 1e30;
  std::size_t best = 8;
  // 2^a 3^b 5^c with a >= 1 keeps the length even. For every odd part,
  // probe the largest power-of-two multiple at or below the target and the
  // first one above it.
  for (std::size_t b = 0, p3 = 1; p3 <= 4 * target; ++b, p3 *= 3) {
    for (std::size_t c = 0, p5 = p3; p5 <= 4 * target; ++c, p5 *= 5) {
      std::size_t v = 2 * p5;
      while (v * 2 <= target) v *= 2;
      for (int k = 0; k < 2; ++k, v *= 2) {
        if (v < 8) continue;
        const double err = std::abs(std::log(static_cast<double>(v)) - goal);
        if (err < best_err) {
          best_err = err;
          best = v;
        }
      }
    }
  }
  return best;
}

FftPlan::FftPlan(std::size_t n) : n_(n) {
  if (n == 0) throw std::invalid_argument("FftPlan: size must be positive");
  smooth_ = is_5smooth(n);
  twiddle_.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double phi = -2.0 * kPi * static_cast<double>(k) /
                       static_cast<double>(n);
    twiddle_[k] = {std::cos(phi), std::sin(phi)};
  }
  if (!smooth_ && n > 1) {
    const std::size_t m = next_pow2(2 * n - 1);
    pad_plan_ = std::make_unique<FftPlan>(m);
    chirp_.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      // k^2 mod 2n keeps the chirp argument small and exact.
      const std::size_t q = (k * k) % (2 * n);
      const double phi = kPi * static_cast<double>(q) / static_cast<double>(n);
      chirp_[k] = {std::cos(phi), std::sin(phi)};
    }
    std::vector<std::complex<double>> b(m, {0.0, 0.0});
    b[0] = chirp_[0];
    for (std::size_t k = 1; k < n; ++k) {
      b[k] = chirp_[k];
      b[m - k] = chirp_[k];
    }
    chirp_fft_.resize(m);
    pad_plan_->forward(b.data(), chirp_fft_.data());
    work_a_.resize(m);
    work_b_.resize(m);
  }
}

void FftPlan::smooth_fft(const std::complex<double>* in,
                         std::complex<double>* out, std::size_t n,
                         std::size_t stride) const {
  if (n == 1) {
    out[0] = in[0];
    return;
  }
  std::size_t radix = 5;
  if (n % 2 == 0)
    radix = 2;
  else if (n % 3 == 0)
    radix = 3;
  const std::size_t m = n / radix;

  for (std::size_t q = 0; q < radix; ++q)
    smooth_fft(in + q * stride, out + q * m, m, stride * radix);

  // X[k + j m] = sum_q w^{q (k + j m)} F_q[k], where w for the current
  // length n equals the top-level twiddle at stride.
  std::array<std::complex<double>, 5> t;
  for (std::size_t k = 0; k < m; ++k) {
    for (std::size_t q = 0; q < radix; ++q) t[q] = out[q * m + k];
    for (std::size_t j = 0; j < radix; ++j) {
      const std::size_t kk = j * m + k;
      std::complex<double> acc = t[0];
      for (std::size_t q = 1; q < radix; ++q) {
        const std::size_t idx = (kk * q * stride) % n_;
        acc += t[q] * twiddle_[idx];
      }
      out[kk] = acc;
    }
  }
}

void FftPlan::bluestein(const std::complex<double>* in,
                        std::complex<double>* out) {
  const std::size_t m = pad_plan_->size();
  for (std::size_t k = 0; k < n_; ++k)
    work_a_[k] = in[k] * std::conj(chirp_[k]);
  for (std::size_t k = n_; k < m; ++k) work_a_[k] = {0.0, 0.0};
  pad_plan_->forward(work_a_.data(), work_b_.data());
  for (std::size_t k = 0; k < m; ++k) work_b_[k] *= chirp_fft_[k];
  pad_plan_->inverse(work_b_.data(), work_a_.data());
  for (std::size_t k = 0; k < n_; ++k)
    out[k] = work_a_[k] * std::conj(chirp_[k]);
}

void FftPlan::forward(const std::complex<double>* in,
                      std::complex<double>* out) {
  if (smooth_)
    smooth_fft(in, out, n_, 1);
  else
    bluestein(in, out);
}

void FftPlan::inverse(const std::complex<double>* in,
                      std::complex<double>* out) {
  std::vector<std::complex<double>> tmp(n_);
  for (std::size_t k = 0; k < n_; ++k) tmp[k] = std::conj(in[k]);
  forward(tmp.data(), out);
  const double scale = 1.0 / static_cast<double>(n_);
  for (std::size_t k = 0; k < n_; ++k) out[k] = std::conj(out[k]) * scale;
}

std::vector<std::complex<double>> FftPlan::forward(
    const std::vector<std::complex<double>>& in) {
  if (in.size() != n_) throw std::invalid_argument("FftPlan: size mismatch");
  std::vector<std::complex<double>> out(n_);
  forward(in.data(), out.data());
  return out;
}

}  // namespace qsem
