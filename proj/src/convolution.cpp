#include "perfectsim/convolution.hpp"

#include <algorithm>
#include <cstring>
#include <cmath>
#include <mutex>

#include <fftw3.h>

#include "perfectsim/error.hpp"

namespace perfectsim {

namespace {

// The FFTW planner is not thread-safe.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

constexpr double kUnit = 0x1.0p-52;

}  // namespace

void causal_convolution_direct(std::span<const double> h, std::span<const double> m,
                               std::span<double> out, bool parallel) {
  const std::size_t g = m.size();
  if (out.size() != g + 1) throw Error("convolution: output must have m.size() + 1 entries");
  const std::size_t k_len = h.size();
  const auto count = static_cast<long long>(g + 1);
#pragma omp parallel for schedule(static) if (parallel && g > 256)
  for (long long ii = 0; ii < count; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    const std::size_t kmax = std::min(i, k_len);
    double s = 0.0;
    for (std::size_t k = 0; k < kmax; ++k) s += h[k] * m[i - 1 - k];
    out[i] = s;
  }
}

FftConvolver::FftConvolver(std::span<const double> h, std::size_t m_len) : m_len_(m_len) {
  const std::size_t need = h.size() + m_len;
  n_ = 1;
  while (n_ < need) n_ *= 2;
  const std::size_t nc = n_ / 2 + 1;
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    real_ = fftw_alloc_real(n_);
    spec_ = fftw_alloc_complex(nc);
    hspec_ = fftw_alloc_complex(nc);
    fwd_ = fftw_plan_dft_r2c_1d(static_cast<int>(n_), real_, static_cast<fftw_complex*>(spec_),
                                FFTW_ESTIMATE);
    inv_ = fftw_plan_dft_c2r_1d(static_cast<int>(n_), static_cast<fftw_complex*>(spec_), real_,
                                FFTW_ESTIMATE);
  }
  if (!real_ || !spec_ || !hspec_ || !fwd_ || !inv_) throw Error("fftw allocation failed");
  std::fill(real_, real_ + n_, 0.0);
  double s2 = 0.0;
  for (std::size_t k = 0; k < h.size(); ++k) {
    real_[k] = h[k];
    s2 += h[k] * h[k];
  }
  h_norm2_ = std::sqrt(s2);
  fftw_execute(static_cast<fftw_plan>(fwd_));
  std::memcpy(hspec_, spec_, nc * sizeof(fftw_complex));
}

FftConvolver::~FftConvolver() {
  std::lock_guard<std::mutex> lock(planner_mutex());
  if (fwd_) fftw_destroy_plan(static_cast<fftw_plan>(fwd_));
  if (inv_) fftw_destroy_plan(static_cast<fftw_plan>(inv_));
  fftw_free(real_);
  fftw_free(spec_);
  fftw_free(hspec_);
}

void FftConvolver::apply(std::span<const double> m, std::span<double> out) {
  if (m.size() != m_len_ || out.size() != m_len_ + 1) throw Error("fft convolution: size mismatch");
  std::fill(real_, real_ + n_, 0.0);
  double s2 = 0.0;
  for (std::size_t k = 0; k < m.size(); ++k) {
    real_[k] = m[k];
    s2 += m[k] * m[k];
  }
  fftw_execute(static_cast<fftw_plan>(fwd_));
  auto* s = static_cast<fftw_complex*>(spec_);
  const auto* hs = static_cast<const fftw_complex*>(hspec_);
  const double scale = 1.0 / static_cast<double>(n_);
  for (std::size_t k = 0; k < n_ / 2 + 1; ++k) {
    const double re = s[k][0] * hs[k][0] - s[k][1] * hs[k][1];
    const double im = s[k][0] * hs[k][1] + s[k][1] * hs[k][0];
    s[k][0] = re * scale;
    s[k][1] = im * scale;
  }
  fftw_execute(static_cast<fftw_plan>(inv_));
  out[0] = 0.0;
  for (std::size_t i = 1; i <= m_len_; ++i) out[i] = real_[i - 1];
  // Worst-case rounding of a radix-2 FFT convolution grows like log2(n) u |h|_2 |m|_2;
  // the constant is deliberately loose.
  const double log2n = std::log2(static_cast<double>(n_));
  last_bound_ = (10.0 * log2n + 20.0) * kUnit * h_norm2_ * std::sqrt(s2);
}

}  // namespace perfectsim
