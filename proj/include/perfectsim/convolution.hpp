#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace perfectsim {

/// How the causal convolution in the Phi operator is evaluated.
///  serial:    direct double loop, single thread (reference)
///  parallel:  direct double loop, OpenMP over output nodes
///  fft:       FFT with an explicit rounding bound
///  automatic: parallel for short kernels, fft otherwise
enum class ConvMethod { serial, parallel, fft, automatic };

/// out[i] = sum_{k=0}^{i-1} h[k] * m[i-1-k] for i = 0..m.size() (h is zero
/// beyond its length). out must have m.size() + 1 entries.
void causal_convolution_direct(std::span<const double> h, std::span<const double> m,
                               std::span<double> out, bool parallel);

/// Same convolution through a real FFT of fixed size; the spectrum of h is
/// computed once. Not thread-safe: one instance per thread.
class FftConvolver {
 public:
  FftConvolver(std::span<const double> h, std::size_t m_len);
  ~FftConvolver();
  FftConvolver(const FftConvolver&) = delete;
  FftConvolver& operator=(const FftConvolver&) = delete;

  void apply(std::span<const double> m, std::span<double> out);
  /// Bound on |computed - exact| for every output entry of the last apply.
  double last_error_bound() const noexcept { return last_bound_; }

 private:
  std::size_t n_;
  std::size_t m_len_;
  double h_norm2_ = 0.0;
  double last_bound_ = 0.0;
  double* real_ = nullptr;
  void* spec_ = nullptr;   // fftw_complex*
  void* hspec_ = nullptr;  // fftw_complex*
  void* fwd_ = nullptr;    // fftw_plan
  void* inv_ = nullptr;    // fftw_plan
};

}  // namespace perfectsim
