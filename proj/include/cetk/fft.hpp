// fft.hpp
// Thin RAII wrapper around FFTW's real-to-complex transforms. One RealFft
// object owns its plans and scratch buffers; objects are not safe to share
// across threads (use one per thread).

#pragma once

#include <complex>
#include <cstring>
#include <span>
#include <stdexcept>
#include <vector>

#include <fftw3.h>

namespace cetk {

class RealFft {
 public:
  explicit RealFft(int size) : n_(size) {
    if (size <= 0) throw std::invalid_argument("RealFft: size must be positive");
    rbuf_ = fftw_alloc_real(static_cast<size_t>(n_));
    cbuf_ = fftw_alloc_complex(static_cast<size_t>(n_ / 2 + 1));
    fwd_ = fftw_plan_dft_r2c_1d(n_, rbuf_, cbuf_, FFTW_ESTIMATE);
    inv_ = fftw_plan_dft_c2r_1d(n_, cbuf_, rbuf_, FFTW_ESTIMATE);
    if (!fwd_ || !inv_) throw std::runtime_error("RealFft: plan creation failed");
  }

  ~RealFft() {
    if (fwd_) fftw_destroy_plan(fwd_);
    if (inv_) fftw_destroy_plan(inv_);
    if (rbuf_) fftw_free(rbuf_);
    if (cbuf_) fftw_free(cbuf_);
  }

  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;
  RealFft(RealFft&& o) noexcept
      : n_(o.n_), rbuf_(o.rbuf_), cbuf_(o.cbuf_), fwd_(o.fwd_), inv_(o.inv_) {
    o.rbuf_ = nullptr;
    o.cbuf_ = nullptr;
    o.fwd_ = nullptr;
    o.inv_ = nullptr;
  }
  RealFft& operator=(RealFft&&) = delete;

  int size() const { return n_; }
  int bins() const { return n_ / 2 + 1; }

  // Unnormalized forward transform; out must hold size()/2 + 1 bins.
  void forward(std::span<const double> in, std::span<std::complex<double>> out) {
    if (static_cast<int>(in.size()) != n_ || static_cast<int>(out.size()) != bins())
      throw std::invalid_argument("RealFft::forward: size mismatch");
    std::memcpy(rbuf_, in.data(), sizeof(double) * in.size());
    fftw_execute(fwd_);
    std::memcpy(out.data(), cbuf_, sizeof(fftw_complex) * out.size());
  }

  // Inverse transform including the 1/N factor, so inverse(forward(x)) == x.
  void inverse(std::span<const std::complex<double>> in, std::span<double> out) {
    if (static_cast<int>(in.size()) != bins() || static_cast<int>(out.size()) != n_)
      throw std::invalid_argument("RealFft::inverse: size mismatch");
    std::memcpy(cbuf_, in.data(), sizeof(fftw_complex) * in.size());
    fftw_execute(inv_);
    const double scale = 1.0 / n_;
    for (int i = 0; i < n_; ++i) out[i] = rbuf_[i] * scale;
  }

 private:
  int n_ = 0;
  double* rbuf_ = nullptr;
  fftw_complex* cbuf_ = nullptr;
  fftw_plan fwd_ = nullptr;
  fftw_plan inv_ = nullptr;
};

inline int next_pow2(int n) {
  int p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace cetk
