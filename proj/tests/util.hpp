// util.hpp
// Shared helpers for the test suite: deterministic noise, energy measures,
// Welch cross-spectral estimation, and the analytic coherence forward model
// used as an independent oracle for the CDR estimators.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "cetk/fft.hpp"

namespace testutil {

inline std::mt19937_64 rng(uint64_t seed) { return std::mt19937_64(seed); }

inline std::vector<double> white_noise(size_t n, std::mt19937_64& gen, double sigma = 1.0) {
  std::normal_distribution<double> dist(0.0, sigma);
  std::vector<double> out(n);
  for (auto& x : out) x = dist(gen);
  return out;
}

inline double energy(std::span<const double> x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  return e;
}

inline double db10(double ratio) { return 10.0 * std::log10(ratio); }

// Relative round-trip error in dB over [begin, end).
inline double relative_error_db(std::span<const double> ref, std::span<const double> test,
                                size_t begin, size_t end) {
  double num = 0.0, den = 0.0;
  for (size_t i = begin; i < end; ++i) {
    const double d = ref[i] - test[i];
    num += d * d;
    den += ref[i] * ref[i];
  }
  return db10(num / den);
}

// Complex coherence between two signals via Welch averaging with a periodic
// Hann window and 50% overlap. Returns one value per bin (seg_len/2+1).
inline std::vector<std::complex<double>> welch_coherence(std::span<const double> x,
                                                         std::span<const double> y,
                                                         int seg_len) {
  const int hop = seg_len / 2;
  const int bins = seg_len / 2 + 1;
  std::vector<double> win(seg_len);
  for (int n = 0; n < seg_len; ++n)
    win[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / seg_len);

  cetk::RealFft fft(seg_len);
  std::vector<double> buf(seg_len);
  std::vector<std::complex<double>> X(bins), Y(bins);
  std::vector<double> pxx(bins, 0.0), pyy(bins, 0.0);
  std::vector<std::complex<double>> pxy(bins, 0.0);

  const size_t n = std::min(x.size(), y.size());
  size_t count = 0;
  for (size_t start = 0; start + seg_len <= n; start += hop, ++count) {
    for (int i = 0; i < seg_len; ++i) buf[i] = x[start + i] * win[i];
    fft.forward(buf, X);
    for (int i = 0; i < seg_len; ++i) buf[i] = y[start + i] * win[i];
    fft.forward(buf, Y);
    for (int k = 0; k < bins; ++k) {
      pxx[k] += std::norm(X[k]);
      pyy[k] += std::norm(Y[k]);
      pxy[k] += X[k] * std::conj(Y[k]);
    }
  }
  std::vector<std::complex<double>> coh(bins, 0.0);
  for (int k = 0; k < bins; ++k)
    if (pxx[k] > 0 && pyy[k] > 0) coh[k] = pxy[k] / std::sqrt(pxx[k] * pyy[k]);
  return coh;
}

// Welch auto-PSD (arbitrary scale, consistent across calls with same seg_len).
inline std::vector<double> welch_psd(std::span<const double> x, int seg_len) {
  const int hop = seg_len / 2;
  const int bins = seg_len / 2 + 1;
  std::vector<double> win(seg_len);
  for (int n = 0; n < seg_len; ++n)
    win[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / seg_len);
  cetk::RealFft fft(seg_len);
  std::vector<double> buf(seg_len);
  std::vector<std::complex<double>> X(bins);
  std::vector<double> p(bins, 0.0);
  size_t count = 0;
  for (size_t start = 0; start + seg_len <= x.size(); start += hop, ++count) {
    for (int i = 0; i < seg_len; ++i) buf[i] = x[start + i] * win[i];
    fft.forward(buf, X);
    for (int k = 0; k < bins; ++k) p[k] += std::norm(X[k]);
  }
  if (count > 0)
    for (auto& v : p) v /= static_cast<double>(count);
  return p;
}

// Forward model of the mixed-field coherence: Gamma_x for a field with
// coherent-to-diffuse power ratio rho, diffuse coherence gn and direct-path
// coherence gs.
inline std::complex<double> coherence_forward_model(double rho, double gn,
                                                    std::complex<double> gs) {
  return (gn + rho * gs) / (1.0 + rho);
}

// Scalar bisection for f(x) = 0 on [lo, hi]; f(lo) and f(hi) must bracket.
template <typename F>
double bisect(F f, double lo, double hi, int iters = 200) {
  double flo = f(lo);
  for (int i = 0; i < iters; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if ((flo <= 0 && fm <= 0) || (flo > 0 && fm > 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace testutil
