// beamformer.hpp
// GCC-PHAT time-delay estimation, segment-wise TDOA track smoothing, and the
// weighted delay-and-sum combination  Y(l,f) = sum_n w_n e^{-j2pi f tau_n} X_n(l,f).

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "cetk/fft.hpp"
#include "cetk/filterbank.hpp"

namespace cetk {

struct GccPhatResult {
  double delay_s = 0.0;    // how much `other` lags `ref`; negative if it leads
  double confidence = 0.0; // normalized correlation peak in [0, 1]
};

// Phase-transform cross-correlation with parabolic sub-sample interpolation.
// Segments below the energy floor yield zero delay with zero confidence.
inline GccPhatResult gcc_phat_tdoa(std::span<const double> ref, std::span<const double> other,
                                   double max_lag_s, double sample_rate) {
  if (ref.size() != other.size())
    throw std::invalid_argument("gcc_phat_tdoa: segments must have equal length");
  const int len = static_cast<int>(ref.size());
  const int max_lag = std::max(1, static_cast<int>(std::lround(max_lag_s * sample_rate)));
  if (len < 4 * max_lag) throw std::invalid_argument("gcc_phat_tdoa: segment shorter than 4x max lag");

  double e_ref = 0.0, e_other = 0.0;
  for (double v : ref) e_ref += v * v;
  for (double v : other) e_other += v * v;
  constexpr double kSilenceRms = 1e-8;
  if (e_ref < kSilenceRms * kSilenceRms * len || e_other < kSilenceRms * kSilenceRms * len)
    return {0.0, 0.0};

  const int nfft = next_pow2(len + max_lag + 1);
  RealFft fft(nfft);
  std::vector<double> buf(nfft, 0.0);
  std::vector<std::complex<double>> spec_ref(fft.bins()), spec_other(fft.bins());
  std::copy(ref.begin(), ref.end(), buf.begin());
  fft.forward(buf, spec_ref);
  std::fill(buf.begin(), buf.end(), 0.0);
  std::copy(other.begin(), other.end(), buf.begin());
  fft.forward(buf, spec_other);

  std::vector<std::complex<double>> cross(fft.bins());
  for (int k = 0; k < fft.bins(); ++k) {
    const std::complex<double> c = std::conj(spec_ref[k]) * spec_other[k];
    const double mag = std::abs(c);
    cross[k] = mag > 1e-30 ? c / mag : std::complex<double>{0.0, 0.0};
  }
  std::vector<double> corr(nfft);
  fft.inverse(cross, corr);

  auto corr_at = [&](int lag) { return corr[lag >= 0 ? lag : nfft + lag]; };
  int best_lag = 0;
  double best = corr_at(0);
  for (int lag = -max_lag; lag <= max_lag; ++lag) {
    if (corr_at(lag) > best) {
      best = corr_at(lag);
      best_lag = lag;
    }
  }

  // Parabolic refinement only when the neighbours carry real peak mass; an
  // integer delay leaves them near zero under the phase transform and is
  // returned as-is.
  double frac = 0.0;
  if (best_lag > -max_lag && best_lag < max_lag) {
    const double ym = corr_at(best_lag - 1), y0 = corr_at(best_lag), yp = corr_at(best_lag + 1);
    if (std::max(ym, yp) > 0.25 * y0) {
      const double denom = ym - 2.0 * y0 + yp;
      if (std::abs(denom) > 1e-12) frac = std::clamp(0.5 * (ym - yp) / denom, -0.5, 0.5);
    }
  }
  return {(best_lag + frac) / sample_rate, std::clamp(best, 0.0, 1.0)};
}

struct TdoaTrack {
  std::vector<std::vector<double>> tdoas;  // [segment][channel]
  std::vector<double> confidence;          // [segment]
  bool all_low_confidence = false;
};

// Replaces low-confidence segments by the per-channel median over the nearest
// confident segments (up to two on each side). A track without any confident
// segment falls back to broadside (all-zero TDOAs) and is flagged.
inline TdoaTrack smooth_tdoa_track(const TdoaTrack& in, double confidence_threshold) {
  if (in.tdoas.empty()) throw std::invalid_argument("smooth_tdoa_track: empty track");
  const int segments = static_cast<int>(in.tdoas.size());
  const int channels = static_cast<int>(in.tdoas[0].size());

  std::vector<int> confident;
  for (int s = 0; s < segments; ++s)
    if (in.confidence[s] >= confidence_threshold) confident.push_back(s);

  TdoaTrack out = in;
  if (confident.empty()) {
    for (auto& seg : out.tdoas) std::fill(seg.begin(), seg.end(), 0.0);
    out.all_low_confidence = true;
    return out;
  }

  for (int s = 0; s < segments; ++s) {
    if (in.confidence[s] >= confidence_threshold) continue;
    // nearest confident neighbours: up to two below, up to two above
    auto it = std::lower_bound(confident.begin(), confident.end(), s);
    std::vector<int> sources;
    if (it != confident.begin()) {
      sources.push_back(*std::prev(it));
      if (std::prev(it) != confident.begin()) sources.push_back(*std::prev(it, 2));
    }
    if (it != confident.end()) {
      sources.push_back(*it);
      if (std::next(it) != confident.end()) sources.push_back(*std::next(it));
    }
    std::vector<double> vals(sources.size());
    for (int c = 0; c < channels; ++c) {
      for (size_t i = 0; i < sources.size(); ++i) vals[i] = in.tdoas[sources[i]][c];
      std::sort(vals.begin(), vals.end());
      const size_t m = vals.size();
      out.tdoas[s][c] = m % 2 ? vals[m / 2] : 0.5 * (vals[m / 2 - 1] + vals[m / 2]);
    }
  }
  return out;
}

struct BeamformerWeights {
  std::vector<double> gains;  // frequency-independent channel weights
  std::vector<double> tdoas;  // seconds, steering delays per channel

  void validate() const {
    if (gains.empty() || gains.size() != tdoas.size())
      throw std::invalid_argument("BeamformerWeights: bad dimensions");
    double sum = 0.0;
    for (double g : gains) {
      if (g < 0.0) throw std::invalid_argument("BeamformerWeights: negative channel weight");
      sum += g;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw std::invalid_argument("BeamformerWeights: channel weights must sum to one");
  }

  static BeamformerWeights uniform(int channels, std::vector<double> tdoas_s) {
    BeamformerWeights w;
    w.gains.assign(channels, 1.0 / channels);
    w.tdoas = std::move(tdoas_s);
    return w;
  }
};

// Steered sum over all channels of a tensor, producing a single-channel
// tensor. A plane wave matching the steering TDOAs passes with unit gain.
inline TfTensor steer_and_sum(const TfTensor& x, const BeamformerWeights& w,
                              const FilterbankConfig& cfg) {
  w.validate();
  if (static_cast<int>(w.gains.size()) != x.channels)
    throw std::invalid_argument("steer_and_sum: weights/channels mismatch");
  if (x.bins != cfg.bins()) throw std::invalid_argument("steer_and_sum: tensor/config mismatch");

  std::vector<std::complex<double>> phasor(static_cast<size_t>(x.channels) * x.bins);
  for (int n = 0; n < x.channels; ++n)
    for (int f = 0; f < x.bins; ++f)
      phasor[static_cast<size_t>(n) * x.bins + f] =
          w.gains[n] *
          std::polar(1.0, -2.0 * std::numbers::pi * cfg.bin_hz(f) * w.tdoas[n]);

  TfTensor y(1, x.frames, x.bins);
  for (int l = 0; l < x.frames; ++l) {
    auto out = y.channel_frame(0, l);
    for (int n = 0; n < x.channels; ++n) {
      auto in = x.channel_frame(n, l);
      const std::complex<double>* ph = &phasor[static_cast<size_t>(n) * x.bins];
      for (int f = 0; f < x.bins; ++f) out[f] += ph[f] * in[f];
    }
  }
  return y;
}

// Utterance-level screening of failing channels: a channel is dropped when
// its broadband energy deviates from the median channel by more than 20 dB,
// or when its peak normalized cross-correlation with every other channel
// stays below 0.2.
inline std::vector<bool> screen_channels(const std::vector<std::vector<double>>& audio,
                                         double sample_rate, double max_lag_s = 5e-3) {
  const int n = static_cast<int>(audio.size());
  std::vector<bool> keep(n, true);
  if (n < 3) return keep;  // keep everything when there is nothing to vote with

  std::vector<double> energy(n, 0.0);
  for (int c = 0; c < n; ++c)
    for (double v : audio[c]) energy[c] += v * v;
  std::vector<double> sorted = energy;
  std::sort(sorted.begin(), sorted.end());
  const double median =
      n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);

  for (int c = 0; c < n; ++c) {
    if (median <= 0.0) break;
    if (energy[c] <= 0.0 || std::abs(10.0 * std::log10(energy[c] / median)) > 20.0)
      keep[c] = false;
  }

  // normalized cross-correlation on a centered window
  const size_t len = audio[0].size();
  const size_t win = std::min<size_t>(len, 1 << 16);
  const size_t start = (len - win) / 2;
  const int max_lag = std::max(1, static_cast<int>(std::lround(max_lag_s * sample_rate)));
  const int nfft = next_pow2(static_cast<int>(win) + max_lag + 1);
  RealFft fft(nfft);
  std::vector<std::vector<std::complex<double>>> spec(n);
  std::vector<double> buf(nfft, 0.0);
  std::vector<double> win_energy(n, 0.0);
  for (int c = 0; c < n; ++c) {
    std::fill(buf.begin(), buf.end(), 0.0);
    for (size_t i = 0; i < win; ++i) {
      buf[i] = audio[c][start + i];
      win_energy[c] += buf[i] * buf[i];
    }
    spec[c].resize(fft.bins());
    fft.forward(buf, spec[c]);
  }
  std::vector<std::complex<double>> cross(fft.bins());
  std::vector<double> corr(nfft);
  for (int c = 0; c < n; ++c) {
    if (!keep[c]) continue;
    double best = 0.0;
    for (int o = 0; o < n && best < 0.2; ++o) {
      if (o == c || win_energy[c] <= 0.0 || win_energy[o] <= 0.0) continue;
      for (int k = 0; k < fft.bins(); ++k) cross[k] = std::conj(spec[c][k]) * spec[o][k];
      fft.inverse(cross, corr);  // circular cross-correlation
      const double norm = std::sqrt(win_energy[c] * win_energy[o]);
      for (int lag = -max_lag; lag <= max_lag; ++lag)
        best = std::max(best, corr[lag >= 0 ? lag : nfft + lag] / norm);
    }
    if (best < 0.2) keep[c] = false;
  }
  return keep;
}

}  // namespace cetk
