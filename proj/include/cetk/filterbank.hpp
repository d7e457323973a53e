// filterbank.hpp
// DFT-based uniform analysis/synthesis filterbank. The default configuration
// uses a window longer than the FFT size, which is handled by time-aliased
// folding of the windowed frame before the transform (weighted overlap-add
// polyphase form). window_length == fft_size degenerates to a plain STFT.
//
// The synthesis window is designed at construction by solving, per residue
// class modulo the hop, the linear constraints
//     sum_l g[n-lR] w[n-lR]      = 1        (unity gain)
//     sum_l g[n-lR] w[n-lR+sM]   = 0, s!=0  (alias cancellation)
// in the minimum-norm sense. For windows satisfying these constraints the
// round trip reconstructs the interior of the signal to machine precision.

#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "cetk/fft.hpp"

namespace cetk {

enum class WindowShape { hann, sqrt_hann };

struct FilterbankConfig {
  int window_length = 1024;
  int fft_size = 512;
  int hop = 128;
  double sample_rate = 16000.0;
  WindowShape window_shape = WindowShape::hann;

  int bins() const { return fft_size / 2 + 1; }
  int folds() const { return window_length / fft_size; }
  double bin_hz(int k) const { return k * sample_rate / fft_size; }
  double frame_rate_hz() const { return sample_rate / hop; }

  // Number of analysis frames for a signal of the given length.
  long num_frames(size_t num_samples) const {
    if (num_samples < static_cast<size_t>(window_length)) return 0;
    return static_cast<long>((num_samples - window_length) / hop) + 1;
  }

  void validate() const {
    if (hop <= 0 || fft_size < hop || window_length < fft_size)
      throw std::invalid_argument("FilterbankConfig: need window_length >= fft_size >= hop > 0");
    if (window_length % fft_size != 0)
      throw std::invalid_argument("FilterbankConfig: window_length must be a multiple of fft_size");
    if (fft_size % 2 != 0)
      throw std::invalid_argument("FilterbankConfig: fft_size must be even");
    if (!(sample_rate > 0)) throw std::invalid_argument("FilterbankConfig: sample_rate must be > 0");
  }

  static FilterbankConfig plain_stft() {
    FilterbankConfig c;
    c.window_length = 1024;
    c.fft_size = 1024;
    c.hop = 128;
    return c;
  }
};

// Complex time-frequency tensor, indexed (channel, frame, bin) with bins
// contiguous in memory.
struct TfTensor {
  int channels = 0;
  int frames = 0;
  int bins = 0;
  std::vector<std::complex<double>> values;

  TfTensor() = default;
  TfTensor(int num_channels, int num_frames, int num_bins)
      : channels(num_channels),
        frames(num_frames),
        bins(num_bins),
        values(static_cast<size_t>(num_channels) * num_frames * num_bins) {}

  std::complex<double>& at(int c, int l, int f) {
    return values[(static_cast<size_t>(c) * frames + l) * bins + f];
  }
  const std::complex<double>& at(int c, int l, int f) const {
    return values[(static_cast<size_t>(c) * frames + l) * bins + f];
  }
  std::span<std::complex<double>> channel_frame(int c, int l) {
    return {&values[(static_cast<size_t>(c) * frames + l) * bins], static_cast<size_t>(bins)};
  }
  std::span<const std::complex<double>> channel_frame(int c, int l) const {
    return {&values[(static_cast<size_t>(c) * frames + l) * bins], static_cast<size_t>(bins)};
  }
};

class Filterbank {
 public:
  explicit Filterbank(const FilterbankConfig& cfg) : cfg_(cfg), fft_(checked_fft_size(cfg)) {
    build_analysis_window();
    build_synthesis_window();
    fold_buf_.resize(cfg_.fft_size);
    time_buf_.resize(cfg_.fft_size);
  }

  const FilterbankConfig& config() const { return cfg_; }
  std::span<const double> analysis_window() const { return awin_; }
  std::span<const double> synthesis_window() const { return swin_; }

  // Transforms one window_length frame into fft_size/2+1 bins.
  void analyze_frame(std::span<const double> frame, std::span<std::complex<double>> out) {
    const int K = cfg_.window_length, M = cfg_.fft_size;
    if (static_cast<int>(frame.size()) != K || static_cast<int>(out.size()) != cfg_.bins())
      throw std::invalid_argument("Filterbank::analyze_frame: size mismatch");
    for (int m = 0; m < M; ++m) fold_buf_[m] = frame[m] * awin_[m];
    for (int base = M; base < K; base += M)
      for (int m = 0; m < M; ++m) fold_buf_[m] += frame[base + m] * awin_[base + m];
    fft_.forward(fold_buf_, out);
  }

  // Inverse of analyze_frame: fills a window_length frame with the windowed
  // periodic extension of the inverse transform. Caller overlap-adds.
  void synthesize_frame(std::span<const std::complex<double>> bins, std::span<double> frame) {
    const int K = cfg_.window_length, M = cfg_.fft_size;
    if (static_cast<int>(bins.size()) != cfg_.bins() || static_cast<int>(frame.size()) != K)
      throw std::invalid_argument("Filterbank::synthesize_frame: size mismatch");
    fft_.inverse(bins, time_buf_);
    for (int k = 0; k < K; ++k) frame[k] = swin_[k] * time_buf_[k % M];
  }

  TfTensor analyze(const std::vector<std::vector<double>>& audio) {
    if (audio.empty() || audio[0].empty())
      throw std::invalid_argument("Filterbank::analyze: empty input");
    const size_t len = audio[0].size();
    for (const auto& ch : audio)
      if (ch.size() != len) throw std::invalid_argument("Filterbank::analyze: channel length mismatch");
    if (len < static_cast<size_t>(cfg_.window_length))
      throw std::invalid_argument("Filterbank::analyze: input shorter than window");

    const long L = cfg_.num_frames(len);
    TfTensor tf(static_cast<int>(audio.size()), static_cast<int>(L), cfg_.bins());
    for (int c = 0; c < tf.channels; ++c) {
      for (long l = 0; l < L; ++l) {
        std::span<const double> frame(&audio[c][static_cast<size_t>(l) * cfg_.hop],
                                      static_cast<size_t>(cfg_.window_length));
        analyze_frame(frame, tf.channel_frame(c, static_cast<int>(l)));
      }
    }
    return tf;
  }

  std::vector<double> synthesize(const TfTensor& tf, int channel = 0) {
    if (tf.bins != cfg_.bins())
      throw std::invalid_argument("Filterbank::synthesize: tensor/config bin mismatch");
    if (channel < 0 || channel >= tf.channels)
      throw std::invalid_argument("Filterbank::synthesize: channel out of range");
    const int K = cfg_.window_length, R = cfg_.hop;
    std::vector<double> out(static_cast<size_t>(tf.frames - 1) * R + K, 0.0);
    std::vector<double> frame(K);
    for (int l = 0; l < tf.frames; ++l) {
      synthesize_frame(tf.channel_frame(channel, l), frame);
      double* dst = &out[static_cast<size_t>(l) * R];
      for (int k = 0; k < K; ++k) dst[k] += frame[k];
    }
    return out;
  }

 private:
  static int checked_fft_size(const FilterbankConfig& cfg) {
    cfg.validate();
    return cfg.fft_size;
  }

  void build_analysis_window() {
    const int K = cfg_.window_length;
    awin_.resize(K);
    for (int n = 0; n < K; ++n) {
      double h = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / K);
      awin_[n] = cfg_.window_shape == WindowShape::sqrt_hann ? std::sqrt(h) : h;
    }
  }

  // Minimum-norm synthesis window per residue class modulo the hop.
  void build_synthesis_window() {
    const int K = cfg_.window_length, M = cfg_.fft_size, R = cfg_.hop;
    const int taps = K / R;
    const int max_shift = cfg_.folds() - 1;
    swin_.assign(K, 0.0);

    for (int r0 = 0; r0 < R; ++r0) {
      std::vector<Eigen::VectorXd> rows;
      Eigen::VectorXd rhs_all;
      std::vector<double> rhs;
      for (int s = -max_shift; s <= max_shift; ++s) {
        Eigen::VectorXd row = Eigen::VectorXd::Zero(taps);
        bool nonzero = false;
        for (int u = 0; u < taps; ++u) {
          const int idx = r0 + u * R + s * M;
          if (idx >= 0 && idx < K && awin_[idx] != 0.0) {
            row[u] = awin_[idx];
            nonzero = true;
          }
        }
        if (nonzero || s == 0) {
          rows.push_back(row);
          rhs.push_back(s == 0 ? 1.0 : 0.0);
        }
      }
      const int m = static_cast<int>(rows.size());
      Eigen::MatrixXd A(m, taps);
      Eigen::VectorXd b(m);
      for (int i = 0; i < m; ++i) {
        A.row(i) = rows[i].transpose();
        b[i] = rhs[i];
      }
      // min ||g|| s.t. A g = b  =>  g = A^T (A A^T)^{-1} b
      Eigen::MatrixXd gram = A * A.transpose();
      Eigen::VectorXd y = gram.fullPivLu().solve(b);
      Eigen::VectorXd g = A.transpose() * y;
      if ((A * g - b).norm() > 1e-9)
        throw std::runtime_error("Filterbank: synthesis window design failed (inconsistent constraints)");
      for (int u = 0; u < taps; ++u) swin_[r0 + u * R] = g[u];
    }
  }

  FilterbankConfig cfg_;
  RealFft fft_;
  std::vector<double> awin_, swin_;
  std::vector<double> fold_buf_, time_buf_;
};

}  // namespace cetk
