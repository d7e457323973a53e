// scene.hpp
// Synthetic multichannel scenes with separated ground truth: a plane-wave
// target steered by exact frequency-domain phase ramps plus a spherically
// isotropic diffuse field obtained by mixing independent complex noise with a
// per-frequency symmetric square root of the diffuse coherence matrix.
// mixture == direct + diffuse holds samplewise by construction.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "cetk/fft.hpp"
#include "cetk/geometry.hpp"
#include "cetk/wav.hpp"

namespace cetk {

using SpectralShape = std::function<double(double hz)>;

namespace detail {

// Symmetric square root of the diffuse coherence matrix at one frequency,
// with eigenvalues clipped at zero when the sinc matrix turns numerically
// indefinite.
inline Eigen::MatrixXd diffuse_mixing_matrix(const ArrayGeometry& geom, double freq_hz) {
  Eigen::MatrixXd j = diffuse_coherence_matrix(geom, freq_hz);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(j);
  Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

inline size_t even_fft_length(size_t num_samples) { return num_samples + (num_samples & 1); }

}  // namespace detail

// Multichannel realization of an ideally diffuse (spherically isotropic)
// noise field. Channels come out with approximately unit variance under a
// flat spectral shape.
inline std::vector<std::vector<double>> synthesize_diffuse(const ArrayGeometry& geom,
                                                           size_t num_samples,
                                                           double sample_rate, uint64_t seed,
                                                           const SpectralShape& shape = {}) {
  geom.validate();
  if (num_samples == 0) throw std::invalid_argument("synthesize_diffuse: zero length");
  const int n = geom.num_channels();
  const size_t nfft = detail::even_fft_length(num_samples);
  const int bins = static_cast<int>(nfft / 2 + 1);

  std::mt19937_64 gen(seed);
  std::normal_distribution<double> gauss(0.0, std::numbers::sqrt2 / 2.0);  // E|z|^2 = 1

  std::vector<std::vector<std::complex<double>>> spec(
      n, std::vector<std::complex<double>>(bins, {0.0, 0.0}));
  Eigen::VectorXcd z(n), x(n);

  const double amp = std::sqrt(static_cast<double>(nfft));
  for (int k = 1; k < bins - 1; ++k) {
    const double hz = k * sample_rate / static_cast<double>(nfft);
    const Eigen::MatrixXd c = detail::diffuse_mixing_matrix(geom, hz);
    for (int ch = 0; ch < n; ++ch) z[ch] = {gauss(gen), gauss(gen)};
    x = c * z;
    const double s = amp * (shape ? shape(hz) : 1.0);
    for (int ch = 0; ch < n; ++ch) spec[ch][k] = s * x[ch];
  }
  // DC and Nyquist stay zero

  RealFft fft(static_cast<int>(nfft));
  std::vector<std::vector<double>> out(n);
  std::vector<double> buf(nfft);
  for (int ch = 0; ch < n; ++ch) {
    fft.inverse(spec[ch], buf);
    out[ch].assign(buf.begin(), buf.begin() + num_samples);
  }
  return out;
}

// Frequency-domain fractional steering: channel n carries the phase
// e^{+j 2 pi f tau_n} relative to the source spectrum.
inline std::vector<std::vector<double>> steer_direct(const ArrayGeometry& geom, const Doa& doa,
                                                     std::span<const double> source,
                                                     double sample_rate) {
  geom.validate();
  const int n = geom.num_channels();
  const size_t len = source.size();
  const size_t nfft = detail::even_fft_length(len);
  const int bins = static_cast<int>(nfft / 2 + 1);

  RealFft fft(static_cast<int>(nfft));
  std::vector<double> buf(nfft, 0.0);
  std::copy(source.begin(), source.end(), buf.begin());
  std::vector<std::complex<double>> src_spec(bins);
  fft.forward(buf, src_spec);
  src_spec.back() = 0.0;  // drop the Nyquist bin so all channels stay real

  std::vector<std::vector<double>> out(n);
  std::vector<std::complex<double>> spec(bins);
  for (int ch = 0; ch < n; ++ch) {
    const double tau = tdoa(geom, doa, ch);
    for (int k = 0; k < bins; ++k) {
      const double hz = k * sample_rate / static_cast<double>(nfft);
      spec[k] = src_spec[k] * std::polar(1.0, 2.0 * std::numbers::pi * hz * tau);
    }
    spec.back() = 0.0;
    fft.inverse(spec, buf);
    out[ch].assign(buf.begin(), buf.begin() + len);
  }
  return out;
}

struct SyntheticScene {
  std::vector<std::vector<double>> mixture, direct, diffuse;
  Doa true_doa;
  double ddr_db = 0.0;
  uint64_t seed = 0;
  double sample_rate = 16000.0;
  bool degenerate_geometry = false;  // duplicate microphone positions
  // broadband per-band truth at welch_bins resolution: Pdirect/Pdiffuse
  std::vector<double> band_true_cdr;
  int welch_fft = 512;

  size_t num_samples() const { return mixture.empty() ? 0 : mixture[0].size(); }
};

namespace detail {

inline double mean_power(const std::vector<std::vector<double>>& chans) {
  double e = 0.0;
  size_t count = 0;
  for (const auto& ch : chans) {
    for (double v : ch) e += v * v;
    count += ch.size();
  }
  return count ? e / count : 0.0;
}

// Hann-windowed Welch auto-PSD with 50% overlap (arbitrary common scale).
inline std::vector<double> welch_auto_psd(std::span<const double> x, int fft_len) {
  const int bins = fft_len / 2 + 1;
  RealFft fft(fft_len);
  std::vector<double> win(fft_len), buf(fft_len), psd(bins, 0.0);
  for (int i = 0; i < fft_len; ++i)
    win[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / fft_len);
  std::vector<std::complex<double>> spec(bins);
  size_t count = 0;
  for (size_t s = 0; s + fft_len <= x.size(); s += fft_len / 2, ++count) {
    for (int i = 0; i < fft_len; ++i) buf[i] = x[s + i] * win[i];
    fft.forward(buf, spec);
    for (int k = 0; k < bins; ++k) psd[k] += std::norm(spec[k]);
  }
  if (count)
    for (double& v : psd) v /= static_cast<double>(count);
  return psd;
}

// Smoothed magnitude profile of a signal, normalized to unit mean, for
// shaping the diffuse field to the source spectrum.
inline std::vector<double> magnitude_profile(std::span<const double> x, int fft_len) {
  const int bins = fft_len / 2 + 1;
  RealFft fft(fft_len);
  std::vector<double> win(fft_len), buf(fft_len), psd(bins, 0.0);
  for (int i = 0; i < fft_len; ++i)
    win[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / fft_len);
  std::vector<std::complex<double>> spec(bins);
  size_t count = 0;
  for (size_t s = 0; s + fft_len <= x.size(); s += fft_len / 2, ++count) {
    for (int i = 0; i < fft_len; ++i) buf[i] = x[s + i] * win[i];
    fft.forward(buf, spec);
    for (int k = 0; k < bins; ++k) psd[k] += std::norm(spec[k]);
  }
  std::vector<double> mag(bins, 1.0);
  if (count == 0) return mag;
  for (int k = 0; k < bins; ++k) mag[k] = std::sqrt(psd[k] / count);
  // 5-bin moving average
  std::vector<double> smooth(bins);
  for (int k = 0; k < bins; ++k) {
    double acc = 0.0;
    int m = 0;
    for (int j = std::max(0, k - 2); j <= std::min(bins - 1, k + 2); ++j, ++m) acc += mag[j];
    smooth[k] = acc / m;
  }
  double mean = 0.0;
  for (double v : smooth) mean += v;
  mean /= bins;
  if (mean > 0)
    for (double& v : smooth) v /= mean;
  return smooth;
}

}  // namespace detail

// Full oracle scene: plane-wave target plus diffuse field scaled to the
// requested broadband direct-to-diffuse ratio. When shape_diffuse_to_source
// is set the diffuse field follows the source's long-term spectrum, keeping
// the per-band CDR close to the broadband value.
inline SyntheticScene synthesize_scene(const ArrayGeometry& geom, const Doa& doa,
                                       std::span<const double> source, double target_ddr_db,
                                       uint64_t seed, double sample_rate,
                                       bool shape_diffuse_to_source = true) {
  geom.validate();
  if (source.empty()) throw std::invalid_argument("synthesize_scene: empty source");
  double src_energy = 0.0;
  for (double v : source) src_energy += v * v;
  if (src_energy <= 0.0) throw std::invalid_argument("synthesize_scene: silent source");

  SyntheticScene scene;
  scene.true_doa = doa;
  scene.ddr_db = target_ddr_db;
  scene.seed = seed;
  scene.sample_rate = sample_rate;
  for (int p = 0; p < geom.num_channels() && !scene.degenerate_geometry; ++p)
    for (int q = p + 1; q < geom.num_channels(); ++q)
      if (geom.pair_distance(p, q) == 0.0) {
        scene.degenerate_geometry = true;
        break;
      }

  scene.direct = steer_direct(geom, doa, source, sample_rate);

  SpectralShape shape;
  if (shape_diffuse_to_source) {
    auto profile = detail::magnitude_profile(source, scene.welch_fft);
    const double df = sample_rate / scene.welch_fft;
    shape = [profile, df](double hz) {
      const double pos = hz / df;
      const int k = std::clamp(static_cast<int>(pos), 0, static_cast<int>(profile.size()) - 2);
      const double t = std::clamp(pos - k, 0.0, 1.0);
      return (1.0 - t) * profile[k] + t * profile[k + 1];
    };
  }
  scene.diffuse = synthesize_diffuse(geom, source.size(), sample_rate, seed, shape);

  const double p_dir = detail::mean_power(scene.direct);
  const double p_diff = detail::mean_power(scene.diffuse);
  if (p_diff > 0.0) {
    const double alpha = std::sqrt(p_dir / (p_diff * std::pow(10.0, target_ddr_db / 10.0)));
    for (auto& ch : scene.diffuse)
      for (double& v : ch) v *= alpha;
  }

  scene.mixture.resize(geom.num_channels());
  for (int ch = 0; ch < geom.num_channels(); ++ch) {
    scene.mixture[ch].resize(source.size());
    for (size_t i = 0; i < source.size(); ++i)
      scene.mixture[ch][i] = scene.direct[ch][i] + scene.diffuse[ch][i];
  }

  // per-band truth from channel-averaged Welch spectra
  const int bins = scene.welch_fft / 2 + 1;
  std::vector<double> pd(bins, 0.0), pn(bins, 0.0);
  for (int ch = 0; ch < geom.num_channels(); ++ch) {
    auto d = detail::welch_auto_psd(scene.direct[ch], scene.welch_fft);
    auto n = detail::welch_auto_psd(scene.diffuse[ch], scene.welch_fft);
    for (int k = 0; k < bins; ++k) {
      pd[k] += d[k];
      pn[k] += n[k];
    }
  }
  scene.band_true_cdr.resize(bins);
  for (int k = 0; k < bins; ++k)
    scene.band_true_cdr[k] = pn[k] > 0.0 ? pd[k] / pn[k] : 1e12;
  return scene;
}

// Stationary speech-shaped noise: white Gaussian spectrum weighted by a
// long-term-speech-like envelope (high-pass near 100 Hz, 1/f-style rolloff
// above 500 Hz).
inline std::vector<double> speech_shaped_noise(size_t num_samples, double sample_rate,
                                               uint64_t seed) {
  if (num_samples == 0) throw std::invalid_argument("speech_shaped_noise: zero length");
  const size_t nfft = detail::even_fft_length(num_samples);
  const int bins = static_cast<int>(nfft / 2 + 1);
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> gauss(0.0, std::numbers::sqrt2 / 2.0);

  std::vector<std::complex<double>> spec(bins, {0.0, 0.0});
  const double amp = std::sqrt(static_cast<double>(nfft));
  for (int k = 1; k < bins - 1; ++k) {
    const double hz = k * sample_rate / static_cast<double>(nfft);
    const double highpass = hz * hz / (hz * hz + 100.0 * 100.0);
    const double rolloff = 500.0 / (500.0 + hz);
    spec[k] = amp * highpass * rolloff * std::complex<double>{gauss(gen), gauss(gen)};
  }
  RealFft fft(static_cast<int>(nfft));
  std::vector<double> buf(nfft);
  fft.inverse(spec, buf);
  buf.resize(num_samples);
  // normalize to unit RMS
  double e = 0.0;
  for (double v : buf) e += v * v;
  const double scale = e > 0.0 ? 1.0 / std::sqrt(e / num_samples) : 1.0;
  for (double& v : buf) v *= scale;
  return buf;
}

// --- scene file I/O -------------------------------------------------------
//
// A scene on disk is three WAVs plus a JSON sidecar:
//   <prefix>_mixture.wav, <prefix>_direct.wav, <prefix>_diffuse.wav,
//   <prefix>_scene.json

inline void write_scene(const std::string& prefix, const SyntheticScene& scene,
                        const ArrayGeometry& geom) {
  auto to_wav = [&](const std::vector<std::vector<double>>& chans) {
    WavData w;
    w.sample_rate = scene.sample_rate;
    w.channels = chans;
    return w;
  };
  write_wav(prefix + "_mixture.wav", to_wav(scene.mixture));
  write_wav(prefix + "_direct.wav", to_wav(scene.direct));
  write_wav(prefix + "_diffuse.wav", to_wav(scene.diffuse));

  double max_tdoa_us = 0.0;
  for (int p = 0; p < geom.num_channels(); ++p)
    for (int q = p + 1; q < geom.num_channels(); ++q)
      max_tdoa_us = std::max(max_tdoa_us,
                             std::abs(tdoa(geom, scene.true_doa, p) -
                                      tdoa(geom, scene.true_doa, q)) * 1e6);

  nlohmann::json j;
  j["sample_rate"] = scene.sample_rate;
  j["seed"] = scene.seed;
  j["ddr_db"] = scene.ddr_db;
  j["doa_azimuth_deg"] = scene.true_doa.azimuth_rad * 180.0 / std::numbers::pi;
  j["doa_elevation_deg"] = scene.true_doa.elevation_rad * 180.0 / std::numbers::pi;
  j["max_pair_tdoa_us"] = max_tdoa_us;
  j["degenerate_geometry"] = scene.degenerate_geometry;
  j["geometry"]["speed_of_sound"] = geom.speed_of_sound;
  for (const auto& p : geom.positions)
    j["geometry"]["positions_m"].push_back({p[0], p[1], p[2]});
  const std::string base = std::filesystem::path(prefix).filename().string();
  j["files"]["mixture"] = base + "_mixture.wav";
  j["files"]["direct"] = base + "_direct.wav";
  j["files"]["diffuse"] = base + "_diffuse.wav";

  std::ofstream f(prefix + "_scene.json");
  if (!f) throw std::runtime_error("cannot write scene sidecar: " + prefix + "_scene.json");
  f << j.dump(2) << "\n";
}

struct LoadedScene {
  WavData mixture, direct, diffuse;
  ArrayGeometry geometry;
  Doa true_doa;
  double ddr_db = 0.0;
  uint64_t seed = 0;
  double max_pair_tdoa_us = 0.0;
};

inline LoadedScene load_scene(const std::string& sidecar_path) {
  std::ifstream f(sidecar_path);
  if (!f) throw std::runtime_error("cannot open scene sidecar: " + sidecar_path);
  nlohmann::json j;
  f >> j;

  const auto dir = std::filesystem::path(sidecar_path).parent_path();
  LoadedScene s;
  s.mixture = read_wav((dir / j.at("files").at("mixture").get<std::string>()).string());
  s.direct = read_wav((dir / j.at("files").at("direct").get<std::string>()).string());
  s.diffuse = read_wav((dir / j.at("files").at("diffuse").get<std::string>()).string());
  s.geometry = geometry_from_json(j.at("geometry"));
  s.true_doa.azimuth_rad = j.at("doa_azimuth_deg").get<double>() * std::numbers::pi / 180.0;
  s.true_doa.elevation_rad = j.at("doa_elevation_deg").get<double>() * std::numbers::pi / 180.0;
  s.ddr_db = j.at("ddr_db").get<double>();
  s.seed = j.at("seed").get<uint64_t>();
  if (j.contains("max_pair_tdoa_us")) s.max_pair_tdoa_us = j.at("max_pair_tdoa_us").get<double>();
  return s;
}

}  // namespace cetk
