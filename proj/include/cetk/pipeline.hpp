// pipeline.hpp
// Enhancement chain: filterbank analysis -> weighted delay-and-sum -> pair
// coherence -> CDR -> diffuseness averaging -> array-gain correction ->
// Wiener gain -> synthesis. The Enhancer consumes audio in arbitrary chunks
// and produces output identical to one-shot processing: all per-frame and
// per-segment work is keyed to absolute sample positions.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <vector>

#include "cetk/aggregate.hpp"
#include "cetk/beamformer.hpp"
#include "cetk/cdr.hpp"
#include "cetk/filterbank.hpp"
#include "cetk/geometry.hpp"
#include "cetk/postfilter.hpp"
#include "cetk/psd_tracker.hpp"

namespace cetk {

struct EnhancementConfig {
  FilterbankConfig filterbank;
  PostfilterConfig postfilter;
  double lambda = 0.68;
  ArrayGeometry geometry;
  std::optional<Doa> doa;   // fixed direction; exclusive with estimate_doa
  bool estimate_doa = false;
  bool bypass_postfilter = false;
  bool screen_failing_channels = false;  // one-shot enhance() only
  double segment_s = 0.5;   // GCC-PHAT window
  double scroll_s = 0.25;   // GCC-PHAT update interval
  double confidence_threshold = 0.15;
  int warmup_frames = 5;

  void validate() const {
    filterbank.validate();
    postfilter.validate();
    geometry.validate();
    if (!(lambda >= 0.0 && lambda < 1.0))
      throw std::invalid_argument("EnhancementConfig: lambda must be in [0, 1)");
    if (!doa && !estimate_doa)
      throw std::invalid_argument("EnhancementConfig: need a fixed DOA or estimate_doa");
    if (doa && estimate_doa)
      throw std::invalid_argument("EnhancementConfig: fixed DOA and estimate_doa are exclusive");
    if (!(segment_s > 0.0) || !(scroll_s > 0.0) || segment_s < scroll_s)
      throw std::invalid_argument("EnhancementConfig: need segment_s >= scroll_s > 0");
    if (warmup_frames < 0) throw std::invalid_argument("EnhancementConfig: negative warmup");
  }
};

struct Diagnostics {
  int frames = 0;
  int bins = 0;
  int channels = 0;
  double frame_rate_hz = 0.0;
  std::vector<double> freq_hz;

  // row-major (frame, bin) grids
  std::vector<float> mean_diffuseness;
  std::vector<float> cdr_input;
  std::vector<float> cdr_bf;
  std::vector<float> gain;

  // per-frame steering TDOAs, row-major (frame, channel); zero for channels
  // screened out
  std::vector<double> tdoa_s;

  static constexpr uint8_t kWarmup = 1;
  static constexpr uint8_t kNoTdoaYet = 2;
  static constexpr uint8_t kAllLowConfidence = 4;
  static constexpr uint8_t kPostfilterBypassed = 8;
  std::vector<uint8_t> frame_flags;

  long low_energy_bins = 0;
  long clamped_bins = 0;
};

class Enhancer {
 public:
  explicit Enhancer(EnhancementConfig cfg, std::vector<bool> active_channels = {})
      : cfg_(std::move(cfg)), fb_(checked(cfg_).filterbank) {
    const int n_total = cfg_.geometry.num_channels();
    if (active_channels.empty()) active_channels.assign(n_total, true);
    if (static_cast<int>(active_channels.size()) != n_total)
      throw std::invalid_argument("Enhancer: active_channels size mismatch");
    active_ = std::move(active_channels);
    for (int c = 0; c < n_total; ++c)
      if (active_[c]) act_.push_back(c);
    if (act_.empty()) throw std::invalid_argument("Enhancer: no active channels");

    const int n = static_cast<int>(act_.size());
    const int bins = cfg_.filterbank.bins();
    postfilter_active_ = n >= 2 && !cfg_.bypass_postfilter;

    if (n >= 2) {
      tracker_.emplace(n, bins, cfg_.lambda, PairSet::all_pairs(n), cfg_.warmup_frames);
      const auto& pairs = tracker_->pairs().pairs;
      gn_.resize(pairs.size() * bins);
      for (size_t i = 0; i < pairs.size(); ++i) {
        const double d = cfg_.geometry.pair_distance(act_[pairs[i].first], act_[pairs[i].second]);
        for (int f = 0; f < bins; ++f)
          gn_[i * bins + f] =
              diffuse_coherence(d, cfg_.filterbank.bin_hz(f), cfg_.geometry.speed_of_sound);
      }
      jdiff_.reserve(bins);
      ArrayGeometry act_geom;
      act_geom.speed_of_sound = cfg_.geometry.speed_of_sound;
      for (int c : act_) act_geom.positions.push_back(cfg_.geometry.positions[c]);
      for (int f = 0; f < bins; ++f)
        jdiff_.push_back(diffuse_coherence_matrix(act_geom, cfg_.filterbank.bin_hz(f)));
    }

    if (cfg_.doa) {
      std::vector<double> taus(n);
      for (int i = 0; i < n; ++i) taus[i] = tdoa(cfg_.geometry, *cfg_.doa, act_[i]);
      set_steering(taus);
    } else {
      set_steering(std::vector<double>(n, 0.0));  // broadside until a segment lands
      have_tdoa_ = false;
      seg_len_ = std::max<size_t>(1, static_cast<size_t>(
                                         std::llround(cfg_.segment_s * sample_rate())));
      seg_hop_ = std::max<size_t>(1, static_cast<size_t>(
                                         std::llround(cfg_.scroll_s * sample_rate())));
      max_lag_s_ = cfg_.geometry.max_pair_distance() / cfg_.geometry.speed_of_sound + 2.5e-4;
    }

    in_.resize(n);
    diag_.bins = bins;
    diag_.channels = n_total;
    diag_.frame_rate_hz = cfg_.filterbank.frame_rate_hz();
    for (int f = 0; f < bins; ++f) diag_.freq_hz.push_back(cfg_.filterbank.bin_hz(f));
    frame_bins_.resize(static_cast<size_t>(n) * bins);
    out_bins_.resize(bins);
    synth_frame_.resize(cfg_.filterbank.window_length);
    pair_cdrs_.resize(n >= 2 ? tracker_->pairs().size() : 0);
  }

  double sample_rate() const { return cfg_.filterbank.sample_rate; }
  const EnhancementConfig& config() const { return cfg_; }
  const Diagnostics& diagnostics() const { return diag_; }
  const std::vector<bool>& active_channels() const { return active_; }

  // Appends a planar chunk (geometry channel order, any length) and processes
  // every frame that becomes complete.
  void push(const std::vector<std::vector<double>>& chunk) {
    if (finished_) throw std::logic_error("Enhancer::push after finish");
    if (static_cast<int>(chunk.size()) != cfg_.geometry.num_channels())
      throw std::invalid_argument("Enhancer::push: channel count mismatch");
    const size_t len = chunk.empty() ? 0 : chunk[0].size();
    for (const auto& ch : chunk)
      if (ch.size() != len) throw std::invalid_argument("Enhancer::push: ragged chunk");
    for (size_t i = 0; i < act_.size(); ++i)
      in_[i].insert(in_[i].end(), chunk[act_[i]].begin(), chunk[act_[i]].end());
    received_ += len;
    process_available();
    trim_input();
  }

  // Drains every output sample that can no longer change.
  std::vector<double> pull() {
    const size_t safe = frames_done_ == 0
                            ? 0
                            : std::min(output_length(), frames_done_ * cfg_.filterbank.hop);
    return drain(safe);
  }

  // Declares end of input and drains the remaining tail.
  std::vector<double> finish() {
    finished_ = true;
    return drain(output_length());
  }

 private:
  static const EnhancementConfig& checked(const EnhancementConfig& c) {
    c.validate();
    return c;
  }

  size_t output_length() const {
    if (frames_done_ == 0) return 0;
    return (frames_done_ - 1) * cfg_.filterbank.hop + cfg_.filterbank.window_length;
  }

  std::vector<double> drain(size_t upto) {
    std::vector<double> out;
    if (upto <= emitted_) return out;
    const size_t begin = emitted_ - ola_base_;
    const size_t end = std::min(upto - ola_base_, ola_.size());
    out.assign(ola_.begin() + begin, ola_.begin() + end);
    out.resize(upto - emitted_, 0.0);
    emitted_ = upto;
    // drop emitted prefix
    const size_t drop = emitted_ - ola_base_;
    if (drop > (1u << 15)) {
      ola_.erase(ola_.begin(), ola_.begin() + drop);
      ola_base_ = emitted_;
    }
    return out;
  }

  void process_available() {
    const size_t K = cfg_.filterbank.window_length, R = cfg_.filterbank.hop;
    while (true) {
      const size_t frame_end = frames_done_ * R + K;
      const size_t seg_end = cfg_.estimate_doa
                                 ? segments_done_ * seg_hop_ + seg_len_
                                 : std::numeric_limits<size_t>::max();
      if (seg_end <= frame_end) {
        if (received_ < seg_end) break;
        process_segment();
      } else {
        if (received_ < frame_end) break;
        process_frame();
      }
    }
  }

  void trim_input() {
    const size_t R = cfg_.filterbank.hop;
    size_t needed = frames_done_ * R;
    if (cfg_.estimate_doa) needed = std::min(needed, segments_done_ * seg_hop_);
    if (needed > in_base_ && needed - in_base_ > (1u << 15)) {
      const size_t drop = needed - in_base_;
      for (auto& ch : in_)
        ch.erase(ch.begin(), ch.begin() + drop);
      in_base_ = needed;
    }
  }

  // GCC-PHAT on one completed segment; reference is the first active channel.
  void process_segment() {
    const size_t start = segments_done_ * seg_hop_;
    const int n = static_cast<int>(act_.size());
    std::vector<double> taus(n, 0.0);
    double confidence = n >= 2 ? 1.0 : 0.0;
    std::span<const double> ref(&in_[0][start - in_base_], seg_len_);
    for (int i = 1; i < n; ++i) {
      std::span<const double> other(&in_[i][start - in_base_], seg_len_);
      const auto r = gcc_phat_tdoa(ref, other, max_lag_s_, sample_rate());
      taus[i] = -r.delay_s;  // a lagging channel has a negative steering TDOA
      confidence = std::min(confidence, r.confidence);
    }
    ++segments_done_;

    if (confidence >= cfg_.confidence_threshold) {
      confident_history_.push_back(taus);
      if (confident_history_.size() > 3)
        confident_history_.erase(confident_history_.begin());
      have_tdoa_ = true;
      set_steering(taus);
    } else if (!confident_history_.empty()) {
      // per-channel median over the recent confident segments
      std::vector<double> med(n, 0.0), vals;
      for (int c = 0; c < n; ++c) {
        vals.clear();
        for (const auto& h : confident_history_) vals.push_back(h[c]);
        std::sort(vals.begin(), vals.end());
        const size_t m = vals.size();
        med[c] = m % 2 ? vals[m / 2] : 0.5 * (vals[m / 2 - 1] + vals[m / 2]);
      }
      set_steering(med);
    }
    // no confident segment yet: keep broadside, frames stay flagged
  }

  void set_steering(std::vector<double> taus) {
    const int n = static_cast<int>(act_.size());
    const int bins = cfg_.filterbank.bins();
    taus_ = std::move(taus);
    weights_ = BeamformerWeights::uniform(n, taus_);
    weights_.validate();

    phasor_.resize(static_cast<size_t>(n) * bins);
    for (int i = 0; i < n; ++i)
      for (int f = 0; f < bins; ++f)
        phasor_[static_cast<size_t>(i) * bins + f] =
            weights_.gains[i] *
            std::polar(1.0, -2.0 * std::numbers::pi * cfg_.filterbank.bin_hz(f) * taus_[i]);

    if (tracker_) {
      const auto& pairs = tracker_->pairs().pairs;
      gs_.resize(pairs.size() * bins);
      for (size_t i = 0; i < pairs.size(); ++i) {
        const double dt = taus_[pairs[i].first] - taus_[pairs[i].second];
        for (int f = 0; f < bins; ++f)
          gs_[i * bins + f] =
              std::polar(1.0, 2.0 * std::numbers::pi * cfg_.filterbank.bin_hz(f) * dt);
      }
      a_gamma_.resize(bins);
      Eigen::VectorXcd w(n);
      for (int f = 0; f < bins; ++f) {
        for (int i = 0; i < n; ++i) w[i] = phasor_[static_cast<size_t>(i) * bins + f];
        a_gamma_[f] = diffuse_array_gain(w, jdiff_[f]);
      }
    }
  }

  void process_frame() {
    const size_t K = cfg_.filterbank.window_length, R = cfg_.filterbank.hop;
    const int n = static_cast<int>(act_.size());
    const int bins = cfg_.filterbank.bins();
    const size_t start = frames_done_ * R;

    for (int i = 0; i < n; ++i) {
      std::span<const double> frame(&in_[i][start - in_base_], K);
      fb_.analyze_frame(frame,
                        {&frame_bins_[static_cast<size_t>(i) * bins], static_cast<size_t>(bins)});
    }

    uint8_t flags = 0;
    const bool estimating = postfilter_active_;
    if (estimating) {
      channel_ptrs_.clear();
      for (int i = 0; i < n; ++i) channel_ptrs_.push_back(&frame_bins_[static_cast<size_t>(i) * bins]);
      tracker_->update_frame(channel_ptrs_);
      if (tracker_->in_warmup()) flags |= Diagnostics::kWarmup;
    }
    if (cfg_.estimate_doa && !have_tdoa_) flags |= Diagnostics::kNoTdoaYet;
    if (!postfilter_active_) flags |= Diagnostics::kPostfilterBypassed;

    const double mu = cfg_.postfilter.resolved_mu();
    const double g_min = cfg_.postfilter.g_min;
    const bool warm = estimating && tracker_->in_warmup();
    const auto kind = cfg_.postfilter.estimator;
    const int num_pairs = estimating ? tracker_->pairs().size() : 0;

    for (int f = 0; f < bins; ++f) {
      std::complex<double> y_bf = 0.0;
      for (int i = 0; i < n; ++i)
        y_bf += phasor_[static_cast<size_t>(i) * bins + f] * frame_bins_[static_cast<size_t>(i) * bins + f];

      float d_mean = std::numeric_limits<float>::quiet_NaN();
      float cdr_in_f = d_mean, cdr_bf_f = d_mean;
      double g = 1.0;
      if (estimating) {
        for (int i = 0; i < num_pairs; ++i) {
          const auto coh = tracker_->coherence(i, f, gn_[static_cast<size_t>(i) * bins + f]);
          auto v = estimate_cdr(kind, coh.value, gn_[static_cast<size_t>(i) * bins + f],
                                gs_[static_cast<size_t>(i) * bins + f]);
          v.low_energy = coh.low_energy;
          if (coh.low_energy) ++diag_.low_energy_bins;
          if (v.clamped_high) ++diag_.clamped_bins;
          pair_cdrs_[i] = v;
        }
        const double d_bar = average_diffuseness(pair_cdrs_);
        const double cdr_in = input_cdr(d_bar);
        const double cdr_bf = beamformer_output_cdr(cdr_in, a_gamma_[f]);
        d_mean = static_cast<float>(d_bar);
        cdr_in_f = static_cast<float>(cdr_in);
        cdr_bf_f = static_cast<float>(cdr_bf);
        g = warm ? 1.0 : wiener_gain(cdr_bf, mu, g_min);
      }
      diag_.mean_diffuseness.push_back(d_mean);
      diag_.cdr_input.push_back(cdr_in_f);
      diag_.cdr_bf.push_back(cdr_bf_f);
      diag_.gain.push_back(static_cast<float>(g));
      out_bins_[f] = g * y_bf;
    }

    for (int c = 0, i = 0; c < cfg_.geometry.num_channels(); ++c)
      diag_.tdoa_s.push_back(active_[c] ? taus_[i++] : 0.0);
    diag_.frame_flags.push_back(flags);

    fb_.synthesize_frame(out_bins_, synth_frame_);
    const size_t end = start + K;
    if (ola_base_ + ola_.size() < end) ola_.resize(end - ola_base_, 0.0);
    double* dst = &ola_[start - ola_base_];
    for (size_t k = 0; k < K; ++k) dst[k] += synth_frame_[k];

    ++frames_done_;
    diag_.frames = static_cast<int>(frames_done_);
  }

  EnhancementConfig cfg_;
  Filterbank fb_;
  std::vector<bool> active_;
  std::vector<int> act_;
  bool postfilter_active_ = false;
  std::optional<PsdTracker> tracker_;

  std::vector<double> gn_;                      // (pair, bin) diffuse model
  std::vector<Eigen::MatrixXd> jdiff_;          // per-bin coherence matrix
  std::vector<std::complex<double>> gs_;        // (pair, bin) direct model
  std::vector<std::complex<double>> phasor_;    // (channel, bin) steering
  std::vector<double> a_gamma_;                 // per-bin inverse array gain
  std::vector<double> taus_;
  BeamformerWeights weights_;

  // streaming state, all in absolute sample positions
  std::vector<std::vector<double>> in_;
  size_t in_base_ = 0;
  size_t received_ = 0;
  size_t frames_done_ = 0;
  std::vector<double> ola_;
  size_t ola_base_ = 0;
  size_t emitted_ = 0;
  bool finished_ = false;

  // GCC-PHAT segmentation
  size_t seg_len_ = 0, seg_hop_ = 0;
  size_t segments_done_ = 0;
  double max_lag_s_ = 0.0;
  bool have_tdoa_ = true;
  std::vector<std::vector<double>> confident_history_;

  // scratch
  std::vector<std::complex<double>> frame_bins_, out_bins_;
  std::vector<double> synth_frame_;
  std::vector<const std::complex<double>*> channel_ptrs_;
  std::vector<CdrValue> pair_cdrs_;

  Diagnostics diag_;
};

struct EnhanceResult {
  std::vector<double> samples;
  Diagnostics diagnostics;
  std::vector<bool> active_channels;
};

// One-shot enhancement. With screening enabled, failing channels are detected
// on the whole utterance first and excluded from both the pair set and the
// beamformer weights.
inline EnhanceResult enhance(const std::vector<std::vector<double>>& audio,
                             const EnhancementConfig& cfg) {
  cfg.validate();
  if (static_cast<int>(audio.size()) != cfg.geometry.num_channels())
    throw std::invalid_argument("enhance: audio/geometry channel count mismatch");

  std::vector<bool> active(audio.size(), true);
  if (cfg.screen_failing_channels && audio.size() >= 2) {
    active = screen_channels(audio, cfg.filterbank.sample_rate);
    int kept = 0;
    for (bool b : active) kept += b;
    if (kept == 0) active.assign(audio.size(), true);
  }

  Enhancer e(cfg, active);
  e.push(audio);
  EnhanceResult r;
  r.samples = e.finish();
  r.diagnostics = e.diagnostics();
  r.active_channels = e.active_channels();
  return r;
}

}  // namespace cetk
