// psd_tracker.hpp
// Recursively averaged auto- and cross-power spectral densities for a set of
// microphone pairs, and the short-time complex coherence derived from them.
// Frames must be applied in order; the recursion is
//     Phi(l) = lambda * Phi(l-1) + (1 - lambda) * Xp(l) * conj(Xq(l))
// with Phi(-1) = 0.

#pragma once

#include <complex>
#include <span>
#include <stdexcept>
#include <vector>

#include "cetk/filterbank.hpp"

namespace cetk {

struct PairSet {
  std::vector<std::pair<int, int>> pairs;

  static PairSet all_pairs(int num_channels) {
    PairSet s;
    for (int p = 0; p < num_channels; ++p)
      for (int q = p + 1; q < num_channels; ++q) s.pairs.emplace_back(p, q);
    return s;
  }

  int size() const { return static_cast<int>(pairs.size()); }

  void validate(int num_channels) const {
    if (pairs.empty()) throw std::invalid_argument("PairSet: empty");
    for (auto [p, q] : pairs)
      if (p < 0 || q <= p || q >= num_channels)
        throw std::invalid_argument("PairSet: need 0 <= p < q < channels");
  }
};

struct CoherenceSample {
  std::complex<double> value;
  bool low_energy = false;
};

class PsdTracker {
 public:
  // Magnitude clamp keeping |coherence| <= 1 - kCoherenceEps; the CDR
  // estimators divide by terms that vanish as the magnitude approaches 1.
  static constexpr double kCoherenceEps = 1e-4;
  // Auto-PSD floor relative to the running mean signal power.
  static constexpr double kAutoFloorRel = 1e-12;

  PsdTracker(int channels, int bins, double lambda, PairSet pairs, int warmup_frames = 5)
      : channels_(channels),
        bins_(bins),
        lambda_(lambda),
        pairs_(std::move(pairs)),
        warmup_frames_(warmup_frames),
        auto_psd_(static_cast<size_t>(channels) * bins, 0.0),
        cross_psd_(static_cast<size_t>(pairs_.size()) * bins, {0.0, 0.0}) {
    if (channels <= 0 || bins <= 0) throw std::invalid_argument("PsdTracker: bad dimensions");
    if (!(lambda >= 0.0 && lambda < 1.0))
      throw std::invalid_argument("PsdTracker: lambda must be in [0, 1)");
    pairs_.validate(channels);
  }

  PsdTracker(int channels, int bins, double lambda)
      : PsdTracker(channels, bins, lambda, PairSet::all_pairs(channels)) {}

  int channels() const { return channels_; }
  int bins() const { return bins_; }
  const PairSet& pairs() const { return pairs_; }
  long frames_seen() const { return frames_seen_; }
  bool in_warmup() const { return frames_seen_ <= warmup_frames_; }

  // Applies one frame; frame l of a TfTensor holding all channels.
  void update(const TfTensor& x, int frame) {
    if (x.channels != channels_ || x.bins != bins_)
      throw std::invalid_argument("PsdTracker::update: dimension mismatch");
    scratch_.resize(channels_);
    for (int c = 0; c < channels_; ++c) scratch_[c] = x.channel_frame(c, frame).data();
    update_frame(scratch_);
  }

  void update_frame(std::span<const std::complex<double>* const> channel_bins) {
    if (static_cast<int>(channel_bins.size()) != channels_)
      throw std::invalid_argument("PsdTracker::update_frame: dimension mismatch");
    const double a = lambda_, b = 1.0 - lambda_;
    double power_sum = 0.0;
    for (int c = 0; c < channels_; ++c) {
      const std::complex<double>* xc = channel_bins[c];
      double* ap = &auto_psd_[static_cast<size_t>(c) * bins_];
      for (int f = 0; f < bins_; ++f) {
        ap[f] = a * ap[f] + b * std::norm(xc[f]);
        power_sum += ap[f];
      }
    }
    for (int i = 0; i < pairs_.size(); ++i) {
      const auto [p, q] = pairs_.pairs[i];
      const std::complex<double>*xp = channel_bins[p], *xq = channel_bins[q];
      std::complex<double>* cp = &cross_psd_[static_cast<size_t>(i) * bins_];
      for (int f = 0; f < bins_; ++f) cp[f] = a * cp[f] + b * xp[f] * std::conj(xq[f]);
    }
    mean_power_ = power_sum / (static_cast<double>(channels_) * bins_);
    ++frames_seen_;
  }

  double auto_psd(int channel, int frequency) const {
    return auto_psd_[static_cast<size_t>(channel) * bins_ + frequency];
  }
  std::complex<double> cross_psd(int pair_index, int frequency) const {
    return cross_psd_[static_cast<size_t>(pair_index) * bins_ + frequency];
  }

  // Coherence estimate for one pair and bin. When either auto-PSD sits below
  // the energy floor the estimate is undefined; `neutral` (typically the
  // diffuse model value) is returned instead with the low_energy flag set.
  CoherenceSample coherence(int pair_index, int frequency,
                            std::complex<double> neutral = {1.0, 0.0}) const {
    if (frames_seen_ == 0) throw std::logic_error("PsdTracker::coherence: no frames seen");
    const auto [p, q] = pairs_.pairs[pair_index];
    const double app = auto_psd(p, frequency), aqq = auto_psd(q, frequency);
    const double floor = kAutoFloorRel * mean_power_;
    if (!(app > floor) || !(aqq > floor)) return {neutral, true};
    std::complex<double> g = cross_psd(pair_index, frequency) / std::sqrt(app * aqq);
    const double mag = std::abs(g);
    if (mag > 1.0 - kCoherenceEps) g *= (1.0 - kCoherenceEps) / mag;
    return {g, false};
  }

 private:
  int channels_, bins_;
  double lambda_;
  PairSet pairs_;
  int warmup_frames_;
  long frames_seen_ = 0;
  double mean_power_ = 0.0;
  std::vector<double> auto_psd_;
  std::vector<std::complex<double>> cross_psd_;
  std::vector<const std::complex<double>*> scratch_;
};

}  // namespace cetk
