// postfilter.hpp
// CDR-driven Wiener gain and its application to the beamformer output.

#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>

#include "cetk/cdr.hpp"
#include "cetk/filterbank.hpp"

namespace cetk {

// Overestimation factors that performed best per estimator.
inline double default_mu(CdrEstimator e) {
  switch (e) {
    case CdrEstimator::doa_indep: return 1.1;
    case CdrEstimator::doa_dep: return 1.2;
    case CdrEstimator::thiergart: return 0.4;
    case CdrEstimator::jeub: return 0.8;
  }
  return 1.0;
}

struct PostfilterConfig {
  double mu = -1.0;  // < 0 resolves to default_mu(estimator)
  double g_min = 0.1;
  CdrEstimator estimator = CdrEstimator::doa_dep;

  double resolved_mu() const { return mu < 0.0 ? default_mu(estimator) : mu; }

  void validate() const {
    if (!std::isfinite(mu)) throw std::invalid_argument("PostfilterConfig: mu must be finite");
    if (!(g_min > 0.0 && g_min <= 1.0))
      throw std::invalid_argument("PostfilterConfig: g_min must be in (0, 1]");
  }
};

// G = max(1 - mu / (1 + CDR), g_min).
inline double wiener_gain(double cdr_bf, double mu, double g_min) {
  return std::max(1.0 - mu / (1.0 + cdr_bf), g_min);
}

inline double wiener_gain(double cdr_bf, const PostfilterConfig& cfg) {
  return wiener_gain(cdr_bf, cfg.resolved_mu(), cfg.g_min);
}

// Scales each (frame, bin) of a single-channel tensor by its real gain;
// phase is untouched.
inline void apply_gains(TfTensor& y, std::span<const float> gains) {
  if (y.channels != 1) throw std::invalid_argument("apply_gains: expected single channel");
  if (gains.size() != y.values.size()) throw std::invalid_argument("apply_gains: size mismatch");
  for (size_t i = 0; i < gains.size(); ++i) y.values[i] *= static_cast<double>(gains[i]);
}

}  // namespace cetk
