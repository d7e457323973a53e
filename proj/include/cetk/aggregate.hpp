// aggregate.hpp
// Combines pairwise CDR estimates into one input-side CDR via diffuseness
// averaging, and corrects it to the beamformer output with the diffuse-noise
// array gain.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <span>
#include <stdexcept>

#include <Eigen/Dense>

#include "cetk/cdr.hpp"

namespace cetk {

inline constexpr double kDiffusenessEps = 1e-4;
inline constexpr double kArrayGainEps = 1e-4;

// Arithmetic mean of the pairwise diffuseness values, clamped into
// [kDiffusenessEps, 1].
inline double average_diffuseness(std::span<const CdrValue> pair_cdrs) {
  if (pair_cdrs.empty()) throw std::invalid_argument("average_diffuseness: empty pair set");
  double sum = 0.0;
  for (const auto& v : pair_cdrs) sum += diffuseness(v);
  const double mean = sum / static_cast<double>(pair_cdrs.size());
  return std::clamp(mean, kDiffusenessEps, 1.0);
}

// Inverse of the diffuseness mapping: CDR = (1 - D) / D.
inline double input_cdr(double mean_diffuseness) {
  const double d = std::clamp(mean_diffuseness, kDiffusenessEps, 1.0);
  return (1.0 - d) / d;
}

// Inverse diffuse-noise array gain  A = w^H J w  for real symmetric J. The
// quadratic form is analytically real; the imaginary residue is asserted to
// be numerical noise only.
inline double diffuse_array_gain(const Eigen::VectorXcd& weights, const Eigen::MatrixXd& jdiff) {
  if (jdiff.rows() != jdiff.cols() || weights.size() != jdiff.rows())
    throw std::invalid_argument("diffuse_array_gain: dimension mismatch");
  const std::complex<double> a = weights.adjoint() * (jdiff * weights);
  const double scale = std::max(1.0, std::abs(a.real()));
  if (std::abs(a.imag()) > 1e-9 * scale)
    throw std::runtime_error("diffuse_array_gain: non-real quadratic form");
  return std::max(a.real(), kArrayGainEps);
}

// CDR at the beamformer output: input CDR divided by the array gain.
inline double beamformer_output_cdr(double cdr_in, double a_gamma) {
  if (!(cdr_in >= 0.0)) throw std::invalid_argument("beamformer_output_cdr: negative input CDR");
  const double a = std::max(a_gamma, kArrayGainEps);
  return std::min(cdr_in / a, kCdrMax);
}

}  // namespace cetk
