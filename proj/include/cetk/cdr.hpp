// cdr.hpp
// Coherent-to-diffuse power ratio estimators. All four estimators map a
// short-time coherence estimate gx (magnitude kept below one by the PSD
// tracker) and the diffuse-field model coherence gn (plus, for the
// DOA-dependent ones, the direct-path model coherence gs) to a nonnegative
// power ratio. Estimates are clamped to [0, kCdrMax]; vanishing denominators
// are treated as the direct-only limit and reported via the clamped_high
// flag.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

#include "cetk/psd_tracker.hpp"

namespace cetk {

inline constexpr double kCdrMax = 1e4;
inline constexpr double kDenominatorEps = 1e-6;

enum class CdrEstimator { doa_indep, doa_dep, thiergart, jeub };

inline bool requires_doa(CdrEstimator e) {
  return e == CdrEstimator::doa_dep || e == CdrEstimator::jeub;
}

inline const char* to_string(CdrEstimator e) {
  switch (e) {
    case CdrEstimator::doa_indep: return "doaindep";
    case CdrEstimator::doa_dep: return "doadep";
    case CdrEstimator::thiergart: return "thiergart";
    case CdrEstimator::jeub: return "jeub";
  }
  return "?";
}

inline CdrEstimator cdr_estimator_from_string(const std::string& s) {
  if (s == "doaindep") return CdrEstimator::doa_indep;
  if (s == "doadep") return CdrEstimator::doa_dep;
  if (s == "thiergart") return CdrEstimator::thiergart;
  if (s == "jeub") return CdrEstimator::jeub;
  throw std::invalid_argument("unknown CDR estimator: " + s);
}

struct CdrValue {
  double cdr = 0.0;
  bool clamped_high = false;
  bool low_energy = false;
};

namespace detail {

inline std::complex<double> unit_phasor(std::complex<double> gs) {
  const double mag = std::abs(gs);
  if (mag < 1e-12) return {1.0, 0.0};
  return gs / mag;
}

inline CdrValue clamp_cdr(double value) {
  if (!(value >= 0.0)) value = 0.0;  // also catches NaN
  if (value >= kCdrMax) return {kCdrMax, true, false};
  return {value, false, false};
}

}  // namespace detail

// DOA-independent estimator using only Re{gx} and |gx|. Exact on the
// mixed-field forward model for any diffuse coherence. The radicand
//     gn^2 Re^2 - gn^2 |gx|^2 + gn^2 - 2 gn Re + |gx|^2
// is evaluated as (gn - Re)^2 + (1 - gn^2)(|gx|^2 - Re^2), which is
// algebraically identical but avoids the cancellation that otherwise pulls
// the estimate off zero in a pure diffuse field.
inline CdrValue cdr_doa_indep(std::complex<double> gx, double gn) {
  const double re = gx.real();
  const double m2 = std::norm(gx);
  const double d = gn - re;
  const double radicand = d * d + (1.0 - gn * gn) * std::max(0.0, m2 - re * re);
  const double num = gn * re - m2 - std::sqrt(std::max(0.0, radicand));
  const double den = m2 - 1.0;
  return detail::clamp_cdr(std::max(0.0, num / den));
}

// DOA-dependent estimator; gs is the unit-modulus direct-path coherence.
inline CdrValue cdr_doa_dep(std::complex<double> gx, double gn, std::complex<double> gs) {
  gs = detail::unit_phasor(gs);
  const double den = std::real(std::conj(gs) * gx) - 1.0;
  if (std::abs(den) < kDenominatorEps) return {kCdrMax, true, false};
  const double model_gap = std::max(std::abs(gn - gs), kDenominatorEps);
  const double factor = (1.0 - gn * std::cos(std::arg(gs))) / model_gap;
  const double ratio = std::abs(std::conj(gs) * (gn - gx) / den);
  return detail::clamp_cdr(std::max(0.0, factor * ratio));
}

// DOA-independent estimator that substitutes the instantaneous phase of gx
// for the direct-path phase.
inline CdrValue cdr_thiergart(std::complex<double> gx, double gn) {
  const std::complex<double> den = gx - std::polar(1.0, std::arg(gx));
  if (std::abs(den) < kDenominatorEps) return {kCdrMax, true, false};
  return detail::clamp_cdr(std::max(0.0, std::real((gn - gx) / den)));
}

// DOA-dependent estimator after Jeub.
inline CdrValue cdr_jeub(std::complex<double> gx, double gn, std::complex<double> gs) {
  gs = detail::unit_phasor(gs);
  const double proj = std::real(std::conj(gs) * gx);
  const double den = proj - 1.0;
  if (std::abs(den) < kDenominatorEps) return {kCdrMax, true, false};
  return detail::clamp_cdr(std::max(0.0, (gn - proj) / den));
}

inline CdrValue estimate_cdr(CdrEstimator kind, std::complex<double> gx, double gn,
                             std::complex<double> gs = {1.0, 0.0}) {
  switch (kind) {
    case CdrEstimator::doa_indep: return cdr_doa_indep(gx, gn);
    case CdrEstimator::doa_dep: return cdr_doa_dep(gx, gn, gs);
    case CdrEstimator::thiergart: return cdr_thiergart(gx, gn);
    case CdrEstimator::jeub: return cdr_jeub(gx, gn, gs);
  }
  throw std::logic_error("estimate_cdr: bad estimator kind");
}

// Diffuseness D = 1 / (1 + CDR), in (0, 1] for CDR in [0, kCdrMax].
inline double diffuseness(double cdr) { return 1.0 / (1.0 + cdr); }
inline double diffuseness(const CdrValue& v) { return diffuseness(v.cdr); }

}  // namespace cetk
