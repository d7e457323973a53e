// geometry.hpp
// Array geometry, plane-wave TDOAs and the closed-form spatial coherence
// models for direct (unit-modulus phasor) and spherically isotropic diffuse
// (sinc) sound fields.

#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace cetk {

// Azimuth measured from the positive x-axis, elevation from the positive
// z-axis.
struct Doa {
  double azimuth_rad = 0.0;
  double elevation_rad = std::numbers::pi / 2;

  // Unit propagation vector, pointing from the source direction towards the
  // coordinate origin.
  std::array<double, 3> propagation() const {
    const double st = std::sin(elevation_rad), ct = std::cos(elevation_rad);
    const double cp = std::cos(azimuth_rad), sp = std::sin(azimuth_rad);
    return {-st * cp, -st * sp, -ct};
  }
};

struct ArrayGeometry {
  std::vector<std::array<double, 3>> positions;
  double speed_of_sound = 343.0;

  int num_channels() const { return static_cast<int>(positions.size()); }

  double pair_distance(int p, int q) const {
    check_index(p);
    check_index(q);
    const auto &a = positions[p], &b = positions[q];
    const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
    return std::sqrt(dx * dx + dy * dy + dz * dz);
  }

  double max_pair_distance() const {
    double d = 0.0;
    for (int p = 0; p < num_channels(); ++p)
      for (int q = p + 1; q < num_channels(); ++q) d = std::max(d, pair_distance(p, q));
    return d;
  }

  void validate() const {
    if (positions.empty()) throw std::invalid_argument("ArrayGeometry: need at least one microphone");
    if (!(speed_of_sound > 0)) throw std::invalid_argument("ArrayGeometry: speed of sound must be > 0");
    for (const auto& p : positions)
      for (double v : p)
        if (!std::isfinite(v)) throw std::invalid_argument("ArrayGeometry: non-finite position");
  }

  void check_index(int n) const {
    if (n < 0 || n >= num_channels())
      throw std::out_of_range("ArrayGeometry: channel index out of range");
  }
};

// TDOA of channel n with respect to the coordinate origin for a plane wave
// from the given direction.
inline double tdoa(const ArrayGeometry& geom, const Doa& doa, int n) {
  geom.check_index(n);
  const auto a = doa.propagation();
  const auto& p = geom.positions[n];
  return (a[0] * p[0] + a[1] * p[1] + a[2] * p[2]) / geom.speed_of_sound;
}

inline std::vector<double> tdoa_vector(const ArrayGeometry& geom, const Doa& doa) {
  std::vector<double> taus(geom.num_channels());
  for (int n = 0; n < geom.num_channels(); ++n) taus[n] = tdoa(geom, doa, n);
  return taus;
}

// Coherence of the direct path between microphones p and q: a unit-modulus
// phasor determined by the TDOA difference.
inline std::complex<double> direct_coherence(const ArrayGeometry& geom, const Doa& doa, int p,
                                             int q, double freq_hz) {
  const double dt = tdoa(geom, doa, p) - tdoa(geom, doa, q);
  return std::polar(1.0, 2.0 * std::numbers::pi * freq_hz * dt);
}

inline std::complex<double> direct_coherence_from_tdoas(double tau_p, double tau_q,
                                                        double freq_hz) {
  return std::polar(1.0, 2.0 * std::numbers::pi * freq_hz * (tau_p - tau_q));
}

// Coherence of a spherically isotropic diffuse field between two points at
// distance d: sinc(2 pi f d / c), with the analytic limit 1 at zero argument.
inline double diffuse_coherence(double distance_m, double freq_hz, double speed_of_sound) {
  const double x = 2.0 * std::numbers::pi * freq_hz * distance_m / speed_of_sound;
  if (std::abs(x) < 1e-12) return 1.0;
  return std::sin(x) / x;
}

// N x N diffuse-field coherence matrix at one frequency; symmetric with unit
// diagonal.
inline Eigen::MatrixXd diffuse_coherence_matrix(const ArrayGeometry& geom, double freq_hz) {
  const int n = geom.num_channels();
  Eigen::MatrixXd j = Eigen::MatrixXd::Identity(n, n);
  for (int p = 0; p < n; ++p)
    for (int q = p + 1; q < n; ++q)
      j(p, q) = j(q, p) =
          diffuse_coherence(geom.pair_distance(p, q), freq_hz, geom.speed_of_sound);
  return j;
}

// Geometry JSON: { "speed_of_sound": number, "positions_m": [[x,y,z], ...] }.
inline ArrayGeometry geometry_from_json(const nlohmann::json& j) {
  ArrayGeometry geom;
  if (j.contains("speed_of_sound")) geom.speed_of_sound = j.at("speed_of_sound").get<double>();
  for (const auto& pos : j.at("positions_m")) {
    if (pos.size() != 3) throw std::invalid_argument("geometry: positions_m entries must be [x,y,z]");
    geom.positions.push_back({pos[0].get<double>(), pos[1].get<double>(), pos[2].get<double>()});
  }
  geom.validate();
  return geom;
}

inline ArrayGeometry load_geometry(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open geometry file: " + path);
  nlohmann::json j;
  f >> j;
  return geometry_from_json(j);
}

}  // namespace cetk
