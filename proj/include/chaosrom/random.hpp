#pragma once

// Portable draws from mt19937_64 (the engine is fully specified by the
// standard; the distribution adaptors are not).

#include <cmath>
#include <random>

#include <Eigen/Dense>

namespace chaosrom {

inline double unit_uniform(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

// Box-Muller; one normal per call.
inline double standard_normal(std::mt19937_64& gen) {
  double u1 = unit_uniform(gen);
  while (u1 <= 0.0) u1 = unit_uniform(gen);
  const double u2 = unit_uniform(gen);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

inline Eigen::VectorXd random_unit_vector(Eigen::Index r, std::mt19937_64& gen) {
  Eigen::VectorXd u(r);
  do {
    for (Eigen::Index i = 0; i < r; ++i) u[i] = standard_normal(gen);
  } while (u.norm() < 1e-8);
  return u / u.norm();
}

}  // namespace chaosrom
