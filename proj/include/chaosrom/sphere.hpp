#pragma once

#include <Eigen/Dense>

#include "chaosrom/errors.hpp"

namespace chaosrom {

inline constexpr double kDegenerateNorm = 1e-12;

// Closed-form projection onto the unit sphere S^{r-1}.
inline Eigen::VectorXd sphere_project(const Eigen::VectorXd& u) {
  const double norm = u.norm();
  if (!(norm >= kDegenerateNorm)) {
    throw DegenerateError("sphere projection undefined for |u| < 1e-12");
  }
  return u / norm;
}

// g(u) = |u|_2 - 1
inline double sphere_constraint(const Eigen::VectorXd& u) { return u.norm() - 1.0; }

// Column-wise projection, used by the batched training path.
inline void sphere_project_columns(Eigen::MatrixXd& u) {
  for (Eigen::Index j = 0; j < u.cols(); ++j) {
    const double norm = u.col(j).norm();
    if (!(norm >= kDegenerateNorm)) {
      throw DegenerateError("sphere projection undefined for |u| < 1e-12");
    }
    u.col(j) /= norm;
  }
}

// Reverse-mode rule for y = z/|z|: dz = (dy - y (y.dy)) / |z|.
inline Eigen::VectorXd sphere_project_pullback(const Eigen::VectorXd& z,
                                               const Eigen::VectorXd& dy) {
  const double norm = z.norm();
  const Eigen::VectorXd y = z / norm;
  return (dy - y * y.dot(dy)) / norm;
}

inline Eigen::MatrixXd sphere_project_pullback_columns(const Eigen::MatrixXd& z,
                                                       const Eigen::MatrixXd& dy) {
  Eigen::MatrixXd dz(z.rows(), z.cols());
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    dz.col(j) = sphere_project_pullback(z.col(j), dy.col(j));
  }
  return dz;
}

// Projection functors for the integrators. Each projects its argument in place.
struct NoProjection {
  static constexpr bool active = false;
  template <typename State>
  void operator()(State&) const {}
};

struct SphereProjection {
  static constexpr bool active = true;
  void operator()(Eigen::VectorXd& u) const { u = sphere_project(u); }
  void operator()(Eigen::MatrixXd& u) const { sphere_project_columns(u); }
};

}  // namespace chaosrom
