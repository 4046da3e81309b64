#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "chaosrom/errors.hpp"

namespace chaosrom {

// Dense 3-tensor, row-major (last index fastest).
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(Eigen::Index d0, Eigen::Index d1, Eigen::Index d2)
      : d0_(d0), d1_(d1), d2_(d2), data_(static_cast<std::size_t>(d0 * d1 * d2), 0.0) {}

  Eigen::Index dim0() const { return d0_; }
  Eigen::Index dim1() const { return d1_; }
  Eigen::Index dim2() const { return d2_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(Eigen::Index i, Eigen::Index j, Eigen::Index k) {
    return data_[static_cast<std::size_t>((i * d1_ + j) * d2_ + k)];
  }
  double operator()(Eigen::Index i, Eigen::Index j, Eigen::Index k) const {
    return data_[static_cast<std::size_t>((i * d1_ + j) * d2_ + k)];
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  // y_i = sum_jk T_ijk u_j u_k
  Eigen::VectorXd contract(const Eigen::VectorXd& u) const {
    if (u.size() != d1_ || u.size() != d2_) throw DimensionError("tensor contraction size mismatch");
    Eigen::VectorXd y = Eigen::VectorXd::Zero(d0_);
    for (Eigen::Index i = 0; i < d0_; ++i) {
      double acc = 0.0;
      for (Eigen::Index j = 0; j < d1_; ++j) {
        double inner = 0.0;
        for (Eigen::Index k = 0; k < d2_; ++k) inner += (*this)(i, j, k) * u[k];
        acc += u[j] * inner;
      }
      y[i] = acc;
    }
    return y;
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
  }

  bool operator==(const Tensor3& o) const {
    return d0_ == o.d0_ && d1_ == o.d1_ && d2_ == o.d2_ && data_ == o.data_;
  }

 private:
  Eigen::Index d0_ = 0, d1_ = 0, d2_ = 0;
  std::vector<double> data_;
};

}  // namespace chaosrom
