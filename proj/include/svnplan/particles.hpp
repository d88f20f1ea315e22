#pragma once

#include <Eigen/Dense>

namespace svnplan {

/// N decision vectors of a common dimension, stored column-wise.
class ParticleSet {
 public:
  ParticleSet() = default;
  ParticleSet(Eigen::Index dim, Eigen::Index count) : data_(Eigen::MatrixXd::Zero(dim, count)) {}
  explicit ParticleSet(Eigen::MatrixXd columns) : data_(std::move(columns)) {}

  Eigen::Index size() const { return data_.cols(); }
  Eigen::Index dim() const { return data_.rows(); }
  bool empty() const { return data_.cols() == 0; }

  auto operator[](Eigen::Index i) { return data_.col(i); }
  auto operator[](Eigen::Index i) const { return data_.col(i); }

  const Eigen::MatrixXd& matrix() const { return data_; }
  Eigen::MatrixXd& matrix() { return data_; }

  bool operator==(const ParticleSet& other) const {
    return data_.rows() == other.data_.rows() && data_.cols() == other.data_.cols() &&
           data_ == other.data_;
  }

 private:
  Eigen::MatrixXd data_;
};

}  // namespace svnplan
