#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

namespace pddp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Dense rank-3 tensor T(i,j,k) stored as contiguous row-major slices:
/// slice(i) is the d1 x d2 matrix T(i,.,.). Flat layout is (i*d1 + j)*d2 + k.
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(int d0, int d1, int d2)
      : d0_(d0), d1_(d1), d2_(d2), data_(VectorXd::Zero(static_cast<long>(d0) * d1 * d2)) {}

  static Tensor3 Zero(int d0, int d1, int d2) { return Tensor3(d0, d1, d2); }

  int dim0() const { return d0_; }
  int dim1() const { return d1_; }
  int dim2() const { return d2_; }
  long size() const { return data_.size(); }
  bool empty() const { return data_.size() == 0; }

  double& operator()(int i, int j, int k) { return data_[(static_cast<long>(i) * d1_ + j) * d2_ + k]; }
  double operator()(int i, int j, int k) const { return data_[(static_cast<long>(i) * d1_ + j) * d2_ + k]; }

  using SliceMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using ConstSliceMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

  SliceMap slice(int i) { return SliceMap(data_.data() + static_cast<long>(i) * d1_ * d2_, d1_, d2_); }
  ConstSliceMap slice(int i) const {
    return ConstSliceMap(data_.data() + static_cast<long>(i) * d1_ * d2_, d1_, d2_);
  }

  /// Whole tensor as a d0 x (d1*d2) matrix, one flattened slice per row.
  ConstSliceMap flat() const { return ConstSliceMap(data_.data(), d0_, static_cast<long>(d1_) * d2_); }
  SliceMap flat() { return SliceMap(data_.data(), d0_, static_cast<long>(d1_) * d2_); }

  VectorXd& raw() { return data_; }
  const VectorXd& raw() const { return data_; }

  void setZero() { data_.setZero(); }

  Tensor3& operator+=(const Tensor3& o) {
    data_ += o.data_;
    return *this;
  }
  Tensor3& operator*=(double a) {
    data_ *= a;
    return *this;
  }

 private:
  int d0_ = 0, d1_ = 0, d2_ = 0;
  VectorXd data_;
};

namespace detail {
inline void check_square(const Tensor3& t, const char* who) {
  if (t.dim0() != t.dim1() || t.dim1() != t.dim2()) throw std::invalid_argument(std::string(who) + ": tensor not cubic");
}
}  // namespace detail

/// U(i,j) = sum_p T(i,p,j) * v(p)  (contraction over the middle index).
inline MatrixXd contract_dim2(const VectorXd& v, const Tensor3& t) {
  detail::check_square(t, "contract_dim2");
  if (v.size() != t.dim1()) throw std::invalid_argument("contract_dim2: dimension mismatch");
  const int n = t.dim0();
  MatrixXd u(n, n);
  for (int i = 0; i < n; ++i) u.row(i) = v.transpose() * t.slice(i);
  return u;
}

/// B(i,j,k) = sum_p A(i,p) * T(p,j,k)  (contraction over the first index).
inline Tensor3 contract_dim1(const MatrixXd& a, const Tensor3& t) {
  detail::check_square(t, "contract_dim1");
  if (a.cols() != t.dim0() || a.rows() != t.dim0()) throw std::invalid_argument("contract_dim1: dimension mismatch");
  const int n = t.dim0();
  Tensor3 b(n, n, n);
  b.flat().noalias() = a * t.flat();
  return b;
}

/// C(i,j,k) = sum_{p,q} T(i,p,q) * A(p,j) * A(q,k)  (two-sided contraction).
inline Tensor3 sandwich(const Tensor3& t, const MatrixXd& a) {
  detail::check_square(t, "sandwich");
  if (a.rows() != t.dim0() || a.cols() != t.dim0()) throw std::invalid_argument("sandwich: dimension mismatch");
  const int n = t.dim0();
  Tensor3 c(n, n, n);
  for (int i = 0; i < n; ++i) c.slice(i).noalias() = a.transpose() * t.slice(i) * a;
  return c;
}

}  // namespace pddp
