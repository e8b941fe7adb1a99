#pragma once

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>
#include <string>

namespace mixnewton {

using Complex = std::complex<double>;
using Index = Eigen::Index;

using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;
using RMatrix = Eigen::MatrixXd;

/// A residual or derivative came back NaN/Inf. Carries the residual index
/// when one is known (-1 otherwise).
class EvaluationError : public std::runtime_error {
 public:
  explicit EvaluationError(const std::string& what, Index index = -1)
      : std::runtime_error(what), index_(index) {}
  Index index() const noexcept { return index_; }

 private:
  Index index_;
};

/// A factorization hit a non-positive or vanishing pivot.
class SingularMatrixError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Iterative numerics (root bracketing, LM inner loop) gave up.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline bool all_finite(const CVector& v) {
  for (Index i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i].real()) || !std::isfinite(v[i].imag())) return false;
  }
  return true;
}

inline bool all_finite(const CMatrix& m) {
  for (Index j = 0; j < m.cols(); ++j) {
    for (Index i = 0; i < m.rows(); ++i) {
      if (!std::isfinite(m(i, j).real()) || !std::isfinite(m(i, j).imag())) return false;
    }
  }
  return true;
}

/// Builds a point in C^n, rejecting empty or non-finite input.
inline CVector make_point(const CVector& entries) {
  if (entries.size() < 1) throw std::invalid_argument("point must have at least one entry");
  if (!all_finite(entries)) throw std::invalid_argument("point has non-finite entries");
  return entries;
}

inline CVector make_point(std::initializer_list<Complex> entries) {
  CVector v(static_cast<Index>(entries.size()));
  Index i = 0;
  for (const auto& e : entries) v[i++] = e;
  return make_point(v);
}

/// Square complex matrix that is Hermitian by construction. The upper
/// triangle of the input is kept and mirrored; the diagonal is made real.
class HermitianMatrix {
 public:
  HermitianMatrix() = default;

  explicit HermitianMatrix(const CMatrix& m) : data_(m.rows(), m.cols()) {
    if (m.rows() != m.cols()) throw std::invalid_argument("Hermitian matrix must be square");
    const Index n = m.rows();
    for (Index j = 0; j < n; ++j) {
      data_(j, j) = Complex(m(j, j).real(), 0.0);
      for (Index i = 0; i < j; ++i) {
        data_(i, j) = m(i, j);
        data_(j, i) = std::conj(m(i, j));
      }
    }
  }

  static HermitianMatrix identity(Index n, double scale = 1.0) {
    return HermitianMatrix(CMatrix::Identity(n, n) * scale);
  }

  Index size() const noexcept { return data_.rows(); }
  const CMatrix& matrix() const noexcept { return data_; }
  Complex operator()(Index i, Index j) const { return data_(i, j); }

  HermitianMatrix operator+(const HermitianMatrix& other) const {
    return HermitianMatrix(data_ + other.data_);
  }
  HermitianMatrix shifted(double s) const {
    HermitianMatrix out = *this;
    for (Index i = 0; i < size(); ++i) out.data_(i, i) += s;
    return out;
  }
  HermitianMatrix conjugate() const {
    HermitianMatrix out;
    out.data_ = data_.conjugate();
    return out;
  }

 private:
  CMatrix data_;
};

/// Mirrors the upper triangle so that m == m^T exactly.
inline CMatrix symmetrized(const CMatrix& m) {
  CMatrix out = m;
  for (Index j = 0; j < m.cols(); ++j) {
    for (Index i = 0; i < j; ++i) out(j, i) = out(i, j);
  }
  return out;
}

}  // namespace mixnewton
