#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>

#include "wef/errors.hpp"

namespace wef {

using Complex = std::complex<double>;

/// Dense complex matrix with a fixed capacity of 8x8, sized at runtime.
/// Value semantics; everything lives on the stack.  Sized for companion
/// systems of differential operators up to order 8.
class Mat {
public:
  static constexpr int kMaxDim = 8;

  Mat() : rows_(0), cols_(0) { data_.fill(Complex(0.0)); }

  Mat(int rows, int cols) : rows_(rows), cols_(cols) {
    if (rows < 0 || cols < 0 || rows > kMaxDim || cols > kMaxDim)
      throw DomainError("matrix dimensions out of range");
    data_.fill(Complex(0.0));
  }

  static Mat identity(int n) {
    Mat m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  Complex& operator()(int i, int j) { return data_[static_cast<std::size_t>(i) * kMaxDim + j]; }
  const Complex& operator()(int i, int j) const {
    return data_[static_cast<std::size_t>(i) * kMaxDim + j];
  }

  Mat operator*(const Mat& rhs) const {
    Mat out(rows_, rhs.cols_);
    for (int i = 0; i < rows_; ++i)
      for (int k = 0; k < cols_; ++k) {
        const Complex a = (*this)(i, k);
        if (a == Complex(0.0)) continue;
        for (int j = 0; j < rhs.cols_; ++j) out(i, j) += a * rhs(k, j);
      }
    return out;
  }

  Mat operator+(const Mat& rhs) const {
    Mat out(rows_, cols_);
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j) out(i, j) = (*this)(i, j) + rhs(i, j);
    return out;
  }

  Mat operator-(const Mat& rhs) const {
    Mat out(rows_, cols_);
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j) out(i, j) = (*this)(i, j) - rhs(i, j);
    return out;
  }

  Mat operator*(Complex s) const {
    Mat out(rows_, cols_);
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j) out(i, j) = (*this)(i, j) * s;
    return out;
  }

  /// Conjugate transpose.
  Mat adjoint() const {
    Mat out(cols_, rows_);
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j) out(j, i) = std::conj((*this)(i, j));
    return out;
  }

  double max_abs() const {
    double m = 0.0;
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j) m = std::max(m, std::abs((*this)(i, j)));
    return m;
  }

  double frobenius_norm() const {
    double s = 0.0;
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j) s += std::norm((*this)(i, j));
    return std::sqrt(s);
  }

private:
  int rows_, cols_;
  std::array<Complex, kMaxDim * kMaxDim> data_;
};

inline Mat operator*(Complex s, const Mat& m) { return m * s; }

namespace detail {

/// LU factorization with partial pivoting, in place.  Returns the number of
/// row swaps, or -1 when a pivot column is exactly zero.
inline int lu_factor(Mat& a, std::array<int, Mat::kMaxDim>& piv) {
  const int n = a.rows();
  int swaps = 0;
  for (int i = 0; i < n; ++i) piv[static_cast<std::size_t>(i)] = i;
  for (int col = 0; col < n; ++col) {
    int p = col;
    double best = std::abs(a(col, col));
    for (int r = col + 1; r < n; ++r) {
      const double v = std::abs(a(r, col));
      if (v > best) {
        best = v;
        p = r;
      }
    }
    if (best == 0.0) return -1;
    if (p != col) {
      for (int j = 0; j < n; ++j) std::swap(a(col, j), a(p, j));
      std::swap(piv[static_cast<std::size_t>(col)], piv[static_cast<std::size_t>(p)]);
      ++swaps;
    }
    const Complex pivot = a(col, col);
    for (int r = col + 1; r < n; ++r) {
      const Complex f = a(r, col) / pivot;
      a(r, col) = f;
      for (int j = col + 1; j < n; ++j) a(r, j) -= f * a(col, j);
    }
  }
  return swaps;
}

} // namespace detail

/// Determinant by LU with partial pivoting.
inline Complex determinant(const Mat& m) {
  if (m.rows() != m.cols()) throw DomainError("determinant of non-square matrix");
  const int n = m.rows();
  if (n == 0) return Complex(1.0);
  if (n == 1) return m(0, 0);
  if (n == 2) return m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
  Mat a = m;
  std::array<int, Mat::kMaxDim> piv{};
  const int swaps = detail::lu_factor(a, piv);
  if (swaps < 0) return Complex(0.0);
  Complex det = (swaps % 2 == 0) ? Complex(1.0) : Complex(-1.0);
  for (int i = 0; i < n; ++i) det *= a(i, i);
  return det;
}

/// Inverse by LU with partial pivoting.  Throws on a numerically singular
/// input.
inline Mat inverse(const Mat& m) {
  if (m.rows() != m.cols()) throw DomainError("inverse of non-square matrix");
  const int n = m.rows();
  Mat a = m;
  std::array<int, Mat::kMaxDim> piv{};
  if (detail::lu_factor(a, piv) < 0)
    throw NumericalError("matrix is singular to working precision");
  Mat inv(n, n);
  for (int rhs = 0; rhs < n; ++rhs) {
    std::array<Complex, Mat::kMaxDim> x{};
    // forward substitution on the permuted unit vector
    for (int i = 0; i < n; ++i) {
      Complex s = (piv[static_cast<std::size_t>(i)] == rhs) ? Complex(1.0) : Complex(0.0);
      for (int j = 0; j < i; ++j) s -= a(i, j) * x[static_cast<std::size_t>(j)];
      x[static_cast<std::size_t>(i)] = s;
    }
    for (int i = n - 1; i >= 0; --i) {
      Complex s = x[static_cast<std::size_t>(i)];
      for (int j = i + 1; j < n; ++j) s -= a(i, j) * x[static_cast<std::size_t>(j)];
      x[static_cast<std::size_t>(i)] = s / a(i, i);
    }
    for (int i = 0; i < n; ++i) inv(i, rhs) = x[static_cast<std::size_t>(i)];
  }
  return inv;
}

/// Adjugate (transposed cofactor matrix), computed from minors so it stays
/// finite at singular inputs: A * adj(A) = det(A) * I always.
inline Mat adjugate(const Mat& m) {
  if (m.rows() != m.cols()) throw DomainError("adjugate of non-square matrix");
  const int n = m.rows();
  if (n == 0) return Mat(0, 0);
  if (n == 1) {
    Mat out(1, 1);
    out(0, 0) = 1.0;
    return out;
  }
  Mat out(n, n);
  Mat minor(n - 1, n - 1);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      int mr = 0;
      for (int r = 0; r < n; ++r) {
        if (r == i) continue;
        int mc = 0;
        for (int c = 0; c < n; ++c) {
          if (c == j) continue;
          minor(mr, mc) = m(r, c);
          ++mc;
        }
        ++mr;
      }
      const Complex cof = determinant(minor);
      out(j, i) = ((i + j) % 2 == 0) ? cof : -cof;
    }
  return out;
}

} // namespace wef
