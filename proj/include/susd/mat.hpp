#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "susd/error.hpp"

namespace susd {

// Dense row-major matrix. Vectors are 1 x n or n x 1; scalars are 1 x 1.
// The flat value array is the storage contract used by checkpoints.
template <typename S>
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<S> v;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * c, S(0)) {
    if (r <= 0 || c <= 0) throw DimensionError("Mat: nonpositive shape");
  }
  Mat(int r, int c, std::vector<S> values) : rows(r), cols(c), v(std::move(values)) {
    if (static_cast<size_t>(r) * c != v.size())
      throw DimensionError("Mat: value count does not match shape");
  }

  static Mat zeros(int r, int c) { return Mat(r, c); }
  static Mat full(int r, int c, S x) {
    Mat m(r, c);
    for (auto& e : m.v) e = x;
    return m;
  }
  static Mat identity(int n) {
    Mat m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = S(1);
    return m;
  }

  S& operator()(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
  S operator()(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }

  size_t size() const { return v.size(); }
  std::vector<int> shape() const { return {rows, cols}; }
  bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
  bool is_scalar() const { return rows == 1 && cols == 1; }
  S scalar() const {
    if (!is_scalar()) throw ContractError("Mat: scalar() on non 1x1 value");
    return v[0];
  }

  bool all_finite() const {
    for (S x : v)
      if (!std::isfinite(static_cast<double>(x))) return false;
    return true;
  }

  template <typename T>
  Mat<T> cast() const {
    Mat<T> out;
    out.rows = rows;
    out.cols = cols;
    out.v.resize(v.size());
    for (size_t i = 0; i < v.size(); ++i) out.v[i] = static_cast<T>(v[i]);
    return out;
  }
};

namespace detail {
// BLAS-backed matrix multiply kernels, defined in mat.cpp.
void gemm_kernel(bool trans_a, bool trans_b, int m, int n, int k, const float* a,
                 int lda, const float* b, int ldb, float* c, int ldc);
void gemm_kernel(bool trans_a, bool trans_b, int m, int n, int k, const double* a,
                 int lda, const double* b, int ldb, double* c, int ldc);
}  // namespace detail

// c = op(a) * op(b). Shapes are validated against the stored matrices.
template <typename S>
Mat<S> matmul(const Mat<S>& a, const Mat<S>& b, bool trans_a = false,
              bool trans_b = false) {
  const int am = trans_a ? a.cols : a.rows;
  const int ak = trans_a ? a.rows : a.cols;
  const int bk = trans_b ? b.cols : b.rows;
  const int bn = trans_b ? b.rows : b.cols;
  if (ak != bk)
    throw DimensionError("matmul: inner dimensions " + std::to_string(ak) + " vs " +
                         std::to_string(bk));
  Mat<S> c(am, bn);
  detail::gemm_kernel(trans_a, trans_b, am, bn, ak, a.v.data(), a.cols, b.v.data(),
                      b.cols, c.v.data(), c.cols);
  return c;
}

// c += op(a) * op(b), accumulating into an existing buffer.
template <typename S>
void matmul_acc(Mat<S>& c, const Mat<S>& a, const Mat<S>& b, bool trans_a,
                bool trans_b) {
  Mat<S> tmp = matmul(a, b, trans_a, trans_b);
  if (!c.same_shape(tmp)) throw DimensionError("matmul_acc: output shape mismatch");
  for (size_t i = 0; i < c.v.size(); ++i) c.v[i] += tmp.v[i];
}

}  // namespace susd
