#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace punc {

/// Dense row-major matrix. Vectors (biases, norm gains) are 1 x n.
template <typename T>
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T(0))
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  T operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  T& operator[](std::size_t i) { return data_[i]; }
  T operator[](std::size_t i) const { return data_[i]; }

  std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<T> flat() { return data_; }
  std::span<const T> flat() const { return data_; }
  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  template <typename U>
  Matrix<U> cast() const {
    Matrix<U> out(rows_, cols_);
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return out;
  }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

namespace linalg {

template <typename T>
void check_shape(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(std::string("shape mismatch in ") + what);
}

/// out = a * b (+ bias broadcast over rows when given).
template <typename T>
Matrix<T> matmul(const Matrix<T>& a, const Matrix<T>& b, const Matrix<T>* bias = nullptr) {
  check_shape<T>(a.cols() == b.rows(), "matmul");
  Matrix<T> out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    T* o = out.row(i).data();
    if (bias) std::copy(bias->data(), bias->data() + b.cols(), o);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const T aik = a(i, k);
      if (aik == T(0)) continue;
      const T* brow = b.row(k).data();
      for (std::size_t j = 0; j < b.cols(); ++j) o[j] += aik * brow[j];
    }
  }
  return out;
}

/// out += a^T * b
template <typename T>
void add_matmul_at_b(Matrix<T>& out, const Matrix<T>& a, const Matrix<T>& b) {
  check_shape<T>(a.rows() == b.rows() && out.rows() == a.cols() && out.cols() == b.cols(),
                 "matmul a^T b");
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const T* brow = b.row(r).data();
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const T ari = a(r, i);
      if (ari == T(0)) continue;
      T* o = out.row(i).data();
      for (std::size_t j = 0; j < b.cols(); ++j) o[j] += ari * brow[j];
    }
  }
}

/// out = a * b^T
template <typename T>
Matrix<T> matmul_a_bt(const Matrix<T>& a, const Matrix<T>& b) {
  check_shape<T>(a.cols() == b.cols(), "matmul a b^T");
  Matrix<T> out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const T* arow = a.row(i).data();
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const T* brow = b.row(j).data();
      T s = T(0);
      for (std::size_t k = 0; k < a.cols(); ++k) s += arow[k] * brow[k];
      out(i, j) = s;
    }
  }
  return out;
}

/// bias_grad += column sums of g
template <typename T>
void add_column_sums(Matrix<T>& bias_grad, const Matrix<T>& g) {
  for (std::size_t r = 0; r < g.rows(); ++r)
    for (std::size_t c = 0; c < g.cols(); ++c) bias_grad[c] += g(r, c);
}

template <typename T>
void add_inplace(Matrix<T>& a, const Matrix<T>& b) {
  check_shape<T>(a.same_shape(b), "add");
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

template <typename T>
void softmax_rows(Matrix<T>& m) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    const T mx = *std::max_element(row.begin(), row.end());
    T sum = T(0);
    for (auto& v : row) {
      v = std::exp(v - mx);
      sum += v;
    }
    for (auto& v : row) v /= sum;
  }
}

}  // namespace linalg

template <typename T>
void fill_normal(Matrix<T>& m, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& v : m.flat()) v = static_cast<T>(dist(rng));
}

}  // namespace punc
