#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "seq2act/errors.hpp"
#include "seq2act/rng.hpp"

namespace seq2act {

// Dense row-major tensor of 64-bit floats. Value semantics; shapes are
// checked at every operation.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<std::size_t> s, std::vector<double> d)
      : shape(std::move(s)), data(std::move(d)) {}

  static Tensor zeros(std::vector<std::size_t> shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return Tensor(std::move(shape), std::vector<double>(n, 0.0));
  }

  static Tensor vector(std::vector<double> d) {
    std::size_t n = d.size();  // read before the move; evaluation order is unspecified
    return Tensor({n}, std::move(d));
  }

  static Tensor uniform(std::vector<std::size_t> shape, double lo, double hi, Rng& rng) {
    Tensor t = zeros(std::move(shape));
    for (double& x : t.data) x = rng.uniform(lo, hi);
    return t;
  }

  std::size_t numel() const { return data.size(); }
  std::size_t rows() const { return shape.at(0); }
  std::size_t cols() const { return shape.at(1); }
  bool is_vector() const { return shape.size() == 1; }
  bool is_matrix() const { return shape.size() == 2; }

  double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }
  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  std::string shape_str() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i)
      s += (i ? "x" : "") + std::to_string(shape[i]);
    return s + "]";
  }
};

namespace ops {

inline void require(bool cond, const std::string& what) {
  if (!cond) fail(Errc::ShapeMismatch, what);
}

// y = W x for W [m x n], x [n].
inline Tensor matvec(const Tensor& w, const Tensor& x) {
  require(w.is_matrix() && x.is_vector() && w.cols() == x.numel(),
          "matvec " + w.shape_str() + " * " + x.shape_str());
  Tensor y = Tensor::zeros({w.rows()});
  const double* wp = w.data.data();
  for (std::size_t r = 0; r < w.rows(); ++r) {
    double acc = 0.0;
    const double* row = wp + r * w.cols();
    for (std::size_t c = 0; c < w.cols(); ++c) acc += row[c] * x.data[c];
    y.data[r] = acc;
  }
  return y;
}

// y = W^T x for W [m x n], x [m].
inline Tensor matvec_t(const Tensor& w, const Tensor& x) {
  require(w.is_matrix() && x.is_vector() && w.rows() == x.numel(),
          "matvec_t " + w.shape_str() + " * " + x.shape_str());
  Tensor y = Tensor::zeros({w.cols()});
  for (std::size_t r = 0; r < w.rows(); ++r) {
    double xv = x.data[r];
    const double* row = w.data.data() + r * w.cols();
    for (std::size_t c = 0; c < w.cols(); ++c) y.data[c] += row[c] * xv;
  }
  return y;
}

inline Tensor add(const Tensor& a, const Tensor& b) {
  require(a.same_shape(b), "add " + a.shape_str() + " + " + b.shape_str());
  Tensor y = a;
  for (std::size_t i = 0; i < y.numel(); ++i) y.data[i] += b.data[i];
  return y;
}

inline Tensor hadamard(const Tensor& a, const Tensor& b) {
  require(a.same_shape(b), "hadamard " + a.shape_str() + " * " + b.shape_str());
  Tensor y = a;
  for (std::size_t i = 0; i < y.numel(); ++i) y.data[i] *= b.data[i];
  return y;
}

inline Tensor concat(const Tensor& a, const Tensor& b) {
  require(a.is_vector() && b.is_vector(), "concat of non-vectors");
  Tensor y = Tensor::zeros({a.numel() + b.numel()});
  std::copy(a.data.begin(), a.data.end(), y.data.begin());
  std::copy(b.data.begin(), b.data.end(), y.data.begin() + a.numel());
  return y;
}

inline Tensor tanh_v(const Tensor& a) {
  Tensor y = a;
  for (double& x : y.data) x = std::tanh(x);
  return y;
}

inline Tensor sigmoid_v(const Tensor& a) {
  Tensor y = a;
  for (double& x : y.data) x = 1.0 / (1.0 + std::exp(-x));
  return y;
}

inline double dot(const Tensor& a, const Tensor& b) {
  require(a.same_shape(b), "dot " + a.shape_str() + " . " + b.shape_str());
  double acc = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) acc += a.data[i] * b.data[i];
  return acc;
}

// Numerically stable softmax over a non-empty vector: entries positive,
// summing to one.
inline Tensor softmax(const Tensor& logits) {
  if (logits.numel() == 0) fail(Errc::EmptyInput, "softmax of an empty vector");
  Tensor y = logits;
  double mx = y.data[0];
  for (double x : y.data) mx = std::max(mx, x);
  double sum = 0.0;
  for (double& x : y.data) {
    x = std::exp(x - mx);
    sum += x;
  }
  for (double& x : y.data) x /= sum;
  return y;
}

inline Tensor log_softmax(const Tensor& logits) {
  if (logits.numel() == 0) fail(Errc::EmptyInput, "log_softmax of an empty vector");
  Tensor y = logits;
  double mx = y.data[0];
  for (double x : y.data) mx = std::max(mx, x);
  double sum = 0.0;
  for (double x : y.data) sum += std::exp(x - mx);
  double lse = mx + std::log(sum);
  for (double& x : y.data) x -= lse;
  return y;
}

}  // namespace ops

// Public softmax entry point (Eq. 5 normalization is shared by attention and
// the output distribution).
inline Tensor softmax(const Tensor& logits) { return ops::softmax(logits); }

}  // namespace seq2act
