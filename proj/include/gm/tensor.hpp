#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "gm/error.hpp"

namespace gm {

using Shape = std::vector<int64_t>;

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << "]";
  return os.str();
}

inline int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

// Dense row-major tensor. T is float (training mode) or double (verification
// mode). Invariant: data.size() == product of shape extents.
template <typename T>
struct Tensor {
  Shape shape;
  std::vector<T> data;
  bool requires_grad = false;

  Tensor() = default;
  explicit Tensor(Shape s) : shape(std::move(s)), data(size_t(shape_numel(shape)), T(0)) {}
  Tensor(Shape s, std::vector<T> values) : shape(std::move(s)), data(std::move(values)) {
    if (int64_t(data.size()) != shape_numel(shape))
      raise(ErrorKind::ShapeMismatch, "tensor data length " + std::to_string(data.size()) +
                                          " does not match shape " + shape_str(shape));
  }

  static Tensor zeros(Shape s) { return Tensor(std::move(s)); }
  static Tensor full(Shape s, T v) {
    Tensor t(std::move(s));
    std::fill(t.data.begin(), t.data.end(), v);
    return t;
  }
  static Tensor scalar(T v) { return Tensor({1}, {v}); }

  int rank() const { return int(shape.size()); }
  int64_t numel() const { return int64_t(data.size()); }
  int64_t dim(int i) const { return shape[size_t(i)]; }

  T& operator()(int64_t i) { return data[size_t(i)]; }
  const T& operator()(int64_t i) const { return data[size_t(i)]; }
  T& operator()(int64_t i, int64_t j) { return data[size_t(i * shape[1] + j)]; }
  const T& operator()(int64_t i, int64_t j) const { return data[size_t(i * shape[1] + j)]; }
  T& operator()(int64_t i, int64_t j, int64_t k) {
    return data[size_t((i * shape[1] + j) * shape[2] + k)];
  }
  const T& operator()(int64_t i, int64_t j, int64_t k) const {
    return data[size_t((i * shape[1] + j) * shape[2] + k)];
  }
  T& operator()(int64_t i, int64_t j, int64_t k, int64_t l) {
    return data[size_t(((i * shape[1] + j) * shape[2] + k) * shape[3] + l)];
  }
  const T& operator()(int64_t i, int64_t j, int64_t k, int64_t l) const {
    return data[size_t(((i * shape[1] + j) * shape[2] + k) * shape[3] + l)];
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (T v : data)
      if (!std::isfinite(double(v))) return false;
    return true;
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.requires_grad = requires_grad;
    out.data.resize(data.size());
    for (size_t i = 0; i < data.size(); ++i) out.data[i] = U(data[i]);
    return out;
  }
};

template <typename T>
void check_finite(const Tensor<T>& t, const char* what) {
  if (!t.all_finite()) raise(ErrorKind::NonFinite, std::string("non-finite values in ") + what);
}

template <typename T>
void require_shape(const Tensor<T>& t, const Shape& s, const char* what) {
  if (t.shape != s)
    raise(ErrorKind::ShapeMismatch, std::string(what) + ": expected " + shape_str(s) + ", got " +
                                        shape_str(t.shape));
}

}  // namespace gm
