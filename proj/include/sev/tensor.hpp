#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "sev/errors.hpp"

namespace sev {

using Shape = std::vector<std::int64_t>;

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

inline std::int64_t shape_numel(const Shape& s) {
  std::int64_t n = 1;
  for (auto e : s) n *= e;
  return n;
}

// Dense N-dimensional array, row-major (C order), contiguous storage.
// The substrate for volumes, feature maps, filters and gradients; scalar
// type is double for verification work and may be float for training runs.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape, T fill = T(0)) : shape_(std::move(shape)) {
    validate_shape();
    data_.assign(static_cast<std::size_t>(shape_numel(shape_)), fill);
  }

  Tensor(Shape shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    validate_shape();
    if (static_cast<std::int64_t>(data_.size()) != shape_numel(shape_))
      throw ShapeError("tensor data size " + std::to_string(data_.size()) +
                       " does not match shape " + shape_str(shape_));
  }

  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  std::int64_t extent(int axis) const { return shape_[check_axis(axis)]; }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  T& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  const T& operator[](std::int64_t i) const {
    return data_[static_cast<std::size_t>(i)];
  }

  /// Bounds-checked element access; out-of-range indexing throws instead of
  /// wrapping around.
  T& at(std::initializer_list<std::int64_t> idx) {
    return data_[static_cast<std::size_t>(checked_offset(idx))];
  }
  const T& at(std::initializer_list<std::int64_t> idx) const {
    return data_[static_cast<std::size_t>(checked_offset(idx))];
  }

  /// Row-major strides.
  Shape strides() const {
    Shape st(shape_.size());
    std::int64_t acc = 1;
    for (int i = rank() - 1; i >= 0; --i) {
      st[static_cast<std::size_t>(i)] = acc;
      acc *= shape_[static_cast<std::size_t>(i)];
    }
    return st;
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  /// Reinterpret as a new shape with identical element count.
  Tensor reshaped(Shape new_shape) const {
    if (shape_numel(new_shape) != size())
      throw ShapeError("reshape " + shape_str(shape_) + " -> " +
                       shape_str(new_shape) + " changes element count");
    Tensor out;
    out.shape_ = std::move(new_shape);
    out.data_ = data_;
    return out;
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool empty() const { return data_.empty(); }

 private:
  std::int64_t check_axis(int axis) const {
    if (axis < 0 || axis >= rank())
      throw ShapeError("axis " + std::to_string(axis) +
                       " out of range for rank " + std::to_string(rank()));
    return axis;
  }

  std::int64_t checked_offset(std::initializer_list<std::int64_t> idx) const {
    if (static_cast<int>(idx.size()) != rank())
      throw ShapeError("index rank " + std::to_string(idx.size()) +
                       " does not match tensor rank " + std::to_string(rank()));
    std::int64_t off = 0;
    int ax = 0;
    for (auto i : idx) {
      const std::int64_t e = shape_[static_cast<std::size_t>(ax)];
      if (i < 0 || i >= e)
        throw ShapeError("index " + std::to_string(i) + " out of range [0," +
                         std::to_string(e) + ") on axis " + std::to_string(ax));
      off = off * e + i;
      ++ax;
    }
    return off;
  }

  void validate_shape() const {
    if (shape_.empty()) throw ShapeError("tensor rank must be >= 1");
    for (auto e : shape_)
      if (e < 1)
        throw ShapeError("all extents must be >= 1, got " + shape_str(shape_));
  }

  Shape shape_;
  std::vector<T> data_;
};

template <typename T>
using EigenVecMap = Eigen::Map<Eigen::Vector<T, Eigen::Dynamic>>;
template <typename T>
using EigenVecCMap = Eigen::Map<const Eigen::Vector<T, Eigen::Dynamic>>;

template <typename T>
EigenVecMap<T> as_vec(Tensor<T>& t) {
  return EigenVecMap<T>(t.data(), t.size());
}
template <typename T>
EigenVecCMap<T> as_vec(const Tensor<T>& t) {
  return EigenVecCMap<T>(t.data(), t.size());
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b,
                        const char* what) {
  if (!a.same_shape(b))
    throw ShapeError(std::string(what) + ": shape mismatch " +
                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

/// y += alpha * x
template <typename T>
void axpy(T alpha, const Tensor<T>& x, Tensor<T>& y) {
  require_same_shape(x, y, "axpy");
  as_vec(y) += alpha * as_vec(x);
}

template <typename T>
void scale_inplace(Tensor<T>& t, T alpha) {
  as_vec(t) *= alpha;
}

template <typename T>
double dot(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "dot");
  return as_vec(a).template cast<double>().dot(as_vec(b).template cast<double>());
}

template <typename T>
double l2_norm(const Tensor<T>& t) {
  return as_vec(t).template cast<double>().norm();
}

template <typename T>
double max_abs(const Tensor<T>& t) {
  return t.size() == 0 ? 0.0
                       : as_vec(t).template cast<double>().cwiseAbs().maxCoeff();
}

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "max_abs_diff");
  return (as_vec(a).template cast<double>() - as_vec(b).template cast<double>())
      .cwiseAbs()
      .maxCoeff();
}

template <typename T>
double sum(const Tensor<T>& t) {
  return as_vec(t).template cast<double>().sum();
}

template <typename T>
bool all_finite(const Tensor<T>& t) {
  const T* p = t.data();
  for (std::int64_t i = 0; i < t.size(); ++i)
    if (!std::isfinite(static_cast<double>(p[i]))) return false;
  return true;
}

/// Every public operation checks its result with this; a NaN/Inf is an error
/// surfaced to the caller, never silent.
template <typename T>
void ensure_finite(const Tensor<T>& t, const char* what) {
  if (!all_finite(t))
    throw NumericError(std::string("non-finite values in ") + what);
}

}  // namespace sev
