#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "supermask/errors.hpp"

namespace supermask {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

inline Index shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1},
                         [](Index a, Index b) { return a * b; });
}

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using RowMatrixMap = Eigen::Map<RowMatrix<Scalar>>;
template <typename Scalar>
using ConstRowMatrixMap = Eigen::Map<const RowMatrix<Scalar>>;

/// N-dimensional row-major array of reals. Values live in an Eigen column
/// array so whole-array arithmetic stays expression-friendly.
template <typename Scalar>
class DenseArray {
 public:
  using Values = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  DenseArray() = default;

  explicit DenseArray(Shape shape) : shape_(std::move(shape)) {
    check_shape(shape_);
    values_ = Values::Zero(shape_size(shape_));
  }

  DenseArray(Shape shape, Values values) : shape_(std::move(shape)), values_(std::move(values)) {
    check_shape(shape_);
    if (values_.size() != shape_size(shape_))
      throw DimensionError("value count " + std::to_string(values_.size()) +
                           " does not match shape " + shape_string(shape_));
  }

  DenseArray(Shape shape, std::initializer_list<Scalar> values) : shape_(std::move(shape)) {
    check_shape(shape_);
    if (static_cast<Index>(values.size()) != shape_size(shape_))
      throw DimensionError("value count does not match shape " + shape_string(shape_));
    values_.resize(static_cast<Index>(values.size()));
    Index i = 0;
    for (Scalar v : values) values_[i++] = v;
  }

  static DenseArray zeros(Shape shape) { return DenseArray(std::move(shape)); }
  static DenseArray filled(Shape shape, Scalar value) {
    DenseArray a(std::move(shape));
    a.values_.setConstant(value);
    return a;
  }
  static DenseArray ones(Shape shape) { return filled(std::move(shape), Scalar(1)); }

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index dim(Index i) const { return shape_[static_cast<std::size_t>(i)]; }
  Index size() const { return values_.size(); }
  bool empty() const { return values_.size() == 0; }

  Values& values() { return values_; }
  const Values& values() const { return values_; }
  Scalar* data() { return values_.data(); }
  const Scalar* data() const { return values_.data(); }

  Scalar& operator[](Index i) { return values_[i]; }
  Scalar operator[](Index i) const { return values_[i]; }

  /// Row-major 2D view: first `rows` extent, the rest flattened.
  RowMatrixMap<Scalar> matrix(Index rows, Index cols) { return {values_.data(), rows, cols}; }
  ConstRowMatrixMap<Scalar> matrix(Index rows, Index cols) const {
    return {values_.data(), rows, cols};
  }
  RowMatrixMap<Scalar> matrix() { return matrix(dim(0), size() / dim(0)); }
  ConstRowMatrixMap<Scalar> matrix() const { return matrix(dim(0), size() / dim(0)); }

  DenseArray reshaped(Shape shape) const {
    if (shape_size(shape) != size())
      throw DimensionError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    return DenseArray(std::move(shape), values_);
  }

  template <typename Other>
  DenseArray<Other> cast() const {
    return DenseArray<Other>(shape_, values_.template cast<Other>());
  }

  bool all_finite() const { return values_.isFinite().all(); }

  friend bool operator==(const DenseArray& a, const DenseArray& b) {
    return a.shape_ == b.shape_ && (a.values_ == b.values_).all();
  }

 private:
  static void check_shape(const Shape& shape) {
    for (Index d : shape)
      if (d <= 0) throw DimensionError("non-positive extent in shape " + shape_string(shape));
  }

  Shape shape_;
  Values values_;
};

/// FNV-1a over the raw bytes of the values; used to prove weights stay frozen.
template <typename Scalar>
std::uint64_t content_hash(const DenseArray<Scalar>& a, std::uint64_t h = 1469598103934665603ULL) {
  const auto* bytes = reinterpret_cast<const unsigned char*>(a.data());
  const std::size_t n = static_cast<std::size_t>(a.size()) * sizeof(Scalar);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= bytes[i];
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace supermask
