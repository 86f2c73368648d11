#ifndef OTE_TENSOR_HPP
#define OTE_TENSOR_HPP

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include "ote/error.hpp"

namespace ote {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

// Dense numeric array, row-major. Rank 0 is a scalar, rank 1 a vector,
// rank 2 a matrix. The scalar type S is float for training and inference;
// double instantiations exist for gradient checking.
template <typename S>
class Tensor {
public:
  Tensor() : shape_{}, data_(1, S(0)) {}

  explicit Tensor(Shape shape)
      : shape_(std::move(shape)), data_(shape_size(shape_), S(0)) {}

  Tensor(Shape shape, std::vector<S> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_size(shape_) != data_.size()) {
      throw ShapeError("tensor shape " + shape_str(shape_) + " needs " +
                       std::to_string(shape_size(shape_)) +
                       " entries, got " + std::to_string(data_.size()));
    }
  }

  static Tensor scalar(S v) { return Tensor(Shape{}, {v}); }

  static Tensor vector(std::vector<S> v) {
    Shape shape{v.size()};
    return Tensor(std::move(shape), std::move(v));
  }

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

  static Tensor full(Shape shape, S v) {
    Tensor t(std::move(shape));
    for (S& x : t.data_) x = v;
    return t;
  }

  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::vector<S> data) {
    return Tensor(Shape{rows, cols}, std::move(data));
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }

  bool is_scalar() const { return data_.size() == 1 && shape_.size() <= 1; }
  bool is_vector() const { return shape_.size() == 1; }
  bool is_matrix() const { return shape_.size() == 2; }

  std::size_t rows() const { return shape_.at(0); }
  std::size_t cols() const { return shape_.at(1); }

  S* data() { return data_.data(); }
  const S* data() const { return data_.data(); }
  std::vector<S>& storage() { return data_; }
  const std::vector<S>& storage() const { return data_; }

  S& operator[](std::size_t i) { return data_[i]; }
  const S& operator[](std::size_t i) const { return data_[i]; }

  S& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  const S& at(std::size_t r, std::size_t c) const {
    return data_[r * cols() + c];
  }

  S scalar_value() const {
    if (!is_scalar()) {
      throw ContractError("expected a scalar tensor, got shape " +
                          shape_str(shape_));
    }
    return data_[0];
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  bool all_finite() const {
    for (S v : data_) {
      if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
  }

  void fill(S v) {
    for (S& x : data_) x = v;
  }

  // Converts the element type, e.g. float -> double for finite differences.
  template <typename T>
  Tensor<T> cast() const {
    std::vector<T> out(data_.size());
    for (std::size_t i = 0; i < data_.size(); ++i)
      out[i] = static_cast<T>(data_[i]);
    return Tensor<T>(shape_, std::move(out));
  }

private:
  Shape shape_;
  std::vector<S> data_;
};

}  // namespace ote

#endif  // OTE_TENSOR_HPP
