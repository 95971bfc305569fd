#pragma once

#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ksgrank::num {

// Dense row-major tensor of rank 0 (scalar), 1 (vector) or 2 (matrix).
// Default-constructed tensors are empty, which the tape uses to mark
// gradients that were never touched.
template <typename T>
class BasicTensor {
 public:
  BasicTensor() = default;

  explicit BasicTensor(std::vector<std::size_t> shape, T fill = T(0))
      : shape_(std::move(shape)), data_(count(shape_), fill) {}

  static BasicTensor scalar(T v) {
    BasicTensor t{std::vector<std::size_t>{}};
    t.data_[0] = v;
    return t;
  }

  static BasicTensor row(std::vector<T> values) {
    BasicTensor t;
    t.shape_ = {1, values.size()};
    t.data_ = std::move(values);
    return t;
  }

  static BasicTensor column(std::vector<T> values) {
    BasicTensor t;
    t.shape_ = {values.size(), 1};
    t.data_ = std::move(values);
    return t;
  }

  static BasicTensor matrix(std::size_t rows, std::size_t cols, std::vector<T> values) {
    if (values.size() != rows * cols)
      throw std::invalid_argument("tensor: matrix expects " + std::to_string(rows * cols) +
                                  " values, got " + std::to_string(values.size()));
    BasicTensor t;
    t.shape_ = {rows, cols};
    t.data_ = std::move(values);
    return t;
  }

  bool empty() const { return data_.empty(); }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  const std::vector<std::size_t>& shape() const { return shape_; }
  bool is_scalar() const { return !empty() && shape_.empty(); }

  std::size_t rows() const { require_rank2("rows"); return shape_[0]; }
  std::size_t cols() const { require_rank2("cols"); return shape_[1]; }

  T& operator()(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  const T& operator()(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T scalar_value() const {
    if (size() != 1)
      throw std::logic_error("tensor: scalar_value on tensor of size " + std::to_string(size()));
    return data_[0];
  }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool same_shape(const BasicTensor& o) const { return shape_ == o.shape_; }

  template <typename U>
  BasicTensor<U> cast() const {
    if (empty()) return {};
    BasicTensor<U> out(shape_);
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return out;
  }

  std::string shape_str() const {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape_.size(); ++i) os << (i ? "," : "") << shape_[i];
    os << ')';
    return os.str();
  }

 private:
  static std::size_t count(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (auto d : s) n *= d;
    return n;
  }
  void require_rank2(const char* what) const {
    if (rank() != 2)
      throw std::logic_error(std::string(what) + ": tensor rank is " + std::to_string(rank()));
  }

  std::vector<std::size_t> shape_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<double>;
using Tensor32 = BasicTensor<float>;

}  // namespace ksgrank::num
