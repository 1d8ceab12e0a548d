// Minimal dense tensor used throughout the harness.
//
// Row-major, owning, shape up to rank 4. Heavy linear algebra is done by
// mapping the flat storage into Eigen matrices at the call site.
#pragma once

#include <Eigen/Core>
#include <cassert>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace mcat {

template <typename S>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::int64_t> shape) : shape_(std::move(shape)) {
    data_.assign(std::size_t(count(shape_)), S(0));
  }
  Tensor(std::initializer_list<std::int64_t> shape)
      : Tensor(std::vector<std::int64_t>(shape)) {}

  static std::int64_t count(const std::vector<std::int64_t>& shape) {
    std::int64_t n = 1;
    for (auto d : shape) {
      if (d < 0) throw std::invalid_argument("negative tensor dimension");
      n *= d;
    }
    return n;
  }

  const std::vector<std::int64_t>& shape() const { return shape_; }
  std::int64_t dim(std::size_t i) const { return shape_.at(i); }
  std::int64_t size() const { return std::int64_t(data_.size()); }
  bool empty() const { return data_.empty(); }

  S* data() { return data_.data(); }
  const S* data() const { return data_.data(); }

  S& operator[](std::int64_t i) { return data_[std::size_t(i)]; }
  const S& operator[](std::int64_t i) const { return data_[std::size_t(i)]; }

  // NCHW accessors for the common 4-d case.
  S& at(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) {
    return data_[std::size_t(((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
  }
  const S& at(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) const {
    return data_[std::size_t(((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
  }

  void fill(S v) { std::fill(data_.begin(), data_.end(), v); }

  void reshape(std::vector<std::int64_t> shape) {
    if (count(shape) != size()) throw std::invalid_argument("reshape changes element count");
    shape_ = std::move(shape);
  }

  Tensor<S> like_zeros() const { return Tensor<S>(shape_); }

  using Map = Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using ConstMap =
      Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

  Map mat(std::int64_t rows, std::int64_t cols) {
    assert(rows * cols == size());
    return Map(data(), rows, cols);
  }
  ConstMap mat(std::int64_t rows, std::int64_t cols) const {
    assert(rows * cols == size());
    return ConstMap(data(), rows, cols);
  }

 private:
  std::vector<std::int64_t> shape_;
  std::vector<S> data_;
};

template <typename S>
bool same_shape(const Tensor<S>& a, const Tensor<S>& b) {
  return a.shape() == b.shape();
}

}  // namespace mcat
