// Copyright 2026 The dpdm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DPDM_TENSOR_H_
#define DPDM_TENSOR_H_

#include <cassert>
#include <cstdint>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dpdm {

/// Dense row-major tensor. The shape is immutable after construction; element
/// values are mutable. A rank-0 tensor holds a single scalar.
template <typename S>
class TensorT {
 public:
  TensorT() : shape_(), data_(1, S(0)) {}  // default: rank-0 zero scalar

  explicit TensorT(std::vector<int> shape)
      : shape_(std::move(shape)), data_(checked_numel(shape_), S(0)) {}

  TensorT(std::vector<int> shape, std::vector<S> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (static_cast<std::int64_t>(data_.size()) != checked_numel(shape_)) {
      std::ostringstream os;
      os << "tensor: data length " << data_.size() << " does not match shape "
         << shape_string(shape_);
      throw std::invalid_argument(os.str());
    }
  }

  static TensorT full(std::vector<int> shape, S value) {
    TensorT t(std::move(shape));
    for (S& x : t.data_) x = value;
    return t;
  }

  static TensorT scalar(S value) { return TensorT({}, {value}); }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }

  std::span<S> data() { return data_; }
  std::span<const S> data() const { return data_; }

  S& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  const S& operator[](std::int64_t i) const {
    return data_[static_cast<std::size_t>(i)];
  }

  S& at(int i) { return data_[static_cast<std::size_t>(i)]; }
  const S& at(int i) const { return data_[static_cast<std::size_t>(i)]; }

  S& at(int i, int j) {
    assert(rank() == 2);
    return data_[static_cast<std::size_t>(i) * shape_[1] + j];
  }
  const S& at(int i, int j) const {
    return const_cast<TensorT*>(this)->at(i, j);
  }

  S& at(int i, int j, int k) {
    assert(rank() == 3);
    return data_[(static_cast<std::size_t>(i) * shape_[1] + j) * shape_[2] + k];
  }
  const S& at(int i, int j, int k) const {
    return const_cast<TensorT*>(this)->at(i, j, k);
  }

  S& at(int i, int j, int k, int l) {
    assert(rank() == 4);
    return data_[((static_cast<std::size_t>(i) * shape_[1] + j) * shape_[2] +
                  k) *
                     shape_[3] +
                 l];
  }
  const S& at(int i, int j, int k, int l) const {
    return const_cast<TensorT*>(this)->at(i, j, k, l);
  }

  void fill(S value) {
    for (S& x : data_) x = value;
  }

  bool same_shape(const TensorT& other) const { return shape_ == other.shape_; }

  std::string shape_str() const { return shape_string(shape_); }

  template <typename T>
  TensorT<T> cast() const {
    std::vector<T> out(data_.size());
    for (std::size_t i = 0; i < data_.size(); ++i)
      out[i] = static_cast<T>(data_[i]);
    return TensorT<T>(shape_, std::move(out));
  }

  static std::string shape_string(const std::vector<int>& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
      if (i) os << ',';
      os << shape[i];
    }
    os << ']';
    return os.str();
  }

 private:
  static std::int64_t checked_numel(const std::vector<int>& shape) {
    std::int64_t n = 1;
    for (int d : shape) {
      if (d < 0) {
        throw std::invalid_argument("tensor: negative dimension in shape " +
                                    shape_string(shape));
      }
      n *= d;
    }
    return n;
  }

  std::vector<int> shape_;
  std::vector<S> data_;
};

using Tensor = TensorT<float>;

}  // namespace dpdm

#endif  // DPDM_TENSOR_H_
