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

#ifndef DPDM_PARAMS_H_
#define DPDM_PARAMS_H_

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpdm/tensor.h"

namespace dpdm {

/// Named map from parameter path to tensor. Iteration order is lexicographic
/// by path; the concatenation of all entries in that order defines the
/// flattened parameter (or gradient) vector used by clipping and norms.
template <typename S>
class ParameterSetT {
 public:
  using Map = std::map<std::string, TensorT<S>>;
  using const_iterator = typename Map::const_iterator;
  using iterator = typename Map::iterator;

  ParameterSetT() = default;

  void insert(std::string name, TensorT<S> tensor) {
    auto [it, ok] = items_.emplace(std::move(name), std::move(tensor));
    if (!ok) {
      throw std::invalid_argument("parameter set: duplicate name '" +
                                  it->first + "'");
    }
  }

  bool contains(const std::string& name) const { return items_.count(name); }

  const TensorT<S>& at(const std::string& name) const {
    auto it = items_.find(name);
    if (it == items_.end()) {
      throw std::out_of_range("parameter set: unknown name '" + name + "'");
    }
    return it->second;
  }

  TensorT<S>& at(const std::string& name) {
    return const_cast<TensorT<S>&>(
        static_cast<const ParameterSetT*>(this)->at(name));
  }

  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }

  const_iterator begin() const { return items_.begin(); }
  const_iterator end() const { return items_.end(); }
  iterator begin() { return items_.begin(); }
  iterator end() { return items_.end(); }

  std::int64_t total_elements() const {
    std::int64_t n = 0;
    for (const auto& [name, t] : items_) n += t.numel();
    return n;
  }

  bool structure_matches(const ParameterSetT& other) const {
    if (items_.size() != other.items_.size()) return false;
    auto a = items_.begin();
    auto b = other.items_.begin();
    for (; a != items_.end(); ++a, ++b) {
      if (a->first != b->first || !a->second.same_shape(b->second))
        return false;
    }
    return true;
  }

  void check_structure_matches(const ParameterSetT& other,
                               const std::string& op) const {
    if (!structure_matches(other)) {
      throw std::invalid_argument(op + ": parameter structure mismatch");
    }
  }

  static ParameterSetT zeros_like(const ParameterSetT& other) {
    ParameterSetT out;
    for (const auto& [name, t] : other.items_) {
      out.items_.emplace(name, TensorT<S>(t.shape()));
    }
    return out;
  }

  /// Global L2 norm of the flattened vector, accumulated in double.
  double l2_norm() const {
    double sum = 0.0;
    for (const auto& [name, t] : items_) {
      for (S x : t.data()) sum += static_cast<double>(x) * x;
    }
    return std::sqrt(sum);
  }

  /// this += alpha * other (elementwise, matching structure).
  void add_scaled(const ParameterSetT& other, double alpha) {
    check_structure_matches(other, "add_scaled");
    auto a = items_.begin();
    auto b = other.items_.begin();
    for (; a != items_.end(); ++a, ++b) {
      auto dst = a->second.data();
      auto src = b->second.data();
      for (std::size_t i = 0; i < dst.size(); ++i) {
        dst[i] = static_cast<S>(dst[i] + alpha * src[i]);
      }
    }
  }

  void scale(double alpha) {
    for (auto& [name, t] : items_) {
      for (S& x : t.data()) x = static_cast<S>(x * alpha);
    }
  }

  std::vector<S> flatten() const {
    std::vector<S> out;
    out.reserve(static_cast<std::size_t>(total_elements()));
    for (const auto& [name, t] : items_) {
      out.insert(out.end(), t.data().begin(), t.data().end());
    }
    return out;
  }

  template <typename T>
  ParameterSetT<T> cast() const {
    ParameterSetT<T> out;
    for (const auto& [name, t] : items_) {
      out.insert(name, t.template cast<T>());
    }
    return out;
  }

 private:
  Map items_;
};

using ParameterSet = ParameterSetT<float>;

}  // namespace dpdm

#endif  // DPDM_PARAMS_H_
