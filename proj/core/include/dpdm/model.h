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

#ifndef DPDM_MODEL_H_
#define DPDM_MODEL_H_

#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpdm/graph.h"
#include "dpdm/parallel.h"
#include "dpdm/params.h"

namespace dpdm {

/// Binds a parameter set to a graph. Parameters become tracked leaves on
/// first use; after backward(), collect_gradients() returns a gradient set
/// with the same named structure, with exact zeros for parameters the
/// recorded computation never touched.
template <typename S>
class ModelContextT {
 public:
  ModelContextT(GraphT<S>& graph, const ParameterSetT<S>& params)
      : graph_(graph), params_(params) {}

  GraphT<S>& graph() { return graph_; }
  const ParameterSetT<S>& params() const { return params_; }

  int param(const std::string& name) {
    auto it = bound_.find(name);
    if (it != bound_.end()) return it->second;
    const int id = graph_.leaf(params_.at(name), /*track_grad=*/true);
    bound_.emplace(name, id);
    return id;
  }

  ParameterSetT<S> collect_gradients() const {
    ParameterSetT<S> grads;
    for (const auto& [name, tensor] : params_) {
      auto it = bound_.find(name);
      if (it == bound_.end()) {
        grads.insert(name, TensorT<S>(tensor.shape()));
      } else {
        grads.insert(name, graph_.grad(it->second));
      }
    }
    return grads;
  }

 private:
  GraphT<S>& graph_;
  const ParameterSetT<S>& params_;
  std::map<std::string, int> bound_;
};

using ModelContext = ModelContextT<float>;

/// Builds the scalar loss node for one example of a batch. The callable owns
/// the model and the batch; the index selects the example.
template <typename S>
using ExampleLossFn = std::function<int(ModelContextT<S>&, int example)>;

/// Per-example gradients: element i equals backward() of the loss restricted
/// to example i, so the mean over i equals the gradient of the mean loss.
/// Examples may be processed concurrently; the returned order is by index.
template <typename S>
std::vector<ParameterSetT<S>> per_example_gradients(
    const ParameterSetT<S>& params, int batch_size,
    const ExampleLossFn<S>& loss_fn) {
  if (batch_size < 1) {
    throw std::invalid_argument("per_example_gradients: empty batch");
  }
  std::vector<ParameterSetT<S>> grads(static_cast<std::size_t>(batch_size));
  parallel_for(batch_size, [&](int i) {
    GraphT<S> graph;
    ModelContextT<S> ctx(graph, params);
    const int loss = loss_fn(ctx, i);
    graph.backward(loss);
    grads[static_cast<std::size_t>(i)] = ctx.collect_gradients();
  });
  return grads;
}

using ExampleLoss = ExampleLossFn<float>;

}  // namespace dpdm

#endif  // DPDM_MODEL_H_
