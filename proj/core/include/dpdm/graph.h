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

#ifndef DPDM_GRAPH_H_
#define DPDM_GRAPH_H_

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dpdm/tensor.h"

namespace dpdm {

enum class Reduction { kSum, kMean };

/// Reverse-mode tape. Operations append nodes in execution order, so the
/// reverse of creation order is a reverse topological order of the recorded
/// graph; backward() sweeps it once, calling each node's backprop closure.
///
/// Node ids are indices into the tape and stay valid for the graph lifetime.
template <typename S>
class GraphT {
 public:
  GraphT() = default;
  GraphT(const GraphT&) = delete;
  GraphT& operator=(const GraphT&) = delete;

  int leaf(TensorT<S> value, bool track_grad) {
    return push(std::move(value), track_grad, nullptr);
  }

  int constant(TensorT<S> value) { return leaf(std::move(value), false); }

  const TensorT<S>& value(int id) const { return nodes_[id].value; }

  /// Gradient of the last backward() root w.r.t. node `id`. Zero tensor if the
  /// node did not influence the root.
  TensorT<S> grad(int id) const {
    const Node& n = nodes_[id];
    if (n.grad_live) return n.grad;
    return TensorT<S>(n.value.shape());
  }

  bool has_grad(int id) const { return nodes_[id].grad_live; }

  std::size_t size() const { return nodes_.size(); }

  /// Runs the reverse sweep from a scalar root. Each node is visited exactly
  /// once, in reverse creation order; nodes that do not contribute to the root
  /// keep an empty gradient.
  void backward(int root) {
    const Node& r = nodes_[root];
    if (r.value.numel() != 1) {
      throw std::invalid_argument(
          "backward: root must be a scalar, got shape " + r.value.shape_str());
    }
    grad_of(root).fill(S(0));
    grad_of(root)[0] = S(1);
    for (int id = root; id >= 0; --id) {
      Node& n = nodes_[id];
      if (!n.grad_live || !n.backprop) continue;
      cursor_ = id;
      n.backprop(*this);
    }
    cursor_ = -1;
  }

  // ---- elementwise and structural ops --------------------------------------

  int add(int a, int b) {
    check_same_shape("add", a, b);
    TensorT<S> out = nodes_[a].value;
    auto bd = nodes_[b].value.data();
    auto od = out.data();
    for (std::size_t i = 0; i < od.size(); ++i) od[i] += bd[i];
    return push(std::move(out), tracked(a) || tracked(b), [a, b](GraphT& g) {
      const int id = g.cursor_;
      const auto gd = g.nodes_[id].grad.data();
      if (g.tracked(a)) {
        auto ga = g.grad_of(a).data();
        for (std::size_t i = 0; i < gd.size(); ++i) ga[i] += gd[i];
      }
      if (g.tracked(b)) {
        auto gb = g.grad_of(b).data();
        for (std::size_t i = 0; i < gd.size(); ++i) gb[i] += gd[i];
      }
    });
  }

  int sub(int a, int b) {
    check_same_shape("sub", a, b);
    TensorT<S> out = nodes_[a].value;
    auto bd = nodes_[b].value.data();
    auto od = out.data();
    for (std::size_t i = 0; i < od.size(); ++i) od[i] -= bd[i];
    return push(std::move(out), tracked(a) || tracked(b), [a, b](GraphT& g) {
      const int id = g.cursor_;
      const auto gd = g.nodes_[id].grad.data();
      if (g.tracked(a)) {
        auto ga = g.grad_of(a).data();
        for (std::size_t i = 0; i < gd.size(); ++i) ga[i] += gd[i];
      }
      if (g.tracked(b)) {
        auto gb = g.grad_of(b).data();
        for (std::size_t i = 0; i < gd.size(); ++i) gb[i] -= gd[i];
      }
    });
  }

  int mul_scalar(int x, S c) {
    TensorT<S> out = nodes_[x].value;
    for (S& v : out.data()) v *= c;
    return push(std::move(out), tracked(x), [x, c](GraphT& g) {
      const int id = g.cursor_;
      const auto gd = g.nodes_[id].grad.data();
      if (g.tracked(x)) {
        auto gx = g.grad_of(x).data();
        for (std::size_t i = 0; i < gd.size(); ++i) gx[i] += c * gd[i];
      }
    });
  }

  int sum(int x) {
    S total = 0;
    for (S v : nodes_[x].value.data()) total += v;
    return push(TensorT<S>::scalar(total), tracked(x), [x](GraphT& g) {
      const int id = g.cursor_;
      const S gd = g.nodes_[id].grad[0];
      if (g.tracked(x)) {
        auto gx = g.grad_of(x).data();
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gd;
      }
    });
  }

  /// x[C,H,W] + v[C], broadcast over the spatial dimensions.
  int add_channel(int x, int v) {
    const TensorT<S>& xv = nodes_[x].value;
    const TensorT<S>& vv = nodes_[v].value;
    if (xv.rank() != 3 || vv.rank() != 1 || vv.dim(0) != xv.dim(0)) {
      throw std::invalid_argument("add_channel: shape mismatch " +
                                  xv.shape_str() + " vs " + vv.shape_str());
    }
    const int chans = xv.dim(0);
    const std::int64_t plane = xv.numel() / chans;
    TensorT<S> out = xv;
    auto od = out.data();
    for (int c = 0; c < chans; ++c) {
      const S b = vv[c];
      for (std::int64_t i = 0; i < plane; ++i) od[c * plane + i] += b;
    }
    return push(std::move(out), tracked(x) || tracked(v),
                [x, v, chans, plane](GraphT& g) {
                  const int id = g.cursor_;
                  const auto gd = g.nodes_[id].grad.data();
                  if (g.tracked(x)) {
                    auto gx = g.grad_of(x).data();
                    for (std::size_t i = 0; i < gd.size(); ++i) gx[i] += gd[i];
                  }
                  if (g.tracked(v)) {
                    auto gv = g.grad_of(v).data();
                    for (int c = 0; c < chans; ++c) {
                      S acc = 0;
                      for (std::int64_t i = 0; i < plane; ++i)
                        acc += gd[c * plane + i];
                      gv[c] += acc;
                    }
                  }
                });
  }

  /// Row lookup into a [rows, dim] table; backward scatters into that row.
  int select_row(int table, int row) {
    const TensorT<S>& tv = nodes_[table].value;
    if (tv.rank() != 2) {
      throw std::invalid_argument("select_row: table must be rank 2, got " +
                                  tv.shape_str());
    }
    if (row < 0 || row >= tv.dim(0)) {
      throw std::invalid_argument("select_row: row " + std::to_string(row) +
                                  " out of range for table " + tv.shape_str());
    }
    const int dim = tv.dim(1);
    TensorT<S> out({dim});
    for (int i = 0; i < dim; ++i) out[i] = tv.at(row, i);
    return push(std::move(out), tracked(table), [table, row, dim](GraphT& g) {
      const int id = g.cursor_;
      const auto gd = g.nodes_[id].grad.data();
      if (g.tracked(table)) {
        TensorT<S>& gt = g.grad_of(table);
        for (int i = 0; i < dim; ++i) gt.at(row, i) += gd[i];
      }
    });
  }

  // ---- layers ---------------------------------------------------------------

  /// Affine layer: y = W x + b with x:[in], W:[out,in], b:[out].
  int dense(int x, int w, int b) {
    const TensorT<S>& xv = nodes_[x].value;
    const TensorT<S>& wv = nodes_[w].value;
    const TensorT<S>& bv = nodes_[b].value;
    if (xv.rank() != 1 || wv.rank() != 2 || wv.dim(1) != xv.dim(0)) {
      throw std::invalid_argument("dense: shape mismatch, weight " +
                                  wv.shape_str() + " vs input " +
                                  xv.shape_str());
    }
    if (bv.rank() != 1 || bv.dim(0) != wv.dim(0)) {
      throw std::invalid_argument("dense: shape mismatch, weight " +
                                  wv.shape_str() + " vs bias " +
                                  bv.shape_str());
    }
    const int out_dim = wv.dim(0), in_dim = wv.dim(1);
    TensorT<S> out({out_dim});
    for (int o = 0; o < out_dim; ++o) {
      S acc = bv[o];
      for (int i = 0; i < in_dim; ++i) acc += wv.at(o, i) * xv[i];
      out[o] = acc;
    }
    return push(std::move(out), tracked(x) || tracked(w) || tracked(b),
                [x, w, b, out_dim, in_dim](GraphT& g) {
                  const int id = g.cursor_;
                  const auto gd = g.nodes_[id].grad.data();
                  const auto xv = g.nodes_[x].value.data();
                  const auto wv = g.nodes_[w].value.data();
                  if (g.tracked(x)) {
                    auto gx = g.grad_of(x).data();
                    for (int o = 0; o < out_dim; ++o) {
                      const S go = gd[o];
                      for (int i = 0; i < in_dim; ++i)
                        gx[i] += go * wv[o * in_dim + i];
                    }
                  }
                  if (g.tracked(w)) {
                    auto gw = g.grad_of(w).data();
                    for (int o = 0; o < out_dim; ++o) {
                      const S go = gd[o];
                      for (int i = 0; i < in_dim; ++i)
                        gw[o * in_dim + i] += go * xv[i];
                    }
                  }
                  if (g.tracked(b)) {
                    auto gb = g.grad_of(b).data();
                    for (int o = 0; o < out_dim; ++o) gb[o] += gd[o];
                  }
                });
  }

  /// 2-D convolution, stride 1, zero padding that preserves the spatial size.
  /// x:[Cin,H,W], w:[Cout,Cin,kh,kw] with odd kh,kw, b:[Cout] -> [Cout,H,W].
  int conv2d(int x, int w, int b) {
    const TensorT<S>& xv = nodes_[x].value;
    const TensorT<S>& wv = nodes_[w].value;
    const TensorT<S>& bv = nodes_[b].value;
    if (xv.rank() != 3 || wv.rank() != 4 || wv.dim(1) != xv.dim(0)) {
      throw std::invalid_argument("conv2d: shape mismatch, weight " +
                                  wv.shape_str() + " vs input " +
                                  xv.shape_str());
    }
    const int cin = xv.dim(0), h = xv.dim(1), wd = xv.dim(2);
    const int cout = wv.dim(0), kh = wv.dim(2), kw = wv.dim(3);
    if (kh % 2 == 0 || kw % 2 == 0) {
      throw std::invalid_argument("conv2d: kernel dims must be odd, got " +
                                  wv.shape_str());
    }
    if (bv.rank() != 1 || bv.dim(0) != cout) {
      throw std::invalid_argument("conv2d: shape mismatch, weight " +
                                  wv.shape_str() + " vs bias " +
                                  bv.shape_str());
    }
    TensorT<S> padded = pad_input(xv, kh, kw);
    TensorT<S> out({cout, h, wd});
    conv_forward(padded, wv, bv, out);
    // The padded input is shared with the backward closure by value; it is
    // cheaper to re-pad there than to keep it alive, so recompute instead.
    return push(std::move(out), tracked(x) || tracked(w) || tracked(b),
                [x, w, b, cin, h, wd, cout, kh, kw](GraphT& g) {
                  g.conv_backward(x, w, b, cin, h, wd, cout, kh, kw);
                });
  }

  int relu(int x) {
    TensorT<S> out = nodes_[x].value;
    for (S& v : out.data()) v = v > S(0) ? v : S(0);
    return push(std::move(out), tracked(x), [x](GraphT& g) {
      const int id = g.cursor_;
      const auto gd = g.nodes_[id].grad.data();
      const auto xv = g.nodes_[x].value.data();
      if (g.tracked(x)) {
        auto gx = g.grad_of(x).data();
        for (std::size_t i = 0; i < gd.size(); ++i) {
          if (xv[i] > S(0)) gx[i] += gd[i];
        }
      }
    });
  }

  int silu(int x) {
    TensorT<S> out = nodes_[x].value;
    for (S& v : out.data()) v = v * sigmoid(v);
    return push(std::move(out), tracked(x), [x](GraphT& g) {
      const int id = g.cursor_;
      const auto gd = g.nodes_[id].grad.data();
      const auto xv = g.nodes_[x].value.data();
      if (g.tracked(x)) {
        auto gx = g.grad_of(x).data();
        for (std::size_t i = 0; i < gd.size(); ++i) {
          const S s = sigmoid(xv[i]);
          gx[i] += gd[i] * s * (S(1) + xv[i] * (S(1) - s));
        }
      }
    });
  }

  /// Sinusoidal embedding of a scalar node: [sin(t*f_0..), cos(t*f_0..)] with
  /// geometrically spaced frequencies (base 10000). `dim` must be even.
  int timestep_embedding(int t, int dim) {
    const TensorT<S>& tv = nodes_[t].value;
    if (tv.numel() != 1) {
      throw std::invalid_argument(
          "timestep_embedding: input must be a scalar, got shape " +
          tv.shape_str());
    }
    if (dim < 2 || dim % 2 != 0) {
      throw std::invalid_argument("timestep_embedding: dim must be even, >= 2");
    }
    const int half = dim / 2;
    const double tval = static_cast<double>(tv[0]);
    TensorT<S> out({dim});
    for (int i = 0; i < half; ++i) {
      const double f = frequency(i, half);
      out[i] = static_cast<S>(std::sin(tval * f));
      out[half + i] = static_cast<S>(std::cos(tval * f));
    }
    return push(std::move(out), tracked(t), [t, half](GraphT& g) {
      const int id = g.cursor_;
      const auto gd = g.nodes_[id].grad.data();
      const double tval = static_cast<double>(g.nodes_[t].value[0]);
      if (g.tracked(t)) {
        double acc = 0.0;
        for (int i = 0; i < half; ++i) {
          const double f = frequency(i, half);
          acc += static_cast<double>(gd[i]) * f * std::cos(tval * f);
          acc -= static_cast<double>(gd[half + i]) * f * std::sin(tval * f);
        }
        g.grad_of(t)[0] += static_cast<S>(acc);
      }
    });
  }

  /// Global spatial mean pool: [C,H,W] -> [C].
  int mean_pool(int x) {
    const TensorT<S>& xv = nodes_[x].value;
    if (xv.rank() != 3) {
      throw std::invalid_argument("mean_pool: input must be rank 3, got " +
                                  xv.shape_str());
    }
    const int chans = xv.dim(0);
    const std::int64_t plane = static_cast<std::int64_t>(xv.dim(1)) * xv.dim(2);
    TensorT<S> out({chans});
    const auto xd = xv.data();
    for (int c = 0; c < chans; ++c) {
      S acc = 0;
      for (std::int64_t i = 0; i < plane; ++i) acc += xd[c * plane + i];
      out[c] = acc / static_cast<S>(plane);
    }
    return push(std::move(out), tracked(x), [x, chans, plane](GraphT& g) {
      const int id = g.cursor_;
      const auto gd = g.nodes_[id].grad.data();
      if (g.tracked(x)) {
        auto gx = g.grad_of(x).data();
        const S inv = S(1) / static_cast<S>(plane);
        for (int c = 0; c < chans; ++c) {
          const S gc = gd[c] * inv;
          for (std::int64_t i = 0; i < plane; ++i) gx[c * plane + i] += gc;
        }
      }
    });
  }

  /// Cross-entropy of softmax(logits) against an integer label -> scalar.
  int softmax_cross_entropy(int logits, int label) {
    const TensorT<S>& lv = nodes_[logits].value;
    if (lv.rank() != 1) {
      throw std::invalid_argument(
          "softmax_cross_entropy: logits must be rank 1, got " +
          lv.shape_str());
    }
    const int k = lv.dim(0);
    if (label < 0 || label >= k) {
      throw std::invalid_argument("softmax_cross_entropy: label " +
                                  std::to_string(label) +
                                  " out of range for logits " + lv.shape_str());
    }
    double maxv = -1e300;
    for (S v : lv.data()) maxv = std::max(maxv, static_cast<double>(v));
    double lse = 0.0;
    for (S v : lv.data()) lse += std::exp(static_cast<double>(v) - maxv);
    lse = maxv + std::log(lse);
    const S loss = static_cast<S>(lse - static_cast<double>(lv[label]));
    return push(TensorT<S>::scalar(loss), tracked(logits),
                [logits, label, k, lse](GraphT& g) {
                  const int id = g.cursor_;
                  const S gd = g.nodes_[id].grad[0];
                  const auto lv = g.nodes_[logits].value.data();
                  if (g.tracked(logits)) {
                    auto gl = g.grad_of(logits).data();
                    for (int j = 0; j < k; ++j) {
                      const double p =
                          std::exp(static_cast<double>(lv[j]) - lse);
                      const double ind = (j == label) ? 1.0 : 0.0;
                      gl[j] += gd * static_cast<S>(p - ind);
                    }
                  }
                });
  }

  /// Sum (or mean) of squared differences -> scalar.
  int squared_error(int a, int b, Reduction reduction) {
    check_same_shape("squared_error", a, b);
    const auto ad = nodes_[a].value.data();
    const auto bd = nodes_[b].value.data();
    double acc = 0.0;
    for (std::size_t i = 0; i < ad.size(); ++i) {
      const double d = static_cast<double>(ad[i]) - static_cast<double>(bd[i]);
      acc += d * d;
    }
    const std::int64_t n = nodes_[a].value.numel();
    if (reduction == Reduction::kMean) acc /= static_cast<double>(n);
    return push(
        TensorT<S>::scalar(static_cast<S>(acc)), tracked(a) || tracked(b),
        [a, b, n, reduction](GraphT& g) {
          const int id = g.cursor_;
          const S gd = g.nodes_[id].grad[0];
          const auto ad = g.nodes_[a].value.data();
          const auto bd = g.nodes_[b].value.data();
          const S scale = reduction == Reduction::kMean
                              ? S(2) / static_cast<S>(n)
                              : S(2);
          if (g.tracked(a)) {
            auto ga = g.grad_of(a).data();
            for (std::size_t i = 0; i < ad.size(); ++i)
              ga[i] += gd * scale * (ad[i] - bd[i]);
          }
          if (g.tracked(b)) {
            auto gb = g.grad_of(b).data();
            for (std::size_t i = 0; i < ad.size(); ++i)
              gb[i] -= gd * scale * (ad[i] - bd[i]);
          }
        });
  }

 private:
  struct Node {
    TensorT<S> value;
    TensorT<S> grad;  // shape only valid when grad_live
    bool track = false;
    bool grad_live = false;
    std::function<void(GraphT&)> backprop;
  };

  static S sigmoid(S v) { return S(1) / (S(1) + std::exp(-v)); }

  static double frequency(int i, int half) {
    if (half == 1) return 1.0;
    return std::exp(-std::log(10000.0) * static_cast<double>(i) /
                    static_cast<double>(half - 1));
  }

  bool tracked(int id) const { return nodes_[id].track; }

  TensorT<S>& grad_of(int id) {
    Node& n = nodes_[id];
    if (!n.grad_live) {
      n.grad = TensorT<S>(n.value.shape());
      n.grad_live = true;
    }
    return n.grad;
  }

  int push(TensorT<S> value, bool track, std::function<void(GraphT&)> back) {
    Node n;
    n.value = std::move(value);
    n.track = track;
    n.backprop = track ? std::move(back) : nullptr;
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  void check_same_shape(const char* op, int a, int b) const {
    if (!nodes_[a].value.same_shape(nodes_[b].value)) {
      throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                  nodes_[a].value.shape_str() + " vs " +
                                  nodes_[b].value.shape_str());
    }
  }

  static TensorT<S> pad_input(const TensorT<S>& x, int kh, int kw) {
    const int cin = x.dim(0), h = x.dim(1), w = x.dim(2);
    const int ph = (kh - 1) / 2, pw = (kw - 1) / 2;
    TensorT<S> padded({cin, h + kh - 1, w + kw - 1});
    for (int c = 0; c < cin; ++c) {
      for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
          padded.at(c, i + ph, j + pw) = x.at(c, i, j);
        }
      }
    }
    return padded;
  }

  static void conv_forward(const TensorT<S>& padded, const TensorT<S>& w,
                           const TensorT<S>& b, TensorT<S>& out) {
    const int cout = out.dim(0), h = out.dim(1), wd = out.dim(2);
    const int cin = padded.dim(0), kh = w.dim(2), kw = w.dim(3);
    for (int co = 0; co < cout; ++co) {
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < wd; ++j) out.at(co, i, j) = b[co];
      for (int ci = 0; ci < cin; ++ci) {
        for (int ky = 0; ky < kh; ++ky) {
          for (int kx = 0; kx < kw; ++kx) {
            const S wv = w.at(co, ci, ky, kx);
            if (wv == S(0)) continue;
            for (int i = 0; i < h; ++i) {
              const S* prow = &padded.at(ci, i + ky, kx);
              S* orow = &out.at(co, i, 0);
              for (int j = 0; j < wd; ++j) orow[j] += wv * prow[j];
            }
          }
        }
      }
    }
  }

  void conv_backward(int x, int w, int b, int cin, int h, int wd, int cout,
                     int kh, int kw) {
    const int id = cursor_;
    const TensorT<S>& gout = nodes_[id].grad;  // [Cout,H,W]
    const TensorT<S>& xv = nodes_[x].value;
    const TensorT<S>& wv = nodes_[w].value;
    TensorT<S> padded = pad_input(xv, kh, kw);

    if (tracked(b)) {
      TensorT<S>& gb = grad_of(b);
      for (int co = 0; co < cout; ++co) {
        S acc = 0;
        for (int i = 0; i < h; ++i)
          for (int j = 0; j < wd; ++j) acc += gout.at(co, i, j);
        gb[co] += acc;
      }
    }
    if (tracked(w)) {
      TensorT<S>& gw = grad_of(w);
      for (int co = 0; co < cout; ++co) {
        for (int ci = 0; ci < cin; ++ci) {
          for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx) {
              S acc = 0;
              for (int i = 0; i < h; ++i) {
                const S* prow = &padded.at(ci, i + ky, kx);
                const S* grow = &gout.at(co, i, 0);
                for (int j = 0; j < wd; ++j) acc += grow[j] * prow[j];
              }
              gw.at(co, ci, ky, kx) += acc;
            }
          }
        }
      }
    }
    if (tracked(x)) {
      // Accumulate into a padded gradient buffer, then crop.
      TensorT<S> gpad({cin, h + kh - 1, wd + kw - 1});
      for (int co = 0; co < cout; ++co) {
        for (int ci = 0; ci < cin; ++ci) {
          for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx) {
              const S wvv = wv.at(co, ci, ky, kx);
              if (wvv == S(0)) continue;
              for (int i = 0; i < h; ++i) {
                S* prow = &gpad.at(ci, i + ky, kx);
                const S* grow = &gout.at(co, i, 0);
                for (int j = 0; j < wd; ++j) prow[j] += wvv * grow[j];
              }
            }
          }
        }
      }
      TensorT<S>& gx = grad_of(x);
      const int ph = (kh - 1) / 2, pw = (kw - 1) / 2;
      for (int ci = 0; ci < cin; ++ci)
        for (int i = 0; i < h; ++i)
          for (int j = 0; j < wd; ++j)
            gx.at(ci, i, j) += gpad.at(ci, i + ph, j + pw);
    }
  }

  // During the reverse sweep, the id of the node currently being processed.
  // Backprop closures read their own grad through it.
  int cursor_ = -1;

  std::vector<Node> nodes_;
};

}  // namespace dpdm

#endif  // DPDM_GRAPH_H_
