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

#include "dpdm/eval.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "dpdm/dp_train.h"
#include "dpdm/graph.h"
#include "dpdm/model.h"
#include "dpdm/parallel.h"
#include "dpdm/rng.h"
#include "dpdm/sym_eig.h"

namespace dpdm {

namespace {

// n x n symmetric product helpers, row-major doubles.
std::vector<double> matmul(int n, const std::vector<double>& a,
                           const std::vector<double>& b) {
  std::vector<double> c(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < n; ++k) {
      const double aik = a[i * n + k];
      if (aik == 0.0) continue;
      for (int j = 0; j < n; ++j) c[i * n + j] += aik * b[k * n + j];
    }
  }
  return c;
}

// Symmetric PSD square root via eigendecomposition, negative eigenvalues
// clipped to zero.
std::vector<double> sym_sqrt(int n, const std::vector<double>& a) {
  const SymEig eig = sym_eig(n, a);
  std::vector<double> out(static_cast<std::size_t>(n) * n, 0.0);
  for (int k = 0; k < n; ++k) {
    const double lam = std::max(0.0, eig.values[static_cast<std::size_t>(k)]);
    const double s = std::sqrt(lam);
    if (s == 0.0) continue;
    for (int i = 0; i < n; ++i) {
      const double vik = eig.vectors[i * n + k];
      if (vik == 0.0) continue;
      for (int j = 0; j < n; ++j) {
        out[i * n + j] += s * vik * eig.vectors[j * n + k];
      }
    }
  }
  return out;
}

struct ClassifierGrad {
  ParameterSet grad;
  double loss = 0.0;
};

ClassifierGrad classifier_example_gradient(const ClassifierArch& arch,
                                           const ParameterSet& params,
                                           const Tensor& img, int label) {
  GraphT<float> g;
  ModelContextT<float> ctx(g, params);
  const int x = g.constant(img);
  const int logits = apply_classifier(ctx, arch, x);
  const int loss = g.softmax_cross_entropy(logits, label);
  g.backward(loss);
  return {ctx.collect_gradients(), static_cast<double>(g.value(loss)[0])};
}

}  // namespace

TrainedClassifier train_classifier(const LabeledImageSet& train,
                                   const ClassifierArch& arch,
                                   const ClassifierHyper& hyper) {
  arch.validate();
  if (train.size() < 1) {
    throw std::invalid_argument("classifier: empty training set");
  }
  if (train.num_classes != arch.num_classes) {
    throw std::invalid_argument(
        "classifier: dataset has " + std::to_string(train.num_classes) +
        " classes but the architecture expects " +
        std::to_string(arch.num_classes));
  }
  TrainedClassifier clf;
  clf.arch = arch;
  clf.params =
      init_classifier_params<float>(arch, Rng::stream(hyper.init_seed, "init"));
  AdamStateT<float> adam = AdamStateT<float>::zeros_like(clf.params);

  AugmentationPolicy policy;
  policy.hflip = hyper.hflip;
  policy.max_shift = hyper.max_shift;

  const Rng batch_stream = Rng::stream(hyper.batch_seed, "batch-sampling");
  const Rng aug_stream = Rng::stream(hyper.batch_seed, "augmentation");
  const int n = train.size();

  for (int step = 1; step <= hyper.steps; ++step) {
    Rng batch_rng = batch_stream.fork(static_cast<std::uint64_t>(step));
    std::vector<int> batch(static_cast<std::size_t>(hyper.batch_size));
    for (auto& ex : batch) ex = static_cast<int>(batch_rng.uniform_int(0, n - 1));

    std::vector<ClassifierGrad> slots(batch.size());
    parallel_for(static_cast<int>(batch.size()), [&](int i) {
      const int ex = batch[static_cast<std::size_t>(i)];
      Tensor img = train.example_chw(ex);
      if (policy.hflip || policy.max_shift > 0) {
        Rng aug_rng =
            aug_stream.fork(static_cast<std::uint64_t>(step),
                            static_cast<std::uint64_t>(i));
        img = augment(img, policy, aug_rng);
      }
      slots[static_cast<std::size_t>(i)] = classifier_example_gradient(
          arch, clf.params, img, train.labels[static_cast<std::size_t>(ex)]);
    });

    ParameterSet mean_grad = ParameterSet::zeros_like(clf.params);
    for (const auto& slot : slots) {
      mean_grad.add_scaled(slot.grad, 1.0 / static_cast<double>(batch.size()));
    }
    if (hyper.weight_decay > 0.0) {
      mean_grad.add_scaled(clf.params, hyper.weight_decay);
    }
    dp_adam_update(clf.params, adam, mean_grad, hyper.learning_rate,
                   hyper.beta1, hyper.beta2, hyper.adam_eps);
  }
  return clf;
}

std::vector<double> classifier_probs(const TrainedClassifier& clf,
                                     const Tensor& img_chw) {
  GraphT<float> g;
  ModelContextT<float> ctx(g, clf.params);
  const int logits = apply_classifier(ctx, clf.arch, g.constant(img_chw));
  const auto lv = g.value(logits).data();
  double maxv = -1e300;
  for (float v : lv) maxv = std::max(maxv, static_cast<double>(v));
  std::vector<double> probs(lv.size());
  double total = 0.0;
  for (std::size_t i = 0; i < lv.size(); ++i) {
    probs[i] = std::exp(static_cast<double>(lv[i]) - maxv);
    total += probs[i];
  }
  for (double& p : probs) p /= total;
  return probs;
}

int classifier_predict(const TrainedClassifier& clf, const Tensor& img_chw) {
  const auto probs = classifier_probs(clf, img_chw);
  return static_cast<int>(std::max_element(probs.begin(), probs.end()) -
                          probs.begin());
}

double classifier_accuracy(const TrainedClassifier& clf,
                           const LabeledImageSet& test) {
  if (test.size() == 0) return 0.0;
  std::vector<int> hits(static_cast<std::size_t>(test.size()), 0);
  parallel_for(test.size(), [&](int i) {
    hits[static_cast<std::size_t>(i)] =
        classifier_predict(clf, test.example_chw(i)) ==
        test.labels[static_cast<std::size_t>(i)];
  });
  const int correct = std::accumulate(hits.begin(), hits.end(), 0);
  return static_cast<double>(correct) / test.size();
}

std::vector<double> FeatureExtractor::embed(const Tensor& img_chw) const {
  GraphT<float> g;
  ModelContextT<float> ctx(g, clf.params);
  int penultimate = -1;
  apply_classifier(ctx, clf.arch, g.constant(img_chw), &penultimate);
  const auto fv = g.value(penultimate).data();
  return std::vector<double>(fv.begin(), fv.end());
}

std::vector<double> FeatureExtractor::embed_set(
    const LabeledImageSet& set) const {
  std::vector<double> out(static_cast<std::size_t>(set.size()) * feature_dim);
  parallel_for(set.size(), [&](int i) {
    const auto e = embed(set.example_chw(i));
    std::copy(e.begin(), e.end(),
              out.begin() + static_cast<std::size_t>(i) * feature_dim);
  });
  return out;
}

FeatureExtractor train_feature_extractor(const LabeledImageSet& pretrain_data,
                                         int feature_dim,
                                         const ClassifierHyper& hyper) {
  ClassifierArch arch;
  arch.channels = pretrain_data.channels();
  arch.height = pretrain_data.height();
  arch.width = pretrain_data.width();
  arch.hidden = feature_dim;
  arch.num_classes = pretrain_data.num_classes;
  FeatureExtractor fx;
  fx.clf = train_classifier(pretrain_data, arch, hyper);
  fx.feature_dim = feature_dim;
  return fx;
}

GaussianFit fit_gaussian(const std::vector<double>& embeddings, int dim) {
  if (dim < 1 || embeddings.size() % static_cast<std::size_t>(dim) != 0) {
    throw std::invalid_argument("fit_gaussian: bad embedding size");
  }
  const int n = static_cast<int>(embeddings.size() / static_cast<std::size_t>(dim));
  if (n < 1) {
    throw std::invalid_argument("fit_gaussian: empty embedding set");
  }
  GaussianFit fit;
  fit.dim = dim;
  fit.mean.assign(static_cast<std::size_t>(dim), 0.0);
  fit.cov.assign(static_cast<std::size_t>(dim) * dim, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < dim; ++j) fit.mean[j] += embeddings[i * dim + j];
  }
  for (double& m : fit.mean) m /= n;
  if (n == 1) return fit;  // zero covariance
  for (int i = 0; i < n; ++i) {
    for (int a = 0; a < dim; ++a) {
      const double da = embeddings[i * dim + a] - fit.mean[a];
      for (int b = a; b < dim; ++b) {
        const double db = embeddings[i * dim + b] - fit.mean[b];
        fit.cov[a * dim + b] += da * db;
      }
    }
  }
  for (int a = 0; a < dim; ++a) {
    for (int b = a; b < dim; ++b) {
      fit.cov[a * dim + b] /= (n - 1);
      fit.cov[b * dim + a] = fit.cov[a * dim + b];
    }
  }
  return fit;
}

double frechet_distance(const GaussianFit& a, const GaussianFit& b) {
  if (a.dim != b.dim) {
    throw std::invalid_argument("frechet: dimension mismatch " +
                                std::to_string(a.dim) + " vs " +
                                std::to_string(b.dim));
  }
  const int n = a.dim;
  double mean_gap = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = a.mean[i] - b.mean[i];
    mean_gap += d * d;
  }
  double trace_a = 0.0, trace_b = 0.0;
  for (int i = 0; i < n; ++i) {
    trace_a += a.cov[i * n + i];
    trace_b += b.cov[i * n + i];
  }
  const std::vector<double> sqrt_a = sym_sqrt(n, a.cov);
  const std::vector<double> inner = matmul(n, matmul(n, sqrt_a, b.cov), sqrt_a);
  const SymEig eig = sym_eig(n, inner);
  double trace_sqrt = 0.0;
  for (double lam : eig.values) trace_sqrt += std::sqrt(std::max(0.0, lam));
  return mean_gap + trace_a + trace_b - 2.0 * trace_sqrt;
}

FidResult fid_like_score(const LabeledImageSet& real,
                         const LabeledImageSet& synth,
                         const FeatureExtractor& extractor,
                         const FidOptions& options) {
  if (real.size() == 0 || synth.size() == 0) {
    throw std::invalid_argument("fid: both sets must be nonempty");
  }
  const int dim = extractor.feature_dim;
  FidResult result;

  auto fit_side = [&](const std::vector<double>& emb, int count) {
    GaussianFit fit = fit_gaussian(emb, dim);
    if (count < dim + 1) {
      for (int i = 0; i < dim; ++i) fit.cov[i * dim + i] += 1e-6;
      result.regularized = true;
    }
    return fit;
  };

  const auto emb_real = extractor.embed_set(real);
  const auto emb_synth = extractor.embed_set(synth);
  result.score = frechet_distance(fit_side(emb_real, real.size()),
                                  fit_side(emb_synth, synth.size()));

  if (options.per_class) {
    const int num_classes = std::max(real.num_classes, synth.num_classes);
    for (int cls = 0; cls < num_classes; ++cls) {
      std::vector<double> er, es;
      int nr = 0, ns = 0;
      for (int i = 0; i < real.size(); ++i) {
        if (real.labels[static_cast<std::size_t>(i)] != cls) continue;
        er.insert(er.end(), emb_real.begin() + static_cast<std::size_t>(i) * dim,
                  emb_real.begin() + static_cast<std::size_t>(i + 1) * dim);
        ++nr;
      }
      for (int i = 0; i < synth.size(); ++i) {
        if (synth.labels[static_cast<std::size_t>(i)] != cls) continue;
        es.insert(es.end(), emb_synth.begin() + static_cast<std::size_t>(i) * dim,
                  emb_synth.begin() + static_cast<std::size_t>(i + 1) * dim);
        ++ns;
      }
      if (nr == 0 || ns == 0) continue;
      result.per_class[cls] =
          frechet_distance(fit_side(er, nr), fit_side(es, ns));
    }
  }
  return result;
}

double train_downstream(const LabeledImageSet& synth,
                        const ClassifierArch& arch,
                        const ClassifierHyper& hyper,
                        const LabeledImageSet& real_test) {
  if (synth.num_classes != real_test.num_classes) {
    throw std::invalid_argument(
        "downstream: label spaces differ (" +
        std::to_string(synth.num_classes) + " vs " +
        std::to_string(real_test.num_classes) + " classes)");
  }
  const TrainedClassifier clf = train_classifier(synth, arch, hyper);
  return classifier_accuracy(clf, real_test);
}

double ensemble_accuracy(const LabeledImageSet& synth,
                         const ClassifierArch& arch,
                         const ClassifierHyper& hyper, int members,
                         const LabeledImageSet& real_test) {
  if (members < 1) {
    throw std::invalid_argument("ensemble: members must be >= 1");
  }
  std::vector<TrainedClassifier> ensemble;
  ensemble.reserve(static_cast<std::size_t>(members));
  for (int m = 0; m < members; ++m) {
    ClassifierHyper h = hyper;
    h.batch_seed = mix64(hyper.batch_seed, static_cast<std::uint64_t>(m));
    ensemble.push_back(train_classifier(synth, arch, h));
  }
  if (real_test.size() == 0) return 0.0;
  int correct = 0;
  for (int i = 0; i < real_test.size(); ++i) {
    const Tensor img = real_test.example_chw(i);
    std::vector<double> mean_probs(static_cast<std::size_t>(arch.num_classes),
                                   0.0);
    for (const auto& clf : ensemble) {
      const auto p = classifier_probs(clf, img);
      for (std::size_t k = 0; k < p.size(); ++k) mean_probs[k] += p[k];
    }
    const int pred = static_cast<int>(
        std::max_element(mean_probs.begin(), mean_probs.end()) -
        mean_probs.begin());
    if (pred == real_test.labels[static_cast<std::size_t>(i)]) ++correct;
  }
  return static_cast<double>(correct) / real_test.size();
}

DomainDiscriminatorResult domain_discriminator(
    const LabeledImageSet& pretrain_real, const LabeledImageSet& finetune_real,
    const LabeledImageSet& synth, const ClassifierHyper& hyper) {
  if (pretrain_real.size() == 0 || finetune_real.size() == 0) {
    throw std::invalid_argument("discriminator: empty real domain set");
  }
  const int h = pretrain_real.height(), w = pretrain_real.width(),
            c = pretrain_real.channels();

  // Interleave the two domains, holding out every fifth example.
  LabeledImageSet train_set, holdout_set;
  const int n_total = pretrain_real.size() + finetune_real.size();
  std::vector<std::pair<const LabeledImageSet*, int>> all;
  all.reserve(static_cast<std::size_t>(n_total));
  const int n_max = std::max(pretrain_real.size(), finetune_real.size());
  for (int i = 0; i < n_max; ++i) {
    if (i < pretrain_real.size()) all.emplace_back(&pretrain_real, i);
    if (i < finetune_real.size()) all.emplace_back(&finetune_real, i);
  }
  std::vector<std::size_t> train_idx, hold_idx;
  for (std::size_t i = 0; i < all.size(); ++i) {
    (i % 5 == 4 ? hold_idx : train_idx).push_back(i);
  }
  auto build = [&](const std::vector<std::size_t>& idx) {
    LabeledImageSet out;
    out.images = Tensor({static_cast<int>(idx.size()), h, w, c});
    out.labels.resize(idx.size());
    out.num_classes = 2;
    for (std::size_t j = 0; j < idx.size(); ++j) {
      const auto& [src, i] = all[idx[j]];
      out.set_example_chw(static_cast<int>(j), src->example_chw(i));
      out.labels[j] = (src == &finetune_real) ? 1 : 0;
    }
    return out;
  };
  train_set = build(train_idx);
  holdout_set = build(hold_idx);

  ClassifierArch arch;
  arch.channels = c;
  arch.height = h;
  arch.width = w;
  arch.num_classes = 2;
  const TrainedClassifier disc = train_classifier(train_set, arch, hyper);

  DomainDiscriminatorResult result;
  result.holdout_accuracy = classifier_accuracy(disc, holdout_set);
  result.reliable = result.holdout_accuracy >= 0.9;

  if (synth.size() == 0) return result;
  std::map<int, int> class_total, class_finetune;
  int finetune_count = 0;
  for (int i = 0; i < synth.size(); ++i) {
    const int pred = classifier_predict(disc, synth.example_chw(i));
    const int cls = synth.labels[static_cast<std::size_t>(i)];
    class_total[cls] += 1;
    if (pred == 1) {
      ++finetune_count;
      class_finetune[cls] += 1;
    }
  }
  result.fraction_finetune =
      static_cast<double>(finetune_count) / synth.size();
  for (const auto& [cls, total] : class_total) {
    result.per_class[cls] =
        static_cast<double>(class_finetune[cls]) / total;
  }
  return result;
}

std::optional<double> spearman_rho(std::span<const double> a,
                                   std::span<const double> b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("spearman: length mismatch");
  }
  const std::size_t n = a.size();
  if (n < 2) return std::nullopt;

  auto ranks = [](std::span<const double> xs) {
    const std::size_t n = xs.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return xs[i] < xs[j]; });
    std::vector<double> r(n);
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j + 1 < n && xs[order[j + 1]] == xs[order[i]]) ++j;
      const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
      i = j + 1;
    }
    return r;
  };

  const auto ra = ranks(a);
  const auto rb = ranks(b);
  double mean_a = 0.0, mean_b = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mean_a += ra[i];
    mean_b += rb[i];
  }
  mean_a /= static_cast<double>(n);
  mean_b /= static_cast<double>(n);
  double cov = 0.0, var_a = 0.0, var_b = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = ra[i] - mean_a;
    const double db = rb[i] - mean_b;
    cov += da * db;
    var_a += da * da;
    var_b += db * db;
  }
  if (var_a == 0.0 || var_b == 0.0) return std::nullopt;
  return cov / std::sqrt(var_a * var_b);
}

namespace {

bool best_real_in_top2_by_synth(const std::vector<ModelSelectionRecord>& recs) {
  if (recs.size() < 2) return true;
  std::vector<std::size_t> by_synth(recs.size());
  std::iota(by_synth.begin(), by_synth.end(), std::size_t{0});
  std::stable_sort(by_synth.begin(), by_synth.end(),
                   [&](std::size_t i, std::size_t j) {
                     return recs[i].acc_synthetic > recs[j].acc_synthetic;
                   });
  std::size_t best_real = 0;
  for (std::size_t i = 1; i < recs.size(); ++i) {
    if (recs[i].acc_real > recs[best_real].acc_real) best_real = i;
  }
  return by_synth[0] == best_real || by_synth[1] == best_real;
}

}  // namespace

ModelSelectionResult model_selection_study(
    const LabeledImageSet& synth_train, const LabeledImageSet& synth_test,
    const LabeledImageSet& real_train, const LabeledImageSet& real_test,
    const std::vector<SelectionGridPoint>& grid,
    const ClassifierHyper& base_hyper) {
  if (grid.size() < 6) {
    throw std::invalid_argument(
        "model selection: need at least 6 grid configurations");
  }
  {
    std::vector<std::string> archs;
    for (const auto& g : grid) archs.push_back(g.arch_id);
    std::sort(archs.begin(), archs.end());
    archs.erase(std::unique(archs.begin(), archs.end()), archs.end());
    if (archs.size() < 2) {
      throw std::invalid_argument(
          "model selection: need at least 2 distinct architectures");
    }
  }

  ModelSelectionResult result;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const SelectionGridPoint& point = grid[g];
    ClassifierHyper hyper = base_hyper;
    hyper.learning_rate = point.learning_rate;
    hyper.weight_decay = point.weight_decay;
    hyper.init_seed = mix64(base_hyper.init_seed, g);
    hyper.batch_seed = mix64(base_hyper.batch_seed, g);

    const TrainedClassifier on_synth =
        train_classifier(synth_train, point.arch, hyper);
    const TrainedClassifier on_real =
        train_classifier(real_train, point.arch, hyper);

    ModelSelectionRecord rec_a{point.arch_id, point.learning_rate,
                               point.weight_decay,
                               classifier_accuracy(on_synth, synth_test),
                               classifier_accuracy(on_synth, real_test)};
    ModelSelectionRecord rec_b{point.arch_id, point.learning_rate,
                               point.weight_decay, rec_a.acc_synthetic,
                               classifier_accuracy(on_real, real_test)};
    result.setting_a.push_back(rec_a);
    result.setting_b.push_back(rec_b);
  }

  auto column = [](const std::vector<ModelSelectionRecord>& recs, bool synth) {
    std::vector<double> xs;
    xs.reserve(recs.size());
    for (const auto& r : recs)
      xs.push_back(synth ? r.acc_synthetic : r.acc_real);
    return xs;
  };
  const auto a_synth = column(result.setting_a, true);
  const auto a_real = column(result.setting_a, false);
  const auto b_synth = column(result.setting_b, true);
  const auto b_real = column(result.setting_b, false);
  result.rho_a = spearman_rho(a_synth, a_real);
  result.rho_b = spearman_rho(b_synth, b_real);
  result.best_real_in_top2_by_synth_a =
      best_real_in_top2_by_synth(result.setting_a);
  result.best_real_in_top2_by_synth_b =
      best_real_in_top2_by_synth(result.setting_b);
  return result;
}

}  // namespace dpdm
