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

#ifndef DPDM_EVAL_H_
#define DPDM_EVAL_H_

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dpdm/data.h"
#include "dpdm/nn.h"
#include "dpdm/params.h"

namespace dpdm {

// ---- non-private classifier training ---------------------------------------

/// Hyperparameters for the small conv classifiers used throughout evaluation.
/// `init_seed` fixes the weight initialization; `batch_seed` fixes minibatch
/// subsampling, so ensembles can vary only the latter.
struct ClassifierHyper {
  int steps = 600;
  int batch_size = 32;
  double learning_rate = 2e-3;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  bool hflip = false;
  int max_shift = 0;
  std::uint64_t init_seed = 0;
  std::uint64_t batch_seed = 0;
};

struct TrainedClassifier {
  ClassifierArch arch;
  ParameterSet params;
};

TrainedClassifier train_classifier(const LabeledImageSet& train,
                                   const ClassifierArch& arch,
                                   const ClassifierHyper& hyper);

/// Softmax class probabilities for one [C,H,W] example.
std::vector<double> classifier_probs(const TrainedClassifier& clf,
                                     const Tensor& img_chw);
int classifier_predict(const TrainedClassifier& clf, const Tensor& img_chw);
double classifier_accuracy(const TrainedClassifier& clf,
                           const LabeledImageSet& test);

// ---- feature embeddings and the Frechet score -------------------------------

/// A frozen classifier whose penultimate activations embed images for the
/// Frechet score. Train it on the pre-training domain, then leave it fixed
/// for all evaluations.
struct FeatureExtractor {
  TrainedClassifier clf;
  int feature_dim = 0;

  std::vector<double> embed(const Tensor& img_chw) const;
  /// n x feature_dim, row-major.
  std::vector<double> embed_set(const LabeledImageSet& set) const;
};

FeatureExtractor train_feature_extractor(const LabeledImageSet& pretrain_data,
                                         int feature_dim,
                                         const ClassifierHyper& hyper);

/// Gaussian moments of an embedded set: mean and sample covariance
/// (n - 1 denominator).
struct GaussianFit {
  int dim = 0;
  std::vector<double> mean;  // [dim]
  std::vector<double> cov;   // [dim * dim] row-major, symmetric
};

GaussianFit fit_gaussian(const std::vector<double>& embeddings, int dim);

/// Frechet distance between Gaussian fits:
///   ||mu_a - mu_b||^2 + Tr(Sa + Sb - 2 (Sa Sb)^{1/2}),
/// with the matrix square root taken through the eigendecomposition of the
/// symmetrized product sqrt(Sa) Sb sqrt(Sa); tiny negative eigenvalues are
/// clipped to zero.
double frechet_distance(const GaussianFit& a, const GaussianFit& b);

struct FidResult {
  double score = 0.0;
  bool regularized = false;  // a set had fewer than feature_dim + 1 samples
  std::map<int, double> per_class;
};

struct FidOptions {
  bool per_class = false;
};

/// Embeds both sets with the frozen extractor, fits Gaussians, and returns
/// the Frechet distance. Sets smaller than feature_dim + 1 get their
/// covariance regularized by +1e-6 I and the result is flagged.
FidResult fid_like_score(const LabeledImageSet& real,
                         const LabeledImageSet& synth,
                         const FeatureExtractor& extractor,
                         const FidOptions& options = {});

// ---- downstream prediction ---------------------------------------------------

/// Trains a classifier on synthetic data and reports top-1 accuracy on the
/// real test set.
double train_downstream(const LabeledImageSet& synth,
                        const ClassifierArch& arch,
                        const ClassifierHyper& hyper,
                        const LabeledImageSet& real_test);

/// Trains `members` classifiers that differ only in minibatch subsampling,
/// averages their softmax outputs, and reports top-1 accuracy.
double ensemble_accuracy(const LabeledImageSet& synth,
                         const ClassifierArch& arch,
                         const ClassifierHyper& hyper, int members,
                         const LabeledImageSet& real_test);

struct DomainDiscriminatorResult {
  double fraction_finetune = 0.0;   // synthetic samples classified as finetune
  double holdout_accuracy = 0.0;    // discriminator accuracy on held-out real
  bool reliable = false;            // holdout_accuracy >= 0.9
  std::map<int, double> per_class;  // fraction by synthetic label
};

/// Trains a two-way domain discriminator on real pretrain-vs-finetune images
/// (an 80/20 holdout measures its quality) and reports the fraction of
/// synthetic samples it assigns to the fine-tune domain.
DomainDiscriminatorResult domain_discriminator(
    const LabeledImageSet& pretrain_real, const LabeledImageSet& finetune_real,
    const LabeledImageSet& synth, const ClassifierHyper& hyper);

// ---- model selection ----------------------------------------------------------

/// Spearman rank correlation with average ranks for ties. Returns nullopt when
/// either list is constant (the correlation is undefined).
std::optional<double> spearman_rho(std::span<const double> a,
                                   std::span<const double> b);

struct SelectionGridPoint {
  std::string arch_id;
  ClassifierArch arch;
  double learning_rate = 1e-3;
  double weight_decay = 0.0;
};

struct ModelSelectionRecord {
  std::string arch_id;
  double learning_rate = 0.0;
  double weight_decay = 0.0;
  double acc_synthetic = 0.0;
  double acc_real = 0.0;
};

struct ModelSelectionResult {
  // Setting (a): models trained on synthetic data, evaluated on the synthetic
  // test split (acc_synthetic) and on the real test split (acc_real).
  std::vector<ModelSelectionRecord> setting_a;
  // Setting (b): models trained and evaluated on their own source, synthetic
  // (acc_synthetic) vs real (acc_real).
  std::vector<ModelSelectionRecord> setting_b;
  std::optional<double> rho_a;
  std::optional<double> rho_b;
  bool best_real_in_top2_by_synth_a = false;
  bool best_real_in_top2_by_synth_b = false;
};

/// Runs the hyperparameter-transfer study over a grid of at least 6
/// configurations spanning at least 2 architectures.
ModelSelectionResult model_selection_study(
    const LabeledImageSet& synth_train, const LabeledImageSet& synth_test,
    const LabeledImageSet& real_train, const LabeledImageSet& real_test,
    const std::vector<SelectionGridPoint>& grid,
    const ClassifierHyper& base_hyper);

}  // namespace dpdm

#endif  // DPDM_EVAL_H_
