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

#ifndef DPDM_PRIVACY_H_
#define DPDM_PRIVACY_H_

#include <vector>

namespace dpdm {

/// An (epsilon, delta) differential-privacy budget. Smaller is more private.
struct PrivacySpend {
  double epsilon = 0.0;
  double delta = 0.0;
};

/// Renyi-DP curve: epsilon_alpha per order alpha, orders strictly increasing.
struct RdpCurve {
  std::vector<double> orders;
  std::vector<double> eps;
};

/// Poisson-subsampled Gaussian mechanism applied `steps` times.
struct MechanismSpec {
  double noise_multiplier = 0.0;  // sigma
  double sampling_rate = 0.0;     // q = B / N
  long steps = 0;

  void validate() const;
};

/// Renyi divergence of order alpha between N(0, sigma^2) and N(1, sigma^2):
/// alpha / (2 sigma^2).
double gaussian_rdp(double sigma, double alpha);

/// RDP of one Poisson-subsampled Gaussian release at integer order alpha >= 2,
/// via the exact binomial expansion evaluated in log space:
///   eps_alpha = log( sum_{k=0..alpha} C(alpha,k)(1-q)^(alpha-k) q^k
///                    exp(k(k-1)/(2 sigma^2)) ) / (alpha - 1).
double subsampled_gaussian_rdp(double sigma, double q, int alpha);

/// Per-step curve over the integer order grid {2, ..., max_order}.
RdpCurve rdp_curve(double sigma, double q, int max_order = 256);

/// RDP composition: epsilon_alpha values add across steps.
RdpCurve compose(const RdpCurve& per_step, long steps);

struct DpConversion {
  double epsilon = 0.0;
  double best_order = 0.0;
};

/// Classic RDP -> (eps, delta) conversion: minimizes
/// eps_alpha + log(1/delta) / (alpha - 1) over the curve's orders.
DpConversion rdp_to_dp(const RdpCurve& curve, double delta);

/// Total (eps, delta)-DP of the mechanism, over the default order grid.
double account_epsilon(const MechanismSpec& spec, double delta);

/// Finds sigma in [0.3, 100] whose accounted epsilon matches the target within
/// 1e-3 relative, by bisection (epsilon is strictly decreasing in sigma).
/// Throws if the target lies outside the bracket.
double calibrate_sigma(double q, long steps, const PrivacySpend& target);

}  // namespace dpdm

#endif  // DPDM_PRIVACY_H_
