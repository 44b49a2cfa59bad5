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

#include "dpdm/privacy.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace dpdm {

namespace {

double log_sum_exp(const std::vector<double>& terms) {
  const double m = *std::max_element(terms.begin(), terms.end());
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - m);
  return m + std::log(acc);
}

// log C(n, k) via lgamma.
double log_binom(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

}  // namespace

void MechanismSpec::validate() const {
  if (!(noise_multiplier > 0.0)) {
    throw std::invalid_argument(
        "mechanism: noise multiplier must be > 0 for a finite budget");
  }
  if (!(sampling_rate > 0.0 && sampling_rate <= 1.0)) {
    throw std::invalid_argument("mechanism: sampling rate must be in (0, 1]");
  }
  if (steps < 0) {
    throw std::invalid_argument("mechanism: negative step count");
  }
}

double gaussian_rdp(double sigma, double alpha) {
  if (!(sigma > 0.0)) {
    throw std::invalid_argument("gaussian_rdp: sigma must be > 0");
  }
  if (!(alpha > 1.0)) {
    throw std::invalid_argument("gaussian_rdp: order must be > 1");
  }
  return alpha / (2.0 * sigma * sigma);
}

double subsampled_gaussian_rdp(double sigma, double q, int alpha) {
  if (!(sigma > 0.0)) {
    throw std::invalid_argument("subsampled_gaussian_rdp: sigma must be > 0");
  }
  if (!(q > 0.0 && q <= 1.0)) {
    throw std::invalid_argument("subsampled_gaussian_rdp: q must be in (0, 1]");
  }
  if (alpha < 2) {
    throw std::invalid_argument(
        "subsampled_gaussian_rdp: integer order must be >= 2");
  }
  if (q == 1.0) {
    return gaussian_rdp(sigma, static_cast<double>(alpha));
  }
  const double log_q = std::log(q);
  const double log_1mq = std::log1p(-q);
  const double inv_2s2 = 1.0 / (2.0 * sigma * sigma);
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(alpha) + 1);
  for (int k = 0; k <= alpha; ++k) {
    const double t = log_binom(alpha, k) + (alpha - k) * log_1mq + k * log_q +
                     static_cast<double>(k) * (k - 1) * inv_2s2;
    terms.push_back(t);
  }
  const double lse = log_sum_exp(terms);
  // The sum is >= 1 by Jensen, so the log is >= 0 up to roundoff.
  return std::max(0.0, lse / (alpha - 1));
}

RdpCurve rdp_curve(double sigma, double q, int max_order) {
  if (max_order < 2) {
    throw std::invalid_argument("rdp_curve: max_order must be >= 2");
  }
  RdpCurve c;
  c.orders.reserve(static_cast<std::size_t>(max_order) - 1);
  c.eps.reserve(static_cast<std::size_t>(max_order) - 1);
  for (int a = 2; a <= max_order; ++a) {
    c.orders.push_back(static_cast<double>(a));
    c.eps.push_back(subsampled_gaussian_rdp(sigma, q, a));
  }
  return c;
}

RdpCurve compose(const RdpCurve& per_step, long steps) {
  if (steps < 0) {
    throw std::invalid_argument("compose: negative step count");
  }
  RdpCurve out = per_step;
  for (double& e : out.eps) e *= static_cast<double>(steps);
  return out;
}

DpConversion rdp_to_dp(const RdpCurve& curve, double delta) {
  if (curve.orders.empty()) {
    throw std::invalid_argument("rdp_to_dp: empty curve");
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("rdp_to_dp: delta must be in (0, 1)");
  }
  const double log_inv_delta = std::log(1.0 / delta);
  DpConversion best;
  best.epsilon = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < curve.orders.size(); ++i) {
    const double alpha = curve.orders[i];
    const double eps = curve.eps[i] + log_inv_delta / (alpha - 1.0);
    if (eps < best.epsilon) {
      best.epsilon = eps;
      best.best_order = alpha;
    }
  }
  return best;
}

double account_epsilon(const MechanismSpec& spec, double delta) {
  spec.validate();
  const RdpCurve per_step = rdp_curve(spec.noise_multiplier, spec.sampling_rate);
  return rdp_to_dp(compose(per_step, spec.steps), delta).epsilon;
}

double calibrate_sigma(double q, long steps, const PrivacySpend& target) {
  if (!(target.epsilon > 0.0)) {
    throw std::invalid_argument("calibrate: target epsilon must be > 0");
  }
  double lo = 0.3, hi = 100.0;
  auto eps_at = [&](double sigma) {
    MechanismSpec spec{sigma, q, steps};
    return account_epsilon(spec, target.delta);
  };
  const double eps_lo = eps_at(lo);  // largest epsilon in the bracket
  const double eps_hi = eps_at(hi);  // smallest
  if (target.epsilon > eps_lo || target.epsilon < eps_hi) {
    throw std::runtime_error(
        "calibrate: target epsilon " + std::to_string(target.epsilon) +
        " unreachable for sigma in [0.3, 100]; achievable range [" +
        std::to_string(eps_hi) + ", " + std::to_string(eps_lo) + "]");
  }
  const double tol = 1e-3 * target.epsilon;
  double mid = 0.5 * (lo + hi);
  for (int iter = 0; iter < 200; ++iter) {
    mid = 0.5 * (lo + hi);
    const double eps = eps_at(mid);
    if (std::abs(eps - target.epsilon) <= tol) return mid;
    if (eps > target.epsilon) {
      lo = mid;  // need more noise
    } else {
      hi = mid;
    }
  }
  return mid;
}

}  // namespace dpdm
