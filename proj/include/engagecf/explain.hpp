#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>

#include "engagecf/classifier.hpp"
#include "engagecf/data.hpp"

namespace engagecf {

struct LimeConfig {
  int n_samples = 1000;
  double kernel_width = 0.75 * std::sqrt(static_cast<double>(kNumFeatures));
  std::uint64_t seed = 0;
  double ridge = 1e-6;
};

void ValidateLimeConfig(const LimeConfig& config);

struct ImportanceScores {
  std::array<double, kNumFeatures> coefficients{};
  double intercept = 0.0;
  // Class whose probability the surrogate models (the predicted class).
  EngagementClass target = EngagementClass::kLow;
  LimeConfig config;

  Json ToJsonValue() const;
  static ImportanceScores FromJsonValue(const Json& j);
};

// Local linear surrogate around `normalized`:
//  1. draw n_samples Gaussian perturbations with per-feature std
//     `perturbation_std` (normalized units),
//  2. weight each by exp(-d^2 / kernel_width^2), d = Euclidean distance,
//  3. fit weighted ridge regression (intercept unpenalized) of the
//     predicted class's probability on the standardized perturbations.
// Features with zero perturbation std get a coefficient of exactly 0.
// Throws Error("singular-surrogate") when the weighted system is degenerate.
ImportanceScores LimeExplain(
    const ProbabilityModel& clf, const FeatureVector& normalized,
    const std::array<double, kNumFeatures>& perturbation_std,
    const LimeConfig& config);

// Perturbation std taken from the classifier's training NormStats: one
// normalized unit per feature, zero for clamped (constant) columns.
ImportanceScores LimeExplain(const MlpModel& clf,
                             const FeatureVector& normalized,
                             const LimeConfig& config);

std::array<double, kNumFeatures> PerturbationStd(const NormStats& stats);

}  // namespace engagecf
