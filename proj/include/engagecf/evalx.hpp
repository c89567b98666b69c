#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "engagecf/cfgan.hpp"
#include "engagecf/classifier.hpp"
#include "engagecf/explain.hpp"

namespace engagecf {

// Product-moment correlation. Throws Error("invalid-argument") for unequal
// lengths or fewer than 2 points and Error("zero-variance") when either
// sequence is constant.
double Pearson(std::span<const double> x, std::span<const double> y);

inline constexpr double kStrongThreshold = 0.6;
inline constexpr double kModerateThreshold = 0.4;

enum class Strength { kWeak, kModerate, kStrong };

// |r| >= 0.6 strong, 0.4 <= |r| < 0.6 moderate, otherwise weak.
Strength Categorize(double r);
// e.g. "strong-positive", "weak-negative"; r == 0 counts as positive.
std::string CategoryLabel(double r);

struct FeatureCorrelation {
  std::size_t feature = 0;
  std::optional<double> r;  // nullopt when a series had zero variance
  std::string category;     // "undefined" when r is absent
  std::size_t n = 0;
  double mean_signed_importance = 0.0;
  double mean_abs_delta = 0.0;
};

struct CorrelationReport {
  std::string dataset_id;
  std::size_t n_samples = 0;
  double flip_rate = 0.0;
  LimeConfig lime;
  std::array<FeatureCorrelation, kNumFeatures> features{};
  // Per-sample series, rows = samples: |importance| and |delta|.
  std::vector<std::array<double, kNumFeatures>> abs_importance;
  std::vector<std::array<double, kNumFeatures>> abs_delta;

  // Median over the defined r values (NaN when none).
  double MedianR() const;
  std::size_t CountAbsAtLeast(double threshold) const;

  std::string ToJson() const;
  // Terminal bar table sorted by r, descending.
  std::string RenderTable() const;
};

// For each sample: the counterfactual away from the classifier's prediction,
// |delta| per feature, and LIME importance (seed = lime.seed + sample index).
// Then, per feature, Pearson between |importance| and |delta| across samples.
CorrelationReport ImportanceChangeCorrelation(
    const CounterfactualGenerator& generator, const ProbabilityModel& clf,
    const std::array<double, kNumFeatures>& perturbation_std,
    const Dataset& eval_set, const LimeConfig& lime,
    std::string dataset_id = "");

CorrelationReport ImportanceChangeCorrelation(
    const CounterfactualGenerator& generator, const MlpModel& clf,
    const Dataset& eval_set, const LimeConfig& lime,
    std::string dataset_id = "");

}  // namespace engagecf
