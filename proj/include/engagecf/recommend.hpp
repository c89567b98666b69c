#pragma once

#include <array>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "engagecf/data.hpp"
#include "engagecf/json_util.hpp"

namespace engagecf {

struct FeatureDelta {
  std::size_t feature = 0;
  double original = 0.0;        // native units
  double counterfactual = 0.0;  // native units
  double change = 0.0;          // counterfactual - original
  double rank_key = 0.0;        // |change| in normalized (z-score) units

  friend bool operator==(const FeatureDelta&, const FeatureDelta&) = default;
};

inline constexpr int kDefaultTopK = 3;

// The k features with the largest normalized |change|, descending; ties keep
// the fixed feature order. Inputs are in native units. Throws
// Error("invalid-argument") unless 1 <= k <= 18.
std::vector<FeatureDelta> TopKChanges(const FeatureVector& original,
                                      const FeatureVector& counterfactual,
                                      int k, const NormStats& stats);

enum class ChangeCondition { kIncrease, kDecrease, kAny };

struct TemplateBin {
  // Half-open [lower, upper) on the original (present) value, native units.
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
  ChangeCondition condition = ChangeCondition::kAny;
  std::string text;

  friend bool operator==(const TemplateBin&, const TemplateBin&) = default;
};

struct TemplateConfig {
  // Bins sorted by `lower`, keyed by feature index.
  std::map<std::size_t, std::vector<TemplateBin>> bins;

  friend bool operator==(const TemplateConfig&, const TemplateConfig&) = default;
};

// Valid value range per feature (ratios [0, 1], valence [-1, 1], ...).
std::pair<double, double> FeatureRange(std::size_t feature);

// Bins must be non-overlapping, contiguous and cover the feature's range.
// Throws Error("invalid-templates") naming the feature otherwise.
void ValidateTemplates(const TemplateConfig& templates);

// Built-in templates for all 18 features.
const TemplateConfig& DefaultTemplates();

std::string TemplatesToJson(const TemplateConfig& templates);
TemplateConfig TemplatesFromJson(std::string_view text);
TemplateConfig LoadTemplates(const std::filesystem::path& path);

// One line per delta whose bin matches both the present value and the
// direction of change, in delta order. Unmatched deltas are skipped and
// reported in `notices`. Throws Error("missing-template") for a feature
// absent from the config.
std::vector<std::string> Render(const std::vector<FeatureDelta>& deltas,
                                const TemplateConfig& templates,
                                std::vector<std::string>* notices = nullptr);

Json DeltasToJson(const std::vector<FeatureDelta>& deltas);

}  // namespace engagecf
