#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace engagecf {

inline constexpr std::size_t kNumFeatures = 18;

// Fixed feature order. Every vector, CSV column block and JSON array in the
// project follows it.
enum class Feature : std::size_t {
  VAL_F,
  GZ_DR,
  HD_AC,
  AM_CR,
  HD_TH,
  DIST_LW,
  DIST_RW,
  YROT_LE,
  YROT_RE,
  FO_LW,
  FO_RW,
  XROT_LE,
  XROT_RE,
  SDX_HD,
  SDXROT_HD,
  TN_HD,
  CONT_MOV,
  EN_HA,
};

const std::array<std::string_view, kNumFeatures>& FeatureNames();
std::string_view FeatureName(std::size_t index);
std::optional<std::size_t> FeatureIndex(std::string_view name);

// True for the entries with fraction semantics (GZ_DR, AM_CR, HD_TH, TN_HD).
bool IsRatioFeature(std::size_t index);

class FeatureVector {
 public:
  FeatureVector() { values_.fill(0.0); }
  explicit FeatureVector(const std::array<double, kNumFeatures>& values)
      : values_(values) {}

  static FeatureVector FromSpan(std::span<const double> values);

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](Feature f) { return values_[static_cast<std::size_t>(f)]; }
  double operator[](Feature f) const {
    return values_[static_cast<std::size_t>(f)];
  }

  std::span<const double, kNumFeatures> span() const { return values_; }
  const std::array<double, kNumFeatures>& values() const { return values_; }
  static constexpr std::size_t size() { return kNumFeatures; }

  bool AllFinite() const;

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;

 private:
  std::array<double, kNumFeatures> values_;
};

// LOW = 0, HIGH = 1 everywhere (class indices of the classifier output too).
enum class EngagementClass : int { kLow = 0, kHigh = 1 };

inline int ClassIndex(EngagementClass c) { return static_cast<int>(c); }
inline EngagementClass ClassFromIndex(int i) {
  return i == 0 ? EngagementClass::kLow : EngagementClass::kHigh;
}
inline EngagementClass Opposite(EngagementClass c) {
  return c == EngagementClass::kLow ? EngagementClass::kHigh
                                    : EngagementClass::kLow;
}
std::string_view ClassLabel(EngagementClass c);  // "low" / "high"
EngagementClass ParseClassLabel(std::string_view label);

struct LabeledSample {
  FeatureVector features;
  EngagementClass label = EngagementClass::kLow;
  std::string session_id;
  std::uint64_t window_index = 0;

  friend bool operator==(const LabeledSample&, const LabeledSample&) = default;
};

inline constexpr double kStdEpsilon = 1e-8;

struct NormStats {
  std::array<double, kNumFeatures> mean{};
  std::array<double, kNumFeatures> std{};

  // A column whose population std fell below kStdEpsilon and was floored.
  bool IsClamped(std::size_t i) const { return std[i] <= kStdEpsilon; }

  friend bool operator==(const NormStats&, const NormStats&) = default;
};

struct Dataset {
  std::vector<LabeledSample> samples;
  std::optional<NormStats> norm_stats;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  std::size_t CountLabel(EngagementClass c) const;
  // Samples with the given label, norm_stats carried over.
  Dataset Filter(EngagementClass c) const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Population mean/std per column, std floored at kStdEpsilon.
NormStats FitNormalizer(const Dataset& dataset);

FeatureVector Normalize(const FeatureVector& fv, const NormStats& stats);
FeatureVector Denormalize(const FeatureVector& fv, const NormStats& stats);
// Normalizes every sample and records `stats` on the result.
Dataset NormalizeDataset(const Dataset& dataset, const NormStats& stats);

// Partitions whole sessions. The train side gets
// round(train_fraction * n_sessions) sessions, clamped to [1, n - 1].
std::pair<Dataset, Dataset> SplitBySession(const Dataset& dataset,
                                           double train_fraction,
                                           std::uint64_t seed);

// Shortest round-trip decimal representation.
std::string FormatDouble(double value);

// CSV: session_id,window_index,label,<18 features>. A non-empty `comment`
// is written as a leading "# ..." line; readers skip leading '#' lines.
void WriteDatasetCsv(const Dataset& dataset, std::ostream& out,
                     std::string_view comment = {});
void SaveDatasetCsv(const Dataset& dataset, const std::filesystem::path& path,
                    std::string_view comment = {});
Dataset ReadDatasetCsv(std::istream& in);
Dataset LoadDatasetCsv(const std::filesystem::path& path);

std::string NormStatsToJson(const NormStats& stats);
NormStats NormStatsFromJson(std::string_view text);

// Write to a sibling temp file, then rename over the target.
void WriteFileAtomic(const std::filesystem::path& path,
                     std::string_view contents);
std::string ReadFile(const std::filesystem::path& path);

}  // namespace engagecf
