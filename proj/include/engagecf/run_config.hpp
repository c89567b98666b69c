#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "engagecf/cfgan.hpp"
#include "engagecf/classifier.hpp"
#include "engagecf/explain.hpp"
#include "engagecf/features.hpp"
#include "engagecf/json_util.hpp"
#include "engagecf/synthgen.hpp"

namespace engagecf {

// Everything a pipeline run depends on. Loaded from a "key = value" text
// file ('#' starts a comment) and then patched by command-line overrides.
struct RunConfig {
  std::uint64_t seed = 2024;

  int sessions = 24;
  EngagementProfile profile{.high_fraction = 0.5, .noise = 0.1};
  WindowSpec window;
  ExtractOptions extract;
  double train_fraction = 0.7;

  TrainConfig clf;
  GanConfig gan;
  LimeConfig lime;
  int eval_max_samples = 0;  // 0 = every held-out window
  int k = 3;

  std::string out_dir = "engagecf-run";
  // Empty paths resolve against out_dir (see ResolvedPath).
  std::string streams_path;
  std::string dataset_path;
  std::string classifier_path;
  std::string gan_path;
  std::string report_path;
  std::string recommendations_path;
  std::string templates_path;  // empty = built-in templates
};

enum class PathKey { kStreams, kDataset, kClassifier, kGan, kReport, kRecommendations };

std::filesystem::path ResolvedPath(const RunConfig& config, PathKey key);

// Throws Error("invalid-config") naming the offending field.
void ApplySetting(RunConfig& config, std::string_view key,
                  std::string_view value);
// "key=value"
void ApplyOverride(RunConfig& config, std::string_view assignment);
RunConfig ParseRunConfig(std::string_view text);
RunConfig LoadRunConfig(const std::filesystem::path& path);
void ValidateRunConfig(const RunConfig& config);

// Every known key in file order, formatted so ParseRunConfig reads it back.
std::string RunConfigToText(const RunConfig& config);
// Provenance form: every key except paths.*, values as strings.
Json RunConfigToJson(const RunConfig& config);

}  // namespace engagecf
