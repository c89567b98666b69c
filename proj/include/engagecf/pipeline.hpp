#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "engagecf/cfgan.hpp"
#include "engagecf/classifier.hpp"
#include "engagecf/evalx.hpp"
#include "engagecf/recommend.hpp"
#include "engagecf/run_config.hpp"

namespace engagecf {

// Per-session seed, a splitmix64 mix of the master seed and the index.
std::uint64_t SessionSeed(std::uint64_t seed, int index);
std::string SessionId(int index);  // "s000", "s001", ...

std::vector<SessionStream> SynthesizeCorpus(const RunConfig& config);
Dataset ExtractCorpus(std::span<const SessionStream> streams,
                      const RunConfig& config);

// {"seed":..., "stage":..., "config":{...}}
Json Provenance(const RunConfig& config, std::string_view stage);

struct SessionSplit {
  std::vector<std::string> train;
  std::vector<std::string> test;

  Json ToJsonValue() const;
  static SessionSplit FromJsonValue(const Json& j);
};

SessionSplit ChooseSplit(const Dataset& raw, const RunConfig& config);
// Returns {train, test} in native units. Throws Error("empty-dataset") when
// either side ends up empty.
std::pair<Dataset, Dataset> ApplySplit(const Dataset& raw,
                                       const SessionSplit& split);

struct ClassifierStage {
  MlpModel model;
  std::vector<double> loss_trace;
  SessionSplit split;
  ConfusionMatrix train_confusion;
  ConfusionMatrix test_confusion;
};

ClassifierStage RunClassifierStage(const Dataset& raw, const RunConfig& config);

struct GanStage {
  CfGanModel model;
  std::vector<GanEpochLoss> trace;
  // Held-out windows the classifier predicts LOW, mapped LOW -> HIGH.
  double flip_rate = 0.0;
  std::size_t n_flip_eval = 0;
  double mean_cycle_l1 = 0.0;
  double mean_inter_class_l1 = 0.0;
};

GanStage RunGanStage(const Dataset& raw, const MlpModel& clf,
                     const SessionSplit& split, const RunConfig& config);

// Held-out windows normalized with the classifier's stats, evenly thinned to
// eval.max_samples when that is set.
Dataset EvaluationSet(const Dataset& raw, const MlpModel& clf,
                      const SessionSplit& split, const RunConfig& config);

CorrelationReport RunEvaluateStage(const Dataset& raw, const MlpModel& clf,
                                   const CfGanModel& gan,
                                   const SessionSplit& split,
                                   const RunConfig& config);

struct Explanation {
  FeatureVector input;  // native units
  EngagementClass predicted = EngagementClass::kLow;
  ClassProb probabilities{};
  bool already_high = false;
  FeatureVector counterfactual;  // native units, unset when already_high
  EngagementClass counterfactual_predicted = EngagementClass::kHigh;
  std::vector<FeatureDelta> deltas;
  std::vector<std::string> recommendations;
  std::vector<std::string> notices;

  Json ToJsonValue() const;
  std::string Render() const;
};

Explanation ExplainVector(const MlpModel& clf, const CfGanModel& gan,
                          const FeatureVector& raw, int k,
                          const TemplateConfig& templates);

// Model JSON with a top-level "provenance" member added.
std::string WithProvenance(const std::string& model_json,
                           const Json& provenance);
Json ReadProvenance(const std::filesystem::path& artifact);

}  // namespace engagecf
