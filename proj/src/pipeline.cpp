#include "engagecf/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

#include "engagecf/error.hpp"
#include "engagecf/features.hpp"

namespace engagecf {

namespace {

std::vector<std::string> SessionsOf(const Dataset& d) {
  std::set<std::string> ids;
  for (const auto& s : d.samples) ids.insert(s.session_id);
  return {ids.begin(), ids.end()};
}

Json VectorJson(const FeatureVector& v) {
  Json a = Json::array();
  for (double x : v.values()) a.push_back(x);
  return a;
}

}  // namespace

std::uint64_t SessionSeed(std::uint64_t seed, int index) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(index) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::string SessionId(int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "s%03d", index);
  return buf;
}

std::vector<SessionStream> SynthesizeCorpus(const RunConfig& config) {
  std::vector<SessionStream> out;
  out.reserve(config.sessions);
  for (int i = 0; i < config.sessions; ++i) {
    out.push_back(
        GenerateSession(SessionSeed(config.seed, i), config.profile, SessionId(i)));
  }
  return out;
}

Dataset ExtractCorpus(std::span<const SessionStream> streams,
                      const RunConfig& config) {
  Dataset ds;
  for (const auto& s : streams) {
    auto w = ExtractSession(s, config.window, config.extract);
    ds.samples.insert(ds.samples.end(), w.begin(), w.end());
  }
  if (ds.empty()) throw Error("empty-dataset", "no windows extracted");
  return ds;
}

Json Provenance(const RunConfig& config, std::string_view stage) {
  return Json{{"stage", stage},
              {"seed", config.seed},
              {"config", RunConfigToJson(config)}};
}

Json SessionSplit::ToJsonValue() const {
  return Json{{"train", train}, {"test", test}};
}

SessionSplit SessionSplit::FromJsonValue(const Json& j) {
  constexpr std::string_view what = "session split";
  SessionSplit s;
  try {
    s.train = RequireField(j, "train", what).get<std::vector<std::string>>();
    s.test = RequireField(j, "test", what).get<std::vector<std::string>>();
  } catch (const Json::exception& e) {
    throw Error("invalid-json", std::string(what) + ": " + e.what());
  }
  return s;
}

SessionSplit ChooseSplit(const Dataset& raw, const RunConfig& config) {
  auto [train, test] = SplitBySession(raw, config.train_fraction, config.seed);
  return {SessionsOf(train), SessionsOf(test)};
}

std::pair<Dataset, Dataset> ApplySplit(const Dataset& raw,
                                       const SessionSplit& split) {
  const std::set<std::string> train(split.train.begin(), split.train.end());
  const std::set<std::string> test(split.test.begin(), split.test.end());
  Dataset a, b;
  for (const auto& s : raw.samples) {
    if (train.count(s.session_id)) a.samples.push_back(s);
    else if (test.count(s.session_id)) b.samples.push_back(s);
  }
  if (a.empty() || b.empty()) {
    throw Error("empty-dataset",
                "dataset has no windows for the recorded train/test sessions");
  }
  return {std::move(a), std::move(b)};
}

ClassifierStage RunClassifierStage(const Dataset& raw, const RunConfig& config) {
  ClassifierStage st;
  st.split = ChooseSplit(raw, config);
  auto [train, test] = ApplySplit(raw, st.split);
  const NormStats stats = FitNormalizer(train);
  const Dataset train_n = NormalizeDataset(train, stats);
  const Dataset test_n = NormalizeDataset(test, stats);
  auto res = TrainClassifier(train_n, config.clf);
  st.model = std::move(res.model);
  st.loss_trace = std::move(res.loss_trace);
  st.train_confusion = ComputeConfusionMatrix(st.model, train_n);
  st.test_confusion = ComputeConfusionMatrix(st.model, test_n);
  return st;
}

GanStage RunGanStage(const Dataset& raw, const MlpModel& clf,
                     const SessionSplit& split, const RunConfig& config) {
  auto [train, test] = ApplySplit(raw, split);
  const Dataset train_n = NormalizeDataset(train, clf.norm_stats());
  const Dataset test_n = NormalizeDataset(test, clf.norm_stats());
  auto res = TrainGan(train_n.Filter(EngagementClass::kLow),
                      train_n.Filter(EngagementClass::kHigh), clf, config.gan);
  GanStage st;
  st.model = std::move(res.model);
  st.trace = std::move(res.trace);
  const Dataset low_pred = FilterByPrediction(clf, test_n, EngagementClass::kLow);
  st.n_flip_eval = low_pred.size();
  if (!low_pred.empty()) st.flip_rate = FlipRate(st.model, clf, low_pred);
  st.mean_cycle_l1 = MeanCycleL1(st.model, test_n);
  if (test_n.CountLabel(EngagementClass::kLow) > 0 &&
      test_n.CountLabel(EngagementClass::kHigh) > 0) {
    st.mean_inter_class_l1 = MeanInterClassL1(test_n);
  }
  return st;
}

Dataset EvaluationSet(const Dataset& raw, const MlpModel& clf,
                      const SessionSplit& split, const RunConfig& config) {
  const Dataset test_n =
      NormalizeDataset(ApplySplit(raw, split).second, clf.norm_stats());
  const std::size_t n = test_n.size();
  const std::size_t m = static_cast<std::size_t>(config.eval_max_samples);
  if (m == 0 || n <= m) return test_n;
  Dataset out;
  out.norm_stats = test_n.norm_stats;
  for (std::size_t i = 0; i < m; ++i) out.samples.push_back(test_n.samples[i * n / m]);
  return out;
}

CorrelationReport RunEvaluateStage(const Dataset& raw, const MlpModel& clf,
                                   const CfGanModel& gan,
                                   const SessionSplit& split,
                                   const RunConfig& config) {
  const Dataset eval = EvaluationSet(raw, clf, split, config);
  return ImportanceChangeCorrelation(gan, clf, eval, config.lime,
                                     "synthetic-seed-" + std::to_string(config.seed));
}

Explanation ExplainVector(const MlpModel& clf, const CfGanModel& gan,
                          const FeatureVector& raw, int k,
                          const TemplateConfig& templates) {
  if (!raw.AllFinite()) {
    throw Error("invalid-input", "feature vector has non-finite entries");
  }
  Explanation ex;
  ex.input = raw;
  const NormStats& stats = clf.norm_stats();
  const FeatureVector n = Normalize(raw, stats);
  ex.probabilities = Predict(clf, n);
  ex.predicted = ex.probabilities.Predicted();
  if (ex.predicted == EngagementClass::kHigh) {
    ex.already_high = true;
    ex.notices.push_back("already high engagement");
    return ex;
  }
  const FeatureVector cf_n = Counterfactual(gan, n, Direction::kLowToHigh);
  ex.counterfactual = Denormalize(cf_n, stats);
  ex.counterfactual_predicted = Predict(clf, cf_n).Predicted();
  if (ex.counterfactual_predicted != EngagementClass::kHigh) {
    ex.notices.push_back("counterfactual is still classified low");
  }
  ex.deltas = TopKChanges(raw, ex.counterfactual, k, stats);
  ex.recommendations = Render(ex.deltas, templates, &ex.notices);
  return ex;
}

Json Explanation::ToJsonValue() const {
  Json j{{"input", VectorJson(input)},
         {"predicted", ClassLabel(predicted)},
         {"probabilities",
          {{"low", probabilities[EngagementClass::kLow]},
           {"high", probabilities[EngagementClass::kHigh]}}},
         {"already_high", already_high}};
  if (!already_high) {
    j["counterfactual"] = VectorJson(counterfactual);
    j["counterfactual_predicted"] = ClassLabel(counterfactual_predicted);
    j["deltas"] = DeltasToJson(deltas);
  }
  j["recommendations"] = recommendations;
  j["notices"] = notices;
  return j;
}

std::string Explanation::Render() const {
  std::ostringstream out;
  out << "predicted: " << ClassLabel(predicted) << " (p_low="
      << FormatDouble(probabilities[EngagementClass::kLow]) << ")\n";
  if (already_high) {
    out << "already high engagement\n";
    return out.str();
  }
  for (const auto& d : deltas) {
    out << "  " << FeatureName(d.feature) << ": " << FormatDouble(d.original)
        << " -> " << FormatDouble(d.counterfactual) << "\n";
  }
  for (const auto& line : recommendations) out << "- " << line << "\n";
  for (const auto& n : notices) out << "note: " << n << "\n";
  return out.str();
}

std::string WithProvenance(const std::string& model_json,
                           const Json& provenance) {
  Json j = ParseJson(model_json, "model");
  j["provenance"] = provenance;
  return j.dump(2) + "\n";
}

Json ReadProvenance(const std::filesystem::path& artifact) {
  const Json j = ParseJson(ReadFile(artifact), artifact.string());
  return RequireField(j, "provenance", artifact.string());
}

}  // namespace engagecf
