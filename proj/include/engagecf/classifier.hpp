#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "engagecf/data.hpp"
#include "engagecf/nn.hpp"

namespace engagecf {

struct ClassProb {
  std::array<double, 2> p{0.5, 0.5};  // indexed by ClassIndex

  double operator[](EngagementClass c) const { return p[ClassIndex(c)]; }
  // Ties go to LOW.
  EngagementClass Predicted() const {
    return p[1] > p[0] ? EngagementClass::kHigh : EngagementClass::kLow;
  }
};

// Anything that maps a normalized feature vector to class probabilities.
// The explainer and the evaluation harness only depend on this.
class ProbabilityModel {
 public:
  virtual ~ProbabilityModel() = default;
  virtual ClassProb Probabilities(const FeatureVector& normalized) const = 0;
  // Row-wise batch evaluation; the default loops over Probabilities.
  virtual std::vector<ClassProb> ProbabilitiesBatch(
      const nn::Matrix& normalized_rows) const;
};

struct TrainConfig {
  double learning_rate = 0.05;
  int batch_size = 32;
  int epochs = 150;
  std::uint64_t seed = 1;
  double weight_init_scale = 1.0;
  double momentum = 0.9;
  int hidden_size = 16;
};

void ValidateTrainConfig(const TrainConfig& config);
Json TrainConfigToJson(const TrainConfig& config);
TrainConfig TrainConfigFromJson(const Json& j);

// Two dense layers: 18 -> H (tanh) -> 2 (softmax). Operates on features
// normalized with the embedded NormStats.
class MlpModel : public ProbabilityModel {
 public:
  MlpModel() = default;
  MlpModel(int hidden_size, NormStats norm_stats);

  ClassProb Probabilities(const FeatureVector& normalized) const override;
  std::vector<ClassProb> ProbabilitiesBatch(
      const nn::Matrix& normalized_rows) const override;
  // Logits (pre-softmax) for a normalized vector.
  std::array<double, 2> Logits(const FeatureVector& normalized) const;
  // Normalizes a vector in native units, then predicts.
  ClassProb PredictRaw(const FeatureVector& raw) const;

  int hidden_size() const { return network_.sizes()[1]; }
  const NormStats& norm_stats() const { return norm_stats_; }
  nn::Network& network() { return network_; }
  const nn::Network& network() const { return network_; }
  const TrainConfig& train_config() const { return train_config_; }
  void set_train_config(const TrainConfig& c) { train_config_ = c; }

  std::string ToJson() const;
  static MlpModel FromJson(std::string_view text);
  void Save(const std::filesystem::path& path) const;
  static MlpModel Load(const std::filesystem::path& path);

  friend bool operator==(const MlpModel& a, const MlpModel& b) {
    return a.network_ == b.network_ && a.norm_stats_ == b.norm_stats_;
  }

 private:
  nn::Network network_;
  NormStats norm_stats_;
  TrainConfig train_config_;
};

// Predicts a normalized vector; throws Error("invalid-input") on non-finite
// entries.
ClassProb Predict(const ProbabilityModel& model, const FeatureVector& fv);

std::array<double, 2> Softmax(const std::array<double, 2>& logits);

nn::Matrix ToMatrix(const Dataset& dataset);
std::vector<int> Labels(const Dataset& dataset);

// Mean softmax cross-entropy over the rows, times `loss_scale`. When `grads`
// is non-null, accumulates d(scaled loss)/d(params).
double CrossEntropyLoss(const MlpModel& model, const nn::Matrix& x,
                        const std::vector<int>& labels, nn::ParamSet* grads,
                        double loss_scale = 1.0);

struct TrainResult {
  MlpModel model;
  // loss_trace[0] is the loss before the first update; then one entry per
  // epoch, all over the full training set.
  std::vector<double> loss_trace;
};

// Mini-batch SGD with momentum on softmax cross-entropy. The dataset must be
// normalized (norm_stats set) and contain both classes.
TrainResult TrainClassifier(const Dataset& dataset, const TrainConfig& config);

// Worst relative error between backprop and central differences (step 1e-4)
// of the single-sample loss, over `n_coords` random parameters (0 = all).
double GradCheck(const MlpModel& model, const LabeledSample& sample,
                 std::size_t n_coords = 0, std::uint64_t seed = 0);

struct ConfusionMatrix {
  // counts[true][predicted]
  std::array<std::array<std::size_t, 2>, 2> counts{};

  std::size_t Total() const;
  double Accuracy() const;
  std::string Render() const;
};

ConfusionMatrix ComputeConfusionMatrix(const ProbabilityModel& model,
                                       const Dataset& normalized);

}  // namespace engagecf
