#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "engagecf/classifier.hpp"
#include "engagecf/data.hpp"
#include "engagecf/nn.hpp"

namespace engagecf {

enum class Direction { kLowToHigh, kHighToLow };

inline Direction DirectionAwayFrom(EngagementClass c) {
  return c == EngagementClass::kLow ? Direction::kLowToHigh
                                    : Direction::kHighToLow;
}

// Maps a normalized feature vector to its counterfactual in the same space.
class CounterfactualGenerator {
 public:
  virtual ~CounterfactualGenerator() = default;
  virtual FeatureVector Translate(const FeatureVector& normalized,
                                  Direction direction) const = 0;
};

struct GanConfig {
  double lambda_cycle = 10.0;
  double lambda_counterfactual = 1.0;
  double lambda_identity = 0.0;  // identity loss off by default
  double learning_rate = 5e-4;   // Adam, beta1 = 0.5
  int epochs = 150;
  int batch_size = 64;
  std::uint64_t seed = 7;
  std::vector<int> generator_hidden{64, 64};
  int discriminator_hidden = 64;
  double weight_init_scale = 1.0;
  // Generators output x + net(x) instead of net(x).
  bool residual = false;
};

void ValidateGanConfig(const GanConfig& config);
Json GanConfigToJson(const GanConfig& config);
GanConfig GanConfigFromJson(const Json& j);

// Two generators (LOW->HIGH, HIGH->LOW) and two least-squares
// discriminators over 18-dim z-scored feature vectors.
class CfGanModel : public CounterfactualGenerator {
 public:
  CfGanModel() = default;
  CfGanModel(const GanConfig& config, const NormStats& norm_stats);

  void Initialize(std::mt19937_64& rng);

  FeatureVector Translate(const FeatureVector& normalized,
                          Direction direction) const override;
  // Batch translation, rows = samples.
  nn::Matrix Generate(Direction direction, const nn::Matrix& rows) const;

  const nn::Network& generator(Direction d) const {
    return d == Direction::kLowToHigh ? gen_low_to_high_ : gen_high_to_low_;
  }
  nn::Network& gen_low_to_high() { return gen_low_to_high_; }
  nn::Network& gen_high_to_low() { return gen_high_to_low_; }
  nn::Network& disc_low() { return disc_low_; }
  nn::Network& disc_high() { return disc_high_; }
  const nn::Network& gen_low_to_high() const { return gen_low_to_high_; }
  const nn::Network& gen_high_to_low() const { return gen_high_to_low_; }
  const nn::Network& disc_low() const { return disc_low_; }
  const nn::Network& disc_high() const { return disc_high_; }
  const GanConfig& config() const { return config_; }
  const NormStats& norm_stats() const { return norm_stats_; }

  bool AllFinite() const;

  std::string ToJson() const;
  static CfGanModel FromJson(std::string_view text);
  void Save(const std::filesystem::path& path) const;
  static CfGanModel Load(const std::filesystem::path& path);

  friend bool operator==(const CfGanModel& a, const CfGanModel& b) {
    return a.gen_low_to_high_ == b.gen_low_to_high_ &&
           a.gen_high_to_low_ == b.gen_high_to_low_ &&
           a.disc_low_ == b.disc_low_ && a.disc_high_ == b.disc_high_ &&
           a.norm_stats_ == b.norm_stats_;
  }

 private:
  GanConfig config_;
  NormStats norm_stats_;
  nn::Network gen_low_to_high_;
  nn::Network gen_high_to_low_;
  nn::Network disc_low_;
  nn::Network disc_high_;
};

// Applies the generator; throws Error("invalid-input") on non-finite input.
FeatureVector Counterfactual(const CounterfactualGenerator& generator,
                             const FeatureVector& normalized,
                             Direction direction);

struct GeneratorLoss {
  double adversarial = 0.0;
  double cycle = 0.0;
  double counterfactual = 0.0;
  double identity = 0.0;
  double total = 0.0;
};

// Generator objective on one paired batch (rows = samples):
//   adversarial (least squares) + lambda_cycle * L1 cycle
//   + lambda_counterfactual * cross-entropy(clf(G(x)), target class)
//   + lambda_identity * L1 identity.
// Gradients w.r.t. both generators are accumulated when the pointers are set.
GeneratorLoss GeneratorObjective(const CfGanModel& model, const MlpModel& clf,
                                 const nn::Matrix& x_low,
                                 const nn::Matrix& x_high,
                                 nn::ParamSet* grad_low_to_high,
                                 nn::ParamSet* grad_high_to_low);

// Least-squares discriminator objective
//   0.5 * [mean (D(real) - 1)^2 + mean D(fake)^2], summed over both domains,
// with the fakes produced by the current generators.
double DiscriminatorObjective(const CfGanModel& model, const nn::Matrix& x_low,
                              const nn::Matrix& x_high,
                              nn::ParamSet* grad_disc_low,
                              nn::ParamSet* grad_disc_high);

struct GanEpochLoss {
  double discriminator = 0.0;
  GeneratorLoss generator;
};

struct GanTrainResult {
  CfGanModel model;
  std::vector<GanEpochLoss> trace;  // one entry per epoch (batch means)
};

// Alternating updates, one discriminator step then one generator step per
// batch. Both sets must be normalized with the classifier's NormStats.
// Throws Error("training-diverged") naming the epoch on non-finite losses.
GanTrainResult TrainGan(const Dataset& low_set, const Dataset& high_set,
                        const MlpModel& clf, const GanConfig& config);

// Fraction of samples whose counterfactual (away from the classifier's
// prediction) receives a different predicted class.
double FlipRate(const CounterfactualGenerator& generator,
                const ProbabilityModel& clf, const Dataset& eval_set);

// Samples the classifier assigns to `predicted`.
Dataset FilterByPrediction(const ProbabilityModel& clf, const Dataset& dataset,
                           EngagementClass predicted);

// Mean L1 norm of G_HL(G_LH(x)) - x over LOW samples and G_LH(G_HL(x)) - x
// over HIGH samples.
double MeanCycleL1(const CfGanModel& model, const Dataset& normalized);

// Mean L1 norm between every (LOW, HIGH) sample pair.
double MeanInterClassL1(const Dataset& normalized);

struct GanGradCheck {
  double gen_low_to_high = 0.0;
  double gen_high_to_low = 0.0;
  double disc_low = 0.0;
  double disc_high = 0.0;
};

// Backprop vs central differences (step 1e-4) on one batch for all four
// networks, `n_coords` random coordinates each.
GanGradCheck GradCheckGan(const CfGanModel& model, const MlpModel& clf,
                          const nn::Matrix& x_low, const nn::Matrix& x_high,
                          std::size_t n_coords, std::uint64_t seed);

}  // namespace engagecf
