#include <cmath>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "corpus_util.hpp"
#include "engagecf/classifier.hpp"
#include "test_util.hpp"

namespace engagecf {
namespace {

using testing::ErrorCode;
using testing::MakeCorpus;
using testing::RandomDataset;

NormStats UnitStats() {
  NormStats s;
  s.mean.fill(0.0);
  s.std.fill(1.0);
  return s;
}

MlpModel RandomModel(std::uint64_t seed, int hidden = 16) {
  MlpModel m(hidden, UnitStats());
  std::mt19937_64 rng(seed);
  m.network().Initialize(rng, 1.0);
  return m;
}

FeatureVector RandomVector(std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  FeatureVector v;
  for (std::size_t i = 0; i < kNumFeatures; ++i) v[i] = g(rng);
  return v;
}

struct ThresholdModel : ProbabilityModel {
  ClassProb Probabilities(const FeatureVector& x) const override {
    return x[0] > 0.0 ? ClassProb{{0.1, 0.9}} : ClassProb{{0.9, 0.1}};
  }
};

struct ConstantLow : ProbabilityModel {
  ClassProb Probabilities(const FeatureVector&) const override {
    return ClassProb{{0.7, 0.3}};
  }
};

TEST(Predict, ZeroWeightsGiveHalf) {
  MlpModel m(16, UnitStats());
  std::mt19937_64 rng(1);
  const ClassProb p = Predict(m, RandomVector(rng));
  EXPECT_EQ(p.p[0], 0.5);
  EXPECT_EQ(p.p[1], 0.5);
  EXPECT_EQ(p.Predicted(), EngagementClass::kLow);
}

TEST(Predict, ProbabilitiesSumToOne) {
  std::mt19937_64 rng(2);
  for (int rep = 0; rep < 200; ++rep) {
    const MlpModel m = RandomModel(rep);
    const ClassProb p = Predict(m, RandomVector(rng, 5.0));
    EXPECT_GE(p.p[0], 0.0);
    EXPECT_GE(p.p[1], 0.0);
    EXPECT_NEAR(p.p[0] + p.p[1], 1.0, 1e-9);
    EXPECT_EQ(p.Predicted(), p.p[1] > p.p[0] ? EngagementClass::kHigh
                                             : EngagementClass::kLow);
  }
}

TEST(Predict, HandBuiltSingleHiddenUnit) {
  MlpModel m(1, UnitStats());
  auto& P = m.network().params();
  std::array<double, kNumFeatures> w{};
  for (std::size_t i = 0; i < kNumFeatures; ++i) {
    w[i] = 0.05 * (static_cast<double>(i) - 8.0);
    P.weights[0](static_cast<Eigen::Index>(i), 0) = w[i];
  }
  P.biases[0](0) = 0.3;
  P.weights[1](0, 0) = 1.5;
  P.weights[1](0, 1) = -2.0;
  P.biases[1](0) = 0.1;
  P.biases[1](1) = -0.4;

  FeatureVector x;
  double z = 0.3;
  for (std::size_t i = 0; i < kNumFeatures; ++i) {
    x[i] = 0.1 * static_cast<double>(i % 5) - 0.2;
    z += w[i] * x[i];
  }
  const double h = std::tanh(z);
  const double l0 = 1.5 * h + 0.1, l1 = -2.0 * h - 0.4;
  const auto logits = m.Logits(x);
  EXPECT_NEAR(logits[0], l0, 1e-9);
  EXPECT_NEAR(logits[1], l1, 1e-9);
  const double p1 = 1.0 / (1.0 + std::exp(l0 - l1));
  EXPECT_NEAR(Predict(m, x).p[1], p1, 1e-12);
}

TEST(Predict, RejectsNonFinite) {
  const MlpModel m = RandomModel(3);
  FeatureVector x;
  x[4] = std::nan("");
  EXPECT_EQ(ErrorCode([&] { Predict(m, x); }), "invalid-input");
  x[4] = INFINITY;
  EXPECT_EQ(ErrorCode([&] { Predict(m, x); }), "invalid-input");
}

TEST(Softmax, ShiftInvariant) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 3.0);
  for (int rep = 0; rep < 100; ++rep) {
    const std::array<double, 2> l{g(rng), g(rng)};
    const double c = 100.0 * g(rng);
    const auto a = Softmax(l), b = Softmax({l[0] + c, l[1] + c});
    EXPECT_NEAR(a[0], b[0], 1e-12);
    EXPECT_NEAR(a[1], b[1], 1e-12);
  }
}

TEST(Predict, BatchMatchesSingle) {
  const MlpModel m = RandomModel(5);
  std::mt19937_64 rng(5);
  Dataset ds = RandomDataset(rng, 2, 10);
  const auto batch = m.ProbabilitiesBatch(ToMatrix(ds));
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const ClassProb p = m.Probabilities(ds.samples[i].features);
    EXPECT_NEAR(batch[i].p[0], p.p[0], 1e-12);
  }
}

TEST(ModelJson, RoundTrip) {
  MlpModel m = RandomModel(6);
  const MlpModel back = MlpModel::FromJson(m.ToJson());
  EXPECT_EQ(back, m);
  EXPECT_NE(m.ToJson().find("\"mlp-v1\""), std::string::npos);
}

TEST(ModelJson, RejectsWrongVersion) {
  std::string text = RandomModel(6).ToJson();
  text.replace(text.find("mlp-v1"), 6, "mlp-v9");
  EXPECT_EQ(ErrorCode([&] { MlpModel::FromJson(text); }), "invalid-model");
}

TEST(GradCheck, RandomSmallModel) {
  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 5; ++rep) {
    const MlpModel m = RandomModel(100 + rep, 6);
    LabeledSample s;
    s.features = RandomVector(rng);
    s.label = rep % 2 ? EngagementClass::kHigh : EngagementClass::kLow;
    EXPECT_LT(GradCheck(m, s, 0, rep), 1e-3);
  }
}

TEST(GradCheck, DefaultModelHundredCoordinates) {
  std::mt19937_64 rng(8);
  const MlpModel m = RandomModel(8);
  LabeledSample s;
  s.features = RandomVector(rng);
  EXPECT_LT(GradCheck(m, s, 100, 8), 1e-3);
}

// Two copies of one input with opposite labels: the mean loss is stationary
// at p = (0.5, 0.5).
TEST(GradCheck, SymmetricZeroGradientPoint) {
  MlpModel m(4, UnitStats());
  std::mt19937_64 rng(9);
  const FeatureVector v = RandomVector(rng);
  nn::Matrix x(2, static_cast<Eigen::Index>(kNumFeatures));
  for (std::size_t j = 0; j < kNumFeatures; ++j) x(0, j) = x(1, j) = v[j];
  const std::vector<int> y{0, 1};
  nn::ParamSet grads = m.network().params().ZerosLike();
  CrossEntropyLoss(m, x, y, &grads);
  auto& params = m.network().params();
  for (std::size_t i = 0; i < params.Count(); ++i) {
    const double old = params.At(i);
    params.At(i) = old + 1e-4;
    const double up = CrossEntropyLoss(m, x, y, nullptr);
    params.At(i) = old - 1e-4;
    const double down = CrossEntropyLoss(m, x, y, nullptr);
    params.At(i) = old;
    EXPECT_NEAR(grads.At(i), 0.0, 1e-12);
    EXPECT_NEAR((up - down) / 2e-4, 0.0, 1e-8);
  }
}

TEST(Train, ZeroLearningRateKeepsInitialization) {
  std::mt19937_64 rng(10);
  Dataset ds = RandomDataset(rng, 2, 20);
  ds = NormalizeDataset(ds, FitNormalizer(ds));
  TrainConfig c;
  c.learning_rate = 0.0;
  c.epochs = 3;
  const auto res = TrainClassifier(ds, c);
  MlpModel init(c.hidden_size, *ds.norm_stats);
  std::mt19937_64 init_rng(c.seed);
  init.network().Initialize(init_rng, c.weight_init_scale);
  EXPECT_EQ(res.model.network().params(), init.network().params());
}

TEST(Train, Deterministic) {
  std::mt19937_64 rng(11);
  Dataset ds = RandomDataset(rng, 3, 20);
  ds = NormalizeDataset(ds, FitNormalizer(ds));
  TrainConfig c;
  c.epochs = 5;
  EXPECT_EQ(TrainClassifier(ds, c).model, TrainClassifier(ds, c).model);
  EXPECT_EQ(TrainClassifier(ds, c).loss_trace, TrainClassifier(ds, c).loss_trace);
}

TEST(Train, RejectsBadInput) {
  std::mt19937_64 rng(12);
  Dataset ds = RandomDataset(rng, 2, 5);
  EXPECT_EQ(ErrorCode([&] { TrainClassifier(ds, TrainConfig{}); }), "not-normalized");
  ds = NormalizeDataset(ds, FitNormalizer(ds));
  Dataset one = ds.Filter(EngagementClass::kLow);
  EXPECT_EQ(ErrorCode([&] { TrainClassifier(one, TrainConfig{}); }), "degenerate-labels");
  TrainConfig c;
  c.batch_size = 0;
  EXPECT_EQ(ErrorCode([&] { TrainClassifier(ds, c); }), "invalid-config");
}

TEST(Train, SeparableSyntheticData) {
  const auto c = MakeCorpus(12, 0.0, 31);
  const auto res = TrainClassifier(c.train, TrainConfig{});
  EXPECT_LT(res.loss_trace.back(), res.loss_trace.front());
  EXPECT_GE(ComputeConfusionMatrix(res.model, c.test).Accuracy(), 0.95);
}

TEST(Train, NineteenSessionsThirteenSixNoLeakage) {
  RunConfig config;
  config.sessions = 19;
  config.train_fraction = 13.0 / 19.0;
  config.profile.duration_s = 60.0;
  const Dataset raw = ExtractCorpus(SynthesizeCorpus(config), config);
  const SessionSplit split = ChooseSplit(raw, config);
  ASSERT_EQ(split.train.size(), 13u);
  ASSERT_EQ(split.test.size(), 6u);
  auto [train, test] = ApplySplit(raw, split);
  std::set<std::string> train_ids;
  for (const auto& s : train.samples) train_ids.insert(s.session_id);
  for (const auto& s : test.samples) EXPECT_EQ(train_ids.count(s.session_id), 0u);
  const NormStats st = FitNormalizer(train);
  TrainConfig tc;
  tc.epochs = 30;
  const auto res = TrainClassifier(NormalizeDataset(train, st), tc);
  EXPECT_GT(ComputeConfusionMatrix(res.model, NormalizeDataset(test, st)).Accuracy(), 0.8);
}

TEST(ConfusionMatrix, PerfectPredictor) {
  Dataset ds;
  for (int i = 0; i < 10; ++i) {
    LabeledSample s;
    s.features[0] = i % 3 ? 1.0 : -1.0;
    s.label = i % 3 ? EngagementClass::kHigh : EngagementClass::kLow;
    ds.samples.push_back(s);
  }
  const auto cm = ComputeConfusionMatrix(ThresholdModel{}, ds);
  EXPECT_EQ(cm.counts[0][0] + cm.counts[1][1], 10u);
  EXPECT_EQ(cm.Accuracy(), 1.0);
}

TEST(ConfusionMatrix, ConstantLowPredictor) {
  std::mt19937_64 rng(13);
  const Dataset ds = RandomDataset(rng, 2, 15);
  const auto cm = ComputeConfusionMatrix(ConstantLow{}, ds);
  EXPECT_EQ(cm.counts[0][1], 0u);
  EXPECT_EQ(cm.counts[1][1], 0u);
  EXPECT_EQ(cm.Total(), ds.size());
}

TEST(ConfusionMatrix, MatchesBruteForceLoop) {
  std::mt19937_64 rng(14);
  const Dataset ds = RandomDataset(rng, 4, 25);
  const MlpModel m = RandomModel(14);
  std::array<std::array<std::size_t, 2>, 2> counts{};
  for (const auto& s : ds.samples) {
    const auto l = m.Logits(s.features);
    const int pred = l[1] > l[0] ? 1 : 0;
    ++counts[ClassIndex(s.label)][pred];
  }
  EXPECT_EQ(ComputeConfusionMatrix(m, ds).counts, counts);
}

}  // namespace
}  // namespace engagecf
