#include <cmath>
#include <map>
#include <random>

#include <gtest/gtest.h>

#include "engagecf/evalx.hpp"
#include "test_util.hpp"

namespace engagecf {
namespace {

using testing::ErrorCode;
using testing::RandomDataset;

double Textbook(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  long double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const long double mx = sx / n, my = sy / n;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  return static_cast<double>(sxy / std::sqrt(sxx * syy));
}

NormStats UnitStats() {
  NormStats s;
  s.std.fill(1.0);
  return s;
}

MlpModel SmallModel(std::uint64_t seed) {
  MlpModel m(8, UnitStats());
  std::mt19937_64 rng(seed);
  m.network().Initialize(rng, 0.5);
  return m;
}

Dataset EvalSet(std::uint64_t seed, int n) {
  std::mt19937_64 rng(seed);
  Dataset ds = RandomDataset(rng, 1, n);
  for (auto& s : ds.samples)
    for (std::size_t j = 0; j < kNumFeatures; ++j) s.features[j] /= 3.0;
  ds.norm_stats = UnitStats();
  return ds;
}

using Key = std::array<double, kNumFeatures>;

// Generators that recover the sample's position in the evaluation set.
struct IndexedGenerator : CounterfactualGenerator {
  std::map<Key, std::size_t> index;
  explicit IndexedGenerator(const Dataset& ds) {
    for (std::size_t i = 0; i < ds.size(); ++i) index[ds.samples[i].features.values()] = i;
  }
  std::size_t IndexOf(const FeatureVector& x) const { return index.at(x.values()); }
};

// |delta_j| = 2 |LIME coefficient_j| for the same (instance, seed).
struct PerfectGenerator : IndexedGenerator {
  const ProbabilityModel* clf;
  LimeConfig lime;
  PerfectGenerator(const Dataset& ds, const ProbabilityModel& m, LimeConfig l)
      : IndexedGenerator(ds), clf(&m), lime(l) {}
  FeatureVector Translate(const FeatureVector& x, Direction) const override {
    LimeConfig c = lime;
    c.seed = lime.seed + IndexOf(x);
    std::array<double, kNumFeatures> ones;
    ones.fill(1.0);
    const auto s = LimeExplain(*clf, x, ones, c);
    FeatureVector y = x;
    for (std::size_t j = 0; j < kNumFeatures; ++j)
      y[j] += (j % 2 ? 2.0 : -2.0) * std::abs(s.coefficients[j]);
    return y;
  }
};

struct RandomDeltaGenerator : IndexedGenerator {
  using IndexedGenerator::IndexedGenerator;
  FeatureVector Translate(const FeatureVector& x, Direction) const override {
    std::mt19937_64 rng(1000 + IndexOf(x));
    std::uniform_real_distribution<double> u(0.5, 1.5);
    FeatureVector y = x;
    for (std::size_t j = 0; j < kNumFeatures; ++j) y[j] += u(rng);
    return y;
  }
};

struct ShiftGenerator : CounterfactualGenerator {
  FeatureVector Translate(const FeatureVector& x, Direction d) const override {
    FeatureVector y = x;
    for (std::size_t j = 0; j < kNumFeatures; ++j)
      y[j] += (d == Direction::kLowToHigh ? 0.3 : -0.3) * static_cast<double>(j % 3) * x[j];
    return y;
  }
};

TEST(Pearson, Examples) {
  const std::vector<double> a{1, 2, 3}, b{3, 2, 1};
  EXPECT_DOUBLE_EQ(Pearson(a, a), 1.0);
  EXPECT_DOUBLE_EQ(Pearson(a, b), -1.0);
  // sxy = 4, sxx = syy = 5
  EXPECT_NEAR(Pearson(std::vector<double>{1, 2, 3, 4}, std::vector<double>{1, 3, 2, 4}),
              0.8, 1e-15);
}

TEST(Pearson, MatchesTextbookFormula) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_int_distribution<int> len(2, 200);
  for (int rep = 0; rep < 500; ++rep) {
    const int n = len(rng);
    std::vector<double> x(n), y(n);
    for (int i = 0; i < n; ++i) {
      x[i] = g(rng);
      y[i] = 0.5 * x[i] + g(rng);
    }
    EXPECT_NEAR(Pearson(x, y), Textbook(x, y), 1e-12);
  }
}

TEST(Pearson, SymmetricAndAffineInvariant) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> x(30), y(30), xa(30), ya(30);
    for (int i = 0; i < 30; ++i) {
      x[i] = g(rng);
      y[i] = g(rng) - x[i];
      xa[i] = 3.5 * x[i] + 2.0;
      ya[i] = 0.25 * y[i] - 7.0;
    }
    const double r = Pearson(x, y);
    EXPECT_EQ(r, Pearson(y, x));
    EXPECT_NEAR(Pearson(xa, ya), r, 1e-12);
    EXPECT_GE(r, -1.0);
    EXPECT_LE(r, 1.0);
  }
}

TEST(Pearson, Errors) {
  const std::vector<double> c{2, 2, 2}, a{1, 2, 3};
  EXPECT_EQ(ErrorCode([&] { Pearson(c, a); }), "zero-variance");
  EXPECT_EQ(ErrorCode([&] { Pearson(a, std::vector<double>{1, 2}); }), "invalid-argument");
  EXPECT_EQ(ErrorCode([&] { Pearson(std::vector<double>{1}, std::vector<double>{1}); }),
            "invalid-argument");
}

TEST(Categories, ThresholdsPartitionTheRange) {
  EXPECT_EQ(CategoryLabel(0.6), "strong-positive");
  EXPECT_EQ(CategoryLabel(0.5999), "moderate-positive");
  EXPECT_EQ(CategoryLabel(0.4), "moderate-positive");
  EXPECT_EQ(CategoryLabel(0.3999), "weak-positive");
  EXPECT_EQ(CategoryLabel(0.0), "weak-positive");
  EXPECT_EQ(CategoryLabel(-0.45), "moderate-negative");
  EXPECT_EQ(CategoryLabel(-1.0), "strong-negative");
  for (int i = -1000; i <= 1000; ++i) {
    const double r = i / 1000.0, a = std::abs(r);
    const Strength s = Categorize(r);
    const int hits = (s == Strength::kStrong) + (s == Strength::kModerate) + (s == Strength::kWeak);
    EXPECT_EQ(hits, 1);
    EXPECT_EQ(s == Strength::kStrong, a >= 0.6);
    EXPECT_EQ(s == Strength::kModerate, a >= 0.4 && a < 0.6);
  }
}

TEST(ImportanceChangeCorrelation, PlantedPerfectCorrelation) {
  const MlpModel clf = SmallModel(4);
  const Dataset ds = EvalSet(4, 40);
  LimeConfig lime;
  lime.n_samples = 300;
  const PerfectGenerator gen(ds, clf, lime);
  const auto rep = ImportanceChangeCorrelation(gen, clf, ds, lime);
  for (const auto& f : rep.features) {
    ASSERT_TRUE(f.r.has_value());
    EXPECT_NEAR(*f.r, 1.0, 1e-12) << FeatureName(f.feature);
    EXPECT_EQ(f.category, "strong-positive");
  }
  EXPECT_NEAR(rep.MedianR(), 1.0, 1e-12);
  EXPECT_EQ(rep.CountAbsAtLeast(0.4), 18u);
}

TEST(ImportanceChangeCorrelation, IndependentDeltasGiveWeakR) {
  const MlpModel clf = SmallModel(5);
  const Dataset ds = EvalSet(5, 200);
  LimeConfig lime;
  lime.n_samples = 300;
  const RandomDeltaGenerator gen(ds);
  const auto rep = ImportanceChangeCorrelation(gen, clf, ds, lime);
  for (const auto& f : rep.features) {
    ASSERT_TRUE(f.r.has_value());
    EXPECT_LT(std::abs(*f.r), 0.3) << FeatureName(f.feature);
  }
}

TEST(ImportanceChangeCorrelation, MatchesBruteForceOracle) {
  const MlpModel clf = SmallModel(6);
  const Dataset ds = EvalSet(6, 50);
  LimeConfig lime;
  lime.n_samples = 200;
  lime.seed = 17;
  const ShiftGenerator gen;
  const auto rep = ImportanceChangeCorrelation(gen, clf, ds, lime, "oracle");

  std::array<double, kNumFeatures> ones;
  ones.fill(1.0);
  std::vector<std::array<double, kNumFeatures>> imp, del;
  std::size_t flips = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const FeatureVector& x = ds.samples[i].features;
    const auto l = clf.Logits(x);
    const bool high = l[1] > l[0];
    const FeatureVector cf =
        gen.Translate(x, high ? Direction::kHighToLow : Direction::kLowToHigh);
    const auto lc = clf.Logits(cf);
    flips += (lc[1] > lc[0]) != high;
    LimeConfig c = lime;
    c.seed = 17 + i;
    const auto s = LimeExplain(clf, x, ones, c);
    std::array<double, kNumFeatures> a{}, d{};
    for (std::size_t j = 0; j < kNumFeatures; ++j) {
      a[j] = std::abs(s.coefficients[j]);
      d[j] = std::abs(cf[j] - x[j]);
    }
    imp.push_back(a);
    del.push_back(d);
  }
  EXPECT_EQ(rep.abs_importance, imp);
  EXPECT_EQ(rep.abs_delta, del);
  EXPECT_EQ(rep.flip_rate, static_cast<double>(flips) / ds.size());
  for (std::size_t j = 0; j < kNumFeatures; ++j) {
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      xs.push_back(imp[i][j]);
      ys.push_back(del[i][j]);
    }
    if (j % 3 == 0) {
      EXPECT_FALSE(rep.features[j].r.has_value());
      EXPECT_EQ(rep.features[j].category, "undefined");
    } else {
      ASSERT_TRUE(rep.features[j].r.has_value());
      EXPECT_EQ(*rep.features[j].r, Pearson(xs, ys));
    }
  }
}

TEST(CorrelationReport, JsonAndTable) {
  const MlpModel clf = SmallModel(7);
  const Dataset ds = EvalSet(7, 20);
  LimeConfig lime;
  lime.n_samples = 150;
  const auto rep = ImportanceChangeCorrelation(ShiftGenerator{}, clf, ds, lime, "set");
  const Json j = ParseJson(rep.ToJson(), "report");
  EXPECT_EQ(j.at("n_samples").get<std::size_t>(), 20u);
  ASSERT_EQ(j.at("features").size(), 18u);
  const std::string table = rep.RenderTable();
  for (std::size_t i = 0; i < kNumFeatures; ++i)
    EXPECT_NE(table.find(std::string(FeatureName(i))), std::string::npos);
  for (const auto& f : rep.features)
    if (f.r) EXPECT_LE(std::abs(*f.r), 1.0);
}

TEST(ImportanceChangeCorrelation, NeedsTwoSamples) {
  const MlpModel clf = SmallModel(8);
  const Dataset ds = EvalSet(8, 1);
  EXPECT_EQ(ErrorCode([&] { ImportanceChangeCorrelation(ShiftGenerator{}, clf, ds, LimeConfig{}); }),
            "invalid-argument");
}

}  // namespace
}  // namespace engagecf
