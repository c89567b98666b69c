#include "engagecf/evalx.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "engagecf/error.hpp"

namespace engagecf {

double Pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw Error("invalid-argument", "pearson inputs differ in length");
  }
  if (x.size() < 2) {
    throw Error("invalid-argument", "pearson needs at least 2 points");
  }
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw Error("zero-variance", "pearson is undefined for a constant sequence");
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

Strength Categorize(double r) {
  const double a = std::abs(r);
  if (a >= kStrongThreshold) return Strength::kStrong;
  if (a >= kModerateThreshold) return Strength::kModerate;
  return Strength::kWeak;
}

std::string CategoryLabel(double r) {
  std::string out;
  switch (Categorize(r)) {
    case Strength::kStrong: out = "strong"; break;
    case Strength::kModerate: out = "moderate"; break;
    case Strength::kWeak: out = "weak"; break;
  }
  return out + (r >= 0.0 ? "-positive" : "-negative");
}

double CorrelationReport::MedianR() const {
  std::vector<double> rs;
  for (const auto& f : features) {
    if (f.r) rs.push_back(*f.r);
  }
  if (rs.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(rs.begin(), rs.end());
  const std::size_t mid = rs.size() / 2;
  return rs.size() % 2 == 1 ? rs[mid] : 0.5 * (rs[mid - 1] + rs[mid]);
}

std::size_t CorrelationReport::CountAbsAtLeast(double threshold) const {
  return static_cast<std::size_t>(
      std::count_if(features.begin(), features.end(), [&](const auto& f) {
        return f.r && std::abs(*f.r) >= threshold;
      }));
}

std::string CorrelationReport::ToJson() const {
  Json feats = Json::array();
  for (const auto& f : features) {
    feats.push_back({{"feature_name", FeatureName(f.feature)},
                     {"r", f.r ? Json(*f.r) : Json(nullptr)},
                     {"category", f.category},
                     {"n", f.n},
                     {"mean_signed_importance", f.mean_signed_importance},
                     {"mean_abs_delta", f.mean_abs_delta}});
  }
  const double median = MedianR();
  Json j{{"dataset", dataset_id},
         {"n_samples", n_samples},
         {"flip_rate", flip_rate},
         {"lime",
          {{"n_samples", lime.n_samples},
           {"kernel_width", lime.kernel_width},
           {"seed", lime.seed},
           {"ridge", lime.ridge}}},
         {"thresholds",
          {{"strong", kStrongThreshold}, {"moderate", kModerateThreshold}}},
         {"features", feats},
         {"median_r", std::isnan(median) ? Json(nullptr) : Json(median)},
         {"n_abs_r_at_least_moderate", CountAbsAtLeast(kModerateThreshold)}};
  return j.dump(2) + "\n";
}

std::string CorrelationReport::RenderTable() const {
  std::vector<const FeatureCorrelation*> rows;
  for (const auto& f : features) rows.push_back(&f);
  std::stable_sort(rows.begin(), rows.end(), [](const auto* a, const auto* b) {
    const double ra = a->r ? *a->r : -2.0;
    const double rb = b->r ? *b->r : -2.0;
    return ra > rb;
  });
  std::ostringstream out;
  out << "importance vs |change| correlation (" << n_samples << " samples";
  if (!dataset_id.empty()) out << ", " << dataset_id;
  out << ")\n";
  char buf[160];
  for (const auto* f : rows) {
    if (!f->r) {
      std::snprintf(buf, sizeof(buf), "%-10s   undef  %-17s\n",
                    std::string(FeatureName(f->feature)).c_str(), "undefined");
      out << buf;
      continue;
    }
    const double r = *f->r;
    const int len = static_cast<int>(std::lround(std::abs(r) * 20.0));
    std::string bar(static_cast<std::size_t>(len), r >= 0.0 ? '#' : '-');
    std::snprintf(buf, sizeof(buf), "%-10s %+7.3f  %-17s %s\n",
                  std::string(FeatureName(f->feature)).c_str(), r,
                  f->category.c_str(), bar.c_str());
    out << buf;
  }
  std::snprintf(buf, sizeof(buf), "median r %+.3f, |r| >= %.1f: %zu of %zu, flip rate %.4f\n",
                MedianR(), kModerateThreshold, CountAbsAtLeast(kModerateThreshold),
                kNumFeatures, flip_rate);
  out << buf;
  return out.str();
}

CorrelationReport ImportanceChangeCorrelation(
    const CounterfactualGenerator& generator, const ProbabilityModel& clf,
    const std::array<double, kNumFeatures>& perturbation_std,
    const Dataset& eval_set, const LimeConfig& lime, std::string dataset_id) {
  if (eval_set.size() < 2) {
    throw Error("invalid-argument", "correlation needs at least 2 samples");
  }
  CorrelationReport report;
  report.dataset_id = std::move(dataset_id);
  report.n_samples = eval_set.size();
  report.lime = lime;

  std::size_t flipped = 0;
  std::array<double, kNumFeatures> signed_importance_sum{};
  for (std::size_t i = 0; i < eval_set.size(); ++i) {
    const FeatureVector& x = eval_set.samples[i].features;
    const EngagementClass before = Predict(clf, x).Predicted();
    const FeatureVector cf = Counterfactual(generator, x, DirectionAwayFrom(before));
    if (Predict(clf, cf).Predicted() != before) ++flipped;

    LimeConfig cfg = lime;
    cfg.seed = lime.seed + i;
    const ImportanceScores scores = LimeExplain(clf, x, perturbation_std, cfg);

    std::array<double, kNumFeatures> imp{}, delta{};
    for (std::size_t j = 0; j < kNumFeatures; ++j) {
      imp[j] = std::abs(scores.coefficients[j]);
      delta[j] = std::abs(cf[j] - x[j]);
      signed_importance_sum[j] += scores.coefficients[j];
    }
    report.abs_importance.push_back(imp);
    report.abs_delta.push_back(delta);
  }
  report.flip_rate = static_cast<double>(flipped) / static_cast<double>(eval_set.size());

  const double n = static_cast<double>(eval_set.size());
  std::vector<double> xs(eval_set.size()), ys(eval_set.size());
  for (std::size_t j = 0; j < kNumFeatures; ++j) {
    double delta_sum = 0.0;
    for (std::size_t i = 0; i < eval_set.size(); ++i) {
      xs[i] = report.abs_importance[i][j];
      ys[i] = report.abs_delta[i][j];
      delta_sum += ys[i];
    }
    FeatureCorrelation& f = report.features[j];
    f.feature = j;
    f.n = eval_set.size();
    f.mean_signed_importance = signed_importance_sum[j] / n;
    f.mean_abs_delta = delta_sum / n;
    try {
      f.r = Pearson(xs, ys);
      f.category = CategoryLabel(*f.r);
    } catch (const Error& e) {
      if (e.code() != "zero-variance") throw;
      f.r.reset();
      f.category = "undefined";
    }
  }
  return report;
}

CorrelationReport ImportanceChangeCorrelation(
    const CounterfactualGenerator& generator, const MlpModel& clf,
    const Dataset& eval_set, const LimeConfig& lime, std::string dataset_id) {
  return ImportanceChangeCorrelation(generator, clf,
                                     PerturbationStd(clf.norm_stats()), eval_set,
                                     lime, std::move(dataset_id));
}

}  // namespace engagecf
