#include "engagecf/explain.hpp"

#include <random>
#include <vector>

#include "engagecf/error.hpp"

namespace engagecf {

void ValidateLimeConfig(const LimeConfig& c) {
  if (c.n_samples < 100) {
    throw Error("invalid-config", "lime n_samples must be at least 100");
  }
  if (!(c.kernel_width > 0.0)) {
    throw Error("invalid-config", "lime kernel_width must be positive");
  }
  if (!(c.ridge >= 0.0)) {
    throw Error("invalid-config", "lime ridge must be non-negative");
  }
}

std::array<double, kNumFeatures> PerturbationStd(const NormStats& stats) {
  std::array<double, kNumFeatures> out{};
  for (std::size_t j = 0; j < kNumFeatures; ++j) {
    out[j] = stats.IsClamped(j) ? 0.0 : 1.0;
  }
  return out;
}

ImportanceScores LimeExplain(
    const ProbabilityModel& clf, const FeatureVector& normalized,
    const std::array<double, kNumFeatures>& perturbation_std,
    const LimeConfig& config) {
  ValidateLimeConfig(config);
  if (!normalized.AllFinite()) {
    throw Error("invalid-input", "feature vector has non-finite entries");
  }

  ImportanceScores scores;
  scores.config = config;
  scores.target = Predict(clf, normalized).Predicted();
  const int target = ClassIndex(scores.target);

  std::vector<std::size_t> active;
  for (std::size_t j = 0; j < kNumFeatures; ++j) {
    if (perturbation_std[j] > 0.0) active.push_back(j);
  }

  const auto n = static_cast<Eigen::Index>(config.n_samples);
  const auto k = static_cast<Eigen::Index>(active.size());
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  // Standardized offsets; all 18 columns are drawn so that the draw order
  // does not depend on which features are active.
  Eigen::MatrixXd offsets(n, static_cast<Eigen::Index>(kNumFeatures));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < offsets.cols(); ++j) offsets(i, j) = gauss(rng);
  }

  nn::Matrix points(n, static_cast<Eigen::Index>(kNumFeatures));
  Eigen::VectorXd weights(n);
  const double width_sq = config.kernel_width * config.kernel_width;
  for (Eigen::Index i = 0; i < n; ++i) {
    double d2 = 0.0;
    for (std::size_t j = 0; j < kNumFeatures; ++j) {
      const double delta =
          perturbation_std[j] * offsets(i, static_cast<Eigen::Index>(j));
      points(i, static_cast<Eigen::Index>(j)) = normalized[j] + delta;
      d2 += delta * delta;
    }
    weights(i) = std::exp(-d2 / width_sq);
  }
  const auto probs = clf.ProbabilitiesBatch(points);

  // Design: intercept column, then the active standardized offsets.
  Eigen::MatrixXd design(n, k + 1);
  Eigen::VectorXd target_prob(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    design(i, 0) = 1.0;
    for (Eigen::Index a = 0; a < k; ++a) {
      design(i, a + 1) = offsets(i, static_cast<Eigen::Index>(active[static_cast<std::size_t>(a)]));
    }
    target_prob(i) = probs[static_cast<std::size_t>(i)].p[static_cast<std::size_t>(target)];
  }

  const double weight_sum = weights.sum();
  if (!(weight_sum > 0.0) || !std::isfinite(weight_sum)) {
    throw Error("singular-surrogate",
                "all perturbation weights vanished; widen the kernel or raise n_samples");
  }
  const Eigen::MatrixXd weighted = design.array().colwise() * weights.array();
  Eigen::MatrixXd gram = design.transpose() * weighted;
  for (Eigen::Index a = 1; a <= k; ++a) gram(a, a) += config.ridge;
  const Eigen::VectorXd rhs = weighted.transpose() * target_prob;

  const Eigen::LDLT<Eigen::MatrixXd> solver(gram);
  if (solver.info() != Eigen::Success || !(solver.rcond() > 1e-14)) {
    throw Error("singular-surrogate",
                "weighted surrogate system is singular; raise n_samples");
  }
  const Eigen::VectorXd beta = solver.solve(rhs);
  if (!beta.allFinite()) {
    throw Error("singular-surrogate", "surrogate solution is not finite");
  }
  scores.intercept = beta(0);
  for (Eigen::Index a = 0; a < k; ++a) {
    scores.coefficients[active[static_cast<std::size_t>(a)]] = beta(a + 1);
  }
  return scores;
}

ImportanceScores LimeExplain(const MlpModel& clf,
                             const FeatureVector& normalized,
                             const LimeConfig& config) {
  return LimeExplain(clf, normalized, PerturbationStd(clf.norm_stats()), config);
}

Json ImportanceScores::ToJsonValue() const {
  Json scores = Json::array();
  for (std::size_t j = 0; j < kNumFeatures; ++j) {
    scores.push_back({{"feature_name", FeatureName(j)},
                      {"coefficient", coefficients[j]}});
  }
  return Json{{"scores", scores},
              {"metadata",
               {{"n_samples", config.n_samples},
                {"kernel_width", config.kernel_width},
                {"seed", config.seed},
                {"ridge", config.ridge},
                {"target_class", ClassLabel(target)},
                {"intercept", intercept}}}};
}

ImportanceScores ImportanceScores::FromJsonValue(const Json& j) {
  constexpr std::string_view what = "importance scores";
  ImportanceScores out;
  const Json& meta = RequireField(j, "metadata", what);
  out.config.n_samples = static_cast<int>(RequireNumber(meta, "n_samples", what));
  out.config.kernel_width = RequireNumber(meta, "kernel_width", what);
  out.config.seed = RequireField(meta, "seed", what).get<std::uint64_t>();
  out.config.ridge = RequireNumber(meta, "ridge", what);
  out.target = ParseClassLabel(RequireString(meta, "target_class", what));
  out.intercept = RequireNumber(meta, "intercept", what);
  const Json& scores = RequireField(j, "scores", what);
  if (!scores.is_array() || scores.size() != kNumFeatures) {
    throw Error("invalid-json", "importance scores need 18 entries");
  }
  for (const Json& s : scores) {
    const auto idx = FeatureIndex(RequireString(s, "feature_name", what));
    if (!idx) throw Error("invalid-json", "unknown feature in importance scores");
    out.coefficients[*idx] = RequireNumber(s, "coefficient", what);
  }
  return out;
}

}  // namespace engagecf
