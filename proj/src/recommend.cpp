#include "engagecf/recommend.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "engagecf/error.hpp"

namespace engagecf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string_view ConditionName(ChangeCondition c) {
  switch (c) {
    case ChangeCondition::kIncrease:
      return "increase";
    case ChangeCondition::kDecrease:
      return "decrease";
    case ChangeCondition::kAny:
      break;
  }
  return "any";
}

ChangeCondition ParseCondition(std::string_view s, std::string_view feature) {
  if (s == "increase") return ChangeCondition::kIncrease;
  if (s == "decrease") return ChangeCondition::kDecrease;
  if (s == "any") return ChangeCondition::kAny;
  throw Error("invalid-templates", "feature " + std::string(feature) +
                                       ": unknown condition '" +
                                       std::string(s) + "'");
}

bool ConditionMatches(ChangeCondition c, double change) {
  switch (c) {
    case ChangeCondition::kIncrease:
      return change > 0.0;
    case ChangeCondition::kDecrease:
      return change < 0.0;
    case ChangeCondition::kAny:
      break;
  }
  return true;
}

Json BoundToJson(double v) {
  if (std::isinf(v)) return nullptr;
  return v;
}

double BoundFromJson(const Json& bin, const char* key, double unbounded,
                     std::string_view feature) {
  if (!bin.contains(key) || bin.at(key).is_null()) return unbounded;
  if (!bin.at(key).is_number()) {
    throw Error("invalid-templates", "feature " + std::string(feature) +
                                         ": '" + key +
                                         "' must be a number or null");
  }
  return bin.at(key).get<double>();
}

}  // namespace

std::vector<FeatureDelta> TopKChanges(const FeatureVector& original,
                                      const FeatureVector& counterfactual,
                                      int k, const NormStats& stats) {
  if (k < 1 || k > static_cast<int>(kNumFeatures)) {
    throw Error("invalid-argument",
                "k must lie in [1, 18], got " + std::to_string(k));
  }
  std::vector<FeatureDelta> all(kNumFeatures);
  for (std::size_t i = 0; i < kNumFeatures; ++i) {
    FeatureDelta& d = all[i];
    d.feature = i;
    d.original = original[i];
    d.counterfactual = counterfactual[i];
    d.change = counterfactual[i] - original[i];
    d.rank_key = std::abs(d.change) / stats.std[i];
  }
  std::stable_sort(all.begin(), all.end(),
                   [](const FeatureDelta& a, const FeatureDelta& b) {
                     return a.rank_key > b.rank_key;
                   });
  all.resize(static_cast<std::size_t>(k));
  return all;
}

std::pair<double, double> FeatureRange(std::size_t feature) {
  switch (static_cast<Feature>(feature)) {
    case Feature::VAL_F:
      return {-1.0, 1.0};
    case Feature::GZ_DR:
    case Feature::AM_CR:
    case Feature::HD_TH:
    case Feature::TN_HD:
      return {0.0, 1.0};
    case Feature::YROT_LE:
    case Feature::YROT_RE:
      return {-std::numbers::pi, std::numbers::pi};
    case Feature::XROT_LE:
    case Feature::XROT_RE:
      return {0.0, std::numbers::pi};
    default:
      return {0.0, kInf};
  }
}

void ValidateTemplates(const TemplateConfig& templates) {
  for (const auto& [feature, bins] : templates.bins) {
    if (feature >= kNumFeatures) {
      throw Error("invalid-templates",
                  "feature index " + std::to_string(feature) + " out of range");
    }
    const std::string name(FeatureName(feature));
    auto fail = [&](const std::string& why) {
      throw Error("invalid-templates", "feature " + name + ": " + why);
    };
    if (bins.empty()) fail("no bins");
    for (std::size_t b = 0; b < bins.size(); ++b) {
      const TemplateBin& bin = bins[b];
      if (std::isnan(bin.lower) || std::isnan(bin.upper) ||
          !(bin.lower < bin.upper)) {
        fail("bin " + std::to_string(b) + " has an empty interval");
      }
      if (bin.text.empty()) fail("bin " + std::to_string(b) + " has no text");
      if (b > 0) {
        if (bin.lower < bins[b - 1].upper) fail("overlapping bins");
        if (bin.lower > bins[b - 1].upper) fail("gap between bins");
      }
    }
    const auto [lo, hi] = FeatureRange(feature);
    if (bins.front().lower > lo) fail("bins do not reach the range minimum");
    const double top = bins.back().upper;
    if (!(std::isinf(top) || top > hi)) {
      fail("bins do not reach the range maximum");
    }
  }
}

const TemplateConfig& DefaultTemplates() {
  static const TemplateConfig config = [] {
    using C = ChangeCondition;
    auto f = [](Feature x) { return static_cast<std::size_t>(x); };
    TemplateConfig t;
    t.bins[f(Feature::VAL_F)] = {
        {-kInf, 0.1, C::kIncrease,
         "try to show a more positive facial expression"},
        {0.1, kInf, C::kAny, "keep your friendly facial expression"}};
    t.bins[f(Feature::GZ_DR)] = {
        {-kInf, 0.5, C::kIncrease,
         "try to look at your interlocutor more often"},
        {0.5, 0.85, C::kIncrease, "try to hold eye contact a little longer"},
        {0.85, kInf, C::kAny, "keep up your eye contact"}};
    t.bins[f(Feature::HD_AC)] = {
        {-kInf, 0.15, C::kIncrease, "try to use more nonverbal feedback"},
        {0.15, 0.5, C::kAny,
         "keep giving nonverbal feedback such as nodding"},
        {0.5, kInf, C::kDecrease,
         "try to keep your attention on your interlocutor"}};
    t.bins[f(Feature::AM_CR)] = {
        {-kInf, 0.2, C::kAny, "keep your open body posture"},
        {0.2, kInf, C::kDecrease, "try not to cross your arms"}};
    t.bins[f(Feature::HD_TH)] = {
        {-kInf, 0.05, C::kAny, "keep your hands away from your face"},
        {0.05, kInf, C::kDecrease, "try to avoid touching your face or head"}};
    t.bins[f(Feature::DIST_LW)] = {
        {-kInf, 0.16, C::kAny,
         "keep your left hand relaxed on its own side"},
        {0.16, kInf, C::kDecrease,
         "try not to reach across your body with your left hand"}};
    t.bins[f(Feature::DIST_RW)] = {
        {-kInf, 0.16, C::kAny,
         "keep your right hand relaxed on its own side"},
        {0.16, kInf, C::kDecrease,
         "try not to reach across your body with your right hand"}};
    t.bins[f(Feature::YROT_LE)] = {
        {-kInf, -0.6, C::kIncrease,
         "try to open your left arm instead of folding it across your body"},
        {-0.6, kInf, C::kAny, "keep your left arm in a relaxed open position"}};
    t.bins[f(Feature::YROT_RE)] = {
        {-kInf, -0.6, C::kIncrease,
         "try to open your right arm instead of folding it across your body"},
        {-0.6, kInf, C::kAny,
         "keep your right arm in a relaxed open position"}};
    t.bins[f(Feature::FO_LW)] = {
        {-kInf, 0.005, C::kIncrease,
         "try to move your left hand a bit more naturally"},
        {0.005, 0.02, C::kAny, "keep your natural left hand movement"},
        {0.02, kInf, C::kDecrease, "try to keep your left hand calmer"}};
    t.bins[f(Feature::FO_RW)] = {
        {-kInf, 0.005, C::kIncrease,
         "try to move your right hand a bit more naturally"},
        {0.005, 0.02, C::kAny, "keep your natural right hand movement"},
        {0.02, kInf, C::kDecrease, "try to keep your right hand calmer"}};
    t.bins[f(Feature::XROT_LE)] = {
        {-kInf, 1.3, C::kAny,
         "keep your left forearm relaxed and ready to gesture"},
        {1.3, kInf, C::kDecrease,
         "try to lower your left forearm into a relaxed resting position"}};
    t.bins[f(Feature::XROT_RE)] = {
        {-kInf, 1.3, C::kAny,
         "keep your right forearm relaxed and ready to gesture"},
        {1.3, kInf, C::kDecrease,
         "try to lower your right forearm into a relaxed resting position"}};
    t.bins[f(Feature::SDX_HD)] = {
        {-kInf, 0.002, C::kIncrease, "try to loosen up your posture a little"},
        {0.002, 0.008, C::kAny, "keep your head position steady"},
        {0.008, kInf, C::kDecrease,
         "try to move your upper body less restlessly"}};
    t.bins[f(Feature::SDXROT_HD)] = {
        {-kInf, 0.015, C::kIncrease,
         "try to nod now and then to show that you are following"},
        {0.015, 0.045, C::kAny, "keep your head movements calm and responsive"},
        {0.045, kInf, C::kDecrease, "try to keep your head movements calmer"}};
    t.bins[f(Feature::TN_HD)] = {
        {-kInf, 0.3, C::kIncrease,
         "try to take the turn and speak up more often"},
        {0.3, 0.7, C::kAny, "keep contributing actively to the conversation"},
        {0.7, kInf, C::kDecrease,
         "try to leave more room for your interlocutor to speak"}};
    t.bins[f(Feature::CONT_MOV)] = {
        {-kInf, 4.0, C::kIncrease,
         "try to move a little more naturally instead of freezing"},
        {4.0, 15.0, C::kAny, "keep your relaxed body movement"},
        {15.0, kInf, C::kDecrease, "try to reduce restless body movement"}};
    t.bins[f(Feature::EN_HA)] = {
        {-kInf, 0.08, C::kIncrease,
         "try to use more hand gestures while you speak"},
        {0.08, 0.4, C::kAny, "keep up your lively gesturing"},
        {0.4, kInf, C::kDecrease, "try to gesture less hectically"}};
    ValidateTemplates(t);
    return t;
  }();
  return config;
}

std::string TemplatesToJson(const TemplateConfig& templates) {
  Json features = Json::object();
  for (const auto& [feature, bins] : templates.bins) {
    Json arr = Json::array();
    for (const TemplateBin& bin : bins) {
      arr.push_back({{"lower", BoundToJson(bin.lower)},
                     {"upper", BoundToJson(bin.upper)},
                     {"condition", ConditionName(bin.condition)},
                     {"text", bin.text}});
    }
    features[std::string(FeatureName(feature))] = std::move(arr);
  }
  Json j = {{"format", "templates-v1"}, {"features", std::move(features)}};
  return j.dump(2) + "\n";
}

TemplateConfig TemplatesFromJson(std::string_view text) {
  const Json j = ParseJson(text, "templates");
  if (RequireString(j, "format", "templates") != "templates-v1") {
    throw Error("invalid-templates", "unsupported format");
  }
  const Json& features = RequireField(j, "features", "templates");
  if (!features.is_object()) {
    throw Error("invalid-templates", "'features' must be an object");
  }
  TemplateConfig config;
  for (const auto& [name, arr] : features.items()) {
    const auto index = FeatureIndex(name);
    if (!index) throw Error("invalid-templates", "unknown feature " + name);
    if (!arr.is_array()) {
      throw Error("invalid-templates", "feature " + name + ": bins must be an array");
    }
    std::vector<TemplateBin> bins;
    for (const Json& b : arr) {
      if (!b.is_object()) {
        throw Error("invalid-templates", "feature " + name + ": bin must be an object");
      }
      TemplateBin bin;
      bin.lower = BoundFromJson(b, "lower", -kInf, name);
      bin.upper = BoundFromJson(b, "upper", kInf, name);
      bin.condition = ParseCondition(RequireString(b, "condition", name), name);
      bin.text = RequireString(b, "text", name);
      bins.push_back(std::move(bin));
    }
    config.bins[*index] = std::move(bins);
  }
  ValidateTemplates(config);
  return config;
}

TemplateConfig LoadTemplates(const std::filesystem::path& path) {
  return TemplatesFromJson(ReadFile(path));
}

std::vector<std::string> Render(const std::vector<FeatureDelta>& deltas,
                                const TemplateConfig& templates,
                                std::vector<std::string>* notices) {
  std::vector<std::string> lines;
  for (const FeatureDelta& d : deltas) {
    const auto it = templates.bins.find(d.feature);
    if (it == templates.bins.end()) {
      throw Error("missing-template",
                  "no template for feature " + std::string(FeatureName(d.feature)));
    }
    const TemplateBin* match = nullptr;
    for (const TemplateBin& bin : it->second) {
      if (d.original >= bin.lower && d.original < bin.upper &&
          ConditionMatches(bin.condition, d.change)) {
        match = &bin;
        break;
      }
    }
    if (match) {
      lines.push_back(match->text);
    } else if (notices) {
      notices->push_back("no template bin matches " +
                         std::string(FeatureName(d.feature)) + " at " +
                         FormatDouble(d.original) + " (change " +
                         FormatDouble(d.change) + ")");
    }
  }
  return lines;
}

Json DeltasToJson(const std::vector<FeatureDelta>& deltas) {
  Json arr = Json::array();
  for (const FeatureDelta& d : deltas) {
    arr.push_back({{"feature", FeatureName(d.feature)},
                   {"original", d.original},
                   {"counterfactual", d.counterfactual},
                   {"change", d.change},
                   {"rank_key", d.rank_key}});
  }
  return arr;
}

}  // namespace engagecf
