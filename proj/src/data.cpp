#include "engagecf/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "engagecf/error.hpp"
#include "engagecf/json_util.hpp"

namespace engagecf {

namespace {

constexpr std::array<std::string_view, kNumFeatures> kFeatureNames = {
    "VAL_F",   "GZ_DR",   "HD_AC",  "AM_CR",     "HD_TH", "DIST_LW",
    "DIST_RW", "YROT_LE", "YROT_RE", "FO_LW",    "FO_RW", "XROT_LE",
    "XROT_RE", "SDX_HD",  "SDXROT_HD", "TN_HD",  "CONT_MOV", "EN_HA"};

std::vector<std::string> SplitCsvLine(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream stream(line);
  while (std::getline(stream, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double ParseDouble(const std::string& text, std::size_t line_no) {
  double value = 0.0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw Error("invalid-csv", "line " + std::to_string(line_no) +
                                   ": not a number: '" + text + "'");
  }
  return value;
}

}  // namespace

const std::array<std::string_view, kNumFeatures>& FeatureNames() {
  return kFeatureNames;
}

std::string_view FeatureName(std::size_t index) {
  return kFeatureNames.at(index);
}

std::optional<std::size_t> FeatureIndex(std::string_view name) {
  for (std::size_t i = 0; i < kNumFeatures; ++i) {
    if (kFeatureNames[i] == name) return i;
  }
  return std::nullopt;
}

bool IsRatioFeature(std::size_t index) {
  switch (static_cast<Feature>(index)) {
    case Feature::GZ_DR:
    case Feature::AM_CR:
    case Feature::HD_TH:
    case Feature::TN_HD:
      return true;
    default:
      return false;
  }
}

FeatureVector FeatureVector::FromSpan(std::span<const double> values) {
  if (values.size() != kNumFeatures) {
    throw Error("invalid-input", "feature vector needs " +
                                     std::to_string(kNumFeatures) +
                                     " entries, got " +
                                     std::to_string(values.size()));
  }
  FeatureVector fv;
  std::copy(values.begin(), values.end(), fv.values_.begin());
  return fv;
}

bool FeatureVector::AllFinite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return std::isfinite(v); });
}

std::string_view ClassLabel(EngagementClass c) {
  return c == EngagementClass::kLow ? "low" : "high";
}

EngagementClass ParseClassLabel(std::string_view label) {
  if (label == "low") return EngagementClass::kLow;
  if (label == "high") return EngagementClass::kHigh;
  throw Error("invalid-label", "expected 'low' or 'high', got '" +
                                   std::string(label) + "'");
}

std::size_t Dataset::CountLabel(EngagementClass c) const {
  return static_cast<std::size_t>(
      std::count_if(samples.begin(), samples.end(),
                    [c](const LabeledSample& s) { return s.label == c; }));
}

Dataset Dataset::Filter(EngagementClass c) const {
  Dataset out;
  out.norm_stats = norm_stats;
  for (const auto& s : samples) {
    if (s.label == c) out.samples.push_back(s);
  }
  return out;
}

NormStats FitNormalizer(const Dataset& dataset) {
  if (dataset.empty()) {
    throw Error("empty-dataset", "cannot fit normalizer on zero samples");
  }
  NormStats stats;
  const double n = static_cast<double>(dataset.size());
  for (std::size_t j = 0; j < kNumFeatures; ++j) {
    double sum = 0.0;
    for (const auto& s : dataset.samples) {
      const double v = s.features[j];
      if (!std::isfinite(v)) {
        throw Error("invalid-input", "non-finite value in column " +
                                         std::string(FeatureName(j)));
      }
      sum += v;
    }
    const double mean = sum / n;
    double sq = 0.0;
    for (const auto& s : dataset.samples) {
      const double d = s.features[j] - mean;
      sq += d * d;
    }
    stats.mean[j] = mean;
    stats.std[j] = std::max(std::sqrt(sq / n), kStdEpsilon);
  }
  return stats;
}

FeatureVector Normalize(const FeatureVector& fv, const NormStats& stats) {
  FeatureVector out;
  for (std::size_t j = 0; j < kNumFeatures; ++j) {
    out[j] = (fv[j] - stats.mean[j]) / stats.std[j];
  }
  return out;
}

FeatureVector Denormalize(const FeatureVector& fv, const NormStats& stats) {
  FeatureVector out;
  for (std::size_t j = 0; j < kNumFeatures; ++j) {
    out[j] = fv[j] * stats.std[j] + stats.mean[j];
  }
  return out;
}

Dataset NormalizeDataset(const Dataset& dataset, const NormStats& stats) {
  Dataset out;
  out.norm_stats = stats;
  out.samples.reserve(dataset.size());
  for (const auto& s : dataset.samples) {
    LabeledSample n = s;
    n.features = Normalize(s.features, stats);
    out.samples.push_back(std::move(n));
  }
  return out;
}

std::pair<Dataset, Dataset> SplitBySession(const Dataset& dataset,
                                           double train_fraction,
                                           std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error("invalid-argument", "train_fraction must lie in (0, 1)");
  }
  // Sorted set keeps the pre-shuffle order independent of sample order.
  std::set<std::string> unique;
  for (const auto& s : dataset.samples) unique.insert(s.session_id);
  if (unique.size() < 2) {
    throw Error("insufficient-sessions",
                "need at least 2 distinct sessions, got " +
                    std::to_string(unique.size()));
  }
  std::vector<std::string> sessions(unique.begin(), unique.end());
  std::mt19937_64 rng(seed);
  std::shuffle(sessions.begin(), sessions.end(), rng);

  const auto n = static_cast<long>(sessions.size());
  long n_train = std::lround(train_fraction * static_cast<double>(n));
  n_train = std::clamp(n_train, 1L, n - 1);
  const std::set<std::string> train_ids(sessions.begin(),
                                        sessions.begin() + n_train);

  Dataset train, test;
  train.norm_stats = dataset.norm_stats;
  test.norm_stats = dataset.norm_stats;
  for (const auto& s : dataset.samples) {
    (train_ids.count(s.session_id) ? train : test).samples.push_back(s);
  }
  return {std::move(train), std::move(test)};
}

std::string FormatDouble(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

void WriteDatasetCsv(const Dataset& dataset, std::ostream& out,
                     std::string_view comment) {
  if (!comment.empty()) {
    if (comment.find('\n') != std::string_view::npos) {
      throw Error("invalid-argument", "CSV comment must be a single line");
    }
    out << "# " << comment << '\n';
  }
  out << "session_id,window_index,label";
  for (auto name : kFeatureNames) out << ',' << name;
  out << '\n';
  for (const auto& s : dataset.samples) {
    out << s.session_id << ',' << s.window_index << ','
        << ClassLabel(s.label);
    for (std::size_t j = 0; j < kNumFeatures; ++j) {
      out << ',' << FormatDouble(s.features[j]);
    }
    out << '\n';
  }
}

void SaveDatasetCsv(const Dataset& dataset, const std::filesystem::path& path,
                    std::string_view comment) {
  std::ostringstream out;
  WriteDatasetCsv(dataset, out, comment);
  WriteFileAtomic(path, out.str());
}

Dataset ReadDatasetCsv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  do {
    if (!std::getline(in, line)) {
      throw Error("invalid-csv", "missing header line");
    }
    ++line_no;
  } while (!line.empty() && line[0] == '#');
  const auto header = SplitCsvLine(line);
  if (header.size() != 3 + kNumFeatures || header[0] != "session_id" ||
      header[1] != "window_index" || header[2] != "label") {
    throw Error("invalid-csv", "unexpected header: " + line);
  }
  for (std::size_t j = 0; j < kNumFeatures; ++j) {
    if (header[3 + j] != kFeatureNames[j]) {
      throw Error("invalid-csv", "column " + std::to_string(3 + j) +
                                     " should be " +
                                     std::string(kFeatureNames[j]));
    }
  }
  Dataset dataset;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = SplitCsvLine(line);
    if (cells.size() != 3 + kNumFeatures) {
      throw Error("invalid-csv", "line " + std::to_string(line_no) +
                                     ": expected " +
                                     std::to_string(3 + kNumFeatures) +
                                     " cells");
    }
    LabeledSample s;
    s.session_id = cells[0];
    {
      const auto& w = cells[1];
      auto [ptr, ec] =
          std::from_chars(w.data(), w.data() + w.size(), s.window_index);
      if (ec != std::errc() || ptr != w.data() + w.size()) {
        throw Error("invalid-csv", "line " + std::to_string(line_no) +
                                       ": bad window_index '" + w + "'");
      }
    }
    s.label = ParseClassLabel(cells[2]);
    for (std::size_t j = 0; j < kNumFeatures; ++j) {
      s.features[j] = ParseDouble(cells[3 + j], line_no);
    }
    dataset.samples.push_back(std::move(s));
  }
  return dataset;
}

Dataset LoadDatasetCsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("io-error", "cannot open " + path.string());
  return ReadDatasetCsv(in);
}

Json NormStatsToJsonValue(const NormStats& stats) {
  return Json{{"mean", stats.mean}, {"std", stats.std}};
}

NormStats NormStatsFromJsonValue(const Json& j) {
  NormStats stats;
  for (const char* key : {"mean", "std"}) {
    const Json& arr = RequireField(j, key, "norm stats");
    if (!arr.is_array() || arr.size() != kNumFeatures) {
      throw Error("invalid-json", std::string("norm stats field '") + key +
                                      "' must be an array of 18 numbers");
    }
    auto& dst = std::string_view(key) == "mean" ? stats.mean : stats.std;
    for (std::size_t i = 0; i < kNumFeatures; ++i) {
      if (!arr[i].is_number()) {
        throw Error("invalid-json", std::string("norm stats field '") + key +
                                        "' holds a non-number");
      }
      dst[i] = arr[i].get<double>();
    }
  }
  for (double s : stats.std) {
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw Error("invalid-json", "norm stats std entries must be positive");
    }
  }
  return stats;
}

std::string NormStatsToJson(const NormStats& stats) {
  return NormStatsToJsonValue(stats).dump(2) + "\n";
}

NormStats NormStatsFromJson(std::string_view text) {
  return NormStatsFromJsonValue(ParseJson(text, "norm stats"));
}

Json ParseJson(std::string_view text, std::string_view what) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw Error("invalid-json", std::string(what) + ": " + e.what());
  }
}

const Json& RequireField(const Json& j, const char* field,
                         std::string_view what) {
  if (!j.is_object() || !j.contains(field)) {
    throw Error("invalid-json", std::string(what) + ": missing field '" +
                                    field + "'");
  }
  return j.at(field);
}

double RequireNumber(const Json& j, const char* field, std::string_view what) {
  const Json& v = RequireField(j, field, what);
  if (!v.is_number()) {
    throw Error("invalid-json", std::string(what) + ": field '" + field +
                                    "' must be a number");
  }
  return v.get<double>();
}

std::string RequireString(const Json& j, const char* field,
                          std::string_view what) {
  const Json& v = RequireField(j, field, what);
  if (!v.is_string()) {
    throw Error("invalid-json", std::string(what) + ": field '" + field +
                                    "' must be a string");
  }
  return v.get<std::string>();
}

void WriteFileAtomic(const std::filesystem::path& path,
                     std::string_view contents) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("io-error", "cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error("io-error", "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io-error", "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace engagecf
