#include "engagecf/run_config.hpp"

#include <charconv>
#include <cmath>
#include <functional>
#include <sstream>

#include "engagecf/error.hpp"

namespace engagecf {

namespace {

[[noreturn]] void Invalid(std::string_view key, const std::string& message) {
  throw Error("invalid-config", std::string(key) + ": " + message);
}

std::string_view Trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double ParseDouble(std::string_view key, std::string_view v) {
  double out = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(out))
    Invalid(key, "expected a number, got '" + std::string(v) + "'");
  return out;
}

template <typename I>
I ParseInt(std::string_view key, std::string_view v) {
  I out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    Invalid(key, "expected an integer, got '" + std::string(v) + "'");
  return out;
}

bool ParseBool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  Invalid(key, "expected true or false, got '" + std::string(v) + "'");
}

std::vector<int> ParseIntList(std::string_view key, std::string_view v) {
  std::vector<int> out;
  while (true) {
    const auto comma = v.find(',');
    out.push_back(ParseInt<int>(key, Trim(v.substr(0, comma))));
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
  return out;
}

std::string IntListText(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(v[i]);
  }
  return s;
}

struct Entry {
  const char* key;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define ECF_DOUBLE(name, field)                                         \
  Entry {                                                               \
    name,                                                               \
        [](RunConfig& c, std::string_view v) {                          \
          c.field = ParseDouble(name, v);                               \
        },                                                              \
        [](const RunConfig& c) { return FormatDouble(c.field); }        \
  }
#define ECF_INT(name, field, type)                                      \
  Entry {                                                               \
    name,                                                               \
        [](RunConfig& c, std::string_view v) {                          \
          c.field = ParseInt<type>(name, v);                            \
        },                                                              \
        [](const RunConfig& c) { return std::to_string(c.field); }      \
  }
#define ECF_STRING(name, field)                                         \
  Entry {                                                               \
    name, [](RunConfig& c, std::string_view v) { c.field = v; },        \
        [](const RunConfig& c) { return c.field; }                      \
  }

const std::vector<Entry>& Entries() {
  static const std::vector<Entry> entries = {
      ECF_INT("seed", seed, std::uint64_t),
      ECF_INT("synth.sessions", sessions, int),
      ECF_DOUBLE("synth.high_fraction", profile.high_fraction),
      ECF_DOUBLE("synth.noise", profile.noise),
      ECF_DOUBLE("synth.duration_s", profile.duration_s),
      ECF_DOUBLE("synth.frame_rate", profile.frame_rate),
      ECF_DOUBLE("synth.min_segment_s", profile.min_segment_s),
      ECF_DOUBLE("synth.max_segment_s", profile.max_segment_s),
      ECF_DOUBLE("window.length_s", window.length_s),
      ECF_DOUBLE("window.stride_s", window.stride_s),
      ECF_DOUBLE("extract.gaze_cone_deg", extract.gaze_cone_deg),
      ECF_DOUBLE("extract.head_touch_ratio", extract.head_touch_ratio),
      ECF_DOUBLE("extract.arms_crossed_ratio", extract.arms_crossed_ratio),
      ECF_DOUBLE("extract.min_label_purity", extract.min_label_purity),
      ECF_DOUBLE("split.train_fraction", train_fraction),
      ECF_DOUBLE("clf.learning_rate", clf.learning_rate),
      ECF_INT("clf.batch_size", clf.batch_size, int),
      ECF_INT("clf.epochs", clf.epochs, int),
      ECF_INT("clf.seed", clf.seed, std::uint64_t),
      ECF_DOUBLE("clf.weight_init_scale", clf.weight_init_scale),
      ECF_DOUBLE("clf.momentum", clf.momentum),
      ECF_INT("clf.hidden_size", clf.hidden_size, int),
      ECF_DOUBLE("gan.lambda_cycle", gan.lambda_cycle),
      ECF_DOUBLE("gan.lambda_counterfactual", gan.lambda_counterfactual),
      ECF_DOUBLE("gan.lambda_identity", gan.lambda_identity),
      ECF_DOUBLE("gan.learning_rate", gan.learning_rate),
      ECF_INT("gan.epochs", gan.epochs, int),
      ECF_INT("gan.batch_size", gan.batch_size, int),
      ECF_INT("gan.seed", gan.seed, std::uint64_t),
      Entry{"gan.generator_hidden",
            [](RunConfig& c, std::string_view v) {
              c.gan.generator_hidden = ParseIntList("gan.generator_hidden", v);
            },
            [](const RunConfig& c) {
              return IntListText(c.gan.generator_hidden);
            }},
      ECF_INT("gan.discriminator_hidden", gan.discriminator_hidden, int),
      ECF_DOUBLE("gan.weight_init_scale", gan.weight_init_scale),
      Entry{"gan.residual",
            [](RunConfig& c, std::string_view v) {
              c.gan.residual = ParseBool("gan.residual", v);
            },
            [](const RunConfig& c) {
              return std::string(c.gan.residual ? "true" : "false");
            }},
      ECF_INT("lime.n_samples", lime.n_samples, int),
      ECF_DOUBLE("lime.kernel_width", lime.kernel_width),
      ECF_INT("lime.seed", lime.seed, std::uint64_t),
      ECF_DOUBLE("lime.ridge", lime.ridge),
      ECF_INT("eval.max_samples", eval_max_samples, int),
      ECF_INT("recommend.k", k, int),
      ECF_STRING("paths.out_dir", out_dir),
      ECF_STRING("paths.streams", streams_path),
      ECF_STRING("paths.dataset", dataset_path),
      ECF_STRING("paths.classifier", classifier_path),
      ECF_STRING("paths.gan", gan_path),
      ECF_STRING("paths.report", report_path),
      ECF_STRING("paths.recommendations", recommendations_path),
      ECF_STRING("paths.templates", templates_path),
  };
  return entries;
}

#undef ECF_DOUBLE
#undef ECF_INT
#undef ECF_STRING

template <typename F>
void Rethrow(const char* prefix, F&& f) {
  try {
    f();
  } catch (const Error& e) {
    if (e.code() == "invalid-config") throw;
    Invalid(prefix, e.what());
  }
}

}  // namespace

std::filesystem::path ResolvedPath(const RunConfig& config, PathKey key) {
  const std::filesystem::path base(config.out_dir);
  auto pick = [&](const std::string& set, const char* def) {
    return set.empty() ? base / def : std::filesystem::path(set);
  };
  switch (key) {
    case PathKey::kStreams: return pick(config.streams_path, "streams");
    case PathKey::kDataset: return pick(config.dataset_path, "dataset.csv");
    case PathKey::kClassifier:
      return pick(config.classifier_path, "classifier.json");
    case PathKey::kGan: return pick(config.gan_path, "gan.json");
    case PathKey::kReport: return pick(config.report_path, "report.json");
    case PathKey::kRecommendations:
      return pick(config.recommendations_path, "recommendations.json");
  }
  return base;
}

void ApplySetting(RunConfig& config, std::string_view key,
                  std::string_view value) {
  value = Trim(value);
  for (const auto& e : Entries()) {
    if (key == e.key) {
      if (value.empty() && !std::string_view(e.key).starts_with("paths."))
        Invalid(key, "empty value");
      e.set(config, value);
      return;
    }
  }
  Invalid(key, "unknown key");
}

void ApplyOverride(RunConfig& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos)
    Invalid(assignment, "expected key=value");
  ApplySetting(config, Trim(assignment.substr(0, eq)),
               assignment.substr(eq + 1));
}

RunConfig ParseRunConfig(std::string_view text) {
  RunConfig config;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view s = line;
    if (auto hash = s.find('#'); hash != std::string_view::npos)
      s = s.substr(0, hash);
    s = Trim(s);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos)
      Invalid("line " + std::to_string(line_no), "expected key = value");
    ApplySetting(config, Trim(s.substr(0, eq)), s.substr(eq + 1));
  }
  return config;
}

RunConfig LoadRunConfig(const std::filesystem::path& path) {
  return ParseRunConfig(ReadFile(path));
}

void ValidateRunConfig(const RunConfig& c) {
  if (c.sessions < 2) Invalid("synth.sessions", "must be at least 2");
  if (!(c.profile.high_fraction >= 0.0 && c.profile.high_fraction <= 1.0))
    Invalid("synth.high_fraction", "must lie in [0, 1]");
  if (!(c.profile.noise >= 0.0 && c.profile.noise <= 0.5))
    Invalid("synth.noise", "must lie in [0, 0.5]");
  if (!(c.profile.duration_s > 0.0))
    Invalid("synth.duration_s", "must be positive");
  if (!(c.profile.frame_rate > 0.0))
    Invalid("synth.frame_rate", "must be positive");
  if (!(c.profile.min_segment_s > 0.0 &&
        c.profile.min_segment_s <= c.profile.max_segment_s))
    Invalid("synth.min_segment_s", "must be positive and <= max_segment_s");
  Rethrow("window", [&] { ValidateWindowSpec(c.window); });
  if (!(c.extract.gaze_cone_deg > 0.0 && c.extract.gaze_cone_deg < 90.0))
    Invalid("extract.gaze_cone_deg", "must lie in (0, 90)");
  if (!(c.extract.head_touch_ratio > 0.0))
    Invalid("extract.head_touch_ratio", "must be positive");
  if (!(c.extract.arms_crossed_ratio > 0.0))
    Invalid("extract.arms_crossed_ratio", "must be positive");
  if (!(c.extract.min_label_purity >= 0.0 && c.extract.min_label_purity <= 1.0))
    Invalid("extract.min_label_purity", "must lie in [0, 1]");
  if (!(c.train_fraction > 0.0 && c.train_fraction < 1.0))
    Invalid("split.train_fraction", "must lie in (0, 1)");
  Rethrow("clf", [&] { ValidateTrainConfig(c.clf); });
  Rethrow("gan", [&] { ValidateGanConfig(c.gan); });
  Rethrow("lime", [&] { ValidateLimeConfig(c.lime); });
  if (c.eval_max_samples < 0) Invalid("eval.max_samples", "must be >= 0");
  if (c.k < 1 || c.k > static_cast<int>(kNumFeatures))
    Invalid("recommend.k", "must lie in [1, 18]");
  if (c.out_dir.empty()) Invalid("paths.out_dir", "must not be empty");
}

std::string RunConfigToText(const RunConfig& config) {
  std::string out;
  for (const auto& e : Entries()) {
    out += e.key;
    out += " = ";
    out += e.get(config);
    out += '\n';
  }
  return out;
}

Json RunConfigToJson(const RunConfig& config) {
  Json j = Json::object();
  for (const auto& e : Entries()) {
    if (std::string_view(e.key).starts_with("paths.")) continue;
    j[e.key] = e.get(config);
  }
  return j;
}

}  // namespace engagecf
