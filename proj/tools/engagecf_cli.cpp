// engagecf: file-based pipeline stages plus a one-shot demo.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "engagecf/error.hpp"
#include "engagecf/features.hpp"
#include "engagecf/pipeline.hpp"

namespace fs = std::filesystem;
using namespace engagecf;

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<int> k;
  std::string out;
};

struct Inputs {
  std::string streams;
  std::string data;
  std::string classifier;
  std::string gan;
  std::string templates;
  std::string vector;
  std::optional<std::size_t> row;
};

void AddCommon(CLI::App* app, Common& c) {
  app->add_option("--config", c.config_path, "key = value config file");
  app->add_option("--set", c.sets, "override one config key (key=value)");
  app->add_option("--seed", c.seed, "master seed");
  app->add_option("--out", c.out, "output path");
}

RunConfig BuildConfig(const Common& c) {
  RunConfig config;
  if (!c.config_path.empty()) {
    if (!fs::is_regular_file(c.config_path))
      throw Error("missing-file", "config file not found: " + c.config_path);
    config = LoadRunConfig(c.config_path);
  }
  for (const auto& s : c.sets) ApplyOverride(config, s);
  if (c.seed) config.seed = *c.seed;
  if (c.k) config.k = *c.k;
  ValidateRunConfig(config);
  return config;
}

fs::path Pick(const std::string& flag, const RunConfig& config, PathKey key) {
  return flag.empty() ? ResolvedPath(config, key) : fs::path(flag);
}

void RequireFile(const fs::path& p, std::string_view what) {
  if (!fs::is_regular_file(p))
    throw Error("missing-file", std::string(what) + " not found: " + p.string());
}

void RequireDir(const fs::path& p, std::string_view what) {
  if (!fs::is_directory(p))
    throw Error("missing-file", std::string(what) + " not found: " + p.string());
}

// The output must not be an existing directory and its parent must be
// creatable.
void PrepareOutput(const fs::path& p) {
  if (fs::is_directory(p))
    throw Error("invalid-path", "output is a directory: " + p.string());
  const fs::path parent = p.parent_path();
  if (!parent.empty()) {
    std::error_code ec;
    fs::create_directories(parent, ec);
    if (ec || !fs::is_directory(parent))
      throw Error("invalid-path", "cannot create directory " + parent.string());
  }
}

TemplateConfig Templates(const std::string& flag, const RunConfig& config) {
  const std::string p = flag.empty() ? config.templates_path : flag;
  if (p.empty()) return DefaultTemplates();
  RequireFile(p, "templates file");
  return LoadTemplates(p);
}

void CheckTemplatesPath(const std::string& flag, const RunConfig& config) {
  const std::string p = flag.empty() ? config.templates_path : flag;
  if (!p.empty()) RequireFile(p, "templates file");
}

SessionSplit SplitOf(const fs::path& classifier) {
  const Json prov = ReadProvenance(classifier);
  return SessionSplit::FromJsonValue(RequireField(prov, "split", "provenance"));
}

std::string Dump(const Json& j) { return j.dump(2) + "\n"; }

// --- stages ---------------------------------------------------------------

void WriteStreams(const std::vector<SessionStream>& streams, const fs::path& dir,
                  const RunConfig& config) {
  fs::create_directories(dir);
  const std::string prov = Provenance(config, "synth").dump();
  Json manifest{{"provenance", Provenance(config, "synth")},
                {"sessions", Json::array()}};
  for (std::size_t i = 0; i < streams.size(); ++i) {
    const std::string file = streams[i].session_id + ".jsonl";
    SaveStream(streams[i], dir / file, prov);
    manifest["sessions"].push_back(
        {{"id", streams[i].session_id},
         {"file", file},
         {"seed", SessionSeed(config.seed, static_cast<int>(i))},
         {"frames", streams[i].frames.size()}});
  }
  WriteFileAtomic(dir / "manifest.json", Dump(manifest));
}

std::vector<SessionStream> ReadStreams(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  RequireFile(manifest_path, "stream manifest");
  const Json manifest = ParseJson(ReadFile(manifest_path), "stream manifest");
  std::vector<SessionStream> out;
  for (const auto& s : RequireField(manifest, "sessions", "stream manifest")) {
    const fs::path p = dir / RequireString(s, "file", "stream manifest");
    RequireFile(p, "stream file");
    out.push_back(LoadStream(p));
  }
  return out;
}

void SaveDataset(const Dataset& ds, const fs::path& p, const RunConfig& config) {
  SaveDatasetCsv(ds, p, Provenance(config, "extract").dump());
}

Json ClassifierProvenance(const RunConfig& config, const ClassifierStage& st) {
  Json prov = Provenance(config, "train-clf");
  prov["split"] = st.split.ToJsonValue();
  return prov;
}

void PrintClassifier(const ClassifierStage& st) {
  std::cout << "loss: " << FormatDouble(st.loss_trace.front()) << " -> "
            << FormatDouble(st.loss_trace.back()) << "\n"
            << "held-out confusion matrix (rows = true, cols = predicted):\n"
            << st.test_confusion.Render()
            << "held-out accuracy: " << FormatDouble(st.test_confusion.Accuracy())
            << " (train " << FormatDouble(st.train_confusion.Accuracy()) << ")\n";
}

void PrintGan(const GanStage& st) {
  std::cout << "epoch  D        G_adv    G_cycle  G_cf\n";
  const std::size_t n = st.trace.size();
  const std::size_t step = std::max<std::size_t>(1, n / 10);
  for (std::size_t e = 0; e < n; ++e) {
    if (e % step != 0 && e + 1 != n) continue;
    const auto& l = st.trace[e];
    char buf[128];
    std::snprintf(buf, sizeof buf, "%5zu  %.5f  %.5f  %.5f  %.5f\n", e + 1,
                  l.discriminator, l.generator.adversarial, l.generator.cycle,
                  l.generator.counterfactual);
    std::cout << buf;
  }
  std::cout << "flip rate (held-out, predicted low): " << FormatDouble(st.flip_rate)
            << " over " << st.n_flip_eval << " windows\n";
}

Json GanProvenance(const RunConfig& config, const SessionSplit& split,
                   const GanStage& st) {
  Json prov = Provenance(config, "train-gan");
  prov["split"] = split.ToJsonValue();
  prov["flip_rate"] = st.flip_rate;
  prov["flip_eval_windows"] = st.n_flip_eval;
  return prov;
}

std::string ReportJson(const CorrelationReport& rep, const RunConfig& config) {
  Json j = ParseJson(rep.ToJson(), "report");
  j["provenance"] = Provenance(config, "evaluate");
  j["median_r"] = std::isfinite(rep.MedianR()) ? Json(rep.MedianR()) : Json();
  j["features_abs_r_at_least_0_4"] = rep.CountAbsAtLeast(kModerateThreshold);
  return Dump(j);
}

FeatureVector ParseVector(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos)
        throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error("invalid-input", "not a number in --vector: '" + item + "'");
    }
  }
  if (v.size() != kNumFeatures)
    throw Error("invalid-input", "--vector needs 18 comma-separated values, got " +
                                     std::to_string(v.size()));
  return FeatureVector::FromSpan(v);
}

Json ExplainOutput(const std::vector<std::pair<std::string, Explanation>>& items,
                   const RunConfig& config) {
  Json j{{"provenance", Provenance(config, "explain")},
         {"k", config.k},
         {"explanations", Json::array()}};
  for (const auto& [id, ex] : items) {
    Json e = ex.ToJsonValue();
    e["id"] = id;
    j["explanations"].push_back(e);
  }
  return j;
}

int ErrorExit(const std::string& code, const std::string& message) {
  Json j{{"error", {{"code", code}, {"message", message}}}};
  std::cerr << j.dump() << "\n";
  return code == "invalid-argument" ? 2 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"engagecf: engagement detection with counterfactual recommendations"};
  app.require_subcommand(1);
  Common common;
  Inputs in;

  auto* synth = app.add_subcommand("synth", "generate synthetic session streams");
  AddCommon(synth, common);

  auto* extract = app.add_subcommand("extract", "session streams -> feature CSV");
  AddCommon(extract, common);
  extract->add_option("--streams", in.streams, "stream directory");

  auto* train_clf = app.add_subcommand("train-clf", "train the engagement classifier");
  AddCommon(train_clf, common);
  train_clf->add_option("--data", in.data, "feature CSV");

  auto* train_gan = app.add_subcommand("train-gan", "train the counterfactual GAN");
  AddCommon(train_gan, common);
  train_gan->add_option("--data", in.data, "feature CSV");
  train_gan->add_option("--classifier", in.classifier, "classifier model");

  auto* explain = app.add_subcommand("explain", "counterfactual and recommendations");
  AddCommon(explain, common);
  explain->add_option("--classifier", in.classifier, "classifier model");
  explain->add_option("--gan", in.gan, "GAN model");
  auto* vec_opt = explain->add_option("--vector", in.vector,
                                      "18 comma-separated feature values");
  auto* csv_opt = explain->add_option("--data", in.data, "feature CSV");
  explain->add_option("--row", in.row, "explain only this CSV row (0-based)")
      ->needs(csv_opt);
  vec_opt->excludes(csv_opt);
  explain->add_option("--k", common.k, "number of recommendations");
  explain->add_option("--templates", in.templates, "templates JSON");

  auto* evaluate = app.add_subcommand("evaluate", "flip rate and correlation report");
  AddCommon(evaluate, common);
  evaluate->add_option("--data", in.data, "feature CSV");
  evaluate->add_option("--classifier", in.classifier, "classifier model");
  evaluate->add_option("--gan", in.gan, "GAN model");

  auto* demo = app.add_subcommand("demo", "run every stage into one directory");
  AddCommon(demo, common);
  demo->add_option("--k", common.k, "number of recommendations");
  demo->add_option("--templates", in.templates, "templates JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return ErrorExit("invalid-argument", e.what());
  }

  try {
    RunConfig config = BuildConfig(common);

    if (synth->parsed()) {
      const fs::path dir = Pick(common.out, config, PathKey::kStreams);
      if (fs::exists(dir) && !fs::is_directory(dir))
        throw Error("invalid-path", "not a directory: " + dir.string());
      const auto streams = SynthesizeCorpus(config);
      WriteStreams(streams, dir, config);
      std::size_t frames = 0;
      for (const auto& s : streams) frames += s.frames.size();
      std::cout << "wrote " << streams.size() << " sessions (" << frames
                << " frames) to " << dir.string() << "\n";
    } else if (extract->parsed()) {
      const fs::path dir = in.streams.empty() ? ResolvedPath(config, PathKey::kStreams)
                                              : fs::path(in.streams);
      const fs::path out = Pick(common.out, config, PathKey::kDataset);
      RequireDir(dir, "stream directory");
      PrepareOutput(out);
      const Dataset ds = ExtractCorpus(ReadStreams(dir), config);
      SaveDataset(ds, out, config);
      std::cout << "wrote " << ds.size() << " windows (low "
                << ds.CountLabel(EngagementClass::kLow) << ", high "
                << ds.CountLabel(EngagementClass::kHigh) << ") to " << out.string()
                << "\n";
    } else if (train_clf->parsed()) {
      const fs::path data = Pick(in.data, config, PathKey::kDataset);
      const fs::path out = Pick(common.out, config, PathKey::kClassifier);
      RequireFile(data, "dataset");
      PrepareOutput(out);
      const auto st = RunClassifierStage(LoadDatasetCsv(data), config);
      WriteFileAtomic(out, WithProvenance(st.model.ToJson(),
                                          ClassifierProvenance(config, st)));
      PrintClassifier(st);
    } else if (train_gan->parsed()) {
      const fs::path data = Pick(in.data, config, PathKey::kDataset);
      const fs::path clf_path = Pick(in.classifier, config, PathKey::kClassifier);
      const fs::path out = Pick(common.out, config, PathKey::kGan);
      RequireFile(data, "dataset");
      RequireFile(clf_path, "classifier model");
      PrepareOutput(out);
      const MlpModel clf = MlpModel::Load(clf_path);
      const SessionSplit split = SplitOf(clf_path);
      const auto st = RunGanStage(LoadDatasetCsv(data), clf, split, config);
      WriteFileAtomic(out, WithProvenance(st.model.ToJson(),
                                          GanProvenance(config, split, st)));
      PrintGan(st);
    } else if (evaluate->parsed()) {
      const fs::path data = Pick(in.data, config, PathKey::kDataset);
      const fs::path clf_path = Pick(in.classifier, config, PathKey::kClassifier);
      const fs::path gan_path = Pick(in.gan, config, PathKey::kGan);
      const fs::path out = Pick(common.out, config, PathKey::kReport);
      RequireFile(data, "dataset");
      RequireFile(clf_path, "classifier model");
      RequireFile(gan_path, "GAN model");
      PrepareOutput(out);
      const MlpModel clf = MlpModel::Load(clf_path);
      const CfGanModel gan = CfGanModel::Load(gan_path);
      const auto rep =
          RunEvaluateStage(LoadDatasetCsv(data), clf, gan, SplitOf(clf_path), config);
      WriteFileAtomic(out, ReportJson(rep, config));
      std::cout << rep.RenderTable();
    } else if (explain->parsed()) {
      const fs::path clf_path = Pick(in.classifier, config, PathKey::kClassifier);
      const fs::path gan_path = Pick(in.gan, config, PathKey::kGan);
      RequireFile(clf_path, "classifier model");
      RequireFile(gan_path, "GAN model");
      if (in.vector.empty() && in.data.empty())
        throw Error("invalid-argument", "explain needs --vector or --data");
      if (!in.data.empty()) RequireFile(in.data, "dataset");
      CheckTemplatesPath(in.templates, config);
      if (!common.out.empty()) PrepareOutput(common.out);
      const MlpModel clf = MlpModel::Load(clf_path);
      const CfGanModel gan = CfGanModel::Load(gan_path);
      const TemplateConfig templates = Templates(in.templates, config);

      std::vector<std::pair<std::string, Explanation>> items;
      if (!in.vector.empty()) {
        items.emplace_back("vector", ExplainVector(clf, gan, ParseVector(in.vector),
                                                   config.k, templates));
      } else {
        const Dataset ds = LoadDatasetCsv(in.data);
        std::size_t begin = 0, end = ds.size();
        if (in.row) {
          if (*in.row >= ds.size())
            throw Error("invalid-argument", "--row out of range");
          begin = *in.row;
          end = begin + 1;
        }
        for (std::size_t i = begin; i < end; ++i) {
          items.emplace_back("row " + std::to_string(i),
                             ExplainVector(clf, gan, ds.samples[i].features,
                                           config.k, templates));
        }
      }
      for (const auto& [id, ex] : items) {
        if (items.size() > 1) std::cout << "[" << id << "] ";
        std::cout << ex.Render();
      }
      if (!common.out.empty())
        WriteFileAtomic(common.out, Dump(ExplainOutput(items, config)));
    } else if (demo->parsed()) {
      if (!common.out.empty()) config.out_dir = common.out;
      CheckTemplatesPath(in.templates, config);
      for (PathKey key : {PathKey::kDataset, PathKey::kClassifier, PathKey::kGan,
                          PathKey::kReport, PathKey::kRecommendations})
        PrepareOutput(ResolvedPath(config, key));
      const TemplateConfig templates = Templates(in.templates, config);
      WriteFileAtomic(fs::path(config.out_dir) / "run.conf", RunConfigToText(config));

      std::cout << "== synth\n";
      const auto streams = SynthesizeCorpus(config);
      WriteStreams(streams, ResolvedPath(config, PathKey::kStreams), config);
      std::cout << streams.size() << " sessions\n== extract\n";
      const Dataset ds = ExtractCorpus(streams, config);
      SaveDataset(ds, ResolvedPath(config, PathKey::kDataset), config);
      std::cout << ds.size() << " windows\n== train-clf\n";
      const auto clf = RunClassifierStage(ds, config);
      WriteFileAtomic(ResolvedPath(config, PathKey::kClassifier),
                      WithProvenance(clf.model.ToJson(),
                                     ClassifierProvenance(config, clf)));
      PrintClassifier(clf);
      std::cout << "== train-gan\n";
      const auto gan = RunGanStage(ds, clf.model, clf.split, config);
      WriteFileAtomic(ResolvedPath(config, PathKey::kGan),
                      WithProvenance(gan.model.ToJson(),
                                     GanProvenance(config, clf.split, gan)));
      PrintGan(gan);
      std::cout << "== evaluate\n";
      const auto rep = RunEvaluateStage(ds, clf.model, gan.model, clf.split, config);
      WriteFileAtomic(ResolvedPath(config, PathKey::kReport), ReportJson(rep, config));
      std::cout << rep.RenderTable();
      std::cout << "== explain\n";
      const Dataset test = ApplySplit(ds, clf.split).second;
      std::vector<std::pair<std::string, Explanation>> items;
      for (std::size_t i = 0; i < test.size(); ++i) {
        Explanation ex =
            ExplainVector(clf.model, gan.model, test.samples[i].features, config.k,
                          templates);
        if (ex.already_high || ex.recommendations.empty()) continue;
        items.emplace_back(test.samples[i].session_id + " window " +
                               std::to_string(test.samples[i].window_index),
                           std::move(ex));
        break;
      }
      if (items.empty())
        throw Error("no-recommendation", "no held-out window produced a recommendation");
      std::cout << "[" << items[0].first << "]\n" << items[0].second.Render();
      WriteFileAtomic(ResolvedPath(config, PathKey::kRecommendations),
                      Dump(ExplainOutput(items, config)));
      std::cout << "artifacts in " << config.out_dir << "\n";
    }
  } catch (const Error& e) {
    std::string msg = e.what();
    const std::string prefix = e.code() + ": ";
    if (msg.rfind(prefix, 0) == 0) msg.erase(0, prefix.size());
    return ErrorExit(e.code(), msg);
  } catch (const std::exception& e) {
    return ErrorExit("internal", e.what());
  }
  return 0;
}
