// Prints one PASS/FAIL line per acceptance criterion; exits 1 if any fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <sstream>

#include "engagecf/pipeline.hpp"

namespace fs = std::filesystem;
using namespace engagecf;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string Fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::array<double, kNumFeatures> Ones() {
  std::array<double, kNumFeatures> s;
  s.fill(1.0);
  return s;
}

// Shared by criteria 1, 3, 4 and 7: the default corpus and models.
struct DefaultRun {
  RunConfig config;
  Dataset raw;
  ClassifierStage clf;
  GanStage gan;
};

const DefaultRun& Default() {
  static const DefaultRun run = [] {
    DefaultRun r;
    r.raw = ExtractCorpus(SynthesizeCorpus(r.config), r.config);
    r.clf = RunClassifierStage(r.raw, r.config);
    r.gan = RunGanStage(r.raw, r.clf.model, r.clf.split, r.config);
    return r;
  }();
  return run;
}

Outcome FlipRateCriterion() {
  const DefaultRun& r = Default();
  const double acc = r.clf.test_confusion.Accuracy();
  const bool ok = r.config.sessions >= 20 && r.raw.size() >= 1000 && acc >= 0.90 &&
                  r.gan.n_flip_eval > 0 && r.gan.flip_rate >= 0.90;
  return {ok, Fmt("%d sessions, %zu windows, held-out accuracy %.4f, flip rate %.4f on %zu "
                  "LOW-classified held-out windows",
                  r.config.sessions, r.raw.size(), acc, r.gan.flip_rate, r.gan.n_flip_eval)};
}

Outcome LearnabilityCriterion() {
  std::array<double, 2> acc{};
  const std::array<double, 2> noise{0.0, 0.1};
  for (int i = 0; i < 2; ++i) {
    RunConfig c;
    c.profile.noise = noise[i];
    const Dataset raw = ExtractCorpus(SynthesizeCorpus(c), c);
    acc[i] = RunClassifierStage(raw, c).test_confusion.Accuracy();
  }
  return {acc[0] >= 0.95 && acc[1] >= 0.85,
          Fmt("held-out accuracy %.4f at noise 0, %.4f at noise 0.1", acc[0], acc[1])};
}

Outcome GradientCriterion() {
  const DefaultRun& r = Default();
  const Dataset train = ApplySplit(r.raw, r.clf.split).first;
  const Dataset norm = NormalizeDataset(train, r.clf.model.norm_stats());
  constexpr std::size_t kCoords = 120;

  double clf_err = 0.0;
  for (std::size_t i = 0; i < 5; ++i)
    clf_err = std::max(clf_err, GradCheck(r.clf.model, norm.samples[i * 37], kCoords, i));

  auto first = [](const Dataset& d, std::size_t n) {
    Dataset out;
    out.samples.assign(d.samples.begin(), d.samples.begin() + std::min(n, d.size()));
    return ToMatrix(out);
  };
  const nn::Matrix lo = first(norm.Filter(EngagementClass::kLow), 16);
  const nn::Matrix hi = first(norm.Filter(EngagementClass::kHigh), 16);

  auto merge = [](GanGradCheck& w, const GanGradCheck& g) {
    w.gen_low_to_high = std::max(w.gen_low_to_high, g.gen_low_to_high);
    w.gen_high_to_low = std::max(w.gen_high_to_low, g.gen_high_to_low);
    w.disc_low = std::max(w.disc_low, g.disc_low);
    w.disc_high = std::max(w.disc_high, g.disc_high);
  };
  GanGradCheck worst;
  for (std::uint64_t seed : {5, 6, 7}) {
    CfGanModel fresh(r.config.gan, r.clf.model.norm_stats());
    std::mt19937_64 rng(seed);
    fresh.Initialize(rng);
    merge(worst, GradCheckGan(fresh, r.clf.model, lo, hi, kCoords, seed));
  }
  // Trained generators have cycle residuals within one step of the L1 kink.
  GanGradCheck trained;
  merge(trained, GradCheckGan(r.gan.model, r.clf.model, lo, hi, kCoords, 9));
  const double all = std::max({clf_err, worst.gen_low_to_high, worst.gen_high_to_low,
                               worst.disc_low, worst.disc_high});
  return {all < 1e-3,
          Fmt("max relative error over %zu coordinates: trained classifier %.2e, initialized "
              "G_LH %.2e, G_HL %.2e, D_L %.2e, D_H %.2e (3 seeds); trained G_LH %.2e, G_HL %.2e, "
              "D_L %.2e, D_H %.2e",
              kCoords, clf_err, worst.gen_low_to_high, worst.gen_high_to_low, worst.disc_low,
              worst.disc_high, trained.gen_low_to_high, trained.gen_high_to_low,
              trained.disc_low, trained.disc_high)};
}

Outcome CycleCriterion() {
  const DefaultRun& r = Default();
  const double ratio = r.gan.mean_cycle_l1 / r.gan.mean_inter_class_l1;
  int lowered = 0;
  std::string per_seed;
  for (std::uint64_t seed : {1, 2, 3}) {
    RunConfig c;
    c.seed = seed;
    c.gan.seed = seed;
    const Dataset raw = ExtractCorpus(SynthesizeCorpus(c), c);
    const ClassifierStage clf = RunClassifierStage(raw, c);
    std::array<double, 2> err{};
    for (int i = 0; i < 2; ++i) {
      RunConfig g = c;
      g.gan.lambda_cycle = c.gan.lambda_cycle * (i ? 10.0 : 1.0);
      err[i] = RunGanStage(raw, clf.model, clf.split, g).mean_cycle_l1;
    }
    lowered += err[1] < err[0];
    per_seed += Fmt(" seed %d %.4f->%.4f", static_cast<int>(seed), err[0], err[1]);
  }
  return {ratio <= 0.25 && lowered >= 2,
          Fmt("held-out cycle L1 / inter-class L1 = %.4f; 10x lambda_cycle lowers it on %d of 3 "
              "seeds:",
              ratio, lowered) +
              per_seed};
}

// p_high(x) = clip(w.x + b, 0, 1)
struct LinearModel : ProbabilityModel {
  std::array<double, kNumFeatures> w{};
  double b = 0.6;
  ClassProb Probabilities(const FeatureVector& x) const override {
    double p = b;
    for (std::size_t i = 0; i < kNumFeatures; ++i) p += w[i] * x[i];
    p = std::clamp(p, 0.0, 1.0);
    return ClassProb{{1.0 - p, p}};
  }
};

Outcome LimeCriterion() {
  std::mt19937_64 rng(101);
  std::normal_distribution<double> g(0.0, 1.0);
  double worst = 1.0;
  int passed = 0;
  for (int inst = 0; inst < 10; ++inst) {
    LinearModel m;
    for (auto& wi : m.w) wi = 0.02 * g(rng);
    FeatureVector x;
    for (std::size_t i = 0; i < kNumFeatures; ++i) x[i] = 0.3 * g(rng);
    LimeConfig c;
    c.n_samples = 1000;
    c.seed = static_cast<std::uint64_t>(inst);
    const double r = Pearson(LimeExplain(m, x, Ones(), c).coefficients, m.w);
    worst = std::min(worst, r);
    passed += r >= 0.95;
  }
  return {passed == 10, Fmt("%d of 10 planted linear models recovered, worst r %.4f", passed,
                            worst)};
}

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

Dataset RandomEvalSet(std::uint64_t seed, int n) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Dataset ds;
  for (int i = 0; i < n; ++i) {
    LabeledSample s;
    for (std::size_t j = 0; j < kNumFeatures; ++j) s.features[j] = g(rng);
    s.session_id = "r";
    s.window_index = static_cast<std::uint64_t>(i);
    ds.samples.push_back(s);
  }
  NormStats unit;
  unit.std.fill(1.0);
  ds.norm_stats = unit;
  return ds;
}

MlpModel RandomMlp(std::uint64_t seed) {
  NormStats unit;
  unit.std.fill(1.0);
  MlpModel m(8, unit);
  std::mt19937_64 rng(seed);
  m.network().Initialize(rng, 0.5);
  return m;
}

struct ShiftGenerator : CounterfactualGenerator {
  FeatureVector Translate(const FeatureVector& x, Direction d) const override {
    FeatureVector y = x;
    for (std::size_t j = 0; j < kNumFeatures; ++j)
      y[j] += (d == Direction::kLowToHigh ? 0.3 : -0.4) * static_cast<double>(j % 4 + 1) * x[j];
    return y;
  }
};

// |delta_j| = 2 |LIME coefficient_j| for the same instance and seed.
struct PerfectGenerator : CounterfactualGenerator {
  std::map<std::array<double, kNumFeatures>, std::size_t> index;
  const ProbabilityModel* clf;
  LimeConfig lime;
  PerfectGenerator(const Dataset& ds, const ProbabilityModel& m, LimeConfig l)
      : clf(&m), lime(l) {
    for (std::size_t i = 0; i < ds.size(); ++i) index[ds.samples[i].features.values()] = i;
  }
  FeatureVector Translate(const FeatureVector& x, Direction) const override {
    LimeConfig c = lime;
    c.seed = lime.seed + index.at(x.values());
    const auto s = LimeExplain(*clf, x, Ones(), c);
    FeatureVector y = x;
    for (std::size_t j = 0; j < kNumFeatures; ++j) y[j] += 2.0 * std::abs(s.coefficients[j]);
    return y;
  }
};

bool OracleMatches(int n, std::uint64_t seed) {
  const MlpModel clf = RandomMlp(seed);
  const Dataset ds = RandomEvalSet(seed, n);
  LimeConfig lime;
  lime.n_samples = 200;
  lime.seed = seed * 7;
  const ShiftGenerator gen;
  const CorrelationReport rep = ImportanceChangeCorrelation(gen, clf, ds, lime);

  std::vector<std::array<double, kNumFeatures>> imp, del;
  std::size_t flips = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const FeatureVector& x = ds.samples[i].features;
    const auto l = clf.Logits(x);
    const bool high = l[1] > l[0];
    const FeatureVector cf = gen.Translate(x, high ? Direction::kHighToLow : Direction::kLowToHigh);
    const auto lc = clf.Logits(cf);
    flips += (lc[1] > lc[0]) != high;
    LimeConfig c = lime;
    c.seed = lime.seed + i;
    const auto s = LimeExplain(clf, x, Ones(), c);
    std::array<double, kNumFeatures> a{}, d{};
    for (std::size_t j = 0; j < kNumFeatures; ++j) {
      a[j] = std::abs(s.coefficients[j]);
      d[j] = std::abs(cf[j] - x[j]);
    }
    imp.push_back(a);
    del.push_back(d);
  }
  if (rep.abs_importance != imp || rep.abs_delta != del) return false;
  if (rep.flip_rate != static_cast<double>(flips) / static_cast<double>(ds.size())) return false;
  for (std::size_t j = 0; j < kNumFeatures; ++j) {
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      xs.push_back(imp[i][j]);
      ys.push_back(del[i][j]);
    }
    if (!rep.features[j].r || *rep.features[j].r != Pearson(xs, ys)) return false;
  }
  return true;
}

Outcome HarnessCriterion() {
  int oracle_ok = 0;
  const std::array<int, 3> sizes{2, 17, 50};
  for (std::size_t i = 0; i < sizes.size(); ++i) oracle_ok += OracleMatches(sizes[i], 31 + i);

  std::mt19937_64 rng(41);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_int_distribution<int> len(2, 200);
  double pearson_err = 0.0;
  for (int rep = 0; rep < 1000; ++rep) {
    const int n = len(rng);
    std::vector<double> x(n), y(n);
    const double mix = g(rng);
    for (int i = 0; i < n; ++i) {
      x[i] = g(rng) * 10.0 + 3.0;
      y[i] = mix * x[i] + g(rng);
    }
    pearson_err = std::max(pearson_err, std::abs(Pearson(x, y) - Textbook(x, y)));
  }

  const MlpModel clf = RandomMlp(43);
  const Dataset ds = RandomEvalSet(43, 40);
  LimeConfig lime;
  lime.n_samples = 300;
  const CorrelationReport planted =
      ImportanceChangeCorrelation(PerfectGenerator(ds, clf, lime), clf, ds, lime);
  double planted_err = 0.0;
  for (const auto& f : planted.features)
    planted_err = std::max(planted_err, f.r ? std::abs(*f.r - 1.0) : 1.0);

  return {oracle_ok == 3 && pearson_err <= 1e-12 && planted_err <= 1e-12,
          Fmt("oracle bit-exact on %d of 3 sets (2, 17, 50 samples), max |pearson - textbook| "
              "%.1e over 1000 vectors, planted stub max |r - 1| %.1e",
              oracle_ok, pearson_err, planted_err)};
}

Outcome CorrelationCriterion() {
  const DefaultRun& r = Default();
  const CorrelationReport rep =
      RunEvaluateStage(r.raw, r.clf.model, r.gan.model, r.clf.split, r.config);
  const double median = rep.MedianR();
  const std::size_t strong = rep.CountAbsAtLeast(0.4);
  return {median > 0.0 && strong >= 10,
          Fmt("median r %+.3f, %zu of 18 features with |r| >= 0.4 (%zu held-out samples)",
              median, strong, rep.n_samples)};
}

int RunCli(const std::string& args, const fs::path& log) {
  const std::string cmd =
      std::string(ENGAGECF_CLI) + " " + args + " >" + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, std::string> Snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = ReadFile(e.path());
  return files;
}

Outcome RecommenderCriterion() {
  std::mt19937_64 rng(51);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.05, 3.0);
  std::uniform_int_distribution<int> kd(1, 18);
  int agree = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    NormStats st;
    FeatureVector x, y;
    for (std::size_t i = 0; i < kNumFeatures; ++i) {
      st.mean[i] = g(rng);
      st.std[i] = u(rng);
      x[i] = g(rng);
      y[i] = rep % 5 == 0 && i % 3 == 0 ? x[i] : g(rng);
    }
    const int k = kd(rng);
    std::vector<std::pair<double, std::size_t>> keys;
    for (std::size_t i = 0; i < kNumFeatures; ++i)
      keys.push_back({std::abs(y[i] - x[i]) / st.std[i], i});
    std::stable_sort(keys.begin(), keys.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    const auto d = TopKChanges(x, y, k, st);
    bool same = d.size() == static_cast<std::size_t>(k);
    for (int i = 0; same && i < k; ++i) same = d[i].feature == keys[i].second;
    agree += same;
  }

  const std::size_t hd = static_cast<std::size_t>(Feature::HD_AC);
  const auto up = Render({FeatureDelta{hd, 0.05, 0.4, 0.35, 1.0}}, DefaultTemplates());
  const auto down = Render({FeatureDelta{hd, 0.9, 0.2, -0.7, 1.0}}, DefaultTemplates());
  const bool strings =
      up == std::vector<std::string>{"try to use more nonverbal feedback"} &&
      down == std::vector<std::string>{"try to keep your attention on your interlocutor"};

  const fs::path dir = fs::temp_directory_path() / "engagecf_acceptance_rerun";
  fs::remove_all(dir);
  fs::create_directories(dir);
  WriteFileAtomic(dir / "small.conf",
                  "seed = 5\nsynth.sessions = 6\nclf.epochs = 40\ngan.epochs = 20\n"
                  "lime.n_samples = 200\neval.max_samples = 30\n");
  const std::string cmd =
      "demo --config " + (dir / "small.conf").string() + " --out " + (dir / "run").string();
  const int c1 = RunCli(cmd, dir / "log1.txt");
  const auto s1 = Snapshot(dir / "run");
  const int c2 = RunCli(cmd, dir / "log2.txt");
  const auto s2 = Snapshot(dir / "run");
  const bool identical = c1 == 0 && c2 == 0 && s1 == s2 &&
                         ReadFile(dir / "log1.txt") == ReadFile(dir / "log2.txt");

  return {agree == 1000 && strings && identical,
          Fmt("top-k oracle agrees on %d of 1000 pairs, HD_AC templates %s, rerun of demo "
              "(%zu files + stdout) %s",
              agree, strings ? "verbatim" : "differ", s1.size(),
              identical ? "byte-identical" : "differs")};
}

Outcome SmokeCriterion() {
  const fs::path dir = fs::temp_directory_path() / "engagecf_acceptance_demo";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto t0 = std::chrono::steady_clock::now();
  const int code = RunCli("demo --out " + (dir / "run").string(), dir / "log.txt");
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::size_t n_rec = 0;
  bool report_ok = false;
  try {
    const Json rec = ParseJson(ReadFile(dir / "run" / "recommendations.json"), "recommendations");
    for (const auto& e : rec.at("explanations")) n_rec += e.at("recommendations").size();
    const Json rep = ParseJson(ReadFile(dir / "run" / "report.json"), "report");
    report_ok = rep.at("features").size() == kNumFeatures && rep.contains("flip_rate") &&
                rep.contains("provenance");
  } catch (const std::exception&) {
  }
  return {code == 0 && n_rec >= 1 && report_ok && secs < 1800.0,
          Fmt("demo exit %d in %.1f s, %zu recommendations, report %s", code, secs, n_rec,
              report_ok ? "well-formed" : "malformed")};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"counterfactual validity", FlipRateCriterion},
      {"classifier learnability", LearnabilityCriterion},
      {"gradient correctness", GradientCriterion},
      {"cycle minimality", CycleCriterion},
      {"explainer fidelity", LimeCriterion},
      {"correlation harness", HarnessCriterion},
      {"importance vs change correlation", CorrelationCriterion},
      {"recommender determinism", RecommenderCriterion},
      {"end-to-end demo", SmokeCriterion},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu of %zu criteria pass\n", criteria.size() - failed, criteria.size());
  return failed ? 1 : 0;
}
