#include "engagecf/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "engagecf/error.hpp"

namespace engagecf {

namespace {

constexpr std::string_view kModelVersion = "mlp-v1";

nn::Matrix RowOf(const FeatureVector& fv) {
  nn::Matrix x(1, static_cast<Eigen::Index>(kNumFeatures));
  for (std::size_t j = 0; j < kNumFeatures; ++j) {
    x(0, static_cast<Eigen::Index>(j)) = fv[j];
  }
  return x;
}

ClassProb SoftmaxRow(const nn::Matrix& logits, Eigen::Index r) {
  const auto p = Softmax({logits(r, 0), logits(r, 1)});
  return ClassProb{p};
}

}  // namespace

std::vector<ClassProb> ProbabilityModel::ProbabilitiesBatch(
    const nn::Matrix& rows) const {
  std::vector<ClassProb> out;
  out.reserve(static_cast<std::size_t>(rows.rows()));
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    FeatureVector fv;
    for (std::size_t j = 0; j < kNumFeatures; ++j) {
      fv[j] = rows(r, static_cast<Eigen::Index>(j));
    }
    out.push_back(Probabilities(fv));
  }
  return out;
}

std::array<double, 2> Softmax(const std::array<double, 2>& logits) {
  const double m = std::max(logits[0], logits[1]);
  const double e0 = std::exp(logits[0] - m);
  const double e1 = std::exp(logits[1] - m);
  const double sum = e0 + e1;
  return {e0 / sum, e1 / sum};
}

void ValidateTrainConfig(const TrainConfig& c) {
  auto bad = [](const char* field) {
    throw Error("invalid-config",
                std::string("train config field '") + field + "' must be positive");
  };
  if (!(c.learning_rate >= 0.0) || !std::isfinite(c.learning_rate)) bad("learning_rate");
  if (c.batch_size <= 0) bad("batch_size");
  if (c.epochs <= 0) bad("epochs");
  if (!(c.weight_init_scale > 0.0)) bad("weight_init_scale");
  if (c.hidden_size <= 0) bad("hidden_size");
  if (!(c.momentum >= 0.0 && c.momentum < 1.0)) {
    throw Error("invalid-config", "train config field 'momentum' must lie in [0, 1)");
  }
}

Json TrainConfigToJson(const TrainConfig& c) {
  return Json{{"learning_rate", c.learning_rate},
              {"batch_size", c.batch_size},
              {"epochs", c.epochs},
              {"seed", c.seed},
              {"weight_init_scale", c.weight_init_scale},
              {"momentum", c.momentum},
              {"hidden_size", c.hidden_size}};
}

TrainConfig TrainConfigFromJson(const Json& j) {
  constexpr std::string_view what = "train config";
  TrainConfig c;
  c.learning_rate = RequireNumber(j, "learning_rate", what);
  c.batch_size = static_cast<int>(RequireNumber(j, "batch_size", what));
  c.epochs = static_cast<int>(RequireNumber(j, "epochs", what));
  c.seed = RequireField(j, "seed", what).get<std::uint64_t>();
  c.weight_init_scale = RequireNumber(j, "weight_init_scale", what);
  c.momentum = RequireNumber(j, "momentum", what);
  c.hidden_size = static_cast<int>(RequireNumber(j, "hidden_size", what));
  return c;
}

MlpModel::MlpModel(int hidden_size, NormStats norm_stats)
    : network_({static_cast<int>(kNumFeatures), hidden_size, 2},
               {nn::Activation::kTanh, nn::Activation::kLinear}),
      norm_stats_(norm_stats) {
  train_config_.hidden_size = hidden_size;
}

std::array<double, 2> MlpModel::Logits(const FeatureVector& normalized) const {
  const nn::Matrix out = network_.Forward(RowOf(normalized));
  return {out(0, 0), out(0, 1)};
}

ClassProb MlpModel::Probabilities(const FeatureVector& normalized) const {
  return ClassProb{Softmax(Logits(normalized))};
}

std::vector<ClassProb> MlpModel::ProbabilitiesBatch(
    const nn::Matrix& rows) const {
  const nn::Matrix logits = network_.Forward(rows);
  std::vector<ClassProb> out;
  out.reserve(static_cast<std::size_t>(rows.rows()));
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    out.push_back(SoftmaxRow(logits, r));
  }
  return out;
}

ClassProb MlpModel::PredictRaw(const FeatureVector& raw) const {
  return Predict(*this, Normalize(raw, norm_stats_));
}

std::string MlpModel::ToJson() const {
  Json j{{"version", kModelVersion},
         {"input_size", kNumFeatures},
         {"hidden_size", hidden_size()},
         {"activation", "tanh"},
         {"output", "softmax"},
         {"network", network_.ToJson()},
         {"norm_stats", NormStatsToJsonValue(norm_stats_)},
         {"train_config", TrainConfigToJson(train_config_)}};
  return j.dump(2) + "\n";
}

MlpModel MlpModel::FromJson(std::string_view text) {
  constexpr std::string_view what = "classifier model";
  const Json j = ParseJson(text, what);
  if (RequireString(j, "version", what) != kModelVersion) {
    throw Error("invalid-model", "expected version mlp-v1");
  }
  if (RequireNumber(j, "input_size", what) != static_cast<double>(kNumFeatures)) {
    throw Error("invalid-model", "input_size must be 18");
  }
  if (RequireString(j, "activation", what) != "tanh") {
    throw Error("invalid-model", "only the tanh activation is supported");
  }
  MlpModel model;
  model.network_ = nn::Network::FromJson(RequireField(j, "network", what), what);
  const auto& sizes = model.network_.sizes();
  const int hidden = static_cast<int>(RequireNumber(j, "hidden_size", what));
  if (sizes.size() != 3 || sizes[0] != static_cast<int>(kNumFeatures) ||
      sizes[1] != hidden || sizes[2] != 2 ||
      model.network_.activations()[0] != nn::Activation::kTanh ||
      model.network_.activations()[1] != nn::Activation::kLinear) {
    throw Error("invalid-model", "network shape must be 18 -> hidden (tanh) -> 2");
  }
  model.norm_stats_ = NormStatsFromJsonValue(RequireField(j, "norm_stats", what));
  if (j.contains("train_config")) {
    model.train_config_ = TrainConfigFromJson(j.at("train_config"));
  }
  return model;
}

void MlpModel::Save(const std::filesystem::path& path) const {
  WriteFileAtomic(path, ToJson());
}

MlpModel MlpModel::Load(const std::filesystem::path& path) {
  return FromJson(ReadFile(path));
}

ClassProb Predict(const ProbabilityModel& model, const FeatureVector& fv) {
  if (!fv.AllFinite()) {
    throw Error("invalid-input", "feature vector has non-finite entries");
  }
  return model.Probabilities(fv);
}

nn::Matrix ToMatrix(const Dataset& dataset) {
  nn::Matrix x(static_cast<Eigen::Index>(dataset.size()),
               static_cast<Eigen::Index>(kNumFeatures));
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    for (std::size_t j = 0; j < kNumFeatures; ++j) {
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          dataset.samples[i].features[j];
    }
  }
  return x;
}

std::vector<int> Labels(const Dataset& dataset) {
  std::vector<int> y;
  y.reserve(dataset.size());
  for (const auto& s : dataset.samples) y.push_back(ClassIndex(s.label));
  return y;
}

double CrossEntropyLoss(const MlpModel& model, const nn::Matrix& x,
                        const std::vector<int>& labels, nn::ParamSet* grads,
                        double loss_scale) {
  nn::Tape tape;
  const nn::Matrix logits = model.network().Forward(x, tape);
  const double n = static_cast<double>(x.rows());
  nn::Matrix dlogits(logits.rows(), 2);
  double loss = 0.0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double m = std::max(logits(r, 0), logits(r, 1));
    const double lse =
        m + std::log(std::exp(logits(r, 0) - m) + std::exp(logits(r, 1) - m));
    const int y = labels[static_cast<std::size_t>(r)];
    loss += lse - logits(r, y);
    for (int c = 0; c < 2; ++c) {
      const double p = std::exp(logits(r, c) - lse);
      dlogits(r, c) = loss_scale * (p - (c == y ? 1.0 : 0.0)) / n;
    }
  }
  if (grads != nullptr) model.network().Backward(tape, dlogits, grads);
  return loss_scale * loss / n;
}

TrainResult TrainClassifier(const Dataset& dataset, const TrainConfig& config) {
  ValidateTrainConfig(config);
  if (dataset.empty()) throw Error("empty-dataset", "no training samples");
  if (!dataset.norm_stats) {
    throw Error("not-normalized", "training data must be normalized first");
  }
  if (dataset.CountLabel(EngagementClass::kLow) == 0 ||
      dataset.CountLabel(EngagementClass::kHigh) == 0) {
    throw Error("degenerate-labels", "training data must contain both classes");
  }

  std::mt19937_64 rng(config.seed);
  TrainResult result;
  result.model = MlpModel(config.hidden_size, *dataset.norm_stats);
  result.model.set_train_config(config);
  result.model.network().Initialize(rng, config.weight_init_scale);

  const nn::Matrix x = ToMatrix(dataset);
  const std::vector<int> y = Labels(dataset);
  const std::size_t n = dataset.size();
  const auto batch = static_cast<std::size_t>(config.batch_size);

  nn::SgdMomentum optimizer(config.learning_rate, config.momentum);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  nn::ParamSet& params = result.model.network().params();

  result.loss_trace.push_back(CrossEntropyLoss(result.model, x, y, nullptr));
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(n, start + batch);
      nn::Matrix xb(static_cast<Eigen::Index>(end - start), x.cols());
      std::vector<int> yb;
      yb.reserve(end - start);
      for (std::size_t k = start; k < end; ++k) {
        xb.row(static_cast<Eigen::Index>(k - start)) =
            x.row(static_cast<Eigen::Index>(order[k]));
        yb.push_back(y[order[k]]);
      }
      nn::ParamSet grads = params.ZerosLike();
      CrossEntropyLoss(result.model, xb, yb, &grads);
      optimizer.Step(params, grads);
    }
    const double loss = CrossEntropyLoss(result.model, x, y, nullptr);
    if (!std::isfinite(loss) || !params.AllFinite()) {
      throw Error("training-diverged",
                  "classifier loss became non-finite at epoch " +
                      std::to_string(epoch + 1));
    }
    result.loss_trace.push_back(loss);
  }
  return result;
}

double GradCheck(const MlpModel& model, const LabeledSample& sample,
                 std::size_t n_coords, std::uint64_t seed) {
  MlpModel probe = model;
  nn::Matrix x(1, static_cast<Eigen::Index>(kNumFeatures));
  for (std::size_t j = 0; j < kNumFeatures; ++j) {
    x(0, static_cast<Eigen::Index>(j)) = sample.features[j];
  }
  const std::vector<int> y{ClassIndex(sample.label)};
  nn::ParamSet analytic = probe.network().params().ZerosLike();
  CrossEntropyLoss(probe, x, y, &analytic);
  return nn::CheckGradients(
             probe.network().params(), analytic,
             [&] { return CrossEntropyLoss(probe, x, y, nullptr); }, n_coords,
             seed)
      .max_relative_error;
}

std::size_t ConfusionMatrix::Total() const {
  return counts[0][0] + counts[0][1] + counts[1][0] + counts[1][1];
}

double ConfusionMatrix::Accuracy() const {
  const std::size_t total = Total();
  if (total == 0) return 0.0;
  return static_cast<double>(counts[0][0] + counts[1][1]) /
         static_cast<double>(total);
}

std::string ConfusionMatrix::Render() const {
  std::ostringstream out;
  out << "             pred low  pred high\n";
  for (int t = 0; t < 2; ++t) {
    out << (t == 0 ? "true low   " : "true high  ");
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%10zu %10zu\n", counts[t][0], counts[t][1]);
    out << buf;
  }
  char acc[64];
  std::snprintf(acc, sizeof(acc), "accuracy %.4f (n=%zu)\n", Accuracy(), Total());
  out << acc;
  return out.str();
}

ConfusionMatrix ComputeConfusionMatrix(const ProbabilityModel& model,
                                       const Dataset& normalized) {
  if (normalized.empty()) {
    throw Error("empty-dataset", "confusion matrix needs at least one sample");
  }
  const auto probs = model.ProbabilitiesBatch(ToMatrix(normalized));
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < normalized.size(); ++i) {
    ++cm.counts[ClassIndex(normalized.samples[i].label)]
               [ClassIndex(probs[i].Predicted())];
  }
  return cm;
}

}  // namespace engagecf
