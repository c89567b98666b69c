#include "engagecf/cfgan.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "engagecf/error.hpp"

namespace engagecf {

namespace {

constexpr std::string_view kModelVersion = "cfgan-v1";
const int kDim = static_cast<int>(kNumFeatures);

nn::Network MakeGenerator(const GanConfig& c) {
  std::vector<int> sizes{kDim};
  std::vector<nn::Activation> acts;
  for (int h : c.generator_hidden) {
    sizes.push_back(h);
    acts.push_back(nn::Activation::kTanh);
  }
  sizes.push_back(kDim);
  acts.push_back(nn::Activation::kLinear);
  return nn::Network(sizes, acts);
}

nn::Network MakeDiscriminator(const GanConfig& c) {
  return nn::Network({kDim, c.discriminator_hidden, 1},
                     {nn::Activation::kTanh, nn::Activation::kLinear});
}

nn::Matrix RowOf(const FeatureVector& fv) {
  nn::Matrix x(1, kDim);
  for (int j = 0; j < kDim; ++j) x(0, j) = fv[static_cast<std::size_t>(j)];
  return x;
}

FeatureVector VectorOf(const nn::Matrix& m, Eigen::Index row) {
  FeatureVector fv;
  for (int j = 0; j < kDim; ++j) fv[static_cast<std::size_t>(j)] = m(row, j);
  return fv;
}

nn::Matrix Sign(const nn::Matrix& m) {
  return m.unaryExpr([](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

// Softmax cross-entropy of the classifier on `x` against a fixed target;
// returns the mean loss and writes d(mean loss)/dx into `dx` when non-null.
double ClassifierTargetLoss(const MlpModel& clf, const nn::Matrix& x,
                            int target, nn::Matrix* dx) {
  nn::Tape tape;
  const nn::Matrix logits = clf.network().Forward(x, tape);
  const double n = static_cast<double>(x.rows());
  nn::Matrix dlogits(logits.rows(), 2);
  double loss = 0.0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double m = std::max(logits(r, 0), logits(r, 1));
    const double lse =
        m + std::log(std::exp(logits(r, 0) - m) + std::exp(logits(r, 1) - m));
    loss += lse - logits(r, target);
    for (int c = 0; c < 2; ++c) {
      dlogits(r, c) = (std::exp(logits(r, c) - lse) - (c == target ? 1.0 : 0.0)) / n;
    }
  }
  if (dx != nullptr) *dx = clf.network().Backward(tape, dlogits, nullptr);
  return loss / n;
}

nn::Matrix Gather(const nn::Matrix& x, const std::vector<std::size_t>& order,
                  std::size_t start, std::size_t count) {
  nn::Matrix out(static_cast<Eigen::Index>(count), x.cols());
  for (std::size_t k = 0; k < count; ++k) {
    out.row(static_cast<Eigen::Index>(k)) =
        x.row(static_cast<Eigen::Index>(order[(start + k) % order.size()]));
  }
  return out;
}

void RequireSameStats(const Dataset& d, const NormStats& stats,
                      const char* which) {
  if (!d.norm_stats || !(*d.norm_stats == stats)) {
    throw Error("not-normalized",
                std::string(which) +
                    " must be normalized with the classifier's NormStats");
  }
}

}  // namespace

void ValidateGanConfig(const GanConfig& c) {
  auto bad = [](const char* field, const char* why) {
    throw Error("invalid-config",
                std::string("gan config field '") + field + "' " + why);
  };
  if (!(c.lambda_cycle >= 0.0)) bad("lambda_cycle", "must be non-negative");
  if (!(c.lambda_counterfactual >= 0.0)) {
    bad("lambda_counterfactual", "must be non-negative");
  }
  if (!(c.lambda_identity >= 0.0)) bad("lambda_identity", "must be non-negative");
  if (!(c.learning_rate > 0.0)) bad("learning_rate", "must be positive");
  if (c.epochs <= 0) bad("epochs", "must be positive");
  if (c.batch_size <= 0) bad("batch_size", "must be positive");
  if (c.generator_hidden.empty()) bad("generator_hidden", "must list at least one width");
  for (int h : c.generator_hidden) {
    if (h <= 0) bad("generator_hidden", "widths must be positive");
  }
  if (c.discriminator_hidden <= 0) bad("discriminator_hidden", "must be positive");
  if (!(c.weight_init_scale > 0.0)) bad("weight_init_scale", "must be positive");
}

Json GanConfigToJson(const GanConfig& c) {
  return Json{{"lambda_cycle", c.lambda_cycle},
              {"lambda_counterfactual", c.lambda_counterfactual},
              {"lambda_identity", c.lambda_identity},
              {"learning_rate", c.learning_rate},
              {"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"seed", c.seed},
              {"generator_hidden", c.generator_hidden},
              {"discriminator_hidden", c.discriminator_hidden},
              {"weight_init_scale", c.weight_init_scale},
              {"residual", c.residual}};
}

GanConfig GanConfigFromJson(const Json& j) {
  constexpr std::string_view what = "gan config";
  GanConfig c;
  c.lambda_cycle = RequireNumber(j, "lambda_cycle", what);
  c.lambda_counterfactual = RequireNumber(j, "lambda_counterfactual", what);
  c.lambda_identity = RequireNumber(j, "lambda_identity", what);
  c.learning_rate = RequireNumber(j, "learning_rate", what);
  c.epochs = static_cast<int>(RequireNumber(j, "epochs", what));
  c.batch_size = static_cast<int>(RequireNumber(j, "batch_size", what));
  c.seed = RequireField(j, "seed", what).get<std::uint64_t>();
  c.generator_hidden =
      RequireField(j, "generator_hidden", what).get<std::vector<int>>();
  c.discriminator_hidden =
      static_cast<int>(RequireNumber(j, "discriminator_hidden", what));
  c.weight_init_scale = RequireNumber(j, "weight_init_scale", what);
  if (j.contains("residual")) c.residual = j.at("residual").get<bool>();
  return c;
}

CfGanModel::CfGanModel(const GanConfig& config, const NormStats& norm_stats)
    : config_(config),
      norm_stats_(norm_stats),
      gen_low_to_high_(MakeGenerator(config)),
      gen_high_to_low_(MakeGenerator(config)),
      disc_low_(MakeDiscriminator(config)),
      disc_high_(MakeDiscriminator(config)) {}

void CfGanModel::Initialize(std::mt19937_64& rng) {
  gen_low_to_high_.Initialize(rng, config_.weight_init_scale);
  gen_high_to_low_.Initialize(rng, config_.weight_init_scale);
  disc_low_.Initialize(rng, config_.weight_init_scale);
  disc_high_.Initialize(rng, config_.weight_init_scale);
}

FeatureVector CfGanModel::Translate(const FeatureVector& normalized,
                                    Direction direction) const {
  return VectorOf(Generate(direction, RowOf(normalized)), 0);
}

nn::Matrix CfGanModel::Generate(Direction direction, const nn::Matrix& rows) const {
  nn::Matrix out = generator(direction).Forward(rows);
  if (config_.residual) out += rows;
  return out;
}

bool CfGanModel::AllFinite() const {
  return gen_low_to_high_.params().AllFinite() &&
         gen_high_to_low_.params().AllFinite() &&
         disc_low_.params().AllFinite() && disc_high_.params().AllFinite();
}

std::string CfGanModel::ToJson() const {
  Json j{{"version", kModelVersion},
         {"feature_dim", kNumFeatures},
         {"config", GanConfigToJson(config_)},
         {"norm_stats", NormStatsToJsonValue(norm_stats_)},
         {"networks",
          {{"gen_low_to_high", gen_low_to_high_.ToJson()},
           {"gen_high_to_low", gen_high_to_low_.ToJson()},
           {"disc_low", disc_low_.ToJson()},
           {"disc_high", disc_high_.ToJson()}}}};
  return j.dump(2) + "\n";
}

CfGanModel CfGanModel::FromJson(std::string_view text) {
  constexpr std::string_view what = "gan model";
  const Json j = ParseJson(text, what);
  if (RequireString(j, "version", what) != kModelVersion) {
    throw Error("invalid-model", "expected version cfgan-v1");
  }
  const GanConfig config = GanConfigFromJson(RequireField(j, "config", what));
  CfGanModel model(config,
                   NormStatsFromJsonValue(RequireField(j, "norm_stats", what)));
  const Json& nets = RequireField(j, "networks", what);
  auto load = [&](const char* name, nn::Network& dst, int out_dim) {
    nn::Network net = nn::Network::FromJson(RequireField(nets, name, what), name);
    if (net.input_size() != kDim || net.output_size() != out_dim ||
        net.sizes() != dst.sizes() || net.activations() != dst.activations()) {
      throw Error("invalid-model", std::string(name) +
                                       " shape does not match the stored config");
    }
    dst = std::move(net);
  };
  load("gen_low_to_high", model.gen_low_to_high_, kDim);
  load("gen_high_to_low", model.gen_high_to_low_, kDim);
  load("disc_low", model.disc_low_, 1);
  load("disc_high", model.disc_high_, 1);
  return model;
}

void CfGanModel::Save(const std::filesystem::path& path) const {
  WriteFileAtomic(path, ToJson());
}

CfGanModel CfGanModel::Load(const std::filesystem::path& path) {
  return FromJson(ReadFile(path));
}

FeatureVector Counterfactual(const CounterfactualGenerator& generator,
                             const FeatureVector& normalized,
                             Direction direction) {
  if (!normalized.AllFinite()) {
    throw Error("invalid-input", "feature vector has non-finite entries");
  }
  return generator.Translate(normalized, direction);
}

GeneratorLoss GeneratorObjective(const CfGanModel& model, const MlpModel& clf,
                                 const nn::Matrix& x_low,
                                 const nn::Matrix& x_high,
                                 nn::ParamSet* grad_lh, nn::ParamSet* grad_hl) {
  const GanConfig& c = model.config();
  const nn::Network& g_lh = model.gen_low_to_high();
  const nn::Network& g_hl = model.gen_high_to_low();
  const bool want_grads = grad_lh != nullptr || grad_hl != nullptr;

  // With a residual generator G(x) = x + net(x) the skip adds the upstream
  // gradient to the input gradient.
  auto fwd = [&](const nn::Network& g, const nn::Matrix& x, nn::Tape& t) {
    nn::Matrix y = g.Forward(x, t);
    if (c.residual) y += x;
    return y;
  };
  auto bwd = [&](const nn::Network& g, const nn::Tape& t, const nn::Matrix& d,
                 nn::ParamSet* grads) {
    nn::Matrix dx = g.Backward(t, d, grads);
    if (c.residual) dx += d;
    return dx;
  };

  nn::Tape t_fake_high, t_fake_low, t_rec_low, t_rec_high, t_dh, t_dl;
  const nn::Matrix fake_high = fwd(g_lh, x_low, t_fake_high);
  const nn::Matrix fake_low = fwd(g_hl, x_high, t_fake_low);
  const nn::Matrix rec_low = fwd(g_hl, fake_high, t_rec_low);
  const nn::Matrix rec_high = fwd(g_lh, fake_low, t_rec_high);
  const nn::Matrix d_high = model.disc_high().Forward(fake_high, t_dh);
  const nn::Matrix d_low = model.disc_low().Forward(fake_low, t_dl);

  const double n_low = static_cast<double>(x_low.rows());
  const double n_high = static_cast<double>(x_high.rows());
  const double e_low = n_low * kDim, e_high = n_high * kDim;

  GeneratorLoss loss;
  loss.adversarial = (d_high.array() - 1.0).square().sum() / n_low +
                     (d_low.array() - 1.0).square().sum() / n_high;
  loss.cycle = (rec_low - x_low).cwiseAbs().sum() / e_low +
               (rec_high - x_high).cwiseAbs().sum() / e_high;

  nn::Matrix d_fake_high_cf, d_fake_low_cf;
  loss.counterfactual =
      ClassifierTargetLoss(clf, fake_high, ClassIndex(EngagementClass::kHigh),
                           want_grads ? &d_fake_high_cf : nullptr) +
      ClassifierTargetLoss(clf, fake_low, ClassIndex(EngagementClass::kLow),
                           want_grads ? &d_fake_low_cf : nullptr);

  nn::Tape t_id_high, t_id_low;
  nn::Matrix id_high, id_low;
  if (c.lambda_identity > 0.0) {
    id_high = fwd(g_lh, x_high, t_id_high);
    id_low = fwd(g_hl, x_low, t_id_low);
    loss.identity = (id_high - x_high).cwiseAbs().sum() / e_high +
                    (id_low - x_low).cwiseAbs().sum() / e_low;
  }
  loss.total = loss.adversarial + c.lambda_cycle * loss.cycle +
               c.lambda_counterfactual * loss.counterfactual +
               c.lambda_identity * loss.identity;
  if (!want_grads) return loss;

  nn::ParamSet scratch_lh = g_lh.params().ZerosLike();
  nn::ParamSet scratch_hl = g_hl.params().ZerosLike();
  nn::ParamSet* glh = grad_lh != nullptr ? grad_lh : &scratch_lh;
  nn::ParamSet* ghl = grad_hl != nullptr ? grad_hl : &scratch_hl;

  // Cycle terms flow through the second generator into the first one's
  // output.
  nn::Matrix d_fake_high =
      bwd(g_hl, t_rec_low, c.lambda_cycle * Sign(rec_low - x_low) / e_low, ghl);
  nn::Matrix d_fake_low =
      bwd(g_lh, t_rec_high, c.lambda_cycle * Sign(rec_high - x_high) / e_high, glh);

  d_fake_high += model.disc_high().Backward(
      t_dh, 2.0 * (d_high.array() - 1.0).matrix() / n_low, nullptr);
  d_fake_low += model.disc_low().Backward(
      t_dl, 2.0 * (d_low.array() - 1.0).matrix() / n_high, nullptr);
  d_fake_high += c.lambda_counterfactual * d_fake_high_cf;
  d_fake_low += c.lambda_counterfactual * d_fake_low_cf;

  g_lh.Backward(t_fake_high, d_fake_high, glh);
  g_hl.Backward(t_fake_low, d_fake_low, ghl);

  if (c.lambda_identity > 0.0) {
    bwd(g_lh, t_id_high, c.lambda_identity * Sign(id_high - x_high) / e_high, glh);
    bwd(g_hl, t_id_low, c.lambda_identity * Sign(id_low - x_low) / e_low, ghl);
  }
  return loss;
}

double DiscriminatorObjective(const CfGanModel& model, const nn::Matrix& x_low,
                              const nn::Matrix& x_high,
                              nn::ParamSet* grad_disc_low,
                              nn::ParamSet* grad_disc_high) {
  const nn::Matrix fake_high = model.Generate(Direction::kLowToHigh, x_low);
  const nn::Matrix fake_low = model.Generate(Direction::kHighToLow, x_high);

  double total = 0.0;
  auto domain = [&](const nn::Network& disc, const nn::Matrix& real,
                    const nn::Matrix& fake, nn::ParamSet* grads) {
    nn::Tape t_real, t_fake;
    const nn::Matrix d_real = disc.Forward(real, t_real);
    const nn::Matrix d_fake = disc.Forward(fake, t_fake);
    const double n_real = static_cast<double>(real.rows());
    const double n_fake = static_cast<double>(fake.rows());
    total += 0.5 * ((d_real.array() - 1.0).square().sum() / n_real +
                    d_fake.array().square().sum() / n_fake);
    if (grads != nullptr) {
      disc.Backward(t_real, (d_real.array() - 1.0).matrix() / n_real, grads);
      disc.Backward(t_fake, d_fake / n_fake, grads);
    }
  };
  domain(model.disc_high(), x_high, fake_high, grad_disc_high);
  domain(model.disc_low(), x_low, fake_low, grad_disc_low);
  return total;
}

GanTrainResult TrainGan(const Dataset& low_set, const Dataset& high_set,
                        const MlpModel& clf, const GanConfig& config) {
  ValidateGanConfig(config);
  if (low_set.empty() || high_set.empty()) {
    throw Error("empty-dataset", "both LOW and HIGH partitions must be non-empty");
  }
  RequireSameStats(low_set, clf.norm_stats(), "LOW partition");
  RequireSameStats(high_set, clf.norm_stats(), "HIGH partition");

  std::mt19937_64 rng(config.seed);
  GanTrainResult result;
  result.model = CfGanModel(config, clf.norm_stats());
  CfGanModel& model = result.model;
  model.Initialize(rng);

  const nn::Matrix x_low = ToMatrix(low_set);
  const nn::Matrix x_high = ToMatrix(high_set);
  std::vector<std::size_t> order_low(low_set.size()), order_high(high_set.size());
  std::iota(order_low.begin(), order_low.end(), 0);
  std::iota(order_high.begin(), order_high.end(), 0);

  const auto batch = static_cast<std::size_t>(config.batch_size);
  const std::size_t n_max = std::max(low_set.size(), high_set.size());
  const std::size_t steps = (n_max + batch - 1) / batch;

  nn::Adam opt_g_lh(config.learning_rate), opt_g_hl(config.learning_rate);
  nn::Adam opt_d_low(config.learning_rate), opt_d_high(config.learning_rate);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order_low.begin(), order_low.end(), rng);
    std::shuffle(order_high.begin(), order_high.end(), rng);
    GanEpochLoss epoch_loss;
    for (std::size_t step = 0; step < steps; ++step) {
      const std::size_t start = step * batch;
      const std::size_t count = std::min(batch, n_max - start);
      const nn::Matrix xb_low = Gather(x_low, order_low, start, count);
      const nn::Matrix xb_high = Gather(x_high, order_high, start, count);

      nn::ParamSet gd_low = model.disc_low().params().ZerosLike();
      nn::ParamSet gd_high = model.disc_high().params().ZerosLike();
      epoch_loss.discriminator +=
          DiscriminatorObjective(model, xb_low, xb_high, &gd_low, &gd_high);
      opt_d_low.Step(model.disc_low().params(), gd_low);
      opt_d_high.Step(model.disc_high().params(), gd_high);

      nn::ParamSet gg_lh = model.gen_low_to_high().params().ZerosLike();
      nn::ParamSet gg_hl = model.gen_high_to_low().params().ZerosLike();
      const GeneratorLoss g =
          GeneratorObjective(model, clf, xb_low, xb_high, &gg_lh, &gg_hl);
      opt_g_lh.Step(model.gen_low_to_high().params(), gg_lh);
      opt_g_hl.Step(model.gen_high_to_low().params(), gg_hl);

      epoch_loss.generator.adversarial += g.adversarial;
      epoch_loss.generator.cycle += g.cycle;
      epoch_loss.generator.counterfactual += g.counterfactual;
      epoch_loss.generator.identity += g.identity;
      epoch_loss.generator.total += g.total;
    }
    const double inv = 1.0 / static_cast<double>(steps);
    epoch_loss.discriminator *= inv;
    epoch_loss.generator.adversarial *= inv;
    epoch_loss.generator.cycle *= inv;
    epoch_loss.generator.counterfactual *= inv;
    epoch_loss.generator.identity *= inv;
    epoch_loss.generator.total *= inv;
    if (!std::isfinite(epoch_loss.discriminator) ||
        !std::isfinite(epoch_loss.generator.total) || !model.AllFinite()) {
      throw Error("training-diverged",
                  "gan loss became non-finite at epoch " + std::to_string(epoch));
    }
    result.trace.push_back(epoch_loss);
  }
  return result;
}

double FlipRate(const CounterfactualGenerator& generator,
                const ProbabilityModel& clf, const Dataset& eval_set) {
  if (eval_set.empty()) {
    throw Error("empty-dataset", "flip rate needs at least one sample");
  }
  std::size_t flipped = 0;
  for (const auto& s : eval_set.samples) {
    const EngagementClass before = Predict(clf, s.features).Predicted();
    const FeatureVector cf =
        Counterfactual(generator, s.features, DirectionAwayFrom(before));
    if (Predict(clf, cf).Predicted() != before) ++flipped;
  }
  return static_cast<double>(flipped) / static_cast<double>(eval_set.size());
}

Dataset FilterByPrediction(const ProbabilityModel& clf, const Dataset& dataset,
                           EngagementClass predicted) {
  Dataset out;
  out.norm_stats = dataset.norm_stats;
  for (const auto& s : dataset.samples) {
    if (Predict(clf, s.features).Predicted() == predicted) out.samples.push_back(s);
  }
  return out;
}

double MeanCycleL1(const CfGanModel& model, const Dataset& normalized) {
  if (normalized.empty()) {
    throw Error("empty-dataset", "cycle error needs at least one sample");
  }
  double total = 0.0;
  for (const auto& s : normalized.samples) {
    const Direction there = DirectionAwayFrom(s.label);
    const Direction back = there == Direction::kLowToHigh
                               ? Direction::kHighToLow
                               : Direction::kLowToHigh;
    const FeatureVector rec =
        model.Translate(model.Translate(s.features, there), back);
    for (std::size_t j = 0; j < kNumFeatures; ++j) {
      total += std::abs(rec[j] - s.features[j]);
    }
  }
  return total / static_cast<double>(normalized.size());
}

double MeanInterClassL1(const Dataset& normalized) {
  double total = 0.0;
  std::size_t pairs = 0;
  for (const auto& a : normalized.samples) {
    if (a.label != EngagementClass::kLow) continue;
    for (const auto& b : normalized.samples) {
      if (b.label != EngagementClass::kHigh) continue;
      for (std::size_t j = 0; j < kNumFeatures; ++j) {
        total += std::abs(a.features[j] - b.features[j]);
      }
      ++pairs;
    }
  }
  if (pairs == 0) {
    throw Error("degenerate-labels", "inter-class distance needs both classes");
  }
  return total / static_cast<double>(pairs);
}

GanGradCheck GradCheckGan(const CfGanModel& model, const MlpModel& clf,
                          const nn::Matrix& x_low, const nn::Matrix& x_high,
                          std::size_t n_coords, std::uint64_t seed) {
  CfGanModel probe = model;
  GanGradCheck out;

  nn::ParamSet g_lh = probe.gen_low_to_high().params().ZerosLike();
  nn::ParamSet g_hl = probe.gen_high_to_low().params().ZerosLike();
  GeneratorObjective(probe, clf, x_low, x_high, &g_lh, &g_hl);
  auto gen_loss = [&] {
    return GeneratorObjective(probe, clf, x_low, x_high, nullptr, nullptr).total;
  };
  out.gen_low_to_high =
      nn::CheckGradients(probe.gen_low_to_high().params(), g_lh, gen_loss,
                         n_coords, seed)
          .max_relative_error;
  out.gen_high_to_low =
      nn::CheckGradients(probe.gen_high_to_low().params(), g_hl, gen_loss,
                         n_coords, seed + 1)
          .max_relative_error;

  nn::ParamSet d_low = probe.disc_low().params().ZerosLike();
  nn::ParamSet d_high = probe.disc_high().params().ZerosLike();
  DiscriminatorObjective(probe, x_low, x_high, &d_low, &d_high);
  auto disc_loss = [&] {
    return DiscriminatorObjective(probe, x_low, x_high, nullptr, nullptr);
  };
  out.disc_low = nn::CheckGradients(probe.disc_low().params(), d_low,
                                    disc_loss, n_coords, seed + 2)
                     .max_relative_error;
  out.disc_high = nn::CheckGradients(probe.disc_high().params(), d_high,
                                     disc_loss, n_coords, seed + 3)
                      .max_relative_error;
  return out;
}

}  // namespace engagecf
