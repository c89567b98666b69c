#include "engagecf/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "engagecf/error.hpp"

namespace engagecf::nn {

std::string_view ActivationName(Activation a) {
  return a == Activation::kTanh ? "tanh" : "linear";
}

Activation ParseActivation(std::string_view name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "linear") return Activation::kLinear;
  throw Error("invalid-json", "unknown activation '" + std::string(name) + "'");
}

ParamSet ParamSet::ZerosLike() const {
  ParamSet out;
  for (const auto& w : weights) out.weights.push_back(Matrix::Zero(w.rows(), w.cols()));
  for (const auto& b : biases) out.biases.push_back(Vector::Zero(b.size()));
  return out;
}

std::size_t ParamSet::Count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    n += static_cast<std::size_t>(weights[l].size() + biases[l].size());
  }
  return n;
}

bool ParamSet::AllFinite() const {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (!weights[l].allFinite() || !biases[l].allFinite()) return false;
  }
  return true;
}

double& ParamSet::At(std::size_t index) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    const auto w_size = static_cast<std::size_t>(weights[l].size());
    if (index < w_size) {
      const auto cols = static_cast<std::size_t>(weights[l].cols());
      return weights[l](static_cast<Eigen::Index>(index / cols),
                        static_cast<Eigen::Index>(index % cols));
    }
    index -= w_size;
    const auto b_size = static_cast<std::size_t>(biases[l].size());
    if (index < b_size) return biases[l](static_cast<Eigen::Index>(index));
    index -= b_size;
  }
  throw Error("invalid-argument", "parameter index out of range");
}

double ParamSet::At(std::size_t index) const {
  return const_cast<ParamSet*>(this)->At(index);
}

void ParamSet::Scale(double factor) {
  for (auto& w : weights) w *= factor;
  for (auto& b : biases) b *= factor;
}

void ParamSet::Add(const ParamSet& other, double factor) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l] += factor * other.weights[l];
    biases[l] += factor * other.biases[l];
  }
}

bool operator==(const ParamSet& a, const ParamSet& b) {
  if (a.weights.size() != b.weights.size()) return false;
  for (std::size_t l = 0; l < a.weights.size(); ++l) {
    if (a.weights[l].rows() != b.weights[l].rows() ||
        a.weights[l].cols() != b.weights[l].cols() ||
        a.biases[l].size() != b.biases[l].size()) {
      return false;
    }
    if (a.weights[l] != b.weights[l] || a.biases[l] != b.biases[l]) return false;
  }
  return true;
}

Network::Network(std::vector<int> sizes, std::vector<Activation> activations)
    : sizes_(std::move(sizes)), activations_(std::move(activations)) {
  if (sizes_.size() < 2 || activations_.size() != sizes_.size() - 1) {
    throw Error("invalid-argument", "network needs one activation per layer");
  }
  for (int s : sizes_) {
    if (s <= 0) throw Error("invalid-argument", "layer sizes must be positive");
  }
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    params_.weights.push_back(Matrix::Zero(sizes_[l], sizes_[l + 1]));
    params_.biases.push_back(Vector::Zero(sizes_[l + 1]));
  }
}

void Network::Initialize(std::mt19937_64& rng, double init_scale) {
  for (std::size_t l = 0; l < params_.weights.size(); ++l) {
    const double bound =
        init_scale / std::sqrt(static_cast<double>(sizes_[l]));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Matrix& w = params_.weights[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = dist(rng);
    }
    params_.biases[l].setZero();
  }
}

Matrix Network::Forward(const Matrix& input) const {
  Matrix a = input;
  for (std::size_t l = 0; l < activations_.size(); ++l) {
    Matrix z = (a * params_.weights[l]).rowwise() +
               params_.biases[l].transpose();
    if (activations_[l] == Activation::kTanh) z = z.array().tanh().matrix();
    a = std::move(z);
  }
  return a;
}

Matrix Network::Forward(const Matrix& input, Tape& tape) const {
  tape.inputs.clear();
  tape.outputs.clear();
  Matrix a = input;
  for (std::size_t l = 0; l < activations_.size(); ++l) {
    tape.inputs.push_back(a);
    Matrix z = (a * params_.weights[l]).rowwise() +
               params_.biases[l].transpose();
    if (activations_[l] == Activation::kTanh) z = z.array().tanh().matrix();
    tape.outputs.push_back(z);
    a = std::move(z);
  }
  return a;
}

Matrix Network::Backward(const Tape& tape, const Matrix& grad_output,
                         ParamSet* grads) const {
  Matrix delta = grad_output;
  for (std::size_t i = activations_.size(); i-- > 0;) {
    if (activations_[i] == Activation::kTanh) {
      delta.array() *= 1.0 - tape.outputs[i].array().square();
    }
    if (grads != nullptr) {
      grads->weights[i].noalias() += tape.inputs[i].transpose() * delta;
      grads->biases[i] += delta.colwise().sum().transpose();
    }
    delta = delta * params_.weights[i].transpose();
  }
  return delta;
}

Json Network::ToJson() const {
  Json layers = Json::array();
  for (std::size_t l = 0; l < activations_.size(); ++l) {
    const Matrix& w = params_.weights[l];
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(w.size()));
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) flat.push_back(w(r, c));
    }
    const Vector& b = params_.biases[l];
    layers.push_back({{"in", w.rows()},
                      {"out", w.cols()},
                      {"activation", ActivationName(activations_[l])},
                      {"weight", flat},
                      {"bias", std::vector<double>(b.data(), b.data() + b.size())}});
  }
  return Json{{"layers", layers}};
}

Network Network::FromJson(const Json& j, std::string_view what) {
  const Json& layers = RequireField(j, "layers", what);
  if (!layers.is_array() || layers.empty()) {
    throw Error("invalid-json", std::string(what) + ": 'layers' must be a non-empty array");
  }
  std::vector<int> sizes;
  std::vector<Activation> acts;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const Json& layer = layers[l];
    const int in = static_cast<int>(RequireNumber(layer, "in", what));
    const int out = static_cast<int>(RequireNumber(layer, "out", what));
    if (l == 0) {
      sizes.push_back(in);
    } else if (sizes.back() != in) {
      throw Error("invalid-json", std::string(what) + ": layer shapes do not chain");
    }
    sizes.push_back(out);
    acts.push_back(ParseActivation(RequireString(layer, "activation", what)));
  }
  Network net(sizes, acts);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const Json& w = RequireField(layers[l], "weight", what);
    const Json& b = RequireField(layers[l], "bias", what);
    Matrix& weight = net.params_.weights[l];
    Vector& bias = net.params_.biases[l];
    if (!w.is_array() || w.size() != static_cast<std::size_t>(weight.size()) ||
        !b.is_array() || b.size() != static_cast<std::size_t>(bias.size())) {
      throw Error("invalid-json", std::string(what) + ": layer " +
                                      std::to_string(l) +
                                      " parameter count does not match shape");
    }
    for (Eigen::Index r = 0; r < weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < weight.cols(); ++c) {
        weight(r, c) = w[static_cast<std::size_t>(r * weight.cols() + c)].get<double>();
      }
    }
    for (Eigen::Index i = 0; i < bias.size(); ++i) {
      bias(i) = b[static_cast<std::size_t>(i)].get<double>();
    }
  }
  if (!net.params_.AllFinite()) {
    throw Error("invalid-json", std::string(what) + ": non-finite parameters");
  }
  return net;
}

void SgdMomentum::Step(ParamSet& params, const ParamSet& grads) {
  if (velocity_.weights.empty()) velocity_ = params.ZerosLike();
  velocity_.Scale(momentum_);
  velocity_.Add(grads);
  params.Add(velocity_, -learning_rate_);
}

void Adam::Step(ParamSet& params, const ParamSet& grads) {
  if (m_.weights.empty()) {
    m_ = params.ZerosLike();
    v_ = params.ZerosLike();
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  auto update = [&](auto& p, auto& m, auto& v, const auto& g) {
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g);
    p.array() -= learning_rate_ * (m.array() / c1) /
                 ((v.array() / c2).sqrt() + epsilon_);
  };
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    update(params.weights[l], m_.weights[l], v_.weights[l], grads.weights[l]);
    update(params.biases[l], m_.biases[l], v_.biases[l], grads.biases[l]);
  }
}

GradCheckResult CheckGradients(ParamSet& params, const ParamSet& analytic,
                               const std::function<double()>& loss,
                               std::size_t n_coords, std::uint64_t seed,
                               double step) {
  const std::size_t total = params.Count();
  std::vector<std::size_t> coords(total);
  std::iota(coords.begin(), coords.end(), 0);
  if (n_coords > 0 && n_coords < total) {
    std::mt19937_64 rng(seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(n_coords);
  }
  GradCheckResult result;
  for (std::size_t idx : coords) {
    double& p = params.At(idx);
    const double saved = p;
    p = saved + step;
    const double up = loss();
    p = saved - step;
    const double down = loss();
    p = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double a = analytic.At(idx);
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
    result.max_relative_error =
        std::max(result.max_relative_error, std::abs(a - numeric) / denom);
    ++result.coordinates_checked;
  }
  return result;
}

}  // namespace engagecf::nn
