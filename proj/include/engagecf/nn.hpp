#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "engagecf/json_util.hpp"

namespace engagecf::nn {

// Rows are samples throughout: a batch is (batch x features).
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { kTanh, kLinear };

std::string_view ActivationName(Activation a);
Activation ParseActivation(std::string_view name);

// Parameters of a stack of dense layers. Also used as the gradient and
// optimizer-state container, since those share the parameter shapes.
struct ParamSet {
  std::vector<Matrix> weights;  // layer l: (in x out)
  std::vector<Vector> biases;   // layer l: (out)

  ParamSet ZerosLike() const;
  std::size_t Count() const;
  bool AllFinite() const;
  // Flat view in layer order, weights row-major then bias.
  double& At(std::size_t index);
  double At(std::size_t index) const;
  void Scale(double factor);
  void Add(const ParamSet& other, double factor = 1.0);

  friend bool operator==(const ParamSet& a, const ParamSet& b);
};

// Activations of every layer from one forward pass, consumed by Backward.
struct Tape {
  std::vector<Matrix> inputs;
  std::vector<Matrix> outputs;
};

class Network {
 public:
  Network() = default;
  // sizes = {in, h1, ..., out}; one activation per layer.
  Network(std::vector<int> sizes, std::vector<Activation> activations);

  // Uniform(-s, s) weights with s = init_scale / sqrt(fan_in); zero biases.
  void Initialize(std::mt19937_64& rng, double init_scale);

  Matrix Forward(const Matrix& input) const;
  Matrix Forward(const Matrix& input, Tape& tape) const;
  // Reverse pass. Accumulates dLoss/dParams into `grads` (when non-null) and
  // returns dLoss/dInput.
  Matrix Backward(const Tape& tape, const Matrix& grad_output,
                  ParamSet* grads) const;

  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  const std::vector<int>& sizes() const { return sizes_; }
  const std::vector<Activation>& activations() const { return activations_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }
  std::size_t layer_count() const { return activations_.size(); }

  Json ToJson() const;
  static Network FromJson(const Json& j, std::string_view what);

  friend bool operator==(const Network& a, const Network& b) {
    return a.sizes_ == b.sizes_ && a.activations_ == b.activations_ &&
           a.params_ == b.params_;
  }

 private:
  std::vector<int> sizes_;
  std::vector<Activation> activations_;
  ParamSet params_;
};

class SgdMomentum {
 public:
  SgdMomentum(double learning_rate, double momentum)
      : learning_rate_(learning_rate), momentum_(momentum) {}
  void Step(ParamSet& params, const ParamSet& grads);

 private:
  double learning_rate_;
  double momentum_;
  ParamSet velocity_;
};

class Adam {
 public:
  explicit Adam(double learning_rate, double beta1 = 0.5,
                double beta2 = 0.999, double epsilon = 1e-8)
      : learning_rate_(learning_rate),
        beta1_(beta1),
        beta2_(beta2),
        epsilon_(epsilon) {}
  void Step(ParamSet& params, const ParamSet& grads);

 private:
  double learning_rate_, beta1_, beta2_, epsilon_;
  ParamSet m_, v_;
  std::int64_t t_ = 0;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t coordinates_checked = 0;
};

// Compares `analytic` against central differences of `loss` with respect to
// `params`, over `n_coords` coordinates drawn with `seed` (all coordinates
// when n_coords is 0 or exceeds the count). Relative error is
// |a - n| / max(|a|, |n|, 1e-8). `params` is restored before returning.
GradCheckResult CheckGradients(ParamSet& params, const ParamSet& analytic,
                               const std::function<double()>& loss,
                               std::size_t n_coords, std::uint64_t seed,
                               double step = 1e-4);

}  // namespace engagecf::nn
