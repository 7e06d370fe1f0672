#pragma once

#include <vector>

#include "cmzdril/rng.hpp"
#include "cmzdril/tensor.hpp"

namespace cmzdril {

/// Per-layer inputs saved by a cached forward pass; inputs[l] feeds layer l,
/// one sample per row.
struct MlpCache {
  std::vector<Mat> inputs;
};

/// Fixed-topology multilayer perceptron: tanh hidden layers, linear output.
/// Reverse-mode gradients are accumulated into each layer's Tensor buffers.
class Mlp {
 public:
  Mlp() = default;

  /// Weights use scaled uniform init: limit = gain * sqrt(6 / (fan_in +
  /// fan_out)), gain 1 for hidden layers and `output_gain` for the head.
  /// Biases start at zero.
  Mlp(int in_dim, const std::vector<int>& hidden, int out_dim,
      double output_gain, Rng& rng);

  /// Batched forward; one sample per row.
  Mat forward(const Mat& x) const;
  Vec forward(const Vec& x) const;

  /// Forward that records layer inputs for a later backward pass.
  Mat forward(const Mat& x, MlpCache& cache) const;

  /// Accumulates parameter gradients given d(loss)/d(output). The cache must
  /// come from a forward pass over the same parameters.
  void backward(const MlpCache& cache, const Mat& grad_output);

  Params parameters();
  std::vector<const Tensor*> parameters() const;

  int in_dim() const { return in_dim_; }
  int out_dim() const { return out_dim_; }
  const std::vector<int>& hidden_dims() const { return hidden_; }
  int layer_count() const { return static_cast<int>(layers_.size()); }
  Tensor& weight(int layer) { return layers_[layer].weight; }
  Tensor& bias(int layer) { return layers_[layer].bias; }
  const Tensor& weight(int layer) const { return layers_[layer].weight; }
  const Tensor& bias(int layer) const { return layers_[layer].bias; }

 private:
  struct Layer {
    Tensor weight;  // out_dim x in_dim
    Tensor bias;    // out_dim x 1
  };

  std::vector<Layer> layers_;
  int in_dim_ = 0;
  int out_dim_ = 0;
  std::vector<int> hidden_;
};

/// MLP with a scalar head, used as the PPO state-value estimator.
class ValueNet {
 public:
  ValueNet() = default;
  ValueNet(int obs_dim, const std::vector<int>& hidden, std::uint64_t seed);

  double value(const Vec& obs) const;
  Vec value(const Mat& obs) const;

  Mlp& net() { return net_; }
  const Mlp& net() const { return net_; }
  Params parameters() { return net_.parameters(); }
  int obs_dim() const { return net_.in_dim(); }

 private:
  Mlp net_;
};

}  // namespace cmzdril
