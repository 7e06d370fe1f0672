#include "cmzdril/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace cmzdril {

Mlp::Mlp(int in_dim, const std::vector<int>& hidden, int out_dim,
         double output_gain, Rng& rng)
    : in_dim_(in_dim), out_dim_(out_dim), hidden_(hidden) {
  if (in_dim <= 0 || out_dim <= 0)
    throw std::invalid_argument("Mlp: dimensions must be positive");
  std::vector<int> dims;
  dims.push_back(in_dim);
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(out_dim);

  layers_.resize(dims.size() - 1);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const int fan_in = dims[l];
    const int fan_out = dims[l + 1];
    const bool is_output = l + 1 == layers_.size();
    const double gain = is_output ? output_gain : 1.0;
    const double limit = gain * std::sqrt(6.0 / (fan_in + fan_out));
    Mat w(fan_out, fan_in);
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c)
        w(r, c) = rng.uniform(-limit, limit);
    layers_[l].weight = Tensor(std::move(w));
    layers_[l].bias = Tensor(fan_out, 1);
  }
}

Mat Mlp::forward(const Mat& x) const {
  if (x.cols() != in_dim_)
    throw std::invalid_argument("Mlp::forward: input dimension mismatch");
  Mat a = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Mat z = a * layers_[l].weight.value.transpose();
    z.rowwise() += layers_[l].bias.value.col(0).transpose();
    if (l + 1 < layers_.size())
      a = z.array().tanh();
    else
      a = std::move(z);
  }
  return a;
}

Vec Mlp::forward(const Vec& x) const {
  Mat row = x.transpose();
  return forward(row).row(0).transpose();
}

Mat Mlp::forward(const Mat& x, MlpCache& cache) const {
  if (x.cols() != in_dim_)
    throw std::invalid_argument("Mlp::forward: input dimension mismatch");
  cache.inputs.clear();
  cache.inputs.reserve(layers_.size());
  Mat a = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    cache.inputs.push_back(a);
    Mat z = a * layers_[l].weight.value.transpose();
    z.rowwise() += layers_[l].bias.value.col(0).transpose();
    if (l + 1 < layers_.size())
      a = z.array().tanh();
    else
      a = std::move(z);
  }
  return a;
}

void Mlp::backward(const MlpCache& cache, const Mat& grad_output) {
  if (cache.inputs.size() != layers_.size())
    throw std::invalid_argument("Mlp::backward: cache does not match network");
  Mat delta = grad_output;  // d(loss)/d(pre-activation of current layer)
  for (int l = static_cast<int>(layers_.size()) - 1; l >= 0; --l) {
    const Mat& input = cache.inputs[static_cast<std::size_t>(l)];
    layers_[l].weight.grad.noalias() += delta.transpose() * input;
    layers_[l].bias.grad.col(0).noalias() += delta.colwise().sum().transpose();
    if (l > 0) {
      // input to layer l is tanh(z_{l-1}); tanh' = 1 - tanh^2
      Mat back = delta * layers_[l].weight.value;
      delta = back.array() * (1.0 - input.array().square());
    }
  }
}

Params Mlp::parameters() {
  Params out;
  out.reserve(layers_.size() * 2);
  for (auto& layer : layers_) {
    out.push_back(&layer.weight);
    out.push_back(&layer.bias);
  }
  return out;
}

std::vector<const Tensor*> Mlp::parameters() const {
  std::vector<const Tensor*> out;
  out.reserve(layers_.size() * 2);
  for (const auto& layer : layers_) {
    out.push_back(&layer.weight);
    out.push_back(&layer.bias);
  }
  return out;
}

ValueNet::ValueNet(int obs_dim, const std::vector<int>& hidden,
                   std::uint64_t seed) {
  Rng rng(seed);
  // The head starts at exactly zero so early advantages are pure reward
  // signal; per-update normalization would otherwise blow tiny init noise up
  // to unit scale.
  net_ = Mlp(obs_dim, hidden, 1, 0.0, rng);
}

double ValueNet::value(const Vec& obs) const { return net_.forward(obs)[0]; }

Vec ValueNet::value(const Mat& obs) const { return net_.forward(obs).col(0); }

}  // namespace cmzdril
