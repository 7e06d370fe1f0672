#include "cmzdril/policy.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace cmzdril {

namespace {
constexpr double kLogTwoPi = 1.8378770664093454835606594728112;
}

GaussianPolicy::GaussianPolicy(int obs_dim, int act_dim,
                               const std::vector<int>& hidden,
                               std::uint64_t seed)
    : obs_dim_(obs_dim), act_dim_(act_dim) {
  Rng rng(seed);
  net_ = Mlp(obs_dim, hidden, act_dim, 0.01, rng);
  log_std_ = Tensor(act_dim, 1);  // sigma = 1 at init
}

Vec GaussianPolicy::mean(const Vec& obs) const {
  if (obs.size() != obs_dim_)
    throw std::invalid_argument("GaussianPolicy: observation dimension mismatch");
  return net_.forward(obs);
}

Mat GaussianPolicy::mean(const Mat& obs) const {
  if (obs.cols() != obs_dim_)
    throw std::invalid_argument("GaussianPolicy: observation dimension mismatch");
  return net_.forward(obs);
}

void GaussianPolicy::set_log_std(const Vec& v) {
  if (v.size() != act_dim_)
    throw std::invalid_argument("GaussianPolicy: log_std dimension mismatch");
  log_std_.value.col(0) = v;
}

void GaussianPolicy::clamp_log_std(double lo, double hi) {
  log_std_.value = log_std_.value.array().max(lo).min(hi);
}

double GaussianPolicy::entropy() const {
  // Diagonal Gaussian: sum_d (log s_d + 0.5 log(2 pi e))
  return log_std_.value.sum() +
         0.5 * act_dim_ * (kLogTwoPi + 1.0);
}

Params GaussianPolicy::parameters() {
  Params out = net_.parameters();
  out.push_back(&log_std_);
  return out;
}

double gaussian_nll(const GaussianPolicy& policy, const Vec& obs,
                    const Vec& action) {
  if (action.size() != policy.act_dim())
    throw std::invalid_argument("gaussian_nll: action dimension mismatch");
  const Vec mu = policy.mean(obs);
  const Vec log_std = policy.log_std();
  const Vec z = (action - mu).array() / log_std.array().exp();
  return log_std.sum() + 0.5 * policy.act_dim() * kLogTwoPi +
         0.5 * z.squaredNorm();
}

double gaussian_nll_backward(GaussianPolicy& policy, const Mat& obs,
                             const Mat& actions) {
  if (obs.rows() != actions.rows())
    throw std::invalid_argument("gaussian_nll_backward: row count mismatch");
  if (actions.cols() != policy.act_dim())
    throw std::invalid_argument("gaussian_nll_backward: action dimension mismatch");
  const Eigen::Index n = obs.rows();
  if (n == 0) throw std::invalid_argument("gaussian_nll_backward: empty batch");

  MlpCache cache;
  const Mat mu = policy.net().forward(obs, cache);
  const Vec log_std = policy.log_std();
  const Vec sigma = log_std.array().exp();
  const Vec inv_var = sigma.array().square().inverse();

  Mat resid = actions - mu;                       // n x act_dim
  Mat z2 = resid.array().square().rowwise() *
           inv_var.transpose().array();           // ((a-mu)/s)^2
  const double loss =
      log_std.sum() + 0.5 * policy.act_dim() * kLogTwoPi +
      0.5 * z2.sum() / static_cast<double>(n);

  // d(mean nll)/d(mu) = (mu - a) / s^2 / n
  Mat grad_mu = (-resid).array().rowwise() * inv_var.transpose().array();
  grad_mu /= static_cast<double>(n);
  policy.net().backward(cache, grad_mu);

  // d(mean nll)/d(log_std_d) = 1 - mean_i ((a-mu)/s)^2
  Vec grad_log_std =
      Vec::Ones(policy.act_dim()) - z2.colwise().mean().transpose();
  policy.log_std_tensor().grad.col(0) += grad_log_std;
  return loss;
}

double gaussian_nll_backward(GaussianPolicy& policy, const Vec& obs,
                             const Vec& action) {
  return gaussian_nll_backward(policy, Mat(obs.transpose()),
                               Mat(action.transpose()));
}

double log_prob(const GaussianPolicy& policy, const Vec& obs,
                const Vec& action) {
  return -gaussian_nll(policy, obs, action);
}

Vec log_prob_rows(const GaussianPolicy& policy, const Mat& means,
                  const Mat& actions) {
  const Vec log_std = policy.log_std();
  const Vec sigma = log_std.array().exp();
  const double constant =
      log_std.sum() + 0.5 * policy.act_dim() * kLogTwoPi;
  Mat z = (actions - means).array().rowwise() /
          sigma.transpose().array();
  return (-0.5 * z.array().square().rowwise().sum() - constant).matrix();
}

std::pair<Vec, double> sample_action(const GaussianPolicy& policy,
                                     const Vec& obs, Rng& rng) {
  const Vec mu = policy.mean(obs);
  const Vec sigma = policy.sigma();
  const Vec noise = rng.normal_vector(policy.act_dim());
  Vec action = mu.array() + sigma.array() * noise.array();
  const double lp = -gaussian_nll(policy, obs, action);
  return {std::move(action), lp};
}

bool policies_bitwise_equal(const GaussianPolicy& a, const GaussianPolicy& b) {
  if (a.obs_dim() != b.obs_dim() || a.act_dim() != b.act_dim()) return false;
  const auto pa = a.net().parameters();
  const auto pb = b.net().parameters();
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (pa[i]->value.rows() != pb[i]->value.rows() ||
        pa[i]->value.cols() != pb[i]->value.cols())
      return false;
    if (std::memcmp(pa[i]->value.data(), pb[i]->value.data(),
                    sizeof(double) * pa[i]->value.size()) != 0)
      return false;
  }
  const Vec la = a.log_std();
  const Vec lb = b.log_std();
  return std::memcmp(la.data(), lb.data(), sizeof(double) * la.size()) == 0;
}

}  // namespace cmzdril
