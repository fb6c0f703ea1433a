#include "gpsmem/policy.hpp"

#include <cmath>
#include <stdexcept>

#include "gpsmem/linalg.hpp"

namespace gpsmem {

MemoryPolicy::MemoryPolicy(const std::vector<int>& widths,
                           double action_cov_scale, Rng& rng) {
  if (widths.size() < 2)
    throw std::invalid_argument("MemoryPolicy: need at least input+output");
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    Layer layer;
    const int fan_in = widths[l];
    const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
    layer.W.resize(widths[l + 1], fan_in);
    for (int r = 0; r < layer.W.rows(); ++r)
      for (int c = 0; c < layer.W.cols(); ++c)
        layer.W(r, c) = scale * (2.0 * rng.uniform() - 1.0);
    layer.b = VectorXd::Zero(widths[l + 1]);
    layers_.push_back(std::move(layer));
  }
  action_cov_ =
      action_cov_scale * MatrixXd::Identity(widths.back(), widths.back());
}

void MemoryPolicy::set_action_cov(MatrixXd cov) {
  action_cov_ = symmetrized(std::move(cov));
}

void MemoryPolicy::set_normalization(const VectorXd& shift,
                                     const VectorXd& scale) {
  norm_shift_ = shift;
  norm_scale_ = scale;
}

int MemoryPolicy::num_parameters() const {
  int n = 0;
  for (const auto& l : layers_)
    n += static_cast<int>(l.W.size() + l.b.size());
  return n;
}

namespace {

VectorXd normalize_obs(const MemoryPolicy& p, const VectorXd& obs) {
  if (p.norm_shift().size() == 0) return obs;
  return (obs - p.norm_shift()).cwiseQuotient(p.norm_scale());
}

struct ForwardCache {
  std::vector<VectorXd> acts;  // inputs to each layer, plus the final output
  std::vector<VectorXd> pres;  // hidden pre-activations
};

VectorXd forward(const MemoryPolicy& p, const VectorXd& obs,
                 ForwardCache* cache) {
  const auto& layers = p.layers();
  VectorXd a = normalize_obs(p, obs);
  if (cache) cache->acts.push_back(a);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    VectorXd pre = layers[l].W * a + layers[l].b;
    if (l + 1 < layers.size()) {
      if (cache) cache->pres.push_back(pre);
      a = pre.cwiseMax(0.0);
    } else {
      a = std::move(pre);
    }
    if (cache) cache->acts.push_back(a);
  }
  return a;
}

using Grads = std::vector<MemoryPolicy::Layer>;

Grads zero_grads(const MemoryPolicy& p) {
  Grads g;
  for (const auto& l : p.layers())
    g.push_back({MatrixXd::Zero(l.W.rows(), l.W.cols()),
                 VectorXd::Zero(l.b.size())});
  return g;
}

double datum_loss(const TrainDatum& d, const VectorXd& out) {
  const VectorXd r = out - d.target;
  double loss = 0.5 * d.nu * r.dot(d.prec * r);
  if (d.lambda.size()) loss += out.dot(d.lambda);
  return loss;
}

// Accumulates dL/dparams for one datum into g (unscaled).
void backward(const MemoryPolicy& p, const TrainDatum& d, Grads& g) {
  ForwardCache cache;
  const VectorXd out = forward(p, d.obs, &cache);
  VectorXd delta = d.nu * (d.prec * (out - d.target));
  if (d.lambda.size()) delta += d.lambda;

  const auto& layers = p.layers();
  for (int l = static_cast<int>(layers.size()) - 1; l >= 0; --l) {
    g[l].W.noalias() += delta * cache.acts[l].transpose();
    g[l].b += delta;
    if (l > 0) {
      delta = layers[l].W.transpose() * delta;
      delta = delta.cwiseProduct(
          (cache.pres[l - 1].array() > 0.0).cast<double>().matrix());
    }
  }
}

struct AdamState {
  Grads m, v;
  int t = 0;
};

void adam_step(MemoryPolicy& p, const Grads& g, AdamState& st, double lr) {
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  st.t += 1;
  const double bc1 = 1.0 - std::pow(b1, st.t);
  const double bc2 = 1.0 - std::pow(b2, st.t);
  auto& layers = p.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    st.m[l].W = b1 * st.m[l].W + (1 - b1) * g[l].W;
    st.v[l].W = b2 * st.v[l].W.array().matrix() +
                (1 - b2) * g[l].W.array().square().matrix();
    st.m[l].b = b1 * st.m[l].b + (1 - b1) * g[l].b;
    st.v[l].b = b2 * st.v[l].b.array().matrix() +
                (1 - b2) * g[l].b.array().square().matrix();
    layers[l].W.array() -=
        lr * (st.m[l].W.array() / bc1) /
        ((st.v[l].W.array() / bc2).sqrt() + eps);
    layers[l].b.array() -=
        lr * (st.m[l].b.array() / bc1) /
        ((st.v[l].b.array() / bc2).sqrt() + eps);
  }
}

}  // namespace

MatrixXd MemoryPolicy::jacobian(const VectorXd& obs) const {
  if (obs.size() != input_dim())
    throw std::invalid_argument("MemoryPolicy::jacobian: dimension mismatch");
  ForwardCache cache;
  forward(*this, obs, &cache);
  MatrixXd J = layers_.front().W;
  for (std::size_t l = 1; l < layers_.size(); ++l) {
    const VectorXd active =
        (cache.pres[l - 1].array() > 0.0).cast<double>();
    J = layers_[l].W * active.asDiagonal() * J;
  }
  if (norm_scale_.size())
    J = J * norm_scale_.cwiseInverse().asDiagonal();
  return J;
}

VectorXd MemoryPolicy::mean(const VectorXd& obs) const {
  if (obs.size() != input_dim())
    throw std::invalid_argument("MemoryPolicy::mean: dimension mismatch");
  return forward(*this, obs, nullptr);
}

VectorXd MemoryPolicy::sample(const VectorXd& obs, Rng& rng) const {
  VectorXd mu = mean(obs);
  if (action_cov_.isZero(0.0)) return mu;
  const auto llt = chol_psd(action_cov_);
  return mu + MatrixXd(llt.matrixL()) * rng.normal_vector(output_dim());
}

double dataset_loss(const MemoryPolicy& policy,
                    const std::vector<TrainDatum>& data) {
  double total = 0.0;
  for (const auto& d : data) total += datum_loss(d, policy.mean(d.obs));
  return total / static_cast<double>(data.size());
}

TrainStats train_supervised(MemoryPolicy& policy,
                            const std::vector<TrainDatum>& data,
                            const TrainOptions& opt, Rng& rng) {
  if (data.empty())
    throw std::invalid_argument("train_supervised: empty dataset");

  TrainStats stats;
  stats.initial_loss = dataset_loss(policy, data);

  const auto snapshot = policy.layers();
  double lr = opt.learn_rate;
  const int n = static_cast<int>(data.size());
  const double divergence_level =
      opt.divergence_factor * std::max(stats.initial_loss, 1e-12);

  for (int attempt = 0; attempt <= opt.max_restarts; ++attempt) {
    AdamState st;
    st.m = zero_grads(policy);
    st.v = zero_grads(policy);
    bool diverged = false;
    for (int step = 0; step < opt.steps; ++step) {
      Grads g = zero_grads(policy);
      const int bs = std::min(opt.batch_size, n);
      for (int i = 0; i < bs; ++i)
        backward(policy, data[rng.index(n)], g);
      for (auto& layer : g) {
        layer.W /= bs;
        layer.b /= bs;
      }
      const double frac =
          0.5 * (1.0 + std::cos(M_PI * step / std::max(opt.steps - 1, 1)));
      const double step_lr =
          lr * (opt.final_lr_frac + (1.0 - opt.final_lr_frac) * frac);
      adam_step(policy, g, st, step_lr);

      if ((step + 1) % 100 == 0 &&
          dataset_loss(policy, data) > divergence_level) {
        diverged = true;
        break;
      }
    }
    if (!diverged) break;
    policy.layers() = snapshot;
    lr *= 0.5;
    stats.restarts += 1;
  }

  stats.final_loss = dataset_loss(policy, data);

  // action covariance from the average precision of the matched teachers
  const int d_u = policy.output_dim();
  MatrixXd mean_prec = MatrixXd::Zero(d_u, d_u);
  for (const auto& d : data) mean_prec += d.nu * d.prec;
  mean_prec /= static_cast<double>(data.size());
  policy.set_action_cov(inverse_psd(mean_prec));
  return stats;
}

double gradient_check(const MemoryPolicy& policy,
                      const std::vector<TrainDatum>& batch, int num_params,
                      Rng& rng) {
  MemoryPolicy work = policy;
  Grads g = zero_grads(work);
  for (const auto& d : batch) backward(work, d, g);
  const double inv_n = 1.0 / static_cast<double>(batch.size());

  auto param_ref = [&work](int flat) -> double& {
    for (auto& l : work.layers()) {
      if (flat < l.W.size()) return l.W.data()[flat];
      flat -= static_cast<int>(l.W.size());
      if (flat < l.b.size()) return l.b.data()[flat];
      flat -= static_cast<int>(l.b.size());
    }
    throw std::out_of_range("gradient_check: parameter index");
  };
  auto grad_at = [&g](int flat) -> double {
    for (auto& l : g) {
      if (flat < l.W.size()) return l.W.data()[flat];
      flat -= static_cast<int>(l.W.size());
      if (flat < l.b.size()) return l.b.data()[flat];
      flat -= static_cast<int>(l.b.size());
    }
    throw std::out_of_range("gradient_check: parameter index");
  };

  const int total = work.num_parameters();
  const double h = 1e-5;
  double worst = 0.0;
  for (int i = 0; i < num_params; ++i) {
    const int idx = static_cast<int>(rng.index(total));
    double& ref = param_ref(idx);
    const double saved = ref;
    ref = saved + h;
    const double lo_plus = dataset_loss(work, batch);
    ref = saved - h;
    const double lo_minus = dataset_loss(work, batch);
    ref = saved;
    const double numeric = (lo_plus - lo_minus) / (2.0 * h);
    const double analytic = grad_at(idx) * inv_n;
    const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
    const double abs_err = std::abs(numeric - analytic);
    // near-zero gradients compared absolutely
    const double rel = (abs_err < 1e-8) ? 0.0 : abs_err / denom;
    worst = std::max(worst, rel);
  }
  return worst;
}

}  // namespace gpsmem
