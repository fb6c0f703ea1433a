#include "gpsmem/memory.hpp"

#include <cmath>
#include <stdexcept>

#include "gpsmem/linalg.hpp"

namespace gpsmem {

VectorXd memory_step(const VectorXd& h, const VectorXd& m,
                     const VectorXd& noise) {
  if (m.size() != h.size() || noise.size() != h.size())
    throw std::invalid_argument("memory_step: dimension mismatch");
  return h + m + noise;
}

Actor controller_actor(const TimeVaryingController& ctrl, bool stochastic) {
  return [&ctrl, stochastic](int t, const VectorXd& x_aug,
                             const VectorXd& /*o_aug*/, Rng& rng) {
    VectorXd u = ctrl.K[t] * x_aug + ctrl.k[t];
    if (stochastic) u += MatrixXd(chol_psd(ctrl.C[t]).matrixL()) *
                         rng.normal_vector(static_cast<int>(u.size()));
    return u;
  };
}

Actor policy_actor(const MemoryPolicy& policy, bool stochastic) {
  return [&policy, stochastic](int /*t*/, const VectorXd& /*x_aug*/,
                               const VectorXd& o_aug, Rng& rng) {
    return stochastic ? policy.sample(o_aug, rng) : policy.mean(o_aug);
  };
}

TrajectorySample augment_rollout(const Environment& env,
                                 const AugmentedSpec& aspec, const Actor& actor,
                                 int cond, Rng& rng, bool zero_memory_noise) {
  const int T = aspec.T;
  const int d_h = aspec.d_h;
  const double noise_std = zero_memory_noise ? 0.0 : std::sqrt(aspec.sigma2);

  TrajectorySample sample;
  sample.states.reserve(T);
  sample.observations.reserve(T);
  sample.actions.reserve(T);
  sample.costs.reserve(T);

  VectorXd x = env.spec().conditions[cond];
  VectorXd h = VectorXd::Zero(d_h);
  for (int t = 0; t < T; ++t) {
    VectorXd x_aug(aspec.d_xa());
    x_aug << x, h;
    VectorXd o_aug(aspec.d_oa());
    o_aug << env.observe(x, t, cond), h;

    VectorXd u_aug = actor(t, x_aug, o_aug, rng);
    if (u_aug.size() != aspec.d_ua())
      throw std::invalid_argument(
          "augment_rollout: actor output does not match augmented action dim");
    const VectorXd u = u_aug.head(aspec.d_u);
    const VectorXd m = u_aug.tail(d_h);

    sample.states.push_back(std::move(x_aug));
    sample.observations.push_back(std::move(o_aug));
    sample.costs.push_back(env.cost(x, u, t, cond));
    sample.actions.push_back(std::move(u_aug));

    if (t + 1 < T) {
      x = env.step(x, u, t);
      h = memory_step(h, m, noise_std * rng.normal_vector(d_h));
      if (!x.allFinite() || !h.allFinite())
        throw std::runtime_error("augment_rollout: non-finite state at t=" +
                                 std::to_string(t + 1));
    }
  }
  return sample;
}

RnnView rnn_view(const MemoryPolicy& policy, int d_u, int d_h) {
  RnnView view;
  view.output = [&policy, d_u](const VectorXd& o, const VectorXd& h) {
    VectorXd in(o.size() + h.size());
    in << o, h;
    return VectorXd(policy.mean(in).head(d_u));
  };
  view.next_memory = [&policy, d_h](const VectorXd& o, const VectorXd& h) {
    VectorXd in(o.size() + h.size());
    in << o, h;
    return VectorXd(h + policy.mean(in).tail(d_h));
  };
  return view;
}

}  // namespace gpsmem
