#pragma once

#include <Eigen/Dense>
#include <vector>

#include "gpsmem/rng.hpp"

namespace gpsmem {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Feedforward conditional-Gaussian policy over augmented observations:
// mean from a small relu MLP, constant action covariance. The last d_h
// outputs are memory-write actions.
class MemoryPolicy {
 public:
  struct Layer {
    MatrixXd W;
    VectorXd b;
  };

  MemoryPolicy() = default;
  // widths includes input and output dims, e.g. {6, 10, 6}.
  // Weights ~ uniform scaled by 1/sqrt(fan-in), biases zero.
  MemoryPolicy(const std::vector<int>& widths, double action_cov_scale,
               Rng& rng);

  int input_dim() const { return layers_.empty() ? 0 : static_cast<int>(layers_.front().W.cols()); }
  int output_dim() const { return layers_.empty() ? 0 : static_cast<int>(layers_.back().b.size()); }

  VectorXd mean(const VectorXd& obs) const;
  // d mean / d obs at the given input (exact for the piecewise-linear net)
  MatrixXd jacobian(const VectorXd& obs) const;
  VectorXd sample(const VectorXd& obs, Rng& rng) const;

  const MatrixXd& action_cov() const { return action_cov_; }
  void set_action_cov(MatrixXd cov);

  // Observation normalization: obs -> (obs - shift) .* inv_scale, applied
  // before the first layer. Identity until set.
  void set_normalization(const VectorXd& shift, const VectorXd& scale);
  const VectorXd& norm_shift() const { return norm_shift_; }
  const VectorXd& norm_scale() const { return norm_scale_; }

  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }

  int num_parameters() const;

 private:
  std::vector<Layer> layers_;
  MatrixXd action_cov_;
  VectorXd norm_shift_, norm_scale_;
};

// One supervised target: match the teacher's conditional mean at a sampled
// observation, weighted by nu C^{-1}, plus a linear multiplier term.
struct TrainDatum {
  VectorXd obs;
  VectorXd target;    // teacher mean at the sampled augmented state
  MatrixXd prec;      // C_t^{-1}
  double nu = 1.0;
  VectorXd lambda;    // linear term coefficient on the policy mean
};

struct TrainOptions {
  double learn_rate = 1e-3;
  int batch_size = 32;
  int steps = 2000;
  int max_restarts = 3;
  double divergence_factor = 1e3;
  double final_lr_frac = 1.0;  // cosine-decay floor as a fraction of learn_rate
};

struct TrainStats {
  double initial_loss = 0.0;
  double final_loss = 0.0;
  int restarts = 0;
};

// Objective per datum: 1/2 nu (f(o)-mu)' C^{-1} (f(o)-mu) + f(o)'lambda,
// averaged over the dataset. Mini-batch adaptive-moment gradient descent;
// afterwards the action covariance is set to (mean of nu C^{-1})^{-1}.
TrainStats train_supervised(MemoryPolicy& policy,
                            const std::vector<TrainDatum>& data,
                            const TrainOptions& opt, Rng& rng);

double dataset_loss(const MemoryPolicy& policy,
                    const std::vector<TrainDatum>& data);

// Max relative error between analytic and central finite-difference gradients
// over `num_params` randomly chosen parameters (step 1e-5).
double gradient_check(const MemoryPolicy& policy,
                      const std::vector<TrainDatum>& batch, int num_params,
                      Rng& rng);

}  // namespace gpsmem
