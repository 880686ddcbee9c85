#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "hitlbo/design_space.hpp"

namespace hitlbo::gp {

struct KernelHyperparams {
  std::array<double, kNumParams> lengthscales{1.0, 1.0, 1.0, 1.0, 1.0};
  double signal_variance = 1.0;
  double noise_variance = 1e-2;

  // Throws ParameterError on a non-positive lengthscale or signal variance,
  // or a negative noise variance.
  void validate() const;

  friend bool operator==(const KernelHyperparams&, const KernelHyperparams&) = default;
};

// Search box used by fit(), in natural (not log) units.
struct HyperparamBounds {
  double lengthscale_min = 0.01, lengthscale_max = 10.0;
  double signal_min = 1e-3, signal_max = 1e3;
  double noise_min = 1e-8, noise_max = 1.0;
};

// k(u,v) = s2 (1 + sqrt5 r + 5/3 r^2) exp(-sqrt5 r), r^2 = sum ((u_i - v_i)/l_i)^2.
double matern52_ard(const UnitPoint& u, const UnitPoint& v, const KernelHyperparams& hp);

// Rows of `x` are unit points.
Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& x, const KernelHyperparams& hp);
Eigen::MatrixXd cross_kernel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                             const KernelHyperparams& hp);

// Lower Cholesky factor of `k` with jitter escalation 1e-10 -> 1e-4 (x10)
// on failure. Returns the factor and the jitter that was needed.
std::pair<Eigen::MatrixXd, double> robust_cholesky(const Eigen::MatrixXd& k);

// -1/2 y'(K + s_n^2 I)^-1 y - 1/2 log|K + s_n^2 I| - n/2 log 2pi.
// Throws NumericalError when the matrix stays singular after max jitter.
double log_marginal_likelihood(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                               const KernelHyperparams& hp);

struct Standardization {
  double mean = 0.0;
  double scale = 1.0;

  double apply(double raw) const { return (raw - mean) / scale; }
  double invert(double z) const { return z * scale + mean; }

  // Zero mean / unit (population) variance; scale 1 when the spread is 0.
  static Standardization of(std::span<const double> raw);
  static Standardization identity() { return {}; }

  friend bool operator==(const Standardization&, const Standardization&) = default;
};

struct FitConfig {
  int restarts = 8;
  std::uint64_t seed = 0;
  std::optional<double> pinned_noise;  // standardized units
  std::optional<double> noise_floor;   // standardized units; raises noise_min
  bool standardize = true;
  int max_evaluations = 600;  // per restart
  HyperparamBounds bounds{};
};

struct Posterior {
  std::vector<double> mean;
  std::vector<double> std;
};

// Fitted GP over one scalar target. Immutable after construction; safe to
// share across threads.
class SurrogateModel {
 public:
  // Conditions `inputs` on `raw_targets` with fixed hyperparameters.
  static SurrogateModel build(const ParameterSpace& space, std::vector<ProcessCondition> inputs,
                              std::vector<double> raw_targets, const KernelHyperparams& hp,
                              Standardization standardization);

  // Latent posterior (noise excluded from std), in raw target units.
  Posterior posterior(std::span<const ProcessCondition> queries) const;
  Posterior posterior_unit(std::span<const UnitPoint> queries) const;
  std::pair<double, double> predict(const ProcessCondition& query) const;

  // Kriging-believer update: appends a noise-free observation with the same
  // hyperparameters and standardization.
  SurrogateModel condition_on(const ProcessCondition& x, double raw_value) const;

  const KernelHyperparams& hyperparams() const { return hp_; }
  const Standardization& standardization() const { return standardization_; }
  const ParameterSpace& space() const { return space_; }
  const std::vector<ProcessCondition>& inputs() const { return inputs_; }
  const std::vector<double>& raw_targets() const { return raw_targets_; }
  std::size_t size() const { return inputs_.size(); }
  std::size_t fantasy_count() const { return fantasies_; }
  double jitter() const { return jitter_; }
  // LML of the standardized training targets (fantasies excluded).
  double log_marginal_likelihood() const { return lml_; }

 private:
  SurrogateModel() = default;
  void factorize();

  ParameterSpace space_;
  std::vector<ProcessCondition> inputs_;
  std::vector<double> raw_targets_;
  std::size_t fantasies_ = 0;  // trailing inputs that carry no noise
  KernelHyperparams hp_;
  Standardization standardization_;
  Eigen::MatrixXd x_;      // n x 5 unit inputs
  Eigen::MatrixXd chol_;   // lower factor of K + noise
  Eigen::VectorXd alpha_;  // (K + noise)^-1 z
  double jitter_ = 0.0;
  double lml_ = 0.0;
};

// Multi-start Nelder-Mead on log hyperparameters maximizing the LML.
// Deterministic per seed; the first k starts do not depend on `restarts`, so
// more restarts never lower the achieved LML.
SurrogateModel fit(const ParameterSpace& space, std::span<const ProcessCondition> inputs,
                   std::span<const double> raw_targets, const FitConfig& config);

// Starting points used by fit(), exposed for tests.
std::vector<KernelHyperparams> initial_hyperparams(const FitConfig& config);

}  // namespace hitlbo::gp
