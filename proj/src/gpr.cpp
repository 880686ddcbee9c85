#include "hitlbo/gpr.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "hitlbo/error.hpp"
#include "hitlbo/rng.hpp"
#include "nelder_mead.hpp"

namespace hitlbo::gp {

namespace {

constexpr double kSqrt5 = 2.2360679774997896964;

inline double matern52_of_r2(double r2, double signal_variance) {
  const double r = std::sqrt(r2);
  return signal_variance * (1.0 + kSqrt5 * r + (5.0 / 3.0) * r2) * std::exp(-kSqrt5 * r);
}

Eigen::MatrixXd unit_matrix(const ParameterSpace& space, std::span<const ProcessCondition> cs) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(cs.size()), static_cast<Eigen::Index>(kNumParams));
  for (std::size_t i = 0; i < cs.size(); ++i) {
    const auto u = design::normalize(cs[i], space);
    for (std::size_t d = 0; d < kNumParams; ++d) {
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = u[d];
    }
  }
  return x;
}

// Parameter vector layout: log lengthscales[5], log signal, [log noise].
Eigen::VectorXd pack(const KernelHyperparams& hp, bool with_noise) {
  Eigen::VectorXd p(with_noise ? 7 : 6);
  for (std::size_t d = 0; d < kNumParams; ++d) p[static_cast<Eigen::Index>(d)] = std::log(hp.lengthscales[d]);
  p[5] = std::log(hp.signal_variance);
  if (with_noise) p[6] = std::log(hp.noise_variance);
  return p;
}

KernelHyperparams unpack(const Eigen::VectorXd& p, double fixed_noise) {
  KernelHyperparams hp;
  for (std::size_t d = 0; d < kNumParams; ++d) hp.lengthscales[d] = std::exp(p[static_cast<Eigen::Index>(d)]);
  hp.signal_variance = std::exp(p[5]);
  hp.noise_variance = p.size() > 6 ? std::exp(p[6]) : fixed_noise;
  return hp;
}

double effective_noise_min(const FitConfig& config) {
  double lo = config.bounds.noise_min;
  if (config.noise_floor) lo = std::max(lo, *config.noise_floor);
  return std::min(lo, config.bounds.noise_max);
}

}  // namespace

void KernelHyperparams::validate() const {
  for (double l : lengthscales) {
    if (!(l > 0.0) || !std::isfinite(l)) throw ParameterError("lengthscales must be positive");
  }
  if (!(signal_variance > 0.0)) throw ParameterError("signal variance must be positive");
  if (!(noise_variance >= 0.0)) throw ParameterError("noise variance must be non-negative");
}

double matern52_ard(const UnitPoint& u, const UnitPoint& v, const KernelHyperparams& hp) {
  hp.validate();
  double r2 = 0.0;
  for (std::size_t i = 0; i < kNumParams; ++i) {
    const double z = (u[i] - v[i]) / hp.lengthscales[i];
    r2 += z * z;
  }
  return matern52_of_r2(r2, hp.signal_variance);
}

Eigen::MatrixXd cross_kernel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                             const KernelHyperparams& hp) {
  Eigen::Array<double, 1, Eigen::Dynamic> inv_l(static_cast<Eigen::Index>(kNumParams));
  for (std::size_t d = 0; d < kNumParams; ++d) inv_l[static_cast<Eigen::Index>(d)] = 1.0 / hp.lengthscales[d];
  const Eigen::MatrixXd as = (a.array().rowwise() * inv_l).matrix();
  const Eigen::MatrixXd bs = (b.array().rowwise() * inv_l).matrix();
  Eigen::MatrixXd k(a.rows(), b.rows());
  for (Eigen::Index j = 0; j < b.rows(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      const double r2 = (as.row(i) - bs.row(j)).squaredNorm();
      k(i, j) = matern52_of_r2(r2, hp.signal_variance);
    }
  }
  return k;
}

Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& x, const KernelHyperparams& hp) {
  const Eigen::Index n = x.rows();
  Eigen::Array<double, 1, Eigen::Dynamic> inv_l(static_cast<Eigen::Index>(kNumParams));
  for (std::size_t d = 0; d < kNumParams; ++d) inv_l[static_cast<Eigen::Index>(d)] = 1.0 / hp.lengthscales[d];
  const Eigen::MatrixXd xs = (x.array().rowwise() * inv_l).matrix();
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    k(j, j) = hp.signal_variance;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      k(i, j) = k(j, i) = matern52_of_r2((xs.row(i) - xs.row(j)).squaredNorm(), hp.signal_variance);
    }
  }
  return k;
}

std::pair<Eigen::MatrixXd, double> robust_cholesky(const Eigen::MatrixXd& k) {
  const Eigen::Index n = k.rows();
  double jitter = 0.0;
  for (;;) {
    Eigen::LLT<Eigen::MatrixXd> llt;
    if (jitter == 0.0) {
      llt.compute(k);
    } else {
      llt.compute(k + jitter * Eigen::MatrixXd::Identity(n, n));
    }
    if (llt.info() == Eigen::Success) {
      Eigen::MatrixXd l = llt.matrixL();
      if (l.diagonal().minCoeff() > 0.0 && l.allFinite()) return {std::move(l), jitter};
    }
    jitter = jitter == 0.0 ? 1e-10 : jitter * 10.0;
    if (jitter > 1e-4 * (1.0 + 1e-9)) {
      throw NumericalError("covariance matrix not positive definite after maximum jitter");
    }
  }
}

double log_marginal_likelihood(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                               const KernelHyperparams& hp) {
  hp.validate();
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd k = kernel_matrix(x, hp);
  k.diagonal().array() += hp.noise_variance;
  const auto [l, jitter] = robust_cholesky(k);
  const Eigen::VectorXd w = l.triangularView<Eigen::Lower>().solve(y);
  const double log_det_half = l.diagonal().array().log().sum();
  return -0.5 * w.squaredNorm() - log_det_half -
         0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
}

Standardization Standardization::of(std::span<const double> raw) {
  if (raw.empty()) return {};
  double mean = 0.0;
  for (double v : raw) mean += v;
  mean /= static_cast<double>(raw.size());
  double ss = 0.0;
  for (double v : raw) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(raw.size()));
  return {mean, sd > 1e-12 ? sd : 1.0};
}

SurrogateModel SurrogateModel::build(const ParameterSpace& space,
                                     std::vector<ProcessCondition> inputs,
                                     std::vector<double> raw_targets, const KernelHyperparams& hp,
                                     Standardization standardization) {
  hp.validate();
  if (inputs.size() != raw_targets.size()) {
    throw ParameterError("inputs and targets differ in length");
  }
  if (inputs.empty()) throw ParameterError("a surrogate needs at least one observation");
  SurrogateModel m;
  m.space_ = space;
  m.inputs_ = std::move(inputs);
  m.raw_targets_ = std::move(raw_targets);
  m.hp_ = hp;
  m.standardization_ = standardization;
  m.factorize();
  return m;
}

void SurrogateModel::factorize() {
  const auto n = static_cast<Eigen::Index>(inputs_.size());
  x_ = unit_matrix(space_, inputs_);
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) z[i] = standardization_.apply(raw_targets_[static_cast<std::size_t>(i)]);

  Eigen::MatrixXd k = kernel_matrix(x_, hp_);
  const auto observed = n - static_cast<Eigen::Index>(fantasies_);
  for (Eigen::Index i = 0; i < observed; ++i) k(i, i) += hp_.noise_variance;
  auto [l, jitter] = robust_cholesky(k);
  chol_ = std::move(l);
  jitter_ = jitter;
  alpha_ = chol_.triangularView<Eigen::Lower>().transpose().solve(
      chol_.triangularView<Eigen::Lower>().solve(z));

  if (fantasies_ == 0) {
    const Eigen::VectorXd w = chol_.triangularView<Eigen::Lower>().solve(z);
    lml_ = -0.5 * w.squaredNorm() - chol_.diagonal().array().log().sum() -
           0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
  }
}

Posterior SurrogateModel::posterior_unit(std::span<const UnitPoint> queries) const {
  const auto m = static_cast<Eigen::Index>(queries.size());
  Eigen::MatrixXd q(m, static_cast<Eigen::Index>(kNumParams));
  for (Eigen::Index i = 0; i < m; ++i) {
    for (std::size_t d = 0; d < kNumParams; ++d) q(i, static_cast<Eigen::Index>(d)) = queries[static_cast<std::size_t>(i)][d];
  }
  const Eigen::MatrixXd ks = cross_kernel(x_, q, hp_);  // n x m
  const Eigen::VectorXd mean_z = ks.transpose() * alpha_;
  const Eigen::MatrixXd v = chol_.triangularView<Eigen::Lower>().solve(ks);
  const Eigen::VectorXd reduction = v.colwise().squaredNorm().transpose();

  Posterior out;
  out.mean.resize(static_cast<std::size_t>(m));
  out.std.resize(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) {
    const double var = std::max(hp_.signal_variance - reduction[i], 0.0);
    out.mean[static_cast<std::size_t>(i)] = standardization_.invert(mean_z[i]);
    out.std[static_cast<std::size_t>(i)] = std::sqrt(var) * standardization_.scale;
  }
  return out;
}

Posterior SurrogateModel::posterior(std::span<const ProcessCondition> queries) const {
  std::vector<UnitPoint> unit;
  unit.reserve(queries.size());
  for (const auto& c : queries) unit.push_back(design::normalize(c, space_));
  return posterior_unit(unit);
}

std::pair<double, double> SurrogateModel::predict(const ProcessCondition& query) const {
  const auto p = posterior(std::span<const ProcessCondition>(&query, 1));
  return {p.mean[0], p.std[0]};
}

SurrogateModel SurrogateModel::condition_on(const ProcessCondition& x, double raw_value) const {
  SurrogateModel m = *this;
  m.inputs_.push_back(x);
  m.raw_targets_.push_back(raw_value);
  ++m.fantasies_;
  m.factorize();
  m.lml_ = lml_;
  return m;
}

std::vector<KernelHyperparams> initial_hyperparams(const FitConfig& config) {
  if (config.restarts < 1) throw ParameterError("restarts must be at least 1");
  const auto& b = config.bounds;
  const double noise_lo = effective_noise_min(config);
  Rng rng(derive_seed(config.seed, 0x6770));
  std::vector<KernelHyperparams> starts;
  for (int r = 0; r < config.restarts; ++r) {
    KernelHyperparams hp;
    for (auto& l : hp.lengthscales) {
      l = std::exp(rng.uniform(std::log(0.1), std::log(2.0)));
    }
    const double ds = rng.uniform(-1.0, 1.0);
    const double dn = rng.uniform(-1.0, 1.0);
    hp.signal_variance = r == 0 ? 1.0 : std::exp(ds);
    hp.noise_variance = r == 0 ? 1e-2 : std::exp(std::log(1e-2) + 2.0 * dn);
    hp.signal_variance = std::clamp(hp.signal_variance, b.signal_min, b.signal_max);
    hp.noise_variance = config.pinned_noise ? *config.pinned_noise
                                            : std::clamp(hp.noise_variance, noise_lo, b.noise_max);
    starts.push_back(hp);
  }
  return starts;
}

SurrogateModel fit(const ParameterSpace& space, std::span<const ProcessCondition> inputs,
                   std::span<const double> raw_targets, const FitConfig& config) {
  if (inputs.size() != raw_targets.size()) throw ParameterError("inputs and targets differ in length");
  if (inputs.empty()) throw FittingError("cannot fit a surrogate without observations");
  for (double y : raw_targets) {
    if (!std::isfinite(y)) throw ParameterError("targets must be finite");
  }
  std::vector<ProcessCondition> xs(inputs.begin(), inputs.end());
  std::vector<double> ys(raw_targets.begin(), raw_targets.end());
  const Standardization stdz = config.standardize ? Standardization::of(ys) : Standardization::identity();
  const auto starts = initial_hyperparams(config);

  if (xs.size() == 1) {
    KernelHyperparams hp;
    if (config.pinned_noise) hp.noise_variance = *config.pinned_noise;
    return SurrogateModel::build(space, std::move(xs), std::move(ys), hp, stdz);
  }

  const Eigen::MatrixXd x = unit_matrix(space, xs);
  Eigen::VectorXd z(static_cast<Eigen::Index>(ys.size()));
  for (std::size_t i = 0; i < ys.size(); ++i) z[static_cast<Eigen::Index>(i)] = stdz.apply(ys[i]);

  const bool free_noise = !config.pinned_noise.has_value();
  const double fixed_noise = config.pinned_noise.value_or(0.0);
  const auto& b = config.bounds;
  const int dim = free_noise ? 7 : 6;
  Eigen::VectorXd lower(dim), upper(dim);
  for (int d = 0; d < 5; ++d) {
    lower[d] = std::log(b.lengthscale_min);
    upper[d] = std::log(b.lengthscale_max);
  }
  lower[5] = std::log(b.signal_min);
  upper[5] = std::log(b.signal_max);
  if (free_noise) {
    lower[6] = std::log(effective_noise_min(config));
    upper[6] = std::log(b.noise_max);
  }

  auto objective = [&](const Eigen::VectorXd& p) {
    try {
      return -log_marginal_likelihood(x, z, unpack(p, fixed_noise));
    } catch (const NumericalError&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  double best_value = std::numeric_limits<double>::infinity();
  KernelHyperparams best_hp;
  for (const auto& start : starts) {
    const auto res = detail::nelder_mead(objective, pack(start, free_noise), 1.0, lower, upper,
                                         config.max_evaluations);
    if (res.value < best_value) {
      best_value = res.value;
      best_hp = unpack(res.x, fixed_noise);
    }
  }
  if (!std::isfinite(best_value)) {
    throw FittingError("every hyperparameter restart failed to factorize");
  }
  return SurrogateModel::build(space, std::move(xs), std::move(ys), best_hp, stdz);
}

}  // namespace hitlbo::gp
