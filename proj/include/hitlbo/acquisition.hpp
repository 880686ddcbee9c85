#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hitlbo/design_space.hpp"
#include "hitlbo/gpr.hpp"
#include "hitlbo/pareto.hpp"

namespace hitlbo::acq {

enum class Strategy { EhviGreedy, ParetoUcb };

std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& s);

struct AcquisitionConfig {
  Strategy strategy = Strategy::ParetoUcb;
  double beta = 2.0;
  std::size_t q = 5;
  pareto::ObjectivePoint ref{1.0, 0.0};
  bool constraint_enabled = false;
  std::size_t mc_validation_samples = 0;  // only used by validation tooling

  void validate() const;
};

// mean + sqrt(beta) * std.
double ucb(double mean, double std, double beta);

// Exact expected hypervolume gain of Y ~ N(mu1, sd1^2) x N(mu2, sd2^2) over
// `front`, by strip decomposition along f1.
double ehvi_2d(double mu1, double sd1, double mu2, double sd2, const pareto::ParetoFront& front);

// E[(Y - a)^+] for Y ~ N(mu, sd^2); the one-dimensional building block of
// ehvi_2d.
double expected_excess(double mu, double sd, double a);

struct ObjectiveModels {
  const gp::SurrogateModel& dispersion;
  const gp::SurrogateModel& leakage;
};

struct Pick {
  std::size_t candidate = 0;  // index into the candidate pool
  double score = 0.0;         // acquisition value at selection time
};

// Posterior over a large pool, evaluated chunk by chunk (optionally on
// several threads) with results stored in pool order.
gp::Posterior posterior_chunked(const gp::SurrogateModel& model,
                                std::span<const ProcessCondition> pool,
                                std::size_t chunk_size = 4096);

// Kriging-believer greedy batch over single-point EHVI, optionally weighted
// by a per-candidate feasibility probability. Candidates in `exclude` are
// never returned. Throws ExhaustionError on an empty admissible pool.
std::vector<Pick> ehvi_greedy_batch(const ObjectiveModels& models,
                                    std::span<const ProcessCondition> candidates,
                                    const pareto::ParetoFront& front,
                                    const AcquisitionConfig& config,
                                    std::optional<std::span<const double>> p_constraint = {},
                                    const design::ConditionSet& exclude = {});

// Pareto front of per-objective UCB values (scaled by p when given), then
// greedy hypervolume selection; further nondominated layers fill the batch
// when the first one is too small.
std::vector<Pick> pareto_ucb_batch(const ObjectiveModels& models,
                                   std::span<const ProcessCondition> candidates,
                                   const AcquisitionConfig& config,
                                   std::optional<std::span<const double>> p_constraint = {},
                                   const design::ConditionSet& exclude = {});

// acq * p elementwise.
std::vector<double> apply_constraint(std::span<const double> acq, std::span<const double> p);

// 2-D slice of the acquisition landscape for heatmaps. Grids are row-major
// with rows along sweep_y and columns along sweep_x.
struct AcquisitionMap {
  std::size_t sweep_x = 0, sweep_y = 1;
  std::vector<double> xs, ys;
  std::array<std::vector<double>, 2> mean, std;
  std::array<std::vector<double>, 2> raw;          // UCB per objective
  std::array<std::vector<double>, 2> constrained;  // UCB * p
  std::vector<double> p;                           // all ones without a constraint
  std::vector<double> conversion_mean;             // empty without a constraint
};

// `fixed` holds the three non-swept parameter values in space order; the
// swept axes follow `steps`.
AcquisitionMap acquisition_map(const ObjectiveModels& models, const ParameterSpace& space,
                               std::span<const double> fixed, std::size_t sweep_x,
                               std::size_t sweep_y, const Refinement& steps, double beta,
                               const gp::SurrogateModel* conversion = nullptr, double tau = 0.2);

}  // namespace hitlbo::acq
