#include "hitlbo/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <thread>

#include "hitlbo/error.hpp"
#include "hitlbo/hitl.hpp"

namespace hitlbo::acq {

namespace {

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }
double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

std::vector<std::size_t> admissible_indices(std::span<const ProcessCondition> candidates,
                                            const design::ConditionSet& exclude) {
  std::vector<std::size_t> idx;
  idx.reserve(candidates.size());
  design::ConditionSet seen;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto key = design::key_of(candidates[i]);
    if (exclude.contains(key)) continue;
    if (!seen.insert(key).second) continue;  // duplicate pool entry
    idx.push_back(i);
  }
  if (idx.empty()) throw ExhaustionError("candidate pool is empty after exclusions");
  return idx;
}

void check_constraint(std::optional<std::span<const double>> p, std::size_t n) {
  if (p && p->size() != n) throw ParameterError("constraint map size differs from candidate pool");
}

}  // namespace

std::string to_string(Strategy s) {
  return s == Strategy::EhviGreedy ? "EHVI_GREEDY" : "PARETO_UCB";
}

Strategy strategy_from_string(const std::string& s) {
  std::string t;
  for (char ch : s) t.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(ch))));
  std::replace(t.begin(), t.end(), '-', '_');
  if (t == "EHVI_GREEDY" || t == "EHVI" || t == "QEHVI") return Strategy::EhviGreedy;
  if (t == "PARETO_UCB" || t == "PARUCB") return Strategy::ParetoUcb;
  throw ParseError("unknown acquisition strategy '" + s + "'");
}

void AcquisitionConfig::validate() const {
  if (q < 1) throw ParameterError("batch size q must be at least 1");
  if (!(beta >= 0.0)) throw ParameterError("beta must be non-negative");
}

double ucb(double mean, double std, double beta) {
  if (std < 0.0) throw ParameterError("posterior std must be non-negative");
  if (beta < 0.0) throw ParameterError("beta must be non-negative");
  return mean + std::sqrt(beta) * std;
}

double expected_excess(double mu, double sd, double a) {
  if (sd <= 0.0) return std::max(mu - a, 0.0);
  const double z = (mu - a) / sd;
  return (mu - a) * normal_cdf(z) + sd * normal_pdf(z);
}

double ehvi_2d(double mu1, double sd1, double mu2, double sd2, const pareto::ParetoFront& front) {
  if (sd1 < 0.0 || sd2 < 0.0) throw ParameterError("posterior std must be non-negative");
  const auto& ref = front.ref();
  std::vector<pareto::ObjectivePoint> pts;
  for (const auto& p : front.points()) {
    if (p.f1 > ref.f1 && p.f2 > ref.f2) pts.push_back(p);
  }
  // Re-derive the clipped front so the strip heights are monotone.
  {
    std::vector<pareto::ObjectivePoint> nd;
    for (auto i : pareto::nondominated(pts)) nd.push_back(pts[i]);
    pts = std::move(nd);
  }
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.f1 < b.f1; });

  // Strip i spans f1 in [x_i, x_{i+1}] and is non-dominated above h_i.
  double total = 0.0;
  double left = ref.f1;
  double g_left = expected_excess(mu1, sd1, left);
  for (std::size_t i = 0; i <= pts.size(); ++i) {
    const bool last = i == pts.size();
    const double g_right = last ? 0.0 : expected_excess(mu1, sd1, pts[i].f1);
    const double height = last ? ref.f2 : pts[i].f2;
    const double width = g_left - g_right;
    if (width > 0.0) total += width * expected_excess(mu2, sd2, height);
    g_left = g_right;
    if (!last) left = pts[i].f1;
  }
  return std::max(total, 0.0);
}

gp::Posterior posterior_chunked(const gp::SurrogateModel& model,
                                std::span<const ProcessCondition> pool, std::size_t chunk_size) {
  gp::Posterior out;
  out.mean.resize(pool.size());
  out.std.resize(pool.size());
  const std::size_t chunks = (pool.size() + chunk_size - 1) / chunk_size;
  auto run = [&](std::size_t first_chunk, std::size_t stride) {
    for (std::size_t c = first_chunk; c < chunks; c += stride) {
      const std::size_t begin = c * chunk_size;
      const std::size_t len = std::min(chunk_size, pool.size() - begin);
      const auto part = model.posterior(pool.subspan(begin, len));
      std::copy(part.mean.begin(), part.mean.end(), out.mean.begin() + static_cast<std::ptrdiff_t>(begin));
      std::copy(part.std.begin(), part.std.end(), out.std.begin() + static_cast<std::ptrdiff_t>(begin));
    }
  };
  const std::size_t workers =
      std::min<std::size_t>(std::max(1u, std::thread::hardware_concurrency()), chunks);
  if (workers <= 1) {
    run(0, 1);
  } else {
    std::vector<std::jthread> threads;
    for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(run, w, workers);
  }
  return out;
}

std::vector<double> apply_constraint(std::span<const double> acq, std::span<const double> p) {
  if (acq.size() != p.size()) throw ParameterError("acquisition and constraint sizes differ");
  std::vector<double> out(acq.size());
  for (std::size_t i = 0; i < acq.size(); ++i) out[i] = acq[i] * p[i];
  return out;
}

std::vector<Pick> ehvi_greedy_batch(const ObjectiveModels& models,
                                    std::span<const ProcessCondition> candidates,
                                    const pareto::ParetoFront& front,
                                    const AcquisitionConfig& config,
                                    std::optional<std::span<const double>> p_constraint,
                                    const design::ConditionSet& exclude) {
  config.validate();
  check_constraint(p_constraint, candidates.size());
  auto remaining = admissible_indices(candidates, exclude);

  std::vector<ProcessCondition> pool;
  pool.reserve(remaining.size());
  for (auto i : remaining) pool.push_back(candidates[i]);

  gp::SurrogateModel m1 = models.dispersion;
  gp::SurrogateModel m2 = models.leakage;
  pareto::ParetoFront believed = front;
  std::vector<char> taken(pool.size(), 0);
  std::vector<Pick> picks;

  const std::size_t q = std::min(config.q, pool.size());
  for (std::size_t step = 0; step < q; ++step) {
    const auto post1 = posterior_chunked(m1, pool);
    const auto post2 = posterior_chunked(m2, pool);
    bool found = false;
    std::size_t best = 0;
    double best_score = 0.0;
    for (std::size_t k = 0; k < pool.size(); ++k) {
      if (taken[k]) continue;
      double s = ehvi_2d(post1.mean[k], post1.std[k], post2.mean[k], post2.std[k], believed);
      if (p_constraint) s *= (*p_constraint)[remaining[k]];
      if (!found || s > best_score) {
        found = true;
        best = k;
        best_score = s;
      }
    }
    taken[best] = 1;
    picks.push_back({remaining[best], best_score});
    // Believe the posterior mean: condition both models on it without
    // touching hyperparameters, and add it to the front.
    const double mu1 = post1.mean[best], mu2 = post2.mean[best];
    m1 = m1.condition_on(pool[best], mu1);
    m2 = m2.condition_on(pool[best], mu2);
    believed.insert({mu1, mu2});
  }
  return picks;
}

std::vector<Pick> pareto_ucb_batch(const ObjectiveModels& models,
                                   std::span<const ProcessCondition> candidates,
                                   const AcquisitionConfig& config,
                                   std::optional<std::span<const double>> p_constraint,
                                   const design::ConditionSet& exclude) {
  config.validate();
  check_constraint(p_constraint, candidates.size());
  const auto admissible = admissible_indices(candidates, exclude);

  std::vector<ProcessCondition> pool;
  pool.reserve(admissible.size());
  for (auto i : admissible) pool.push_back(candidates[i]);
  const auto post1 = posterior_chunked(models.dispersion, pool);
  const auto post2 = posterior_chunked(models.leakage, pool);

  std::vector<pareto::ObjectivePoint> pairs(pool.size());
  for (std::size_t k = 0; k < pool.size(); ++k) {
    const double p = p_constraint ? (*p_constraint)[admissible[k]] : 1.0;
    pairs[k] = {ucb(post1.mean[k], post1.std[k], config.beta) * p,
                ucb(post2.mean[k], post2.std[k], config.beta) * p};
  }

  const std::size_t q = std::min(config.q, pool.size());
  std::vector<std::size_t> selected;
  std::vector<std::size_t> remaining(pool.size());
  for (std::size_t k = 0; k < remaining.size(); ++k) remaining[k] = k;
  while (selected.size() < q && !remaining.empty()) {
    std::vector<pareto::ObjectivePoint> sub;
    sub.reserve(remaining.size());
    for (auto k : remaining) sub.push_back(pairs[k]);
    std::vector<std::size_t> layer;
    for (auto j : pareto::nondominated(sub)) layer.push_back(remaining[j]);
    pareto::greedy_extend(pairs, config.ref, layer, q - selected.size(), selected);
    std::vector<char> in_layer(pool.size(), 0);
    for (auto k : layer) in_layer[k] = 1;
    std::erase_if(remaining, [&](std::size_t k) { return in_layer[k] != 0; });
  }

  std::vector<Pick> picks;
  std::vector<pareto::ObjectivePoint> chosen;
  for (auto k : selected) {
    const double before = pareto::hypervolume_2d(chosen, config.ref);
    chosen.push_back(pairs[k]);
    picks.push_back({admissible[k], pareto::hypervolume_2d(chosen, config.ref) - before});
  }
  return picks;
}

AcquisitionMap acquisition_map(const ObjectiveModels& models, const ParameterSpace& space,
                               std::span<const double> fixed, std::size_t sweep_x,
                               std::size_t sweep_y, const Refinement& steps, double beta,
                               const gp::SurrogateModel* conversion, double tau) {
  if (sweep_x == sweep_y || sweep_x >= kNumParams || sweep_y >= kNumParams) {
    throw ParameterError("sweep indices must be two distinct parameter indices");
  }
  if (fixed.size() != kNumParams - 2) {
    throw ParameterError("exactly three fixed parameter values are required");
  }
  const design::CandidateGrid grid(space, steps);  // validates the steps
  (void)grid;

  AcquisitionMap map;
  map.sweep_x = sweep_x;
  map.sweep_y = sweep_y;
  auto axis = [&](std::size_t d) {
    const auto& p = space.params[d];
    std::vector<double> v;
    const auto n = static_cast<std::size_t>(std::llround((p.max - p.min) / steps[d])) + 1;
    for (std::size_t k = 0; k < n; ++k) {
      ProcessCondition c = design::denormalize(UnitPoint{}, space);
      c[d] = p.min + static_cast<double>(k) * steps[d];
      v.push_back(design::snap_to_grid(c, space, steps)[d]);
    }
    return v;
  };
  map.xs = axis(sweep_x);
  map.ys = axis(sweep_y);

  ProcessCondition base;
  for (std::size_t d = 0, f = 0; d < kNumParams; ++d) {
    if (d == sweep_x || d == sweep_y) continue;
    base[d] = fixed[f++];
  }
  std::vector<ProcessCondition> pts;
  pts.reserve(map.xs.size() * map.ys.size());
  for (double y : map.ys) {
    for (double x : map.xs) {
      ProcessCondition c = base;
      c[sweep_x] = x;
      c[sweep_y] = y;
      pts.push_back(c);
    }
  }
  for (const auto& c : pts) design::check_in_bounds(c, space);

  const std::array<const gp::SurrogateModel*, 2> ms{&models.dispersion, &models.leakage};
  if (conversion) {
    const auto conv = posterior_chunked(*conversion, pts);
    map.conversion_mean = conv.mean;
    map.p.resize(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) map.p[i] = hitl::p_constraint(conv.mean[i], tau);
  } else {
    map.p.assign(pts.size(), 1.0);
  }
  for (std::size_t o = 0; o < 2; ++o) {
    const auto post = posterior_chunked(*ms[o], pts);
    map.mean[o] = post.mean;
    map.std[o] = post.std;
    map.raw[o].resize(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) map.raw[o][i] = ucb(post.mean[i], post.std[i], beta);
    map.constrained[o] = apply_constraint(map.raw[o], map.p);
  }
  return map;
}

}  // namespace hitlbo::acq
