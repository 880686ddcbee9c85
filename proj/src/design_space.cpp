#include "hitlbo/design_space.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <unordered_set>

#include "hitlbo/error.hpp"
#include "hitlbo/rng.hpp"

namespace hitlbo {

namespace {

constexpr double kRelTol = 1e-9;

// Shortest-decimal cleanup so that min + k*step prints as the decimal the
// user would write (1.0 + 13*0.2 -> 3.6).
double clean(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return std::strtod(buf, nullptr);
}

std::size_t count_for(double min, double max, double step) {
  return static_cast<std::size_t>(std::llround((max - min) / step)) + 1;
}

bool divides(double min, double max, double step) {
  const double ratio = (max - min) / step;
  return std::abs(ratio - std::round(ratio)) <= kRelTol * std::max(1.0, std::abs(ratio));
}

}  // namespace

std::string to_string(const ProcessCondition& c) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < kNumParams; ++i) {
    if (i) os << ", ";
    os << c[i];
  }
  os << ')';
  return os.str();
}

std::size_t ParameterSpec::step_count() const { return count_for(min, max, step); }

void ParameterSpec::validate() const {
  if (!std::isfinite(min) || !std::isfinite(max) || !(max > min)) {
    throw ValidationError("parameter '" + name + "': max must exceed min");
  }
  if (!(step > 0.0)) {
    throw ValidationError("parameter '" + name + "': step must be positive");
  }
  if (!divides(min, max, step)) {
    throw ValidationError("parameter '" + name + "': range is not a multiple of step");
  }
  if (step_count() < 2) {
    throw ValidationError("parameter '" + name + "': needs at least two grid values");
  }
}

void ParameterSpace::validate() const {
  for (const auto& p : params) p.validate();
}

ParameterSpace ParameterSpace::photonic_curing() {
  return ParameterSpace{{{
      {"radiant_energy", "J/cm2", 1.0, 7.0, 0.2},
      {"pulse_count", "count", 1.0, 20.0, 1.0},
      {"pulse_length", "ms", 1.0, 20.0, 1.0},
      {"micropulse_count", "count", 1.0, 30.0, 1.0},
      {"duty_cycle", "%", 20.0, 70.0, 5.0},
  }}};
}

namespace design {

Refinement native_steps(const ParameterSpace& space) {
  Refinement r{};
  for (std::size_t i = 0; i < kNumParams; ++i) r[i] = space.params[i].step;
  return r;
}

Refinement fine_refinement() { return {0.1, 1.0, 1.0, 1.0, 1.0}; }

std::uint64_t grid_size(const ParameterSpace& space) {
  return grid_size(space, native_steps(space));
}

std::uint64_t grid_size(const ParameterSpace& space, const Refinement& steps) {
  return CandidateGrid(space, steps).size();
}

void check_in_bounds(const ProcessCondition& c, const ParameterSpace& space) {
  for (std::size_t i = 0; i < kNumParams; ++i) {
    const auto& p = space.params[i];
    const double tol = kRelTol * (p.max - p.min);
    if (!std::isfinite(c[i]) || c[i] < p.min - tol || c[i] > p.max + tol) {
      std::ostringstream os;
      os << "parameter '" << p.name << "' value " << c[i] << " outside [" << p.min << ", "
         << p.max << "]";
      throw RangeError(os.str());
    }
  }
}

UnitPoint normalize(const ProcessCondition& c, const ParameterSpace& space) {
  check_in_bounds(c, space);
  UnitPoint u{};
  for (std::size_t i = 0; i < kNumParams; ++i) {
    const auto& p = space.params[i];
    u[i] = std::clamp((c[i] - p.min) / (p.max - p.min), 0.0, 1.0);
  }
  return u;
}

ProcessCondition denormalize(const UnitPoint& u, const ParameterSpace& space) {
  ProcessCondition c;
  for (std::size_t i = 0; i < kNumParams; ++i) {
    const auto& p = space.params[i];
    c[i] = p.min + u[i] * (p.max - p.min);
  }
  return c;
}

ProcessCondition snap_to_grid(const ProcessCondition& c, const ParameterSpace& space,
                              const Refinement& steps) {
  ProcessCondition out;
  for (std::size_t i = 0; i < kNumParams; ++i) {
    const auto& p = space.params[i];
    const auto count = static_cast<double>(count_for(p.min, p.max, steps[i]));
    const double v = std::clamp(c[i], p.min, p.max);
    // floor(x + 0.5) sends exact halves up, i.e. away from the lower bound.
    double idx = std::floor((v - p.min) / steps[i] + 0.5);
    idx = std::clamp(idx, 0.0, count - 1.0);
    out[i] = clean(p.min + idx * steps[i]);
  }
  return out;
}

bool is_on_grid(const ProcessCondition& c, const ParameterSpace& space,
                const Refinement& steps) {
  for (std::size_t i = 0; i < kNumParams; ++i) {
    const auto& p = space.params[i];
    const double tol = kRelTol * std::max(1.0, p.max - p.min);
    if (c[i] < p.min - tol || c[i] > p.max + tol) return false;
    const double ratio = (c[i] - p.min) / steps[i];
    if (std::abs(ratio - std::round(ratio)) > 1e-6) return false;
  }
  return true;
}

ConditionKey key_of(const ProcessCondition& c) {
  ConditionKey k{};
  for (std::size_t i = 0; i < kNumParams; ++i) k[i] = std::llround(c[i] * 1e6);
  return k;
}

LhsDesign lhs_design(const ParameterSpace& space, std::size_t n, std::uint64_t seed) {
  space.validate();
  if (n == 0) throw ParameterError("lhs_sample: n must be at least 1");
  Rng rng(seed);
  const auto steps = native_steps(space);

  // strata[d][row] is the stratum of `row` along dimension d.
  std::array<std::vector<std::size_t>, kNumParams> strata;
  for (auto& perm : strata) {
    perm.resize(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  }

  LhsDesign out;
  out.unit_points.reserve(n);
  out.conditions.reserve(n);
  ConditionSet seen;
  constexpr int kMaxRedraws = 1000;
  for (std::size_t row = 0; row < n; ++row) {
    for (int attempt = 0;; ++attempt) {
      if (attempt == kMaxRedraws) {
        throw ValidationError("lhs_sample: cannot place " + std::to_string(n) +
                              " distinct conditions on this grid");
      }
      UnitPoint u{};
      for (std::size_t d = 0; d < kNumParams; ++d) {
        u[d] = (static_cast<double>(strata[d][row]) + rng.uniform()) / static_cast<double>(n);
      }
      auto c = snap_to_grid(denormalize(u, space), space, steps);
      if (seen.insert(key_of(c)).second) {
        out.unit_points.push_back(u);
        out.conditions.push_back(c);
        break;
      }
    }
  }
  return out;
}

std::vector<ProcessCondition> lhs_sample(const ParameterSpace& space, std::size_t n,
                                         std::uint64_t seed) {
  return lhs_design(space, n, seed).conditions;
}

CandidateGrid::CandidateGrid(const ParameterSpace& space, const Refinement& steps)
    : space_(space), steps_(steps) {
  space.validate();
  size_ = 1;
  for (std::size_t i = 0; i < kNumParams; ++i) {
    const auto& p = space.params[i];
    if (!(steps[i] > 0.0) || !divides(p.min, p.max, steps[i])) {
      throw ValidationError("refinement step for '" + p.name + "' does not divide its range");
    }
    counts_[i] = count_for(p.min, p.max, steps[i]);
    size_ *= counts_[i];
  }
}

ProcessCondition CandidateGrid::at(std::uint64_t index) const {
  ProcessCondition c;
  for (std::size_t i = kNumParams; i-- > 0;) {
    const std::uint64_t k = index % counts_[i];
    index /= counts_[i];
    c[i] = clean(space_.params[i].min + static_cast<double>(k) * steps_[i]);
  }
  return c;
}

CandidateStream::CandidateStream(CandidateGrid grid, ConditionSet exclude)
    : grid_(std::move(grid)), exclude_(std::move(exclude)), end_(grid_.size()) {}

CandidateStream& CandidateStream::restrict_to(std::uint64_t begin, std::uint64_t end) {
  cursor_ = std::min(begin, grid_.size());
  end_ = std::min(end, grid_.size());
  return *this;
}

std::vector<ProcessCondition> CandidateStream::next_chunk(std::size_t max_count) {
  std::vector<ProcessCondition> chunk;
  chunk.reserve(std::min<std::uint64_t>(max_count, end_ > cursor_ ? end_ - cursor_ : 0));
  while (cursor_ < end_ && chunk.size() < max_count) {
    auto c = grid_.at(cursor_++);
    if (exclude_.empty() || !exclude_.contains(key_of(c))) chunk.push_back(c);
  }
  if (cursor_ >= end_) cursor_ = grid_.size();
  return chunk;
}

CandidateStream enumerate_candidates(const ParameterSpace& space, const Refinement& steps,
                                     ConditionSet exclude) {
  return CandidateStream(CandidateGrid(space, steps), std::move(exclude));
}

std::vector<ProcessCondition> sample_candidates(const CandidateGrid& grid, std::size_t count,
                                                std::uint64_t seed,
                                                const ConditionSet& exclude) {
  std::uint64_t excluded_on_grid = 0;
  for (const auto& key : exclude) {
    ProcessCondition c;
    for (std::size_t i = 0; i < kNumParams; ++i) c[i] = static_cast<double>(key[i]) * 1e-6;
    if (is_on_grid(c, grid.space(), grid.steps())) ++excluded_on_grid;
  }
  const std::uint64_t admissible = grid.size() - std::min(excluded_on_grid, grid.size());

  std::vector<std::uint64_t> picked;
  Rng rng(seed);
  if (admissible <= 4 * static_cast<std::uint64_t>(count)) {
    std::vector<std::uint64_t> all;
    all.reserve(admissible);
    for (std::uint64_t i = 0; i < grid.size(); ++i) {
      if (!exclude.contains(key_of(grid.at(i)))) all.push_back(i);
    }
    if (all.size() <= count) return [&] {
      std::vector<ProcessCondition> out;
      out.reserve(all.size());
      for (auto i : all) out.push_back(grid.at(i));
      return out;
    }();
    for (std::size_t i = 0; i < count; ++i) {
      std::swap(all[i], all[i + rng.below(all.size() - i)]);
    }
    picked.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(count));
  } else {
    std::unordered_set<std::uint64_t> chosen;
    while (picked.size() < count) {
      const std::uint64_t i = rng.below(grid.size());
      if (chosen.contains(i) || exclude.contains(key_of(grid.at(i)))) continue;
      chosen.insert(i);
      picked.push_back(i);
    }
  }
  std::sort(picked.begin(), picked.end());
  std::vector<ProcessCondition> out;
  out.reserve(picked.size());
  for (auto i : picked) out.push_back(grid.at(i));
  return out;
}

}  // namespace design
}  // namespace hitlbo
