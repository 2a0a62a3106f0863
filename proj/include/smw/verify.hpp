#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "smw/gradients.hpp"
#include "smw/measure.hpp"
#include "smw/ot1d.hpp"
#include "smw/rng.hpp"
#include "smw/slicing.hpp"

namespace smw {

// One certification check. The pass flag is defined as
// max_violation <= tolerance. Checks marked statistical assert an event
// count (converse identity at finite projection budgets) rather than a
// numeric bound.
struct CheckResult {
  std::string name;
  std::size_t trials = 0;
  double max_violation = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  bool statistical = false;
};

struct VerifyReport {
  std::vector<CheckResult> checks;
  std::uint64_t seed = 0;
  double elapsed_seconds = 0.0;

  bool all_pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
};

namespace detail {

inline CheckResult make_result(std::string name, std::size_t trials, double max_violation,
                               double tolerance, bool statistical = false) {
  CheckResult r;
  r.name = std::move(name);
  r.trials = trials;
  r.max_violation = max_violation;
  r.tolerance = tolerance;
  r.pass = max_violation <= tolerance;
  r.statistical = statistical;
  return r;
}

// Random point on the simplex (normalized exponentials).
inline SimplexWeights random_simplex(std::size_t p_count, Rng& g) {
  std::vector<double> w(p_count);
  double sum = 0.0;
  for (auto& v : w) {
    v = -std::log(1.0 - g.uniform01());
    sum += v;
  }
  for (auto& v : w) v /= sum;
  return SimplexWeights(std::move(w));
}

inline DiscreteMeasure random_measure(std::size_t n, std::size_t d, Rng& g) {
  std::vector<double> atoms(n * d);
  for (auto& a : atoms) a = g.normal();
  return DiscreteMeasure(std::move(atoms), n, d);
}

// Atoms from a coarse grid force sorting ties.
inline DiscreteMeasure gridded_measure_1d(std::size_t n, Rng& g) {
  static constexpr double grid[] = {-1.0, -0.5, 0.0, 0.5, 1.0};
  std::vector<double> atoms(n);
  for (auto& a : atoms) a = grid[g.below(5)];
  return DiscreteMeasure(std::move(atoms), n, 1);
}

}  // namespace detail

// Closed form against the exhaustive permutation search on random 1D
// instances, with uniform, random, and tie-forcing draws.
inline CheckResult check_oracle_equivalence(std::size_t trials, std::size_t max_n,
                                            std::size_t max_p, std::uint64_t seed,
                                            double tol = 1e-9) {
  if (max_n < 1 || max_n > 6 || max_p < 2 || max_p > 4)
    throw std::invalid_argument("budget guard: max_n in [1,6], max_p in [2,4]");
  double worst = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    Rng g(substream(seed, t));
    const std::size_t n = 1 + g.below(max_n);
    const std::size_t p_count = 2 + g.below(max_p - 1);
    const bool force_ties = g.uniform01() < 0.2;

    std::vector<DiscreteMeasure> measures;
    measures.reserve(p_count);
    for (std::size_t p = 0; p < p_count; ++p) {
      if (force_ties) {
        measures.push_back(detail::gridded_measure_1d(n, g));
      } else {
        std::vector<double> atoms(n);
        for (auto& a : atoms) a = g.uniform(-1.0, 1.0);
        measures.push_back(DiscreteMeasure::from_values(std::move(atoms)));
      }
    }
    const MeasureSet set(std::move(measures));
    const SimplexWeights beta = (t % 2 == 0) ? SimplexWeights::uniform(p_count)
                                             : detail::random_simplex(p_count, g);
    const double closed = mw_squared_1d(set, beta);
    const double oracle = mw_squared_1d_oracle(set, beta);
    worst = std::max(worst, std::abs(closed - oracle));
  }
  return detail::make_result("oracle_equivalence", trials, worst, tol);
}

enum class AxiomSpace { mw1d, smw };

// Generalized-metric battery under uniform weights: non-negativity (exact),
// identity of indiscernibles (exact zero for equal inputs; strict positivity
// for distinct inputs as a statistical converse at finite projection
// budgets), argument-permutation symmetry, and the generalized triangle
// inequality on root values against a fresh extra measure. Non-uniform
// weights are excluded by construction: with a zero weight the distance
// ignores a marginal and the identity axiom genuinely fails.
inline std::vector<CheckResult> check_metric_axioms(AxiomSpace space, std::size_t trials,
                                                    std::uint64_t seed, double tol = 1e-9) {
  const bool sliced = space == AxiomSpace::smw;
  const std::string prefix = sliced ? "smw." : "mw1d.";

  double worst_negative = 0.0;      // amount below zero
  double worst_identity = 0.0;      // |D| on identical inputs
  double distinct_failures = 0.0;   // trials with D == 0 on distinct inputs
  double worst_permutation = 0.0;   // |D - D after argument shuffle|
  double worst_triangle = 0.0;      // max(0, lhs - rhs) on root values

  for (std::size_t t = 0; t < trials; ++t) {
    Rng g(substream(seed, t));
    const std::size_t p_count = 2 + g.below(3);
    const std::size_t n = 2 + g.below(5);
    const std::size_t d = sliced ? 2 + g.below(4) : 1;

    const ProjectionSet projections = sample_directions(d, 64, substream(seed, 0xA11, t));
    auto dist_sq = [&](const std::vector<DiscreteMeasure>& ms) {
      const MeasureSet s(ms);
      return sliced ? smw_squared(s, SimplexWeights::uniform(ms.size()), projections).estimate
                    : mw_squared_1d(s, SimplexWeights::uniform(ms.size()));
    };

    std::vector<DiscreteMeasure> ms;
    ms.reserve(p_count);
    for (std::size_t p = 0; p < p_count; ++p) ms.push_back(detail::random_measure(n, d, g));

    const double value = dist_sq(ms);
    worst_negative = std::max(worst_negative, -std::min(0.0, value));
    if (!(value > 0.0)) distinct_failures += 1.0;

    std::vector<DiscreteMeasure> shuffled = ms;
    for (std::size_t i = p_count; i > 1; --i)
      std::swap(shuffled[i - 1], shuffled[g.below(i)]);
    worst_permutation = std::max(worst_permutation, std::abs(value - dist_sq(shuffled)));

    std::vector<DiscreteMeasure> identical(p_count, ms[0]);
    worst_identity = std::max(worst_identity, std::abs(dist_sq(identical)));

    const DiscreteMeasure extra = detail::random_measure(n, d, g);
    const double lhs = std::sqrt(value);
    double rhs = 0.0;
    for (std::size_t p = 0; p < p_count; ++p) {
      std::vector<DiscreteMeasure> swapped = ms;
      swapped[p] = extra;
      rhs += std::sqrt(dist_sq(swapped));
    }
    worst_triangle = std::max(worst_triangle, std::max(0.0, lhs - rhs));
  }

  std::vector<CheckResult> out;
  out.push_back(detail::make_result(prefix + "nonneg", trials, worst_negative, 0.0));
  out.push_back(detail::make_result(prefix + "identity_zero", trials, worst_identity, 1e-12));
  out.push_back(
      detail::make_result(prefix + "identity_positive", trials, distinct_failures, 0.0, true));
  out.push_back(
      detail::make_result(prefix + "permutation", trials, worst_permutation, 1e-12));
  out.push_back(detail::make_result(prefix + "triangle", trials, worst_triangle, tol));
  return out;
}

// Analytic gradients against central finite differences on random tie-free
// instances, covering both the multi-marginal and the pairwise kernels.
inline CheckResult check_gradients(std::size_t trials, std::uint64_t seed, double tol = 1e-5) {
  const double h = 1e-5;
  double worst = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    Rng g(substream(seed, t));
    const std::size_t p_count = 2 + g.below(2);
    const std::size_t n = 2 + g.below(4);
    const std::size_t d = 1 + g.below(3);
    const ProjectionSet projections = sample_directions(d, 8, substream(seed, 0xB22, t));

    // Redraw until no projected pair of atoms sits within the perturbation
    // radius of a tie; ties are measure-zero, so this terminates quickly.
    std::vector<DiscreteMeasure> ms;
    for (int attempt = 0; attempt < 64; ++attempt) {
      ms.clear();
      for (std::size_t p = 0; p < p_count; ++p) ms.push_back(detail::random_measure(n, d, g));
      bool tie = false;
      std::vector<double> proj(n);
      for (std::size_t p = 0; p < p_count && !tie; ++p)
        for (std::size_t k = 0; k < projections.k_count() && !tie; ++k) {
          detail::project_into(ms[p].data().data(), n, d,
                               projections.data().data() + k * d, proj.data());
          std::sort(proj.begin(), proj.end());
          for (std::size_t i = 0; i + 1 < n; ++i)
            if (proj[i + 1] - proj[i] < 1e-3) tie = true;
        }
      if (!tie) break;
    }
    const MeasureSet set(ms);
    const auto beta = SimplexWeights::uniform(p_count);

    std::vector<std::size_t> all(p_count);
    std::iota(all.begin(), all.end(), std::size_t{0});
    const auto res = smw_grad(set, beta, projections, all);
    const auto fd = finite_diff_check(
        [&](const MeasureSet& s) { return smw_squared(s, beta, projections).estimate; }, set,
        res.grad, h);
    worst = std::max(worst, fd.max_rel_error);

    const std::vector<DiscreteMeasure> pair{ms[0], ms[1]};
    const MeasureSet pair_set(pair);
    const auto sres = sw_grad(pair[0], pair[1], projections, PairWrt::both);
    const auto sfd = finite_diff_check(
        [&](const MeasureSet& s) { return sw_squared(s[0], s[1], projections).estimate; },
        pair_set, sres.grad, h);
    worst = std::max(worst, sfd.max_rel_error);
  }
  return detail::make_result("gradients_vs_finite_diff", trials, worst, tol);
}

// Full certification sweep. Deterministic given the seed.
inline VerifyReport run_verification(std::size_t trials, std::size_t max_n, std::size_t max_p,
                                     std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  VerifyReport report;
  report.seed = seed;
  report.checks.push_back(check_oracle_equivalence(trials, max_n, max_p, substream(seed, 1)));
  for (auto& c : check_metric_axioms(AxiomSpace::mw1d, std::max<std::size_t>(trials / 2, 1),
                                     substream(seed, 2)))
    report.checks.push_back(std::move(c));
  for (auto& c : check_metric_axioms(AxiomSpace::smw, std::max<std::size_t>(trials / 2, 1),
                                     substream(seed, 3)))
    report.checks.push_back(std::move(c));
  report.checks.push_back(
      check_gradients(std::max<std::size_t>(trials / 5, 1), substream(seed, 4)));
  report.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

// Line-delimited records, stable for diffing (no timing fields).
inline void write_report_records(const VerifyReport& report, std::ostream& os) {
  char buf[160];
  for (const auto& c : report.checks) {
    std::snprintf(buf, sizeof(buf),
                  "check=%s trials=%zu max_violation=%.17g tol=%.17g pass=%d statistical=%d",
                  c.name.c_str(), c.trials, c.max_violation, c.tolerance, c.pass ? 1 : 0,
                  c.statistical ? 1 : 0);
    os << buf << '\n';
  }
}

inline void print_report_summary(const VerifyReport& report, std::ostream& os) {
  for (const auto& c : report.checks) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-28s %s  max_violation=%.3g (tol %.3g, %zu trials)%s",
                  c.name.c_str(), c.pass ? "PASS" : "FAIL", c.max_violation, c.tolerance,
                  c.trials, c.statistical ? " [statistical]" : "");
    os << buf << '\n';
  }
  os << (report.all_pass() ? "all checks passed" : "CHECKS FAILED") << " (seed "
     << report.seed << ", " << report.elapsed_seconds << "s)\n";
}

}  // namespace smw
