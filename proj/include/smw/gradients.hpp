#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

#include "smw/errors.hpp"
#include "smw/measure.hpp"
#include "smw/ot1d.hpp"
#include "smw/slicing.hpp"

namespace smw {

// Partial derivatives of a sliced objective with respect to atom positions;
// per_measure[p] mirrors measure p's row-major N x d layout. Entries for
// measures outside the requested subset stay zero.
struct GradientField {
  std::vector<std::vector<double>> per_measure;
};

struct GradResult {
  DistanceEstimate value;
  GradientField grad;
};

enum class PairWrt { first, second, both };

namespace detail {

struct RankedProjection {
  std::vector<double> sorted;      // projected atoms, ascending
  std::vector<std::size_t> order;  // sorted rank -> original atom index
};

// Stable sort of a projected measure; ties keep original order, which makes
// the routed subgradient deterministic.
inline void rank_projection(const double* values, std::size_t n, RankedProjection& rp) {
  rp.order.resize(n);
  std::iota(rp.order.begin(), rp.order.end(), std::size_t{0});
  std::stable_sort(rp.order.begin(), rp.order.end(),
                   [values](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  rp.sorted.resize(n);
  for (std::size_t r = 0; r < n; ++r) rp.sorted[r] = values[rp.order[r]];
}

}  // namespace detail

// Analytic gradient of the sliced multi-marginal squared distance with
// respect to atom positions of the measures listed in `wrt` (0-based).
//
// Per projection theta and sorted rank i, with b_i the rank-wise barycenter,
// the derivative of the 1D kernel with respect to measure p's atom at rank i
// is 2*beta_p*(x_i - b_i)/N: the cross terms through b_i cancel because the
// beta-weighted deviations sum to zero at every rank. Chaining through the
// projection multiplies by theta; averaging over K projections divides by K.
// At sorting ties the value routed through the stable sort is a valid
// subgradient of the piecewise-quadratic objective.
inline GradResult smw_grad(const MeasureSet& set, const SimplexWeights& beta,
                           const ProjectionSet& projections,
                           std::span<const std::size_t> wrt) {
  if (projections.dim() != set.dim())
    throw DimensionMismatch("projections have dimension " + std::to_string(projections.dim()) +
                            ", measures have " + std::to_string(set.dim()));
  detail::require_beta_matches(beta, set.p_count());
  const std::size_t p_count = set.p_count(), n = set.n_atoms(), d = set.dim();
  const std::size_t k_count = projections.k_count();

  std::vector<bool> active(p_count, false);
  for (std::size_t p : wrt) {
    if (p >= p_count) throw std::invalid_argument("wrt index out of range");
    active[p] = true;
  }

  GradResult res;
  res.grad.per_measure.assign(p_count, {});
  for (std::size_t p = 0; p < p_count; ++p) res.grad.per_measure[p].assign(n * d, 0.0);

  std::vector<detail::RankedProjection> ranked(p_count);
  std::vector<double> proj(n), bary(n);
  std::vector<double> per_projection(k_count);
  const double inv_nk = 1.0 / (static_cast<double>(n) * static_cast<double>(k_count));

  for (std::size_t k = 0; k < k_count; ++k) {
    const double* dir = projections.data().data() + k * d;
    for (std::size_t p = 0; p < p_count; ++p) {
      detail::project_into(set[p].data().data(), n, d, dir, proj.data());
      detail::rank_projection(proj.data(), n, ranked[p]);
    }
    // Rank-wise barycenter deviations, centered on the first measure as in
    // the distance kernel so identical inputs give exact zeros.
    const std::vector<double>& base = ranked[0].sorted;
    bary.assign(n, 0.0);
    for (std::size_t p = 1; p < p_count; ++p) {
      const double w = beta[p];
      for (std::size_t i = 0; i < n; ++i) bary[i] += w * (ranked[p].sorted[i] - base[i]);
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double s = beta[0] * bary[i] * bary[i];
      for (std::size_t p = 1; p < p_count; ++p) {
        const double dev = (ranked[p].sorted[i] - base[i]) - bary[i];
        s += beta[p] * dev * dev;
      }
      acc += s;
    }
    per_projection[k] = acc / static_cast<double>(n);

    for (std::size_t p = 0; p < p_count; ++p) {
      if (!active[p]) continue;
      double* g = res.grad.per_measure[p].data();
      const double wp = beta[p];
      for (std::size_t i = 0; i < n; ++i) {
        const double dev =
            p == 0 ? -bary[i] : (ranked[p].sorted[i] - base[i]) - bary[i];
        const double coef = 2.0 * wp * dev * inv_nk;
        double* row = g + ranked[p].order[i] * d;
        for (std::size_t c = 0; c < d; ++c) row[c] += coef * dir[c];
      }
    }
  }
  res.value = detail::finalize_estimate(std::move(per_projection));
  return res;
}

// Analytic gradient of the sliced squared 2-Wasserstein distance. Per
// projection and rank i, the derivative with respect to mu's atom at rank i
// is 2*(x_i - y_i)/N (negated for nu), chained through the projection.
inline GradResult sw_grad(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                          const ProjectionSet& projections, PairWrt wrt = PairWrt::both) {
  if (mu.dim() != nu.dim())
    throw DimensionMismatch("measures have dimensions " + std::to_string(mu.dim()) + " and " +
                            std::to_string(nu.dim()));
  if (projections.dim() != mu.dim())
    throw DimensionMismatch("projections have dimension " + std::to_string(projections.dim()) +
                            ", measures have " + std::to_string(mu.dim()));
  if (mu.n_atoms() != nu.n_atoms())
    throw AtomCountMismatch("measures have " + std::to_string(mu.n_atoms()) + " and " +
                            std::to_string(nu.n_atoms()) + " atoms");

  const std::size_t n = mu.n_atoms(), d = mu.dim();
  const std::size_t k_count = projections.k_count();
  const bool want_first = wrt != PairWrt::second;
  const bool want_second = wrt != PairWrt::first;

  GradResult res;
  res.grad.per_measure.assign(2, std::vector<double>(n * d, 0.0));

  detail::RankedProjection rx, ry;
  std::vector<double> proj(n);
  std::vector<double> per_projection(k_count);
  const double inv_nk = 1.0 / (static_cast<double>(n) * static_cast<double>(k_count));

  for (std::size_t k = 0; k < k_count; ++k) {
    const double* dir = projections.data().data() + k * d;
    detail::project_into(mu.data().data(), n, d, dir, proj.data());
    detail::rank_projection(proj.data(), n, rx);
    detail::project_into(nu.data().data(), n, d, dir, proj.data());
    detail::rank_projection(proj.data(), n, ry);

    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double diff = rx.sorted[i] - ry.sorted[i];
      acc += diff * diff;
      const double coef = 2.0 * diff * inv_nk;
      if (want_first) {
        double* row = res.grad.per_measure[0].data() + rx.order[i] * d;
        for (std::size_t c = 0; c < d; ++c) row[c] += coef * dir[c];
      }
      if (want_second) {
        double* row = res.grad.per_measure[1].data() + ry.order[i] * d;
        for (std::size_t c = 0; c < d; ++c) row[c] -= coef * dir[c];
      }
    }
    per_projection[k] = acc / static_cast<double>(n);
  }
  res.value = detail::finalize_estimate(std::move(per_projection));
  return res;
}

struct FiniteDiffReport {
  double max_rel_error = 0.0;
  bool tie_warning = false;
};

// Central-difference verification of an analytic gradient field against an
// arbitrary objective over the set. The field must cover every measure the
// objective actually varies with. Relative error uses
// max(|analytic|, |numeric|, 1e-8) as denominator.
//
// The caller must keep perturbations from crossing sorting ties; when the
// projections used by the objective are supplied, adjacent projected atoms
// closer than 2h are flagged as a tie warning (the check still runs).
inline FiniteDiffReport finite_diff_check(
    const std::function<double(const MeasureSet&)>& objective, const MeasureSet& set,
    const GradientField& grad, double h = 1e-5,
    const ProjectionSet* projections = nullptr) {
  const std::size_t p_count = set.p_count(), n = set.n_atoms(), d = set.dim();
  if (grad.per_measure.size() != p_count)
    throw std::invalid_argument("gradient field does not mirror the measure set");
  for (const auto& g : grad.per_measure)
    if (g.size() != n * d)
      throw std::invalid_argument("gradient field does not mirror the measure set");
  if (!(h > 0.0)) throw std::invalid_argument("step h must be positive");

  FiniteDiffReport report;
  if (projections) {
    std::vector<double> proj(n);
    for (std::size_t p = 0; p < p_count && !report.tie_warning; ++p) {
      for (std::size_t k = 0; k < projections->k_count() && !report.tie_warning; ++k) {
        detail::project_into(set[p].data().data(), n, d,
                             projections->data().data() + k * d, proj.data());
        std::sort(proj.begin(), proj.end());
        for (std::size_t i = 0; i + 1 < n; ++i)
          if (proj[i + 1] - proj[i] < 2.0 * h) {
            report.tie_warning = true;
            break;
          }
      }
    }
  }

  std::vector<DiscreteMeasure> work(set.begin(), set.end());
  for (std::size_t p = 0; p < p_count; ++p) {
    std::vector<double> atoms = set[p].data();
    for (std::size_t j = 0; j < n * d; ++j) {
      const double saved = atoms[j];
      atoms[j] = saved + h;
      work[p] = DiscreteMeasure(atoms, n, d);
      const double f_plus = objective(MeasureSet(work));
      atoms[j] = saved - h;
      work[p] = DiscreteMeasure(atoms, n, d);
      const double f_minus = objective(MeasureSet(work));
      atoms[j] = saved;
      work[p] = DiscreteMeasure(atoms, n, d);

      const double numeric = (f_plus - f_minus) / (2.0 * h);
      const double analytic = grad.per_measure[p][j];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      report.max_rel_error = std::max(report.max_rel_error,
                                      std::abs(analytic - numeric) / denom);
    }
  }
  return report;
}

}  // namespace smw
