#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "smw/errors.hpp"
#include "smw/measure.hpp"

namespace smw {

// Stable ascending sort of a 1D measure. order[r] is the original index of
// the atom at sorted position r; equal atoms keep their original relative
// order.
struct SortedView {
  std::vector<std::size_t> order;
  std::vector<double> sorted_atoms;
};

inline SortedView sorted_view(const DiscreteMeasure& m) {
  if (m.dim() != 1) throw DimensionMismatch("sorted_view requires a 1D measure");
  const std::size_t n = m.n_atoms();
  SortedView v;
  v.order.resize(n);
  std::iota(v.order.begin(), v.order.end(), std::size_t{0});
  const double* x = m.data().data();
  std::stable_sort(v.order.begin(), v.order.end(),
                   [x](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  v.sorted_atoms.resize(n);
  for (std::size_t r = 0; r < n; ++r) v.sorted_atoms[r] = x[v.order[r]];
  return v;
}

namespace detail {

// Multi-marginal cost over already-sorted rows: for each rank i the weighted
// spread around the rank-wise barycenter b_i = sum_j beta_j * rows[j][i].
// Deviations are computed relative to the first row, which costs one extra
// subtraction per element but makes identical sorted sequences give exactly
// zero (the raw form leaves a sum(beta) != 1 rounding residue). The squared
// form keeps every term nonnegative, so the result is exactly >= 0.
// Two passes, O(P*N).
inline double mw_squared_sorted(std::span<const double* const> rows,
                                std::span<const double> beta, std::size_t n,
                                std::vector<double>& bary_buf) {
  const std::size_t p_count = rows.size();
  const double* base = rows[0];
  bary_buf.assign(n, 0.0);
  for (std::size_t p = 1; p < p_count; ++p) {
    const double w = beta[p];
    const double* r = rows[p];
    double* b = bary_buf.data();
    for (std::size_t i = 0; i < n; ++i) b[i] += w * (r[i] - base[i]);
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double b = bary_buf[i];
    double s = beta[0] * b * b;
    for (std::size_t p = 1; p < p_count; ++p) {
      const double d = (rows[p][i] - base[i]) - b;
      s += beta[p] * d * d;
    }
    acc += s;
  }
  return acc / static_cast<double>(n);
}

inline void require_1d_set(const MeasureSet& set) {
  if (set.dim() != 1) throw DimensionMismatch("operation requires 1D measures");
}

inline void require_beta_matches(const SimplexWeights& beta, std::size_t p_count) {
  if (beta.size() != p_count)
    throw std::invalid_argument("weight vector has " + std::to_string(beta.size()) +
                                " entries for " + std::to_string(p_count) + " measures");
}

}  // namespace detail

// Exact squared 2-Wasserstein distance between 1D uniform measures with the
// same atom count: sort both sides and average squared rank-wise gaps.
// O(N log N).
inline double w2_squared_1d(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  if (mu.dim() != 1 || nu.dim() != 1)
    throw DimensionMismatch("w2_squared_1d requires 1D measures");
  if (mu.n_atoms() != nu.n_atoms())
    throw AtomCountMismatch("measures have " + std::to_string(mu.n_atoms()) + " and " +
                            std::to_string(nu.n_atoms()) + " atoms");
  const std::size_t n = mu.n_atoms();
  std::vector<double> xs(mu.data()), ys(nu.data());
  std::sort(xs.begin(), xs.end());
  std::sort(ys.begin(), ys.end());
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = xs[i] - ys[i];
    acc += d * d;
  }
  return acc / static_cast<double>(n);
}

// Closed-form squared multi-marginal distance between 1D uniform measures:
// the optimal coupling sorts every measure, so the cost is the beta-weighted
// spread of rank-aligned atoms around their rank-wise barycenter.
// O(P*N log N). Valid for any beta on the simplex.
inline double mw_squared_1d(const MeasureSet& set, const SimplexWeights& beta) {
  detail::require_1d_set(set);
  detail::require_beta_matches(beta, set.p_count());
  const std::size_t p_count = set.p_count(), n = set.n_atoms();

  std::vector<std::vector<double>> sorted(p_count);
  std::vector<const double*> rows(p_count);
  for (std::size_t p = 0; p < p_count; ++p) {
    sorted[p] = set[p].data();
    std::sort(sorted[p].begin(), sorted[p].end());
    rows[p] = sorted[p].data();
  }
  std::vector<double> bary;
  return detail::mw_squared_sorted(rows, beta.values(), n, bary);
}

namespace detail {

// Depth-first exhaustive scan over all (N!)^(P-1) coupling tuples with
// sigma_1 fixed to the identity. Slots are processed in measure-1 order; for
// each slot one unused atom is chosen from every other measure. Partial costs
// are monotone (each completed slot adds a clamped-nonnegative amount), so a
// branch is cut as soon as its partial cost reaches the incumbent. The search
// never assumes anything about which tuple is optimal; pruning only discards
// branches that provably cannot improve.
class ExhaustiveMwSearch {
public:
  ExhaustiveMwSearch(std::vector<std::vector<double>> atoms, std::span<const double> beta)
      : atoms_(std::move(atoms)), p_count_(atoms_.size()), n_(atoms_[0].size()) {
    weighted_.resize(p_count_);
    weighted_sq_.resize(p_count_);
    for (std::size_t p = 0; p < p_count_; ++p) {
      weighted_[p].resize(n_);
      weighted_sq_[p].resize(n_);
      for (std::size_t j = 0; j < n_; ++j) {
        weighted_[p][j] = beta[p] * atoms_[p][j];
        weighted_sq_[p][j] = beta[p] * atoms_[p][j] * atoms_[p][j];
      }
    }
    // Per (slot, measure) candidate order: nearest atoms first. Finding a
    // good incumbent early makes the pruning bite; correctness does not
    // depend on this order.
    candidates_.assign(p_count_, {});
    for (std::size_t p = 1; p < p_count_; ++p) {
      candidates_[p].resize(n_);
      for (std::size_t slot = 0; slot < n_; ++slot) {
        auto& cand = candidates_[p][slot];
        cand.resize(n_);
        std::iota(cand.begin(), cand.end(), std::size_t{0});
        const double ref = atoms_[0][slot];
        const auto& xs = atoms_[p];
        std::sort(cand.begin(), cand.end(), [&](std::size_t a, std::size_t b) {
          return std::abs(xs[a] - ref) < std::abs(xs[b] - ref);
        });
      }
    }
    used_.assign(p_count_, 0);
  }

  double run() {
    best_ = std::numeric_limits<double>::infinity();
    descend_slot(0, 0.0);
    return best_ / static_cast<double>(n_);
  }

private:
  void descend_slot(std::size_t slot, double partial) {
    if (slot == n_) {
      best_ = partial;  // only reached through strictly improving branches
      return;
    }
    choose(slot, 1, partial, weighted_[0][slot], weighted_sq_[0][slot]);
  }

  void choose(std::size_t slot, std::size_t p, double partial, double slot_sum,
              double slot_sum_sq) {
    if (p == p_count_) {
      // Slot complete. With weights summing to 1 the weighted spread around
      // the slot barycenter reduces to E[x^2] - (E[x])^2; clamp the rounding
      // residue so partial sums stay monotone.
      double cost = slot_sum_sq - slot_sum * slot_sum;
      if (cost < 0.0) cost = 0.0;
      const double next = partial + cost;
      if (next >= best_) return;
      descend_slot(slot + 1, next);
      return;
    }
    const auto& cand = candidates_[p][slot];
    const auto& w = weighted_[p];
    const auto& wsq = weighted_sq_[p];
    for (std::size_t j : cand) {
      const std::uint32_t bit = 1u << j;
      if (used_[p] & bit) continue;
      used_[p] |= bit;
      choose(slot, p + 1, partial, slot_sum + w[j], slot_sum_sq + wsq[j]);
      used_[p] &= ~bit;
    }
  }

  std::vector<std::vector<double>> atoms_;
  std::size_t p_count_;
  std::size_t n_;
  std::vector<std::vector<double>> weighted_;
  std::vector<std::vector<double>> weighted_sq_;
  std::vector<std::vector<std::vector<std::size_t>>> candidates_;
  std::vector<std::uint32_t> used_;
  double best_ = 0.0;
};

}  // namespace detail

// Certification oracle: exhaustively minimizes the coupling cost over every
// permutation tuple instead of sorting. Exponential; guarded to N <= 8 and
// P <= 5 so it stays a desk-scale tool.
inline double mw_squared_1d_oracle(const MeasureSet& set, const SimplexWeights& beta) {
  detail::require_1d_set(set);
  detail::require_beta_matches(beta, set.p_count());
  if (set.n_atoms() > 8 || set.p_count() > 5)
    throw InstanceTooLarge("exhaustive search limited to N <= 8, P <= 5; got N = " +
                           std::to_string(set.n_atoms()) + ", P = " +
                           std::to_string(set.p_count()));
  std::vector<std::vector<double>> atoms;
  atoms.reserve(set.p_count());
  for (const auto& m : set) atoms.push_back(m.data());
  detail::ExhaustiveMwSearch search(std::move(atoms), beta.values());
  return search.run();
}

}  // namespace smw
