#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <thread>
#include <vector>

#include "smw/errors.hpp"
#include "smw/measure.hpp"
#include "smw/ot1d.hpp"
#include "smw/rng.hpp"

namespace smw {

// K unit directions on the (d-1)-sphere, row-major. Sampled sets are fully
// determined by (seed, K, d): direction k is drawn from a substream derived
// from (seed, k), so the set is independent of evaluation order and identical
// under any parallel split.
class ProjectionSet {
public:
  static ProjectionSet sample(std::size_t dim, std::size_t k_count, std::uint64_t seed) {
    if (dim == 0 || k_count == 0) throw ShapeError("dim and k_count must be positive");
    std::vector<double> dirs(k_count * dim);
    for (std::size_t k = 0; k < k_count; ++k) {
      Rng g(substream(seed, k));
      double* row = dirs.data() + k * dim;
      double norm_sq = 0.0;
      do {  // a zero draw has probability ~0; resample rather than surface it
        norm_sq = 0.0;
        for (std::size_t c = 0; c < dim; ++c) {
          row[c] = g.normal();
          norm_sq += row[c] * row[c];
        }
      } while (norm_sq < 1e-300);
      if (dim == 1) {
        row[0] = row[0] < 0.0 ? -1.0 : 1.0;  // exact signs on the 0-sphere
      } else {
        const double inv = 1.0 / std::sqrt(norm_sq);
        for (std::size_t c = 0; c < dim; ++c) row[c] *= inv;
      }
    }
    return ProjectionSet(std::move(dirs), k_count, dim, seed);
  }

  // Explicit directions (tests, fixed-direction evaluations). Rows must be
  // unit length within 1e-12.
  static ProjectionSet from_directions(std::vector<double> directions, std::size_t k_count,
                                       std::size_t dim) {
    if (dim == 0 || k_count == 0) throw ShapeError("dim and k_count must be positive");
    if (directions.size() != k_count * dim)
      throw ShapeError("direction buffer size does not match K x d");
    for (std::size_t k = 0; k < k_count; ++k) {
      double norm_sq = 0.0;
      for (std::size_t c = 0; c < dim; ++c) norm_sq += directions[k * dim + c] * directions[k * dim + c];
      if (std::abs(std::sqrt(norm_sq) - 1.0) > 1e-12)
        throw NonUnitDirection("direction " + std::to_string(k) + " has norm " +
                               std::to_string(std::sqrt(norm_sq)));
    }
    return ProjectionSet(std::move(directions), k_count, dim, 0);
  }

  std::size_t k_count() const { return k_; }
  std::size_t dim() const { return d_; }
  std::uint64_t seed() const { return seed_; }

  std::span<const double> direction(std::size_t k) const {
    return std::span<const double>(dirs_.data() + k * d_, d_);
  }
  const std::vector<double>& data() const { return dirs_; }

private:
  ProjectionSet(std::vector<double> dirs, std::size_t k, std::size_t d, std::uint64_t seed)
      : dirs_(std::move(dirs)), k_(k), d_(d), seed_(seed) {}

  std::vector<double> dirs_;
  std::size_t k_;
  std::size_t d_;
  std::uint64_t seed_;
};

inline ProjectionSet sample_directions(std::size_t dim, std::size_t k_count,
                                       std::uint64_t seed) {
  return ProjectionSet::sample(dim, k_count, seed);
}

// Monte-Carlo estimate: mean over per-projection 1D distances, with the
// sample standard error (0 by convention for K = 1).
struct DistanceEstimate {
  double estimate = 0.0;
  std::vector<double> per_projection;
  double std_error = 0.0;
  std::size_t k_count = 0;
};

namespace detail {

inline void project_into(const double* atoms, std::size_t n, std::size_t d, const double* dir,
                         double* out) {
  if (d == 1) {
    const double t = dir[0];
    for (std::size_t i = 0; i < n; ++i) out[i] = atoms[i] * t;
    return;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double* a = atoms + i * d;
    double s = 0.0;
    for (std::size_t c = 0; c < d; ++c) s += a[c] * dir[c];
    out[i] = s;
  }
}

// Mean / standard error over per-projection values, reduced in projection
// order so results do not depend on how the evaluation was scheduled.
inline DistanceEstimate finalize_estimate(std::vector<double> per_projection) {
  DistanceEstimate e;
  e.k_count = per_projection.size();
  e.per_projection = std::move(per_projection);
  double sum = 0.0;
  for (double v : e.per_projection) sum += v;
  e.estimate = sum / static_cast<double>(e.k_count);
  if (e.k_count > 1) {
    double ss = 0.0;
    for (double v : e.per_projection) {
      const double d = v - e.estimate;
      ss += d * d;
    }
    e.std_error = std::sqrt(ss / static_cast<double>(e.k_count - 1)) /
                  std::sqrt(static_cast<double>(e.k_count));
  }
  return e;
}

}  // namespace detail

// Sliced multi-marginal squared distance, estimated over the given
// projections: per projection, project every measure to 1D, sort, and apply
// the closed-form multi-marginal kernel. O(K*P*N log N). threads = 0 means
// hardware concurrency; per-projection values are identical for any thread
// count.
inline DistanceEstimate smw_squared(const MeasureSet& set, const SimplexWeights& beta,
                                    const ProjectionSet& projections, unsigned threads = 1) {
  if (projections.dim() != set.dim())
    throw DimensionMismatch("projections have dimension " + std::to_string(projections.dim()) +
                            ", measures have " + std::to_string(set.dim()));
  detail::require_beta_matches(beta, set.p_count());

  const std::size_t p_count = set.p_count(), n = set.n_atoms(), d = set.dim();
  const std::size_t k_count = projections.k_count();
  std::vector<double> per_projection(k_count);

  struct Scratch {
    std::vector<std::vector<double>> proj;
    std::vector<const double*> rows;
    std::vector<double> bary;
  };

  auto make_scratch = [&] {
    Scratch s;
    s.proj.assign(p_count, std::vector<double>(n));
    s.rows.resize(p_count);
    for (std::size_t p = 0; p < p_count; ++p) s.rows[p] = s.proj[p].data();
    return s;
  };

  auto eval_with = [&](Scratch& s, std::size_t k) {
    const double* dir = projections.data().data() + k * d;
    for (std::size_t p = 0; p < p_count; ++p) {
      detail::project_into(set[p].data().data(), n, d, dir, s.proj[p].data());
      std::sort(s.proj[p].begin(), s.proj[p].end());
    }
    per_projection[k] = detail::mw_squared_sorted(s.rows, beta.values(), n, s.bary);
  };

  const unsigned t = threads == 0 ? std::thread::hardware_concurrency() : threads;
  if (t <= 1 || k_count < 2) {
    Scratch s = make_scratch();
    for (std::size_t k = 0; k < k_count; ++k) eval_with(s, k);
  } else {
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(t, k_count));
    std::vector<std::thread> pool;
    const std::size_t chunk = (k_count + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
      const std::size_t lo = w * chunk, hi = std::min(k_count, lo + chunk);
      if (lo >= hi) break;
      pool.emplace_back([&, lo, hi] {
        Scratch s = make_scratch();
        for (std::size_t k = lo; k < hi; ++k) eval_with(s, k);
      });
    }
    for (auto& th : pool) th.join();
  }
  return detail::finalize_estimate(std::move(per_projection));
}

// Sliced squared 2-Wasserstein between two measures over the given
// projections.
inline DistanceEstimate sw_squared(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                   const ProjectionSet& projections, unsigned threads = 1) {
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
  std::vector<double> per_projection(k_count);

  auto eval_range = [&](std::size_t lo, std::size_t hi) {
    std::vector<double> xs(n), ys(n);
    for (std::size_t k = lo; k < hi; ++k) {
      const double* dir = projections.data().data() + k * d;
      detail::project_into(mu.data().data(), n, d, dir, xs.data());
      detail::project_into(nu.data().data(), n, d, dir, ys.data());
      std::sort(xs.begin(), xs.end());
      std::sort(ys.begin(), ys.end());
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double diff = xs[i] - ys[i];
        acc += diff * diff;
      }
      per_projection[k] = acc / static_cast<double>(n);
    }
  };

  const unsigned t = threads == 0 ? std::thread::hardware_concurrency() : threads;
  if (t <= 1 || k_count < 2) {
    eval_range(0, k_count);
  } else {
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(t, k_count));
    std::vector<std::thread> pool;
    const std::size_t chunk = (k_count + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
      const std::size_t lo = w * chunk, hi = std::min(k_count, lo + chunk);
      if (lo >= hi) break;
      pool.emplace_back([&eval_range, lo, hi] { eval_range(lo, hi); });
    }
    for (auto& th : pool) th.join();
  }
  return detail::finalize_estimate(std::move(per_projection));
}

// Spread of the Monte-Carlo estimator across repeats, per projection budget.
struct VarianceRow {
  std::size_t k_count = 0;
  double mean = 0.0;
  double std_dev = 0.0;
};

// For each K, runs `repeats` independent estimates with derived seeds and
// reports mean and sample standard deviation across repeats.
inline std::vector<VarianceRow> variance_profile(const MeasureSet& set,
                                                 const SimplexWeights& beta,
                                                 std::span<const std::size_t> k_values,
                                                 std::size_t repeats, std::uint64_t seed) {
  if (k_values.empty()) throw std::invalid_argument("k_values must be non-empty");
  if (repeats < 2) throw std::invalid_argument("variance profile requires repeats >= 2");

  std::vector<VarianceRow> rows;
  rows.reserve(k_values.size());
  for (std::size_t k : k_values) {
    std::vector<double> estimates(repeats);
    for (std::size_t r = 0; r < repeats; ++r) {
      const auto ps = sample_directions(set.dim(), k, substream(seed, k, r));
      estimates[r] = smw_squared(set, beta, ps).estimate;
    }
    double mean = 0.0;
    for (double v : estimates) mean += v;
    mean /= static_cast<double>(repeats);
    double ss = 0.0;
    for (double v : estimates) ss += (v - mean) * (v - mean);
    rows.push_back({k, mean, std::sqrt(ss / static_cast<double>(repeats - 1))});
  }
  return rows;
}

}  // namespace smw
