#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "smw/errors.hpp"
#include "smw/gradients.hpp"
#include "smw/measure.hpp"
#include "smw/slicing.hpp"

namespace smw {

// Recorded state trajectories of P agents over a shared horizon T. States of
// all agents must be embedded in a common R^d by the caller; each agent's
// trajectory is stored as a measure with T atoms (one state per time step),
// which is also the on-disk representation (one measure file per agent).
class TrajectoryBatch {
public:
  explicit TrajectoryBatch(std::vector<DiscreteMeasure> per_agent)
      : agents_(std::move(per_agent)) {
    if (agents_.empty()) throw ShapeError("trajectory batch requires at least one agent");
    detail::check_aligned(agents_);
    for (const auto& a : agents_) validate_measure(a);
  }

  std::size_t p_count() const { return agents_.size(); }
  std::size_t horizon() const { return agents_[0].n_atoms(); }
  std::size_t dim() const { return agents_[0].dim(); }

  const DiscreteMeasure& agent(std::size_t p) const { return agents_[p]; }
  std::span<const double> state(std::size_t p, std::size_t t) const {
    return agents_[p].atom(t);
  }

private:
  std::vector<DiscreteMeasure> agents_;
};

inline TrajectoryBatch load_trajectory_batch(std::span<const std::string> paths,
                                             MeasureFormat format) {
  std::vector<DiscreteMeasure> agents;
  agents.reserve(paths.size());
  for (const auto& p : paths) agents.push_back(load_measure(p, format));
  return TrajectoryBatch(std::move(agents));
}

// Alignment indices: entry (k, p, j, t) is the time index of agent j's state
// occupying, under direction k, the same sorted rank as agent p's state at
// time t.
struct EtaIndices {
  std::size_t k_count = 0;
  std::size_t p_count = 0;
  std::size_t horizon = 0;
  std::vector<std::size_t> idx;  // flattened K x P x P x T

  std::size_t at(std::size_t k, std::size_t p, std::size_t j, std::size_t t) const {
    return idx[((k * p_count + p) * p_count + j) * horizon + t];
  }
};

namespace detail {

// Sorted views of each agent's projected trajectory under one direction.
// ranks[p][t] is the sorted position of agent p's state at time t; the
// orders map positions back to time indices.
struct AlignedProjection {
  std::vector<RankedProjection> ranked;        // per agent
  std::vector<std::vector<std::size_t>> rank;  // per agent: time -> sorted position
};

inline void align_projection(const TrajectoryBatch& batch, const double* dir,
                             AlignedProjection& out, std::vector<double>& scratch) {
  const std::size_t p_count = batch.p_count(), t_count = batch.horizon(), d = batch.dim();
  out.ranked.resize(p_count);
  out.rank.resize(p_count);
  scratch.resize(t_count);
  for (std::size_t p = 0; p < p_count; ++p) {
    project_into(batch.agent(p).data().data(), t_count, d, dir, scratch.data());
    rank_projection(scratch.data(), t_count, out.ranked[p]);
    out.rank[p].resize(t_count);
    for (std::size_t r = 0; r < t_count; ++r) out.rank[p][out.ranked[p].order[r]] = r;
  }
}

}  // namespace detail

inline EtaIndices eta_indices(const TrajectoryBatch& batch, const ProjectionSet& projections) {
  if (projections.dim() != batch.dim())
    throw DimensionMismatch("projections have dimension " + std::to_string(projections.dim()) +
                            ", states have " + std::to_string(batch.dim()));
  const std::size_t k_count = projections.k_count();
  const std::size_t p_count = batch.p_count(), t_count = batch.horizon();

  EtaIndices eta;
  eta.k_count = k_count;
  eta.p_count = p_count;
  eta.horizon = t_count;
  eta.idx.resize(k_count * p_count * p_count * t_count);

  detail::AlignedProjection ap;
  std::vector<double> scratch;
  for (std::size_t k = 0; k < k_count; ++k) {
    detail::align_projection(batch, projections.data().data() + k * batch.dim(), ap, scratch);
    for (std::size_t p = 0; p < p_count; ++p)
      for (std::size_t j = 0; j < p_count; ++j) {
        std::size_t* row = eta.idx.data() + ((k * p_count + p) * p_count + j) * t_count;
        for (std::size_t t = 0; t < t_count; ++t) row[t] = ap.ranked[j].order[ap.rank[p][t]];
      }
  }
  return eta;
}

// Per-timestep multi-task reward for all agents at once:
//   r[p][t] = (1/(P*K)) * sum_k |<x_t^(p) - (1/P) sum_j x_eta^(j), theta_k>|^2,
// which per projection equals the squared deviation of agent p's projected
// state from the rank-wise mean of the aligned projected states.
inline std::vector<std::vector<double>> multitask_reward_matrix(const TrajectoryBatch& batch,
                                                                const ProjectionSet& projections) {
  if (projections.dim() != batch.dim())
    throw DimensionMismatch("projections have dimension " + std::to_string(projections.dim()) +
                            ", states have " + std::to_string(batch.dim()));
  const std::size_t k_count = projections.k_count();
  const std::size_t p_count = batch.p_count(), t_count = batch.horizon();
  const double scale = 1.0 / (static_cast<double>(p_count) * static_cast<double>(k_count));

  std::vector<std::vector<double>> rewards(p_count, std::vector<double>(t_count, 0.0));
  detail::AlignedProjection ap;
  std::vector<double> scratch, bary(t_count);
  const double inv_p = 1.0 / static_cast<double>(p_count);
  for (std::size_t k = 0; k < k_count; ++k) {
    detail::align_projection(batch, projections.data().data() + k * batch.dim(), ap, scratch);
    // Rank-wise mean of the aligned states, centered on agent 0 so identical
    // agents earn an exactly-zero multi-task reward.
    const std::vector<double>& base = ap.ranked[0].sorted;
    bary.assign(t_count, 0.0);
    for (std::size_t j = 1; j < p_count; ++j)
      for (std::size_t r = 0; r < t_count; ++r)
        bary[r] += ap.ranked[j].sorted[r] - base[r];
    for (std::size_t r = 0; r < t_count; ++r) bary[r] *= inv_p;

    for (std::size_t p = 0; p < p_count; ++p)
      for (std::size_t r = 0; r < t_count; ++r) {
        const double dev =
            p == 0 ? -bary[r] : (ap.ranked[p].sorted[r] - base[r]) - bary[r];
        rewards[p][ap.ranked[p].order[r]] += scale * dev * dev;
      }
  }
  return rewards;
}

inline double multitask_reward(const TrajectoryBatch& batch, std::size_t p, std::size_t t,
                               const ProjectionSet& projections) {
  if (p >= batch.p_count() || t >= batch.horizon())
    throw std::out_of_range("agent or time index out of range");
  return multitask_reward_matrix(batch, projections)[p][t];
}

enum class RewardScale { neg, exp };

// Shaped-reward settings: regularization weight, the scaling function applied
// to the multi-task reward (f(y) = -y, or f(y) = e^(-rate*y) with rate 5 by
// default), and the shared projections.
struct RewardConfig {
  ProjectionSet projections;
  double gamma = 0.0;
  RewardScale scale = RewardScale::exp;
  double exp_rate = 5.0;
};

// Composite reward R_p(t) = canonical[p][t] + gamma * f(r[p][t]). With
// gamma = 0 the canonical rewards are returned unchanged.
inline std::vector<std::vector<double>> composite_reward(
    const TrajectoryBatch& batch, const std::vector<std::vector<double>>& canonical,
    const RewardConfig& cfg) {
  if (canonical.size() != batch.p_count())
    throw ShapeError("canonical reward matrix has " + std::to_string(canonical.size()) +
                     " rows for " + std::to_string(batch.p_count()) + " agents");
  for (const auto& row : canonical)
    if (row.size() != batch.horizon())
      throw ShapeError("canonical reward row length does not match the horizon");
  if (!(cfg.gamma >= 0.0)) throw std::invalid_argument("gamma must be >= 0");

  if (cfg.gamma == 0.0) return canonical;

  auto shaped = multitask_reward_matrix(batch, cfg.projections);
  for (std::size_t p = 0; p < shaped.size(); ++p)
    for (std::size_t t = 0; t < shaped[p].size(); ++t) {
      const double f = cfg.scale == RewardScale::neg
                           ? -shaped[p][t]
                           : std::exp(-cfg.exp_rate * shaped[p][t]);
      shaped[p][t] = canonical[p][t] + cfg.gamma * f;
    }
  return shaped;
}

// P rows of T comma-separated values.
inline void save_reward_csv(const std::vector<std::vector<double>>& rewards,
                            const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  char buf[64];
  for (const auto& row : rewards) {
    for (std::size_t t = 0; t < row.size(); ++t) {
      std::snprintf(buf, sizeof(buf), "%.17g", row[t]);
      os << (t ? "," : "") << buf;
    }
    os << '\n';
  }
  if (!os) throw IoError("write to '" + path + "' failed");
}

}  // namespace smw
