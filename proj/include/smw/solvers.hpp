#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "smw/errors.hpp"
#include "smw/gradients.hpp"
#include "smw/measure.hpp"
#include "smw/rng.hpp"
#include "smw/slicing.hpp"

namespace smw {

// Stochastic gradient descent settings. Defaults follow the barycentric
// averaging configuration (50 projections, step 3e-3); solvers resample
// k_per_step fresh directions every iteration unless fixed_projections is
// set, which pins one shared direction set for matched-objective
// comparisons.
struct SolverConfig {
  std::size_t iters = 500;
  double step_size = 3e-3;
  std::size_t k_per_step = 50;
  std::optional<std::size_t> batch;  // minibatch atom count for unequal supports
  std::uint64_t seed = 0;
  std::size_t log_every = 10;
  bool cosine_decay = false;
  std::optional<ProjectionSet> fixed_projections;
};

struct TracePoint {
  std::size_t iteration = 0;
  double objective = 0.0;
};

// Objective estimates at logged iterations plus the final measure(s):
// one measure for barycenter solvers, P measures for the multi-task fit.
struct SolveTrace {
  std::vector<TracePoint> objective_history;
  std::vector<DiscreteMeasure> final_measures;
};

// One record per line: "iteration,objective".
inline void save_trace(const SolveTrace& trace, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  char buf[64];
  for (const auto& pt : trace.objective_history) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g", pt.iteration, pt.objective);
    os << buf << '\n';
  }
  if (!os) throw IoError("write to '" + path + "' failed");
}

namespace detail {

inline void check_solver_config(const SolverConfig& cfg) {
  if (cfg.iters < 1) throw std::invalid_argument("iters must be >= 1");
  if (!(cfg.step_size > 0.0)) throw std::invalid_argument("step_size must be positive");
  if (cfg.k_per_step < 1) throw std::invalid_argument("k_per_step must be >= 1");
  if (cfg.log_every < 1) throw std::invalid_argument("log_every must be >= 1");
  if (cfg.batch && *cfg.batch < 1) throw std::invalid_argument("batch must be >= 1");
}

inline double step_scale(const SolverConfig& cfg, std::size_t it) {
  if (!cfg.cosine_decay) return cfg.step_size;
  const double t = static_cast<double>(it) / static_cast<double>(cfg.iters);
  return cfg.step_size * 0.5 * (1.0 + std::cos(3.14159265358979323846 * t));
}

// Free-measure initialization: atoms drawn uniformly from the targets'
// pooled atoms, plus small Gaussian jitter.
inline std::vector<double> init_from_pool(const MeasureSet& targets, std::size_t n_atoms,
                                          std::uint64_t seed) {
  Rng g(seed);
  const std::size_t d = targets.dim();
  const std::size_t pool = targets.p_count() * targets.n_atoms();
  std::vector<double> atoms(n_atoms * d);
  for (std::size_t i = 0; i < n_atoms; ++i) {
    const std::size_t pick = g.below(pool);
    const auto src = targets[pick / targets.n_atoms()].atom(pick % targets.n_atoms());
    for (std::size_t c = 0; c < d; ++c) atoms[i * d + c] = src[c] + 1e-2 * g.normal();
  }
  return atoms;
}

// First k distinct indices of a seeded partial Fisher-Yates shuffle of [0, n).
inline std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, Rng& g) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + g.below(n - i)]);
  idx.resize(k);
  return idx;
}

inline DiscreteMeasure gather_atoms(const DiscreteMeasure& m,
                                    std::span<const std::size_t> idx) {
  const std::size_t d = m.dim();
  std::vector<double> atoms(idx.size() * d);
  for (std::size_t i = 0; i < idx.size(); ++i)
    for (std::size_t c = 0; c < d; ++c) atoms[i * d + c] = m.data()[idx[i] * d + c];
  return DiscreteMeasure(std::move(atoms), idx.size(), d);
}

constexpr std::uint64_t kInitStream = 0x1717;
constexpr std::uint64_t kDirStream = 0xD17;
constexpr std::uint64_t kBatchStream = 0xBA7C;

}  // namespace detail

// Barycentric averaging by descent on the multi-marginal objective: a free
// measure is optimized jointly against all targets (uniform weights over the
// P+1 arguments), updating only the free measure.
inline SolveTrace barycenter_solve(const MeasureSet& targets, std::size_t n_atoms,
                                   const SolverConfig& cfg) {
  detail::check_solver_config(cfg);
  if (n_atoms == 0) throw std::invalid_argument("n_atoms must be >= 1");
  const std::size_t d = targets.dim();
  const std::size_t p_count = targets.p_count();
  const auto beta = SimplexWeights::uniform(p_count + 1);
  const std::array<std::size_t, 1> wrt{0};

  std::vector<double> atoms =
      detail::init_from_pool(targets, n_atoms, substream(cfg.seed, detail::kInitStream));

  SolveTrace trace;
  for (std::size_t it = 0; it < cfg.iters; ++it) {
    const ProjectionSet dirs =
        cfg.fixed_projections
            ? *cfg.fixed_projections
            : sample_directions(d, cfg.k_per_step, substream(cfg.seed, detail::kDirStream, it));

    std::vector<DiscreteMeasure> joint;
    joint.reserve(p_count + 1);
    joint.emplace_back(atoms, n_atoms, d);
    for (const auto& m : targets) joint.push_back(m);
    const auto res = smw_grad(MeasureSet(std::move(joint)), beta, dirs, wrt);

    if (it % cfg.log_every == 0) trace.objective_history.push_back({it, res.value.estimate});
    const double lr = detail::step_scale(cfg, it);
    for (std::size_t j = 0; j < atoms.size(); ++j)
      atoms[j] -= lr * res.grad.per_measure[0][j];
  }
  trace.final_measures.emplace_back(std::move(atoms), n_atoms, d);
  return trace;
}

// Baseline barycenter solver: descent on the averaged pairwise sliced
// distance (1/P) sum_p SW2^2(mu, mu_p). Shares the init and direction
// schedule with barycenter_solve so the two objectives can be compared with
// everything else held fixed.
inline SolveTrace pairwise_barycenter_solve(const MeasureSet& targets, std::size_t n_atoms,
                                            const SolverConfig& cfg) {
  detail::check_solver_config(cfg);
  if (n_atoms == 0) throw std::invalid_argument("n_atoms must be >= 1");
  const std::size_t d = targets.dim();
  const std::size_t p_count = targets.p_count();
  const double inv_p = 1.0 / static_cast<double>(p_count);

  std::vector<double> atoms =
      detail::init_from_pool(targets, n_atoms, substream(cfg.seed, detail::kInitStream));

  SolveTrace trace;
  std::vector<double> grad(n_atoms * d);
  for (std::size_t it = 0; it < cfg.iters; ++it) {
    const ProjectionSet dirs =
        cfg.fixed_projections
            ? *cfg.fixed_projections
            : sample_directions(d, cfg.k_per_step, substream(cfg.seed, detail::kDirStream, it));

    const DiscreteMeasure mu(atoms, n_atoms, d);
    std::fill(grad.begin(), grad.end(), 0.0);
    double objective = 0.0;
    for (std::size_t p = 0; p < p_count; ++p) {
      const auto res = sw_grad(mu, targets[p], dirs, PairWrt::first);
      objective += inv_p * res.value.estimate;
      for (std::size_t j = 0; j < grad.size(); ++j)
        grad[j] += inv_p * res.grad.per_measure[0][j];
    }

    if (it % cfg.log_every == 0) trace.objective_history.push_back({it, objective});
    const double lr = detail::step_scale(cfg, it);
    for (std::size_t j = 0; j < atoms.size(); ++j) atoms[j] -= lr * grad[j];
  }
  trace.final_measures.emplace_back(std::move(atoms), n_atoms, d);
  return trace;
}

// Multi-task density estimation: learns nu_1..nu_P minimizing
//   sum_p SW2^2(mu_p, nu_p) + gamma * SMW2^2(nu_1, ..., nu_P)
// by joint gradient steps. When the model support differs from the target
// support (or a batch size is set), the pairwise term subsamples equal-size
// batches from target and model each step. Every random draw for task p
// derives only from (seed, p, iteration), so with gamma = 0 each task's
// trajectory is bitwise independent of the other tasks' data.
inline SolveTrace mtde_fit(const MeasureSet& targets, std::size_t model_atoms, double gamma,
                           const SolverConfig& cfg) {
  detail::check_solver_config(cfg);
  if (model_atoms == 0) throw std::invalid_argument("model_atoms must be >= 1");
  if (!(gamma >= 0.0)) throw std::invalid_argument("gamma must be >= 0");
  const std::size_t d = targets.dim();
  const std::size_t p_count = targets.p_count();
  const std::size_t n_target = targets.n_atoms();

  std::size_t batch = cfg.batch.value_or(std::min(n_target, model_atoms));
  batch = std::min({batch, n_target, model_atoms});
  const bool sub_target = batch < n_target;
  const bool sub_model = batch < model_atoms;

  std::vector<std::vector<double>> models(p_count);
  for (std::size_t p = 0; p < p_count; ++p) {
    Rng g(substream(cfg.seed, detail::kInitStream, p));
    models[p].resize(model_atoms * d);
    for (std::size_t i = 0; i < model_atoms; ++i) {
      const auto src = targets[p].atom(g.below(n_target));
      for (std::size_t c = 0; c < d; ++c) models[p][i * d + c] = src[c] + 1e-2 * g.normal();
    }
  }

  const auto beta = SimplexWeights::uniform(p_count);
  std::vector<std::size_t> all_models(p_count);
  std::iota(all_models.begin(), all_models.end(), std::size_t{0});

  SolveTrace trace;
  std::vector<std::vector<double>> grads(p_count, std::vector<double>(model_atoms * d));
  for (std::size_t it = 0; it < cfg.iters; ++it) {
    const ProjectionSet dirs =
        cfg.fixed_projections
            ? *cfg.fixed_projections
            : sample_directions(d, cfg.k_per_step, substream(cfg.seed, detail::kDirStream, it));

    double objective = 0.0;
    for (auto& g : grads) std::fill(g.begin(), g.end(), 0.0);

    for (std::size_t p = 0; p < p_count; ++p) {
      Rng g(substream(cfg.seed, detail::kBatchStream, p, it));
      const DiscreteMeasure model(models[p], model_atoms, d);

      std::vector<std::size_t> model_idx;
      if (sub_model) model_idx = detail::sample_indices(model_atoms, batch, g);
      const DiscreteMeasure model_part =
          sub_model ? detail::gather_atoms(model, model_idx) : model;
      const DiscreteMeasure target_part =
          sub_target
              ? detail::gather_atoms(targets[p], detail::sample_indices(n_target, batch, g))
              : targets[p];

      const auto res = sw_grad(model_part, target_part, dirs, PairWrt::first);
      objective += res.value.estimate;
      if (sub_model) {
        for (std::size_t i = 0; i < batch; ++i)
          for (std::size_t c = 0; c < d; ++c)
            grads[p][model_idx[i] * d + c] += res.grad.per_measure[0][i * d + c];
      } else {
        for (std::size_t j = 0; j < grads[p].size(); ++j)
          grads[p][j] += res.grad.per_measure[0][j];
      }
    }

    if (gamma > 0.0) {
      std::vector<DiscreteMeasure> joint;
      joint.reserve(p_count);
      for (std::size_t p = 0; p < p_count; ++p) joint.emplace_back(models[p], model_atoms, d);
      const auto res = smw_grad(MeasureSet(std::move(joint)), beta, dirs, all_models);
      objective += gamma * res.value.estimate;
      for (std::size_t p = 0; p < p_count; ++p)
        for (std::size_t j = 0; j < grads[p].size(); ++j)
          grads[p][j] += gamma * res.grad.per_measure[p][j];
    }

    if (it % cfg.log_every == 0) trace.objective_history.push_back({it, objective});
    const double lr = detail::step_scale(cfg, it);
    for (std::size_t p = 0; p < p_count; ++p)
      for (std::size_t j = 0; j < models[p].size(); ++j) models[p][j] -= lr * grads[p][j];
  }

  for (std::size_t p = 0; p < p_count; ++p)
    trace.final_measures.emplace_back(std::move(models[p]), model_atoms, d);
  return trace;
}

// Evaluation score for the multi-task fit: sum over tasks of the (root)
// sliced 2-Wasserstein distance between each learned measure and its
// reference. Deterministic given the projections.
inline double multitask_score(std::span<const DiscreteMeasure> learned,
                              std::span<const DiscreteMeasure> reference,
                              const ProjectionSet& projections) {
  if (learned.size() != reference.size())
    throw ShapeError("learned and reference lists differ in length");
  if (learned.empty()) throw ShapeError("empty task list");
  double score = 0.0;
  for (std::size_t p = 0; p < learned.size(); ++p)
    score += std::sqrt(sw_squared(learned[p], reference[p], projections).estimate);
  return score;
}

inline double multitask_score(std::span<const DiscreteMeasure> learned,
                              const MeasureSet& reference, const ProjectionSet& projections) {
  return multitask_score(learned, reference.measures(), projections);
}

// Synthetic multi-task data: each task is a pair of concentric ellipses with
// per-task random rotation and axis lengths. The corrupted copy removes a
// contiguous angular arc covering removal_fraction of the points and
// resamples that count from the remaining arc, keeping N constant. Returns
// (corrupted, clean).
inline std::pair<MeasureSet, MeasureSet> generate_corrupted_ellipses(
    std::size_t p_count, std::size_t n_atoms, double removal_fraction, std::uint64_t seed) {
  if (p_count < 2) throw ShapeError("a measure set requires P >= 2 members");
  if (n_atoms == 0) throw ShapeError("n_atoms must be >= 1");
  if (!(removal_fraction >= 0.0) || !(removal_fraction < 1.0))
    throw std::invalid_argument("removal_fraction must lie in [0, 1)");
  constexpr double two_pi = 2.0 * 3.14159265358979323846;

  std::vector<DiscreteMeasure> corrupted, clean;
  corrupted.reserve(p_count);
  clean.reserve(p_count);
  for (std::size_t p = 0; p < p_count; ++p) {
    Rng g(substream(seed, 0xE111, p));
    // Nested family: overall size grows with the task index, so tasks share
    // the two-ring structure but stay mutually distinct.
    const double size =
        0.35 + 2.3 * (p_count > 1 ? static_cast<double>(p) / (p_count - 1.0) : 0.5);
    const double rot = g.uniform(0.0, two_pi);
    const double ax = size * g.uniform(0.85, 1.15);
    const double ay = size * g.uniform(0.12, 0.3);
    const double cr = std::cos(rot), sr = std::sin(rot);

    auto place = [&](double angle, std::size_t ring, double* out) {
      const double r = ring == 0 ? 1.0 : 0.5;
      const double u = r * ax * std::cos(angle);
      const double v = r * ay * std::sin(angle);
      out[0] = u * cr - v * sr;
      out[1] = u * sr + v * cr;
    };

    std::vector<double> angles(n_atoms);
    std::vector<double> atoms(n_atoms * 2);
    for (std::size_t i = 0; i < n_atoms; ++i) {
      angles[i] = g.uniform(0.0, two_pi);
      place(angles[i], i % 2, atoms.data() + i * 2);
    }
    clean.emplace_back(atoms, n_atoms, 2);

    const std::size_t removed =
        static_cast<std::size_t>(std::ceil(removal_fraction * static_cast<double>(n_atoms)));
    if (removed > 0) {
      std::vector<std::size_t> by_angle(n_atoms);
      std::iota(by_angle.begin(), by_angle.end(), std::size_t{0});
      std::sort(by_angle.begin(), by_angle.end(),
                [&](std::size_t a, std::size_t b) { return angles[a] < angles[b]; });
      const std::size_t start = g.below(n_atoms);
      const double arc_lo = angles[by_angle[start]];
      const double arc_hi = angles[by_angle[(start + removed - 1) % n_atoms]];
      const double arc_len = std::fmod(arc_hi - arc_lo + two_pi, two_pi);
      const double keep_len = two_pi - arc_len;
      for (std::size_t r = 0; r < removed; ++r) {
        const std::size_t idx = by_angle[(start + r) % n_atoms];
        const double fresh = std::fmod(arc_hi + g.uniform01() * keep_len, two_pi);
        place(fresh, idx % 2, atoms.data() + idx * 2);
      }
    }
    corrupted.emplace_back(std::move(atoms), n_atoms, 2);
  }
  return {MeasureSet(std::move(corrupted)), MeasureSet(std::move(clean))};
}

}  // namespace smw
