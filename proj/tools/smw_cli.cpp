// Command-line front end: distance evaluation, solvers, trajectory reward
// shaping, the certification suite, and scaling/variance benchmarks with
// plot-ready csv output.

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "smw/smw.hpp"

namespace {

using nlohmann::json;

// Command-line misuse distinct from data errors; exits with status 2.
struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

smw::MeasureFormat parse_format_flag(const std::string& flag, const std::string& path) {
  if (flag == "csv") return smw::MeasureFormat::csv;
  if (flag == "binary") return smw::MeasureFormat::binary;
  // auto: sniff the binary magic
  std::ifstream is(path, std::ios::binary);
  char magic[4] = {0, 0, 0, 0};
  is.read(magic, 4);
  return (is && std::memcmp(magic, "SMW1", 4) == 0) ? smw::MeasureFormat::binary
                                                    : smw::MeasureFormat::csv;
}

std::vector<smw::DiscreteMeasure> load_measures(const std::vector<std::string>& paths,
                                                const std::string& format) {
  std::vector<smw::DiscreteMeasure> ms;
  ms.reserve(paths.size());
  for (const auto& p : paths) ms.push_back(smw::load_measure(p, parse_format_flag(format, p)));
  smw::validate_set(ms);
  return ms;
}

smw::SimplexWeights parse_weights(const std::string& spec, std::size_t p_count) {
  if (spec == "uniform") return smw::SimplexWeights::uniform(p_count);
  std::vector<double> w;
  std::size_t start = 0;
  while (start <= spec.size()) {
    const std::size_t comma = spec.find(',', start);
    const std::string field =
        spec.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    try {
      w.push_back(std::stod(field));
    } catch (const std::exception&) {
      throw UsageError("cannot parse weight '" + field + "'");
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (w.size() != p_count)
    throw UsageError("got " + std::to_string(w.size()) + " weights for " +
                     std::to_string(p_count) + " measures");
  try {
    return smw::SimplexWeights(std::move(w));
  } catch (const smw::Error& e) {
    throw UsageError(e.what());
  }
}

std::vector<std::size_t> parse_grid(const std::string& spec) {
  std::vector<std::size_t> grid;
  std::size_t start = 0;
  while (start <= spec.size()) {
    const std::size_t comma = spec.find(',', start);
    const std::string field =
        spec.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    try {
      const long long v = std::stoll(field);
      if (v <= 0) throw std::invalid_argument("nonpositive");
      grid.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw UsageError("cannot parse grid value '" + field + "'");
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (grid.empty()) throw UsageError("empty grid");
  return grid;
}

struct DistOptions {
  std::vector<std::string> measures;
  std::size_t projections = 50;
  std::uint64_t seed = 0;
  std::string weights = "uniform";
  std::string format = "auto";
  bool pairwise = false;
  unsigned threads = 1;
};

int run_dist(const DistOptions& opt) {
  if (opt.measures.size() < 2) throw UsageError("dist needs at least two measure files");
  if (opt.pairwise && opt.measures.size() != 2)
    throw UsageError("--pairwise takes exactly two measure files");
  auto ms = load_measures(opt.measures, opt.format);
  const std::size_t d = ms[0].dim();
  const std::size_t n = ms[0].n_atoms();
  const auto ps = smw::sample_directions(d, opt.projections, opt.seed);

  smw::DistanceEstimate est;
  if (opt.pairwise) {
    est = smw::sw_squared(ms[0], ms[1], ps, opt.threads);
  } else {
    const auto beta = parse_weights(opt.weights, ms.size());
    est = smw::smw_squared(smw::MeasureSet(std::move(ms)), beta, ps, opt.threads);
  }

  json out;
  out["estimate"] = est.estimate;
  out["std_error"] = est.std_error;
  out["k"] = opt.projections;
  out["p"] = opt.measures.size();
  out["n"] = n;
  out["d"] = d;
  out["seed"] = opt.seed;
  std::cout << out.dump() << "\n";
  return 0;
}

struct BaryOptions {
  std::vector<std::string> measures;
  std::size_t n_atoms = 0;
  std::size_t iters = 2000;
  double lr = 3e-3;
  std::size_t k = 50;
  std::uint64_t seed = 0;
  std::size_t log_every = 10;
  std::string out_dir = ".";
  std::string objective = "smw";
  std::string format = "auto";
};

int run_bary(const BaryOptions& opt) {
  if (opt.measures.size() < 2) throw UsageError("bary needs at least two measure files");
  if (opt.objective != "smw" && opt.objective != "pairwise")
    throw UsageError("--objective must be smw or pairwise");
  auto ms = load_measures(opt.measures, opt.format);
  const smw::MeasureSet targets(std::move(ms));
  const std::size_t n_atoms = opt.n_atoms ? opt.n_atoms : targets.n_atoms();

  smw::SolverConfig cfg;
  cfg.iters = opt.iters;
  cfg.step_size = opt.lr;
  cfg.k_per_step = opt.k;
  cfg.seed = opt.seed;
  cfg.log_every = opt.log_every;

  const auto trace = opt.objective == "smw"
                         ? smw::barycenter_solve(targets, n_atoms, cfg)
                         : smw::pairwise_barycenter_solve(targets, n_atoms, cfg);

  std::filesystem::create_directories(opt.out_dir);
  const std::string measure_path = opt.out_dir + "/barycenter.csv";
  const std::string trace_path = opt.out_dir + "/trace.csv";
  smw::save_measure(trace.final_measures[0], measure_path, smw::MeasureFormat::csv);
  smw::save_trace(trace, trace_path);

  json out;
  out["objective"] = opt.objective;
  out["final_objective"] = trace.objective_history.back().objective;
  out["iters"] = opt.iters;
  out["n_atoms"] = n_atoms;
  out["barycenter"] = measure_path;
  out["trace"] = trace_path;
  out["seed"] = opt.seed;
  std::cout << out.dump() << "\n";
  return 0;
}

struct MtdeOptions {
  std::vector<std::string> measures;
  std::size_t model_atoms = 150;
  double gamma = 0.0;
  std::size_t iters = 1000;
  double lr = 3e-3;
  std::size_t k = 20;
  std::optional<std::size_t> batch;
  std::uint64_t seed = 0;
  std::size_t log_every = 10;
  std::string out_dir = ".";
  std::string format = "auto";
};

int run_mtde(const MtdeOptions& opt) {
  if (opt.measures.size() < 2) throw UsageError("mtde needs at least two measure files");
  auto ms = load_measures(opt.measures, opt.format);
  const smw::MeasureSet targets(std::move(ms));

  smw::SolverConfig cfg;
  cfg.iters = opt.iters;
  cfg.step_size = opt.lr;
  cfg.k_per_step = opt.k;
  cfg.batch = opt.batch;
  cfg.seed = opt.seed;
  cfg.log_every = opt.log_every;

  const auto trace = smw::mtde_fit(targets, opt.model_atoms, opt.gamma, cfg);

  std::filesystem::create_directories(opt.out_dir);
  json models = json::array();
  char name[64];
  for (std::size_t p = 0; p < trace.final_measures.size(); ++p) {
    std::snprintf(name, sizeof(name), "/model_%02zu.csv", p);
    const std::string path = opt.out_dir + name;
    smw::save_measure(trace.final_measures[p], path, smw::MeasureFormat::csv);
    models.push_back(path);
  }
  const std::string trace_path = opt.out_dir + "/trace.csv";
  smw::save_trace(trace, trace_path);

  json out;
  out["gamma"] = opt.gamma;
  out["final_objective"] = trace.objective_history.back().objective;
  out["models"] = models;
  out["trace"] = trace_path;
  out["seed"] = opt.seed;
  std::cout << out.dump() << "\n";
  return 0;
}

struct RewardOptions {
  std::vector<std::string> trajectories;
  std::string canonical;
  double gamma = 0.0;
  std::string scale = "exp";
  double exp_rate = 5.0;
  std::size_t k = 50;
  std::uint64_t seed = 0;
  std::string out = "rewards.csv";
  std::string format = "auto";
};

int run_reward(const RewardOptions& opt) {
  if (opt.trajectories.empty()) throw UsageError("reward needs trajectory files");
  if (opt.scale != "neg" && opt.scale != "exp")
    throw UsageError("--scale must be neg or exp");

  std::vector<smw::DiscreteMeasure> agents;
  for (const auto& p : opt.trajectories)
    agents.push_back(smw::load_measure(p, parse_format_flag(opt.format, p)));
  const smw::TrajectoryBatch batch(std::move(agents));

  const auto canonical_measure =
      smw::load_measure(opt.canonical, parse_format_flag(opt.format, opt.canonical));
  if (canonical_measure.n_atoms() != batch.p_count() ||
      canonical_measure.dim() != batch.horizon())
    throw smw::ShapeError("canonical rewards must be P rows x T columns");
  std::vector<std::vector<double>> canonical(batch.p_count(),
                                             std::vector<double>(batch.horizon()));
  for (std::size_t p = 0; p < batch.p_count(); ++p)
    for (std::size_t t = 0; t < batch.horizon(); ++t)
      canonical[p][t] = canonical_measure.data()[p * batch.horizon() + t];

  smw::RewardConfig cfg{smw::sample_directions(batch.dim(), opt.k, opt.seed), opt.gamma,
                        opt.scale == "neg" ? smw::RewardScale::neg : smw::RewardScale::exp,
                        opt.exp_rate};
  const auto shaped = smw::composite_reward(batch, canonical, cfg);
  smw::save_reward_csv(shaped, opt.out);

  double canonical_sum = 0.0, shaped_sum = 0.0;
  for (std::size_t p = 0; p < batch.p_count(); ++p)
    for (std::size_t t = 0; t < batch.horizon(); ++t) {
      canonical_sum += canonical[p][t];
      shaped_sum += shaped[p][t];
    }

  json out;
  out["p"] = batch.p_count();
  out["t"] = batch.horizon();
  out["gamma"] = opt.gamma;
  out["scale"] = opt.scale;
  out["canonical_sum"] = canonical_sum;
  out["shaped_sum"] = shaped_sum;
  out["rewards"] = opt.out;
  out["seed"] = opt.seed;
  std::cout << out.dump() << "\n";
  return 0;
}

struct VerifyOptions {
  std::size_t trials = 500;
  std::size_t max_n = 6;
  std::size_t max_p = 4;
  std::uint64_t seed = 1;
  std::string out;
};

int run_verify(const VerifyOptions& opt) {
  const auto report = smw::run_verification(opt.trials, opt.max_n, opt.max_p, opt.seed);
  if (!opt.out.empty()) {
    std::ofstream os(opt.out, std::ios::trunc);
    if (!os) throw smw::IoError("cannot open '" + opt.out + "' for writing");
    smw::write_report_records(report, os);
  } else {
    smw::write_report_records(report, std::cout);
  }
  smw::print_report_summary(report, std::cout);
  return report.all_pass() ? 0 : 1;
}

struct BenchOptions {
  std::string mode;
  std::string grid;
  std::size_t p = 10;
  std::size_t n = 100000;
  std::size_t d = 10;
  std::size_t k = 10;
  std::size_t repeats = 5;
  std::uint64_t seed = 0;
  unsigned threads = 0;  // 0 = all cores
  double mean_spread = 1.0;
  double sigma = 1.0;
};

int run_bench(const BenchOptions& opt) {
  const auto grid = parse_grid(opt.grid);

  if (opt.mode == "projections") {
    if (opt.repeats < 2) throw UsageError("variance profile needs --repeats >= 2");
    const auto set = smw::generate_gaussians(opt.p, opt.n, opt.d, opt.mean_spread, opt.sigma,
                                             smw::substream(opt.seed, 0xDA7A));
    const auto rows = smw::variance_profile(set, smw::SimplexWeights::uniform(opt.p), grid,
                                            opt.repeats, opt.seed);
    std::printf("k,mean,std\n");
    for (const auto& r : rows) std::printf("%zu,%.17g,%.17g\n", r.k_count, r.mean, r.std_dev);
    return 0;
  }

  if (opt.mode != "samples" && opt.mode != "measures")
    throw UsageError("--mode must be samples, measures, or projections");
  if (opt.repeats < 3) throw UsageError("timing records need --repeats >= 3");

  std::printf("axis,median_s,min_s,max_s\n");
  for (const std::size_t axis : grid) {
    const std::size_t p_count = opt.mode == "measures" ? axis : opt.p;
    const std::size_t n_atoms = opt.mode == "samples" ? axis : opt.n;
    const auto set = smw::generate_gaussians(p_count, n_atoms, opt.d, opt.mean_spread,
                                             opt.sigma, smw::substream(opt.seed, axis));
    const auto beta = smw::SimplexWeights::uniform(p_count);
    const auto ps = smw::sample_directions(opt.d, opt.k, smw::substream(opt.seed, 0xD1, axis));
    auto rec = smw::time_median(
        [&] { smw::smw_squared(set, beta, ps, opt.threads); }, opt.repeats,
        static_cast<double>(axis));
    char cfg[160];
    std::snprintf(cfg, sizeof(cfg),
                  "mode=%s p=%zu n=%zu d=%zu k=%zu repeats=%zu seed=%llu threads=%u",
                  opt.mode.c_str(), p_count, n_atoms, opt.d, opt.k, opt.repeats,
                  static_cast<unsigned long long>(opt.seed), opt.threads);
    rec.config = cfg;
    std::fprintf(stderr, "# %s\n", rec.config.c_str());
    std::printf("%g,%.6g,%.6g,%.6g\n", rec.axis, rec.median_s, rec.min_s, rec.max_s);
    std::fflush(stdout);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sliced multi-marginal optimal transport toolkit"};
  app.require_subcommand(1);

  DistOptions dist;
  auto* dist_cmd = app.add_subcommand("dist", "estimate the sliced multi-marginal distance");
  dist_cmd->add_option("--measures", dist.measures, "measure files")->required();
  dist_cmd->add_option("--projections,-k", dist.projections, "number of projections");
  dist_cmd->add_option("--seed", dist.seed, "direction seed");
  dist_cmd->add_option("--weights", dist.weights, "'uniform' or comma-separated weights");
  dist_cmd->add_flag("--pairwise", dist.pairwise, "two measures, pairwise sliced distance");
  dist_cmd->add_option("--format", dist.format, "auto|csv|binary");
  dist_cmd->add_option("--threads", dist.threads, "worker threads (default 1)");

  BaryOptions bary;
  auto* bary_cmd = app.add_subcommand("bary", "solve for a barycentric average");
  bary_cmd->add_option("--measures", bary.measures, "target measure files")->required();
  bary_cmd->add_option("--n-atoms", bary.n_atoms, "free measure support size (default: target N)");
  bary_cmd->add_option("--iters", bary.iters, "gradient steps");
  bary_cmd->add_option("--lr", bary.lr, "step size");
  bary_cmd->add_option("--k", bary.k, "projections per step");
  bary_cmd->add_option("--seed", bary.seed, "seed");
  bary_cmd->add_option("--log-every", bary.log_every, "objective logging stride");
  bary_cmd->add_option("--out-dir", bary.out_dir, "output directory");
  bary_cmd->add_option("--objective", bary.objective, "smw or pairwise");
  bary_cmd->add_option("--format", bary.format, "auto|csv|binary");

  MtdeOptions mtde;
  auto* mtde_cmd = app.add_subcommand("mtde", "multi-task density estimation");
  mtde_cmd->add_option("--measures", mtde.measures, "target measure files")->required();
  mtde_cmd->add_option("--model-atoms", mtde.model_atoms, "learned support size per task");
  mtde_cmd->add_option("--gamma", mtde.gamma, "regularization weight");
  mtde_cmd->add_option("--iters", mtde.iters, "gradient steps");
  mtde_cmd->add_option("--lr", mtde.lr, "step size");
  mtde_cmd->add_option("--k", mtde.k, "projections per step");
  std::size_t mtde_batch = 0;
  mtde_cmd->add_option("--batch", mtde_batch, "minibatch atom count");
  mtde_cmd->add_option("--seed", mtde.seed, "seed");
  mtde_cmd->add_option("--log-every", mtde.log_every, "objective logging stride");
  mtde_cmd->add_option("--out-dir", mtde.out_dir, "output directory");
  mtde_cmd->add_option("--format", mtde.format, "auto|csv|binary");

  RewardOptions reward;
  auto* reward_cmd = app.add_subcommand("reward", "multi-task trajectory reward shaping");
  reward_cmd->add_option("--trajectories", reward.trajectories, "one measure file per agent")
      ->required();
  reward_cmd->add_option("--canonical", reward.canonical, "P x T csv of environment rewards")
      ->required();
  reward_cmd->add_option("--gamma", reward.gamma, "shaping weight");
  reward_cmd->add_option("--scale", reward.scale, "neg or exp");
  reward_cmd->add_option("--exp-rate", reward.exp_rate, "rate of the exponential scale");
  reward_cmd->add_option("--k", reward.k, "number of projections");
  reward_cmd->add_option("--seed", reward.seed, "direction seed");
  reward_cmd->add_option("--out", reward.out, "output csv path");
  reward_cmd->add_option("--format", reward.format, "auto|csv|binary");

  VerifyOptions verify;
  auto* verify_cmd = app.add_subcommand("verify", "run the certification suite");
  verify_cmd->add_option("--trials", verify.trials, "trial count");
  verify_cmd->add_option("--max-n", verify.max_n, "largest atom count for the oracle");
  verify_cmd->add_option("--max-p", verify.max_p, "largest measure count for the oracle");
  verify_cmd->add_option("--seed", verify.seed, "seed");
  verify_cmd->add_option("--out", verify.out, "write records to this file");

  BenchOptions bench;
  auto* bench_cmd = app.add_subcommand("bench", "scaling and variance benchmarks");
  bench_cmd->add_option("--mode", bench.mode, "samples|measures|projections")->required();
  bench_cmd->add_option("--grid", bench.grid, "comma-separated axis values")->required();
  bench_cmd->add_option("--p", bench.p, "measure count");
  bench_cmd->add_option("--n", bench.n, "atoms per measure");
  bench_cmd->add_option("--d", bench.d, "dimension");
  bench_cmd->add_option("--k", bench.k, "projections");
  bench_cmd->add_option("--repeats", bench.repeats, "timing repeats (>= 3)");
  bench_cmd->add_option("--seed", bench.seed, "seed");
  bench_cmd->add_option("--threads", bench.threads, "worker threads (0 = all cores)");
  bench_cmd->add_option("--mean-spread", bench.mean_spread, "gaussian mean spread");
  bench_cmd->add_option("--sigma", bench.sigma, "gaussian sigma");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (mtde_cmd->count("--batch")) mtde.batch = mtde_batch;
    if (dist_cmd->parsed()) return run_dist(dist);
    if (bary_cmd->parsed()) return run_bary(bary);
    if (mtde_cmd->parsed()) return run_mtde(mtde);
    if (reward_cmd->parsed()) return run_reward(reward);
    if (verify_cmd->parsed()) return run_verify(verify);
    if (bench_cmd->parsed()) return run_bench(bench);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const smw::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
