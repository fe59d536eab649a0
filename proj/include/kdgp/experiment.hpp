#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "kdgp/config.hpp"
#include "kdgp/field.hpp"
#include "kdgp/sensing.hpp"

namespace kdgp {

/// One results.csv row. Metrics that do not apply to an experiment kind are
/// NaN; every column is always present.
struct TrialResult {
  int trial = 0;
  std::string method;
  int R = 0;
  int E = 0;
  double rmse_field = std::numeric_limits<double>::quiet_NaN();
  double rmse_centralized = std::numeric_limits<double>::quiet_NaN();
  double consensus_iters_mean = std::numeric_limits<double>::quiet_NaN();
  std::size_t msg_bytes = 0;
  double wall_ms = 0.0;
};

/// RMSE between two fields on the same grid.
inline double rmse_field(const FieldGrid& estimate, const FieldGrid& truth) {
  if (estimate.nx != truth.nx || estimate.ny != truth.ny)
    throw std::invalid_argument("rmse_field: mismatched grids");
  return rmse(estimate.values, truth.values);
}

/// Element-wise matrix RMSE (Algorithm 1's convergence metric).
inline double rmse_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return rmse(a, b);
}

namespace detail {

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

/// "Iterations to consensus" rule: the iteration at which the matrix has
/// stayed within tol for `window` consecutive changes; capped if never.
class ConsensusRule {
 public:
  ConsensusRule(int window, double tol) : window_(window), tol_(tol) {}
  void observe(int iteration, double change) {
    streak_ = change < tol_ ? streak_ + 1 : 0;
    if (streak_ >= window_ && converged_at_ < 0) converged_at_ = iteration;
  }
  int result(int cap) const { return converged_at_ < 0 ? cap : converged_at_; }

 private:
  int window_;
  double tol_;
  int streak_ = 0;
  int converged_at_ = -1;
};

inline std::vector<Vec2> grid_nodes(const FieldGrid& g) {
  std::vector<Vec2> pts;
  pts.reserve(static_cast<std::size_t>(g.nx) * g.ny);
  for (int i = 0; i < g.nx; ++i)
    for (int j = 0; j < g.ny; ++j) pts.push_back(g.node(i, j));
  return pts;
}

/// Rows are phi(map(point))^T; estimate grids are then a single mat-vec.
inline Eigen::MatrixXd phi_matrix(const std::vector<Vec2>& points, const BasisSet& basis,
                                  const DomainMap& map) {
  Eigen::MatrixXd phi(points.size(), basis.E);
  for (std::size_t i = 0; i < points.size(); ++i)
    phi.row(static_cast<Eigen::Index>(i)) = phi_vector(map.to_centered(points[i]), basis).transpose();
  return phi;
}

inline FieldGrid grid_from_weights(const FieldGrid& like, const Eigen::MatrixXd& phi_grid,
                                   const Eigen::VectorXd& weights) {
  FieldGrid est = FieldGrid::zero(like.domain, like.nx, like.ny);
  const Eigen::VectorXd flat = phi_grid * weights;
  for (int i = 0; i < like.nx; ++i)
    for (int j = 0; j < like.ny; ++j) est.values(i, j) = flat[i * like.ny + j];
  est.time = like.time;
  return est;
}

inline std::uint64_t stream_seed(std::uint64_t base, std::uint64_t salt) { return base ^ salt; }

// salts for the independent RNG streams of one trial
inline constexpr std::uint64_t kSaltLinks = 0x9E3779B97F4A7C15ull;
inline constexpr std::uint64_t kSaltBench = 0xD1B54A32D192ED03ull;

}  // namespace detail

// ---------------------------------------------------------------------------
// consensus benchmark (random intrinsic-column matrices, two protocols)
// ---------------------------------------------------------------------------

inline std::vector<TrialResult> run_consensus_bench(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<TrialResult> results;
  const int T = cfg.bench_iters > 0 ? cfg.bench_iters : cfg.T_max;
  const int rows = cfg.E + 1;

  for (int trial = 0; trial < cfg.trials; ++trial) {
    const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(trial);
    std::mt19937_64 rng(seed);
    const NetworkGraph graph =
        random_geometric_deployment(cfg.R, cfg.domain, cfg.derived_d_comm(), rng);
    const auto lossy = make_lossy_mask(graph, cfg.link.lossy_fraction, rng);
    if (trial == 0 && cfg.export_topology)
      write_edge_list(graph, (std::filesystem::path(cfg.out_dir) / "topology_0.txt").string());

    // one intrinsic column per sensor, entries uniform in [-1, 1]
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<Eigen::MatrixXd> initial(static_cast<std::size_t>(cfg.R),
                                         Eigen::MatrixXd::Zero(rows, cfg.R));
    for (int r = 0; r < cfg.R; ++r)
      for (int i = 0; i < rows; ++i) initial[static_cast<std::size_t>(r)](i, r) = u(rng);
    Eigen::MatrixXd centralized = Eigen::MatrixXd::Zero(rows, cfg.R);
    for (const auto& h : initial) centralized += h;

    const double gamma =
        cfg.gamma > 0.0 ? cfg.gamma : 1.0 / (graph.max_degree() + 1.0);

    struct ProtocolOutcome {
      double rmse_to_central = 0.0;
      double iters_mean = 0.0;
      double wall_ms = 0.0;
    };

    // Both protocols replay the same delivery randomness: the link stream is
    // reseeded identically and consumes draws in the same pattern.
    const auto run_protocol = [&](bool dual) {
      ProtocolOutcome out;
      detail::Stopwatch watch;
      std::mt19937_64 link_rng(detail::stream_seed(seed, detail::kSaltLinks));
      std::vector<Eigen::MatrixXd> state = initial;
      if (!dual)
        for (auto& h : state) h *= static_cast<double>(cfg.R);  // average -> sum scale
      std::vector<detail::ConsensusRule> rule(
          static_cast<std::size_t>(cfg.R), detail::ConsensusRule(cfg.consensus_window, cfg.consensus_tol));
      for (int t = 1; t <= T; ++t) {
        const DeliveryPlan plan = effective_links(graph, cfg.link, rows, link_rng, lossy);
        const auto inboxes = exchange_matrices(state, plan);
        std::vector<Eigen::MatrixXd> next(state.size());
        for (int r = 0; r < cfg.R; ++r) {
          const auto& inbox = inboxes[static_cast<std::size_t>(r)];
          if (dual) {
            std::vector<Eigen::MatrixXd> stack;
            stack.reserve(inbox.size() + 1);
            stack.push_back(state[static_cast<std::size_t>(r)]);
            for (const auto& m : inbox) stack.push_back(m);
            const auto split = maxplus::extrema_split(stack);
            next[static_cast<std::size_t>(r)] = split.qplus + split.qminus;
          } else {
            next[static_cast<std::size_t>(r)] =
                inbox.empty() ? state[static_cast<std::size_t>(r)]
                              : avg_consensus_step(state[static_cast<std::size_t>(r)], inbox, gamma);
          }
          rule[static_cast<std::size_t>(r)].observe(
              t, rmse(state[static_cast<std::size_t>(r)], next[static_cast<std::size_t>(r)]));
        }
        state = std::move(next);
      }
      double rm = 0.0, it = 0.0;
      for (int r = 0; r < cfg.R; ++r) {
        rm += rmse(state[static_cast<std::size_t>(r)], centralized);
        it += rule[static_cast<std::size_t>(r)].result(T);
      }
      out.rmse_to_central = rm / cfg.R;
      out.iters_mean = it / cfg.R;
      out.wall_ms = watch.ms();
      return out;
    };

    const ProtocolOutcome dual = run_protocol(true);
    const ProtocolOutcome avg = run_protocol(false);
    const std::size_t bytes = message_byte_size(cfg.E, cfg.R);
    results.push_back({trial, "dual-extrema", cfg.R, cfg.E,
                       std::numeric_limits<double>::quiet_NaN(), dual.rmse_to_central,
                       dual.iters_mean, bytes, dual.wall_ms});
    results.push_back({trial, "average", cfg.R, cfg.E,
                       std::numeric_limits<double>::quiet_NaN(), avg.rmse_to_central,
                       avg.iters_mean, bytes, avg.wall_ms});
  }
  return results;
}

// ---------------------------------------------------------------------------
// stationary field estimation (K-DGP vs MADGP vs pooled classic GP)
// ---------------------------------------------------------------------------

inline std::vector<TrialResult> run_stationary(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<TrialResult> results;
  const DomainMap map = DomainMap::from_domain(cfg.domain, cfg.margin);
  const BasisSet basis = build_basis(cfg.E, map.half_width, cfg.hp, cfg.spectral_form);

  for (int trial = 0; trial < cfg.trials; ++trial) {
    const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(trial);
    std::mt19937_64 rng(seed);

    FieldGrid truth;
    if (cfg.field_sampler == "dense") {
      truth = sample_gp_field_dense(cfg.domain, cfg.grid_nx, cfg.grid_ny, cfg.hp, rng);
    } else {
      const BasisSet field_basis =
          build_basis(cfg.field_E, map.half_width, cfg.hp, cfg.spectral_form);
      truth = sample_gp_field_basis(cfg.domain, cfg.grid_nx, cfg.grid_ny, field_basis, map, rng);
    }
    const NetworkGraph graph =
        random_geometric_deployment(cfg.R, cfg.domain, cfg.derived_d_comm(), rng);
    const auto lossy = make_lossy_mask(graph, cfg.link.lossy_fraction, rng);
    if (trial == 0 && cfg.export_topology)
      write_edge_list(graph, (std::filesystem::path(cfg.out_dir) / "topology_0.txt").string());

    // both methods see the same measurements
    std::vector<std::vector<double>> readings(static_cast<std::size_t>(cfg.K_max));
    for (auto& step : readings) {
      step.reserve(static_cast<std::size_t>(cfg.R));
      for (int r = 0; r < cfg.R; ++r)
        step.push_back(measure(truth, graph.positions[static_cast<std::size_t>(r)], cfg.hp.sigma_n, rng));
    }

    const auto queries = detail::grid_nodes(truth);
    const Eigen::MatrixXd phi_grid = detail::phi_matrix(queries, basis, map);
    SensingParams params{cfg.T_max, cfg.theta_th, false, 0.0};

    // K-DGP
    detail::Stopwatch kdgp_watch;
    std::vector<PosteriorState> states(static_cast<std::size_t>(cfg.R), kgp_init(basis));
    std::mt19937_64 kdgp_links(detail::stream_seed(seed, detail::kSaltLinks));
    double kdgp_iters = 0.0;
    for (int k = 0; k < cfg.K_max; ++k) {
      auto res = run_sensing_step_with_measurements(states, graph.positions, graph, cfg.link,
                                                    lossy, params, cfg.hp, basis, map,
                                                    readings[static_cast<std::size_t>(k)], kdgp_links);
      states = std::move(res.states);
      for (int it : res.iterations) kdgp_iters += it;
    }
    kdgp_iters /= static_cast<double>(cfg.K_max) * cfg.R;
    std::vector<FieldGrid> kdgp_grids;
    kdgp_grids.reserve(static_cast<std::size_t>(cfg.R));
    double kdgp_rmse = 0.0;
    for (int r = 0; r < cfg.R; ++r) {
      kdgp_grids.push_back(
          detail::grid_from_weights(truth, phi_grid, states[static_cast<std::size_t>(r)].m));
      kdgp_rmse += rmse_field(kdgp_grids.back(), truth);
    }
    kdgp_rmse /= cfg.R;
    const double kdgp_ms = kdgp_watch.ms();

    // MADGP
    detail::Stopwatch madgp_watch;
    const double gamma = cfg.gamma > 0.0 ? cfg.gamma : 1.0 / (graph.max_degree() + 1.0);
    std::vector<MadgpState> mstates(static_cast<std::size_t>(cfg.R), MadgpState::init(cfg.E));
    std::mt19937_64 madgp_links(detail::stream_seed(seed, detail::kSaltLinks));
    double madgp_iters = 0.0;
    for (int k = 0; k < cfg.K_max; ++k) {
      auto res = run_madgp_step(mstates, graph.positions, readings[static_cast<std::size_t>(k)],
                                graph, cfg.link, lossy, params, gamma, basis, map, madgp_links);
      mstates = std::move(res.states);
      for (int it : res.iterations) madgp_iters += it;
    }
    madgp_iters /= static_cast<double>(cfg.K_max) * cfg.R;
    std::vector<FieldGrid> madgp_grids;
    madgp_grids.reserve(static_cast<std::size_t>(cfg.R));
    double madgp_rmse = 0.0;
    const double reg_scale = cfg.hp.sigma_n * cfg.hp.sigma_n / (double(cfg.R) * cfg.K_max);
    for (int r = 0; r < cfg.R; ++r) {
      Eigen::MatrixXd reg = mstates[static_cast<std::size_t>(r)].alpha;
      for (int e = 0; e < cfg.E; ++e)
        reg(e, e) += reg_scale / basis.spectral_densities[static_cast<std::size_t>(e)];
      symmetrize(reg);
      const Eigen::VectorXd w = solve_spd(reg, mstates[static_cast<std::size_t>(r)].beta);
      madgp_grids.push_back(detail::grid_from_weights(truth, phi_grid, w));
      madgp_rmse += rmse_field(madgp_grids.back(), truth);
    }
    madgp_rmse /= cfg.R;
    const double madgp_ms = madgp_watch.ms();

    // pooled classic-GP reference
    std::vector<SensorReading> pooled;
    pooled.reserve(static_cast<std::size_t>(cfg.R) * cfg.K_max);
    for (int k = 0; k < cfg.K_max; ++k)
      for (int r = 0; r < cfg.R; ++r)
        pooled.push_back({r + 1, k + 1, graph.positions[static_cast<std::size_t>(r)],
                          readings[static_cast<std::size_t>(k)][static_cast<std::size_t>(r)]});
    const Prediction classic = classic_gp_predict(pooled, queries, cfg.hp, false);
    FieldGrid classic_grid = FieldGrid::zero(cfg.domain, cfg.grid_nx, cfg.grid_ny);
    for (int i = 0; i < cfg.grid_nx; ++i)
      for (int j = 0; j < cfg.grid_ny; ++j)
        classic_grid.values(i, j) = classic.mean[static_cast<std::size_t>(i) * cfg.grid_ny + j];

    double kdgp_to_central = 0.0, madgp_to_central = 0.0;
    for (int r = 0; r < cfg.R; ++r) {
      kdgp_to_central += rmse_field(kdgp_grids[static_cast<std::size_t>(r)], classic_grid);
      madgp_to_central += rmse_field(madgp_grids[static_cast<std::size_t>(r)], classic_grid);
    }
    kdgp_to_central /= cfg.R;
    madgp_to_central /= cfg.R;

    if (trial == 0 && cfg.save_grids) {
      const std::filesystem::path dir(cfg.out_dir);
      write_grid_csv(truth, (dir / "truth_0.csv").string());
      write_grid_csv(kdgp_grids.front(), (dir / "kdgp_est_0.csv").string());
      write_grid_csv(madgp_grids.front(), (dir / "madgp_est_0.csv").string());
    }

    results.push_back({trial, "kdgp", cfg.R, cfg.E, kdgp_rmse, kdgp_to_central, kdgp_iters,
                       message_byte_size(cfg.E, cfg.R), kdgp_ms});
    results.push_back({trial, "madgp", cfg.R, cfg.E, madgp_rmse, madgp_to_central, madgp_iters,
                       madgp_message_byte_size(cfg.E), madgp_ms});
  }
  return results;
}

// ---------------------------------------------------------------------------
// dynamic field estimation (prediction ablation)
// ---------------------------------------------------------------------------

inline std::vector<TrialResult> run_dynamic(const ExperimentConfig& cfg) {
  cfg.validate();
  if (!cfg.flag_dynamic)
    throw std::invalid_argument("run_dynamic: flag_dynamic must be true");
  std::vector<TrialResult> results;
  const DomainMap map = DomainMap::from_domain(cfg.domain, cfg.margin);
  const BasisSet basis = build_basis(cfg.E, map.half_width, cfg.hp, cfg.spectral_form);

  // the truth trajectory is deterministic: solve the PDE once for all trials
  std::vector<FieldGrid> truth;
  truth.reserve(static_cast<std::size_t>(cfg.K_max));
  {
    FieldGrid pde = FieldGrid::zero(cfg.domain, cfg.grid_nx, cfg.grid_ny);
    for (int k = 0; k < cfg.K_max; ++k) {
      pde = advance_field(std::move(pde), cfg.pde_time_per_step, cfg.source_location);
      FieldGrid scaled = pde;
      scaled.values *= cfg.field_scale;
      truth.push_back(std::move(scaled));
    }
  }
  const auto queries = detail::grid_nodes(truth.front());
  const Eigen::MatrixXd phi_grid = detail::phi_matrix(queries, basis, map);

  for (int trial = 0; trial < cfg.trials; ++trial) {
    const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(trial);
    std::mt19937_64 rng(seed);
    const NetworkGraph graph =
        random_geometric_deployment(cfg.R, cfg.domain, cfg.derived_d_comm(), rng);
    const auto lossy = make_lossy_mask(graph, cfg.link.lossy_fraction, rng);
    if (trial == 0 && cfg.export_topology)
      write_edge_list(graph, (std::filesystem::path(cfg.out_dir) / "topology_0.txt").string());

    std::vector<std::vector<double>> readings(static_cast<std::size_t>(cfg.K_max));
    for (int k = 0; k < cfg.K_max; ++k) {
      readings[static_cast<std::size_t>(k)].reserve(static_cast<std::size_t>(cfg.R));
      for (int r = 0; r < cfg.R; ++r)
        readings[static_cast<std::size_t>(k)].push_back(
            measure(truth[static_cast<std::size_t>(k)],
                    graph.positions[static_cast<std::size_t>(r)], cfg.hp.sigma_n, rng));
    }

    Eigen::MatrixXd h_true(cfg.E, cfg.R);  // the truly assembled measurement matrix
    for (int r = 0; r < cfg.R; ++r)
      h_true.col(r) = phi_vector(map.to_centered(graph.positions[static_cast<std::size_t>(r)]), basis);

    const auto run_arm = [&](bool with_prediction) {
      detail::Stopwatch watch;
      SensingParams params{cfg.T_max, cfg.theta_th, with_prediction, cfg.delta_k};
      std::vector<PosteriorState> states(static_cast<std::size_t>(cfg.R), kgp_init(basis));
      PosteriorState central = kgp_init(basis);
      std::mt19937_64 links(detail::stream_seed(seed, detail::kSaltLinks));
      double iters = 0.0, rmse_truth = 0.0, rmse_central = 0.0;
      for (int k = 0; k < cfg.K_max; ++k) {
        auto res = run_sensing_step_with_measurements(states, graph.positions, graph, cfg.link,
                                                      lossy, params, cfg.hp, basis, map,
                                                      readings[static_cast<std::size_t>(k)], links);
        states = std::move(res.states);
        for (int it : res.iterations) iters += it;

        if (with_prediction) central = kdgp_predict(central, cfg.delta_k, cfg.hp);
        AssembledMeasurement meas;
        meas.H = h_true;
        meas.y = Eigen::Map<const Eigen::VectorXd>(readings[static_cast<std::size_t>(k)].data(), cfg.R);
        central = kdgp_update(central, meas, cfg.hp);
        const FieldGrid central_grid =
            detail::grid_from_weights(truth[static_cast<std::size_t>(k)], phi_grid, central.m);

        double step_truth = 0.0, step_central = 0.0;
        for (int r = 0; r < cfg.R; ++r) {
          const FieldGrid est = detail::grid_from_weights(
              truth[static_cast<std::size_t>(k)], phi_grid, states[static_cast<std::size_t>(r)].m);
          step_truth += rmse_field(est, truth[static_cast<std::size_t>(k)]);
          step_central += rmse_field(est, central_grid);
        }
        rmse_truth += step_truth / cfg.R;
        rmse_central += step_central / cfg.R;

        if (trial == 0 && cfg.save_grids && k + 1 == cfg.K_max) {
          const std::filesystem::path dir(cfg.out_dir);
          const std::string tag = with_prediction ? "pred" : "nopred";
          write_grid_csv(truth[static_cast<std::size_t>(k)], (dir / "truth_final.csv").string());
          const FieldGrid est = detail::grid_from_weights(
              truth[static_cast<std::size_t>(k)], phi_grid, states.front().m);
          write_grid_csv(est, (dir / ("kdgp_" + tag + "_final.csv")).string());
        }
      }
      TrialResult row;
      row.trial = trial;
      row.method = with_prediction ? "kdgp-pred" : "kdgp-nopred";
      row.R = cfg.R;
      row.E = cfg.E;
      row.rmse_field = rmse_truth / cfg.K_max;
      row.rmse_centralized = rmse_central / cfg.K_max;
      row.consensus_iters_mean = iters / (static_cast<double>(cfg.K_max) * cfg.R);
      row.msg_bytes = message_byte_size(cfg.E, cfg.R);
      row.wall_ms = watch.ms();
      return row;
    };

    results.push_back(run_arm(true));
    results.push_back(run_arm(false));
  }
  return results;
}

// ---------------------------------------------------------------------------
// kernel approximation study (Fig. 2-style cross-sections)
// ---------------------------------------------------------------------------

struct KernelStudyRow {
  std::string series;
  double x1 = 0.0, x2 = 0.0;  ///< displacement from the domain center
  double value = 0.0;
};

struct KernelStudyOutput {
  std::vector<KernelStudyRow> rows;
  std::map<int, double> mse_by_E;
};

inline KernelStudyOutput run_kernel_study(const ExperimentConfig& cfg) {
  cfg.validate();
  const DomainMap map = DomainMap::from_domain(cfg.domain, cfg.margin);
  const Vec2 center = map.to_centered(cfg.domain.center());  // (0, 0)
  const int n = cfg.kernel_grid_n;

  std::vector<Vec2> pts;
  pts.reserve(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double x = cfg.domain.xmin + cfg.domain.width() * i / (n - 1);
      const double y = cfg.domain.ymin + cfg.domain.height() * j / (n - 1);
      pts.push_back(map.to_centered({x, y}));
    }

  KernelStudyOutput out;
  std::vector<double> exact;
  exact.reserve(pts.size());
  for (const auto& p : pts) {
    exact.push_back(se_kernel(center, p, cfg.hp));
    out.rows.push_back({"exact", p.x(), p.y(), exact.back()});
  }
  for (int E : cfg.kernel_E_list) {
    double mse = 0.0;
    if (E <= 0) {
      for (std::size_t i = 0; i < pts.size(); ++i) {
        out.rows.push_back({"approx-E0", pts[i].x(), pts[i].y(), 0.0});
        mse += exact[i] * exact[i];
      }
    } else {
      const BasisSet basis = build_basis(E, map.half_width, cfg.hp, cfg.spectral_form);
      const Eigen::VectorXd phi0 = phi_vector(center, basis);
      Eigen::VectorXd weighted(basis.E);
      for (int e = 0; e < basis.E; ++e)
        weighted[e] = basis.spectral_densities[static_cast<std::size_t>(e)] * phi0[e];
      for (std::size_t i = 0; i < pts.size(); ++i) {
        const double v = phi_vector(pts[i], basis).dot(weighted);
        out.rows.push_back({"approx-E" + std::to_string(E), pts[i].x(), pts[i].y(), v});
        const double err = v - exact[i];
        mse += err * err;
      }
    }
    out.mse_by_E[E] = mse / static_cast<double>(pts.size());
  }
  return out;
}

// ---------------------------------------------------------------------------
// output writers and the dispatcher
// ---------------------------------------------------------------------------

namespace detail {

inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

inline void write_results_csv(const std::vector<TrialResult>& results, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("write_results_csv: cannot open " + path);
  out << "trial,method,R,E,rmse_field,rmse_centralized,consensus_iters_mean,msg_bytes,wall_ms\n";
  for (const auto& r : results) {
    out << r.trial << ',' << r.method << ',' << r.R << ',' << r.E << ','
        << detail::fmt_double(r.rmse_field) << ',' << detail::fmt_double(r.rmse_centralized)
        << ',' << detail::fmt_double(r.consensus_iters_mean) << ',' << r.msg_bytes << ','
        << detail::fmt_double(r.wall_ms) << '\n';
  }
}

inline void write_kernel_study_csv(const KernelStudyOutput& study, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("write_kernel_study_csv: cannot open " + path);
  out << "series,dx1,dx2,value\n";
  for (const auto& row : study.rows)
    out << row.series << ',' << detail::fmt_double(row.x1) << ',' << detail::fmt_double(row.x2)
        << ',' << detail::fmt_double(row.value) << '\n';
}

inline void write_summary_json(const ExperimentConfig& cfg,
                               const std::vector<TrialResult>& results,
                               const std::string& path,
                               const nlohmann::ordered_json& extra = {}) {
  std::map<std::string, std::vector<const TrialResult*>> by_method;
  for (const auto& r : results) by_method[r.method].push_back(&r);

  const auto stats = [](const std::vector<double>& xs) {
    nlohmann::ordered_json j;
    double mean = 0.0;
    int n = 0;
    for (double x : xs)
      if (std::isfinite(x)) {
        mean += x;
        ++n;
      }
    if (n == 0) {
      j["mean"] = nullptr;
      j["std"] = nullptr;
      return j;
    }
    mean /= n;
    double var = 0.0;
    for (double x : xs)
      if (std::isfinite(x)) var += (x - mean) * (x - mean);
    j["mean"] = mean;
    j["std"] = n > 1 ? std::sqrt(var / (n - 1)) : 0.0;
    return j;
  };

  nlohmann::ordered_json j;
  j["config"] = config_to_json(cfg);
  nlohmann::ordered_json methods;
  for (const auto& [name, rows] : by_method) {
    std::vector<double> f, c, it, w;
    for (const auto* r : rows) {
      f.push_back(r->rmse_field);
      c.push_back(r->rmse_centralized);
      it.push_back(r->consensus_iters_mean);
      w.push_back(r->wall_ms);
    }
    nlohmann::ordered_json m;
    m["trials"] = rows.size();
    m["rmse_field"] = stats(f);
    m["rmse_centralized"] = stats(c);
    m["consensus_iters"] = stats(it);
    m["msg_bytes"] = rows.front()->msg_bytes;
    m["wall_ms"] = stats(w);
    methods[name] = m;
  }
  j["methods"] = methods;
  if (!extra.empty()) j["extra"] = extra;

  std::ofstream out(path);
  if (!out) throw ConfigError("write_summary_json: cannot open " + path);
  out << j.dump(2) << '\n';
}

/// Runs the configured experiment and writes results.csv / summary.json
/// (plus kernel_study.csv for the kernel study) into cfg.out_dir.
inline std::vector<TrialResult> run_experiment(const ExperimentConfig& cfg) {
  std::filesystem::create_directories(cfg.out_dir);
  const std::filesystem::path dir(cfg.out_dir);
  std::vector<TrialResult> results;
  nlohmann::ordered_json extra;

  switch (cfg.kind) {
    case ExperimentKind::kConsensusBench:
      results = run_consensus_bench(cfg);
      break;
    case ExperimentKind::kStationary:
      results = run_stationary(cfg);
      break;
    case ExperimentKind::kDynamic:
      results = run_dynamic(cfg);
      break;
    case ExperimentKind::kKernelApprox: {
      const KernelStudyOutput study = run_kernel_study(cfg);
      write_kernel_study_csv(study, (dir / "kernel_study.csv").string());
      nlohmann::ordered_json mse;
      for (const auto& [E, v] : study.mse_by_E) {
        TrialResult row;
        row.trial = 0;
        row.method = "approx-E" + std::to_string(E);
        row.R = 0;
        row.E = E;
        row.rmse_field = std::sqrt(v);
        results.push_back(row);
        mse[std::to_string(E)] = v;
      }
      extra["kernel_mse"] = mse;
      break;
    }
  }

  write_results_csv(results, (dir / "results.csv").string());
  write_summary_json(cfg, results, (dir / "summary.json").string(), extra);
  {
    std::ofstream out((dir / "config.json").string());
    out << config_to_json(cfg).dump(2) << '\n';
  }
  return results;
}

}  // namespace kdgp
