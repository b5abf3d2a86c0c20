#ifndef SADL_DISTRIBUTED_HPP_
#define SADL_DISTRIBUTED_HPP_

// Consensus-distributed training. The columns of X are split into N shards;
// each worker runs linearized updates on its shard with quadratic pulls
// xi1/2 ||Omega - Omega_t||^2, xi2/2 ||Q - Q_t||^2, xi3/2 ||W - W_t||^2
// toward the global maps. After every outer iteration (a barrier) the
// coordinator averages the local maps, renormalizes the rows of Omega and
// anneals mu and the xi penalties once.

#include <algorithm>
#include <exception>
#include <numeric>
#include <optional>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "sadl/classify.hpp"
#include "sadl/error.hpp"
#include "sadl/model.hpp"
#include "sadl/random.hpp"
#include "sadl/solver.hpp"

namespace sadl {

using GlobalState = Model;

//! Columns of the full problem owned by one worker, with H and Y restricted
//! to those columns (same class blocks as the full H).
struct Shard {
  std::vector<Eigen::Index> columns;  // ascending indices into the full problem
  Matrix x;
  Matrix h;
  Matrix y;
};

inline std::vector<Shard> partition(const Matrix& x, const Matrix& h, const Matrix& y, int n_clusters,
                                    std::uint64_t seed) {
  const Eigen::Index n = x.cols();
  if (n_clusters < 1) throw Error(ErrorKind::kInvalidHyper, "need at least one cluster");
  if (n_clusters > n) {
    throw Error(ErrorKind::kTooManyClusters, std::to_string(n_clusters) + " clusters for " + std::to_string(n) + " samples");
  }
  if (h.cols() != n || y.cols() != n) throw Error(ErrorKind::kDimensionMismatch, "X, H, Y column counts differ");
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<Shard> shards(static_cast<std::size_t>(n_clusters));
  const Eigen::Index base = n / n_clusters, extra = n % n_clusters;
  Eigen::Index pos = 0;
  for (int t = 0; t < n_clusters; ++t) {
    const Eigen::Index size = base + (t < extra ? 1 : 0);
    Shard& sh = shards[static_cast<std::size_t>(t)];
    sh.columns.assign(order.begin() + pos, order.begin() + pos + size);
    std::sort(sh.columns.begin(), sh.columns.end());
    pos += size;
    sh.x.resize(x.rows(), size);
    sh.h.resize(h.rows(), size);
    sh.y.resize(y.rows(), size);
    for (Eigen::Index j = 0; j < size; ++j) {
      const Eigen::Index src = sh.columns[static_cast<std::size_t>(j)];
      sh.x.col(j) = x.col(src);
      sh.h.col(j) = h.col(src);
      sh.y.col(j) = y.col(src);
    }
  }
  return shards;
}

struct ConsensusPenalties {
  double xi1 = 0;
  double xi2 = 0;
  double xi3 = 0;
};

struct WorkerState {
  Shard shard;
  ModelState local;
  Hyperparams hyper;  // local rho, delta, lambda2 and the current mu
  ConsensusPenalties xi;
  TrainTrace trace;
};

//! Scales every row to unit l2 norm; a zero row cannot be normalized.
inline void normalize_rows(Matrix& a, const char* name) {
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const double n = a.row(i).norm();
    if (!(n > 0)) throw Error(ErrorKind::kZeroRow, std::string(name) + " row " + std::to_string(i) + " is zero");
    a.row(i) /= n;
  }
}

//! Local slice of the distributed Lagrangian for one worker.
inline double local_lagrangian(const WorkerState& wk, const GlobalState& g) {
  return lagrangian(wk.local, wk.shard.x, wk.shard.h, wk.shard.y, wk.hyper) +
         0.5 * wk.xi.xi1 * (g.omega - wk.local.omega).squaredNorm() +
         0.5 * wk.xi.xi2 * (g.q - wk.local.q).squaredNorm() + 0.5 * wk.xi.xi3 * (g.w - wk.local.w).squaredNorm();
}

//! One local pass: U, Q_t, W_t, Omega_t (closed form, then row-normalized),
//! eps and duals. The consensus pulls add xi2 (Q_t - Q) and xi3 (W_t - W)
//! to the Q and W gradients and their curvatures.
inline WorkerState local_epoch(WorkerState wk, const GlobalState& g) {
  const Hyperparams& hp = wk.hyper;
  ModelState& st = wk.local;
  const Matrix& x = wk.shard.x;
  const Matrix& h = wk.shard.h;
  const Matrix& y = wk.shard.y;
  const double mu = hp.resolved_mu();
  const ModelState prev = st;

  StepSizes steps = hp.fixed_steps.value_or(StepSizes{});
  const bool automatic = !hp.fixed_steps.has_value();

  if (automatic) steps.eta_u = eta_from_alpha(lipschitz_u(st, hp), hp);
  st.u = update_u(st, x, h, y, hp, steps);

  if (hp.constraints != Constraints::kLabelOnly) {
    if (automatic) steps.eta_q = eta_from_alpha(lipschitz_q(st, hp) + wk.xi.xi2, hp);
    st.q = st.q - (grad_q(st, h, y, hp) + wk.xi.xi2 * (st.q - g.q)) / (mu * steps.eta_q);
    detail::require_finite(st.q, "Q_t");
  }
  if (hp.constraints != Constraints::kStructureOnly) {
    if (automatic) steps.eta_w = eta_from_alpha(lipschitz_w(st, hp) + wk.xi.xi3, hp);
    st.w = st.w - (grad_w(st, y, hp) + wk.xi.xi3 * (st.w - g.w)) / (mu * steps.eta_w);
    detail::require_finite(st.w, "W_t");
  }

  const OmegaSolver solver(x, wk.xi.xi1 + hp.lambda2);
  st.omega = solver.solve(st.u * x.transpose() + wk.xi.xi1 * g.omega);
  normalize_rows(st.omega, "Omega_t");

  st.eps1 = update_eps1(st, h, hp);
  st.eps2 = update_eps2(st, y, hp);
  auto [z1, z2] = update_duals(st, h, y, hp);
  st.z1 = std::move(z1);
  st.z2 = std::move(z2);

  IterationRecord rec = make_record(static_cast<int>(wk.trace.records.size()) + 1, prev, st, x, h, y, hp);
  rec.lagrangian = local_lagrangian(wk, g);
  rec.steps = steps;
  wk.trace.records.push_back(rec);
  return wk;
}

//! Omega = mean of Omega_t with unit rows; Q and W are plain means. Sums run
//! in worker order so the result does not depend on thread scheduling.
inline GlobalState consensus_average(const std::vector<WorkerState>& workers) {
  if (workers.empty()) throw Error(ErrorKind::kInvalidHyper, "consensus needs at least one worker");
  GlobalState g{workers.front().local.omega, workers.front().local.q, workers.front().local.w};
  for (std::size_t t = 1; t < workers.size(); ++t) {
    g.omega += workers[t].local.omega;
    g.q += workers[t].local.q;
    g.w += workers[t].local.w;
  }
  const double inv = 1.0 / static_cast<double>(workers.size());
  g.omega *= inv;
  g.q *= inv;
  g.w *= inv;
  normalize_rows(g.omega, "Omega");
  return g;
}

inline double anneal(double value, double growth_rho, double cap) {
  return std::min(growth_rho * value, cap);
}

struct DistResult {
  GlobalState global;
  std::vector<TrainTrace> worker_traces;
  std::vector<std::vector<Eigen::Index>> shard_columns;
  int iterations = 0;
  bool converged = false;
};

namespace detail {

inline void run_workers(std::vector<WorkerState>& workers, const GlobalState& g, int threads) {
  const int n = static_cast<int>(workers.size());
  const int n_threads = std::clamp(threads <= 0 ? n : threads, 1, n);
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  auto run_range = [&](int tid) {
    for (int t = tid; t < n; t += n_threads) {
      try {
        workers[static_cast<std::size_t>(t)] = local_epoch(std::move(workers[static_cast<std::size_t>(t)]), g);
      } catch (...) {
        errors[static_cast<std::size_t>(t)] = std::current_exception();
      }
    }
  };
  if (n_threads == 1) {
    run_range(0);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int tid = 0; tid < n_threads; ++tid) pool.emplace_back(run_range, tid);
  }
  for (int t = 0; t < n; ++t) {
    if (!errors[static_cast<std::size_t>(t)]) continue;
    try {
      std::rethrow_exception(errors[static_cast<std::size_t>(t)]);
    } catch (const Error& e) {
      throw WorkerError(t, e);
    }
  }
}

}  // namespace detail

//! Builds the workers and the initial globals. Globals come from the same
//! seeded scheme as the centralized solver (Omega rows normalized) and every
//! worker starts from a copy.
inline std::pair<std::vector<WorkerState>, GlobalState> init_workers(const Matrix& x, const Matrix& h, const Matrix& y,
                                                                     const DistHyperparams& dp) {
  const ModelDims full{x.rows(), x.cols(), dp.base.resolved_atoms(x.rows()), h.rows(), y.rows()};
  ModelState init = ModelState::initialize(full, dp.base.seed);
  normalize_rows(init.omega, "Omega");
  GlobalState g{init.omega, init.q, init.w};

  std::vector<WorkerState> workers;
  for (auto& sh : partition(x, h, y, dp.n_clusters, dp.seed)) {
    WorkerState wk;
    const Eigen::Index nt = sh.x.cols();
    wk.local.omega = g.omega;
    wk.local.q = g.q;
    wk.local.w = g.w;
    wk.local.u = Matrix::Zero(full.r, nt);
    wk.local.eps1 = Matrix::Zero(full.s, nt);
    wk.local.eps2 = Matrix::Zero(full.c, nt);
    wk.local.z1 = Matrix::Zero(full.s, nt);
    wk.local.z2 = Matrix::Zero(full.c, nt);
    wk.shard = std::move(sh);
    wk.hyper = dp.base;
    wk.hyper.mu = dp.base.resolved_mu();
    wk.xi = {dp.xi1, dp.xi2, dp.xi3};
    workers.push_back(std::move(wk));
  }
  return {std::move(workers), std::move(g)};
}

inline DistResult train_dsadl(const DataMatrix& x, const StructureTarget& h, const LabelMatrix& y,
                              const DistHyperparams& dp) {
  dp.validate();
  validate_problem(x, h, y);
  auto [workers, global] = init_workers(x.values(), h.values(), y.values(), dp);

  DistResult res;
  for (int k = 1; k <= dp.base.max_iter; ++k) {
    detail::run_workers(workers, global, dp.threads);
    GlobalState next = consensus_average(workers);
    const double change = std::max({(next.omega - global.omega).norm(), (next.q - global.q).norm(),
                                    (next.w - global.w).norm()});
    global = std::move(next);
    for (auto& wk : workers) {
      wk.trace.records.back().consensus_gap = (wk.local.omega - global.omega).norm();
      wk.hyper.mu = anneal(wk.hyper.resolved_mu(), dp.growth_rho, dp.resolved_mu_max());
      wk.xi.xi1 = anneal(wk.xi.xi1, dp.growth_rho, dp.resolved_xi1_max());
      wk.xi.xi2 = anneal(wk.xi.xi2, dp.growth_rho, dp.resolved_xi2_max());
      wk.xi.xi3 = anneal(wk.xi.xi3, dp.growth_rho, dp.resolved_xi3_max());
    }
    res.iterations = k;
    if (change < dp.base.tol) {
      res.converged = true;
      break;
    }
  }
  res.global = std::move(global);
  for (auto& wk : workers) {
    res.worker_traces.push_back(std::move(wk.trace));
    res.shard_columns.push_back(wk.shard.columns);
  }
  return res;
}

}  // namespace sadl

#endif  // SADL_DISTRIBUTED_HPP_
