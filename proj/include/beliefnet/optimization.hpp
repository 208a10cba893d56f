#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

#include "beliefnet/beliefs.hpp"
#include "beliefnet/free_energy.hpp"
#include "beliefnet/model.hpp"
#include "beliefnet/numeric.hpp"
#include "beliefnet/propagation.hpp"

namespace beliefnet {

enum class bo_init { uniform, random_dirichlet };

struct bo_params {
  std::size_t max_iters = 5000;
  double tolerance = 1e-10;        // objective decrease per sweep/step
  double inner_tolerance = 1e-12;  // marginal-fit tolerance for edge beliefs
  double step = 0.5;               // initial multiplicative-update step size
  bo_init init = bo_init::uniform;
  std::uint64_t seed = 0;
  std::size_t restarts = 3;

  void check() const {
    if (max_iters == 0) throw std::invalid_argument("bo_params: max_iters must be positive");
    if (!(tolerance > 0.0)) throw std::invalid_argument("bo_params: tolerance must be positive");
    if (!(inner_tolerance > 0.0)) throw std::invalid_argument("bo_params: inner tolerance must be positive");
    if (!(step > 0.0)) throw std::invalid_argument("bo_params: step size must be positive");
  }
};

struct bo_result {
  belief_state beliefs;
  vec objective_trace;
  double objective = std::numeric_limits<double>::infinity();
  bool converged = false;
  double stationarity_residual = std::numeric_limits<double>::infinity();
};

namespace detail {

// 53-bit uniform in (0,1), independent of library distribution internals so that
// seeded runs reproduce exactly everywhere.
inline double canonical_uniform(std::mt19937_64& eng) {
  return (static_cast<double>(eng() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
}

inline vec dirichlet_uniform(std::mt19937_64& eng, std::size_t n) {
  vec g(n);
  for (double& x : g) x = -std::log(canonical_uniform(eng));
  normalize(g);
  return g;
}

inline std::vector<vec> initial_node_beliefs(const pairwise_mrf& m, bo_init mode, std::uint64_t seed) {
  std::vector<vec> beta(m.node_count());
  if (mode == bo_init::uniform) {
    for (std::size_t k = 0; k < m.node_count(); ++k)
      beta[k].assign(m.cardinality(k), 1.0 / static_cast<double>(m.cardinality(k)));
  } else {
    std::mt19937_64 eng(seed);
    for (std::size_t k = 0; k < m.node_count(); ++k) beta[k] = dirichlet_uniform(eng, m.cardinality(k));
  }
  return beta;
}

}  // namespace detail

/// Positive coupling table rescaled to prescribed row and column sums by
/// alternating scaling.  plan = diag(row_scale) * kernel * diag(col_scale);
/// row sums match exactly, column sums match within tol.
struct transport_plan {
  matrix plan;
  vec row_scale;
  vec col_scale;
  std::size_t iterations = 0;
};

inline transport_plan fit_transport(const matrix& kernel, const vec& row_marginal, const vec& col_marginal,
                                    double tol = 1e-12, std::size_t max_iters = 50000,
                                    const transport_plan* warm = nullptr) {
  if (kernel.rows != row_marginal.size() || kernel.cols != col_marginal.size())
    throw std::invalid_argument("fit_transport: shape mismatch");
  for (double v : kernel.data)
    if (!(v > 0.0)) throw std::invalid_argument("fit_transport: kernel must be strictly positive");
  transport_plan fit;
  fit.row_scale.assign(kernel.rows, 1.0);
  fit.col_scale.assign(kernel.cols, 1.0);
  if (warm && warm->row_scale.size() == kernel.rows && warm->col_scale.size() == kernel.cols)
    fit.row_scale = warm->row_scale;
  for (std::size_t it = 1; it <= max_iters; ++it) {
    double worst = 0.0;
    for (std::size_t t = 0; t < kernel.cols; ++t) {
      double s = 0.0;
      for (std::size_t r = 0; r < kernel.rows; ++r) s += kernel(r, t) * fit.row_scale[r];
      fit.col_scale[t] = col_marginal[t] / s;
    }
    for (std::size_t r = 0; r < kernel.rows; ++r) {
      double s = 0.0;
      for (std::size_t t = 0; t < kernel.cols; ++t) s += kernel(r, t) * fit.col_scale[t];
      fit.row_scale[r] = row_marginal[r] / s;
    }
    fit.iterations = it;
    for (std::size_t t = 0; t < kernel.cols; ++t) {
      double s = 0.0;
      for (std::size_t r = 0; r < kernel.rows; ++r) s += kernel(r, t) * fit.row_scale[r];
      worst = std::max(worst, std::abs(s * fit.col_scale[t] - col_marginal[t]));
    }
    if (worst <= tol) break;
  }
  fit.plan = matrix(kernel.rows, kernel.cols);
  for (std::size_t r = 0; r < kernel.rows; ++r)
    for (std::size_t t = 0; t < kernel.cols; ++t) fit.plan(r, t) = fit.row_scale[r] * kernel(r, t) * fit.col_scale[t];
  return fit;
}

/// Coordinate descent on the fully factored free energy.  Each node update is the
/// exact minimizer of the objective in that coordinate, so every sweep decreases
/// the objective.  The best of `restarts` runs (uniform or Dirichlet starts) wins;
/// ties go to the earlier restart.
inline bo_result minimize_mean_field(const pairwise_mrf& m, const bo_params& params = {}) {
  params.check();

  auto update_node = [&m](const std::vector<vec>& beta, std::size_t k) {
    vec logits(m.cardinality(k));
    for (std::size_t s = 0; s < logits.size(); ++s) logits[s] = std::log(m.node_potential(k)[s]);
    for (const neighbor& nb : m.neighbors(k)) {
      const edge& ed = m.edge_at(nb.edge);
      const vec& other = beta[nb.node];
      if (ed.i == k) {
        for (std::size_t s = 0; s < logits.size(); ++s)
          for (std::size_t t = 0; t < other.size(); ++t) logits[s] += std::log(ed.potential(s, t)) * other[t];
      } else {
        for (std::size_t t = 0; t < logits.size(); ++t)
          for (std::size_t s = 0; s < other.size(); ++s) logits[t] += std::log(ed.potential(s, t)) * other[s];
      }
    }
    return softmax(logits);
  };

  bo_result best;
  std::size_t runs = std::max<std::size_t>(params.restarts, 1);
  for (std::size_t r = 0; r < runs; ++r) {
    bo_init mode = (r == 0) ? params.init : bo_init::random_dirichlet;
    std::vector<vec> beta = detail::initial_node_beliefs(m, mode, params.seed + r);
    bo_result run;
    run.objective_trace.push_back(mean_field_free_energy(m, beta));
    for (std::size_t it = 0; it < params.max_iters; ++it) {
      for (std::size_t k = 0; k < m.node_count(); ++k) beta[k] = update_node(beta, k);
      double value = mean_field_free_energy(m, beta);
      double decrease = run.objective_trace.back() - value;
      run.objective_trace.push_back(value);
      if (decrease < params.tolerance) {
        run.converged = true;
        break;
      }
    }
    run.objective = run.objective_trace.back();
    double residual = 0.0;
    for (std::size_t k = 0; k < m.node_count(); ++k) residual = std::max(residual, linf_diff(beta[k], update_node(beta, k)));
    run.stationarity_residual = residual;
    run.beliefs.node_beliefs = std::move(beta);
    if (run.objective < best.objective) best = std::move(run);
  }
  return best;
}

namespace detail {

struct bethe_iterate {
  std::vector<vec> beta;
  std::vector<transport_plan> plans;
  double objective = 0.0;
};

inline double bethe_objective_tracked(const pairwise_mrf& m, const std::vector<vec>& beta,
                                      const std::vector<transport_plan>& plans) {
  double value = 0.0;
  for (std::size_t k = 0; k < m.node_count(); ++k) {
    double q = static_cast<double>(m.degree(k));
    for (std::size_t s = 0; s < m.cardinality(k); ++s)
      value += -beta[k][s] * std::log(m.node_potential(k)[s]) + (1.0 - q) * xlogx(beta[k][s]);
  }
  for (std::size_t e = 0; e < m.edge_count(); ++e) {
    const matrix& kernel = m.edge_at(e).potential;
    const matrix& plan = plans[e].plan;
    for (std::size_t t = 0; t < plan.data.size(); ++t)
      value += plan.data[t] * (std::log(plan.data[t]) - std::log(kernel.data[t]));
  }
  return value;
}

inline std::vector<transport_plan> fit_all_edges(const pairwise_mrf& m, const std::vector<vec>& beta,
                                                 double tol, const std::vector<transport_plan>* warm) {
  std::vector<transport_plan> plans(m.edge_count());
  for (std::size_t e = 0; e < m.edge_count(); ++e) {
    const edge& ed = m.edge_at(e);
    plans[e] = fit_transport(ed.potential, beta[ed.i], beta[ed.j], tol, 50000, warm ? &(*warm)[e] : nullptr);
  }
  return plans;
}

// Gradient of the Bethe objective in the node beliefs once every edge belief sits
// at its own entropic fit: the edge contribution enters through the log scaling
// vectors of the fitted plans (constant shifts are immaterial on the simplex).
inline std::vector<vec> bethe_node_gradient(const pairwise_mrf& m, const std::vector<vec>& beta,
                                            const std::vector<transport_plan>& plans) {
  std::vector<vec> grad(m.node_count());
  for (std::size_t k = 0; k < m.node_count(); ++k) {
    double q = static_cast<double>(m.degree(k));
    vec g(m.cardinality(k));
    for (std::size_t s = 0; s < g.size(); ++s)
      g[s] = -std::log(m.node_potential(k)[s]) + (1.0 - q) * (std::log(beta[k][s]) + 1.0);
    for (const neighbor& nb : m.neighbors(k)) {
      const transport_plan& fit = plans[nb.edge];
      const vec& scale = (m.edge_at(nb.edge).i == k) ? fit.row_scale : fit.col_scale;
      for (std::size_t s = 0; s < g.size(); ++s) g[s] += std::log(scale[s]);
    }
    grad[k] = std::move(g);
  }
  return grad;
}

inline double gradient_spread(const std::vector<vec>& grad) {
  double worst = 0.0;
  for (const vec& g : grad) {
    double lo = g[0], hi = g[0];
    for (double v : g) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    worst = std::max(worst, hi - lo);
  }
  return worst;
}

}  // namespace detail

/// Direct minimization of the Bethe objective.  Node beliefs follow multiplicative
/// (exponentiated-gradient) steps with a backtracking step size; after each step the
/// edge beliefs are refit to the node marginals by alternating scaling, which is the
/// exact inner minimizer for fixed node beliefs.  Descent is therefore monotone in
/// the accepted steps.
inline bo_result minimize_bethe_direct(const pairwise_mrf& m, const bo_params& params = {}) {
  params.check();

  bo_result best;
  std::size_t runs = std::max<std::size_t>(params.restarts, 1);
  for (std::size_t r = 0; r < runs; ++r) {
    bo_init mode = (r == 0) ? params.init : bo_init::random_dirichlet;
    detail::bethe_iterate cur;
    cur.beta = detail::initial_node_beliefs(m, mode, params.seed + r);
    cur.plans = detail::fit_all_edges(m, cur.beta, params.inner_tolerance, nullptr);
    cur.objective = detail::bethe_objective_tracked(m, cur.beta, cur.plans);

    bo_result run;
    run.objective_trace.push_back(cur.objective);
    double eta = params.step;
    for (std::size_t it = 0; it < params.max_iters; ++it) {
      std::vector<vec> grad = detail::bethe_node_gradient(m, cur.beta, cur.plans);
      bool accepted = false;
      for (int half = 0; half < 60 && !accepted; ++half) {
        detail::bethe_iterate trial;
        trial.beta.resize(m.node_count());
        for (std::size_t k = 0; k < m.node_count(); ++k) {
          vec logits(cur.beta[k].size());
          double center = sum(grad[k]) / static_cast<double>(grad[k].size());
          for (std::size_t s = 0; s < logits.size(); ++s)
            logits[s] = std::log(cur.beta[k][s]) - eta * (grad[k][s] - center);
          trial.beta[k] = softmax(logits);
        }
        trial.plans = detail::fit_all_edges(m, trial.beta, params.inner_tolerance, &cur.plans);
        trial.objective = detail::bethe_objective_tracked(m, trial.beta, trial.plans);
        if (trial.objective < cur.objective) {
          double decrease = cur.objective - trial.objective;
          cur = std::move(trial);
          run.objective_trace.push_back(cur.objective);
          eta = std::min(eta * 1.5, 16.0);
          accepted = true;
          if (decrease < params.tolerance) {
            run.converged = true;
          }
        } else {
          eta *= 0.5;
        }
      }
      if (!accepted) {
        run.converged = true;
        break;
      }
      if (run.converged) break;
    }

    run.objective = cur.objective;
    run.stationarity_residual = detail::gradient_spread(detail::bethe_node_gradient(m, cur.beta, cur.plans));
    run.beliefs.node_beliefs = cur.beta;
    run.beliefs.edge_beliefs.reserve(m.edge_count());
    for (auto& fit : cur.plans) run.beliefs.edge_beliefs.push_back(fit.plan);
    if (run.objective < best.objective) best = std::move(run);
  }
  return best;
}

/// Bethe stationary point via sum-product message passing.  Edge beliefs are the
/// standard fixed-point pair beliefs assembled from the converged messages.
inline bo_result minimize_bethe_via_bp(const pairwise_mrf& m, const bo_params& params = {}) {
  params.check();
  bp_schedule schedule;
  bp_result bp = run_bp(m, bp_mode::sum_product, schedule, params.max_iters, 1e-10);

  bo_result out;
  out.converged = bp.converged;
  out.beliefs.node_beliefs = bp.beliefs.node_beliefs;
  std::vector<vec> log_pre(2 * m.edge_count());
  out.beliefs.edge_beliefs.reserve(m.edge_count());
  for (std::size_t e = 0; e < m.edge_count(); ++e) {
    const edge& ed = m.edge_at(e);
    auto prefactor = [&](std::size_t at, std::size_t excluding) {
      vec pre = m.node_potential(at);
      for (const neighbor& nb : m.neighbors(at)) {
        if (nb.node == excluding) continue;
        const vec& incoming = bp.messages.message(nb.node, at);
        for (std::size_t s = 0; s < pre.size(); ++s) pre[s] *= incoming[s];
      }
      return pre;
    };
    vec pre_i = prefactor(ed.i, ed.j);
    vec pre_j = prefactor(ed.j, ed.i);
    matrix belief(pre_i.size(), pre_j.size());
    for (std::size_t s = 0; s < pre_i.size(); ++s)
      for (std::size_t t = 0; t < pre_j.size(); ++t) belief(s, t) = ed.potential(s, t) * pre_i[s] * pre_j[t];
    normalize(belief.data);
    out.beliefs.edge_beliefs.push_back(std::move(belief));
    log_pre[2 * e].resize(pre_i.size());
    for (std::size_t s = 0; s < pre_i.size(); ++s) log_pre[2 * e][s] = std::log(pre_i[s]);
    log_pre[2 * e + 1].resize(pre_j.size());
    for (std::size_t t = 0; t < pre_j.size(); ++t) log_pre[2 * e + 1][t] = std::log(pre_j[t]);
  }
  out.objective = bethe_free_energy(m, out.beliefs);
  out.objective_trace.push_back(out.objective);

  // Same reduced gradient as the direct solver; the message prefactors play the
  // role of the plan scaling vectors.
  std::vector<vec> grad(m.node_count());
  for (std::size_t k = 0; k < m.node_count(); ++k) {
    double q = static_cast<double>(m.degree(k));
    vec g(m.cardinality(k));
    for (std::size_t s = 0; s < g.size(); ++s)
      g[s] = -std::log(m.node_potential(k)[s]) +
             (1.0 - q) * (std::log(out.beliefs.node_beliefs[k][s]) + 1.0);
    for (const neighbor& nb : m.neighbors(k)) {
      const vec& lp = (m.edge_at(nb.edge).i == k) ? log_pre[2 * nb.edge] : log_pre[2 * nb.edge + 1];
      for (std::size_t s = 0; s < g.size(); ++s) g[s] += lp[s];
    }
    grad[k] = std::move(g);
  }
  out.stationarity_residual = detail::gradient_spread(grad);
  return out;
}

}  // namespace beliefnet
