#pragma once

#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "beliefnet/numeric.hpp"

namespace beliefnet {

struct singular_consistency : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct indefinite_compatibility : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct step_rule {
  enum class mode { constant, diminishing };
  mode kind = mode::diminishing;
  double alpha0 = 1.0;

  double at(std::size_t n) const {  // n counts from 1
    return kind == mode::constant ? alpha0 : alpha0 / std::sqrt(static_cast<double>(n));
  }
  void check() const {
    if (!(alpha0 > 0.0)) throw std::invalid_argument("step_rule: alpha0 must be positive");
  }
};

struct slave_solution {
  vec y;
  double payoff = 0.0;  // objective term of this agent at y, price excluded
};

/// One agent of an equality-coupled problem.  `solve(prices)` must return the
/// maximizer of payoff_k(y) - <prices, y> over the agent's feasible set.
struct consensus_agent {
  matrix map;  // consistency map C_k, y_dim x z_dim
  std::function<slave_solution(const vec& prices)> solve;
};

/// Agents coupled through C_k y_k = C_k z: the master works in the product of the
/// agents' price spaces and keeps prices inside null(C^T) by projection.  The
/// normal matrix sum_k C_k^T C_k is factored once at construction.
class consensus_problem {
 public:
  consensus_problem(std::vector<consensus_agent> agents, std::size_t z_dim)
      : agents_(std::move(agents)), z_dim_(z_dim) {
    if (agents_.empty()) throw std::invalid_argument("consensus_problem: no agents");
    matrix gram(z_dim_, z_dim_, 0.0);
    for (const auto& a : agents_) {
      if (a.map.cols != z_dim_) throw std::invalid_argument("consensus_problem: consistency map column mismatch");
      for (std::size_t r = 0; r < a.map.rows; ++r)
        for (std::size_t c1 = 0; c1 < z_dim_; ++c1)
          for (std::size_t c2 = 0; c2 < z_dim_; ++c2) gram(c1, c2) += a.map(r, c1) * a.map(r, c2);
    }
    gram_inv_ = invert(gram);
  }

  const std::vector<consensus_agent>& agents() const { return agents_; }
  std::size_t z_dim() const { return z_dim_; }

  /// Least-squares consensus point: z = (C^T C)^{-1} C^T y.
  vec consensus(const std::vector<vec>& ys) const {
    vec rhs(z_dim_, 0.0);
    for (std::size_t k = 0; k < agents_.size(); ++k) {
      vec part = mat_t_vec(agents_[k].map, ys[k]);
      for (std::size_t c = 0; c < z_dim_; ++c) rhs[c] += part[c];
    }
    return matvec(gram_inv_, rhs);
  }

  /// Blockwise projection of stacked prices onto null(C^T).
  std::vector<vec> project_null(std::vector<vec> u) const {
    vec z = consensus(u);
    for (std::size_t k = 0; k < agents_.size(); ++k) {
      vec pulled = matvec(agents_[k].map, z);
      for (std::size_t r = 0; r < u[k].size(); ++r) u[k][r] -= pulled[r];
    }
    return u;
  }

  /// Stacked C^T v, which projection keeps at zero.
  vec coupling_residual(const std::vector<vec>& prices) const {
    vec out(z_dim_, 0.0);
    for (std::size_t k = 0; k < agents_.size(); ++k) {
      vec part = mat_t_vec(agents_[k].map, prices[k]);
      for (std::size_t c = 0; c < z_dim_; ++c) out[c] += part[c];
    }
    return out;
  }

 private:
  std::vector<consensus_agent> agents_;
  std::size_t z_dim_ = 0;
  matrix gram_inv_;

  static matrix invert(matrix a) {
    std::size_t n = a.rows;
    matrix inv(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i) inv(i, i) = 1.0;
    double scale = 0.0;
    for (double v : a.data) scale = std::max(scale, std::abs(v));
    if (!(scale > 0.0)) throw singular_consistency("consistency maps have a singular normal matrix");
    for (std::size_t col = 0; col < n; ++col) {
      std::size_t pivot = col;
      for (std::size_t r = col + 1; r < n; ++r)
        if (std::abs(a(r, col)) > std::abs(a(pivot, col))) pivot = r;
      if (std::abs(a(pivot, col)) < 1e-12 * scale)
        throw singular_consistency("consistency maps have a singular normal matrix");
      if (pivot != col) {
        for (std::size_t c = 0; c < n; ++c) {
          std::swap(a(pivot, c), a(col, c));
          std::swap(inv(pivot, c), inv(col, c));
        }
      }
      double d = a(col, col);
      for (std::size_t c = 0; c < n; ++c) {
        a(col, c) /= d;
        inv(col, c) /= d;
      }
      for (std::size_t r = 0; r < n; ++r) {
        if (r == col) continue;
        double f = a(r, col);
        if (f == 0.0) continue;
        for (std::size_t c = 0; c < n; ++c) {
          a(r, c) -= f * a(col, c);
          inv(r, c) -= f * inv(col, c);
        }
      }
    }
    return inv;
  }
};

struct consensus_trace {
  vec dual_value;
  vec residual;
  vec step;
};

struct consensus_result {
  std::vector<vec> agent_solutions;
  vec consensus;               // least-squares z from the final slave solutions
  std::vector<vec> projected;  // C_k z per agent
  std::vector<vec> prices;
  consensus_trace trace;
  std::size_t iterations = 0;  // master updates performed
  bool converged = false;
  bool diverged = false;
};

/// One projected subgradient step on the master: v <- Proj_null(C^T)(v + alpha y).
inline std::vector<vec> master_update(const consensus_problem& p, std::vector<vec> prices,
                                      const std::vector<vec>& ys, double alpha) {
  for (std::size_t k = 0; k < prices.size(); ++k)
    for (std::size_t r = 0; r < prices[k].size(); ++r) prices[k][r] += alpha * ys[k][r];
  return p.project_null(std::move(prices));
}

inline consensus_result run_dual_decomposition(const consensus_problem& p, const step_rule& rule,
                                               std::size_t max_iters, double residual_tol,
                                               unsigned threads = 1) {
  rule.check();
  if (max_iters == 0) throw std::invalid_argument("run_dual_decomposition: max_iters must be positive");
  std::size_t n_agents = p.agents().size();
  consensus_result out;
  out.prices.resize(n_agents);
  for (std::size_t k = 0; k < n_agents; ++k) out.prices[k].assign(p.agents()[k].map.rows, 0.0);

  std::vector<vec> ys(n_agents);
  vec payoffs(n_agents, 0.0);
  for (std::size_t n = 1; n <= max_iters; ++n) {
    for_each_chunk(n_agents, threads, [&](std::size_t, std::size_t begin, std::size_t end) {
      for (std::size_t k = begin; k < end; ++k) {
        try {
          slave_solution s = p.agents()[k].solve(out.prices[k]);
          if (s.y.size() != p.agents()[k].map.rows)
            throw std::runtime_error("slave returned a solution of the wrong dimension");
          ys[k] = std::move(s.y);
          payoffs[k] = s.payoff;
        } catch (const std::exception& e) {
          std::ostringstream msg;
          msg << "agent " << k << ": " << e.what();
          throw std::runtime_error(msg.str());
        }
      }
    });

    double dual = 0.0;
    for (std::size_t k = 0; k < n_agents; ++k) dual += payoffs[k] - dot(out.prices[k], ys[k]);
    vec z = p.consensus(ys);
    double residual = 0.0;
    for (std::size_t k = 0; k < n_agents; ++k) residual = std::max(residual, linf_diff(ys[k], matvec(p.agents()[k].map, z)));
    double alpha = rule.at(n);
    out.trace.dual_value.push_back(dual);
    out.trace.residual.push_back(residual);
    out.trace.step.push_back(alpha);

    std::size_t t = out.trace.residual.size();
    if (t > 50 && out.trace.residual[t - 1] > 10.0 * out.trace.residual[t - 51]) out.diverged = true;

    out.agent_solutions = ys;
    out.consensus = z;
    if (residual <= residual_tol) {
      out.converged = true;
      break;
    }
    if (n == max_iters) break;
    out.prices = master_update(p, std::move(out.prices), ys, alpha);
    out.iterations = n;
  }
  out.projected.resize(n_agents);
  for (std::size_t k = 0; k < n_agents; ++k) out.projected[k] = matvec(p.agents()[k].map, out.consensus);
  return out;
}

/// Closed-form slave for payoff(beta) = <c, beta> - w * sum beta ln beta on the simplex.
struct entropic_slave {
  vec c;
  double entropy_weight = 1.0;

  slave_solution operator()(const vec& prices) const {
    if (prices.size() != c.size()) throw std::invalid_argument("entropic_slave: price dimension mismatch");
    vec logits(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) logits[i] = (c[i] - prices[i]) / entropy_weight;
    double lse = logsumexp(logits);
    slave_solution s;
    s.y = softmax(logits);
    s.payoff = entropy_weight * lse + dot(prices, s.y);
    return s;
  }
};

/// Multiplicative-update minimizer of <a, beta> + beta^T Q beta + w sum beta ln beta
/// over the simplex, run to a stationarity tolerance.  Q enters through its
/// symmetric part.
inline vec minimize_entropic_quadratic(const vec& a, const matrix& q, double w, double tol = 1e-10,
                                       std::size_t max_iters = 50000) {
  std::size_t n = a.size();
  if (q.rows != 0 && (q.rows != n || q.cols != n))
    throw std::invalid_argument("minimize_entropic_quadratic: quadratic term shape mismatch");
  if (!(w > 0.0)) throw std::invalid_argument("minimize_entropic_quadratic: entropy weight must be positive");
  vec beta(n, 1.0 / static_cast<double>(n));

  auto value = [&](const vec& b) {
    double f = dot(a, b);
    if (q.rows != 0) {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) f += b[i] * q(i, j) * b[j];
    }
    for (double x : b) f += w * xlogx(x);
    return f;
  };
  auto gradient = [&](const vec& b) {
    vec g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = a[i] + w * (std::log(b[i]) + 1.0);
    if (q.rows != 0) {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) g[i] += (q(i, j) + q(j, i)) * b[j];
    }
    return g;
  };

  double f = value(beta);
  double eta = 1.0;
  for (std::size_t it = 0; it < max_iters; ++it) {
    vec g = gradient(beta);
    double lo = g[0], hi = g[0];
    for (double v : g) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (hi - lo <= tol) break;
    bool accepted = false;
    for (int half = 0; half < 60 && !accepted; ++half) {
      vec logits(n);
      double center = sum(g) / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) logits[i] = std::log(beta[i]) - eta * (g[i] - center);
      vec trial = softmax(logits);
      double ft = value(trial);
      if (ft < f) {
        beta = std::move(trial);
        f = ft;
        eta = std::min(eta * 1.5, 16.0);
        accepted = true;
      } else {
        eta *= 0.5;
      }
    }
    if (!accepted) break;
  }
  return beta;
}

struct consensus_options {
  step_rule rule;
  std::size_t max_iters = 20000;
  double residual_tol = 1e-9;
  double psd_tolerance = 1e-10;
  bool assert_simplex_psd = false;
  double inner_tol = 1e-10;
  unsigned threads = 1;
};

struct marginal_consensus_result {
  std::vector<vec> agent_beliefs;
  vec consensus_belief;
  std::vector<vec> prices;
  consensus_trace trace;
  std::size_t iterations = 0;
  bool converged = false;
  bool diverged = false;
  bool psd_asserted = false;
};

/// Per-agent free-energy term for marginal consensus:
///   f_i(beta) = -<ln psi_i, beta> + beta^T M_i beta + sum beta ln beta.
/// The coupling matrix M_i falls into one of three cases: (1) positive
/// semidefinite, accepted; (2) indefinite but known nonnegative on differences of
/// simplex points, accepted only when the caller asserts it; (3) anything else is
/// rejected, since handling it needs a semidefinite relaxation this library does
/// not provide.
struct mfe_agent {
  vec log_potential;
  matrix coupling;  // empty matrix means no pairwise term
};

namespace detail {

inline matrix identity_matrix(std::size_t n) {
  matrix id(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) id(i, i) = 1.0;
  return id;
}

inline bool coupling_is_zero(const matrix& m) {
  for (double v : m.data)
    if (v != 0.0) return false;
  return true;
}

}  // namespace detail

inline marginal_consensus_result mfe_consensus(const std::vector<mfe_agent>& agents,
                                               const consensus_options& opts = {}) {
  if (agents.empty()) throw std::invalid_argument("mfe_consensus: no agents");
  std::size_t n = agents[0].log_potential.size();
  if (n == 0) throw std::invalid_argument("mfe_consensus: empty potential");
  marginal_consensus_result out;
  for (std::size_t k = 0; k < agents.size(); ++k) {
    if (agents[k].log_potential.size() != n)
      throw std::invalid_argument("mfe_consensus: agents disagree on the belief dimension");
    const matrix& q = agents[k].coupling;
    if (q.rows == 0) continue;
    if (q.rows != n || q.cols != n) throw std::invalid_argument("mfe_consensus: coupling matrix shape mismatch");
    double mineig = min_symmetric_eigenvalue(q);
    if (mineig < -opts.psd_tolerance) {
      if (!opts.assert_simplex_psd) {
        std::ostringstream msg;
        msg << "agent " << k << " coupling matrix is indefinite (smallest eigenvalue " << mineig
            << "); this is the unsupported case 3, which needs a semidefinite relaxation. "
               "Pass the simplex-psd assertion only if the quadratic is known nonnegative on "
               "simplex differences (case 2).";
        throw indefinite_compatibility(msg.str());
      }
      out.psd_asserted = true;
    }
  }

  std::vector<consensus_agent> slaves;
  slaves.reserve(agents.size());
  for (const mfe_agent& a : agents) {
    consensus_agent c;
    c.map = detail::identity_matrix(n);
    if (a.coupling.rows == 0 || detail::coupling_is_zero(a.coupling)) {
      entropic_slave s{a.log_potential, 1.0};
      c.solve = s;
    } else {
      vec log_psi = a.log_potential;
      matrix q = a.coupling;
      double tol = opts.inner_tol;
      c.solve = [log_psi, q, tol](const vec& prices) {
        vec a_lin(log_psi.size());
        for (std::size_t i = 0; i < a_lin.size(); ++i) a_lin[i] = -log_psi[i] + prices[i];
        vec beta = minimize_entropic_quadratic(a_lin, q, 1.0, tol);
        slave_solution s;
        double quad = 0.0;
        for (std::size_t i = 0; i < beta.size(); ++i)
          for (std::size_t j = 0; j < beta.size(); ++j) quad += beta[i] * q(i, j) * beta[j];
        double ent = 0.0;
        for (double x : beta) ent += xlogx(x);
        s.payoff = dot(log_psi, beta) - quad - ent;
        s.y = std::move(beta);
        return s;
      };
    }
    slaves.push_back(std::move(c));
  }

  consensus_problem problem(std::move(slaves), n);
  consensus_result r = run_dual_decomposition(problem, opts.rule, opts.max_iters, opts.residual_tol, opts.threads);
  out.agent_beliefs = std::move(r.agent_solutions);
  out.consensus_belief = std::move(r.consensus);
  out.prices = std::move(r.prices);
  out.trace = std::move(r.trace);
  out.iterations = r.iterations;
  out.converged = r.converged;
  out.diverged = r.diverged;
  return out;
}

/// Per-agent term of the diagonal-coupling consensus program:
///   f_i(beta) = -<ln psi_i + a_i, beta> + (1/N) sum beta ln beta,
/// where a_i collects the log-diagonals of the agent's incident couplings.  With
/// the 1/N entropy share the N slave terms add up to a single entropy, so the
/// consensus limit is exactly the normalized product of the agent potentials.
struct bethe_agent {
  vec log_potential;
  vec diagonal_bias;  // may be empty, meaning zero
};

inline marginal_consensus_result bethe_consensus(const std::vector<bethe_agent>& agents,
                                                 const consensus_options& opts = {}) {
  if (agents.empty()) throw std::invalid_argument("bethe_consensus: no agents");
  std::size_t n = agents[0].log_potential.size();
  if (n == 0) throw std::invalid_argument("bethe_consensus: empty potential");
  double weight = 1.0 / static_cast<double>(agents.size());
  std::vector<consensus_agent> slaves;
  slaves.reserve(agents.size());
  for (const bethe_agent& a : agents) {
    if (a.log_potential.size() != n)
      throw std::invalid_argument("bethe_consensus: agents disagree on the belief dimension");
    if (!a.diagonal_bias.empty() && a.diagonal_bias.size() != n)
      throw std::invalid_argument("bethe_consensus: diagonal bias length mismatch");
    vec c = a.log_potential;
    for (std::size_t i = 0; i < a.diagonal_bias.size(); ++i) c[i] += a.diagonal_bias[i];
    consensus_agent slave;
    slave.map = detail::identity_matrix(n);
    slave.solve = entropic_slave{std::move(c), weight};
    slaves.push_back(std::move(slave));
  }
  consensus_problem problem(std::move(slaves), n);
  consensus_result r = run_dual_decomposition(problem, opts.rule, opts.max_iters, opts.residual_tol, opts.threads);
  marginal_consensus_result out;
  out.agent_beliefs = std::move(r.agent_solutions);
  out.consensus_belief = std::move(r.consensus);
  out.prices = std::move(r.prices);
  out.trace = std::move(r.trace);
  out.iterations = r.iterations;
  out.converged = r.converged;
  out.diverged = r.diverged;
  return out;
}

/// Inequality-coupled problem: sum_k C_k x_k + offset >= 0 componentwise, each
/// agent maximizing a concave payoff over its own feasible set.  `solve` receives
/// the price-adjusted linear term C_k^T v and must return the maximizer of
/// payoff_k(x) + <C_k^T v, x>.
struct inequality_agent {
  matrix coupling;  // p x dim
  std::function<vec(const vec& price_term)> solve;
};

struct inequality_problem {
  std::vector<inequality_agent> agents;
  vec offset;
};

struct inequality_trace {
  vec feasibility;  // most negative constraint slack, 0 when feasible
  vec step;
};

struct inequality_result {
  std::vector<vec> solutions;
  vec prices;
  inequality_trace trace;
  std::size_t iterations = 0;
  bool converged = false;
};

inline inequality_result run_coupled_inequality(const inequality_problem& p, const step_rule& rule,
                                                std::size_t max_iters, double price_tol = 1e-10,
                                                double feasibility_tol = 1e-8) {
  rule.check();
  if (p.agents.empty()) throw std::invalid_argument("run_coupled_inequality: no agents");
  std::size_t rows = p.offset.size();
  for (const auto& a : p.agents)
    if (a.coupling.rows != rows) throw std::invalid_argument("run_coupled_inequality: coupling row mismatch");

  inequality_result out;
  out.prices.assign(rows, 0.0);
  out.solutions.resize(p.agents.size());
  for (std::size_t n = 1; n <= max_iters; ++n) {
    vec slack = p.offset;
    for (std::size_t k = 0; k < p.agents.size(); ++k) {
      vec term = mat_t_vec(p.agents[k].coupling, out.prices);
      out.solutions[k] = p.agents[k].solve(term);
      vec contribution = matvec(p.agents[k].coupling, out.solutions[k]);
      for (std::size_t r = 0; r < rows; ++r) slack[r] += contribution[r];
    }
    double worst = 0.0;
    for (double s : slack) worst = std::min(worst, s);
    double alpha = rule.at(n);
    out.trace.feasibility.push_back(worst);
    out.trace.step.push_back(alpha);

    vec next(rows);
    for (std::size_t r = 0; r < rows; ++r) next[r] = std::max(0.0, out.prices[r] - alpha * slack[r]);
    double movement = linf_diff(next, out.prices);
    out.prices = std::move(next);
    out.iterations = n;
    if (movement <= price_tol && worst >= -feasibility_tol) {
      out.converged = true;
      break;
    }
  }
  return out;
}

}  // namespace beliefnet
