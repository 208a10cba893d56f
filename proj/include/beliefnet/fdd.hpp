#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "beliefnet/consensus.hpp"
#include "beliefnet/model.hpp"
#include "beliefnet/numeric.hpp"
#include "beliefnet/propagation.hpp"

namespace beliefnet {

struct hypothesis_bank {
  std::vector<std::string> labels;
  vec prior;

  std::size_t size() const { return labels.size(); }

  void check() const {
    if (labels.size() < 2) throw std::invalid_argument("hypothesis bank needs at least two hypotheses");
    if (prior.size() != labels.size()) throw std::invalid_argument("prior length does not match hypothesis count");
    for (double p : prior)
      if (!(p > 0.0) || !std::isfinite(p)) throw std::invalid_argument("prior must be strictly positive");
    if (std::abs(sum(prior) - 1.0) > 1e-9) throw std::invalid_argument("prior must sum to one");
  }
};

struct local_evidence {
  std::size_t agent = 0;
  vec likelihood;  // p(y_k | h) up to a constant, strictly positive
};

using agent_topology = std::vector<std::pair<std::size_t, std::size_t>>;

namespace detail {

/// Evidence entries reordered so index k holds agent k; agent ids must be a
/// permutation of 0..N-1.
inline std::vector<local_evidence> ordered_evidence(const hypothesis_bank& bank,
                                                    const std::vector<local_evidence>& evidence) {
  bank.check();
  if (evidence.empty()) throw std::invalid_argument("no agent evidence given");
  std::vector<local_evidence> ordered(evidence.size());
  std::vector<bool> seen(evidence.size(), false);
  for (const local_evidence& e : evidence) {
    if (e.agent >= evidence.size() || seen[e.agent])
      throw std::invalid_argument("agent ids must be a permutation of 0..N-1");
    if (e.likelihood.size() != bank.size())
      throw std::invalid_argument("likelihood length does not match hypothesis count");
    for (double v : e.likelihood)
      if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("likelihoods must be strictly positive");
    seen[e.agent] = true;
    ordered[e.agent] = e;
  }
  return ordered;
}

inline void check_topology(std::size_t n_agents, const agent_topology& topology) {
  std::vector<std::size_t> parent(n_agents);
  for (std::size_t k = 0; k < n_agents; ++k) parent[k] = k;
  std::function<std::size_t(std::size_t)> find = [&](std::size_t a) {
    while (parent[a] != a) {
      parent[a] = parent[parent[a]];
      a = parent[a];
    }
    return a;
  };
  std::unordered_set<std::uint64_t> seen;
  for (auto [a, b] : topology) {
    if (a >= n_agents || b >= n_agents) throw std::invalid_argument("topology references an unknown agent");
    if (a == b) throw std::invalid_argument("topology contains a self-loop");
    if (!seen.insert(pair_key(a, b)).second) throw std::invalid_argument("topology contains a duplicate link");
    parent[find(a)] = find(b);
  }
  std::size_t root = find(0);
  for (std::size_t k = 1; k < n_agents; ++k)
    if (find(k) != root) throw std::invalid_argument("topology must connect all agents");
}

}  // namespace detail

/// Posterior a fusion center would compute from all evidence at once:
/// p(h | y) proportional to prior(h) * prod_k p(y_k | h), in the log domain.
inline vec centralized_posterior(const hypothesis_bank& bank, const std::vector<local_evidence>& evidence) {
  auto ordered = detail::ordered_evidence(bank, evidence);
  vec logits(bank.size());
  for (std::size_t h = 0; h < bank.size(); ++h) logits[h] = std::log(bank.prior[h]);
  for (const local_evidence& e : ordered)
    for (std::size_t h = 0; h < bank.size(); ++h) logits[h] += std::log(e.likelihood[h]);
  return softmax(logits);
}

/// Homogeneous-hypothesis field for decentralized detection: one node per agent
/// over the hypothesis set, node potential prior^(1/N) * likelihood, and every
/// communication link carrying an agreement potential with 1 on the diagonal and
/// epsilon off it.  The topology must be connected so that agreement propagates.
inline pairwise_mrf build_fdd_mrf(const hypothesis_bank& bank, const std::vector<local_evidence>& evidence,
                                  const agent_topology& topology, double epsilon) {
  auto ordered = detail::ordered_evidence(bank, evidence);
  if (!(epsilon > 0.0 && epsilon <= 1.0)) throw std::invalid_argument("epsilon must lie in (0, 1]");
  detail::check_topology(ordered.size(), topology);
  std::size_t n_h = bank.size();
  double share = 1.0 / static_cast<double>(ordered.size());
  std::vector<node> nodes(ordered.size());
  for (std::size_t k = 0; k < ordered.size(); ++k) {
    nodes[k].cardinality = n_h;
    nodes[k].potential.resize(n_h);
    for (std::size_t h = 0; h < n_h; ++h)
      nodes[k].potential[h] = std::pow(bank.prior[h], share) * ordered[k].likelihood[h];
  }
  std::vector<edge> edges;
  edges.reserve(topology.size());
  for (auto [a, b] : topology) {
    edge ed;
    ed.i = std::min(a, b);
    ed.j = std::max(a, b);
    ed.potential = matrix(n_h, n_h, epsilon);
    for (std::size_t h = 0; h < n_h; ++h) ed.potential(h, h) = 1.0;
    edges.push_back(std::move(ed));
  }
  std::sort(edges.begin(), edges.end(), [](const edge& x, const edge& y) {
    return x.i != y.i ? x.i < y.i : x.j < y.j;
  });
  return pairwise_mrf(std::move(nodes), std::move(edges));
}

enum class fdd_method { bp_sum, bp_max, mfe_consensus, bethe_consensus };

struct fdd_params {
  double epsilon = 1e-6;
  std::size_t bp_max_iters = 500;
  double bp_tol = 1e-8;
  double damping = 0.0;
  consensus_options consensus;
  unsigned threads = 1;
};

struct fdd_decision {
  std::vector<vec> agent_beliefs;
  vec consensus_belief;
  std::size_t decided = 0;
  std::string label;
  bool solver_converged = false;
  std::size_t iterations = 0;
  double agent_spread = 0.0;   // max_i ||beta_i - mean||_inf
  vec residual_trace;          // message-passing methods
  consensus_trace price_trace; // consensus methods
};

/// Spread of per-agent beliefs around their mean; zero means full agreement.
inline double consensus_residual(const std::vector<vec>& agent_beliefs) {
  if (agent_beliefs.empty()) throw std::invalid_argument("consensus_residual: no beliefs");
  vec mean(agent_beliefs[0].size(), 0.0);
  for (const vec& b : agent_beliefs) {
    if (b.size() != mean.size()) throw std::invalid_argument("consensus_residual: belief length mismatch");
    for (std::size_t i = 0; i < b.size(); ++i) mean[i] += b[i];
  }
  for (double& v : mean) v /= static_cast<double>(agent_beliefs.size());
  double worst = 0.0;
  for (const vec& b : agent_beliefs) worst = std::max(worst, linf_diff(b, mean));
  return worst;
}

inline fdd_decision distributed_fdd(const hypothesis_bank& bank, const std::vector<local_evidence>& evidence,
                                    const agent_topology& topology, fdd_method method,
                                    const fdd_params& params = {}) {
  auto ordered = detail::ordered_evidence(bank, evidence);
  std::size_t n_agents = ordered.size();
  std::size_t n_h = bank.size();
  fdd_decision out;

  if (method == fdd_method::bp_sum || method == fdd_method::bp_max) {
    pairwise_mrf field = build_fdd_mrf(bank, evidence, topology, params.epsilon);
    bp_schedule schedule;
    schedule.damping = params.damping;
    schedule.threads = params.threads;
    bp_mode mode = (method == fdd_method::bp_sum) ? bp_mode::sum_product : bp_mode::max_product;
    bp_result r = run_bp(field, mode, schedule, params.bp_max_iters, params.bp_tol);
    out.agent_beliefs = r.beliefs.node_beliefs;
    out.solver_converged = r.converged;
    out.iterations = r.iterations;
    out.residual_trace = std::move(r.residual_trace);
    out.consensus_belief.assign(n_h, 0.0);
    for (const vec& b : out.agent_beliefs)
      for (std::size_t h = 0; h < n_h; ++h) out.consensus_belief[h] += b[h];
    for (double& v : out.consensus_belief) v /= static_cast<double>(n_agents);
  } else {
    pairwise_mrf field = build_fdd_mrf(bank, evidence, topology, params.epsilon);
    consensus_options opts = params.consensus;
    opts.threads = params.threads;
    marginal_consensus_result r;
    if (method == fdd_method::mfe_consensus) {
      std::vector<mfe_agent> agents(n_agents);
      for (std::size_t k = 0; k < n_agents; ++k) {
        agents[k].log_potential.resize(n_h);
        for (std::size_t h = 0; h < n_h; ++h) agents[k].log_potential[h] = std::log(field.node_potential(k)[h]);
        if (field.degree(k) > 0) {
          matrix q(n_h, n_h, 0.0);
          for (const neighbor& nb : field.neighbors(k)) {
            const matrix& pot = field.edge_at(nb.edge).potential;
            bool row_side = (field.edge_at(nb.edge).i == k);
            double peak = 0.0;
            for (double v : pot.data) peak = std::max(peak, v);
            for (std::size_t s = 0; s < n_h; ++s)
              for (std::size_t t = 0; t < n_h; ++t) {
                double v = (row_side ? pot(s, t) : pot(t, s)) / peak;
                q(s, t) -= std::log(v);
              }
          }
          agents[k].coupling = std::move(q);
        }
      }
      r = mfe_consensus(agents, opts);
    } else {
      std::vector<bethe_agent> agents(n_agents);
      for (std::size_t k = 0; k < n_agents; ++k) {
        agents[k].log_potential.resize(n_h);
        for (std::size_t h = 0; h < n_h; ++h) agents[k].log_potential[h] = std::log(field.node_potential(k)[h]);
        agents[k].diagonal_bias.assign(n_h, 0.0);
        for (const neighbor& nb : field.neighbors(k)) {
          const matrix& pot = field.edge_at(nb.edge).potential;
          for (std::size_t h = 0; h < n_h; ++h) agents[k].diagonal_bias[h] += std::log(pot(h, h));
        }
      }
      r = bethe_consensus(agents, opts);
    }
    out.agent_beliefs = std::move(r.agent_beliefs);
    out.consensus_belief = std::move(r.consensus_belief);
    out.solver_converged = r.converged;
    out.iterations = r.iterations;
    out.price_trace = std::move(r.trace);
  }

  out.agent_spread = consensus_residual(out.agent_beliefs);
  out.decided = argmax_lowest(out.consensus_belief);
  out.label = bank.labels[out.decided];
  return out;
}

/// True when the distributed decision matches the fusion-center argmax.
inline bool agrees_with_oracle(const fdd_decision& d, const hypothesis_bank& bank,
                               const std::vector<local_evidence>& evidence) {
  return d.decided == argmax_lowest(centralized_posterior(bank, evidence));
}

}  // namespace beliefnet
