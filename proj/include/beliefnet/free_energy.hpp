#pragma once

#include <stdexcept>
#include <vector>

#include "beliefnet/beliefs.hpp"
#include "beliefnet/enumeration.hpp"
#include "beliefnet/model.hpp"
#include "beliefnet/numeric.hpp"

namespace beliefnet {

/// KL(beta || p) = sum_i beta_i ln(beta_i / p_i), with 0 ln 0 := 0.
/// The reference distribution must be strictly positive.
inline double kl_divergence(const vec& beta, const vec& p) {
  if (beta.size() != p.size()) throw std::invalid_argument("kl_divergence: shape mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < beta.size(); ++i) {
    if (!(p[i] > 0.0)) throw std::invalid_argument("kl_divergence: reference distribution must be strictly positive");
    if (beta[i] < 0.0) throw std::invalid_argument("kl_divergence: negative belief entry");
    d += xlogx(beta[i]) - beta[i] * std::log(p[i]);
  }
  return d;
}

/// Exact Gibbs free energy of a joint belief: G = sum_x beta(x) E(x) + sum_x beta(x) ln beta(x).
/// The belief is a dense table over the full state space (node 0 most significant).
inline double gibbs_free_energy(const pairwise_mrf& m, const vec& joint_belief,
                                const enumeration_options& opts = {}) {
  std::size_t total = checked_state_count(m, opts);
  if (joint_belief.size() != total)
    throw std::invalid_argument("gibbs_free_energy: belief table does not match the state space");
  if (!is_distribution(joint_belief, 1e-9))
    throw std::invalid_argument("gibbs_free_energy: belief table is not a normalized distribution");
  double g = 0.0;
  assignment x(m.node_count(), 0);
  for (std::size_t s = 0; s < total; ++s) {
    double b = joint_belief[s];
    if (b > 0.0) g += b * energy(m, x) + xlogx(b);
    detail::advance_state(m, x);
  }
  return g;
}

/// Mean-field (fully factored) free energy from node beliefs alone.
inline double mean_field_free_energy(const pairwise_mrf& m, const std::vector<vec>& node_beliefs) {
  belief_state b;
  b.node_beliefs = node_beliefs;
  check_belief_shape(m, b);
  for (const vec& nb : node_beliefs)
    if (!is_distribution(nb, 1e-9))
      throw std::invalid_argument("mean_field_free_energy: node belief is not a normalized distribution");
  double avg_energy = 0.0;
  for (std::size_t k = 0; k < m.node_count(); ++k)
    for (std::size_t s = 0; s < m.cardinality(k); ++s)
      avg_energy -= node_beliefs[k][s] * std::log(m.node_potential(k)[s]);
  for (const edge& ed : m.edges())
    for (std::size_t s = 0; s < ed.potential.rows; ++s)
      for (std::size_t t = 0; t < ed.potential.cols; ++t)
        avg_energy -= node_beliefs[ed.i][s] * node_beliefs[ed.j][t] * std::log(ed.potential(s, t));
  double neg_entropy = 0.0;
  for (const vec& nb : node_beliefs)
    for (double v : nb) neg_entropy += xlogx(v);
  return avg_energy + neg_entropy;
}

/// Bethe free energy from node and edge beliefs.  Node entropies carry the
/// (degree - 1) counting coefficient, which also covers isolated nodes: degree 0
/// gives the plain mean-field entropy term.
inline double bethe_free_energy(const pairwise_mrf& m, const belief_state& b) {
  check_belief_shape(m, b, true);
  for (const vec& nb : b.node_beliefs)
    if (!is_distribution(nb, 1e-9))
      throw std::invalid_argument("bethe_free_energy: node belief is not a normalized distribution");
  for (const matrix& eb : b.edge_beliefs) {
    double s = 0.0;
    for (double v : eb.data) {
      if (v < 0.0) throw std::invalid_argument("bethe_free_energy: negative edge belief entry");
      s += v;
    }
    if (std::abs(s - 1.0) > 1e-9)
      throw std::invalid_argument("bethe_free_energy: edge belief is not a normalized distribution");
  }
  double value = 0.0;
  for (std::size_t k = 0; k < m.node_count(); ++k) {
    double q = static_cast<double>(m.degree(k));
    for (std::size_t s = 0; s < m.cardinality(k); ++s) {
      double bk = b.node_beliefs[k][s];
      value -= bk * std::log(m.node_potential(k)[s]);
      value += (1.0 - q) * xlogx(bk);
    }
  }
  for (std::size_t e = 0; e < m.edge_count(); ++e) {
    const edge& ed = m.edge_at(e);
    const matrix& eb = b.edge_beliefs[e];
    for (std::size_t s = 0; s < eb.rows; ++s)
      for (std::size_t t = 0; t < eb.cols; ++t) {
        double bst = eb(s, t);
        if (bst > 0.0) value += bst * (std::log(bst) - std::log(ed.potential(s, t)));
      }
  }
  return value;
}

}  // namespace beliefnet
