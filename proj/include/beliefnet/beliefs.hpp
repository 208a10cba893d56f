#pragma once

#include <stdexcept>
#include <vector>

#include "beliefnet/model.hpp"
#include "beliefnet/numeric.hpp"

namespace beliefnet {

/// Node beliefs (one distribution per node) plus, optionally, edge beliefs aligned
/// with the model's edge list.  Edge belief (i,j) has rows over states of i and
/// columns over states of j, matching the edge potential layout.
struct belief_state {
  std::vector<vec> node_beliefs;
  std::vector<matrix> edge_beliefs;

  bool has_edge_beliefs() const { return !edge_beliefs.empty(); }
};

inline void check_belief_shape(const pairwise_mrf& m, const belief_state& b, bool require_edges = false) {
  if (b.node_beliefs.size() != m.node_count())
    throw std::invalid_argument("belief_state: node belief count does not match model");
  for (std::size_t k = 0; k < m.node_count(); ++k)
    if (b.node_beliefs[k].size() != m.cardinality(k))
      throw std::invalid_argument("belief_state: node belief length does not match cardinality");
  if (require_edges && b.edge_beliefs.size() != m.edge_count())
    throw std::invalid_argument("belief_state: edge beliefs missing");
  if (!b.edge_beliefs.empty()) {
    if (b.edge_beliefs.size() != m.edge_count())
      throw std::invalid_argument("belief_state: edge belief count does not match model");
    for (std::size_t e = 0; e < m.edge_count(); ++e) {
      const edge& ed = m.edge_at(e);
      if (b.edge_beliefs[e].rows != m.cardinality(ed.i) || b.edge_beliefs[e].cols != m.cardinality(ed.j))
        throw std::invalid_argument("belief_state: edge belief shape does not match cardinalities");
    }
  }
}

/// Largest marginalization mismatch between any edge belief and its endpoint
/// node beliefs, measured in the sup norm over both axes.
inline double consistency_residual(const pairwise_mrf& m, const belief_state& b) {
  check_belief_shape(m, b, true);
  double worst = 0.0;
  for (std::size_t e = 0; e < m.edge_count(); ++e) {
    const edge& ed = m.edge_at(e);
    const matrix& be = b.edge_beliefs[e];
    for (std::size_t s = 0; s < be.rows; ++s) {
      double row = 0.0;
      for (std::size_t t = 0; t < be.cols; ++t) row += be(s, t);
      worst = std::max(worst, std::abs(row - b.node_beliefs[ed.i][s]));
    }
    for (std::size_t t = 0; t < be.cols; ++t) {
      double col = 0.0;
      for (std::size_t s = 0; s < be.rows; ++s) col += be(s, t);
      worst = std::max(worst, std::abs(col - b.node_beliefs[ed.j][t]));
    }
  }
  return worst;
}

inline bool is_consistent(const pairwise_mrf& m, const belief_state& b, double tol = 1e-9) {
  return consistency_residual(m, b) <= tol;
}

}  // namespace beliefnet
