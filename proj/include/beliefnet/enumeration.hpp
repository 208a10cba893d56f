#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

#include "beliefnet/beliefs.hpp"
#include "beliefnet/model.hpp"
#include "beliefnet/numeric.hpp"

namespace beliefnet {

inline constexpr std::size_t default_state_cap = 10000000;

struct state_cap_exceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct enumeration_options {
  std::size_t state_cap = default_state_cap;
  unsigned threads = 1;
};

/// Product of node cardinalities, or nullopt on overflow.
inline std::optional<std::size_t> state_space_size(const pairwise_mrf& m) {
  std::size_t total = 1;
  for (std::size_t k = 0; k < m.node_count(); ++k) {
    std::size_t c = m.cardinality(k);
    if (c == 0) return std::nullopt;
    if (total > std::numeric_limits<std::size_t>::max() / c) return std::nullopt;
    total *= c;
  }
  return total;
}

inline std::size_t checked_state_count(const pairwise_mrf& m, const enumeration_options& opts) {
  auto total = state_space_size(m);
  if (!total || *total > opts.state_cap)
    throw state_cap_exceeded("state space exceeds enumeration cap");
  return *total;
}

namespace detail {

// Mixed-radix decoding with node 0 as the most significant digit.
inline void decode_state(std::size_t idx, const pairwise_mrf& m, assignment& x) {
  for (std::size_t k = m.node_count(); k-- > 0;) {
    std::size_t c = m.cardinality(k);
    x[k] = idx % c;
    idx /= c;
  }
}

inline double unnormalized_weight(const pairwise_mrf& m, const assignment& x) {
  double w = 1.0;
  for (std::size_t k = 0; k < m.node_count(); ++k) w *= m.node_potential(k)[x[k]];
  for (const edge& ed : m.edges()) w *= ed.potential(x[ed.i], x[ed.j]);
  return w;
}

inline void advance_state(const pairwise_mrf& m, assignment& x) {
  for (std::size_t k = m.node_count(); k-- > 0;) {
    if (++x[k] < m.cardinality(k)) return;
    x[k] = 0;
  }
}

}  // namespace detail

struct partition_value {
  double z = 0.0;
  double free_energy = 0.0;  // -ln z
};

/// Exhaustive partition function.  Work is split into fixed chunks and the chunk
/// sums are combined in index order, so the result is the same for any thread count.
inline partition_value partition_function(const pairwise_mrf& m, const enumeration_options& opts = {}) {
  std::size_t total = checked_state_count(m, opts);
  std::size_t chunks = chunk_count_for(total);
  vec chunk_z(chunks, 0.0);
  for_each_chunk(total, opts.threads, [&](std::size_t c, std::size_t begin, std::size_t end) {
    assignment x(m.node_count());
    detail::decode_state(begin, m, x);
    double z = 0.0;
    for (std::size_t s = begin; s < end; ++s) {
      z += detail::unnormalized_weight(m, x);
      detail::advance_state(m, x);
    }
    chunk_z[c] = z;
  });
  double z = 0.0;
  for (double v : chunk_z) z += v;
  if (!(z > 0.0) || !std::isfinite(z)) throw std::runtime_error("partition_function: degenerate normalizer");
  return {z, -std::log(z)};
}

/// P(x) = exp(-E(x)) / Z.
inline double joint_probability(const pairwise_mrf& m, const assignment& x, const enumeration_options& opts = {}) {
  double z = partition_function(m, opts).z;
  return std::exp(-energy(m, x)) / z;
}

/// Exact node and edge marginals by exhaustive enumeration.  This is the reference
/// oracle every approximate scheme in the library is tested against.
inline belief_state exact_marginals(const pairwise_mrf& m, const enumeration_options& opts = {}) {
  std::size_t total = checked_state_count(m, opts);
  std::size_t chunks = chunk_count_for(total);

  struct accumulator {
    double z = 0.0;
    std::vector<vec> nodes;
    std::vector<matrix> edges;
  };
  std::vector<accumulator> acc(chunks);
  for_each_chunk(total, opts.threads, [&](std::size_t c, std::size_t begin, std::size_t end) {
    accumulator& a = acc[c];
    a.nodes.resize(m.node_count());
    for (std::size_t k = 0; k < m.node_count(); ++k) a.nodes[k].assign(m.cardinality(k), 0.0);
    a.edges.reserve(m.edge_count());
    for (const edge& ed : m.edges()) a.edges.emplace_back(m.cardinality(ed.i), m.cardinality(ed.j), 0.0);
    assignment x(m.node_count());
    detail::decode_state(begin, m, x);
    for (std::size_t s = begin; s < end; ++s) {
      double w = detail::unnormalized_weight(m, x);
      a.z += w;
      for (std::size_t k = 0; k < m.node_count(); ++k) a.nodes[k][x[k]] += w;
      for (std::size_t e = 0; e < m.edge_count(); ++e) {
        const edge& ed = m.edge_at(e);
        a.edges[e](x[ed.i], x[ed.j]) += w;
      }
      detail::advance_state(m, x);
    }
  });

  belief_state out;
  out.node_beliefs.resize(m.node_count());
  for (std::size_t k = 0; k < m.node_count(); ++k) out.node_beliefs[k].assign(m.cardinality(k), 0.0);
  for (const edge& ed : m.edges()) out.edge_beliefs.emplace_back(m.cardinality(ed.i), m.cardinality(ed.j), 0.0);
  double z = 0.0;
  for (std::size_t c = 0; c < chunks; ++c) {
    z += acc[c].z;
    for (std::size_t k = 0; k < m.node_count(); ++k)
      for (std::size_t s = 0; s < out.node_beliefs[k].size(); ++s) out.node_beliefs[k][s] += acc[c].nodes[k][s];
    for (std::size_t e = 0; e < m.edge_count(); ++e)
      for (std::size_t t = 0; t < out.edge_beliefs[e].data.size(); ++t)
        out.edge_beliefs[e].data[t] += acc[c].edges[e].data[t];
  }
  if (!(z > 0.0) || !std::isfinite(z)) throw std::runtime_error("exact_marginals: degenerate normalizer");
  for (auto& nb : out.node_beliefs)
    for (double& v : nb) v /= z;
  for (auto& eb : out.edge_beliefs)
    for (double& v : eb.data) v /= z;
  return out;
}

/// Full normalized joint distribution, materialized.  Gated by the same state cap.
struct joint_table {
  std::vector<std::size_t> cards;
  vec probabilities;
  double z = 0.0;

  std::size_t index_of(const assignment& x) const {
    if (x.size() != cards.size()) throw std::invalid_argument("joint_table: assignment length mismatch");
    std::size_t idx = 0;
    for (std::size_t k = 0; k < cards.size(); ++k) {
      if (x[k] >= cards[k]) throw std::invalid_argument("joint_table: state out of range");
      idx = idx * cards[k] + x[k];
    }
    return idx;
  }

  void decode(std::size_t idx, assignment& x) const {
    x.resize(cards.size());
    for (std::size_t k = cards.size(); k-- > 0;) {
      x[k] = idx % cards[k];
      idx /= cards[k];
    }
  }
};

inline joint_table exact_joint(const pairwise_mrf& m, const enumeration_options& opts = {}) {
  std::size_t total = checked_state_count(m, opts);
  joint_table table;
  table.cards.resize(m.node_count());
  for (std::size_t k = 0; k < m.node_count(); ++k) table.cards[k] = m.cardinality(k);
  table.probabilities.assign(total, 0.0);
  for_each_chunk(total, opts.threads, [&](std::size_t, std::size_t begin, std::size_t end) {
    assignment x(m.node_count());
    detail::decode_state(begin, m, x);
    for (std::size_t s = begin; s < end; ++s) {
      table.probabilities[s] = detail::unnormalized_weight(m, x);
      detail::advance_state(m, x);
    }
  });
  std::size_t chunks = chunk_count_for(total);
  double z = 0.0;
  for (std::size_t c = 0; c < chunks; ++c) {
    auto [b, e] = chunk_bounds(total, chunks, c);
    double part = 0.0;
    for (std::size_t s = b; s < e; ++s) part += table.probabilities[s];
    z += part;
  }
  if (!(z > 0.0) || !std::isfinite(z)) throw std::runtime_error("exact_joint: degenerate normalizer");
  table.z = z;
  for (double& p : table.probabilities) p /= z;
  return table;
}

}  // namespace beliefnet
