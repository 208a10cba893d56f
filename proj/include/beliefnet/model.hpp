#pragma once

#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "beliefnet/numeric.hpp"

namespace beliefnet {

using assignment = std::vector<std::size_t>;

struct node {
  std::size_t cardinality = 0;
  vec potential;
};

/// Undirected coupling stored with the canonical orientation i < j; the potential
/// table has rows indexed by the state of i and columns by the state of j.
struct edge {
  std::size_t i = 0;
  std::size_t j = 0;
  matrix potential;
};

struct neighbor {
  std::size_t node = 0;
  std::size_t edge = 0;
};

struct validation_report {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

namespace detail {
inline std::uint64_t pair_key(std::size_t a, std::size_t b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint64_t>(b);
}
}  // namespace detail

class pairwise_mrf {
 public:
  pairwise_mrf() = default;

  pairwise_mrf(std::vector<node> nodes, std::vector<edge> edges)
      : nodes_(std::move(nodes)), edges_(std::move(edges)) {
    build_adjacency();
  }

  /// Convenience constructor deriving each cardinality from the potential length.
  static pairwise_mrf from_potentials(std::vector<vec> node_potentials, std::vector<edge> edges) {
    std::vector<node> ns;
    ns.reserve(node_potentials.size());
    for (auto& p : node_potentials) {
      node n;
      n.cardinality = p.size();
      n.potential = std::move(p);
      ns.push_back(std::move(n));
    }
    return pairwise_mrf(std::move(ns), std::move(edges));
  }

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  std::size_t cardinality(std::size_t k) const { return nodes_.at(k).cardinality; }
  const node& node_at(std::size_t k) const { return nodes_.at(k); }
  const vec& node_potential(std::size_t k) const { return nodes_.at(k).potential; }
  const std::vector<edge>& edges() const { return edges_; }
  const edge& edge_at(std::size_t e) const { return edges_.at(e); }

  const std::vector<neighbor>& neighbors(std::size_t k) const { return adjacency_.at(k); }
  std::size_t degree(std::size_t k) const { return adjacency_.at(k).size(); }

  std::optional<std::size_t> edge_index(std::size_t a, std::size_t b) const {
    auto it = edge_lookup_.find(detail::pair_key(a, b));
    if (it == edge_lookup_.end()) return std::nullopt;
    return it->second;
  }

  bool has_edge(std::size_t a, std::size_t b) const { return edge_index(a, b).has_value(); }

 private:
  std::vector<node> nodes_;
  std::vector<edge> edges_;
  std::vector<std::vector<neighbor>> adjacency_;
  std::unordered_map<std::uint64_t, std::size_t> edge_lookup_;

  // Only structurally sound edges enter the adjacency index; validate() reports the
  // rest, and inference operations see a usable (if possibly rejected) structure.
  void build_adjacency() {
    adjacency_.assign(nodes_.size(), {});
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      const edge& ed = edges_[e];
      if (ed.i >= nodes_.size() || ed.j >= nodes_.size() || ed.i == ed.j) continue;
      std::uint64_t key = detail::pair_key(ed.i, ed.j);
      if (edge_lookup_.count(key)) continue;
      edge_lookup_[key] = e;
      adjacency_[ed.i].push_back({ed.j, e});
      adjacency_[ed.j].push_back({ed.i, e});
    }
    for (auto& adj : adjacency_)
      std::sort(adj.begin(), adj.end(), [](const neighbor& a, const neighbor& b) { return a.node < b.node; });
  }
};

/// Collect every well-formedness violation; an empty report means the model is usable
/// by all inference operations.
inline validation_report validate(const pairwise_mrf& m) {
  validation_report report;
  auto add = [&report](const std::string& s) { report.violations.push_back(s); };
  for (std::size_t k = 0; k < m.node_count(); ++k) {
    const node& n = m.node_at(k);
    std::ostringstream tag;
    tag << "node " << k;
    if (n.cardinality < 2) add(tag.str() + ": cardinality must be at least 2");
    if (n.potential.size() != n.cardinality) {
      std::ostringstream msg;
      msg << tag.str() << ": potential length " << n.potential.size()
          << " does not match cardinality " << n.cardinality;
      add(msg.str());
    }
    for (double v : n.potential) {
      if (!(v > 0.0) || !std::isfinite(v)) {
        add("nonpositive potential at " + tag.str());
        break;
      }
    }
  }
  std::unordered_set<std::uint64_t> seen;
  for (std::size_t e = 0; e < m.edge_count(); ++e) {
    const edge& ed = m.edge_at(e);
    std::ostringstream tag;
    tag << "edge (" << ed.i << "," << ed.j << ")";
    if (ed.i >= m.node_count() || ed.j >= m.node_count()) {
      add(tag.str() + ": unknown node");
      continue;
    }
    if (ed.i == ed.j) {
      add(tag.str() + ": self-loop");
      continue;
    }
    if (ed.i > ed.j) add(tag.str() + ": not in canonical i < j order");
    std::uint64_t key = detail::pair_key(ed.i, ed.j);
    if (!seen.insert(key).second) add("duplicate " + tag.str());
    std::size_t ci = m.node_at(ed.i).cardinality, cj = m.node_at(ed.j).cardinality;
    if (ed.potential.rows != ci || ed.potential.cols != cj) {
      std::ostringstream msg;
      msg << tag.str() << ": potential shape " << ed.potential.rows << "x" << ed.potential.cols
          << " does not match cardinalities " << ci << "x" << cj;
      add(msg.str());
    }
    for (double v : ed.potential.data) {
      if (!(v > 0.0) || !std::isfinite(v)) {
        add("nonpositive potential at " + tag.str());
        break;
      }
    }
  }
  return report;
}

inline void check_assignment(const pairwise_mrf& m, const assignment& x) {
  if (x.size() != m.node_count()) throw std::invalid_argument("assignment length does not match node count");
  for (std::size_t k = 0; k < x.size(); ++k)
    if (x[k] >= m.cardinality(k)) throw std::invalid_argument("assignment state out of range");
}

/// E(x) = -sum_k ln psi_k(x_k) - sum_(i,j) ln psi_ij(x_i, x_j).
inline double energy(const pairwise_mrf& m, const assignment& x) {
  check_assignment(m, x);
  double e = 0.0;
  for (std::size_t k = 0; k < m.node_count(); ++k) e -= std::log(m.node_potential(k)[x[k]]);
  for (const edge& ed : m.edges()) e -= std::log(ed.potential(x[ed.i], x[ed.j]));
  return e;
}

}  // namespace beliefnet
