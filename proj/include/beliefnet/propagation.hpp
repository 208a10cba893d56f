#pragma once

#include <limits>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "beliefnet/beliefs.hpp"
#include "beliefnet/model.hpp"
#include "beliefnet/numeric.hpp"

namespace beliefnet {

enum class bp_mode { sum_product, max_product };
enum class schedule_mode { synchronous_flood, asynchronous_sweep };

struct bp_schedule {
  schedule_mode mode = schedule_mode::synchronous_flood;
  std::vector<std::size_t> sweep_order;  // asynchronous mode; empty means 0..N-1
  double damping = 0.0;                  // in [0, 1); 0 disables
  unsigned threads = 1;                  // synchronous rounds only
};

/// One normalized directed message per edge direction.  Slot 2e holds i -> j for
/// edge index e, slot 2e+1 holds j -> i.
class message_store {
 public:
  message_store() = default;

  explicit message_store(const pairwise_mrf& m) {
    msgs_.reserve(2 * m.edge_count());
    dirs_.reserve(2 * m.edge_count());
    for (std::size_t e = 0; e < m.edge_count(); ++e) {
      const edge& ed = m.edge_at(e);
      msgs_.emplace_back(m.cardinality(ed.j), 1.0 / static_cast<double>(m.cardinality(ed.j)));
      dirs_.push_back({ed.i, ed.j});
      lookup_[detail::pair_key(ed.i, ed.j) * 2 + (ed.i < ed.j ? 0 : 1)] = 2 * e;
      msgs_.emplace_back(m.cardinality(ed.i), 1.0 / static_cast<double>(m.cardinality(ed.i)));
      dirs_.push_back({ed.j, ed.i});
      lookup_[detail::pair_key(ed.i, ed.j) * 2 + (ed.i < ed.j ? 1 : 0)] = 2 * e + 1;
    }
  }

  std::size_t slot_count() const { return msgs_.size(); }
  std::size_t from(std::size_t slot) const { return dirs_.at(slot).from; }
  std::size_t to(std::size_t slot) const { return dirs_.at(slot).to; }

  std::size_t slot(std::size_t from, std::size_t to) const {
    auto it = lookup_.find(detail::pair_key(from, to) * 2 + (from < to ? 0 : 1));
    if (it == lookup_.end()) throw std::invalid_argument("message_store: no message for that directed pair");
    return it->second;
  }

  const vec& message(std::size_t from, std::size_t to) const { return msgs_[slot(from, to)]; }
  const vec& message_at(std::size_t s) const { return msgs_.at(s); }

  void set_message(std::size_t from, std::size_t to, vec value) { msgs_[slot(from, to)] = std::move(value); }
  void set_message_at(std::size_t s, vec value) { msgs_.at(s) = std::move(value); }

 private:
  struct directed {
    std::size_t from, to;
  };
  std::vector<vec> msgs_;
  std::vector<directed> dirs_;
  std::unordered_map<std::uint64_t, std::size_t> lookup_;
};

struct bp_result {
  belief_state beliefs;
  message_store messages;
  bool converged = false;
  std::size_t iterations = 0;
  vec residual_trace;  // per-iteration max message change
};

namespace detail {

inline double oriented_potential(const edge& ed, bool from_is_row, std::size_t s_from, std::size_t s_to) {
  return from_is_row ? ed.potential(s_from, s_to) : ed.potential(s_to, s_from);
}

inline vec compute_message(const pairwise_mrf& m, const message_store& msgs, std::size_t from,
                           std::size_t to, bp_mode mode) {
  auto e = m.edge_index(from, to);
  if (!e) throw std::invalid_argument("message update: nodes are not adjacent");
  const edge& ed = m.edge_at(*e);
  bool from_is_row = (ed.i == from);

  // Local evidence at the sender: its potential times every incoming message
  // except the one that came from the receiver.
  vec pre = m.node_potential(from);
  for (const neighbor& nb : m.neighbors(from)) {
    if (nb.node == to) continue;
    const vec& incoming = msgs.message(nb.node, from);
    for (std::size_t s = 0; s < pre.size(); ++s) pre[s] *= incoming[s];
  }

  std::size_t n_to = m.cardinality(to);
  std::size_t n_from = m.cardinality(from);
  vec out(n_to, 0.0);
  if (mode == bp_mode::sum_product) {
    for (std::size_t t = 0; t < n_to; ++t)
      for (std::size_t s = 0; s < n_from; ++s) out[t] += oriented_potential(ed, from_is_row, s, t) * pre[s];
  } else {
    for (std::size_t t = 0; t < n_to; ++t)
      for (std::size_t s = 0; s < n_from; ++s)
        out[t] = std::max(out[t], oriented_potential(ed, from_is_row, s, t) * pre[s]);
  }
  normalize(out);
  return out;
}

}  // namespace detail

inline vec sum_product_update(const pairwise_mrf& m, const message_store& msgs, std::size_t from, std::size_t to) {
  return detail::compute_message(m, msgs, from, to, bp_mode::sum_product);
}

inline vec max_product_update(const pairwise_mrf& m, const message_store& msgs, std::size_t from, std::size_t to) {
  return detail::compute_message(m, msgs, from, to, bp_mode::max_product);
}

/// Normalized belief at node k: psi_k times all incoming messages.
inline vec node_belief(const pairwise_mrf& m, const message_store& msgs, std::size_t k) {
  vec b = m.node_potential(k);
  for (const neighbor& nb : m.neighbors(k)) {
    const vec& incoming = msgs.message(nb.node, k);
    if (incoming.size() != b.size()) throw std::invalid_argument("node_belief: message length mismatch");
    for (std::size_t s = 0; s < b.size(); ++s) b[s] *= incoming[s];
  }
  normalize(b);
  return b;
}

inline bp_result run_bp(const pairwise_mrf& m, bp_mode mode, const bp_schedule& schedule,
                        std::size_t max_iters = 500, double tol = 1e-8) {
  if (max_iters == 0) throw std::invalid_argument("run_bp: max_iters must be positive");
  if (!(tol > 0.0)) throw std::invalid_argument("run_bp: tolerance must be positive");
  if (!(schedule.damping >= 0.0 && schedule.damping < 1.0))
    throw std::invalid_argument("run_bp: damping must lie in [0, 1)");
  std::vector<std::size_t> order = schedule.sweep_order;
  if (schedule.mode == schedule_mode::asynchronous_sweep) {
    if (order.empty()) {
      order.resize(m.node_count());
      for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    }
    std::vector<bool> seen(m.node_count(), false);
    if (order.size() != m.node_count()) throw std::invalid_argument("run_bp: sweep order must cover every node");
    for (std::size_t k : order) {
      if (k >= m.node_count() || seen[k]) throw std::invalid_argument("run_bp: sweep order is not a permutation");
      seen[k] = true;
    }
  }

  message_store msgs(m);
  double lambda = schedule.damping;
  bp_result result;
  result.residual_trace.reserve(max_iters);

  auto damped = [lambda](const vec& fresh, const vec& old) {
    if (lambda == 0.0) return fresh;
    vec mix(fresh.size());
    for (std::size_t s = 0; s < fresh.size(); ++s) mix[s] = (1.0 - lambda) * fresh[s] + lambda * old[s];
    return mix;
  };

  for (std::size_t it = 1; it <= max_iters; ++it) {
    double residual = 0.0;
    if (schedule.mode == schedule_mode::synchronous_flood) {
      // Every directed update in a round reads the previous round's buffer.
      std::size_t slots = msgs.slot_count();
      std::vector<vec> fresh(slots);
      for_each_chunk(slots, schedule.threads, [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t s = begin; s < end; ++s)
          fresh[s] = damped(detail::compute_message(m, msgs, msgs.from(s), msgs.to(s), mode), msgs.message_at(s));
      });
      for (std::size_t s = 0; s < slots; ++s) {
        residual = std::max(residual, linf_diff(fresh[s], msgs.message_at(s)));
        msgs.set_message_at(s, std::move(fresh[s]));
      }
    } else {
      for (std::size_t k : order) {
        for (const neighbor& nb : m.neighbors(k)) {
          vec fresh = damped(detail::compute_message(m, msgs, k, nb.node, mode), msgs.message(k, nb.node));
          residual = std::max(residual, linf_diff(fresh, msgs.message(k, nb.node)));
          msgs.set_message(k, nb.node, std::move(fresh));
        }
      }
    }
    result.residual_trace.push_back(residual);
    result.iterations = it;
    if (residual <= tol) {
      result.converged = true;
      break;
    }
  }

  result.beliefs.node_beliefs.resize(m.node_count());
  for (std::size_t k = 0; k < m.node_count(); ++k) result.beliefs.node_beliefs[k] = node_belief(m, msgs, k);
  result.messages = std::move(msgs);
  return result;
}

/// Per-node argmax of the result beliefs, lowest index on ties.
inline assignment map_decode(const bp_result& r) {
  assignment x(r.beliefs.node_beliefs.size());
  for (std::size_t k = 0; k < x.size(); ++k) x[k] = argmax_lowest(r.beliefs.node_beliefs[k]);
  return x;
}

}  // namespace beliefnet
