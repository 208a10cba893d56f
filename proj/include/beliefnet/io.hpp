#pragma once

#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "beliefnet/beliefs.hpp"
#include "beliefnet/consensus.hpp"
#include "beliefnet/fdd.hpp"
#include "beliefnet/model.hpp"
#include "beliefnet/numeric.hpp"

namespace beliefnet {

struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using ordered_json = nlohmann::ordered_json;

namespace detail {

inline ordered_json parse_json_text(const std::string& text, const std::string& what) {
  try {
    return ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // nlohmann reports line and column in the message already.
    throw io_error(what + ": " + e.what());
  }
}

inline const ordered_json& require_key(const ordered_json& j, const char* key, const std::string& context) {
  auto it = j.find(key);
  if (it == j.end()) throw io_error(context + ": missing key \"" + std::string(key) + "\"");
  return *it;
}

inline double number_at(const ordered_json& j, const char* key, const std::string& context) {
  const ordered_json& v = require_key(j, key, context);
  if (!v.is_number()) throw io_error(context + ": key \"" + std::string(key) + "\" must be a number");
  return v.get<double>();
}

inline vec vector_at(const ordered_json& j, const char* key, const std::string& context) {
  const ordered_json& v = require_key(j, key, context);
  if (!v.is_array()) throw io_error(context + ": key \"" + std::string(key) + "\" must be an array");
  vec out;
  out.reserve(v.size());
  for (const auto& x : v) {
    if (!x.is_number()) throw io_error(context + ": key \"" + std::string(key) + "\" must hold numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

inline matrix matrix_at(const ordered_json& j, const char* key, const std::string& context) {
  const ordered_json& v = require_key(j, key, context);
  if (!v.is_array() || v.empty()) throw io_error(context + ": key \"" + std::string(key) + "\" must be a matrix (array of rows)");
  matrix m;
  m.rows = v.size();
  for (const auto& row : v) {
    if (!row.is_array()) throw io_error(context + ": key \"" + std::string(key) + "\" must be a matrix (array of rows)");
    if (m.cols == 0) m.cols = row.size();
    if (row.size() != m.cols) throw io_error(context + ": key \"" + std::string(key) + "\" has ragged rows");
    for (const auto& x : row) {
      if (!x.is_number()) throw io_error(context + ": key \"" + std::string(key) + "\" must hold numbers");
      m.data.push_back(x.get<double>());
    }
  }
  return m;
}

}  // namespace detail

/// Model document: {"nodes": [{"id", "cardinality", "potential"}...],
///                  "edges": [{"i", "j", "potential"}...]}.
/// Node ids must be exactly 0..N-1; edge potentials are arrays of rows (row state
/// indexes node i, column state node j).
inline pairwise_mrf parse_model(const std::string& text) {
  ordered_json j = detail::parse_json_text(text, "model");
  if (!j.is_object()) throw io_error("model: document must be a JSON object");
  const ordered_json& jnodes = detail::require_key(j, "nodes", "model");
  if (!jnodes.is_array() || jnodes.empty()) throw io_error("model: key \"nodes\" must be a nonempty array");
  std::vector<node> nodes(jnodes.size());
  std::vector<bool> seen(jnodes.size(), false);
  for (const auto& jn : jnodes) {
    if (!jn.is_object()) throw io_error("model: entries of \"nodes\" must be objects");
    double id_raw = detail::number_at(jn, "id", "model node");
    auto id = static_cast<std::size_t>(id_raw);
    if (id_raw != static_cast<double>(id) || id >= nodes.size() || seen[id])
      throw io_error("model: node ids must be exactly 0..N-1 without repeats");
    seen[id] = true;
    double card = detail::number_at(jn, "cardinality", "model node");
    if (card < 0 || card != static_cast<double>(static_cast<std::size_t>(card)))
      throw io_error("model node: key \"cardinality\" must be a nonnegative integer");
    nodes[id].cardinality = static_cast<std::size_t>(card);
    nodes[id].potential = detail::vector_at(jn, "potential", "model node");
  }
  std::vector<edge> edges;
  if (auto it = j.find("edges"); it != j.end()) {
    if (!it->is_array()) throw io_error("model: key \"edges\" must be an array");
    for (const auto& je : *it) {
      if (!je.is_object()) throw io_error("model: entries of \"edges\" must be objects");
      edge ed;
      double i_raw = detail::number_at(je, "i", "model edge");
      double j_raw = detail::number_at(je, "j", "model edge");
      if (i_raw < 0 || j_raw < 0) throw io_error("model edge: endpoints must be nonnegative");
      ed.i = static_cast<std::size_t>(i_raw);
      ed.j = static_cast<std::size_t>(j_raw);
      ed.potential = detail::matrix_at(je, "potential", "model edge");
      edges.push_back(std::move(ed));
    }
  }
  return pairwise_mrf(std::move(nodes), std::move(edges));
}

inline ordered_json model_to_json(const pairwise_mrf& m) {
  ordered_json j;
  j["nodes"] = ordered_json::array();
  for (std::size_t k = 0; k < m.node_count(); ++k) {
    ordered_json jn;
    jn["id"] = k;
    jn["cardinality"] = m.node_at(k).cardinality;
    jn["potential"] = m.node_at(k).potential;
    j["nodes"].push_back(std::move(jn));
  }
  j["edges"] = ordered_json::array();
  for (const edge& ed : m.edges()) {
    ordered_json je;
    je["i"] = ed.i;
    je["j"] = ed.j;
    ordered_json rows = ordered_json::array();
    for (std::size_t r = 0; r < ed.potential.rows; ++r) {
      ordered_json row = ordered_json::array();
      for (std::size_t c = 0; c < ed.potential.cols; ++c) row.push_back(ed.potential(r, c));
      rows.push_back(std::move(row));
    }
    je["potential"] = std::move(rows);
    j["edges"].push_back(std::move(je));
  }
  return j;
}

inline std::string serialize_model(const pairwise_mrf& m) { return model_to_json(m).dump(2) + "\n"; }

/// Scenario document for distributed detection:
/// {"hypotheses": [...], "prior": [...],
///  "agents": [{"id", "likelihood"}...], "topology": [[a,b]...],
///  "method": "bp-sum" | "bp-max" | "mfe-consensus" | "bethe-consensus",
///  "epsilon": number, "params": {...}}.
struct scenario {
  hypothesis_bank bank;
  std::vector<local_evidence> evidence;
  agent_topology topology;
  fdd_method method = fdd_method::bp_sum;
  fdd_params params;
};

inline fdd_method parse_fdd_method(const std::string& name) {
  if (name == "bp-sum") return fdd_method::bp_sum;
  if (name == "bp-max") return fdd_method::bp_max;
  if (name == "mfe-consensus") return fdd_method::mfe_consensus;
  if (name == "bethe-consensus") return fdd_method::bethe_consensus;
  throw io_error("unknown method \"" + name + "\" (expected bp-sum, bp-max, mfe-consensus or bethe-consensus)");
}

inline std::string fdd_method_name(fdd_method m) {
  switch (m) {
    case fdd_method::bp_sum: return "bp-sum";
    case fdd_method::bp_max: return "bp-max";
    case fdd_method::mfe_consensus: return "mfe-consensus";
    default: return "bethe-consensus";
  }
}

inline scenario parse_scenario(const std::string& text) {
  ordered_json j = detail::parse_json_text(text, "scenario");
  if (!j.is_object()) throw io_error("scenario: document must be a JSON object");
  scenario s;
  const ordered_json& names = detail::require_key(j, "hypotheses", "scenario");
  if (!names.is_array() || names.empty()) throw io_error("scenario: key \"hypotheses\" must be a nonempty array");
  for (const auto& n : names) {
    if (!n.is_string()) throw io_error("scenario: key \"hypotheses\" must hold strings");
    s.bank.labels.push_back(n.get<std::string>());
  }
  s.bank.prior = detail::vector_at(j, "prior", "scenario");
  const ordered_json& jagents = detail::require_key(j, "agents", "scenario");
  if (!jagents.is_array() || jagents.empty()) throw io_error("scenario: key \"agents\" must be a nonempty array");
  for (const auto& ja : jagents) {
    if (!ja.is_object()) throw io_error("scenario: entries of \"agents\" must be objects");
    local_evidence e;
    double id_raw = detail::number_at(ja, "id", "scenario agent");
    if (id_raw < 0) throw io_error("scenario agent: key \"id\" must be nonnegative");
    e.agent = static_cast<std::size_t>(id_raw);
    e.likelihood = detail::vector_at(ja, "likelihood", "scenario agent");
    s.evidence.push_back(std::move(e));
  }
  if (auto it = j.find("topology"); it != j.end()) {
    if (!it->is_array()) throw io_error("scenario: key \"topology\" must be an array of pairs");
    for (const auto& link : *it) {
      if (!link.is_array() || link.size() != 2 || !link[0].is_number() || !link[1].is_number())
        throw io_error("scenario: key \"topology\" must be an array of [a, b] pairs");
      s.topology.emplace_back(link[0].get<std::size_t>(), link[1].get<std::size_t>());
    }
  }
  const ordered_json& jmethod = detail::require_key(j, "method", "scenario");
  if (!jmethod.is_string()) throw io_error("scenario: key \"method\" must be a string");
  s.method = parse_fdd_method(jmethod.get<std::string>());
  if (j.contains("epsilon")) s.params.epsilon = detail::number_at(j, "epsilon", "scenario");
  if (auto it = j.find("params"); it != j.end()) {
    if (!it->is_object()) throw io_error("scenario: key \"params\" must be an object");
    const ordered_json& p = *it;
    if (p.contains("max_iters")) {
      double v = detail::number_at(p, "max_iters", "scenario params");
      s.params.bp_max_iters = static_cast<std::size_t>(v);
      s.params.consensus.max_iters = static_cast<std::size_t>(v);
    }
    if (p.contains("tol")) {
      double v = detail::number_at(p, "tol", "scenario params");
      s.params.bp_tol = v;
      s.params.consensus.residual_tol = v;
    }
    if (p.contains("damping")) s.params.damping = detail::number_at(p, "damping", "scenario params");
    if (p.contains("alpha0")) s.params.consensus.rule.alpha0 = detail::number_at(p, "alpha0", "scenario params");
    if (p.contains("step_rule")) {
      const ordered_json& v = p["step_rule"];
      if (!v.is_string()) throw io_error("scenario params: key \"step_rule\" must be a string");
      std::string name = v.get<std::string>();
      if (name == "constant")
        s.params.consensus.rule.kind = step_rule::mode::constant;
      else if (name == "diminishing")
        s.params.consensus.rule.kind = step_rule::mode::diminishing;
      else
        throw io_error("scenario params: unknown step rule \"" + name + "\"");
    }
    if (p.contains("assert_simplex_psd")) {
      const ordered_json& v = p["assert_simplex_psd"];
      if (!v.is_boolean()) throw io_error("scenario params: key \"assert_simplex_psd\" must be a boolean");
      s.params.consensus.assert_simplex_psd = v.get<bool>();
    }
  }
  return s;
}

inline ordered_json beliefs_to_json(const std::vector<vec>& beliefs) {
  ordered_json out = ordered_json::array();
  for (const vec& b : beliefs) out.push_back(b);
  return out;
}

inline ordered_json edge_beliefs_to_json(const pairwise_mrf& m, const std::vector<matrix>& edge_beliefs) {
  ordered_json out = ordered_json::array();
  for (std::size_t e = 0; e < edge_beliefs.size(); ++e) {
    ordered_json je;
    je["i"] = m.edge_at(e).i;
    je["j"] = m.edge_at(e).j;
    ordered_json rows = ordered_json::array();
    for (std::size_t r = 0; r < edge_beliefs[e].rows; ++r) {
      ordered_json row = ordered_json::array();
      for (std::size_t c = 0; c < edge_beliefs[e].cols; ++c) row.push_back(edge_beliefs[e](r, c));
      rows.push_back(std::move(row));
    }
    je["table"] = std::move(rows);
    out.push_back(std::move(je));
  }
  return out;
}

inline void write_iteration_trace(std::ostream& os, const char* column, const vec& values) {
  os << "iteration," << column << "\n";
  char buf[64];
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", values[i]);
    os << (i + 1) << "," << buf << "\n";
  }
}

inline void write_consensus_trace(std::ostream& os, const consensus_trace& trace) {
  os << "iteration,dual_value,residual,step\n";
  char buf[3][64];
  for (std::size_t i = 0; i < trace.residual.size(); ++i) {
    std::snprintf(buf[0], sizeof(buf[0]), "%.17g", trace.dual_value[i]);
    std::snprintf(buf[1], sizeof(buf[1]), "%.17g", trace.residual[i]);
    std::snprintf(buf[2], sizeof(buf[2]), "%.17g", trace.step[i]);
    os << (i + 1) << "," << buf[0] << "," << buf[1] << "," << buf[2] << "\n";
  }
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace beliefnet
