#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>

#include "beliefnet/io.hpp"
#include "support/generators.hpp"

using namespace beliefnet;

namespace {

std::string minimal_model_text() {
  return R"({
    "nodes": [
      {"id": 0, "cardinality": 2, "potential": [1.0, 2.0]},
      {"id": 1, "cardinality": 3, "potential": [0.5, 1.0, 1.5]}
    ],
    "edges": [
      {"i": 0, "j": 1, "potential": [[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]}
    ]
  })";
}

std::string minimal_scenario_text() {
  return R"({
    "hypotheses": ["a", "b"],
    "prior": [0.5, 0.5],
    "agents": [
      {"id": 0, "likelihood": [0.9, 0.1]},
      {"id": 1, "likelihood": [0.4, 0.6]}
    ],
    "topology": [[0, 1]],
    "method": "bethe-consensus",
    "epsilon": 0.001,
    "params": {
      "max_iters": 1234,
      "tol": 1e-7,
      "damping": 0.25,
      "alpha0": 0.8,
      "step_rule": "constant",
      "assert_simplex_psd": true
    }
  })";
}

}  // namespace

TEST_CASE("a model document parses into the expected structure") {
  pairwise_mrf m = parse_model(minimal_model_text());
  REQUIRE(m.node_count() == 2);
  REQUIRE(m.edge_count() == 1);
  CHECK(m.cardinality(0) == 2);
  CHECK(m.cardinality(1) == 3);
  CHECK(m.node_potential(1)[2] == 1.5);
  CHECK(m.edge_at(0).potential(1, 2) == 6.0);
  CHECK(validate(m).ok());
}

TEST_CASE("model serialization round-trips awkward doubles exactly") {
  testgen::rng r(71);
  pairwise_mrf m = testgen::random_model(r, 5);
  pairwise_mrf back = parse_model(serialize_model(m));
  REQUIRE(back.node_count() == m.node_count());
  REQUIRE(back.edge_count() == m.edge_count());
  for (std::size_t k = 0; k < m.node_count(); ++k) CHECK(back.node_potential(k) == m.node_potential(k));
  for (std::size_t e = 0; e < m.edge_count(); ++e) {
    CHECK(back.edge_at(e).i == m.edge_at(e).i);
    CHECK(back.edge_at(e).j == m.edge_at(e).j);
    CHECK(back.edge_at(e).potential == m.edge_at(e).potential);
  }

  pairwise_mrf odd = pairwise_mrf::from_potentials({{0.1, 1.0 / 3.0}, {1e-17 + 1.0, 2.0}}, {});
  pairwise_mrf odd_back = parse_model(serialize_model(odd));
  CHECK(odd_back.node_potential(0) == odd.node_potential(0));
  CHECK(odd_back.node_potential(1) == odd.node_potential(1));
}

TEST_CASE("model parse errors name the offending part") {
  CHECK_THROWS_WITH(parse_model("{ nope"), Catch::Matchers::ContainsSubstring("line"));
  CHECK_THROWS_WITH(parse_model("[1, 2]"), Catch::Matchers::ContainsSubstring("object"));
  CHECK_THROWS_WITH(parse_model("{}"), Catch::Matchers::ContainsSubstring("nodes"));
  CHECK_THROWS_WITH(parse_model(R"({"nodes": [{"cardinality": 2, "potential": [1, 1]}]})"),
                    Catch::Matchers::ContainsSubstring("\"id\""));
  CHECK_THROWS_WITH(parse_model(R"({"nodes": [{"id": 3, "cardinality": 2, "potential": [1, 1]}]})"),
                    Catch::Matchers::ContainsSubstring("0..N-1"));
  CHECK_THROWS_WITH(
      parse_model(
          R"({"nodes": [{"id": 0, "cardinality": 2, "potential": [1, 1]},
                        {"id": 0, "cardinality": 2, "potential": [1, 1]}]})"),
      Catch::Matchers::ContainsSubstring("0..N-1"));
  CHECK_THROWS_WITH(parse_model(R"({"nodes": [{"id": 0, "cardinality": 2.5, "potential": [1, 1]}]})"),
                    Catch::Matchers::ContainsSubstring("cardinality"));
  CHECK_THROWS_WITH(parse_model(R"({"nodes": [{"id": 0, "cardinality": 2, "potential": ["x", 1]}]})"),
                    Catch::Matchers::ContainsSubstring("must hold numbers"));
  CHECK_THROWS_WITH(
      parse_model(
          R"({"nodes": [{"id": 0, "cardinality": 2, "potential": [1, 1]},
                        {"id": 1, "cardinality": 2, "potential": [1, 1]}],
              "edges": [{"i": 0, "j": 1, "potential": [[1, 2], [3]]}]})"),
      Catch::Matchers::ContainsSubstring("ragged"));
  CHECK_THROWS_WITH(parse_model(R"({"nodes": [{"id": 0, "cardinality": 2, "potential": [1, 1]}], "edges": 7})"),
                    Catch::Matchers::ContainsSubstring("edges"));
}

TEST_CASE("a scenario document parses with every knob") {
  scenario s = parse_scenario(minimal_scenario_text());
  CHECK(s.bank.labels == std::vector<std::string>{"a", "b"});
  CHECK(s.bank.prior == vec{0.5, 0.5});
  REQUIRE(s.evidence.size() == 2);
  CHECK(s.evidence[1].agent == 1);
  CHECK(s.evidence[1].likelihood == vec{0.4, 0.6});
  REQUIRE(s.topology.size() == 1);
  CHECK(s.topology[0] == std::pair<std::size_t, std::size_t>(0, 1));
  CHECK(s.method == fdd_method::bethe_consensus);
  CHECK(s.params.epsilon == 0.001);
  CHECK(s.params.bp_max_iters == 1234);
  CHECK(s.params.consensus.max_iters == 1234);
  CHECK(s.params.bp_tol == 1e-7);
  CHECK(s.params.consensus.residual_tol == 1e-7);
  CHECK(s.params.damping == 0.25);
  CHECK(s.params.consensus.rule.alpha0 == 0.8);
  CHECK(s.params.consensus.rule.kind == step_rule::mode::constant);
  CHECK(s.params.consensus.assert_simplex_psd);
}

TEST_CASE("scenario defaults hold when knobs are omitted") {
  scenario s = parse_scenario(R"({
    "hypotheses": ["a", "b"],
    "prior": [0.5, 0.5],
    "agents": [{"id": 0, "likelihood": [1.0, 2.0]}],
    "method": "bp-sum"
  })");
  CHECK(s.topology.empty());
  CHECK(s.params.epsilon == 1e-6);
  CHECK(s.params.bp_max_iters == 500);
  CHECK(s.params.bp_tol == 1e-8);
  CHECK(s.params.consensus.rule.kind == step_rule::mode::diminishing);
  CHECK_FALSE(s.params.consensus.assert_simplex_psd);
}

TEST_CASE("scenario parse errors name the offending part") {
  CHECK_THROWS_WITH(parse_scenario(R"({"hypotheses": ["a", "b"], "prior": [0.5, 0.5],
                                       "agents": [{"id": 0, "likelihood": [1, 1]}]})"),
                    Catch::Matchers::ContainsSubstring("method"));
  CHECK_THROWS_WITH(parse_scenario(R"({"hypotheses": ["a", "b"], "prior": [0.5, 0.5],
                                       "agents": [{"id": 0, "likelihood": [1, 1]}],
                                       "method": "gossip"})"),
                    Catch::Matchers::ContainsSubstring("bp-sum"));
  CHECK_THROWS_WITH(parse_scenario(R"({"hypotheses": ["a", "b"], "prior": [0.5, 0.5],
                                       "agents": [{"id": 0, "likelihood": [1, 1]}],
                                       "topology": [[0]],
                                       "method": "bp-sum"})"),
                    Catch::Matchers::ContainsSubstring("[a, b] pairs"));
  CHECK_THROWS_WITH(parse_scenario(R"({"hypotheses": ["a", "b"], "prior": [0.5, 0.5],
                                       "agents": [{"id": 0, "likelihood": [1, 1]}],
                                       "method": "bp-sum",
                                       "params": {"step_rule": "wild"}})"),
                    Catch::Matchers::ContainsSubstring("step rule"));
  CHECK_THROWS_AS(parse_scenario("not json"), io_error);
}

TEST_CASE("method names round-trip") {
  for (fdd_method m : {fdd_method::bp_sum, fdd_method::bp_max, fdd_method::mfe_consensus,
                       fdd_method::bethe_consensus})
    CHECK(parse_fdd_method(fdd_method_name(m)) == m);
}

TEST_CASE("iteration traces print full-precision CSV") {
  std::ostringstream os;
  write_iteration_trace(os, "residual", {0.5, 0.25});
  CHECK(os.str() == "iteration,residual\n1,0.5\n2,0.25\n");

  std::ostringstream empty;
  write_iteration_trace(empty, "objective", {});
  CHECK(empty.str() == "iteration,objective\n");
}

TEST_CASE("consensus traces print all three columns") {
  consensus_trace trace;
  trace.dual_value = {1.5};
  trace.residual = {0.5};
  trace.step = {1.0};
  std::ostringstream os;
  write_consensus_trace(os, trace);
  CHECK(os.str() == "iteration,dual_value,residual,step\n1,1.5,0.5,1\n");
}

TEST_CASE("belief tables serialize to JSON arrays") {
  ordered_json jb = beliefs_to_json({{0.25, 0.75}, {0.5, 0.5}});
  CHECK(jb.dump() == "[[0.25,0.75],[0.5,0.5]]");

  edge ed;
  ed.i = 0;
  ed.j = 1;
  ed.potential = matrix(2, 2, 1.0);
  pairwise_mrf m = pairwise_mrf::from_potentials({{1.0, 1.0}, {1.0, 1.0}}, {ed});
  matrix table(2, 2, 0.25);
  ordered_json je = edge_beliefs_to_json(m, {table});
  CHECK(je[0]["i"] == 0);
  CHECK(je[0]["j"] == 1);
  CHECK(je[0]["table"].dump() == "[[0.25,0.25],[0.25,0.25]]");
}

TEST_CASE("text files read back verbatim and missing files are reported") {
  const char* path = "io_test_roundtrip.txt";
  {
    std::ofstream out(path, std::ios::binary);
    out << "line one\nline two";
  }
  CHECK(read_text_file(path) == "line one\nline two");
  std::remove(path);
  CHECK_THROWS_WITH(read_text_file("definitely_not_here.json"),
                    Catch::Matchers::ContainsSubstring("cannot open file"));
}
