#include <catch2/catch_amalgamated.hpp>

#include "beliefnet/enumeration.hpp"
#include "beliefnet/fdd.hpp"
#include "support/generators.hpp"
#include "support/probes.hpp"

using namespace beliefnet;

namespace {

hypothesis_bank two_hypotheses() {
  hypothesis_bank bank;
  bank.labels = {"target", "clutter"};
  bank.prior = {0.5, 0.5};
  return bank;
}

std::vector<local_evidence> three_sensors() {
  return {{0, {0.9, 0.1}}, {1, {0.8, 0.2}}, {2, {0.3, 0.7}}};
}

agent_topology chain(std::size_t n) {
  agent_topology links;
  for (std::size_t k = 0; k + 1 < n; ++k) links.push_back({k, k + 1});
  return links;
}

}  // namespace

TEST_CASE("the fusion-center posterior of a frozen scenario") {
  vec post = centralized_posterior(two_hypotheses(), three_sensors());
  CHECK(post[0] == Catch::Approx(108.0 / 115.0).margin(1e-13));
  CHECK(post[1] == Catch::Approx(7.0 / 115.0).margin(1e-13));
}

TEST_CASE("the posterior equals the normalized evidence product") {
  testgen::rng r(61);
  for (int trial = 0; trial < 10; ++trial) {
    std::size_t n_h = 2 + r.index(3);
    std::size_t n_agents = 1 + r.index(5);
    hypothesis_bank bank;
    for (std::size_t h = 0; h < n_h; ++h) bank.labels.push_back("h" + std::to_string(h));
    bank.prior = testgen::random_simplex(r, n_h);
    std::vector<local_evidence> evidence;
    for (std::size_t k = 0; k < n_agents; ++k) evidence.push_back({k, testgen::random_potential(r, n_h)});

    vec direct = bank.prior;
    for (const local_evidence& e : evidence)
      for (std::size_t h = 0; h < n_h; ++h) direct[h] *= e.likelihood[h];
    normalize(direct);
    CHECK(linf_diff(centralized_posterior(bank, evidence), direct) <= 1e-12);
  }
}

TEST_CASE("the posterior ignores the order agents report in") {
  hypothesis_bank bank = two_hypotheses();
  std::vector<local_evidence> forward = three_sensors();
  std::vector<local_evidence> shuffled = {forward[2], forward[0], forward[1]};
  CHECK(linf_diff(centralized_posterior(bank, forward), centralized_posterior(bank, shuffled)) <= 1e-15);
}

TEST_CASE("evidence and bank validation") {
  hypothesis_bank bank = two_hypotheses();
  CHECK_THROWS_AS(centralized_posterior(bank, {}), std::invalid_argument);
  CHECK_THROWS_AS(centralized_posterior(bank, {{0, {0.9, 0.1}}, {0, {0.8, 0.2}}}), std::invalid_argument);
  CHECK_THROWS_AS(centralized_posterior(bank, {{5, {0.9, 0.1}}}), std::invalid_argument);
  CHECK_THROWS_AS(centralized_posterior(bank, {{0, {0.9, 0.1, 0.3}}}), std::invalid_argument);
  CHECK_THROWS_AS(centralized_posterior(bank, {{0, {0.9, 0.0}}}), std::invalid_argument);

  hypothesis_bank lonely;
  lonely.labels = {"only"};
  lonely.prior = {1.0};
  CHECK_THROWS_AS(lonely.check(), std::invalid_argument);
  hypothesis_bank lopsided = two_hypotheses();
  lopsided.prior = {0.9, 0.2};
  CHECK_THROWS_AS(lopsided.check(), std::invalid_argument);
  lopsided.prior = {1.5, -0.5};
  CHECK_THROWS_AS(lopsided.check(), std::invalid_argument);
}

TEST_CASE("the agreement field wires agents as requested") {
  hypothesis_bank bank = two_hypotheses();
  std::vector<local_evidence> evidence = three_sensors();
  agent_topology star = {{2, 0}, {0, 1}};
  pairwise_mrf field = build_fdd_mrf(bank, evidence, star, 0.01);

  REQUIRE(field.node_count() == 3);
  REQUIRE(field.edge_count() == 2);
  double share = 1.0 / 3.0;
  CHECK(field.node_potential(0)[0] == Catch::Approx(std::pow(0.5, share) * 0.9).margin(1e-14));
  CHECK(field.node_potential(2)[1] == Catch::Approx(std::pow(0.5, share) * 0.7).margin(1e-14));

  CHECK(field.edge_at(0).i == 0);
  CHECK(field.edge_at(0).j == 1);
  CHECK(field.edge_at(1).i == 0);
  CHECK(field.edge_at(1).j == 2);
  for (std::size_t e = 0; e < 2; ++e) {
    CHECK(field.edge_at(e).potential(0, 0) == 1.0);
    CHECK(field.edge_at(e).potential(1, 1) == 1.0);
    CHECK(field.edge_at(e).potential(0, 1) == 0.01);
    CHECK(field.edge_at(e).potential(1, 0) == 0.01);
  }
  CHECK(validate(field).ok());
}

TEST_CASE("agreement strength and topology are validated") {
  hypothesis_bank bank = two_hypotheses();
  std::vector<local_evidence> evidence = three_sensors();
  agent_topology line = chain(3);
  CHECK_THROWS_AS(build_fdd_mrf(bank, evidence, line, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(build_fdd_mrf(bank, evidence, line, -0.2), std::invalid_argument);
  CHECK_THROWS_AS(build_fdd_mrf(bank, evidence, line, 1.5), std::invalid_argument);
  CHECK_NOTHROW(build_fdd_mrf(bank, evidence, line, 1.0));

  CHECK_THROWS_AS(build_fdd_mrf(bank, evidence, {{0, 1}}, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(build_fdd_mrf(bank, evidence, {{0, 0}, {1, 2}}, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(build_fdd_mrf(bank, evidence, {{0, 1}, {1, 0}, {1, 2}}, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(build_fdd_mrf(bank, evidence, {{0, 1}, {1, 7}}, 0.5), std::invalid_argument);
}

TEST_CASE("uniform agreement links leave agents with their own posteriors") {
  hypothesis_bank bank = two_hypotheses();
  std::vector<local_evidence> evidence = {{0, {0.9, 0.1}}, {1, {0.2, 0.8}}};
  fdd_params params;
  params.epsilon = 1.0;
  fdd_decision d = distributed_fdd(bank, evidence, chain(2), fdd_method::bp_sum, params);
  REQUIRE(d.solver_converged);
  // With flat links the field factorizes, so each agent keeps the normalized
  // product of the prior share and its own likelihood.
  vec local0 = normalized({std::pow(0.5, 0.5) * 0.9, std::pow(0.5, 0.5) * 0.1});
  CHECK(linf_diff(d.agent_beliefs[0], local0) <= 1e-12);
  CHECK(d.agent_spread > 0.1);
}

TEST_CASE("a lone agent decides by its own posterior under every method") {
  hypothesis_bank bank = two_hypotheses();
  std::vector<local_evidence> evidence = {{0, {0.2, 0.6}}};
  vec oracle = centralized_posterior(bank, evidence);
  for (fdd_method method : {fdd_method::bp_sum, fdd_method::bp_max, fdd_method::mfe_consensus,
                            fdd_method::bethe_consensus}) {
    fdd_params params;
    params.epsilon = 1.0;
    fdd_decision d = distributed_fdd(bank, evidence, {}, method, params);
    REQUIRE(d.solver_converged);
    CHECK(d.agent_spread == 0.0);
    CHECK(linf_diff(d.consensus_belief, oracle) <= 1e-9);
    CHECK(d.decided == 1);
    CHECK(d.label == "clutter");
    CHECK(agrees_with_oracle(d, bank, evidence));
  }
}

TEST_CASE("tight agreement links reproduce the fusion-center decision on a star") {
  hypothesis_bank bank = two_hypotheses();
  std::vector<local_evidence> evidence = three_sensors();
  agent_topology star = {{0, 1}, {0, 2}};
  fdd_decision d = distributed_fdd(bank, evidence, star, fdd_method::bp_sum);
  REQUIRE(d.solver_converged);
  CHECK(agrees_with_oracle(d, bank, evidence));
  CHECK(d.decided == 0);
  CHECK(d.label == "target");
  CHECK(linf_diff(d.consensus_belief, centralized_posterior(bank, evidence)) <= 1e-3);
  CHECK(d.agent_spread <= 1e-3);
  CHECK_FALSE(d.residual_trace.empty());
}

TEST_CASE("max-product agreement picks the fusion-center argmax on a tree") {
  hypothesis_bank bank = two_hypotheses();
  std::vector<local_evidence> evidence = three_sensors();
  fdd_decision d = distributed_fdd(bank, evidence, chain(3), fdd_method::bp_max);
  REQUIRE(d.solver_converged);
  CHECK(agrees_with_oracle(d, bank, evidence));
}

TEST_CASE("the entropy-split consensus tracks the fusion-center posterior") {
  hypothesis_bank bank = two_hypotheses();
  std::vector<local_evidence> evidence = three_sensors();
  fdd_decision d = distributed_fdd(bank, evidence, chain(3), fdd_method::bethe_consensus);
  REQUIRE(d.solver_converged);
  CHECK(linf_diff(d.consensus_belief, centralized_posterior(bank, evidence)) <= 1e-5);
  CHECK(agrees_with_oracle(d, bank, evidence));
  CHECK(d.agent_spread <= 1e-6);
  CHECK_FALSE(d.price_trace.residual.empty());
}

TEST_CASE("marginal consensus rejects sharp agreement couplings") {
  hypothesis_bank bank = two_hypotheses();
  std::vector<local_evidence> evidence = three_sensors();
  fdd_params params;
  params.epsilon = 0.5;
  CHECK_THROWS_AS(distributed_fdd(bank, evidence, chain(3), fdd_method::mfe_consensus, params),
                  indefinite_compatibility);
}

TEST_CASE("marginal consensus with flat links blends the tempered evidence") {
  hypothesis_bank bank = two_hypotheses();
  std::vector<local_evidence> evidence = three_sensors();
  fdd_params params;
  params.epsilon = 1.0;
  fdd_decision d = distributed_fdd(bank, evidence, chain(3), fdd_method::mfe_consensus, params);
  REQUIRE(d.solver_converged);

  // Flat links leave no pairwise coupling, so the consensus minimizes the summed
  // local terms: the normalized geometric mean of the local potentials.  Its
  // argmax is still the fusion-center argmax.
  vec logits(2, 0.0);
  pairwise_mrf field = build_fdd_mrf(bank, evidence, chain(3), 1.0);
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t h = 0; h < 2; ++h) logits[h] += std::log(field.node_potential(k)[h]) / 3.0;
  CHECK(linf_diff(d.consensus_belief, softmax(logits)) <= 1e-6);
  CHECK(agrees_with_oracle(d, bank, evidence));
}

TEST_CASE("converged message passing can still disagree with the fusion center") {
  hypothesis_bank bank = probes::misleading_bank();
  std::vector<local_evidence> evidence = probes::misleading_evidence();
  fdd_decision d = distributed_fdd(bank, evidence, probes::misleading_topology(), fdd_method::bp_sum,
                                   probes::misleading_params());
  REQUIRE(d.solver_converged);
  CHECK_FALSE(agrees_with_oracle(d, bank, evidence));
}

TEST_CASE("belief spread measures disagreement") {
  CHECK(consensus_residual({{1.0, 0.0}, {0.0, 1.0}}) == Catch::Approx(0.5).margin(1e-15));
  CHECK(consensus_residual({{0.3, 0.7}, {0.3, 0.7}}) == 0.0);
  CHECK_THROWS_AS(consensus_residual({}), std::invalid_argument);
  CHECK_THROWS_AS(consensus_residual({{0.5, 0.5}, {0.3, 0.3, 0.4}}), std::invalid_argument);
}
