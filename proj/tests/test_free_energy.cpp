#include <catch2/catch_amalgamated.hpp>

#include "beliefnet/free_energy.hpp"
#include "support/generators.hpp"

using namespace beliefnet;

namespace {

pairwise_mrf symmetric_pair_model() {
  edge ed;
  ed.i = 0;
  ed.j = 1;
  ed.potential = matrix::from_rows({{2.0, 1.0}, {1.0, 2.0}});
  return pairwise_mrf::from_potentials({{1.0, 1.0}, {1.0, 1.0}}, {ed});
}

pairwise_mrf uniform_cycle(std::size_t n) {
  std::vector<vec> pots(n, vec{1.0, 1.0});
  std::vector<edge> edges;
  for (std::size_t k = 0; k < n; ++k) {
    edge ed;
    ed.i = std::min(k, (k + 1) % n);
    ed.j = std::max(k, (k + 1) % n);
    ed.potential = matrix(2, 2, 1.0);
    edges.push_back(std::move(ed));
  }
  std::sort(edges.begin(), edges.end(), [](const edge& a, const edge& b) {
    return a.i != b.i ? a.i < b.i : a.j < b.j;
  });
  return pairwise_mrf::from_potentials(std::move(pots), std::move(edges));
}

}  // namespace

TEST_CASE("kl divergence of a frozen pair") {
  CHECK(kl_divergence({0.9, 0.1}, {0.5, 0.5}) == Catch::Approx(0.36806420716849717).margin(1e-12));
  CHECK(kl_divergence({0.5, 0.5}, {0.5, 0.5}) == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("kl divergence is nonnegative and handles zero beliefs") {
  testgen::rng r(21);
  for (int trial = 0; trial < 20; ++trial) {
    vec beta = testgen::random_simplex(r, 4);
    vec p = testgen::random_simplex(r, 4);
    CHECK(kl_divergence(beta, p) >= -1e-12);
  }
  CHECK(kl_divergence({0.0, 1.0}, {0.5, 0.5}) == Catch::Approx(std::log(2.0)).margin(1e-12));
}

TEST_CASE("kl divergence rejects bad input") {
  CHECK_THROWS_AS(kl_divergence({0.5, 0.5}, {1.0, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(kl_divergence({0.5, 0.5}, {0.3, 0.3, 0.4}), std::invalid_argument);
}

TEST_CASE("gibbs free energy equals F plus the divergence from the posterior") {
  testgen::rng r(22);
  for (int trial = 0; trial < 10; ++trial) {
    pairwise_mrf m = testgen::random_model(r, 5);
    joint_table table = exact_joint(m);
    vec beta = testgen::random_simplex(r, table.probabilities.size());
    double g = gibbs_free_energy(m, beta);
    double f = partition_function(m).free_energy;
    double d = kl_divergence(beta, table.probabilities);
    CHECK(g - f == Catch::Approx(d).margin(1e-9));
  }
}

TEST_CASE("gibbs free energy attains F at the exact joint") {
  testgen::rng r(23);
  pairwise_mrf m = testgen::random_model(r, 5);
  joint_table table = exact_joint(m);
  CHECK(gibbs_free_energy(m, table.probabilities) ==
        Catch::Approx(partition_function(m).free_energy).margin(1e-9));
}

TEST_CASE("gibbs free energy rejects unnormalized tables") {
  pairwise_mrf m = pairwise_mrf::from_potentials({{1.0, 1.0}}, {});
  CHECK_THROWS_AS(gibbs_free_energy(m, {0.9, 0.9}), std::invalid_argument);
  CHECK_THROWS_AS(gibbs_free_energy(m, {1.0}), std::invalid_argument);
}

TEST_CASE("mean-field free energy upper bounds F for product beliefs") {
  testgen::rng r(24);
  for (int trial = 0; trial < 10; ++trial) {
    pairwise_mrf m = testgen::random_model(r, 5);
    std::vector<vec> beta(m.node_count());
    for (std::size_t k = 0; k < m.node_count(); ++k) beta[k] = testgen::random_simplex(r, m.cardinality(k));
    double f = partition_function(m).free_energy;
    CHECK(mean_field_free_energy(m, beta) >= f - 1e-10);
  }
}

TEST_CASE("mean-field free energy accepts zero belief entries") {
  pairwise_mrf m = symmetric_pair_model();
  std::vector<vec> beta = {{1.0, 0.0}, {0.0, 1.0}};
  // beta puts all mass on (0,1): average energy -ln psi_01(0,1) = -ln 1 = 0, entropy 0.
  CHECK(mean_field_free_energy(m, beta) == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("bethe free energy matches F at exact marginals on trees") {
  testgen::rng r(25);
  for (int trial = 0; trial < 10; ++trial) {
    pairwise_mrf m = testgen::random_tree(r, 8);
    belief_state b = exact_marginals(m);
    double f = partition_function(m).free_energy;
    CHECK(bethe_free_energy(m, b) == Catch::Approx(f).margin(1e-9));
  }
}

TEST_CASE("bethe free energy of the uniform three-cycle") {
  pairwise_mrf m = uniform_cycle(3);
  belief_state b;
  b.node_beliefs.assign(3, vec{0.5, 0.5});
  b.edge_beliefs.assign(3, matrix(2, 2, 0.25));
  // Exact here: F = -ln 8 and the uniform beliefs are the exact marginals.
  CHECK(bethe_free_energy(m, b) == Catch::Approx(-3.0 * std::log(2.0)).margin(1e-12));
  CHECK(partition_function(m).free_energy == Catch::Approx(-3.0 * std::log(2.0)).margin(1e-12));
}

TEST_CASE("bethe free energy reduces to mean-field on edgeless models") {
  pairwise_mrf m = pairwise_mrf::from_potentials({{1.0, 3.0}, {2.0, 1.0}}, {});
  belief_state b;
  b.node_beliefs = {{0.3, 0.7}, {0.6, 0.4}};
  CHECK(bethe_free_energy(m, b) == Catch::Approx(mean_field_free_energy(m, b.node_beliefs)).margin(1e-12));
}

TEST_CASE("bethe free energy requires edge beliefs") {
  testgen::rng r(26);
  pairwise_mrf m = testgen::random_tree(r, 5);
  belief_state b = exact_marginals(m);
  b.edge_beliefs.clear();
  CHECK_THROWS_AS(bethe_free_energy(m, b), std::invalid_argument);
}

TEST_CASE("free energies are invariant under node relabeling") {
  testgen::rng r(27);
  pairwise_mrf m = testgen::random_model(r, 5);
  std::vector<std::size_t> perm(m.node_count());
  for (std::size_t k = 0; k < perm.size(); ++k) perm[k] = k;
  std::shuffle(perm.begin(), perm.end(), r.eng);
  pairwise_mrf p = testgen::relabeled(m, perm);

  belief_state b = exact_marginals(m);
  belief_state pb = exact_marginals(p);
  CHECK(bethe_free_energy(p, pb) == Catch::Approx(bethe_free_energy(m, b)).margin(1e-12));
  CHECK(mean_field_free_energy(p, pb.node_beliefs) ==
        Catch::Approx(mean_field_free_energy(m, b.node_beliefs)).margin(1e-12));
}
