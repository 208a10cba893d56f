// Command-line front end: exact enumeration, message passing, variational
// solvers and distributed hypothesis testing over JSON model/scenario files.
//
// Exit codes: 0 success, 2 input error, 3 solver did not converge (result is
// still written), 4 state space exceeds the enumeration cap, 5 precondition
// rejected by a solver.

#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "beliefnet/beliefnet.hpp"

namespace {

constexpr int exit_ok = 0;
constexpr int exit_input_error = 2;
constexpr int exit_not_converged = 3;
constexpr int exit_cap_exceeded = 4;
constexpr int exit_precondition = 5;

void emit(const beliefnet::ordered_json& doc, const std::string& out_path) {
  std::string text = doc.dump(2) + "\n";
  if (out_path.empty()) {
    std::cout << text;
  } else {
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw beliefnet::io_error("cannot write file: " + out_path);
    out << text;
  }
}

void write_trace_file(const std::string& path, const char* column, const beliefnet::vec& values) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw beliefnet::io_error("cannot write file: " + path);
  beliefnet::write_iteration_trace(out, column, values);
}

beliefnet::pairwise_mrf load_model(const std::string& path) {
  beliefnet::pairwise_mrf m = beliefnet::parse_model(beliefnet::read_text_file(path));
  beliefnet::validation_report report = beliefnet::validate(m);
  if (!report.ok()) {
    std::string msg = "invalid model:";
    for (const auto& v : report.violations) msg += "\n  " + v;
    throw beliefnet::io_error(msg);
  }
  return m;
}

struct infer_args {
  std::string model_path;
  std::string method = "bp-sum";
  std::string schedule = "sync";
  std::string trace_path;
  std::string out_path;
  double tol = 0.0;  // 0 means method default
  std::size_t max_iters = 0;
  double damping = 0.0;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

int cmd_infer(const infer_args& args) {
  beliefnet::pairwise_mrf m = load_model(args.model_path);
  beliefnet::ordered_json doc;
  doc["method"] = args.method;
  bool converged = true;

  if (args.method == "bp-sum" || args.method == "bp-max") {
    beliefnet::bp_schedule schedule;
    if (args.schedule == "async") schedule.mode = beliefnet::schedule_mode::asynchronous_sweep;
    else if (args.schedule != "sync") throw beliefnet::io_error("unknown schedule \"" + args.schedule + "\"");
    schedule.damping = args.damping;
    schedule.threads = args.threads;
    std::size_t iters = args.max_iters ? args.max_iters : 500;
    double tol = args.tol > 0.0 ? args.tol : 1e-8;
    beliefnet::bp_mode mode = (args.method == "bp-sum") ? beliefnet::bp_mode::sum_product
                                                        : beliefnet::bp_mode::max_product;
    beliefnet::bp_result r = beliefnet::run_bp(m, mode, schedule, iters, tol);
    doc["converged"] = r.converged;
    doc["iterations"] = r.iterations;
    doc["final_residual"] = r.residual_trace.empty() ? 0.0 : r.residual_trace.back();
    doc["beliefs"] = beliefnet::beliefs_to_json(r.beliefs.node_beliefs);
    if (args.method == "bp-max") {
      beliefnet::assignment x = beliefnet::map_decode(r);
      doc["decoded_map"] = x;
    }
    if (!args.trace_path.empty()) write_trace_file(args.trace_path, "residual", r.residual_trace);
    converged = r.converged;
  } else if (args.method == "mf" || args.method == "bethe") {
    beliefnet::bo_params params;
    if (args.max_iters) params.max_iters = args.max_iters;
    if (args.tol > 0.0) params.tolerance = args.tol;
    params.seed = args.seed;
    beliefnet::bo_result r = (args.method == "mf") ? beliefnet::minimize_mean_field(m, params)
                                                   : beliefnet::minimize_bethe_direct(m, params);
    doc["converged"] = r.converged;
    doc["iterations"] = r.objective_trace.size() - 1;
    doc["objective"] = r.objective;
    doc["stationarity_residual"] = r.stationarity_residual;
    doc["beliefs"] = beliefnet::beliefs_to_json(r.beliefs.node_beliefs);
    if (args.method == "bethe") doc["edge_beliefs"] = beliefnet::edge_beliefs_to_json(m, r.beliefs.edge_beliefs);
    if (!args.trace_path.empty()) write_trace_file(args.trace_path, "objective", r.objective_trace);
    converged = r.converged;
  } else {
    throw beliefnet::io_error("unknown method \"" + args.method + "\" (expected bp-sum, bp-max, mf or bethe)");
  }

  emit(doc, args.out_path);
  return converged ? exit_ok : exit_not_converged;
}

struct oracle_args {
  std::string model_path;
  std::string out_path;
  std::size_t state_cap = beliefnet::default_state_cap;
  unsigned threads = 1;
};

int cmd_oracle(const oracle_args& args) {
  beliefnet::pairwise_mrf m = load_model(args.model_path);
  beliefnet::enumeration_options opts;
  opts.state_cap = args.state_cap;
  opts.threads = args.threads;
  beliefnet::partition_value pv = beliefnet::partition_function(m, opts);
  beliefnet::belief_state marginals = beliefnet::exact_marginals(m, opts);
  beliefnet::ordered_json doc;
  doc["z"] = pv.z;
  doc["free_energy"] = pv.free_energy;
  doc["beliefs"] = beliefnet::beliefs_to_json(marginals.node_beliefs);
  doc["edge_beliefs"] = beliefnet::edge_beliefs_to_json(m, marginals.edge_beliefs);
  emit(doc, args.out_path);
  return exit_ok;
}

struct fdd_args {
  std::string scenario_path;
  std::string trace_path;
  std::string out_path;
  unsigned threads = 1;
};

int cmd_fdd(const fdd_args& args) {
  beliefnet::scenario s = beliefnet::parse_scenario(beliefnet::read_text_file(args.scenario_path));
  s.params.threads = args.threads;
  beliefnet::fdd_decision d = beliefnet::distributed_fdd(s.bank, s.evidence, s.topology, s.method, s.params);
  beliefnet::vec oracle = beliefnet::centralized_posterior(s.bank, s.evidence);
  std::size_t oracle_pick = beliefnet::argmax_lowest(oracle);

  beliefnet::ordered_json doc;
  doc["method"] = beliefnet::fdd_method_name(s.method);
  doc["hypotheses"] = s.bank.labels;
  doc["decision"] = d.label;
  doc["decision_index"] = d.decided;
  doc["agent_beliefs"] = beliefnet::beliefs_to_json(d.agent_beliefs);
  doc["consensus_belief"] = d.consensus_belief;
  doc["consensus_residual"] = d.agent_spread;
  doc["converged"] = d.solver_converged;
  doc["iterations"] = d.iterations;
  doc["oracle_posterior"] = oracle;
  doc["oracle_decision"] = s.bank.labels[oracle_pick];
  doc["agreement"] = (d.decided == oracle_pick);
  emit(doc, args.out_path);

  if (!args.trace_path.empty()) {
    if (!d.residual_trace.empty()) {
      write_trace_file(args.trace_path, "residual", d.residual_trace);
    } else {
      std::ofstream out(args.trace_path, std::ios::binary);
      if (!out) throw beliefnet::io_error("cannot write file: " + args.trace_path);
      beliefnet::write_consensus_trace(out, d.price_trace);
    }
  }
  return d.solver_converged ? exit_ok : exit_not_converged;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pairwise Markov random field inference and distributed detection"};
  app.require_subcommand(1);

  infer_args ia;
  CLI::App* infer = app.add_subcommand("infer", "approximate inference on a model file");
  infer->add_option("--model", ia.model_path, "model JSON file")->required();
  infer->add_option("--method", ia.method, "bp-sum | bp-max | mf | bethe");
  infer->add_option("--schedule", ia.schedule, "sync | async (message passing only)");
  infer->add_option("--tol", ia.tol, "convergence tolerance");
  infer->add_option("--max-iters", ia.max_iters, "iteration limit");
  infer->add_option("--damping", ia.damping, "message damping in [0,1)");
  infer->add_option("--seed", ia.seed, "seed for randomized restarts");
  infer->add_option("--threads", ia.threads, "worker threads (output is thread-count independent)");
  infer->add_option("--trace", ia.trace_path, "write per-iteration CSV trace to this file");
  infer->add_option("--out", ia.out_path, "write the result document here instead of stdout");

  oracle_args oa;
  CLI::App* oracle = app.add_subcommand("oracle", "exact enumeration: normalizer and marginals");
  oracle->add_option("--model", oa.model_path, "model JSON file")->required();
  oracle->add_option("--state-cap", oa.state_cap, "largest admissible state-space size")
      ->envname("BELIEFNET_STATE_CAP");
  oracle->add_option("--threads", oa.threads, "worker threads (output is thread-count independent)");
  oracle->add_option("--out", oa.out_path, "write the result document here instead of stdout");

  fdd_args fa;
  CLI::App* fdd = app.add_subcommand("fdd", "distributed hypothesis testing on a scenario file");
  fdd->add_option("--scenario", fa.scenario_path, "scenario JSON file")->required();
  fdd->add_option("--threads", fa.threads, "worker threads (output is thread-count independent)");
  fdd->add_option("--trace", fa.trace_path, "write per-iteration CSV trace to this file");
  fdd->add_option("--out", fa.out_path, "write the result document here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? exit_ok : exit_input_error;
  }

  try {
    if (infer->parsed()) return cmd_infer(ia);
    if (oracle->parsed()) return cmd_oracle(oa);
    if (fdd->parsed()) return cmd_fdd(fa);
    std::cerr << "no subcommand given\n";
    return exit_input_error;
  } catch (const beliefnet::state_cap_exceeded& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_cap_exceeded;
  } catch (const beliefnet::indefinite_compatibility& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_precondition;
  } catch (const beliefnet::io_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_input_error;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_input_error;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_input_error;
  }
}
