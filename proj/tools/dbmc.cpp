#include <sys/wait.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>

#include "dbmc/frontend.hpp"
#include "dbmc/harness.hpp"
#include "dbmc/net.hpp"
#include "dbmc/protocol.hpp"
#include "dbmc/si.hpp"

using namespace dbmc;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 3;

int exit_code(Verdict v) {
  switch (v) {
    case Verdict::Safe: return 0;
    case Verdict::Unsafe: return 1;
    case Verdict::Inconclusive: return 2;
  }
  return kExitUsage;
}

json sites_json(const std::set<DynamicCallsite>& s) {
  json j = json::array();
  for (const auto& c : s) j.push_back(site_to_json(c));
  return j;
}

struct Common {
  int depth = 2;
  std::string solver = default_solver_command();
  double solver_timeout = 60;
  double delta_c = kDefaultDeltaC;
  double k = kDefaultK;

  void add(CLI::App* app) {
    app->add_option("--depth", depth, "Loop and recursion unrolling depth")->check(CLI::PositiveNumber);
    app->add_option("--solver", solver, "SMT solver command line (default: $DBMC_SOLVER or 'z3 -in')");
    app->add_option("--solver-timeout", solver_timeout, "Per-check solver timeout in seconds")
        ->check(CLI::PositiveNumber);
    app->add_option("--delta-c", delta_c, "Base split interval in seconds")->check(CLI::PositiveNumber);
    app->add_option("--k", k, "Split slow-down factor when no client is idle")->check(CLI::PositiveNumber);
  }

  SolverOptions solver_options() const {
    SolverOptions o;
    o.command = solver;
    o.timeout = std::chrono::milliseconds(static_cast<long long>(solver_timeout * 1000));
    return o;
  }

  CoreProgram load(const std::string& file) const { return compile(read_file(file), depth); }
};

void print_verdict(Verdict v, const Trace& trace) {
  std::cout << "verdict: " << verdict_name(v) << "\n";
  if (v == Verdict::Unsafe && !trace.empty()) std::cout << "trace: " << to_string(trace) << "\n";
}

int cmd_seq(const Common& common, const std::string& file, bool log) {
  CoreProgram p = common.load(file);
  SolverSession session(common.solver_options());
  StepObserver observer;
  if (log) {
    observer = [](std::size_t round, const SIState& st, const SIOutcome* o) {
      json j{{"round", round}};
      if (!o) {
        j["open"] = sites_json(st.open);
      } else {
        j["under"] = check_status_name(o->under);
        if (o->over) j["over"] = check_status_name(*o->over);
        j["outcome"] = outcome_name(o->kind);
        j["inlined"] = sites_json(o->inlined_now);
        j["uc"] = sites_json(o->uc);
        j["open"] = sites_json(st.open);
        if (o->kind == SIOutcome::Kind::Inconclusive) j["reason"] = o->reason;
      }
      std::cout << j.dump() << "\n";
    };
  }
  SIResult r = run_sequential(p, session, observer);
  if (log) {
    std::cout << json{{"verdict", verdict_name(r.verdict)}, {"rounds", r.rounds}, {"trace", trace_to_json(r.trace)}}.dump()
              << "\n";
  } else {
    print_verdict(r.verdict, r.trace);
    std::cout << "rounds: " << r.rounds << "\ninlined: " << r.inlined.size() - 1 << "\n";
    if (r.verdict == Verdict::Inconclusive) std::cout << "reason: " << r.reason << "\n";
  }
  return exit_code(r.verdict);
}

int cmd_oracle(const Common& common, const std::string& file) {
  CoreProgram p = common.load(file);
  SolverSession session(common.solver_options());
  SIResult r = full_inline_oracle(p, session);
  print_verdict(r.verdict, r.trace);
  return exit_code(r.verdict);
}

void print_cluster_stats(const RunReport& r) {
  std::cout << "partitions: " << r.partitions_created << "\ndispatches: " << r.dispatch_count
            << "\nmax queue depth: " << r.max_queue_depth << "\n";
  if (r.virtual_makespan > 0) std::cout << "virtual makespan: " << r.virtual_makespan << "\n";
  for (const auto& c : r.clients)
    std::cout << "client " << c.id << ": splits " << c.splits << ", solved " << c.solved << ", inlined "
              << c.inlined.size() << "\n";
  double sum = 0;
  int n = 0;
  for (const auto& a : r.clients)
    for (const auto& b : r.clients)
      if (a.id != b.id)
        if (auto d = dissimilarity(a.inlined, b.inlined)) {
          sum += *d;
          ++n;
        }
  if (n) std::cout << "mean dissimilarity: " << std::fixed << std::setprecision(3) << sum / n << "\n";
}

struct RunArgs {
  std::size_t clients = 2;
  bool sim = false;
  std::uint64_t seed = 0;
  std::string strategy = "proof-guided";
  double timeout = 0;
};

int cmd_run(const Common& common, const std::string& file, const RunArgs& a) {
  CoreProgram p = common.load(file);
  if (a.sim) {
    ClusterOptions o;
    o.clients = a.clients;
    o.strategy = parse_strategy(a.strategy);
    o.seed = a.seed;
    o.delta_c = common.delta_c;
    o.k = common.k;
    o.solver = common.solver_options();
    RunReport r = run_simulated(p, o);
    print_verdict(r.verdict, r.trace);
    print_cluster_stats(r);
    return exit_code(r.verdict);
  }

  Listener listener(0, true);
  std::vector<pid_t> children;
  for (std::size_t i = 0; i < a.clients; ++i) {
    std::vector<std::string> args = {"dbmc",       "client",         file,
                                     "--server",   "127.0.0.1:" + std::to_string(listener.port()),
                                     "--strategy", a.strategy,       "--seed",
                                     std::to_string(a.seed), "--id", std::to_string(i + 1),
                                     "--depth",    std::to_string(common.depth), "--solver",
                                     common.solver, "--solver-timeout", std::to_string(common.solver_timeout),
                                     "--delta-c",  std::to_string(common.delta_c), "--k",
                                     std::to_string(common.k)};
    pid_t pid = ::fork();
    if (pid < 0) throw std::runtime_error("fork failed");
    if (pid == 0) {
      std::vector<char*> argv;
      for (auto& s : args) argv.push_back(s.data());
      argv.push_back(nullptr);
      ::execv("/proc/self/exe", argv.data());
      ::_exit(kExitUsage);
    }
    children.push_back(pid);
  }
  ServeOptions so;
  so.config = {a.clients, common.delta_c, common.k};
  so.timeout = a.timeout;
  ServeResult r = serve(listener, so);
  for (pid_t pid : children) {
    int status = 0;
    ::waitpid(pid, &status, 0);
  }
  print_verdict(r.verdict, r.trace);
  std::cout << "partitions: " << r.partitions_created << "\ndispatches: " << r.dispatch_count
            << "\nmax queue depth: " << r.max_queue_depth << "\n";
  for (const auto& [id, s] : r.stats)
    std::cout << "client " << id << ": splits " << s.splits << ", solved " << s.solved << ", inlined "
              << s.inlined.size() << "\n";
  return exit_code(r.verdict);
}

int cmd_server(const Common& common, std::uint16_t port, std::size_t expected, double timeout, bool verbose) {
  Listener listener(port);
  std::cerr << "listening on port " << listener.port() << "\n";
  ServeOptions so;
  so.config = {expected, common.delta_c, common.k};
  so.timeout = timeout;
  so.verbose = verbose;
  ServeResult r = serve(listener, so);
  print_verdict(r.verdict, r.trace);
  return exit_code(r.verdict);
}

int cmd_client(const Common& common, const std::string& file, const std::string& endpoint,
               const std::string& strategy, std::uint64_t seed, std::optional<ClientId> id) {
  CoreProgram p = common.load(file);
  ClientOptions o;
  if (id) {
    o.id = *id;
  } else {
    std::random_device rd;
    o.id = (static_cast<ClientId>(rd()) << 32) ^ rd() ^ static_cast<ClientId>(::getpid());
  }
  o.strategy = parse_strategy(strategy);
  o.seed = seed;
  o.delta_c = common.delta_c;
  o.k = common.k;
  o.solver = common.solver_options();
  auto [host, port] = parse_endpoint(endpoint);
  run_tcp_client(p, o, host, port);
  return 0;
}

int cmd_gen(std::uint64_t seed, std::size_t n, const std::string& dir, const CorpusShape& shape) {
  std::filesystem::create_directories(dir);
  auto sources = gen_corpus(seed, n, shape);
  for (std::size_t i = 0; i < sources.size(); ++i) {
    std::ostringstream name;
    name << "prog_" << std::setw(3) << std::setfill('0') << i << ".dbmc";
    std::ofstream(std::filesystem::path(dir) / name.str()) << sources[i];
  }
  std::cout << "wrote " << sources.size() << " programs to " << dir << "\n";
  return 0;
}

int cmd_report(const Common& common, std::vector<std::string> files, std::size_t runs) {
  std::vector<std::pair<std::string, std::string>> programs;
  if (files.empty()) {
    auto sources = gen_corpus(1, 10);
    for (std::size_t i = 0; i < sources.size(); ++i) programs.push_back({"gen1_" + std::to_string(i), sources[i]});
  } else {
    for (const auto& f : files) programs.push_back({f, read_file(f)});
  }
  std::cout << "program,config,seed,verdict,virtual_makespan,wall_seconds,splits\n";
  for (const auto& [name, src] : programs) {
    CoreProgram p = compile(src, common.depth);
    auto row = [&](const std::string& config, std::size_t clients, Strategy s, std::uint64_t seed) {
      ClusterOptions o;
      o.clients = clients;
      o.strategy = s;
      o.seed = seed;
      o.delta_c = common.delta_c;
      o.k = common.k;
      o.solver = common.solver_options();
      RunReport r = run_simulated(p, o);
      std::uint64_t splits = 0;
      for (const auto& c : r.clients) splits += c.splits;
      std::cout << name << "," << config << "," << seed << "," << verdict_name(r.verdict) << ","
                << r.virtual_makespan << "," << r.wall_seconds << "," << splits << "\n";
    };
    row("pg-1", 1, Strategy::ProofGuided, 0);
    row("pg-4", 4, Strategy::ProofGuided, 0);
    for (std::uint64_t seed = 1; seed <= runs; ++seed) {
      row("random-4", 4, Strategy::Random, seed);
      row("pg-4-seeded", 4, Strategy::ProofGuided, seed);
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed bounded model checking by stratified inlining"};
  app.require_subcommand(1);
  Common common;
  std::string file;

  auto* seq = app.add_subcommand("seq", "Run sequential stratified inlining");
  seq->add_option("file", file, "Program (.dbmc)")->required()->check(CLI::ExistingFile);
  bool log = false;
  seq->add_flag("--log", log, "Print one JSON line per round");
  common.add(seq);

  auto* oracle = app.add_subcommand("oracle", "Inline everything and decide with one check");
  oracle->add_option("file", file, "Program (.dbmc)")->required()->check(CLI::ExistingFile);
  common.add(oracle);

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "Run a server with N clients");
  run->add_option("file", file, "Program (.dbmc)")->required()->check(CLI::ExistingFile);
  run->add_option("--clients", run_args.clients, "Number of clients")->check(CLI::PositiveNumber);
  run->add_flag("--sim", run_args.sim, "Simulate the cluster in-process with a seeded scheduler");
  run->add_option("--seed", run_args.seed, "Scheduler and strategy seed");
  run->add_option("--strategy", run_args.strategy, "proof-guided or random");
  run->add_option("--timeout", run_args.timeout, "Wall-clock limit in seconds (process mode)");
  common.add(run);

  std::uint16_t port = 0;
  std::size_t expected = 1;
  double timeout = 0;
  bool verbose = false;
  auto* server = app.add_subcommand("server", "Run the coordinator");
  server->add_option("--port", port, "TCP port")->required();
  server->add_option("--clients-expected", expected, "Clients to wait for before granting the root")
      ->check(CLI::PositiveNumber);
  server->add_option("--timeout", timeout, "Wall-clock limit in seconds; 0 disables it");
  server->add_flag("--verbose", verbose, "Log every message");
  common.add(server);

  std::string endpoint, strategy = "proof-guided";
  std::uint64_t seed = 0;
  std::optional<ClientId> id;
  auto* client = app.add_subcommand("client", "Run one verification client");
  client->add_option("file", file, "Program (.dbmc)")->required()->check(CLI::ExistingFile);
  client->add_option("--server", endpoint, "HOST:PORT")->required();
  client->add_option("--strategy", strategy, "proof-guided or random");
  client->add_option("--seed", seed, "Random strategy seed");
  client->add_option("--id", id, "Client id (default: random)");
  common.add(client);

  std::size_t n = 10;
  std::string out_dir;
  CorpusShape shape;
  auto* gen = app.add_subcommand("gen", "Generate a corpus of programs");
  gen->add_option("--seed", seed, "Generator seed");
  gen->add_option("-n", n, "Number of programs")->check(CLI::PositiveNumber);
  gen->add_option("-o", out_dir, "Output directory")->required();
  gen->add_option("--levels", shape.depth, "Procedure levels below main")->check(CLI::PositiveNumber);
  gen->add_option("--fanout", shape.fanout, "Calls per procedure, at most")->check(CLI::PositiveNumber);
  gen->add_option("--max-sites", shape.max_sites, "Largest call tree")->check(CLI::PositiveNumber);

  bool csv = false;
  std::vector<std::string> files;
  std::size_t runs = 5;
  auto* report = app.add_subcommand("report", "Emit speed-up and strategy comparison rows");
  report->add_flag("--csv", csv, "CSV output (the only format)");
  report->add_option("files", files, "Programs; default: 10 generated ones")->check(CLI::ExistingFile);
  report->add_option("--runs", runs, "Seeded runs per strategy");
  common.add(report);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*seq) return cmd_seq(common, file, log);
    if (*oracle) return cmd_oracle(common, file);
    if (*run) return cmd_run(common, file, run_args);
    if (*server) return cmd_server(common, port, expected, timeout, verbose);
    if (*client) return cmd_client(common, file, endpoint, strategy, seed, id);
    if (*gen) return cmd_gen(seed, n, out_dir, shape);
    if (*report) return cmd_report(common, files, runs);
  } catch (const FrontendError& e) {
    std::cerr << file << ":" << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
