#include "qinv/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <sstream>
#include <thread>

#include "qinv/epr.hpp"
#include "qinv/external.hpp"
#include "qinv/pdr.hpp"
#include "qinv/syntax.hpp"

namespace qinv {

namespace {

/// "3" (every sort) or "node=3,quorum=2" (others default to 3).
std::vector<int> parse_bounds(const std::string& text, const Signature& sig) {
  std::vector<int> out(sig.sorts().size(), 3);
  if (text.empty()) return out;
  if (text.find('=') == std::string::npos) {
    int b = std::stoi(text);
    if (b < 1) throw Error("bound must be positive");
    std::fill(out.begin(), out.end(), b);
    return out;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto eq = item.find('=');
    if (eq == std::string::npos) throw Error("malformed bound '" + item + "'");
    auto sort = sig.find_sort(item.substr(0, eq));
    if (!sort) throw Error("unknown sort in bound '" + item + "'");
    int b = std::stoi(item.substr(eq + 1));
    if (b < 1) throw Error("bound must be positive");
    out[static_cast<std::size_t>(*sort)] = b;
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Infer quantified inductive invariants of first-order transition systems"};
  std::string file, mode_str = "fol", bound_str, log_path, verify_path, external;
  int threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  std::uint64_t seed = 0;
  int max_depth = 6, k = 0, lits = 5;
  double timeout = 600;
  bool sequential = false, audit = false;
  app.add_option("file", file, "transition system (.fol)")->required();
  app.add_option("--mode", mode_str, "universal, epr or fol")
      ->check(CLI::IsMember({"universal", "epr", "fol"}));
  auto* threads_opt = app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "random seed");
  app.add_option("--bound", bound_str, "universe bound: N or sort=N,...");
  app.add_option("--max-depth", max_depth, "maximum quantifier depth")->check(CLI::Range(0, 12));
  app.add_option("--timeout", timeout, "seconds")->check(CLI::PositiveNumber);
  app.add_option("--k", k, "pDNF terms")->check(CLI::Range(1, 8));
  app.add_option("--literals-per-cube", lits, "literal cap for cubes after the first")->check(CLI::Range(1, 32));
  app.add_option("--log", log_path, "JSON-lines event log");
  app.add_option("--verify-only", verify_path, "check a candidate invariant and exit");
  app.add_flag("--sequential", sequential, "deterministic single-threaded mode");
  app.add_option("--external-solver", external, "SMT-LIB2 solver command for unbounded verification");
  app.add_flag("--audit", audit, "re-check frame invariants after every change");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  }
  if (sequential && threads_opt->count() > 0 && threads > 1) {
    err << "error: --sequential conflicts with --threads " << threads << "\n";
    return 3;
  }

  try {
    TransitionSystem sys = load_system(file);
    Mode mode = mode_str == "universal" ? Mode::Universal : mode_str == "epr" ? Mode::Epr : Mode::Fol;
    std::vector<int> bounds = parse_bounds(bound_str, *sys.sig);
    ExternalConfig ext;
    ext.command = external;

    if (!verify_path.empty()) {
      auto inv = parse_formula_list(read_file(verify_path), *sys.sig);
      VerifyReport v = verify_invariant(sys, inv, bounds);
      if (v.ok && !external.empty()) v = verify_invariant_external(sys, inv, ext);
      nlohmann::ordered_json j{{"result", v.ok ? "valid" : "invalid"}, {"lemmas", inv.size()}};
      if (!v.ok) j["reason"] = v.message;
      out << j.dump() << "\n";
      if (v.ok) return 0;
      return v.failed == 0 ? 2 : 1;
    }

    PdrConfig cfg;
    cfg.ig.mode = mode;
    cfg.ig.max_depth = max_depth;
    cfg.ig.k = k;
    cfg.ig.literals_per_cube = lits;
    if (mode == Mode::Epr) {
      EprCheck c = check_epr_system(sys);
      if (!c.ok) {
        err << "error: " << c.message << "\n";
        return 3;
      }
      cfg.ig.allowed = c.allowed;
    }
    cfg.sequential = sequential;
    cfg.ig.logical_time = sequential;
    cfg.ig.workers = sequential ? 1 : std::max(1, threads / 2);
    cfg.ig.quantum = sequential ? 12 : 500;
    cfg.bounds = bounds;
    cfg.seed = seed;
    cfg.timeout = timeout;
    cfg.audit = audit;
    std::ofstream log_file;
    if (!log_path.empty()) {
      log_file.open(log_path);
      if (!log_file) throw Error("cannot write " + log_path);
      cfg.log = &log_file;
    }

    Engine engine(sys, cfg);
    RunResult r = engine.run();
    if (r.kind == RunResult::Kind::Invariant && !external.empty()) {
      VerifyReport v = verify_invariant_external(sys, r.invariant, ext);
      if (!v.ok) {
        r.kind = RunResult::Kind::VerifyFailed;
        r.message = "external verification failed: " + v.message;
      }
    }
    nlohmann::ordered_json stats;
    switch (r.kind) {
      case RunResult::Kind::Invariant:
        for (const auto& f : r.invariant) out << print_formula(*f) << "\n";
        stats["result"] = "invariant";
        break;
      case RunResult::Kind::Unsafe:
        for (std::size_t i = 0; i < r.trace.size(); ++i)
          out << "; state " << i << "\n" << r.trace[i].to_string() << "\n";
        stats["result"] = "unsafe";
        stats["trace_length"] = r.trace.size();
        break;
      case RunResult::Kind::Timeout: stats["result"] = "timeout"; break;
      case RunResult::Kind::VerifyFailed: stats["result"] = "unknown"; break;
    }
    stats["message"] = r.message;
    stats["lemmas"] = r.invariant.size();
    stats["learned"] = r.stats.learned;
    stats["ig_queries"] = r.stats.ig_queries;
    stats["oracle_calls"] = r.stats.oracle_calls;
    stats["alternation_lemmas"] = r.stats.alternation_lemmas;
    if (audit) {
      stats["audit_checks"] = r.stats.audit_checks;
      stats["audit_violations"] = r.stats.audit_violations;
    }
    stats["wall_seconds"] = r.stats.wall_seconds;
    out << stats.dump() << "\n";
    switch (r.kind) {
      case RunResult::Kind::Invariant: return 0;
      case RunResult::Kind::Unsafe: return 1;
      default: return 2;
    }
  } catch (const ParseError& e) {
    err << file << ":" << e.what() << "\n";
    return 3;
  } catch (const SortError& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace qinv
