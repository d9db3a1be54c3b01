#include "qinv/external.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <sstream>

namespace qinv {

namespace {

std::string sym(const std::string& name) { return "|" + name + "|"; }

void print_term(std::ostream& out, const Term& t) {
  if (t.kind == Term::Kind::Var || t.args.empty()) {
    out << sym(t.name);
    return;
  }
  out << "(" << sym(t.name);
  for (const auto& a : t.args) {
    out << " ";
    print_term(out, *a);
  }
  out << ")";
}

void print_smt(std::ostream& out, const Formula& f) {
  auto nary = [&](const char* op, const char* empty) {
    if (f.kids.empty()) {
      out << empty;
      return;
    }
    out << "(" << op;
    for (const auto& k : f.kids) {
      out << " ";
      print_smt(out, *k);
    }
    out << ")";
  };
  switch (f.kind) {
    case Formula::Kind::And: nary("and", "true"); break;
    case Formula::Kind::Or: nary("or", "false"); break;
    case Formula::Kind::Not: nary("not", ""); break;
    case Formula::Kind::Implies: nary("=>", ""); break;
    case Formula::Kind::Iff: nary("=", ""); break;
    case Formula::Kind::Rel:
      if (f.terms.empty()) {
        out << sym(f.name);
      } else {
        out << "(" << sym(f.name);
        for (const auto& t : f.terms) {
          out << " ";
          print_term(out, *t);
        }
        out << ")";
      }
      break;
    case Formula::Kind::Eq:
      out << "(= ";
      print_term(out, *f.terms[0]);
      out << " ";
      print_term(out, *f.terms[1]);
      out << ")";
      break;
    case Formula::Kind::Forall:
    case Formula::Kind::Exists:
      out << (f.kind == Formula::Kind::Forall ? "(forall (" : "(exists (");
      for (std::size_t i = 0; i < f.vars.size(); ++i)
        out << (i ? " " : "") << "(" << sym(f.vars[i].name) << " " << sym(f.vars[i].sort) << ")";
      out << ") ";
      print_smt(out, *f.kids[0]);
      out << ")";
      break;
  }
}

std::string strip(const std::string& a) {
  if (a.size() >= 2 && a.front() == '|' && a.back() == '|') return a.substr(1, a.size() - 2);
  return a;
}

}  // namespace

std::string to_smtlib(const Query& q, bool bounded) {
  const Signature& sig = *q.sig;
  std::ostringstream out;
  out << "(set-option :produce-models true)\n";
  for (const auto& s : sig.sorts()) out << "(declare-sort " << sym(s) << " 0)\n";
  for (const auto& s : sig.symbols()) {
    out << "(declare-fun " << sym(s.name) << " (";
    for (std::size_t i = 0; i < s.args.size(); ++i) out << (i ? " " : "") << sym(sig.sort_name(s.args[i]));
    out << ") " << (s.kind == SymbolKind::Relation ? "Bool" : sym(sig.sort_name(s.result))) << ")\n";
  }
  if (bounded) {
    for (std::size_t s = 0; s < sig.sorts().size(); ++s) {
      int b = s < q.bounds.size() ? q.bounds[s] : 1;
      const std::string& name = sig.sorts()[s];
      for (int e = 0; e < b; ++e) out << "(declare-fun " << sym("@" + name + std::to_string(e)) << " () " << sym(name) << ")\n";
      out << "(assert (forall ((x " << sym(name) << ")) (or";
      for (int e = 0; e < b; ++e) out << " (= x " << sym("@" + name + std::to_string(e)) << ")";
      out << ")))\n";
    }
  }
  for (const auto& a : q.assertions) {
    out << "(assert ";
    print_smt(out, *a);
    out << ")\n";
  }
  out << "(check-sat)\n(get-model)\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// Model reading.

namespace {

struct ModelReader {
  const Signature& sig;
  struct Def {
    std::vector<std::string> params;
    std::vector<std::string> param_sorts;
    std::string result;
    const SExpr* body = nullptr;
  };
  std::map<std::string, Def> defs;
  std::map<std::string, std::pair<std::string, int>> elements;  // name -> (sort, index)
  std::map<std::string, std::vector<std::string>> universe;

  explicit ModelReader(const Signature& s) : sig(s) {}

  [[noreturn]] static void bad(const std::string& m) { throw Error("model: " + m); }

  void add_element(const std::string& name, const std::string& sort) {
    if (elements.count(name) || !sig.find_sort(sort)) return;
    auto& u = universe[sort];
    elements[name] = {sort, static_cast<int>(u.size())};
    u.push_back(name);
  }

  void scan(const SExpr& e) {
    if (e.is_atom) {
      std::string a = strip(e.atom);
      auto pos = a.find("!val!");
      if (pos != std::string::npos) add_element(a, a.substr(0, pos));
      return;
    }
    if (e.list.size() == 3 && e.list[0].is_atom && e.list[0].atom == "as" && e.list[1].is_atom &&
        e.list[2].is_atom)
      add_element(strip(e.list[1].atom), strip(e.list[2].atom));
    for (const auto& k : e.list) scan(k);
  }

  void read(const std::vector<SExpr>& forms) {
    std::vector<const SExpr*> items;
    for (const auto& f : forms) {
      if (f.is_atom) continue;
      if (!f.list.empty() && f.list[0].is_atom && (f.list[0].atom == "define-fun" || f.list[0].atom == "declare-fun"))
        items.push_back(&f);
      else
        for (const auto& g : f.list)
          if (!g.is_atom && !g.list.empty() && g.list[0].is_atom) items.push_back(&g);
    }
    for (const SExpr* it : items) {
      const auto& l = it->list;
      const std::string head = l[0].atom;
      if (head == "declare-fun" && l.size() == 4 && !l[2].is_atom && l[2].list.empty() && l[3].is_atom)
        add_element(strip(l[1].atom), strip(l[3].atom));
      if (head != "define-fun") continue;
      if (l.size() != 5 || !l[1].is_atom || l[2].is_atom || !l[3].is_atom) bad("malformed define-fun");
      Def d;
      for (const auto& p : l[2].list) {
        if (p.is_atom || p.list.size() != 2 || !p.list[0].is_atom || !p.list[1].is_atom) bad("malformed parameter");
        d.params.push_back(strip(p.list[0].atom));
        d.param_sorts.push_back(strip(p.list[1].atom));
      }
      d.result = strip(l[3].atom);
      d.body = &l[4];
      defs[strip(l[1].atom)] = d;
      scan(l[4]);
    }
    for (const auto& s : sig.sorts())
      if (universe[s].empty()) add_element("@fresh_" + s, s);
  }

  struct Value {
    bool is_bool = false;
    bool b = false;
    std::string elem;
    bool operator==(const Value& o) const { return is_bool == o.is_bool && b == o.b && elem == o.elem; }
  };

  Value eval(const SExpr& e, const std::map<std::string, Value>& env, int depth = 0) {
    if (depth > 2000) bad("definition nesting too deep");
    if (e.is_atom) {
      std::string a = strip(e.atom);
      if (a == "true" || a == "false") return {true, a == "true", {}};
      if (auto it = env.find(a); it != env.end()) return it->second;
      if (elements.count(a)) return {false, false, a};
      if (defs.count(a)) return call(a, {}, depth + 1);
      bad("unknown atom " + a);
    }
    if (e.list.empty() || !e.list[0].is_atom) bad("unexpected term");
    const std::string op = strip(e.list[0].atom);
    auto arg = [&](std::size_t i) { return eval(e.list.at(i), env, depth + 1); };
    if (op == "as") return arg(1);
    if (op == "ite") return arg(1).b ? arg(2) : arg(3);
    if (op == "not") return {true, !arg(1).b, {}};
    if (op == "and" || op == "or") {
      bool is_and = op == "and";
      for (std::size_t i = 1; i < e.list.size(); ++i)
        if (arg(i).b != is_and) return {true, !is_and, {}};
      return {true, is_and, {}};
    }
    if (op == "=>") return {true, !arg(1).b || arg(2).b, {}};
    if (op == "=") {
      Value first = arg(1);
      for (std::size_t i = 2; i < e.list.size(); ++i)
        if (!(arg(i) == first)) return {true, false, {}};
      return {true, true, {}};
    }
    if (op == "distinct") {
      std::vector<Value> vs;
      for (std::size_t i = 1; i < e.list.size(); ++i) vs.push_back(arg(i));
      for (std::size_t i = 0; i < vs.size(); ++i)
        for (std::size_t j = i + 1; j < vs.size(); ++j)
          if (vs[i] == vs[j]) return {true, false, {}};
      return {true, true, {}};
    }
    if (op == "let") {
      if (e.list.size() != 3 || e.list[1].is_atom) bad("malformed let");
      auto inner = env;
      for (const auto& b : e.list[1].list) {
        if (b.is_atom || b.list.size() != 2) bad("malformed let binding");
        inner[strip(b.list[0].atom)] = eval(b.list[1], env, depth + 1);
      }
      return eval(e.list[2], inner, depth + 1);
    }
    if (defs.count(op)) {
      std::vector<Value> args;
      for (std::size_t i = 1; i < e.list.size(); ++i) args.push_back(arg(i));
      return call(op, args, depth + 1);
    }
    bad("unsupported operator " + op);
  }

  Value call(const std::string& name, const std::vector<Value>& args, int depth) {
    const Def& d = defs.at(name);
    if (d.params.size() != args.size()) bad("arity mismatch for " + name);
    std::map<std::string, Value> env;
    for (std::size_t i = 0; i < args.size(); ++i) env[d.params[i]] = args[i];
    return eval(*d.body, env, depth);
  }

  Structure build(const std::shared_ptr<const Signature>& sp) {
    std::vector<int> sizes;
    for (const auto& s : sig.sorts()) sizes.push_back(static_cast<int>(universe[s].size()));
    Structure m(sp, sizes);
    for (std::size_t id = 0; id < sig.symbols().size(); ++id) {
      const auto sid = static_cast<SymbolId>(id);
      const Symbol& s = sig.symbol(sid);
      auto it = defs.find(s.name);
      for (std::size_t i = 0; i < m.table_size(sid); ++i) {
        if (it == defs.end()) continue;  // unconstrained: keep the default
        std::vector<int> tuple = m.tuple(sid, i);
        std::vector<Value> args;
        for (std::size_t a = 0; a < tuple.size(); ++a)
          args.push_back({false, false, universe[sig.sort_name(s.args[a])][static_cast<std::size_t>(tuple[a])]});
        Value v = call(s.name, args, 0);
        if (s.kind == SymbolKind::Relation) {
          if (!v.is_bool) bad("relation " + s.name + " has a non-boolean value");
          m.set_raw(sid, i, v.b ? 1 : 0);
        } else {
          auto e = elements.find(v.elem);
          if (v.is_bool || e == elements.end() || e->second.first != sig.sort_name(s.result))
            bad("bad value for " + s.name);
          m.set_raw(sid, i, e->second.second);
        }
      }
    }
    return m;
  }
};

}  // namespace

Structure parse_smt_model(std::string_view text, const std::shared_ptr<const Signature>& sig) {
  std::vector<SExpr> forms;
  try {
    forms = read_sexprs(text);
  } catch (const Error& e) {
    throw Error(std::string("model: ") + e.what());
  }
  ModelReader r(*sig);
  r.read(forms);
  return r.build(sig);
}

// ---------------------------------------------------------------------------
// Processes.

namespace {

struct Child {
  pid_t pid = -1;
  int out = -1;
  std::string buf;
  bool done = false;
};

Child spawn(const std::string& command, const std::string& input_path) {
  int fds[2];
  if (pipe(fds) != 0) throw Error("pipe failed");
  pid_t pid = fork();
  if (pid < 0) throw Error("fork failed");
  if (pid == 0) {
    setpgid(0, 0);
    int in = open(input_path.c_str(), O_RDONLY);
    if (in >= 0) dup2(in, 0);
    dup2(fds[1], 1);
    int devnull = open("/dev/null", O_WRONLY);
    if (devnull >= 0) dup2(devnull, 2);
    close(fds[0]);
    close(fds[1]);
    execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  close(fds[1]);
  fcntl(fds[0], F_SETFL, O_NONBLOCK);
  Child c;
  c.pid = pid;
  c.out = fds[0];
  return c;
}

void reap(Child& c) {
  if (c.pid > 0) {
    kill(-c.pid, SIGKILL);
    kill(c.pid, SIGKILL);
    waitpid(c.pid, nullptr, 0);
    c.pid = -1;
  }
  if (c.out >= 0) {
    close(c.out);
    c.out = -1;
  }
}

/// First word of the solver output, if complete.
std::string verdict_of(const std::string& buf) {
  std::istringstream in(buf);
  std::string w;
  in >> w;
  return w;
}

}  // namespace

OracleResult external_check(const Query& q, const ExternalConfig& cfg, std::stop_token stop) {
  OracleResult res;
  res.verdict = Verdict::Unknown;
  char path[] = "/tmp/qinv-smt-XXXXXX";
  int fd = mkstemp(path);
  if (fd < 0) throw Error("cannot create a temporary file");
  std::string script = to_smtlib(q, cfg.bounded);
  if (write(fd, script.data(), script.size()) != static_cast<ssize_t>(script.size())) {
    close(fd);
    unlink(path);
    throw Error("cannot write the query");
  }
  close(fd);
  bool parse_failed = false;

  for (int round = 0; round < std::max(1, cfg.rounds); ++round) {
    std::vector<Child> kids;
    for (int i = 0; i < std::max(1, cfg.processes); ++i) kids.push_back(spawn(cfg.command, path));
    auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(cfg.restart_seconds);
    std::optional<std::string> answer;
    while (!answer && std::chrono::steady_clock::now() < deadline && !stop.stop_requested()) {
      std::vector<pollfd> fds;
      std::vector<std::size_t> which;
      for (std::size_t i = 0; i < kids.size(); ++i)
        if (!kids[i].done) {
          fds.push_back({kids[i].out, POLLIN, 0});
          which.push_back(i);
        }
      if (fds.empty()) break;
      poll(fds.data(), fds.size(), 20);
      for (std::size_t j = 0; j < fds.size(); ++j) {
        if (!(fds[j].revents & (POLLIN | POLLHUP | POLLERR))) continue;
        Child& c = kids[which[j]];
        char tmp[4096];
        ssize_t n;
        while ((n = read(c.out, tmp, sizeof tmp)) > 0) c.buf.append(tmp, static_cast<std::size_t>(n));
        if (n == 0) {  // end of output
          c.done = true;
          std::string v = verdict_of(c.buf);
          if (v == "sat" || v == "unsat") answer = c.buf;
        }
      }
    }
    for (auto& c : kids) reap(c);
    if (stop.stop_requested()) {
      res.reason = "cancelled";
      break;
    }
    if (!answer) continue;
    std::string v = verdict_of(*answer);
    if (v == "unsat") {
      res.verdict = Verdict::Unsat;
      res.reason.clear();
      unlink(path);
      return res;
    }
    try {
      std::string rest = answer->substr(answer->find("sat") + 3);
      Structure m = parse_smt_model(rest, q.sig);
      bool ok = true;
      for (const auto& a : q.assertions)
        if (!qinv::eval(m, *a)) ok = false;
      if (!ok) throw Error("model does not satisfy the query");
      res.verdict = Verdict::Model;
      res.model = std::move(m);
      res.reason.clear();
      unlink(path);
      return res;
    } catch (const Error&) {
      parse_failed = true;
      break;
    }
  }
  unlink(path);
  if (res.reason != "cancelled") res.reason = parse_failed ? "model-parse" : "external-timeout";
  return res;
}

VerifyReport verify_invariant_external(const TransitionSystem& sys, const std::vector<FormulaPtr>& inv,
                                       const ExternalConfig& cfg) {
  VerifyReport rep;
  auto check = [&](const Query& q, int which, const std::string& what) {
    OracleResult r = external_check(q, cfg);
    if (r.unsat()) return true;
    rep.ok = false;
    rep.failed = r.sat() ? which : 0;
    rep.message = (r.sat() ? what : what + " (solver: " + r.reason + ")");
    return false;
  };
  std::vector<int> bounds(sys.sig->sorts().size(), 3);
  for (const auto& p : inv)
    if (!check({sys.sig, {sys.ax(), sys.init(), negate(p)}, bounds}, 1, "initiation fails for " + print_formula(*p)))
      return rep;
  for (const auto& p : inv) {
    std::vector<FormulaPtr> as{sys.ax()};
    for (const auto& i : inv) as.push_back(i);
    as.push_back(sys.tr());
    as.push_back(sys.ax_primed());
    as.push_back(negate(prime(p, *sys.sig)));
    if (!check({sys.sig2, as, bounds}, 2, "consecution fails for " + print_formula(*p))) return rep;
  }
  std::vector<FormulaPtr> as{sys.ax()};
  for (const auto& i : inv) as.push_back(i);
  as.push_back(negate(sys.safe()));
  check({sys.sig, as, bounds}, 3, "the invariant does not imply safety");
  return rep;
}

}  // namespace qinv
