#include "qinv/oracle.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

namespace qinv {

namespace {

struct VecHash {
  std::size_t operator()(const std::vector<int>& v) const {
    std::size_t h = v.size();
    for (int x : v) h ^= static_cast<std::size_t>(x) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h;
  }
};

/// A ground term: either a known element or one literal per element.
struct GTerm {
  int concrete = -1;
  std::vector<int> lits;
};

}  // namespace

struct Grounder::Impl {
  std::shared_ptr<const Signature> sig;
  std::vector<int> bounds;
  CdclSolver sat;
  int T = 0;  // literal fixed to true
  std::vector<std::vector<int>> presence;
  std::vector<std::vector<int>> table;  // relations: one var per tuple; others: tuple*B + value
  std::unordered_map<std::vector<int>, int, VecHash> gates;
  std::unordered_multimap<std::size_t, std::pair<FormulaPtr, int>> guards;
  std::size_t guard_count = 0;
  std::int64_t calls = 0;

  Impl(std::shared_ptr<const Signature> s, std::vector<int> b) : sig(std::move(s)), bounds(std::move(b)) {
    if (bounds.size() != sig->sorts().size()) throw Error("grounder: wrong number of bounds");
    for (int x : bounds)
      if (x < 1) throw Error("grounder: bounds must be positive");
    T = sat.new_var();
    sat.add_clause({T});
    presence.resize(bounds.size());
    for (std::size_t s = 0; s < bounds.size(); ++s) {
      presence[s].push_back(T);
      for (int e = 1; e < bounds[s]; ++e) {
        int p = sat.new_var();
        sat.add_clause({-p, presence[s].back()});
        presence[s].push_back(p);
      }
    }
    const auto& syms = sig->symbols();
    table.resize(syms.size());
    for (std::size_t id = 0; id < syms.size(); ++id) {
      const Symbol& sym = syms[id];
      std::size_t n = tuples(sym);
      std::vector<int> tup(sym.args.size(), 0);
      for (std::size_t i = 0; i < n; ++i) {
        decode_tuple(sym, i, tup);
        if (sym.kind == SymbolKind::Relation) {
          int v = sat.new_var();
          table[id].push_back(v);
          for (std::size_t a = 0; a < tup.size(); ++a)
            if (tup[a] > 0) sat.add_clause({-v, presence[static_cast<std::size_t>(sym.args[a])][static_cast<std::size_t>(tup[a])]});
        } else {
          int B = bounds[static_cast<std::size_t>(sym.result)];
          std::vector<int> vals;
          for (int v = 0; v < B; ++v) vals.push_back(sat.new_var());
          sat.add_clause(vals);
          for (int v = 0; v < B; ++v)
            for (int w = v + 1; w < B; ++w) sat.add_clause({-vals[static_cast<std::size_t>(v)], -vals[static_cast<std::size_t>(w)]});
          for (int v = 1; v < B; ++v)
            sat.add_clause({-vals[static_cast<std::size_t>(v)], presence[static_cast<std::size_t>(sym.result)][static_cast<std::size_t>(v)]});
          table[id].insert(table[id].end(), vals.begin(), vals.end());
        }
      }
    }
    // Constants take values in order of first use: a constant may only take
    // value v > 0 if an earlier constant of its sort has value v - 1.
    for (std::size_t s = 0; s < bounds.size(); ++s) {
      std::vector<std::size_t> consts;
      for (std::size_t id = 0; id < syms.size(); ++id)
        if (syms[id].kind == SymbolKind::Constant && syms[id].result == static_cast<SortId>(s)) consts.push_back(id);
      for (std::size_t j = 0; j < consts.size(); ++j)
        for (int v = 1; v < bounds[s]; ++v) {
          std::vector<int> c{-table[consts[j]][static_cast<std::size_t>(v)]};
          for (std::size_t i = 0; i < j; ++i) c.push_back(table[consts[i]][static_cast<std::size_t>(v - 1)]);
          sat.add_clause(c);
        }
    }
  }

  std::size_t tuples(const Symbol& sym) const {
    std::size_t n = 1;
    for (SortId a : sym.args) n *= static_cast<std::size_t>(bounds[static_cast<std::size_t>(a)]);
    return n;
  }
  void decode_tuple(const Symbol& sym, std::size_t idx, std::vector<int>& out) const {
    for (std::size_t i = sym.args.size(); i-- > 0;) {
      auto b = static_cast<std::size_t>(bounds[static_cast<std::size_t>(sym.args[i])]);
      out[i] = static_cast<int>(idx % b);
      idx /= b;
    }
  }
  std::size_t encode_tuple(const Symbol& sym, const std::vector<int>& tup) const {
    std::size_t idx = 0;
    for (std::size_t i = 0; i < tup.size(); ++i)
      idx = idx * static_cast<std::size_t>(bounds[static_cast<std::size_t>(sym.args[i])]) + static_cast<std::size_t>(tup[i]);
    return idx;
  }

  // -- gates --------------------------------------------------------------

  int mk_and(std::vector<int> lits) {
    std::vector<int> xs;
    for (int l : lits) {
      if (l == T) continue;
      if (l == -T) return -T;
      xs.push_back(l);
    }
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    for (std::size_t i = 0; i + 1 < xs.size(); ++i)
      if (std::binary_search(xs.begin() + static_cast<std::ptrdiff_t>(i) + 1, xs.end(), -xs[i])) return -T;
    if (xs.empty()) return T;
    if (xs.size() == 1) return xs[0];
    auto it = gates.find(xs);
    if (it != gates.end()) return it->second;
    int g = sat.new_var();
    std::vector<int> big{g};
    for (int l : xs) {
      sat.add_clause({-g, l});
      big.push_back(-l);
    }
    sat.add_clause(big);
    gates.emplace(std::move(xs), g);
    return g;
  }
  int mk_or(std::vector<int> lits) {
    for (int& l : lits) l = -l;
    return -mk_and(std::move(lits));
  }

  // -- grounding ----------------------------------------------------------

  using GEnv = std::vector<std::pair<std::string, int>>;

  int lookup(const GEnv& env, const std::string& name) const {
    for (auto it = env.rbegin(); it != env.rend(); ++it)
      if (it->first == name) return it->second;
    throw Error("grounder: unbound variable '" + name + "'");
  }

  SymbolId symbol_id(const std::string& name) const {
    auto id = sig->find_symbol(name);
    if (!id) throw Error("grounder: unknown symbol '" + name + "'");
    return *id;
  }

  int eq_lit(const GTerm& t, int e) const {
    if (t.concrete >= 0) return t.concrete == e ? T : -T;
    return t.lits[static_cast<std::size_t>(e)];
  }

  /// Calls fn(tuple, guard literal) for each argument tuple the terms may take.
  void for_tuples(const Symbol& sym, const std::vector<GTerm>& args,
                  const std::function<void(const std::vector<int>&, int)>& fn) {
    std::vector<int> tup(args.size(), 0);
    std::function<void(std::size_t, std::vector<int>&)> rec = [&](std::size_t i, std::vector<int>& conds) {
      if (i == args.size()) {
        fn(tup, mk_and(conds));
        return;
      }
      if (args[i].concrete >= 0) {
        tup[i] = args[i].concrete;
        rec(i + 1, conds);
        return;
      }
      int B = bounds[static_cast<std::size_t>(sym.args[i])];
      for (int e = 0; e < B; ++e) {
        int l = args[i].lits[static_cast<std::size_t>(e)];
        if (l == -T) continue;
        tup[i] = e;
        conds.push_back(l);
        rec(i + 1, conds);
        conds.pop_back();
      }
    };
    std::vector<int> conds;
    rec(0, conds);
  }

  GTerm term(const Term& t, const GEnv& env) {
    if (t.kind == Term::Kind::Var) return GTerm{lookup(env, t.name), {}};
    SymbolId id = symbol_id(t.name);
    const Symbol& sym = sig->symbol(id);
    std::vector<GTerm> args;
    for (const auto& a : t.args) args.push_back(term(*a, env));
    auto B = static_cast<std::size_t>(bounds[static_cast<std::size_t>(sym.result)]);
    const auto& tab = table[static_cast<std::size_t>(id)];
    GTerm out;
    bool all_concrete = std::all_of(args.begin(), args.end(), [](const GTerm& g) { return g.concrete >= 0; });
    if (all_concrete) {
      std::vector<int> tup;
      for (const auto& a : args) tup.push_back(a.concrete);
      std::size_t base = encode_tuple(sym, tup) * B;
      out.lits.assign(tab.begin() + static_cast<std::ptrdiff_t>(base), tab.begin() + static_cast<std::ptrdiff_t>(base + B));
      return out;
    }
    std::vector<std::vector<int>> alts(B);
    for_tuples(sym, args, [&](const std::vector<int>& tup, int cond) {
      std::size_t base = encode_tuple(sym, tup) * B;
      for (std::size_t v = 0; v < B; ++v) alts[v].push_back(mk_and({cond, tab[base + v]}));
    });
    for (std::size_t v = 0; v < B; ++v) out.lits.push_back(mk_or(alts[v]));
    return out;
  }

  int atom(const Formula& f, const GEnv& env) {
    if (f.kind == Formula::Kind::Eq) {
      GTerm a = term(*f.terms[0], env);
      GTerm b = term(*f.terms[1], env);
      if (a.concrete >= 0 && b.concrete >= 0) return a.concrete == b.concrete ? T : -T;
      if (a.concrete >= 0) return eq_lit(b, a.concrete);
      if (b.concrete >= 0) return eq_lit(a, b.concrete);
      std::vector<int> alts;
      for (std::size_t e = 0; e < a.lits.size(); ++e) alts.push_back(mk_and({a.lits[e], b.lits[e]}));
      return mk_or(alts);
    }
    SymbolId id = symbol_id(f.name);
    const Symbol& sym = sig->symbol(id);
    std::vector<GTerm> args;
    for (const auto& a : f.terms) args.push_back(term(*a, env));
    const auto& tab = table[static_cast<std::size_t>(id)];
    std::vector<int> alts;
    for_tuples(sym, args, [&](const std::vector<int>& tup, int cond) {
      alts.push_back(mk_and({cond, tab[encode_tuple(sym, tup)]}));
    });
    return mk_or(alts);
  }

  int ground(const Formula& f, GEnv& env) {
    switch (f.kind) {
      case Formula::Kind::And: {
        std::vector<int> ls;
        for (const auto& k : f.kids) {
          int l = ground(*k, env);
          if (l == -T) return -T;
          ls.push_back(l);
        }
        return mk_and(ls);
      }
      case Formula::Kind::Or: {
        std::vector<int> ls;
        for (const auto& k : f.kids) {
          int l = ground(*k, env);
          if (l == T) return T;
          ls.push_back(l);
        }
        return mk_or(ls);
      }
      case Formula::Kind::Not:
        return -ground(*f.kids[0], env);
      case Formula::Kind::Implies:
        return mk_or({-ground(*f.kids[0], env), ground(*f.kids[1], env)});
      case Formula::Kind::Iff: {
        int a = ground(*f.kids[0], env), b = ground(*f.kids[1], env);
        return mk_and({mk_or({-a, b}), mk_or({a, -b})});
      }
      case Formula::Kind::Rel:
      case Formula::Kind::Eq:
        return atom(f, env);
      case Formula::Kind::Forall:
      case Formula::Kind::Exists: {
        bool all = f.kind == Formula::Kind::Forall;
        std::vector<int> parts;
        quantify(f, 0, env, [&]() {
          // presence of the bound elements
          std::vector<int> pres;
          for (std::size_t i = 0; i < f.vars.size(); ++i) {
            auto s = static_cast<std::size_t>(sig->sort_id(f.vars[i].sort));
            pres.push_back(presence[s][static_cast<std::size_t>(env[env.size() - f.vars.size() + i].second)]);
          }
          int body = ground(*f.kids[0], env);
          int p = mk_and(pres);
          parts.push_back(all ? mk_or({-p, body}) : mk_and({p, body}));
          return !(all ? parts.back() == -T : parts.back() == T);
        });
        return all ? mk_and(parts) : mk_or(parts);
      }
    }
    return T;
  }

  /// Enumerate all assignments to f's bound variables (pushed onto env).
  /// fn returns false to stop early.
  bool quantify(const Formula& f, std::size_t i, GEnv& env, const std::function<bool()>& fn) {
    if (i == f.vars.size()) return fn();
    int B = bounds[static_cast<std::size_t>(sig->sort_id(f.vars[i].sort))];
    for (int e = 0; e < B; ++e) {
      env.emplace_back(f.vars[i].name, e);
      bool go = quantify(f, i + 1, env, fn);
      env.pop_back();
      if (!go) return false;
    }
    return true;
  }

  /// Add clauses enforcing f whenever all `conds` hold.
  void assert_under(const Formula& f, GEnv& env, std::vector<int>& conds) {
    auto clause = [&](std::vector<int> lits) {
      for (int c : conds) lits.push_back(-c);
      for (int l : lits)
        if (l == T) return;
      std::vector<int> out;
      for (int l : lits)
        if (l != -T) out.push_back(l);
      sat.add_clause(out);
    };
    switch (f.kind) {
      case Formula::Kind::And:
        for (const auto& k : f.kids) assert_under(*k, env, conds);
        return;
      case Formula::Kind::Or: {
        std::vector<int> ls;
        for (const auto& k : f.kids) ls.push_back(ground(*k, env));
        clause(ls);
        return;
      }
      case Formula::Kind::Forall: {
        quantify(f, 0, env, [&]() {
          std::size_t mark = conds.size();
          for (std::size_t i = 0; i < f.vars.size(); ++i) {
            auto s = static_cast<std::size_t>(sig->sort_id(f.vars[i].sort));
            int e = env[env.size() - f.vars.size() + i].second;
            if (e > 0) conds.push_back(presence[s][static_cast<std::size_t>(e)]);
          }
          assert_under(*f.kids[0], env, conds);
          conds.resize(mark);
          return true;
        });
        return;
      }
      default:
        clause({ground(f, env)});
    }
  }

  void assert_formula(const FormulaPtr& f, int guard) {
    FormulaPtr g = nnf(f);
    GEnv env;
    std::vector<int> conds;
    if (guard != 0) conds.push_back(guard);
    assert_under(*g, env, conds);
  }

  int guard_for(const FormulaPtr& f) {
    std::size_t h = hash_value(*f);
    auto range = guards.equal_range(h);
    for (auto it = range.first; it != range.second; ++it)
      if (it->second.first == f || equal(*it->second.first, *f)) return it->second.second;
    int act = sat.new_var();
    assert_formula(f, act);
    guards.emplace(h, std::make_pair(f, act));
    ++guard_count;
    return act;
  }

  // -- solving ------------------------------------------------------------

  std::vector<int> model_sizes() const {
    std::vector<int> sizes;
    for (const auto& ps : presence) {
      int n = 0;
      for (int p : ps)
        if (sat.lit_value(p)) ++n;
      sizes.push_back(n);
    }
    return sizes;
  }

  Structure decode() const {
    Structure m(sig, model_sizes());
    const auto& syms = sig->symbols();
    for (std::size_t id = 0; id < syms.size(); ++id) {
      const Symbol& sym = syms[id];
      auto sid = static_cast<SymbolId>(id);
      for (std::size_t i = 0; i < m.table_size(sid); ++i) {
        std::vector<int> tup = m.tuple(sid, i);
        std::size_t j = encode_tuple(sym, tup);
        if (sym.kind == SymbolKind::Relation) {
          m.set_raw(sid, i, sat.lit_value(table[id][j]) ? 1 : 0);
        } else {
          auto B = static_cast<std::size_t>(bounds[static_cast<std::size_t>(sym.result)]);
          int val = 0;
          for (std::size_t v = 0; v < B; ++v)
            if (sat.lit_value(table[id][j * B + v])) val = static_cast<int>(v);
          m.set_raw(sid, i, val);
        }
      }
    }
    return m;
  }

  /// Size vectors in search order: total ascending, then lexicographic.
  std::vector<std::vector<int>> size_vectors() const {
    std::vector<std::vector<int>> out;
    std::vector<int> cur(bounds.size(), 1);
    for (;;) {
      out.push_back(cur);
      std::size_t i = cur.size();
      while (i-- > 0) {
        if (cur[i] < bounds[i]) {
          ++cur[i];
          break;
        }
        cur[i] = 1;
      }
      if (i == static_cast<std::size_t>(-1)) break;
    }
    std::stable_sort(out.begin(), out.end(), [](const std::vector<int>& a, const std::vector<int>& b) {
      int sa = std::accumulate(a.begin(), a.end(), 0), sb = std::accumulate(b.begin(), b.end(), 0);
      if (sa != sb) return sa < sb;
      return a < b;
    });
    return out;
  }

  OracleResult unknown(const SolveOptions& opts) const {
    OracleResult r;
    r.verdict = Verdict::Unknown;
    r.reason = opts.stop.stop_requested() ? "cancelled" : "budget";
    return r;
  }

  OracleResult solve(std::span<const int> guard_lits, const std::vector<FormulaPtr>& verify,
                     const SolveOptions& opts) {
    ++calls;
    sat.set_conflict_budget(opts.conflict_budget);
    sat.set_stop_token(opts.stop);
    if (opts.dimacs) sat.dump_dimacs(*opts.dimacs);
    std::vector<int> assumptions(guard_lits.begin(), guard_lits.end());
    SatResult r = sat.solve(assumptions);
    if (r == SatResult::Unknown) return unknown(opts);
    OracleResult out;
    if (r == SatResult::Unsat) {
      out.verdict = Verdict::UnsatAtBound;
      out.bound = bounds;
      return out;
    }
    Structure best = decode();
    std::vector<int> found = best.sizes();
    for (const auto& sizes : size_vectors()) {
      if (sizes == found) break;
      std::vector<int> as = assumptions;
      for (std::size_t s = 0; s < sizes.size(); ++s) {
        auto n = static_cast<std::size_t>(sizes[s]);
        if (n > 1) as.push_back(presence[s][n - 1]);
        if (n < presence[s].size()) as.push_back(-presence[s][n]);
      }
      SatResult rr = sat.solve(as);
      if (rr == SatResult::Sat) {
        best = decode();
        break;
      }
      if (rr == SatResult::Unknown) break;  // keep the model we have
    }
    for (const auto& f : verify)
      if (!eval(best, *f)) throw Error("oracle: decoded model violates " + print_formula(*f));
    out.verdict = Verdict::Model;
    out.model = std::move(best);
    return out;
  }
};

Grounder::Grounder(std::shared_ptr<const Signature> sig, std::vector<int> bounds)
    : impl_(std::make_unique<Impl>(std::move(sig), std::move(bounds))) {}
Grounder::~Grounder() = default;
const Signature& Grounder::signature() const { return *impl_->sig; }
const std::vector<int>& Grounder::bounds() const { return impl_->bounds; }
void Grounder::assert_formula(const FormulaPtr& f) { impl_->assert_formula(f, 0); }
int Grounder::guard(const FormulaPtr& f) { return impl_->guard_for(f); }
std::size_t Grounder::guard_count() const { return impl_->guard_count; }
OracleResult Grounder::solve(std::span<const int> guards, const std::vector<FormulaPtr>& verify,
                             const SolveOptions& opts) {
  return impl_->solve(guards, verify, opts);
}
void Grounder::dump_dimacs(std::ostream& out) const { impl_->sat.dump_dimacs(out); }
std::int64_t Grounder::sat_calls() const { return impl_->calls; }

// ---------------------------------------------------------------------------

namespace {

void mark_term(const Term& t, const Signature& sig, std::vector<bool>& rel) {
  if (t.kind == Term::Kind::App) {
    if (auto id = sig.find_symbol(t.name)) {
      const Symbol& s = sig.symbol(*id);
      for (SortId a : s.args) rel[static_cast<std::size_t>(a)] = true;
      if (s.result >= 0) rel[static_cast<std::size_t>(s.result)] = true;
    }
  }
  for (const auto& a : t.args) mark_term(*a, sig, rel);
}

void mark(const Formula& f, const Signature& sig, std::vector<bool>& rel) {
  for (const auto& v : f.vars)
    if (auto s = sig.find_sort(v.sort)) rel[static_cast<std::size_t>(*s)] = true;
  if (f.kind == Formula::Kind::Rel)
    if (auto id = sig.find_symbol(f.name))
      for (SortId a : sig.symbol(*id).args) rel[static_cast<std::size_t>(a)] = true;
  for (const auto& t : f.terms) mark_term(*t, sig, rel);
  for (const auto& k : f.kids) mark(*k, sig, rel);
}

}  // namespace

std::vector<bool> relevant_sorts(const Signature& sig, const std::vector<FormulaPtr>& fs) {
  std::vector<bool> rel(sig.sorts().size(), false);
  for (const auto& f : fs) mark(*f, sig, rel);
  return rel;
}

OracleResult bounded_solve(const Query& q, const SolveOptions& opts) {
  std::vector<int> b = q.bounds;
  auto rel = relevant_sorts(*q.sig, q.assertions);
  for (std::size_t s = 0; s < b.size(); ++s)
    if (!rel[s]) b[s] = 1;
  Grounder g(q.sig, b);
  for (const auto& f : q.assertions) g.assert_formula(f);
  OracleResult r = g.solve({}, q.assertions, opts);
  if (r.verdict == Verdict::UnsatAtBound) r.bound = q.bounds;
  return r;
}

OracleResult incremental_solve(const std::shared_ptr<const Signature>& sig,
                               const std::vector<FormulaPtr>& assertions,
                               const std::vector<FormulaPtr>& core, const std::vector<int>& bounds,
                               const SolveOptions& opts) {
  Grounder g(sig, bounds);
  std::vector<FormulaPtr> asserted = core;
  for (const auto& f : core) g.assert_formula(f);
  std::vector<bool> in(assertions.size(), false);
  int added = 0;
  for (;;) {
    OracleResult r = g.solve({}, asserted, opts);
    r.asserted = added;
    if (!r.sat()) return r;
    bool violated = false;
    for (std::size_t i = 0; i < assertions.size(); ++i) {
      if (in[i] || eval(*r.model, *assertions[i])) continue;
      in[i] = true;
      g.assert_formula(assertions[i]);
      asserted.push_back(assertions[i]);
      ++added;
      violated = true;
      break;
    }
    if (!violated) return r;
  }
}

namespace {

CheckResult to_check(OracleResult r) {
  CheckResult c;
  if (r.unsat()) {
    c.kind = CheckResult::Kind::Valid;
  } else if (r.sat()) {
    c.kind = CheckResult::Kind::Cex;
    c.cex = std::move(r.model);
  } else {
    c.kind = CheckResult::Kind::Unknown;
    c.reason = r.reason;
  }
  return c;
}

}  // namespace

CheckResult check_initiation(const FormulaPtr& p, const TransitionSystem& sys,
                             const std::vector<int>& bounds, const SolveOptions& opts) {
  Query q{sys.sig, {}, bounds};
  q.assertions = sys.axioms;
  q.assertions.insert(q.assertions.end(), sys.inits.begin(), sys.inits.end());
  q.assertions.push_back(negate(p));
  return to_check(bounded_solve(q, opts));
}

CheckResult check_relative_induction(const FormulaPtr& p, const std::vector<FormulaPtr>& frame,
                                     const TransitionSystem& sys, const std::vector<int>& bounds,
                                     const SolveOptions& opts) {
  std::vector<FormulaPtr> core = {p, sys.ax(), sys.tr(), sys.ax_primed(), negate(prime(p, *sys.sig))};
  return to_check(incremental_solve(sys.sig2, frame, core, bounds, opts));
}

// ---------------------------------------------------------------------------

namespace {
constexpr std::size_t kMaxGuards = 4000;
}

SystemOracle::SystemOracle(const TransitionSystem& sys, std::vector<int> bounds)
    : sys_(sys), bounds_(std::move(bounds)) {}

Grounder& SystemOracle::one() {
  if (!one_ || one_->guard_count() > kMaxGuards) {
    one_ = std::make_unique<Grounder>(sys_.sig, bounds_);
    for (const auto& a : sys_.axioms) one_->assert_formula(a);
  }
  return *one_;
}

Grounder& SystemOracle::two() {
  if (!two_ || two_->guard_count() > kMaxGuards) {
    two_ = std::make_unique<Grounder>(sys_.sig2, bounds_);
    two_->assert_formula(sys_.ax());
    two_->assert_formula(sys_.tr());
    two_->assert_formula(sys_.ax_primed());
    primed_.clear();
  }
  return *two_;
}

FormulaPtr SystemOracle::primed(const FormulaPtr& f) {
  auto it = primed_.find(f.get());
  if (it != primed_.end()) return it->second.second;
  FormulaPtr p = prime(f, *sys_.sig);
  if (primed_.size() > 100000) primed_.clear();
  primed_.emplace(f.get(), std::make_pair(f, p));  // holding f keeps the key address unique
  return p;
}

OracleResult SystemOracle::one_state(const std::vector<FormulaPtr>& assertions, const SolveOptions& opts) {
  ++calls_;
  Grounder& g = one();
  std::vector<int> guards;
  for (const auto& a : assertions) guards.push_back(g.guard(a));
  std::vector<FormulaPtr> verify = sys_.axioms;
  verify.insert(verify.end(), assertions.begin(), assertions.end());
  return g.solve(guards, verify, opts);
}

OracleResult SystemOracle::two_state(const std::vector<FormulaPtr>& pre, const std::vector<FormulaPtr>& post,
                                     const std::vector<FormulaPtr>& lazy_pre, const SolveOptions& opts) {
  ++calls_;
  Grounder& g = two();
  std::vector<int> guards;
  std::vector<FormulaPtr> verify = {sys_.ax(), sys_.tr(), sys_.ax_primed()};
  for (const auto& a : pre) {
    guards.push_back(g.guard(a));
    verify.push_back(a);
  }
  for (const auto& a : post) {
    FormulaPtr p = primed(a);
    guards.push_back(g.guard(p));
    verify.push_back(p);
  }
  std::vector<bool> in(lazy_pre.size(), false);
  int added = 0;
  for (;;) {
    OracleResult r = g.solve(guards, verify, opts);
    r.asserted = added;
    if (!r.sat()) return r;
    bool violated = false;
    for (std::size_t i = 0; i < lazy_pre.size(); ++i) {
      if (in[i] || eval(*r.model, *lazy_pre[i])) continue;
      in[i] = true;
      guards.push_back(g.guard(lazy_pre[i]));
      verify.push_back(lazy_pre[i]);
      ++added;
      violated = true;
      // add every currently violated lemma at once; each costs a solve otherwise
    }
    if (!violated) return r;
  }
}

OraclePool::Lease OraclePool::acquire() {
  std::lock_guard<std::mutex> lock(mu_);
  if (!free_.empty()) {
    auto o = std::move(free_.back());
    free_.pop_back();
    return Lease(*this, std::move(o));
  }
  return Lease(*this, std::make_unique<SystemOracle>(sys_, bounds_));
}

void OraclePool::release(std::unique_ptr<SystemOracle> o) {
  std::lock_guard<std::mutex> lock(mu_);
  free_.push_back(std::move(o));
}

}  // namespace qinv
