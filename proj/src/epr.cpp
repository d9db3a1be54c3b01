#include "qinv/epr.hpp"

#include <functional>
#include <vector>

namespace qinv {

EdgeSet skolem_edges(const QPrefix& prefix) {
  EdgeSet out;
  for (std::size_t j = 0; j < prefix.quants.size(); ++j) {
    if (prefix.quants[j].universal) continue;
    for (std::size_t i = 0; i < j; ++i)
      if (prefix.quants[i].universal) out.emplace(prefix.quants[i].sort, prefix.quants[j].sort);
  }
  return out;
}

bool prefix_allowed(const QPrefix& prefix, const EdgeSet& allowed) {
  for (const auto& e : skolem_edges(prefix))
    if (!allowed.count(e)) return false;
  return true;
}

EdgeSet function_edges(const Signature& sig) {
  EdgeSet out;
  for (const auto& sym : sig.symbols())
    if (sym.kind == SymbolKind::Function)
      for (SortId a : sym.args) out.emplace(a, sym.result);
  return out;
}

bool is_acyclic(const EdgeSet& edges, std::size_t nsorts) {
  std::vector<int> state(nsorts, 0);  // 0 new, 1 on stack, 2 done
  std::function<bool(SortId)> visit = [&](SortId s) {
    state[static_cast<std::size_t>(s)] = 1;
    for (const auto& [from, to] : edges) {
      if (from != s) continue;
      int st = state[static_cast<std::size_t>(to)];
      if (st == 1) return false;
      if (st == 0 && !visit(to)) return false;
    }
    state[static_cast<std::size_t>(s)] = 2;
    return true;
  };
  for (std::size_t s = 0; s < nsorts; ++s)
    if (state[s] == 0 && !visit(static_cast<SortId>(s))) return false;
  return true;
}

EdgeSet formula_skolem_edges(const FormulaPtr& f, const Signature& sig) {
  EdgeSet out;
  std::vector<SortId> universals;
  std::function<void(const Formula&)> walk = [&](const Formula& g) {
    if (g.kind == Formula::Kind::Forall || g.kind == Formula::Kind::Exists) {
      std::size_t mark = universals.size();
      for (const auto& v : g.vars) {
        SortId s = sig.sort_id(v.sort);
        if (g.kind == Formula::Kind::Forall)
          universals.push_back(s);
        else
          for (SortId u : universals) out.emplace(u, s);
      }
      walk(*g.kids[0]);
      universals.resize(mark);
      return;
    }
    for (const auto& k : g.kids) walk(*k);
  };
  walk(*nnf(f));
  return out;
}

std::string edges_to_string(const EdgeSet& edges, const Signature& sig) {
  std::string s;
  for (const auto& [a, b] : edges) {
    if (!s.empty()) s += ", ";
    s += sig.sort_name(a) + "->" + sig.sort_name(b);
  }
  return s.empty() ? "(none)" : s;
}

EprCheck check_epr_system(const TransitionSystem& sys) {
  EprCheck r;
  const Signature& sig = *sys.sig;
  EdgeSet declared(sys.epr_edges.begin(), sys.epr_edges.end());
  r.allowed = declared;
  for (const auto& e : function_edges(sig)) r.allowed.insert(e);
  if (!is_acyclic(r.allowed, sig.sorts().size())) {
    r.ok = false;
    r.message = "epr: declared and function edges form a cycle: " + edges_to_string(r.allowed, sig);
    return r;
  }
  auto check = [&](const FormulaPtr& f, const Signature& s, const std::string& what) {
    if (!r.ok) return;
    for (const auto& e : formula_skolem_edges(f, s)) {
      if (r.allowed.count(e)) continue;
      r.ok = false;
      r.message = "epr: " + what + " needs the undeclared edge " + sig.sort_name(e.first) + "->" +
                  sig.sort_name(e.second) + " (add an epr-edge form)";
      return;
    }
  };
  for (const auto& a : sys.axioms) check(a, sig, "an axiom");
  for (const auto& i : sys.inits) check(i, sig, "an init formula");
  for (const auto& t : sys.transitions) check(t.formula, *sys.sig2, "transition " + t.name);
  for (const auto& s : sys.safeties) {
    check(s, sig, "a safety formula");
    check(negate(s), sig, "the negated safety property");
  }
  return r;
}

}  // namespace qinv
