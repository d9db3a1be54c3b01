// Random signatures, structures and formulas shared by the property tests.
#pragma once

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "qinv/logic.hpp"

namespace qinv::testgen {

/// Sorts S, T; constants a:S, b:T; relations r(S), q(), p(S,T), e(S,S); function f:S->T.
inline std::shared_ptr<const Signature> mixed_signature() {
  auto sig = std::make_shared<Signature>();
  SortId s = sig->add_sort("S");
  SortId t = sig->add_sort("T");
  sig->add_symbol({"a", SymbolKind::Constant, {}, s, true});
  sig->add_symbol({"b", SymbolKind::Constant, {}, t, false});
  sig->add_symbol({"r", SymbolKind::Relation, {s}, -1, true});
  sig->add_symbol({"q", SymbolKind::Relation, {}, -1, true});
  sig->add_symbol({"p", SymbolKind::Relation, {s, t}, -1, false});
  sig->add_symbol({"e", SymbolKind::Relation, {s, s}, -1, true});
  sig->add_symbol({"f", SymbolKind::Function, {s}, t, true});
  return sig;
}

inline Structure random_structure(std::shared_ptr<const Signature> sig, std::mt19937_64& rng,
                                  int max_size = 3) {
  std::vector<int> sizes;
  for (std::size_t i = 0; i < sig->sorts().size(); ++i)
    sizes.push_back(std::uniform_int_distribution<int>(1, max_size)(rng));
  Structure m(sig, sizes);
  for (std::size_t id = 0; id < sig->symbols().size(); ++id) {
    const auto& sym = sig->symbol(static_cast<SymbolId>(id));
    for (std::size_t i = 0; i < m.table_size(static_cast<SymbolId>(id)); ++i) {
      int v = sym.kind == SymbolKind::Relation
                  ? static_cast<int>(rng() & 1)
                  : std::uniform_int_distribution<int>(0, sizes[sym.result] - 1)(rng);
      m.set_raw(static_cast<SymbolId>(id), i, v);
    }
  }
  return m;
}

class FormulaGen {
 public:
  FormulaGen(const Signature& sig, std::mt19937_64& rng) : sig_(sig), rng_(rng) {}

  FormulaPtr closed(int depth) {
    scope_.clear();
    return formula(depth);
  }

  FormulaPtr formula(int depth) {
    int choice = pick(depth <= 0 ? 3 : 11);
    switch (choice) {
      case 0:
      case 1:
      case 2:
        return atom();
      case 3:
        return negate(formula(depth - 1));
      case 4:
        return conj(kids(depth));
      case 5:
        return disj(kids(depth));
      case 6:
        return implies(formula(depth - 1), formula(depth - 1));
      case 7:
        return iff(formula(depth - 1), formula(depth - 1));
      default: {
        int n = 1 + pick(2);
        std::vector<VarDecl> vars;
        std::size_t mark = scope_.size();
        for (int i = 0; i < n; ++i) {
          SortId s = pick(static_cast<int>(sig_.sorts().size()));
          std::string name = std::string(1, static_cast<char>('x' + pick(3)));
          bool dup = false;
          for (const auto& v : vars) dup |= v.name == name;
          if (dup) continue;
          vars.push_back({name, sig_.sort_name(s)});
          scope_.emplace_back(name, s);
        }
        FormulaPtr body = formula(depth - 1);
        scope_.resize(mark);
        return (choice % 2) ? forall(vars, body) : exists(vars, body);
      }
    }
  }

  /// A term of sort s from the current scope, constants and (depth permitting) functions.
  TermPtr term(SortId s, int depth = 1) {
    std::vector<TermPtr> options;
    for (const auto& [name, sort] : scope_)
      if (sort == s) {
        // only the innermost binding of a name is visible
        SortId visible = -1;
        for (auto it = scope_.rbegin(); it != scope_.rend(); ++it)
          if (it->first == name) {
            visible = it->second;
            break;
          }
        if (visible == s) options.push_back(var(name));
      }
    std::vector<SymbolId> fns;
    for (std::size_t id = 0; id < sig_.symbols().size(); ++id) {
      const auto& sym = sig_.symbol(static_cast<SymbolId>(id));
      if (sym.result != s) continue;
      if (sym.kind == SymbolKind::Constant) options.push_back(app(sym.name));
      if (sym.kind == SymbolKind::Function && depth > 0) fns.push_back(static_cast<SymbolId>(id));
    }
    if (!fns.empty() && (options.empty() || pick(4) == 0)) {
      const auto& sym = sig_.symbol(fns[pick(static_cast<int>(fns.size()))]);
      std::vector<TermPtr> args;
      for (SortId a : sym.args) args.push_back(term(a, depth - 1));
      return app(sym.name, std::move(args));
    }
    return options[pick(static_cast<int>(options.size()))];
  }

 private:
  const Signature& sig_;
  std::mt19937_64& rng_;
  std::vector<std::pair<std::string, SortId>> scope_;

  int pick(int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng_); }

  std::vector<FormulaPtr> kids(int depth) {
    std::vector<FormulaPtr> out;
    int n = pick(4);
    for (int i = 0; i < n; ++i) out.push_back(formula(depth - 1));
    return out;
  }

  FormulaPtr atom() {
    std::vector<SymbolId> rels;
    for (std::size_t id = 0; id < sig_.symbols().size(); ++id)
      if (sig_.symbol(static_cast<SymbolId>(id)).kind == SymbolKind::Relation)
        rels.push_back(static_cast<SymbolId>(id));
    if (rels.empty() || pick(3) == 0) {
      SortId s = pick(static_cast<int>(sig_.sorts().size()));
      return equals(term(s), term(s));
    }
    const auto& sym = sig_.symbol(rels[pick(static_cast<int>(rels.size()))]);
    std::vector<TermPtr> args;
    for (SortId a : sym.args) args.push_back(term(a));
    return rel(sym.name, std::move(args));
  }
};

}  // namespace qinv::testgen
