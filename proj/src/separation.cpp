#include "qinv/separation.hpp"

#include <algorithm>
#include <cctype>
#include <functional>

namespace qinv {

// ---------------------------------------------------------------------------
// Prefixes

int QPrefix::alternations() const {
  int n = 0;
  for (std::size_t i = 1; i < quants.size(); ++i)
    if (quants[i].universal != quants[i - 1].universal) ++n;
  return n;
}

int QPrefix::existentials() const {
  int n = 0;
  for (const auto& q : quants) n += q.universal ? 0 : 1;
  return n;
}

std::vector<int> QPrefix::sort_counts(std::size_t nsorts) const {
  std::vector<int> c(nsorts, 0);
  for (const auto& q : quants) ++c[static_cast<std::size_t>(q.sort)];
  return c;
}

bool QPrefix::same_shape(const QPrefix& o) const {
  if (quants.size() != o.quants.size()) return false;
  for (std::size_t i = 0; i < quants.size(); ++i)
    if (quants[i].universal != o.quants[i].universal || quants[i].sort != o.quants[i].sort) return false;
  return true;
}

std::string QPrefix::shape_key() const {
  std::string s;
  for (const auto& q : quants) s += (q.universal ? "A" : "E") + std::to_string(q.sort);
  return s;
}

std::string QPrefix::to_string(const Signature& sig) const {
  if (quants.empty()) return "(none)";
  std::string s;
  for (std::size_t i = 0; i < quants.size(); ++i) {
    if (i) s += ", ";
    s += quants[i].universal ? "forall " : "exists ";
    s += sig.sort_name(quants[i].sort);
  }
  return s;
}

QPrefix make_prefix(const Signature& sig, const std::vector<std::pair<bool, SortId>>& shape) {
  QPrefix p;
  std::vector<int> count(sig.sorts().size(), 0);
  for (const auto& [universal, sort] : shape) {
    std::string base = sig.sort_name(sort);
    if (!base.empty()) base[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(base[0])));
    int n = ++count[static_cast<std::size_t>(sort)];
    p.quants.push_back({universal, sort, base + std::to_string(n), sig.sort_name(sort)});
  }
  return p;
}

// ---------------------------------------------------------------------------
// Literals

std::vector<Literal> literal_universe(const Signature& sig, const QPrefix& prefix, int depth_cap) {
  std::size_t nsorts = sig.sorts().size();
  std::vector<std::vector<TermPtr>> terms(nsorts);
  for (const auto& q : prefix.quants) terms[static_cast<std::size_t>(q.sort)].push_back(var(q.name));
  for (const auto& sym : sig.symbols())
    if (sym.kind == SymbolKind::Constant) terms[static_cast<std::size_t>(sym.result)].push_back(app(sym.name));
  for (int d = 0; d < depth_cap; ++d) {
    auto base = terms;
    for (const auto& sym : sig.symbols()) {
      if (sym.kind != SymbolKind::Function) continue;
      std::vector<std::size_t> idx(sym.args.size(), 0);
      bool empty = false;
      for (SortId a : sym.args) empty |= base[static_cast<std::size_t>(a)].empty();
      if (empty) continue;
      for (;;) {
        std::vector<TermPtr> args;
        for (std::size_t i = 0; i < idx.size(); ++i) args.push_back(base[static_cast<std::size_t>(sym.args[i])][idx[i]]);
        auto t = app(sym.name, args);
        auto& bucket = terms[static_cast<std::size_t>(sym.result)];
        bool dup = std::any_of(bucket.begin(), bucket.end(), [&](const TermPtr& u) { return equal(*u, *t); });
        if (!dup) bucket.push_back(t);
        std::size_t i = idx.size();
        while (i-- > 0) {
          if (++idx[i] < base[static_cast<std::size_t>(sym.args[i])].size()) break;
          idx[i] = 0;
        }
        if (i == static_cast<std::size_t>(-1)) break;
      }
    }
  }

  std::vector<FormulaPtr> atoms;
  for (const auto& sym : sig.symbols()) {
    if (sym.kind != SymbolKind::Relation) continue;
    std::vector<std::size_t> idx(sym.args.size(), 0);
    bool empty = false;
    for (SortId a : sym.args) empty |= terms[static_cast<std::size_t>(a)].empty();
    if (empty) continue;
    for (;;) {
      std::vector<TermPtr> args;
      for (std::size_t i = 0; i < idx.size(); ++i) args.push_back(terms[static_cast<std::size_t>(sym.args[i])][idx[i]]);
      atoms.push_back(rel(sym.name, args));
      std::size_t i = idx.size();
      while (i-- > 0) {
        if (++idx[i] < terms[static_cast<std::size_t>(sym.args[i])].size()) break;
        idx[i] = 0;
      }
      if (i == static_cast<std::size_t>(-1)) break;
    }
  }
  for (std::size_t s = 0; s < nsorts; ++s)
    for (std::size_t i = 0; i < terms[s].size(); ++i)
      for (std::size_t j = i + 1; j < terms[s].size(); ++j) atoms.push_back(equals(terms[s][i], terms[s][j]));

  std::vector<Literal> out;
  for (const auto& a : atoms) {
    out.push_back({a, true});
    out.push_back({a, false});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Constraints and pDNF formulas

SepConstraint SepConstraint::positive(Structure s) {
  return {Kind::Positive, std::make_shared<const Structure>(std::move(s)), nullptr};
}
SepConstraint SepConstraint::negative(Structure s) {
  return {Kind::Negative, std::make_shared<const Structure>(std::move(s)), nullptr};
}
SepConstraint SepConstraint::implication(Structure pre, Structure post) {
  return {Kind::Implication, std::make_shared<const Structure>(std::move(pre)),
          std::make_shared<const Structure>(std::move(post))};
}

bool SepConstraint::operator==(const SepConstraint& o) const {
  if (kind != o.kind) return false;
  if (!(first == o.first || *first == *o.first)) return false;
  if (kind != Kind::Implication) return true;
  return second == o.second || *second == *o.second;
}

std::size_t SepConstraint::hash() const {
  std::size_t h = first->hash() * 3 + static_cast<std::size_t>(kind);
  if (second) h ^= second->hash() * 0x9e3779b97f4a7c15ULL;
  return h;
}

FormulaPtr PDNF::matrix() const {
  std::vector<FormulaPtr> parts;
  for (const auto& l : clause) parts.push_back(l.formula());
  for (const auto& cube : cubes) {
    std::vector<FormulaPtr> ls;
    for (const auto& l : cube) ls.push_back(l.formula());
    parts.push_back(ls.size() == 1 ? ls[0] : conj(ls));
  }
  if (parts.size() == 1) return parts[0];
  return disj(parts);
}

FormulaPtr PDNF::to_formula() const {
  FormulaPtr body = matrix();
  std::size_t end = prefix.quants.size();
  while (end > 0) {
    std::size_t begin = end - 1;
    bool universal = prefix.quants[begin].universal;
    while (begin > 0 && prefix.quants[begin - 1].universal == universal) --begin;
    std::vector<VarDecl> vars;
    for (std::size_t i = begin; i < end; ++i) vars.push_back({prefix.quants[i].name, prefix.quants[i].sort_name});
    body = universal ? forall(vars, body) : exists(vars, body);
    end = begin;
  }
  return body;
}

int PDNF::literal_count() const {
  int n = static_cast<int>(clause.size());
  for (const auto& c : cubes) n += static_cast<int>(c.size());
  return n;
}

bool satisfies(const FormulaPtr& f, const SepConstraint& c) {
  switch (c.kind) {
    case SepConstraint::Kind::Positive:
      return eval(*c.first, *f);
    case SepConstraint::Kind::Negative:
      return !eval(*c.first, *f);
    case SepConstraint::Kind::Implication:
      return !eval(*c.first, *f) || eval(*c.second, *f);
  }
  return false;
}

// ---------------------------------------------------------------------------
// Encoding

namespace {

struct KeyHash {
  std::size_t operator()(const std::vector<std::uint64_t>& v) const {
    std::size_t h = v.size();
    for (auto x : v) h ^= static_cast<std::size_t>(x) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h;
  }
};

constexpr int kCounterCap = 16;

}  // namespace

struct Separator::Impl {
  std::shared_ptr<const Signature> sig;
  QPrefix prefix;
  PDNFTemplate tmpl;
  std::vector<Literal> lits;
  std::vector<CompiledFormula> atoms;
  CdclSolver sat;
  GateCache gates{sat};
  std::vector<std::vector<int>> p;  // [term][literal]
  std::vector<int> en;              // en[j], j >= 1
  std::vector<int> all_presence;
  std::vector<int> at_least;        // at_least[K]: more than K presence vars set
  std::unordered_map<std::vector<std::uint64_t>, int, KeyHash> leaves;
  std::unordered_map<Structure, int, StructureHash> roots;
  std::unordered_map<SepConstraint, int, SepConstraintHash> acts;
  std::vector<SepConstraint> active;
  std::vector<int> active_acts;
  int lower_bound = 0;

  Impl(std::shared_ptr<const Signature> s, QPrefix pre, PDNFTemplate t)
      : sig(std::move(s)), prefix(std::move(pre)), tmpl(t) {
    if (tmpl.k < 1) throw Error("separation: k must be positive");
    lits = literal_universe(*sig, prefix, tmpl.depth_cap);
    std::vector<std::pair<std::string, SortId>> free;
    for (const auto& q : prefix.quants) free.emplace_back(q.name, q.sort);
    for (std::size_t i = 0; i < lits.size(); i += 2) atoms.emplace_back(*lits[i].atom, *sig, free);
    p.resize(static_cast<std::size_t>(tmpl.k));
    for (auto& row : p)
      for (std::size_t l = 0; l < lits.size(); ++l) {
        row.push_back(sat.new_var());
        all_presence.push_back(row.back());
      }
    en.assign(static_cast<std::size_t>(tmpl.k), 0);
    for (int j = 1; j < tmpl.k; ++j) {
      en[static_cast<std::size_t>(j)] = sat.new_var();
      // presence only in enabled cubes; cubes are enabled in order
      for (int v : p[static_cast<std::size_t>(j)]) sat.add_clause({-v, en[static_cast<std::size_t>(j)]});
      if (j > 1) sat.add_clause({-en[static_cast<std::size_t>(j)], en[static_cast<std::size_t>(j - 1)]});
      at_most(p[static_cast<std::size_t>(j)], tmpl.literals_per_cube, nullptr);
    }
    at_most(all_presence, kCounterCap, &at_least);
  }

  /// Sequential counter over xs. With `outputs`, returns the "more than K"
  /// literals for K < cap as assumable outputs; otherwise enforces <= cap.
  void at_most(const std::vector<int>& xs, int cap, std::vector<int>* outputs) {
    if (xs.empty()) {
      if (outputs) outputs->assign(static_cast<std::size_t>(cap) + 1, -gates.true_lit());
      return;
    }
    int width = cap + 1;
    std::vector<int> prev(static_cast<std::size_t>(width), 0);  // prev[j]: at least j+1 among processed
    for (std::size_t i = 0; i < xs.size(); ++i) {
      std::vector<int> cur(static_cast<std::size_t>(width));
      for (int j = 0; j < width; ++j) cur[static_cast<std::size_t>(j)] = sat.new_var();
      sat.add_clause({-xs[i], cur[0]});
      for (int j = 0; j < width; ++j) {
        if (i > 0) sat.add_clause({-prev[static_cast<std::size_t>(j)], cur[static_cast<std::size_t>(j)]});
        if (j > 0 && i > 0)
          sat.add_clause({-xs[i], -prev[static_cast<std::size_t>(j - 1)], cur[static_cast<std::size_t>(j)]});
      }
      prev = std::move(cur);
    }
    if (outputs) {
      *outputs = prev;  // prev[K] true when more than K are set
    } else {
      sat.add_clause({-prev[static_cast<std::size_t>(cap)]});
    }
  }

  int leaf(const std::vector<std::uint64_t>& truth) {
    auto it = leaves.find(truth);
    if (it != leaves.end()) return it->second;
    std::vector<int> clause;
    std::vector<std::vector<int>> cubes(static_cast<std::size_t>(tmpl.k));
    for (std::size_t a = 0; a < atoms.size(); ++a) {
      bool v = (truth[a / 64] >> (a % 64)) & 1;
      std::size_t false_lit = v ? 2 * a + 1 : 2 * a;
      clause.push_back(p[0][false_lit]);
      for (int j = 1; j < tmpl.k; ++j) cubes[static_cast<std::size_t>(j)].push_back(-p[static_cast<std::size_t>(j)][false_lit]);
    }
    std::vector<int> terms{gates.mk_or(clause)};
    for (int j = 1; j < tmpl.k; ++j) {
      auto& c = cubes[static_cast<std::size_t>(j)];
      c.push_back(en[static_cast<std::size_t>(j)]);
      terms.push_back(gates.mk_and(c));
    }
    int m = gates.mk_or(terms);
    leaves.emplace(truth, m);
    return m;
  }

  int root(const Structure& s) {
    auto it = roots.find(s);
    if (it != roots.end()) return it->second;
    std::vector<int> assignment(prefix.quants.size(), 0);
    std::vector<std::uint64_t> truth((atoms.size() + 63) / 64, 0);
    std::function<int(std::size_t)> node = [&](std::size_t i) -> int {
      if (i == prefix.quants.size()) {
        std::fill(truth.begin(), truth.end(), 0);
        for (std::size_t a = 0; a < atoms.size(); ++a)
          if (atoms[a].eval(s, assignment)) truth[a / 64] |= std::uint64_t{1} << (a % 64);
        return leaf(truth);
      }
      const auto& q = prefix.quants[i];
      std::vector<int> kids;
      for (int e = 0; e < s.size(q.sort); ++e) {
        assignment[i] = e;
        kids.push_back(node(i + 1));
      }
      return q.universal ? gates.mk_and(kids) : gates.mk_or(kids);
    };
    int r = node(0);
    roots.emplace(s, r);
    return r;
  }

  void activate(const SepConstraint& c) {
    auto it = acts.find(c);
    int act;
    if (it != acts.end()) {
      act = it->second;
    } else {
      act = sat.new_var();
      switch (c.kind) {
        case SepConstraint::Kind::Positive:
          sat.add_clause({-act, root(*c.first)});
          break;
        case SepConstraint::Kind::Negative:
          sat.add_clause({-act, -root(*c.first)});
          break;
        case SepConstraint::Kind::Implication: {
          int a = root(*c.first);
          int b = root(*c.second);
          sat.add_clause({-act, -a, b});
          break;
        }
      }
      acts.emplace(c, act);
    }
    if (std::find(active_acts.begin(), active_acts.end(), act) != active_acts.end()) return;
    active_acts.push_back(act);
    active.push_back(c);
  }

  void reset_active() {
    active.clear();
    active_acts.clear();
    lower_bound = 0;
  }

  PDNF decode() const {
    PDNF out;
    out.prefix = prefix;
    for (std::size_t l = 0; l < lits.size(); ++l)
      if (sat.value(p[0][l])) out.clause.push_back({lits[l].atom, !lits[l].positive});
    for (int j = 1; j < tmpl.k; ++j) {
      if (!sat.value(en[static_cast<std::size_t>(j)])) continue;
      std::vector<Literal> cube;
      for (std::size_t l = 0; l < lits.size(); ++l)
        if (sat.value(p[static_cast<std::size_t>(j)][l])) cube.push_back(lits[l]);
      out.cubes.push_back(cube);
    }
    return out;
  }

  int model_size() const {
    int n = 0;
    for (int v : all_presence) n += sat.value(v) ? 1 : 0;
    return n;
  }

  SepResult solve(std::stop_token stop) {
    sat.set_stop_token(stop);
    SepResult res;
    SatResult r = sat.solve(active_acts);
    if (r == SatResult::Unknown) return res;
    if (r == SatResult::Unsat) {
      res.status = SepStatus::Unsep;
      return res;
    }
    PDNF best = decode();
    int size = model_size();
    for (int K = lower_bound; K < size && K < kCounterCap; ++K) {
      std::vector<int> as = active_acts;
      as.push_back(-at_least[static_cast<std::size_t>(K)]);
      SatResult rk = sat.solve(as);
      if (rk == SatResult::Sat) {
        best = decode();
        lower_bound = K;
        break;
      }
      if (rk == SatResult::Unknown) break;
      lower_bound = K + 1;
    }
    FormulaPtr f = best.to_formula();
    for (const auto& c : active)
      if (!satisfies(f, c)) throw Error("separation: decoded formula violates a constraint");
    res.status = SepStatus::Separated;
    res.separator = std::move(best);
    return res;
  }
};

Separator::Separator(std::shared_ptr<const Signature> sig, QPrefix prefix, PDNFTemplate tmpl)
    : impl_(std::make_unique<Impl>(std::move(sig), std::move(prefix), tmpl)) {}
Separator::~Separator() = default;
const QPrefix& Separator::prefix() const { return impl_->prefix; }
const std::vector<Literal>& Separator::literals() const { return impl_->lits; }
std::size_t Separator::presence_vars() const { return impl_->all_presence.size(); }
void Separator::activate(const SepConstraint& c) { impl_->activate(c); }
void Separator::reset_active() { impl_->reset_active(); }
std::size_t Separator::active_count() const { return impl_->active.size(); }
SepResult Separator::solve(std::stop_token stop) { return impl_->solve(std::move(stop)); }
void Separator::dump_dimacs(std::ostream& out) const { impl_->sat.dump_dimacs(out); }

SepResult separate(const std::shared_ptr<const Signature>& sig, const QPrefix& prefix,
                   const PDNFTemplate& tmpl, const std::vector<SepConstraint>& constraints,
                   std::stop_token stop) {
  Separator s(sig, prefix, tmpl);
  for (const auto& c : constraints) s.activate(c);
  return s.solve(std::move(stop));
}

PDNF minimize_matrix(const PDNF& sep, const std::vector<SepConstraint>& constraints) {
  PDNF cur = sep;
  auto ok = [&](const PDNF& cand) {
    FormulaPtr f = cand.to_formula();
    for (const auto& c : constraints)
      if (!satisfies(f, c)) return false;
    return true;
  };
  auto try_remove = [&](std::vector<Literal>& lits) {
    for (std::size_t i = lits.size(); i-- > 0;) {
      Literal saved = lits[i];
      lits.erase(lits.begin() + static_cast<std::ptrdiff_t>(i));
      if (!ok(cur)) lits.insert(lits.begin() + static_cast<std::ptrdiff_t>(i), saved);
    }
  };
  for (std::size_t j = cur.cubes.size(); j-- > 0;) try_remove(cur.cubes[j]);
  try_remove(cur.clause);
  return cur;
}

}  // namespace qinv
