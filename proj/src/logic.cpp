#include "qinv/logic.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_set>

namespace qinv {

// ---------------------------------------------------------------------------
// Signature

SortId Signature::add_sort(const std::string& name) {
  if (sort_index_.count(name)) throw Error("duplicate sort '" + name + "'");
  SortId id = static_cast<SortId>(sorts_.size());
  sorts_.push_back(name);
  sort_index_.emplace(name, id);
  return id;
}

SymbolId Signature::add_symbol(Symbol sym) {
  if (symbol_index_.count(sym.name)) throw Error("duplicate symbol '" + sym.name + "'");
  auto check = [&](SortId s) {
    if (s < 0 || s >= static_cast<SortId>(sorts_.size()))
      throw Error("symbol '" + sym.name + "' uses an undeclared sort");
  };
  for (SortId s : sym.args) check(s);
  if (sym.kind == SymbolKind::Relation) {
    sym.result = -1;
  } else {
    check(sym.result);
  }
  if (sym.kind == SymbolKind::Constant && !sym.args.empty())
    throw Error("constant '" + sym.name + "' cannot take arguments");
  if (sym.kind == SymbolKind::Function && sym.args.empty())
    throw Error("function '" + sym.name + "' needs at least one argument");
  SymbolId id = static_cast<SymbolId>(symbols_.size());
  symbol_index_.emplace(sym.name, id);
  symbols_.push_back(std::move(sym));
  return id;
}

std::optional<SortId> Signature::find_sort(std::string_view name) const {
  auto it = sort_index_.find(std::string(name));
  if (it == sort_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<SymbolId> Signature::find_symbol(std::string_view name) const {
  auto it = symbol_index_.find(std::string(name));
  if (it == symbol_index_.end()) return std::nullopt;
  return it->second;
}

SortId Signature::sort_id(std::string_view name) const {
  auto s = find_sort(name);
  if (!s) throw Error("unknown sort '" + std::string(name) + "'");
  return *s;
}

SymbolId Signature::primed(SymbolId base_id) const {
  if (!base_) return base_id;
  return primed_of_.at(base_id);
}

std::pair<SymbolId, bool> Signature::unprimed(SymbolId id) const {
  if (!base_) return {id, false};
  return origin_.at(id);
}

std::shared_ptr<const Signature> make_doubled(std::shared_ptr<const Signature> base) {
  auto d = std::make_shared<Signature>();
  for (const auto& s : base->sorts()) d->add_sort(s);
  const auto& syms = base->symbols();
  for (std::size_t i = 0; i < syms.size(); ++i) {
    d->add_symbol(syms[i]);
    d->primed_of_.push_back(static_cast<SymbolId>(i));
    d->origin_.emplace_back(static_cast<SymbolId>(i), false);
  }
  for (std::size_t i = 0; i < syms.size(); ++i) {
    if (!syms[i].is_mutable) continue;
    Symbol p = syms[i];
    p.name += "'";
    SymbolId pid = d->add_symbol(std::move(p));
    d->primed_of_[i] = pid;
    d->origin_.emplace_back(static_cast<SymbolId>(i), true);
  }
  d->base_ = std::move(base);
  return d;
}

// ---------------------------------------------------------------------------
// Builders

TermPtr var(std::string name) {
  auto t = std::make_shared<Term>();
  t->kind = Term::Kind::Var;
  t->name = std::move(name);
  return t;
}

TermPtr app(std::string name, std::vector<TermPtr> args) {
  auto t = std::make_shared<Term>();
  t->kind = Term::Kind::App;
  t->name = std::move(name);
  t->args = std::move(args);
  return t;
}

namespace {

FormulaPtr make(Formula::Kind kind, std::vector<FormulaPtr> kids) {
  auto f = std::make_shared<Formula>();
  f->kind = kind;
  f->kids = std::move(kids);
  return f;
}

}  // namespace

FormulaPtr truth() {
  static const FormulaPtr t = make(Formula::Kind::And, {});
  return t;
}

FormulaPtr falsity() {
  static const FormulaPtr f = make(Formula::Kind::Or, {});
  return f;
}

FormulaPtr conj(std::vector<FormulaPtr> kids) { return make(Formula::Kind::And, std::move(kids)); }
FormulaPtr disj(std::vector<FormulaPtr> kids) { return make(Formula::Kind::Or, std::move(kids)); }
FormulaPtr negate(FormulaPtr f) { return make(Formula::Kind::Not, {std::move(f)}); }
FormulaPtr implies(FormulaPtr a, FormulaPtr b) {
  return make(Formula::Kind::Implies, {std::move(a), std::move(b)});
}
FormulaPtr iff(FormulaPtr a, FormulaPtr b) {
  return make(Formula::Kind::Iff, {std::move(a), std::move(b)});
}

FormulaPtr rel(std::string name, std::vector<TermPtr> args) {
  auto f = std::make_shared<Formula>();
  f->kind = Formula::Kind::Rel;
  f->name = std::move(name);
  f->terms = std::move(args);
  return f;
}

FormulaPtr equals(TermPtr a, TermPtr b) {
  auto f = std::make_shared<Formula>();
  f->kind = Formula::Kind::Eq;
  f->terms = {std::move(a), std::move(b)};
  return f;
}

namespace {

FormulaPtr quant(Formula::Kind kind, std::vector<VarDecl> vars, FormulaPtr body) {
  if (vars.empty()) return body;
  auto f = std::make_shared<Formula>();
  f->kind = kind;
  f->vars = std::move(vars);
  f->kids = {std::move(body)};
  return f;
}

}  // namespace

FormulaPtr forall(std::vector<VarDecl> vars, FormulaPtr body) {
  return quant(Formula::Kind::Forall, std::move(vars), std::move(body));
}
FormulaPtr exists(std::vector<VarDecl> vars, FormulaPtr body) {
  return quant(Formula::Kind::Exists, std::move(vars), std::move(body));
}

bool is_true(const Formula& f) { return f.kind == Formula::Kind::And && f.kids.empty(); }
bool is_false(const Formula& f) { return f.kind == Formula::Kind::Or && f.kids.empty(); }

bool equal(const Term& a, const Term& b) {
  if (a.kind != b.kind || a.name != b.name || a.args.size() != b.args.size()) return false;
  for (std::size_t i = 0; i < a.args.size(); ++i)
    if (!equal(*a.args[i], *b.args[i])) return false;
  return true;
}

bool equal(const Formula& a, const Formula& b) {
  if (&a == &b) return true;
  if (a.kind != b.kind || a.name != b.name || a.terms.size() != b.terms.size() ||
      a.kids.size() != b.kids.size() || a.vars != b.vars)
    return false;
  for (std::size_t i = 0; i < a.terms.size(); ++i)
    if (!equal(*a.terms[i], *b.terms[i])) return false;
  for (std::size_t i = 0; i < a.kids.size(); ++i)
    if (!equal(*a.kids[i], *b.kids[i])) return false;
  return true;
}

namespace {

void hash_mix(std::size_t& h, std::size_t v) { h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2); }

std::size_t hash_term(const Term& t) {
  std::size_t h = std::hash<std::string>{}(t.name) + static_cast<std::size_t>(t.kind);
  for (const auto& a : t.args) hash_mix(h, hash_term(*a));
  return h;
}

}  // namespace

std::size_t hash_value(const Formula& f) {
  std::size_t h = static_cast<std::size_t>(f.kind) * 131 + std::hash<std::string>{}(f.name);
  for (const auto& t : f.terms) hash_mix(h, hash_term(*t));
  for (const auto& k : f.kids) hash_mix(h, hash_value(*k));
  for (const auto& v : f.vars) {
    hash_mix(h, std::hash<std::string>{}(v.name));
    hash_mix(h, std::hash<std::string>{}(v.sort));
  }
  return h;
}

std::vector<FormulaPtr> conjuncts(const FormulaPtr& f) {
  std::vector<FormulaPtr> out;
  std::function<void(const FormulaPtr&)> go = [&](const FormulaPtr& g) {
    if (g->kind == Formula::Kind::And) {
      for (const auto& k : g->kids) go(k);
    } else {
      out.push_back(g);
    }
  };
  go(f);
  return out;
}

namespace {

void term_free_vars(const Term& t, std::vector<std::string>& bound,
                    std::vector<std::string>& out) {
  if (t.kind == Term::Kind::Var) {
    if (std::find(bound.begin(), bound.end(), t.name) == bound.end() &&
        std::find(out.begin(), out.end(), t.name) == out.end())
      out.push_back(t.name);
    return;
  }
  for (const auto& a : t.args) term_free_vars(*a, bound, out);
}

void formula_free_vars(const Formula& f, std::vector<std::string>& bound,
                       std::vector<std::string>& out) {
  for (const auto& t : f.terms) term_free_vars(*t, bound, out);
  std::size_t mark = bound.size();
  for (const auto& v : f.vars) bound.push_back(v.name);
  for (const auto& k : f.kids) formula_free_vars(*k, bound, out);
  bound.resize(mark);
}

}  // namespace

std::vector<std::string> free_vars(const Formula& f) {
  std::vector<std::string> bound, out;
  formula_free_vars(f, bound, out);
  return out;
}

int literal_count(const Formula& f) {
  if (f.kind == Formula::Kind::Rel || f.kind == Formula::Kind::Eq) return 1;
  int n = 0;
  for (const auto& k : f.kids) n += literal_count(*k);
  return n;
}

// ---------------------------------------------------------------------------
// Sort checking

namespace {

std::string show_term(const Term& t) {
  if (t.args.empty()) return t.name;
  std::string s = "(" + t.name;
  for (const auto& a : t.args) s += " " + show_term(*a);
  return s + ")";
}

using SortEnv = std::vector<std::pair<std::string, SortId>>;

const SortId* lookup(const SortEnv& env, const std::string& name) {
  for (auto it = env.rbegin(); it != env.rend(); ++it)
    if (it->first == name) return &it->second;
  return nullptr;
}

void expect_sort(const Term& t, const Signature& sig, const SortEnv& env, SortId want) {
  SortId got = sort_of(t, sig, env);
  if (got != want)
    throw SortError("sort mismatch at " + show_term(t) + ": expected " + sig.sort_name(want) +
                        ", got " + sig.sort_name(got),
                    show_term(t), sig.sort_name(want), sig.sort_name(got));
}

void check(const Formula& f, const Signature& sig, SortEnv& env) {
  switch (f.kind) {
    case Formula::Kind::And:
    case Formula::Kind::Or:
    case Formula::Kind::Not:
    case Formula::Kind::Implies:
    case Formula::Kind::Iff:
      for (const auto& k : f.kids) check(*k, sig, env);
      return;
    case Formula::Kind::Rel: {
      auto id = sig.find_symbol(f.name);
      if (!id || sig.symbol(*id).kind != SymbolKind::Relation)
        throw SortError("unknown relation '" + f.name + "'", f.name, "relation", "unknown");
      const auto& sym = sig.symbol(*id);
      if (sym.args.size() != f.terms.size())
        throw SortError("arity mismatch for '" + f.name + "'", f.name,
                        std::to_string(sym.args.size()), std::to_string(f.terms.size()));
      for (std::size_t i = 0; i < f.terms.size(); ++i) expect_sort(*f.terms[i], sig, env, sym.args[i]);
      return;
    }
    case Formula::Kind::Eq: {
      SortId a = sort_of(*f.terms[0], sig, env);
      expect_sort(*f.terms[1], sig, env, a);
      return;
    }
    case Formula::Kind::Forall:
    case Formula::Kind::Exists: {
      std::size_t mark = env.size();
      for (const auto& v : f.vars) {
        auto s = sig.find_sort(v.sort);
        if (!s) throw SortError("unknown sort '" + v.sort + "'", v.name, "sort", v.sort);
        env.emplace_back(v.name, *s);
      }
      check(*f.kids[0], sig, env);
      env.resize(mark);
      return;
    }
  }
}

}  // namespace

SortId sort_of(const Term& t, const Signature& sig, const SortEnv& env) {
  if (t.kind == Term::Kind::Var) {
    if (const SortId* s = lookup(env, t.name)) return *s;
    throw SortError("unbound variable '" + t.name + "'", t.name, "bound variable", "unbound");
  }
  auto id = sig.find_symbol(t.name);
  if (!id) throw SortError("unknown symbol '" + t.name + "'", t.name, "symbol", "unknown");
  const auto& sym = sig.symbol(*id);
  if (sym.kind == SymbolKind::Relation)
    throw SortError("relation '" + t.name + "' used as a term", t.name, "term", "relation");
  if (sym.args.size() != t.args.size())
    throw SortError("arity mismatch for '" + t.name + "'", show_term(t),
                    std::to_string(sym.args.size()), std::to_string(t.args.size()));
  for (std::size_t i = 0; i < t.args.size(); ++i) expect_sort(*t.args[i], sig, env, sym.args[i]);
  return sym.result;
}

void sort_check(const Formula& f, const Signature& sig, const SortEnv& env) {
  SortEnv e = env;
  check(f, sig, e);
}

// ---------------------------------------------------------------------------
// Priming

namespace {

TermPtr prime_term(const TermPtr& t, const Signature& base) {
  if (t->kind == Term::Kind::Var) return t;
  auto id = base.find_symbol(t->name);
  if (!id) throw Error("cannot prime '" + t->name + "': not a symbol of the base vocabulary");
  std::vector<TermPtr> args;
  args.reserve(t->args.size());
  for (const auto& a : t->args) args.push_back(prime_term(a, base));
  const auto& sym = base.symbol(*id);
  return app(sym.is_mutable ? t->name + "'" : t->name, std::move(args));
}

}  // namespace

FormulaPtr prime(const FormulaPtr& f, const Signature& base) {
  auto out = std::make_shared<Formula>(*f);
  if (f->kind == Formula::Kind::Rel) {
    auto id = base.find_symbol(f->name);
    if (!id) throw Error("cannot prime '" + f->name + "': not a symbol of the base vocabulary");
    if (base.symbol(*id).is_mutable) out->name += "'";
  }
  for (auto& t : out->terms) t = prime_term(t, base);
  for (auto& k : out->kids) k = prime(k, base);
  return out;
}

// ---------------------------------------------------------------------------
// NNF and prenexing

namespace {

FormulaPtr nnf_neg(const FormulaPtr& f);

FormulaPtr nnf_pos(const FormulaPtr& f) {
  switch (f->kind) {
    case Formula::Kind::Rel:
    case Formula::Kind::Eq:
      return f;
    case Formula::Kind::Not:
      return nnf_neg(f->kids[0]);
    case Formula::Kind::And:
    case Formula::Kind::Or: {
      std::vector<FormulaPtr> kids;
      for (const auto& k : f->kids) kids.push_back(nnf_pos(k));
      return f->kind == Formula::Kind::And ? conj(std::move(kids)) : disj(std::move(kids));
    }
    case Formula::Kind::Implies:
      return disj({nnf_neg(f->kids[0]), nnf_pos(f->kids[1])});
    case Formula::Kind::Iff:
      return conj({disj({nnf_neg(f->kids[0]), nnf_pos(f->kids[1])}),
                   disj({nnf_pos(f->kids[0]), nnf_neg(f->kids[1])})});
    case Formula::Kind::Forall:
      return forall(f->vars, nnf_pos(f->kids[0]));
    case Formula::Kind::Exists:
      return exists(f->vars, nnf_pos(f->kids[0]));
  }
  return f;
}

FormulaPtr nnf_neg(const FormulaPtr& f) {
  switch (f->kind) {
    case Formula::Kind::Rel:
    case Formula::Kind::Eq:
      return negate(f);
    case Formula::Kind::Not:
      return nnf_pos(f->kids[0]);
    case Formula::Kind::And:
    case Formula::Kind::Or: {
      std::vector<FormulaPtr> kids;
      for (const auto& k : f->kids) kids.push_back(nnf_neg(k));
      return f->kind == Formula::Kind::And ? disj(std::move(kids)) : conj(std::move(kids));
    }
    case Formula::Kind::Implies:
      return conj({nnf_pos(f->kids[0]), nnf_neg(f->kids[1])});
    case Formula::Kind::Iff:
      return disj({conj({nnf_pos(f->kids[0]), nnf_neg(f->kids[1])}),
                   conj({nnf_neg(f->kids[0]), nnf_pos(f->kids[1])})});
    case Formula::Kind::Forall:
      return exists(f->vars, nnf_neg(f->kids[0]));
    case Formula::Kind::Exists:
      return forall(f->vars, nnf_neg(f->kids[0]));
  }
  return f;
}

using Renaming = std::vector<std::pair<std::string, std::string>>;

TermPtr rename_term(const TermPtr& t, const Renaming& ren) {
  if (t->kind == Term::Kind::Var) {
    for (auto it = ren.rbegin(); it != ren.rend(); ++it)
      if (it->first == t->name) return it->second == t->name ? t : var(it->second);
    return t;
  }
  std::vector<TermPtr> args;
  for (const auto& a : t->args) args.push_back(rename_term(a, ren));
  return app(t->name, std::move(args));
}

struct Prenexer {
  std::set<std::string> taken;
  std::vector<PrenexFormula::Quant> prefix;

  std::string fresh(const std::string& base) {
    if (!taken.count(base)) return base;
    for (int i = 1;; ++i) {
      std::string cand = base + "_" + std::to_string(i);
      if (!taken.count(cand)) return cand;
    }
  }

  FormulaPtr pull(const FormulaPtr& f, Renaming& ren) {
    switch (f->kind) {
      case Formula::Kind::Rel:
      case Formula::Kind::Eq: {
        auto out = std::make_shared<Formula>(*f);
        for (auto& t : out->terms) t = rename_term(t, ren);
        return out;
      }
      case Formula::Kind::Not:
        return negate(pull(f->kids[0], ren));
      case Formula::Kind::And:
      case Formula::Kind::Or: {
        std::vector<FormulaPtr> kids;
        for (const auto& k : f->kids) kids.push_back(pull(k, ren));
        return f->kind == Formula::Kind::And ? conj(std::move(kids)) : disj(std::move(kids));
      }
      case Formula::Kind::Forall:
      case Formula::Kind::Exists: {
        std::size_t mark = ren.size();
        for (const auto& v : f->vars) {
          std::string name = fresh(v.name);
          taken.insert(name);
          ren.emplace_back(v.name, name);
          prefix.push_back({f->kind == Formula::Kind::Forall, VarDecl{name, v.sort}});
        }
        FormulaPtr body = pull(f->kids[0], ren);
        ren.resize(mark);
        return body;
      }
      default:
        throw Error("prenex: unexpected connective after NNF");
    }
  }
};

}  // namespace

FormulaPtr nnf(const FormulaPtr& f) { return nnf_pos(f); }

PrenexFormula to_prenex(const FormulaPtr& f) {
  Prenexer p;
  for (const auto& v : free_vars(*f)) p.taken.insert(v);
  Renaming ren;
  FormulaPtr matrix = p.pull(nnf(f), ren);
  return PrenexFormula{std::move(p.prefix), std::move(matrix)};
}

FormulaPtr PrenexFormula::to_formula() const {
  FormulaPtr body = matrix;
  std::size_t end = prefix.size();
  while (end > 0) {
    std::size_t begin = end - 1;
    while (begin > 0 && prefix[begin - 1].universal == prefix[end - 1].universal) --begin;
    std::vector<VarDecl> vars;
    for (std::size_t i = begin; i < end; ++i) vars.push_back(prefix[i].var);
    body = prefix[end - 1].universal ? forall(std::move(vars), body) : exists(std::move(vars), body);
    end = begin;
  }
  return body;
}

// ---------------------------------------------------------------------------
// Structures

Structure::Structure(std::shared_ptr<const Signature> sig, std::vector<int> sizes)
    : sig_(std::move(sig)), sizes_(std::move(sizes)) {
  if (sizes_.size() != sig_->sorts().size()) throw Error("structure: wrong number of sort sizes");
  for (int n : sizes_)
    if (n < 1) throw Error("structure: universes must be nonempty");
  tables_.reserve(sig_->symbols().size());
  for (const auto& sym : sig_->symbols()) {
    std::size_t n = 1;
    for (SortId s : sym.args) n *= static_cast<std::size_t>(sizes_[s]);
    tables_.emplace_back(n, 0);
  }
}

std::size_t Structure::index(SymbolId sym, std::span<const int> args) const {
  const auto& s = sig_->symbol(sym);
  std::size_t idx = 0;
  for (std::size_t i = 0; i < s.args.size(); ++i)
    idx = idx * static_cast<std::size_t>(sizes_[s.args[i]]) + static_cast<std::size_t>(args[i]);
  return idx;
}

std::vector<int> Structure::tuple(SymbolId sym, std::size_t index) const {
  const auto& s = sig_->symbol(sym);
  std::vector<int> out(s.args.size());
  for (std::size_t i = s.args.size(); i-- > 0;) {
    auto n = static_cast<std::size_t>(sizes_[s.args[i]]);
    out[i] = static_cast<int>(index % n);
    index /= n;
  }
  return out;
}

bool Structure::operator==(const Structure& o) const {
  if (sizes_ != o.sizes_ || tables_ != o.tables_) return false;
  if (sig_ == o.sig_) return true;
  if (!sig_ || !o.sig_) return false;
  if (sig_->sorts() != o.sig_->sorts() || sig_->symbols().size() != o.sig_->symbols().size())
    return false;
  for (std::size_t i = 0; i < sig_->symbols().size(); ++i)
    if (sig_->symbols()[i].name != o.sig_->symbols()[i].name) return false;
  return true;
}

std::size_t Structure::hash() const {
  std::size_t h = 0;
  for (int n : sizes_) hash_mix(h, static_cast<std::size_t>(n));
  for (const auto& t : tables_) {
    std::size_t th = t.size();
    for (int v : t) th = th * 31 + static_cast<std::size_t>(v);
    hash_mix(h, th);
  }
  return h;
}

Structure Structure::pre_state() const {
  if (!sig_->is_doubled()) throw Error("pre_state: not a two-state structure");
  Structure out(sig_->base(), sizes_);
  for (std::size_t i = 0; i < out.tables_.size(); ++i) out.tables_[i] = tables_[i];
  return out;
}

Structure Structure::post_state() const {
  if (!sig_->is_doubled()) throw Error("post_state: not a two-state structure");
  Structure out(sig_->base(), sizes_);
  for (std::size_t i = 0; i < out.tables_.size(); ++i)
    out.tables_[i] = tables_[sig_->primed(static_cast<SymbolId>(i))];
  return out;
}

Structure Structure::combine(const Structure& pre, const Structure& post,
                             std::shared_ptr<const Signature> doubled) {
  if (pre.sizes_ != post.sizes_) throw Error("combine: universes differ");
  Structure out(doubled, pre.sizes_);
  for (std::size_t i = 0; i < pre.tables_.size(); ++i) {
    const auto& sym = pre.sig_->symbol(static_cast<SymbolId>(i));
    if (!sym.is_mutable && pre.tables_[i] != post.tables_[i])
      throw Error("combine: immutable symbol '" + sym.name + "' differs");
    out.tables_[i] = pre.tables_[i];
    out.tables_[doubled->primed(static_cast<SymbolId>(i))] = post.tables_[i];
  }
  return out;
}

Structure Structure::permuted(const std::vector<std::vector<int>>& perm) const {
  Structure out(sig_, sizes_);
  for (std::size_t sym = 0; sym < tables_.size(); ++sym) {
    const auto& s = sig_->symbol(static_cast<SymbolId>(sym));
    for (std::size_t idx = 0; idx < tables_[sym].size(); ++idx) {
      auto args = tuple(static_cast<SymbolId>(sym), idx);
      for (std::size_t i = 0; i < args.size(); ++i) args[i] = perm[s.args[i]][args[i]];
      int v = tables_[sym][idx];
      if (s.kind != SymbolKind::Relation) v = perm[s.result][v];
      out.tables_[sym][out.index(static_cast<SymbolId>(sym), args)] = v;
    }
  }
  return out;
}

std::string Structure::to_string() const {
  std::ostringstream os;
  auto elem = [&](SortId s, int e) { return sig_->sort_name(s) + std::to_string(e); };
  os << "(structure";
  for (std::size_t s = 0; s < sizes_.size(); ++s)
    os << " (" << sig_->sort_name(static_cast<SortId>(s)) << " " << sizes_[s] << ")";
  for (std::size_t sym = 0; sym < tables_.size(); ++sym) {
    const auto& s = sig_->symbol(static_cast<SymbolId>(sym));
    for (std::size_t idx = 0; idx < tables_[sym].size(); ++idx) {
      auto args = tuple(static_cast<SymbolId>(sym), idx);
      std::string head = s.name;
      if (!args.empty()) {
        head = "(" + s.name;
        for (std::size_t i = 0; i < args.size(); ++i) head += " " + elem(s.args[i], args[i]);
        head += ")";
      }
      int v = tables_[sym][idx];
      if (s.kind == SymbolKind::Relation) {
        if (v) os << " " << (args.empty() ? "(" + s.name + ")" : head);
      } else {
        os << " (= " << head << " " << elem(s.result, v) << ")";
      }
    }
  }
  os << ")";
  return os.str();
}

namespace {

bool next_assignment(std::vector<std::vector<int>>& perm) {
  for (std::size_t s = perm.size(); s-- > 0;)
    if (std::next_permutation(perm[s].begin(), perm[s].end())) return true;
  return false;
}

}  // namespace

std::optional<std::vector<std::vector<int>>> find_isomorphism(const Structure& from,
                                                             const Structure& to) {
  if (from.sizes() != to.sizes()) return std::nullopt;
  std::vector<std::vector<int>> perm(from.sizes().size());
  for (std::size_t s = 0; s < perm.size(); ++s) {
    perm[s].resize(static_cast<std::size_t>(from.sizes()[s]));
    std::iota(perm[s].begin(), perm[s].end(), 0);
  }
  do {
    if (from.permuted(perm) == to) return perm;
  } while (next_assignment(perm));
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Evaluation

struct Compiler {
  const Signature& sig;
  CompiledFormula& out;
  std::vector<std::pair<std::string, int>> scope;  // name -> slot
  int next_slot = 0;

  int term(const Term& t) {
    CompiledFormula::TermNode n;
    if (t.kind == Term::Kind::Var) {
      for (auto it = scope.rbegin(); it != scope.rend(); ++it)
        if (it->first == t.name) {
          n.slot = it->second;
          break;
        }
      if (n.slot < 0) throw EvalError("unbound variable '" + t.name + "'");
    } else {
      auto id = sig.find_symbol(t.name);
      if (!id || sig.symbol(*id).kind == SymbolKind::Relation)
        throw EvalError("unknown function or constant '" + t.name + "'");
      n.symbol = *id;
      for (const auto& a : t.args) n.args.push_back(term(*a));
    }
    out.terms_.push_back(std::move(n));
    return static_cast<int>(out.terms_.size()) - 1;
  }

  int formula(const Formula& f) {
    CompiledFormula::Node n{f.kind};
    switch (f.kind) {
      case Formula::Kind::Rel: {
        auto id = sig.find_symbol(f.name);
        if (!id || sig.symbol(*id).kind != SymbolKind::Relation)
          throw EvalError("unknown relation '" + f.name + "'");
        n.symbol = *id;
        for (const auto& t : f.terms) n.terms.push_back(term(*t));
        break;
      }
      case Formula::Kind::Eq:
        for (const auto& t : f.terms) n.terms.push_back(term(*t));
        break;
      case Formula::Kind::Forall:
      case Formula::Kind::Exists: {
        std::size_t mark = scope.size();
        for (const auto& v : f.vars) {
          auto s = sig.find_sort(v.sort);
          if (!s) throw EvalError("unknown sort '" + v.sort + "'");
          int slot = next_slot++;
          scope.emplace_back(v.name, slot);
          n.binds.emplace_back(slot, *s);
        }
        n.kids.push_back(formula(*f.kids[0]));
        scope.resize(mark);
        break;
      }
      default:
        for (const auto& k : f.kids) n.kids.push_back(formula(*k));
    }
    out.nodes_.push_back(std::move(n));
    return static_cast<int>(out.nodes_.size()) - 1;
  }
};

CompiledFormula::CompiledFormula(const Formula& f, const Signature& sig,
                                 const std::vector<std::pair<std::string, SortId>>& free) {
  Compiler c{sig, *this, {}, 0};
  for (const auto& [name, sort] : free) c.scope.emplace_back(name, c.next_slot++);
  root_ = c.formula(f);
  slots_ = c.next_slot;
}

namespace {

struct Evaluator {
  const std::vector<CompiledFormula::Node>& nodes;
  const std::vector<CompiledFormula::TermNode>& terms;
  const Structure& m;
  std::vector<int>& slots;

  int term(int i) const {
    const auto& t = terms[i];
    if (t.slot >= 0) return slots[t.slot];
    int buf[8];
    std::vector<int> big;
    int* args = buf;
    if (t.args.size() > 8) {
      big.resize(t.args.size());
      args = big.data();
    }
    for (std::size_t k = 0; k < t.args.size(); ++k) args[k] = term(t.args[k]);
    return m.value(t.symbol, std::span<const int>(args, t.args.size()));
  }

  bool quant(const CompiledFormula::Node& n, std::size_t level, bool universal) const {
    if (level == n.binds.size()) return eval(n.kids[0]);
    auto [slot, sort] = n.binds[level];
    int size = m.size(sort);
    for (int e = 0; e < size; ++e) {
      slots[slot] = e;
      bool v = quant(n, level + 1, universal);
      if (universal && !v) return false;
      if (!universal && v) return true;
    }
    return universal;
  }

  bool eval(int i) const {
    const auto& n = nodes[i];
    switch (n.kind) {
      case Formula::Kind::And:
        for (int k : n.kids)
          if (!eval(k)) return false;
        return true;
      case Formula::Kind::Or:
        for (int k : n.kids)
          if (eval(k)) return true;
        return false;
      case Formula::Kind::Not:
        return !eval(n.kids[0]);
      case Formula::Kind::Implies:
        return !eval(n.kids[0]) || eval(n.kids[1]);
      case Formula::Kind::Iff:
        return eval(n.kids[0]) == eval(n.kids[1]);
      case Formula::Kind::Eq:
        return term(n.terms[0]) == term(n.terms[1]);
      case Formula::Kind::Rel: {
        int buf[8];
        std::vector<int> big;
        int* args = buf;
        if (n.terms.size() > 8) {
          big.resize(n.terms.size());
          args = big.data();
        }
        for (std::size_t k = 0; k < n.terms.size(); ++k) args[k] = term(n.terms[k]);
        return m.holds(n.symbol, std::span<const int>(args, n.terms.size()));
      }
      case Formula::Kind::Forall:
        return quant(n, 0, true);
      case Formula::Kind::Exists:
        return quant(n, 0, false);
    }
    return false;
  }
};

}  // namespace

bool CompiledFormula::eval(const Structure& m, std::span<const int> free_values) const {
  std::vector<int> slots(static_cast<std::size_t>(std::max(slots_, 1)), 0);
  std::copy(free_values.begin(), free_values.end(), slots.begin());
  Evaluator ev{nodes_, terms_, m, slots};
  return ev.eval(root_);
}

bool eval(const Structure& m, const Env& env, const Formula& f) {
  std::vector<std::pair<std::string, SortId>> free;
  std::vector<int> values;
  for (const auto& [name, e] : env) {
    free.emplace_back(name, -1);
    values.push_back(e);
  }
  CompiledFormula c(f, m.signature(), free);
  return c.eval(m, values);
}

// ---------------------------------------------------------------------------
// Diagrams

FormulaPtr diagram(const Structure& m, bool exact) {
  const Signature& sig = m.signature();
  std::vector<int> offset(sig.sorts().size(), 0);
  int total = 0;
  for (std::size_t s = 0; s < sig.sorts().size(); ++s) {
    offset[s] = total;
    total += m.size(static_cast<SortId>(s));
  }
  auto v = [&](SortId s, int e) { return var("v" + std::to_string(offset[s] + e)); };

  std::vector<VarDecl> vars;
  std::vector<FormulaPtr> parts;
  for (std::size_t s = 0; s < sig.sorts().size(); ++s) {
    for (int e = 0; e < m.size(static_cast<SortId>(s)); ++e)
      vars.push_back({"v" + std::to_string(offset[s] + e), sig.sort_name(static_cast<SortId>(s))});
  }
  for (std::size_t s = 0; s < sig.sorts().size(); ++s) {
    int n = m.size(static_cast<SortId>(s));
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        parts.push_back(negate(equals(v(static_cast<SortId>(s), i), v(static_cast<SortId>(s), j))));
  }
  auto args_of = [&](const Symbol& sym, const std::vector<int>& tup) {
    std::vector<TermPtr> args;
    for (std::size_t i = 0; i < tup.size(); ++i) args.push_back(v(sym.args[i], tup[i]));
    return args;
  };
  const auto& syms = sig.symbols();
  for (SymbolKind kind : {SymbolKind::Relation, SymbolKind::Function, SymbolKind::Constant}) {
    for (std::size_t id = 0; id < syms.size(); ++id) {
      const auto& sym = syms[id];
      if (sym.kind != kind) continue;
      for (std::size_t idx = 0; idx < m.table_size(static_cast<SymbolId>(id)); ++idx) {
        auto tup = m.tuple(static_cast<SymbolId>(id), idx);
        int val = m.raw(static_cast<SymbolId>(id), idx);
        if (kind == SymbolKind::Relation) {
          auto atom = rel(sym.name, args_of(sym, tup));
          parts.push_back(val ? atom : negate(atom));
        } else {
          parts.push_back(equals(app(sym.name, args_of(sym, tup)), v(sym.result, val)));
        }
      }
    }
  }
  if (exact) {
    for (std::size_t s = 0; s < sig.sorts().size(); ++s) {
      std::vector<FormulaPtr> alts;
      for (int e = 0; e < m.size(static_cast<SortId>(s)); ++e)
        alts.push_back(equals(var("z"), v(static_cast<SortId>(s), e)));
      parts.push_back(forall({{"z", sig.sort_name(static_cast<SortId>(s))}}, disj(std::move(alts))));
    }
  }
  return exists(std::move(vars), conj(std::move(parts)));
}

}  // namespace qinv
