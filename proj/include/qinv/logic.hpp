// Many-sorted first-order logic: signatures, terms, formulas, finite
// structures and their semantics.
#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace qinv {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SortError : public Error {
 public:
  SortError(const std::string& what, std::string subterm, std::string expected,
            std::string actual)
      : Error(what), subterm(std::move(subterm)), expected(std::move(expected)),
        actual(std::move(actual)) {}
  std::string subterm;
  std::string expected;
  std::string actual;
};

class EvalError : public Error {
 public:
  using Error::Error;
};

using SortId = int;
using SymbolId = int;

enum class SymbolKind { Constant, Relation, Function };

struct Symbol {
  std::string name;
  SymbolKind kind = SymbolKind::Relation;
  std::vector<SortId> args;  // empty for constants and nullary relations
  SortId result = -1;        // constants and functions only
  bool is_mutable = false;
};

/// Sorts plus constant, relation and function symbols.
///
/// A doubled (two-state) signature keeps every base symbol at its original id
/// and appends a primed copy `NAME'` for each mutable symbol.
class Signature {
 public:
  SortId add_sort(const std::string& name);
  SymbolId add_symbol(Symbol sym);

  const std::vector<std::string>& sorts() const { return sorts_; }
  const std::vector<Symbol>& symbols() const { return symbols_; }
  const Symbol& symbol(SymbolId id) const { return symbols_.at(id); }
  const std::string& sort_name(SortId id) const { return sorts_.at(id); }

  std::optional<SortId> find_sort(std::string_view name) const;
  std::optional<SymbolId> find_symbol(std::string_view name) const;
  SortId sort_id(std::string_view name) const;  // throws on unknown

  bool is_doubled() const { return base_ != nullptr; }
  /// Base signature of a doubled one (nullptr otherwise).
  const std::shared_ptr<const Signature>& base() const { return base_; }
  /// Primed id of a mutable base symbol in a doubled signature, else the id itself.
  SymbolId primed(SymbolId base_id) const;
  /// For a symbol of a doubled signature: the base id it refers to and whether it is primed.
  std::pair<SymbolId, bool> unprimed(SymbolId id) const;

  friend std::shared_ptr<const Signature> make_doubled(std::shared_ptr<const Signature> base);

 private:
  std::vector<std::string> sorts_;
  std::vector<Symbol> symbols_;
  std::unordered_map<std::string, SortId> sort_index_;
  std::unordered_map<std::string, SymbolId> symbol_index_;
  std::shared_ptr<const Signature> base_;
  std::vector<SymbolId> primed_of_;                 // base id -> primed id
  std::vector<std::pair<SymbolId, bool>> origin_;  // doubled id -> (base id, primed)
};

std::shared_ptr<const Signature> make_doubled(std::shared_ptr<const Signature> base);

// ---------------------------------------------------------------------------
// Terms and formulas. Immutable trees referring to symbols by name.

struct Term;
struct Formula;
using TermPtr = std::shared_ptr<const Term>;
using FormulaPtr = std::shared_ptr<const Formula>;

struct Term {
  enum class Kind { Var, App };
  Kind kind = Kind::Var;
  std::string name;            // variable, constant or function name
  std::vector<TermPtr> args;   // function arguments
};

struct VarDecl {
  std::string name;
  std::string sort;
  bool operator==(const VarDecl&) const = default;
};

struct Formula {
  enum class Kind { And, Or, Not, Implies, Iff, Rel, Eq, Forall, Exists };
  Kind kind = Kind::And;
  std::string name;                // relation name (Rel)
  std::vector<TermPtr> terms;      // Rel arguments, Eq sides
  std::vector<FormulaPtr> kids;    // connective operands, quantifier body
  std::vector<VarDecl> vars;       // quantified variables
};

TermPtr var(std::string name);
TermPtr app(std::string name, std::vector<TermPtr> args = {});

FormulaPtr truth();
FormulaPtr falsity();
FormulaPtr conj(std::vector<FormulaPtr> kids);
FormulaPtr disj(std::vector<FormulaPtr> kids);
FormulaPtr negate(FormulaPtr f);
FormulaPtr implies(FormulaPtr a, FormulaPtr b);
FormulaPtr iff(FormulaPtr a, FormulaPtr b);
FormulaPtr rel(std::string name, std::vector<TermPtr> args = {});
FormulaPtr equals(TermPtr a, TermPtr b);
FormulaPtr forall(std::vector<VarDecl> vars, FormulaPtr body);
FormulaPtr exists(std::vector<VarDecl> vars, FormulaPtr body);

bool is_true(const Formula& f);
bool is_false(const Formula& f);

bool equal(const Term& a, const Term& b);
bool equal(const Formula& a, const Formula& b);
std::size_t hash_value(const Formula& f);

/// Top-level conjuncts (flattening nested ands).
std::vector<FormulaPtr> conjuncts(const FormulaPtr& f);

/// Free variable names in order of first occurrence.
std::vector<std::string> free_vars(const Formula& f);

/// Number of atom occurrences (relations and equalities).
int literal_count(const Formula& f);

/// Throws SortError unless f is well-sorted under sig. `env` gives sorts of
/// free variables.
void sort_check(const Formula& f, const Signature& sig,
                const std::vector<std::pair<std::string, SortId>>& env = {});
/// Sort of a term; throws SortError.
SortId sort_of(const Term& t, const Signature& sig,
               const std::vector<std::pair<std::string, SortId>>& env);

/// Replace each mutable symbol by its primed copy.
FormulaPtr prime(const FormulaPtr& f, const Signature& base);

// ---------------------------------------------------------------------------
// Prenex normal form.

struct PrenexFormula {
  struct Quant {
    bool universal = true;
    VarDecl var;
    bool operator==(const Quant&) const = default;
  };
  std::vector<Quant> prefix;
  FormulaPtr matrix;

  FormulaPtr to_formula() const;
};

/// Negation normal form: no implications or iffs, negations on atoms only.
FormulaPtr nnf(const FormulaPtr& f);
PrenexFormula to_prenex(const FormulaPtr& f);

// ---------------------------------------------------------------------------
// Finite structures.

/// A finite structure. Elements of each sort are 0..size-1; every symbol has a
/// dense table indexed in mixed radix over its argument sorts.
class Structure {
 public:
  Structure() = default;
  Structure(std::shared_ptr<const Signature> sig, std::vector<int> sizes);

  const Signature& signature() const { return *sig_; }
  const std::shared_ptr<const Signature>& signature_ptr() const { return sig_; }
  const std::vector<int>& sizes() const { return sizes_; }
  int size(SortId s) const { return sizes_.at(s); }

  std::size_t table_size(SymbolId sym) const { return tables_.at(sym).size(); }
  std::size_t index(SymbolId sym, std::span<const int> args) const;
  /// Decode a flat table index into its argument tuple.
  std::vector<int> tuple(SymbolId sym, std::size_t index) const;

  bool holds(SymbolId rel, std::span<const int> args) const {
    return tables_[rel][index(rel, args)] != 0;
  }
  int value(SymbolId fn, std::span<const int> args) const {
    return tables_[fn][index(fn, args)];
  }
  int raw(SymbolId sym, std::size_t index) const { return tables_[sym][index]; }
  void set_raw(SymbolId sym, std::size_t index, int v) { tables_[sym][index] = v; }
  void set_holds(SymbolId rel, std::span<const int> args, bool v) {
    tables_[rel][index(rel, args)] = v ? 1 : 0;
  }
  void set_value(SymbolId fn, std::span<const int> args, int v) {
    tables_[fn][index(fn, args)] = v;
  }

  bool operator==(const Structure& o) const;
  std::size_t hash() const;

  /// Restriction of a two-state structure to its pre- or post-state.
  Structure pre_state() const;
  Structure post_state() const;
  /// Two-state structure with the given pre- and post-state; the states must
  /// share sizes and immutable interpretations.
  static Structure combine(const Structure& pre, const Structure& post,
                           std::shared_ptr<const Signature> doubled);

  /// Relabel elements: perm[s][e] is the new name of element e of sort s.
  Structure permuted(const std::vector<std::vector<int>>& perm) const;

  std::string to_string() const;

 private:
  std::shared_ptr<const Signature> sig_;
  std::vector<int> sizes_;
  std::vector<std::vector<int>> tables_;
};

struct StructureHash {
  std::size_t operator()(const Structure& s) const { return s.hash(); }
};

/// An element-to-structure isomorphism, per sort, if one exists (brute force
/// over per-sort permutations; meant for small universes).
std::optional<std::vector<std::vector<int>>> find_isomorphism(const Structure& from,
                                                             const Structure& to);

// ---------------------------------------------------------------------------
// Evaluation.

using Env = std::vector<std::pair<std::string, int>>;

/// Tarskian truth of f in m; env binds free variables (later entries shadow).
bool eval(const Structure& m, const Env& env, const Formula& f);
inline bool eval(const Structure& m, const Formula& f) { return eval(m, {}, f); }

/// A formula compiled against one signature for repeated evaluation.
class CompiledFormula {
 public:
  /// `free` lists free variables with their sorts; they become slots 0..n-1.
  CompiledFormula(const Formula& f, const Signature& sig,
                  const std::vector<std::pair<std::string, SortId>>& free = {});
  bool eval(const Structure& m, std::span<const int> free_values = {}) const;

  struct Node;
  struct TermNode;

 private:
  std::vector<Node> nodes_;
  std::vector<TermNode> terms_;
  int root_ = 0;
  int slots_ = 0;
  friend struct Compiler;
};

struct CompiledFormula::TermNode {
  int slot = -1;              // >= 0: variable slot
  SymbolId symbol = -1;       // otherwise constant / function
  std::vector<int> args;      // term node indices
};

struct CompiledFormula::Node {
  Formula::Kind kind;
  SymbolId symbol = -1;
  std::vector<int> terms;  // term node indices
  std::vector<int> kids;   // node indices
  std::vector<std::pair<int, SortId>> binds;  // quantifier slots
};

/// Existential description of m up to embedding (or isomorphism if exact).
FormulaPtr diagram(const Structure& m, bool exact);

}  // namespace qinv
