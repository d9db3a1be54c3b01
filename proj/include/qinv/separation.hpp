// Separation: find a prenex formula with a fixed quantifier prefix and a
// k-term pDNF matrix that agrees with a set of structure constraints.
#pragma once

#include <memory>
#include <optional>
#include <stop_token>
#include <string>
#include <unordered_map>
#include <vector>

#include "qinv/logic.hpp"
#include "qinv/sat.hpp"

namespace qinv {

struct QPrefix {
  struct Quant {
    bool universal = true;
    SortId sort = 0;
    std::string name;
    std::string sort_name;
    bool operator==(const Quant&) const = default;
  };
  std::vector<Quant> quants;

  std::size_t depth() const { return quants.size(); }
  int alternations() const;
  int existentials() const;
  bool starts_universal() const { return !quants.empty() && quants[0].universal; }
  bool all_universal() const { return existentials() == 0; }
  /// Occurrences of each sort (indexed by SortId, sized to `nsorts`).
  std::vector<int> sort_counts(std::size_t nsorts) const;

  /// Same kinds and sorts (names ignored).
  bool same_shape(const QPrefix& o) const;
  std::string shape_key() const;
  /// Human-readable, e.g. "forall node, exists quorum".
  std::string to_string(const Signature& sig) const;
};

/// Prefix with kinds/sorts and canonical variable names (capitalized sort
/// name plus a per-sort index, e.g. Node1, Node2).
QPrefix make_prefix(const Signature& sig, const std::vector<std::pair<bool, SortId>>& shape);

struct PDNFTemplate {
  int k = 1;                  // number of terms; k = 1 is a single clause
  int literals_per_cube = 5;  // cap for cubes 2..k
  int depth_cap = 1;          // function nesting in literal terms
};

struct Literal {
  FormulaPtr atom;
  bool positive = true;
  FormulaPtr formula() const { return positive ? atom : negate(atom); }
};

/// Atoms over the prefix variables, constants and function applications,
/// each followed by its negation.
std::vector<Literal> literal_universe(const Signature& sig, const QPrefix& prefix, int depth_cap = 1);

struct SepConstraint {
  enum class Kind { Positive, Negative, Implication };
  Kind kind = Kind::Positive;
  std::shared_ptr<const Structure> first;
  std::shared_ptr<const Structure> second;  // implication post-state

  static SepConstraint positive(Structure s);
  static SepConstraint negative(Structure s);
  static SepConstraint implication(Structure pre, Structure post);
  bool operator==(const SepConstraint& o) const;
  std::size_t hash() const;
};

struct SepConstraintHash {
  std::size_t operator()(const SepConstraint& c) const { return c.hash(); }
};

/// A prenex formula with a pDNF matrix: (clause literals) ∨ cube_2 ∨ … ∨ cube_k.
/// `clause` holds the negations of the first (negated) cube's literals.
struct PDNF {
  QPrefix prefix;
  std::vector<Literal> clause;
  std::vector<std::vector<Literal>> cubes;

  FormulaPtr matrix() const;
  FormulaPtr to_formula() const;
  int literal_count() const;
};

/// Truth of f on a constraint: positive/negative/implication semantics.
bool satisfies(const FormulaPtr& f, const SepConstraint& c);

enum class SepStatus { Separated, Unsep, Unknown };

struct SepResult {
  SepStatus status = SepStatus::Unknown;
  std::optional<PDNF> separator;
};

/// Incremental separation for one prefix. Each constraint gets an activation
/// literal; a solve uses the currently active set.
class Separator {
 public:
  Separator(std::shared_ptr<const Signature> sig, QPrefix prefix, PDNFTemplate tmpl);
  ~Separator();
  Separator(const Separator&) = delete;
  Separator& operator=(const Separator&) = delete;

  const QPrefix& prefix() const;
  const std::vector<Literal>& literals() const;
  /// Number of presence variables (k times the literal count).
  std::size_t presence_vars() const;

  /// Make c active (adding its encoding on first use).
  void activate(const SepConstraint& c);
  /// Deactivate all constraints.
  void reset_active();
  std::size_t active_count() const;

  SepResult solve(std::stop_token stop = {});

  /// Debug: DIMACS of the encoding so far.
  void dump_dimacs(std::ostream& out) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// One-shot separation with a fresh solver.
SepResult separate(const std::shared_ptr<const Signature>& sig, const QPrefix& prefix,
                   const PDNFTemplate& tmpl, const std::vector<SepConstraint>& constraints,
                   std::stop_token stop = {});

/// Greedily drop literals (last term first, last literal first) while every
/// constraint stays satisfied.
PDNF minimize_matrix(const PDNF& sep, const std::vector<SepConstraint>& constraints);

}  // namespace qinv
