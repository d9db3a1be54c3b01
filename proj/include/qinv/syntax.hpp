// S-expression surface syntax for transition systems and formulas.
#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qinv/logic.hpp"

namespace qinv {

class ParseError : public Error {
 public:
  ParseError(const std::string& msg, int line, int col)
      : Error(std::to_string(line) + ":" + std::to_string(col) + ": " + msg), line(line), col(col) {}
  int line;
  int col;
};

struct SExpr {
  bool is_atom = true;
  std::string atom;
  std::vector<SExpr> list;
  int line = 0;
  int col = 0;
};

/// All top-level s-expressions of `text`; `;` starts a line comment.
std::vector<SExpr> read_sexprs(std::string_view text);

struct Transition {
  std::string name;
  FormulaPtr formula;  // over the doubled signature
};

struct TransitionSystem {
  std::string name;
  std::shared_ptr<const Signature> sig;   // single vocabulary
  std::shared_ptr<const Signature> sig2;  // doubled vocabulary
  std::vector<FormulaPtr> axioms;
  std::vector<FormulaPtr> inits;
  std::vector<Transition> transitions;
  std::vector<FormulaPtr> safeties;
  std::vector<std::pair<SortId, SortId>> epr_edges;
  std::vector<std::string> comments;

  /// Disjunction of all transitions.
  FormulaPtr tr() const;
  /// Conjunction of the axioms, and the same over primed symbols.
  FormulaPtr ax() const;
  FormulaPtr ax_primed() const;
  FormulaPtr init() const;
  FormulaPtr safe() const;
};

TransitionSystem parse_system(std::string_view text, std::string name = {});
TransitionSystem load_system(const std::string& path);

/// Parse one formula over `sig`. Primed symbols are rejected unless `sig` is doubled.
FormulaPtr parse_formula(std::string_view text, const Signature& sig);
FormulaPtr parse_formula(const SExpr& e, const Signature& sig);
/// Every top-level form of `text`, each either a formula or `(invariant F)`.
std::vector<FormulaPtr> parse_formula_list(std::string_view text, const Signature& sig);

std::string print_formula(const Formula& f);
std::string print_term(const Term& t);

}  // namespace qinv
