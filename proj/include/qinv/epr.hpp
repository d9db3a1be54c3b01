// Skolem edges between sorts and the acyclicity discipline of EPR mode.
#pragma once

#include <set>
#include <string>
#include <utility>

#include "qinv/separation.hpp"
#include "qinv/syntax.hpp"

namespace qinv {

using EdgeSet = std::set<std::pair<SortId, SortId>>;

/// Edges from every universal sort to each later existential sort.
EdgeSet skolem_edges(const QPrefix& prefix);
bool prefix_allowed(const QPrefix& prefix, const EdgeSet& allowed);

/// Argument-to-result edges of the signature's functions.
EdgeSet function_edges(const Signature& sig);
bool is_acyclic(const EdgeSet& edges, std::size_t nsorts);

/// Skolem edges of f read in negation normal form (existentials nested under
/// universals).
EdgeSet formula_skolem_edges(const FormulaPtr& f, const Signature& sig);

struct EprCheck {
  bool ok = true;
  std::string message;
  EdgeSet allowed;  // declared edges plus function edges
};

/// Declared and function edges must be acyclic, and every system formula
/// (safety in both polarities) may only create allowed edges.
EprCheck check_epr_system(const TransitionSystem& sys);

std::string edges_to_string(const EdgeSet& edges, const Signature& sig);

}  // namespace qinv
