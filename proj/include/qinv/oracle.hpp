// Bounded finite-model finding for one- and two-state queries.
#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <span>
#include <stop_token>
#include <string>
#include <unordered_map>
#include <vector>

#include "qinv/logic.hpp"
#include "qinv/sat.hpp"
#include "qinv/syntax.hpp"

namespace qinv {

enum class Verdict { Model, UnsatAtBound, Unsat, Unknown };

struct OracleResult {
  Verdict verdict = Verdict::Unknown;
  std::optional<Structure> model;
  std::vector<int> bound;   // per-sort bound searched (UnsatAtBound)
  std::string reason;       // Unknown: "budget", "cancelled", "external-timeout", "model-parse"
  int asserted = 0;         // incremental_solve: formulas asserted beyond the core

  bool sat() const { return verdict == Verdict::Model; }
  bool unsat() const { return verdict == Verdict::UnsatAtBound || verdict == Verdict::Unsat; }
  bool unknown() const { return verdict == Verdict::Unknown; }
};

struct Query {
  std::shared_ptr<const Signature> sig;  // the doubled signature for two-state queries
  std::vector<FormulaPtr> assertions;
  std::vector<int> bounds;  // per sort of sig (base sorts)
};

struct SolveOptions {
  std::int64_t conflict_budget = -1;  // per SAT call; negative = unlimited
  std::stop_token stop;
  std::ostream* dimacs = nullptr;     // debug: dump the grounded problem
};

/// One SAT instance holding the grounding of formulas over all universes up
/// to `bounds`. Each element carries a presence variable, so one instance
/// covers every smaller universe; sizes are selected with assumptions.
class Grounder {
 public:
  Grounder(std::shared_ptr<const Signature> sig, std::vector<int> bounds);
  ~Grounder();
  Grounder(const Grounder&) = delete;
  Grounder& operator=(const Grounder&) = delete;

  const Signature& signature() const;
  const std::vector<int>& bounds() const;

  /// Assert f unconditionally.
  void assert_formula(const FormulaPtr& f);
  /// Literal that, when assumed, enforces f. Cached per formula.
  int guard(const FormulaPtr& f);
  /// Number of distinct guarded formulas.
  std::size_t guard_count() const;

  /// Smallest model (total size, then lexicographic sizes) under the given
  /// guards; `verify` lists the formulas to re-check on the decoded model.
  OracleResult solve(std::span<const int> guards, const std::vector<FormulaPtr>& verify,
                     const SolveOptions& opts);

  void dump_dimacs(std::ostream& out) const;
  std::int64_t sat_calls() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Sorts that matter for the satisfiability of fs (quantified, or argument or
/// result sorts of mentioned symbols).
std::vector<bool> relevant_sorts(const Signature& sig, const std::vector<FormulaPtr>& fs);

OracleResult bounded_solve(const Query& q, const SolveOptions& opts = {});

/// Assert `core`, then add violated members of `assertions` one at a time.
OracleResult incremental_solve(const std::shared_ptr<const Signature>& sig,
                               const std::vector<FormulaPtr>& assertions,
                               const std::vector<FormulaPtr>& core, const std::vector<int>& bounds,
                               const SolveOptions& opts = {});

struct CheckResult {
  enum class Kind { Valid, Cex, Unknown };
  Kind kind = Kind::Unknown;
  std::optional<Structure> cex;  // one-state or two-state
  std::string reason;
  bool valid() const { return kind == Kind::Valid; }
};

CheckResult check_initiation(const FormulaPtr& p, const TransitionSystem& sys,
                             const std::vector<int>& bounds, const SolveOptions& opts = {});
CheckResult check_relative_induction(const FormulaPtr& p, const std::vector<FormulaPtr>& frame,
                                     const TransitionSystem& sys, const std::vector<int>& bounds,
                                     const SolveOptions& opts = {});

/// Cached grounders for repeated queries against one system. Not thread safe;
/// use OraclePool to share between threads.
class SystemOracle {
 public:
  SystemOracle(const TransitionSystem& sys, std::vector<int> bounds);

  /// Ax ∧ assertions (single vocabulary).
  OracleResult one_state(const std::vector<FormulaPtr>& assertions, const SolveOptions& opts);
  /// pre ∧ Ax ∧ Tr ∧ Ax′ ∧ post′. `pre` and `post` are single-vocabulary;
  /// `post` is primed here. `lazy_pre` formulas are asserted only when a
  /// candidate model violates them.
  OracleResult two_state(const std::vector<FormulaPtr>& pre, const std::vector<FormulaPtr>& post,
                         const std::vector<FormulaPtr>& lazy_pre, const SolveOptions& opts);

  const TransitionSystem& system() const { return sys_; }
  const std::vector<int>& bounds() const { return bounds_; }
  std::int64_t calls() const { return calls_; }

 private:
  const TransitionSystem& sys_;
  std::vector<int> bounds_;
  std::unique_ptr<Grounder> one_;
  std::unique_ptr<Grounder> two_;
  std::int64_t calls_ = 0;
  std::unordered_map<const Formula*, std::pair<FormulaPtr, FormulaPtr>> primed_;

  Grounder& one();
  Grounder& two();
  FormulaPtr primed(const FormulaPtr& f);
};

class OraclePool {
 public:
  OraclePool(const TransitionSystem& sys, std::vector<int> bounds) : sys_(sys), bounds_(std::move(bounds)) {}

  class Lease {
   public:
    Lease(OraclePool& pool, std::unique_ptr<SystemOracle> o) : pool_(&pool), o_(std::move(o)) {}
    Lease(Lease&&) = default;
    ~Lease() {
      if (o_) pool_->release(std::move(o_));
    }
    SystemOracle* operator->() { return o_.get(); }
    SystemOracle& operator*() { return *o_; }

   private:
    OraclePool* pool_;
    std::unique_ptr<SystemOracle> o_;
  };

  Lease acquire();
  const std::vector<int>& bounds() const { return bounds_; }

 private:
  const TransitionSystem& sys_;
  std::vector<int> bounds_;
  std::mutex mu_;
  std::vector<std::unique_ptr<SystemOracle>> free_;
  void release(std::unique_ptr<SystemOracle> o);
};

}  // namespace qinv
