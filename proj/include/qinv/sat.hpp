// Incremental CDCL SAT solving behind a small abstract interface.
//
// Literals use the DIMACS convention: variables are 1..n, -v is the negation.
#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <stop_token>
#include <unordered_map>
#include <vector>

namespace qinv {

enum class SatResult { Sat, Unsat, Unknown };

class SatInterface {
 public:
  virtual ~SatInterface() = default;
  virtual int new_var() = 0;
  virtual int num_vars() const = 0;
  virtual void add_clause(std::span<const int> lits) = 0;
  void add_clause(std::initializer_list<int> lits) {
    add_clause(std::span<const int>(lits.begin(), lits.size()));
  }
  /// Unknown only when a budget is exhausted or a stop was requested.
  virtual SatResult solve(std::span<const int> assumptions = {}) = 0;
  /// Value of a variable in the last model.
  virtual bool value(int var) const = 0;
  bool lit_value(int lit) const { return lit > 0 ? value(lit) : !value(-lit); }
};

class CdclSolver : public SatInterface {
 public:
  CdclSolver();

  int new_var() override;
  int num_vars() const override { return static_cast<int>(assigns_.size()); }
  void add_clause(std::span<const int> lits) override;
  using SatInterface::add_clause;
  SatResult solve(std::span<const int> assumptions = {}) override;
  bool value(int var) const override { return model_.at(static_cast<std::size_t>(var - 1)) != 0; }

  /// Conflicts allowed per solve call; negative means unlimited.
  void set_conflict_budget(std::int64_t conflicts) { budget_ = conflicts; }
  void set_stop_token(std::stop_token st) { stop_ = std::move(st); }

  /// The problem clauses (as added, after level-0 simplification) in DIMACS.
  void dump_dimacs(std::ostream& out) const;

  std::int64_t conflicts() const { return total_conflicts_; }
  std::int64_t decisions() const { return total_decisions_; }

 private:
  struct Clause {
    std::vector<int> lits;  // internal literals
    double activity = 0;
    bool learnt = false;
    bool deleted = false;
  };
  struct Watcher {
    int cref;
    int blocker;
  };

  // internal literal encoding: 2*var + negated
  static int ivar(int l) { return l >> 1; }
  static int ineg(int l) { return l ^ 1; }
  int to_internal(int lit) const;
  int val(int l) const {  // 1 true, 0 false, 2 undef
    int a = assigns_[static_cast<std::size_t>(ivar(l))];
    return a == 2 ? 2 : a ^ (l & 1);
  }

  bool ok_ = true;
  std::vector<Clause> clauses_;
  std::vector<int> problem_;  // crefs of problem clauses
  std::vector<int> learnts_;
  std::vector<std::vector<Watcher>> watches_;
  std::vector<std::uint8_t> assigns_;
  std::vector<int> level_;
  std::vector<int> reason_;
  std::vector<std::uint8_t> polarity_;
  std::vector<double> activity_;
  std::vector<std::uint8_t> seen_;
  std::vector<int> trail_;
  std::vector<int> trail_lim_;
  std::size_t qhead_ = 0;
  std::vector<std::uint8_t> model_;
  std::vector<std::vector<int>> units_;  // level-0 facts kept for dumping

  // activity heap over variables
  std::vector<int> heap_;
  std::vector<int> heap_pos_;
  void heap_insert(int v);
  void heap_up(int i);
  void heap_down(int i);
  int heap_pop();
  bool heap_less(int a, int b) const { return activity_[a] > activity_[b]; }

  double var_inc_ = 1.0;
  double cla_inc_ = 1.0;
  double max_learnts_ = 0;
  std::int64_t budget_ = -1;
  std::int64_t total_conflicts_ = 0;
  std::int64_t total_decisions_ = 0;
  std::stop_token stop_;

  int decision_level() const { return static_cast<int>(trail_lim_.size()); }
  void assign(int lit, int reason);
  int attach(std::vector<int> lits, bool learnt);
  int propagate();
  void analyze(int confl, std::vector<int>& out, int& out_level);
  bool redundant(int lit) const;
  void cancel_until(int level);
  void bump_var(int v);
  void bump_clause(Clause& c);
  void reduce_db();
  int pick_branch();
  SatResult search(std::int64_t conflicts_allowed, std::span<const int> assumptions,
                   std::int64_t& budget_left);
};

/// Hash-consed Tseitin AND/OR gates with constant folding over a SatInterface.
class GateCache {
 public:
  explicit GateCache(SatInterface& sat);
  int true_lit() const { return true_; }
  int mk_and(std::vector<int> lits);
  int mk_or(std::vector<int> lits);

 private:
  struct Hash {
    std::size_t operator()(const std::vector<int>& v) const;
  };
  SatInterface& sat_;
  int true_;
  std::unordered_map<std::vector<int>, int, Hash> gates_;
};

}  // namespace qinv
