#include "qinv/sat.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "qinv/logic.hpp"

namespace qinv {

namespace {

double luby(double y, int x) {
  int size = 1, seq = 0;
  while (size < x + 1) {
    ++seq;
    size = 2 * size + 1;
  }
  while (size - 1 != x) {
    size = (size - 1) >> 1;
    --seq;
    x = x % size;
  }
  return std::pow(y, seq);
}

}  // namespace

CdclSolver::CdclSolver() = default;

int CdclSolver::new_var() {
  int v = static_cast<int>(assigns_.size());
  assigns_.push_back(2);
  level_.push_back(0);
  reason_.push_back(-1);
  polarity_.push_back(1);  // prefer false first
  activity_.push_back(0);
  seen_.push_back(0);
  watches_.emplace_back();
  watches_.emplace_back();
  heap_pos_.push_back(-1);
  heap_insert(v);
  return v + 1;
}

int CdclSolver::to_internal(int lit) const {
  int v = std::abs(lit);
  if (lit == 0 || v > num_vars()) throw Error("sat: literal out of range");
  return 2 * (v - 1) + (lit < 0 ? 1 : 0);
}

// ---------------------------------------------------------------------------
// Heap

void CdclSolver::heap_insert(int v) {
  if (heap_pos_[static_cast<std::size_t>(v)] >= 0) return;
  heap_pos_[static_cast<std::size_t>(v)] = static_cast<int>(heap_.size());
  heap_.push_back(v);
  heap_up(static_cast<int>(heap_.size()) - 1);
}

void CdclSolver::heap_up(int i) {
  int v = heap_[static_cast<std::size_t>(i)];
  while (i > 0) {
    int p = (i - 1) / 2;
    if (!heap_less(v, heap_[static_cast<std::size_t>(p)])) break;
    heap_[static_cast<std::size_t>(i)] = heap_[static_cast<std::size_t>(p)];
    heap_pos_[static_cast<std::size_t>(heap_[static_cast<std::size_t>(i)])] = i;
    i = p;
  }
  heap_[static_cast<std::size_t>(i)] = v;
  heap_pos_[static_cast<std::size_t>(v)] = i;
}

void CdclSolver::heap_down(int i) {
  int n = static_cast<int>(heap_.size());
  int v = heap_[static_cast<std::size_t>(i)];
  for (;;) {
    int c = 2 * i + 1;
    if (c >= n) break;
    if (c + 1 < n && heap_less(heap_[static_cast<std::size_t>(c + 1)], heap_[static_cast<std::size_t>(c)])) ++c;
    if (!heap_less(heap_[static_cast<std::size_t>(c)], v)) break;
    heap_[static_cast<std::size_t>(i)] = heap_[static_cast<std::size_t>(c)];
    heap_pos_[static_cast<std::size_t>(heap_[static_cast<std::size_t>(i)])] = i;
    i = c;
  }
  heap_[static_cast<std::size_t>(i)] = v;
  heap_pos_[static_cast<std::size_t>(v)] = i;
}

int CdclSolver::heap_pop() {
  int top = heap_[0];
  int last = heap_.back();
  heap_.pop_back();
  heap_pos_[static_cast<std::size_t>(top)] = -1;
  if (!heap_.empty()) {
    heap_[0] = last;
    heap_pos_[static_cast<std::size_t>(last)] = 0;
    heap_down(0);
  }
  return top;
}

// ---------------------------------------------------------------------------
// Clauses

int CdclSolver::attach(std::vector<int> lits, bool learnt) {
  int cref = static_cast<int>(clauses_.size());
  Clause c;
  c.lits = std::move(lits);
  c.learnt = learnt;
  watches_[static_cast<std::size_t>(ineg(c.lits[0]))].push_back({cref, c.lits[1]});
  watches_[static_cast<std::size_t>(ineg(c.lits[1]))].push_back({cref, c.lits[0]});
  clauses_.push_back(std::move(c));
  (learnt ? learnts_ : problem_).push_back(cref);
  return cref;
}

void CdclSolver::add_clause(std::span<const int> ext) {
  if (!ok_) return;
  cancel_until(0);
  std::vector<int> lits;
  lits.reserve(ext.size());
  for (int l : ext) lits.push_back(to_internal(l));
  std::sort(lits.begin(), lits.end());
  std::vector<int> out;
  int prev = -1;
  for (int l : lits) {
    if (l == prev) continue;
    if (prev >= 0 && l == ineg(prev)) return;  // tautology
    int v = val(l);
    if (v == 1) return;  // satisfied at level 0
    prev = l;
    if (v == 0) continue;
    out.push_back(l);
  }
  if (out.empty()) {
    ok_ = false;
    return;
  }
  if (out.size() == 1) {
    units_.push_back(out);
    assign(out[0], -1);
    if (propagate() >= 0) ok_ = false;
    return;
  }
  attach(std::move(out), false);
}

void CdclSolver::assign(int lit, int reason) {
  auto v = static_cast<std::size_t>(ivar(lit));
  assigns_[v] = static_cast<std::uint8_t>(lit & 1 ? 0 : 1);
  level_[v] = decision_level();
  reason_[v] = reason;
  trail_.push_back(lit);
}

int CdclSolver::propagate() {
  int confl = -1;
  while (qhead_ < trail_.size()) {
    int p = trail_[qhead_++];  // p became true; visit clauses watching ¬p
    auto& ws = watches_[static_cast<std::size_t>(p)];
    std::size_t i = 0, j = 0;
    while (i < ws.size()) {
      Watcher w = ws[i];
      if (val(w.blocker) == 1) {
        ws[j++] = ws[i++];
        continue;
      }
      Clause& c = clauses_[static_cast<std::size_t>(w.cref)];
      if (c.deleted) {
        ++i;
        continue;
      }
      int false_lit = ineg(p);
      if (c.lits[0] == false_lit) std::swap(c.lits[0], c.lits[1]);
      ++i;
      int first = c.lits[0];
      if (first != w.blocker && val(first) == 1) {
        ws[j++] = {w.cref, first};
        continue;
      }
      bool moved = false;
      for (std::size_t k = 2; k < c.lits.size(); ++k) {
        if (val(c.lits[k]) != 0) {
          std::swap(c.lits[1], c.lits[k]);
          watches_[static_cast<std::size_t>(ineg(c.lits[1]))].push_back({w.cref, first});
          moved = true;
          break;
        }
      }
      if (moved) continue;
      ws[j++] = {w.cref, first};
      if (val(first) == 0) {
        confl = w.cref;
        qhead_ = trail_.size();
        while (i < ws.size()) ws[j++] = ws[i++];
      } else {
        assign(first, w.cref);
      }
    }
    ws.resize(j);
    if (confl >= 0) break;
  }
  return confl;
}

void CdclSolver::bump_var(int v) {
  if ((activity_[static_cast<std::size_t>(v)] += var_inc_) > 1e100) {
    for (auto& a : activity_) a *= 1e-100;
    var_inc_ *= 1e-100;
  }
  if (heap_pos_[static_cast<std::size_t>(v)] >= 0) heap_up(heap_pos_[static_cast<std::size_t>(v)]);
}

void CdclSolver::bump_clause(Clause& c) {
  if ((c.activity += cla_inc_) > 1e20) {
    for (int cr : learnts_) clauses_[static_cast<std::size_t>(cr)].activity *= 1e-20;
    cla_inc_ *= 1e-20;
  }
}

bool CdclSolver::redundant(int lit) const {
  int r = reason_[static_cast<std::size_t>(ivar(lit))];
  if (r < 0) return false;
  for (int q : clauses_[static_cast<std::size_t>(r)].lits) {
    if (ivar(q) == ivar(lit)) continue;
    auto v = static_cast<std::size_t>(ivar(q));
    if (!seen_[v] && level_[v] > 0) return false;
  }
  return true;
}

void CdclSolver::analyze(int confl, std::vector<int>& out, int& out_level) {
  out.clear();
  out.push_back(-1);
  int pending = 0;
  int p = -1;
  std::size_t idx = trail_.size();
  do {
    Clause& c = clauses_[static_cast<std::size_t>(confl)];
    if (c.learnt) bump_clause(c);
    for (int q : c.lits) {
      if (p >= 0 && q == p) continue;
      auto v = static_cast<std::size_t>(ivar(q));
      if (seen_[v] || level_[v] == 0) continue;
      seen_[v] = 1;
      bump_var(static_cast<int>(v));
      if (level_[v] >= decision_level())
        ++pending;
      else
        out.push_back(q);
    }
    while (!seen_[static_cast<std::size_t>(ivar(trail_[--idx]))]) {}
    p = trail_[idx];
    confl = reason_[static_cast<std::size_t>(ivar(p))];
    seen_[static_cast<std::size_t>(ivar(p))] = 0;
    --pending;
  } while (pending > 0);
  out[0] = ineg(p);

  std::vector<int> keep{out[0]};
  for (std::size_t i = 1; i < out.size(); ++i)
    if (!redundant(out[i])) keep.push_back(out[i]);
  for (int q : out) seen_[static_cast<std::size_t>(ivar(q))] = 0;
  out.swap(keep);

  out_level = 0;
  if (out.size() > 1) {
    std::size_t max_i = 1;
    for (std::size_t i = 2; i < out.size(); ++i)
      if (level_[static_cast<std::size_t>(ivar(out[i]))] > level_[static_cast<std::size_t>(ivar(out[max_i]))]) max_i = i;
    std::swap(out[1], out[max_i]);
    out_level = level_[static_cast<std::size_t>(ivar(out[1]))];
  }
}

void CdclSolver::cancel_until(int level) {
  if (decision_level() <= level) return;
  for (std::size_t i = trail_.size(); i-- > static_cast<std::size_t>(trail_lim_[static_cast<std::size_t>(level)]);) {
    auto v = static_cast<std::size_t>(ivar(trail_[i]));
    polarity_[v] = static_cast<std::uint8_t>(trail_[i] & 1);
    assigns_[v] = 2;
    reason_[v] = -1;
    heap_insert(static_cast<int>(v));
  }
  trail_.resize(static_cast<std::size_t>(trail_lim_[static_cast<std::size_t>(level)]));
  trail_lim_.resize(static_cast<std::size_t>(level));
  qhead_ = trail_.size();
}

void CdclSolver::reduce_db() {
  std::vector<int> order = learnts_;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return clauses_[static_cast<std::size_t>(a)].activity < clauses_[static_cast<std::size_t>(b)].activity;
  });
  std::size_t remove = order.size() / 2;
  std::vector<int> kept;
  for (std::size_t i = 0; i < order.size(); ++i) {
    Clause& c = clauses_[static_cast<std::size_t>(order[i])];
    bool locked = false;
    int first = c.lits[0];
    if (val(first) == 1 && reason_[static_cast<std::size_t>(ivar(first))] == order[i]) locked = true;
    if (i < remove && !locked && c.lits.size() > 2) {
      c.deleted = true;
      c.lits.clear();
      c.lits.shrink_to_fit();
    } else {
      kept.push_back(order[i]);
    }
  }
  learnts_.swap(kept);
  for (auto& ws : watches_)
    ws.erase(std::remove_if(ws.begin(), ws.end(),
                            [&](const Watcher& w) { return clauses_[static_cast<std::size_t>(w.cref)].deleted; }),
             ws.end());
}

int CdclSolver::pick_branch() {
  while (!heap_.empty()) {
    int v = heap_pop();
    if (assigns_[static_cast<std::size_t>(v)] == 2) return 2 * v + polarity_[static_cast<std::size_t>(v)];
  }
  return -1;
}

SatResult CdclSolver::search(std::int64_t conflicts_allowed, std::span<const int> assumptions,
                             std::int64_t& budget_left) {
  std::int64_t conflicts = 0;
  std::vector<int> learnt;
  for (;;) {
    int confl = propagate();
    if (confl >= 0) {
      ++conflicts;
      ++total_conflicts_;
      if (budget_left > 0) --budget_left;
      if (decision_level() == 0) {
        ok_ = false;
        return SatResult::Unsat;
      }
      int bt = 0;
      analyze(confl, learnt, bt);
      cancel_until(bt);
      if (learnt.size() == 1) {
        assign(learnt[0], -1);
      } else {
        int cref = attach(learnt, true);
        bump_clause(clauses_[static_cast<std::size_t>(cref)]);
        assign(learnt[0], cref);
      }
      var_inc_ /= 0.95;
      cla_inc_ /= 0.999;
      continue;
    }
    if (stop_.stop_requested() || budget_left == 0) {
      cancel_until(0);
      return SatResult::Unknown;
    }
    if (conflicts >= conflicts_allowed) {
      cancel_until(0);
      return SatResult::Unknown;  // restart
    }
    if (static_cast<double>(learnts_.size()) - static_cast<double>(trail_.size()) >= max_learnts_) reduce_db();

    int next = -1;
    while (decision_level() < static_cast<int>(assumptions.size())) {
      int p = assumptions[static_cast<std::size_t>(decision_level())];
      if (val(p) == 1) {
        trail_lim_.push_back(static_cast<int>(trail_.size()));
      } else if (val(p) == 0) {
        return SatResult::Unsat;  // assumptions conflict
      } else {
        next = p;
        break;
      }
    }
    if (next < 0) {
      ++total_decisions_;
      next = pick_branch();
      if (next < 0) return SatResult::Sat;
    }
    trail_lim_.push_back(static_cast<int>(trail_.size()));
    assign(next, -1);
  }
}

SatResult CdclSolver::solve(std::span<const int> assumptions_ext) {
  model_.clear();
  if (!ok_) return SatResult::Unsat;
  cancel_until(0);
  std::vector<int> assumptions;
  for (int l : assumptions_ext) assumptions.push_back(to_internal(l));
  if (propagate() >= 0) {
    ok_ = false;
    return SatResult::Unsat;
  }
  max_learnts_ = std::max(static_cast<double>(problem_.size()) / 3.0, 2000.0);
  std::int64_t budget_left = budget_ < 0 ? -1 : budget_;
  SatResult res = SatResult::Unknown;
  for (int round = 0;; ++round) {
    double limit = luby(2, round) * 100;
    res = search(static_cast<std::int64_t>(limit), assumptions, budget_left);
    if (res != SatResult::Unknown) break;
    if (stop_.stop_requested() || budget_left == 0) break;
    max_learnts_ *= 1.05;
  }
  if (res == SatResult::Sat) {
    model_.resize(assigns_.size());
    for (std::size_t v = 0; v < assigns_.size(); ++v) model_[v] = assigns_[v] == 1 ? 1 : 0;
  }
  if (res == SatResult::Unsat && assumptions.empty()) ok_ = false;
  cancel_until(0);
  return res;
}

void CdclSolver::dump_dimacs(std::ostream& out) const {
  std::size_t n = units_.size();
  for (int cr : problem_)
    if (!clauses_[static_cast<std::size_t>(cr)].deleted) ++n;
  out << "p cnf " << num_vars() << " " << n << "\n";
  auto emit = [&](const std::vector<int>& lits) {
    for (int l : lits) out << ((l & 1) ? -(ivar(l) + 1) : ivar(l) + 1) << " ";
    out << "0\n";
  };
  for (const auto& u : units_) emit(u);
  for (int cr : problem_) emit(clauses_[static_cast<std::size_t>(cr)].lits);
}

std::size_t GateCache::Hash::operator()(const std::vector<int>& v) const {
  std::size_t h = v.size();
  for (int x : v) h ^= static_cast<std::size_t>(x) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  return h;
}

GateCache::GateCache(SatInterface& sat) : sat_(sat) {
  true_ = sat_.new_var();
  sat_.add_clause({true_});
}

int GateCache::mk_and(std::vector<int> lits) {
  std::vector<int> xs;
  for (int l : lits) {
    if (l == true_) continue;
    if (l == -true_) return -true_;
    xs.push_back(l);
  }
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  for (std::size_t i = 0; i + 1 < xs.size(); ++i)
    if (std::binary_search(xs.begin() + static_cast<std::ptrdiff_t>(i) + 1, xs.end(), -xs[i])) return -true_;
  if (xs.empty()) return true_;
  if (xs.size() == 1) return xs[0];
  auto it = gates_.find(xs);
  if (it != gates_.end()) return it->second;
  int g = sat_.new_var();
  std::vector<int> big{g};
  for (int l : xs) {
    sat_.add_clause({-g, l});
    big.push_back(-l);
  }
  sat_.add_clause(big);
  gates_.emplace(std::move(xs), g);
  return g;
}

int GateCache::mk_or(std::vector<int> lits) {
  for (int& l : lits) l = -l;
  return -mk_and(std::move(lits));
}

}  // namespace qinv
