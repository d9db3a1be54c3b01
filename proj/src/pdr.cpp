#include "qinv/pdr.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <thread>

namespace qinv {

const char* origin_name(Origin o) {
  switch (o) {
    case Origin::Init: return "init";
    case Origin::Safety: return "safety";
    case Origin::Learned: return "learned";
  }
  return "?";
}

int LemmaStore::add(FormulaPtr f, int frame, Origin origin, int literals, std::string prefix, bool alternation) {
  std::lock_guard<std::mutex> lock(mu_);
  Lemma l;
  l.id = static_cast<int>(lemmas_.size());
  l.formula = std::move(f);
  l.frame = frame;
  l.origin = origin;
  l.literals = literals;
  l.prefix = std::move(prefix);
  l.alternation = alternation;
  lemmas_.push_back(std::move(l));
  return lemmas_.back().id;
}

std::vector<Lemma> LemmaStore::snapshot() const {
  std::lock_guard<std::mutex> lock(mu_);
  return lemmas_;
}

Lemma LemmaStore::get(int id) const {
  std::lock_guard<std::mutex> lock(mu_);
  return lemmas_.at(static_cast<std::size_t>(id));
}

void LemmaStore::set_frame(int id, int frame) {
  std::lock_guard<std::mutex> lock(mu_);
  auto& l = lemmas_.at(static_cast<std::size_t>(id));
  if (frame > l.frame) l.frame = frame;  // frames never decrease
}

void LemmaStore::mark_bad(int id) {
  std::lock_guard<std::mutex> lock(mu_);
  lemmas_.at(static_cast<std::size_t>(id)).bad = true;
}

std::size_t LemmaStore::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return lemmas_.size();
}

std::vector<FormulaPtr> frame_of(const std::vector<Lemma>& lemmas, int i) {
  std::vector<FormulaPtr> out;
  for (const auto& l : lemmas)
    if (l.frame >= i) out.push_back(l.formula);
  return out;
}

std::vector<FormulaPtr> LemmaStore::frame(int i) const { return frame_of(snapshot(), i); }

int LemmaStore::max_finite_frame() const {
  std::lock_guard<std::mutex> lock(mu_);
  int m = 0;
  for (const auto& l : lemmas_)
    if (l.frame != kInfinity) m = std::max(m, l.frame);
  return m;
}

int LemmaStore::min_safety_frame() const {
  std::lock_guard<std::mutex> lock(mu_);
  int m = kInfinity;
  for (const auto& l : lemmas_)
    if (l.origin == Origin::Safety) m = std::min(m, l.frame);
  return m;
}

void LemmaStore::add_reachable(const Structure& s) {
  std::lock_guard<std::mutex> lock(mu_);
  if (std::find(reachable_.begin(), reachable_.end(), s) == reachable_.end()) reachable_.push_back(s);
}

std::vector<Structure> LemmaStore::reachable() const {
  std::lock_guard<std::mutex> lock(mu_);
  return reachable_;
}

// ---------------------------------------------------------------------------

VerifyReport verify_invariant(const TransitionSystem& sys, const std::vector<FormulaPtr>& inv,
                              const std::vector<int>& bounds) {
  VerifyReport rep;
  SystemOracle o(sys, bounds);
  auto fail = [&](int which, const std::string& msg) {
    rep.ok = false;
    rep.failed = which;
    rep.message = msg;
    return rep;
  };
  for (const auto& p : inv) {
    auto r = o.one_state({sys.init(), negate(p)}, {});
    if (!r.unsat()) return fail(1, "initiation fails for " + print_formula(*p));
  }
  for (const auto& p : inv) {
    auto r = o.two_state({}, {negate(p)}, inv, {});
    if (!r.unsat()) return fail(2, "consecution fails for " + print_formula(*p));
  }
  auto r = o.one_state({conj(inv), negate(sys.safe())}, {});
  if (!r.unsat()) return fail(3, "the invariant does not imply safety");
  return rep;
}

bool validate_trace(const TransitionSystem& sys, const std::vector<Structure>& trace, std::string* why) {
  auto no = [&](const std::string& m) {
    if (why) *why = m;
    return false;
  };
  if (trace.empty()) return no("empty trace");
  FormulaPtr ax = sys.ax();
  if (!eval(trace.front(), *sys.init())) return no("first state is not initial");
  for (std::size_t i = 0; i < trace.size(); ++i)
    if (!eval(trace[i], *ax)) return no("state " + std::to_string(i) + " violates the axioms");
  FormulaPtr step = sys.tr();
  for (std::size_t i = 0; i + 1 < trace.size(); ++i) {
    if (trace[i].sizes() != trace[i + 1].sizes()) return no("universe changes at step " + std::to_string(i));
    Structure two = Structure::combine(trace[i], trace[i + 1], sys.sig2);
    if (!eval(two, *step)) return no("step " + std::to_string(i) + " is not a transition");
  }
  if (eval(trace.back(), *sys.safe())) return no("last state is safe");
  return true;
}

// ---------------------------------------------------------------------------

struct Engine::Impl {
  std::mutex push_mu;
  std::mutex audit_mu;
  std::mutex memo_mu;
  // lemma id -> sets of lemma ids known to imply wp(lemma)
  std::map<int, std::vector<std::vector<int>>> consecution;
  std::set<int> initiation_ok;
  // (lemma id, frame) -> size of F_frame when a push failed
  std::map<std::pair<int, int>, std::size_t> push_failed;
  // lemma id -> store version when blocking last failed
  std::map<int, std::int64_t> block_failed;
  std::map<int, std::pair<std::int64_t, int>> backoff;  // id -> (retry time, exponent)
  std::atomic<std::int64_t> version{0};
  std::atomic<std::int64_t> audit_checks{0};
  std::atomic<std::int64_t> audit_violations{0};
  std::atomic<std::int64_t> learned{0};
  std::stop_source run_stop;
  // active IG targets, cancelled when a new lemma excludes them
  std::mutex targets_mu;
  std::map<std::int64_t, std::pair<Structure, std::stop_source>> targets;
  std::atomic<std::int64_t> next_tag{1};
  std::optional<std::vector<Structure>> unsafe;
  // the audit keeps its own oracle and memos so enabling it leaves the run unchanged
  std::unique_ptr<SystemOracle> audit_oracle;
  std::map<int, std::vector<std::vector<int>>> audit_consecution;
  std::set<int> audit_initiation;

  static std::vector<int> ids_of(const std::vector<Lemma>& v, int i) {
    std::vector<int> out;
    for (const auto& l : v)
      if (l.frame >= i) out.push_back(l.id);
    return out;
  }

  void remember_consecution(int id, std::vector<int> pre) {
    std::sort(pre.begin(), pre.end());
    std::lock_guard<std::mutex> lock(memo_mu);
    consecution[id].push_back(std::move(pre));
  }

  bool known_consecution(int id, const std::vector<int>& pre_sorted) {
    std::lock_guard<std::mutex> lock(memo_mu);
    auto it = consecution.find(id);
    if (it == consecution.end()) return false;
    for (const auto& s : it->second)
      if (std::includes(pre_sorted.begin(), pre_sorted.end(), s.begin(), s.end())) return true;
    return false;
  }
};

Engine::Engine(const TransitionSystem& sys, PdrConfig cfg)
    : impl_(std::make_unique<Impl>()),
      sys_(sys),
      cfg_(std::move(cfg)),
      clock_(cfg_.ig.logical_time),
      log_(cfg_.log, clock_),
      pool_(sys, cfg_.bounds) {
  if (cfg_.bounds.size() != sys.sig->sorts().size()) throw Error("bounds must give one size per sort");
  ig_ = std::make_unique<IgContext>(sys_, cfg_.ig, pool_, clock_, &log_);
}

Engine::~Engine() = default;

RunStats Engine::stats() const {
  RunStats s;
  s.ig_queries = ig_->queries.load();
  s.lemmas = static_cast<std::int64_t>(store_.size());
  s.learned = impl_->learned.load();
  s.oracle_calls = clock_.ticks();
  s.audit_checks = impl_->audit_checks.load();
  s.audit_violations = impl_->audit_violations.load();
  for (const auto& l : store_.snapshot())
    if (l.origin == Origin::Learned && l.alternation) ++s.alternation_lemmas;
  s.wall_seconds = clock_.seconds();
  return s;
}

std::vector<FormulaPtr> Engine::invariant() const {
  std::vector<FormulaPtr> out;
  for (const auto& l : store_.snapshot())
    if (l.frame == kInfinity && !l.bad) out.push_back(l.formula);
  return out;
}

bool Engine::converged() {
  for (const auto& l : store_.snapshot())
    if (l.origin == Origin::Safety && l.frame != kInfinity) return false;
  return true;
}

namespace {
std::string frame_str(int f) { return f == kInfinity ? "inf" : std::to_string(f); }
}  // namespace

std::optional<std::vector<Structure>> Engine::init_frames() {
  int added = 0;
  for (const auto& f : sys_.inits)
    for (const auto& c : conjuncts(f)) {
      store_.add(c, 0, Origin::Init, literal_count(*c));
      ++added;
    }
  if (added == 0) store_.add(truth(), 0, Origin::Init, 0);
  added = 0;
  for (const auto& f : sys_.safeties)
    for (const auto& c : conjuncts(f)) {
      store_.add(c, 0, Origin::Safety, literal_count(*c));
      ++added;
    }
  if (added == 0) store_.add(truth(), 0, Origin::Safety, 0);
  for (const auto& l : store_.snapshot())
    log_.emit("lemma-added", {{"id", l.id}, {"frame", 0}, {"origin", origin_name(l.origin)},
                              {"lemma", print_formula(*l.formula)}});

  {
    auto o = pool_.acquire();
    clock_.tick();
    OracleResult r = o->one_state({sys_.init(), negate(sys_.safe())}, {});
    if (r.sat()) {
      trace_ = {*r.model};
      return trace_;
    }
  }
  if (cfg_.audit) audit();
  push_fixpoint();
  return std::nullopt;
}

void Engine::push_fixpoint() {
  std::lock_guard<std::mutex> guard(impl_->push_mu);
  auto o = pool_.acquire();
  bool changed = true;
  while (changed && !impl_->run_stop.stop_requested()) {
    changed = false;
    const int maxf = store_.max_finite_frame();
    for (int i = 0; i <= maxf; ++i) {
      auto snap = store_.snapshot();
      auto fi = frame_of(snap, i);
      for (const auto& l : snap) {
        if (l.frame != i || l.bad) continue;
        auto key = std::make_pair(l.id, i);
        {
          std::lock_guard<std::mutex> lock(impl_->memo_mu);
          auto it = impl_->push_failed.find(key);
          if (it != impl_->push_failed.end() && it->second == fi.size()) continue;
        }
        clock_.tick();
        OracleResult r = o->two_state({}, {negate(l.formula)}, fi, {});
        if (r.unsat()) {
          store_.set_frame(l.id, i + 1);
          impl_->remember_consecution(l.id, Impl::ids_of(snap, i));
          ++impl_->version;
          changed = true;
          log_.emit("pushed", {{"id", l.id}, {"frame", i + 1}});
          if (cfg_.audit) audit();
        } else {
          std::lock_guard<std::mutex> lock(impl_->memo_mu);
          impl_->push_failed[key] = fi.size();
        }
      }
      // F_i = F_{i+1}: everything above i is inductive
      snap = store_.snapshot();
      if (std::any_of(snap.begin(), snap.end(), [&](const Lemma& l) { return l.frame == i; })) continue;
      std::vector<int> promoted;
      for (const auto& l : snap)
        if (l.frame > i && l.frame != kInfinity) {
          store_.set_frame(l.id, kInfinity);
          promoted.push_back(l.id);
        }
      if (!promoted.empty()) {
        ++impl_->version;
        changed = true;
        log_.emit("promoted", {{"frame", i}, {"ids", promoted}});
        if (cfg_.audit) audit();
      }
      break;
    }
    // safety lemmas implied by F_∞ join it
    auto snap = store_.snapshot();
    auto finf = frame_of(snap, kInfinity);
    for (const auto& l : snap) {
      if (l.origin != Origin::Safety || l.frame == kInfinity || l.bad) continue;
      clock_.tick();
      OracleResult r = o->one_state(std::vector<FormulaPtr>{conj(finf), negate(l.formula)}, SolveOptions{});
      if (r.unsat()) {
        store_.set_frame(l.id, kInfinity);
        ++impl_->version;
        changed = true;
        nlohmann::ordered_json ev;
        ev["frame"] = "inf";
        ev["ids"] = std::vector<int>{l.id};
        ev["implied"] = true;
        log_.emit("promoted", ev);
        if (cfg_.audit) audit();
      }
    }
  }
}

std::optional<Structure> Engine::pushing_preventer(const std::vector<Lemma>& view, const Lemma& lemma,
                                                   std::stop_token stop) {
  if (lemma.frame == kInfinity) return std::nullopt;
  auto o = pool_.acquire();
  SolveOptions opts;
  opts.stop = stop;
  clock_.tick();
  OracleResult r = o->two_state({}, {negate(lemma.formula)}, frame_of(view, lemma.frame), opts);
  if (!r.sat()) return std::nullopt;
  return *r.model;
}

BlockTarget Engine::to_block(const std::vector<Lemma>& view, const Lemma& lemma, bool exact,
                             std::stop_token stop) {
  BlockTarget out;
  auto edge = pushing_preventer(view, lemma, stop);
  if (!edge) return out;
  auto o = pool_.acquire();
  SolveOptions opts;
  opts.stop = stop;
  std::vector<Structure> rev{edge->post_state(), edge->pre_state()};
  int j = lemma.frame;
  while (j > 0) {
    const Structure& s = rev.back();
    clock_.tick();
    OracleResult r = o->two_state({}, {diagram(s, exact)}, frame_of(view, j - 1), opts);
    if (r.unknown()) return BlockTarget{};
    if (!r.sat()) {
      out.kind = BlockTarget::Kind::Obligation;
      out.state = s;
      out.frame = j;
      log_.emit("obligation", {{"lemma", lemma.id}, {"frame", j}, {"exact", exact}});
      return out;
    }
    Structure pred = *r.model;
    if (exact) {
      auto iso = find_isomorphism(pred.post_state(), s);
      if (!iso) throw Error("exact diagram model is not isomorphic to its state");
      pred = pred.permuted(*iso);
      rev.push_back(pred.pre_state());
    } else {
      if (j == 1) {  // the only concrete step we can vouch for
        out.kind = BlockTarget::Kind::Reachable;
        out.exact_chain = false;
        out.chain = {pred.pre_state(), pred.post_state()};
        return out;
      }
      rev.push_back(pred.pre_state());
    }
    --j;
  }
  out.kind = BlockTarget::Kind::Reachable;
  out.chain.assign(rev.rbegin(), rev.rend());
  return out;
}

bool Engine::multiblock(const Lemma& lemma, const BlockTarget& target, std::stop_token stop) {
  std::vector<Structure> states{target.state};
  const int frame = target.frame;
  std::optional<IgResult> best;
  std::vector<int> best_pre;
  std::int64_t budget = -1;
  std::int64_t spent = 0;
  bool exact = cfg_.ig.mode != Mode::Universal;
  while (!stop.stop_requested()) {
    auto snap = store_.snapshot();
    IgRequest req;
    req.states = states;
    req.frame = frame;
    req.prior_frame = frame_of(snap, frame - 1);
    req.tag = impl_->next_tag++;
    std::stop_source own;
    std::stop_callback link(stop, [&] { own.request_stop(); });
    {
      std::lock_guard<std::mutex> lock(impl_->targets_mu);
      impl_->targets.emplace(req.tag, std::make_pair(target.state, own));
    }
    req.stop = own.get_token();
    std::int64_t t0 = clock_.now();
    IgResult res = ig_query(*ig_, req);
    std::int64_t took = clock_.now() - t0;
    {
      std::lock_guard<std::mutex> lock(impl_->targets_mu);
      impl_->targets.erase(req.tag);
    }
    if (budget < 0)
      budget = took;
    else
      spent += took;
    if (res.status != IgResult::Status::Found) break;
    best = std::move(res);
    best_pre = Impl::ids_of(snap, frame - 1);
    if (spent >= budget) break;
    // speculative add, visible only here
    Lemma tentative;
    tentative.id = -1;
    tentative.formula = best->formula;
    tentative.frame = frame;
    snap.push_back(tentative);
    Lemma current = store_.get(lemma.id);
    if (current.frame == kInfinity) break;
    BlockTarget next = to_block(snap, current, exact, stop);
    if (next.kind != BlockTarget::Kind::Obligation || next.frame != frame) break;
    states.push_back(next.state);
    log_.emit("multiblock", {{"lemma", lemma.id}, {"frame", frame}, {"states", states.size()}});
  }
  if (!best) {
    log_.emit("block-failed", {{"lemma", lemma.id}, {"frame", frame}});
    return false;
  }
  const PDNF& p = *best->lemma;
  int id = store_.add(best->formula, frame, Origin::Learned, p.literal_count(), p.prefix.to_string(*sys_.sig),
                      p.prefix.alternations() > 0);
  best_pre.push_back(id);
  impl_->remember_consecution(id, best_pre);
  ++impl_->learned;
  ++impl_->version;
  log_.emit("lemma-added", {{"id", id}, {"frame", frame}, {"origin", "learned"},
                            {"prefix", p.prefix.to_string(*sys_.sig)},
                            {"alternations", p.prefix.alternations()},
                            {"lemma", print_formula(*best->formula)}});
  {
    std::lock_guard<std::mutex> lock(impl_->targets_mu);
    for (auto& [tag, entry] : impl_->targets)
      if (!eval(entry.first, *best->formula)) entry.second.request_stop();
  }
  if (cfg_.audit) audit();
  push_fixpoint();
  return true;
}

namespace {

/// Lemmas violated by a reachable state become bad; returns a safety lemma
/// violated by the chain, with the index of the offending state.
std::optional<std::pair<int, std::size_t>> mark_bad_lemmas(LemmaStore& store, EventLog& log,
                                                           const std::vector<Structure>& chain) {
  std::optional<std::pair<int, std::size_t>> unsafe;
  for (const auto& l : store.snapshot()) {
    if (l.bad) continue;
    for (std::size_t k = 0; k < chain.size(); ++k) {
      if (eval(chain[k], *l.formula)) continue;
      if (l.origin == Origin::Safety) {
        if (!unsafe) unsafe = std::make_pair(l.id, k);
        break;
      }
      store.mark_bad(l.id);
      log.emit("bad", {{"id", l.id}});
      break;
    }
  }
  return unsafe;
}

}  // namespace

bool Engine::heuristic_step(std::mt19937_64& rng, std::stop_token stop) {
  auto snap = store_.snapshot();
  int min_safety = store_.min_safety_frame();
  if (min_safety == kInfinity) return false;
  auto reach = store_.reachable();
  std::vector<const Lemma*> cands;
  std::vector<double> weights;
  std::int64_t version = impl_->version.load();
  for (const auto& l : snap) {
    if (l.bad || l.origin == Origin::Safety || l.frame == kInfinity || l.frame > min_safety) continue;
    bool excluded = std::any_of(reach.begin(), reach.end(), [&](const Structure& s) { return !eval(s, *l.formula); });
    if (excluded) {
      store_.mark_bad(l.id);
      ++impl_->version;
      log_.emit("bad", {{"id", l.id}});
      if (cfg_.audit) audit();
      continue;
    }
    {
      std::lock_guard<std::mutex> lock(impl_->memo_mu);
      auto it = impl_->block_failed.find(l.id);
      if (it != impl_->block_failed.end() && it->second == version) continue;
      auto b = impl_->backoff.find(l.id);
      if (!clock_.logical() && b != impl_->backoff.end() && clock_.now() < b->second.first) continue;
    }
    cands.push_back(&l);
    weights.push_back(1.0 / (1.0 + l.literals));
  }
  if (cands.empty()) return false;
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  const Lemma& lemma = *cands[pick(rng)];
  log_.emit("heuristic", {{"lemma", lemma.id}, {"frame", lemma.frame}});
  BlockTarget t = to_block(snap, lemma, cfg_.ig.mode != Mode::Universal, stop);
  switch (t.kind) {
    case BlockTarget::Kind::None:
      push_fixpoint();
      return true;
    case BlockTarget::Kind::Reachable: {
      for (const auto& s : t.chain) {
        store_.add_reachable(s);
        ig_->store().add_reachable(s);
      }
      log_.emit("reachable", {{"states", t.chain.size()}});
      auto unsafe = mark_bad_lemmas(store_, log_, t.chain);
      ++impl_->version;
      if (cfg_.audit) audit();
      if (unsafe && t.exact_chain) {
        std::vector<Structure> trace(t.chain.begin(), t.chain.begin() + static_cast<std::ptrdiff_t>(unsafe->second) + 1);
        impl_->unsafe = trace;
      }
      return true;
    }
    case BlockTarget::Kind::Obligation: {
      bool ok = multiblock(lemma, t, stop);
      if (!ok && !stop.stop_requested()) {
        std::lock_guard<std::mutex> lock(impl_->memo_mu);
        impl_->block_failed[lemma.id] = impl_->version.load();
        auto& b = impl_->backoff[lemma.id];
        b.second = std::min(b.second + 1, 10);
        b.first = clock_.now() + (std::int64_t{1000} << (b.second - 1));
      }
      return true;
    }
  }
  return false;
}

Engine::Step Engine::learning_step(std::stop_token stop) {
  auto snap = store_.snapshot();
  const Lemma* target = nullptr;
  for (const auto& l : snap)
    if (l.origin == Origin::Safety && l.frame != kInfinity && (!target || l.frame < target->frame)) target = &l;
  if (!target) return Step::Done;
  {
    std::lock_guard<std::mutex> lock(impl_->memo_mu);
    auto it = impl_->block_failed.find(target->id);
    if (it != impl_->block_failed.end() && it->second == impl_->version.load()) return Step::Stuck;
    auto b = impl_->backoff.find(target->id);
    if (!clock_.logical() && b != impl_->backoff.end() && clock_.now() < b->second.first) return Step::Stuck;
  }
  bool exact = cfg_.ig.mode != Mode::Universal;
  BlockTarget t = to_block(snap, *target, exact, stop);
  if (t.kind == BlockTarget::Kind::Reachable && !t.exact_chain) t = to_block(snap, *target, true, stop);
  switch (t.kind) {
    case BlockTarget::Kind::None:
      if (stop.stop_requested()) return Step::Stuck;
      push_fixpoint();
      return Step::Progress;
    case BlockTarget::Kind::Reachable:
      trace_ = t.chain;
      log_.emit("unsafe", {{"length", trace_.size()}});
      return Step::Unsafe;
    case BlockTarget::Kind::Obligation: {
      if (multiblock(*target, t, stop)) return Step::Progress;
      if (!stop.stop_requested()) {
        std::lock_guard<std::mutex> lock(impl_->memo_mu);
        impl_->block_failed[target->id] = impl_->version.load();
        auto& b = impl_->backoff[target->id];
        b.second = std::min(b.second + 1, 10);
        b.first = clock_.now() + (std::int64_t{1000} << (b.second - 1));
      }
      return Step::Stuck;
    }
  }
  return Step::Stuck;
}

int Engine::audit() {
  std::lock_guard<std::mutex> guard(impl_->audit_mu);
  if (!impl_->audit_oracle) impl_->audit_oracle = std::make_unique<SystemOracle>(sys_, cfg_.bounds);
  SystemOracle& o = *impl_->audit_oracle;
  auto snap = store_.snapshot();
  int violations = 0;
  auto violation = [&](const std::string& cond, const Lemma& l, const std::string& frame) {
    ++violations;
    ++impl_->audit_violations;
    log_.emit("audit-violation", {{"condition", cond}, {"id", l.id}, {"frame", frame}});
  };
  // (4) Init ⇒ F_0
  for (const auto& l : snap) {
    ++impl_->audit_checks;
    if (impl_->audit_initiation.count(l.id)) continue;
    OracleResult r = o.one_state({sys_.init(), negate(l.formula)}, {});
    if (r.unsat())
      impl_->audit_initiation.insert(l.id);
    else
      violation("init-implies-F0", l, "0");
  }
  // (5), (6): frame sets are nested by construction of the index representation
  impl_->audit_checks += 2;
  // (7) F_i ⇒ wp(F_{i+1}) for finite i, (8) F_∞ ⇒ wp(F_∞)
  auto known = [&](int id, const std::vector<int>& pre_sorted) {
    auto it = impl_->audit_consecution.find(id);
    if (it == impl_->audit_consecution.end()) return false;
    for (const auto& s : it->second)
      if (std::includes(pre_sorted.begin(), pre_sorted.end(), s.begin(), s.end())) return true;
    return false;
  };
  std::set<int> frames;
  for (const auto& l : snap)
    if (l.frame != kInfinity) frames.insert(l.frame);
  std::vector<int> pre_frames;
  if (!frames.empty())
    for (int i = 0; i <= *frames.rbegin(); ++i) pre_frames.push_back(i);
  pre_frames.push_back(kInfinity);
  for (int i : pre_frames) {
    auto pre_ids = Impl::ids_of(snap, i);
    std::sort(pre_ids.begin(), pre_ids.end());
    auto pre = frame_of(snap, i);
    int target_frame = i == kInfinity ? kInfinity : i + 1;
    for (const auto& l : snap) {
      if (l.frame < target_frame) continue;
      ++impl_->audit_checks;
      if (known(l.id, pre_ids)) continue;
      OracleResult r = o.two_state({}, {negate(l.formula)}, pre, {});
      if (r.unsat())
        impl_->audit_consecution[l.id].push_back(pre_ids);
      else
        violation(i == kInfinity ? "F_inf-inductive" : "F_i-implies-wp-F_i+1", l, frame_str(i));
    }
  }
  return violations;
}

RunResult Engine::run() {
  RunResult res;
  std::stop_token stop = impl_->run_stop.get_token();
  std::jthread watchdog([this](std::stop_token st) {
    auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(cfg_.timeout);
    while (!st.stop_requested() && std::chrono::steady_clock::now() < deadline)
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
    if (!st.stop_requested()) impl_->run_stop.request_stop();
  });
  log_.emit("start", {{"system", sys_.name}, {"mode", mode_name(cfg_.ig.mode)},
                      {"sequential", cfg_.sequential}, {"seed", cfg_.seed}});
  auto finish = [&](RunResult::Kind kind, std::string msg) {
    res.kind = kind;
    res.message = std::move(msg);
    res.stats = stats();
    watchdog.request_stop();
    return res;
  };

  if (auto t = init_frames()) {
    res.trace = *t;
    log_.emit("unsafe", {{"length", 1}});
    return finish(RunResult::Kind::Unsafe, "an initial state violates safety");
  }

  std::mt19937_64 rng(cfg_.seed);
  std::atomic<bool> unsafe{false};
  std::atomic<bool> stuck{false};
  if (cfg_.sequential) {
    while (!converged() && !stop.stop_requested()) {
      Step s = learning_step(stop);
      if (s == Step::Unsafe) {
        unsafe = true;
        break;
      }
      if (s == Step::Done) break;
      bool h = heuristic_step(rng, stop);
      if (impl_->unsafe) {
        trace_ = *impl_->unsafe;
        unsafe = true;
        break;
      }
      if (s == Step::Stuck && !h) {
        stuck = true;
        break;
      }
    }
  } else {
    std::stop_source tasks;
    std::stop_callback link(stop, [&] { tasks.request_stop(); });
    auto st = tasks.get_token();
    {
      std::jthread learner([&] {
        while (!st.stop_requested() && !converged()) {
          Step s = learning_step(st);
          if (s == Step::Unsafe) {
            unsafe = true;
            break;
          }
          if (s == Step::Done) break;
          if (s == Step::Stuck) std::this_thread::sleep_for(std::chrono::milliseconds(50));
        }
        tasks.request_stop();
      });
      std::jthread heuristic([&] {
        std::mt19937_64 hrng(cfg_.seed ^ 0x9e3779b97f4a7c15ULL);
        while (!st.stop_requested() && !converged()) {
          if (!heuristic_step(hrng, st)) std::this_thread::sleep_for(std::chrono::milliseconds(50));
          if (impl_->unsafe) {
            unsafe = true;
            tasks.request_stop();
            break;
          }
        }
      });
    }
    if (impl_->unsafe && trace_.empty()) trace_ = *impl_->unsafe;
  }

  if (unsafe) {
    res.trace = trace_;
    std::string why;
    if (!validate_trace(sys_, res.trace, &why)) return finish(RunResult::Kind::Timeout, "invalid trace: " + why);
    return finish(RunResult::Kind::Unsafe, "counterexample trace of length " + std::to_string(res.trace.size()));
  }
  if (!converged()) {
    log_.emit("timeout", {{"stuck", stuck.load()}});
    return finish(RunResult::Kind::Timeout, stuck ? "no further progress is possible within the search space"
                                                  : "time limit reached");
  }
  res.invariant = invariant();
  log_.emit("invariant-found", {{"lemmas", res.invariant.size()}});
  std::vector<int> bigger = cfg_.bounds;
  for (auto& b : bigger) b += cfg_.verify_extra;
  VerifyReport v = verify_invariant(sys_, res.invariant, bigger);
  log_.emit("verified", {{"ok", v.ok}, {"bound_increase", cfg_.verify_extra}, {"message", v.message}});
  if (!v.ok) return finish(RunResult::Kind::VerifyFailed, "verification at the larger bound failed: " + v.message);
  return finish(RunResult::Kind::Invariant, "invariant verified");
}

}  // namespace qinv
