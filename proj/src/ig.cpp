#include "qinv/ig.hpp"

#include <algorithm>
#include <functional>
#include <set>
#include <thread>

namespace qinv {

const char* mode_name(Mode m) {
  switch (m) {
    case Mode::Universal: return "universal";
    case Mode::Epr: return "epr";
    case Mode::Fol: return "fol";
  }
  return "?";
}

std::int64_t Clock::now() const {
  if (logical_) return ticks();
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start_)
      .count();
}

double Clock::seconds() const {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
}

void EventLog::emit(const std::string& event, nlohmann::ordered_json fields) {
  if (!out_) return;
  std::lock_guard<std::mutex> lock(mu_);
  nlohmann::ordered_json line;
  line["seq"] = seq_++;
  line["t"] = clock_.now();
  line["event"] = event;
  for (auto& [k, v] : fields.items()) line[k] = v;
  *out_ << line.dump() << '\n';
  out_->flush();
}

// ---------------------------------------------------------------------------

QPrefix canonical_prefix(const Signature& sig, const QPrefix& p) {
  std::vector<std::pair<bool, SortId>> shape;
  for (const auto& q : p.quants) shape.emplace_back(q.universal, q.sort);
  std::size_t i = 0;
  while (i < shape.size()) {
    std::size_t j = i;
    while (j < shape.size() && shape[j].first == shape[i].first) ++j;
    std::sort(shape.begin() + static_cast<std::ptrdiff_t>(i), shape.begin() + static_cast<std::ptrdiff_t>(j));
    i = j;
  }
  return make_prefix(sig, shape);
}

bool prefix_less(const QPrefix& a, const QPrefix& b) {
  auto key = [](const QPrefix& p) {
    return std::make_tuple(p.depth(), p.alternations(), p.starts_universal() ? 0 : 1, p.existentials());
  };
  auto ka = key(a), kb = key(b);
  if (ka != kb) return ka < kb;
  for (std::size_t i = 0; i < a.depth(); ++i)
    if (a.quants[i].sort != b.quants[i].sort) return a.quants[i].sort < b.quants[i].sort;
  for (std::size_t i = 0; i < a.depth(); ++i)
    if (a.quants[i].universal != b.quants[i].universal) return a.quants[i].universal;
  return false;
}

std::vector<QPrefix> enumerate_prefixes(const Signature& sig, int max_depth, int max_alternations) {
  std::vector<QPrefix> out;
  const auto nsorts = static_cast<SortId>(sig.sorts().size());
  std::vector<std::pair<bool, SortId>> cur;
  std::function<void(int)> rec = [&](int alts) {
    out.push_back(make_prefix(sig, cur));
    if (static_cast<int>(cur.size()) == max_depth) return;
    for (bool universal : {true, false}) {
      bool same = !cur.empty() && cur.back().first == universal;
      int next_alts = alts + (!cur.empty() && !same ? 1 : 0);
      if (next_alts > max_alternations) continue;
      for (SortId s = same ? cur.back().second : 0; s < nsorts; ++s) {
        cur.emplace_back(universal, s);
        rec(next_alts);
        cur.pop_back();
      }
    }
  };
  rec(0);
  std::stable_sort(out.begin(), out.end(), prefix_less);
  return out;
}

bool in_category(const QPrefix& p, int category, std::size_t nsorts) {
  auto counts = p.sort_counts(nsorts);
  bool each_two = std::all_of(counts.begin(), counts.end(), [](int c) { return c <= 2; });
  switch (category) {
    case 0: return p.all_universal();
    case 1: return p.all_universal() && each_two;
    case 2: return p.alternations() <= 1 && each_two;
    case 3: return p.alternations() <= 2 && each_two;
    case 4: return p.alternations() <= 2;
    default: return false;
  }
}

std::vector<int> mode_categories(Mode mode) {
  if (mode == Mode::Universal) return {0, 1};
  return {0, 1, 2, 3, 4};
}

std::vector<QPrefix> sub_prefixes(const Signature& sig, const QPrefix& p) {
  std::vector<QPrefix> out;
  std::set<std::string> seen;
  for (std::size_t drop = 0; drop < p.depth(); ++drop) {
    QPrefix q;
    for (std::size_t i = 0; i < p.depth(); ++i)
      if (i != drop) q.quants.push_back(p.quants[i]);
    q = canonical_prefix(sig, q);
    if (seen.insert(q.shape_key()).second) out.push_back(std::move(q));
  }
  return out;
}

// ---------------------------------------------------------------------------

int ConstraintStore::intern(const SepConstraint& c) {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = index_.find(c);
  if (it != index_.end()) return it->second;
  int id = static_cast<int>(all_.size());
  all_.push_back(std::make_unique<SepConstraint>(c));
  index_.emplace(c, id);
  return id;
}

const SepConstraint& ConstraintStore::at(int index) const {
  std::lock_guard<std::mutex> lock(mu_);
  return *all_.at(static_cast<std::size_t>(index));
}

std::size_t ConstraintStore::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return all_.size();
}

bool ConstraintStore::add(const QPrefix& p, int index) {
  std::lock_guard<std::mutex> lock(mu_);
  auto& list = per_prefix_[p.shape_key()];
  if (std::find(list.begin(), list.end(), index) != list.end()) return false;
  list.push_back(index);
  return true;
}

std::vector<int> ConstraintStore::of(const QPrefix& p) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = per_prefix_.find(p.shape_key());
  return it == per_prefix_.end() ? std::vector<int>{} : it->second;
}

std::vector<int> ConstraintStore::related(const Signature& sig, const QPrefix& p) const {
  std::vector<int> out;
  std::set<int> seen;
  for (const auto& sub : sub_prefixes(sig, p))
    for (int i : of(sub))
      if (seen.insert(i).second) out.push_back(i);
  return out;
}

void ConstraintStore::add_reachable(const Structure& s) {
  int id = intern(SepConstraint::positive(s));
  std::lock_guard<std::mutex> lock(mu_);
  if (std::find(reachable_.begin(), reachable_.end(), id) == reachable_.end()) reachable_.push_back(id);
}

std::vector<int> ConstraintStore::reachable() const {
  std::lock_guard<std::mutex> lock(mu_);
  return reachable_;
}

std::vector<SepConstraint> related_constraints(const Signature& sig, const QPrefix& p,
                                               const ConstraintStore& store) {
  std::vector<SepConstraint> out;
  for (int i : store.related(sig, p)) out.push_back(store.at(i));
  return out;
}

// ---------------------------------------------------------------------------

PrefixCatalog::PrefixCatalog(const Signature& sig, const IgConfig& cfg) {
  active_categories = mode_categories(cfg.mode);
  int max_alt = cfg.mode == Mode::Universal ? 0 : 2;
  for (auto& p : enumerate_prefixes(sig, cfg.max_depth, max_alt)) {
    if (cfg.mode == Mode::Epr && !prefix_allowed(p, cfg.allowed)) continue;
    keys.push_back(p.shape_key());
    prefixes.push_back(std::move(p));
  }
  categories.assign(kCategoryCount, {});
  for (int c : active_categories)
    for (std::size_t i = 0; i < prefixes.size(); ++i)
      if (in_category(prefixes[i], c, sig.sorts().size()))
        categories[static_cast<std::size_t>(c)].push_back(static_cast<int>(i));
}

PDNFTemplate PrefixCatalog::template_for(const QPrefix& p, const IgConfig& cfg) const {
  PDNFTemplate t;
  t.literals_per_cube = cfg.literals_per_cube;
  if (cfg.k > 0)
    t.k = cfg.k;
  else
    t.k = cfg.mode == Mode::Universal || p.all_universal() ? 1 : 3;
  if (cfg.mode == Mode::Universal) t.k = 1;
  return t;
}

PrefixScheduler::PrefixScheduler(const PrefixCatalog& catalog)
    : cat_(catalog),
      status_(catalog.prefixes.size(), PrefixStatus::Unseen),
      cursor_(kCategoryCount, 0),
      suspended_(kCategoryCount),
      time_(kCategoryCount, 0) {}

bool PrefixScheduler::has_work(int c) {
  const auto& list = cat_.categories[static_cast<std::size_t>(c)];
  auto& cur = cursor_[static_cast<std::size_t>(c)];
  while (cur < list.size() && status_[static_cast<std::size_t>(list[cur])] != PrefixStatus::Unseen) ++cur;
  return cur < list.size() || !suspended_[static_cast<std::size_t>(c)].empty();
}

std::optional<PrefixScheduler::Pick> PrefixScheduler::next() {
  int best = -1;
  for (int c : cat_.active_categories) {
    if (!has_work(c)) continue;
    if (best < 0 || time_[static_cast<std::size_t>(c)] < time_[static_cast<std::size_t>(best)]) best = c;
  }
  if (best < 0) return std::nullopt;
  const auto& list = cat_.categories[static_cast<std::size_t>(best)];
  auto& cur = cursor_[static_cast<std::size_t>(best)];
  Pick pick;
  pick.category = best;
  if (cur < list.size()) {
    pick.prefix = list[cur++];
  } else {
    auto& s = suspended_[static_cast<std::size_t>(best)];
    pick.prefix = s.front();
    s.erase(s.begin());
  }
  status_[static_cast<std::size_t>(pick.prefix)] = PrefixStatus::Active;
  return pick;
}

void PrefixScheduler::charge(int category, std::int64_t time) {
  time_[static_cast<std::size_t>(category)] += time;
}

void PrefixScheduler::suspend(const Pick& p) {
  status_[static_cast<std::size_t>(p.prefix)] = PrefixStatus::Suspended;
  suspended_[static_cast<std::size_t>(p.category)].push_back(p.prefix);
}

void PrefixScheduler::finish(const Pick& p, PrefixStatus status) {
  status_[static_cast<std::size_t>(p.prefix)] = status;
}

bool PrefixScheduler::exhausted() const {
  for (int c : cat_.active_categories)
    if (!category_exhausted(c)) return false;
  return true;
}

bool PrefixScheduler::category_exhausted(int c) const {
  const auto& list = cat_.categories[static_cast<std::size_t>(c)];
  if (!suspended_[static_cast<std::size_t>(c)].empty()) return false;
  for (std::size_t i = cursor_[static_cast<std::size_t>(c)]; i < list.size(); ++i)
    if (status_[static_cast<std::size_t>(list[i])] == PrefixStatus::Unseen) return false;
  return true;
}

// ---------------------------------------------------------------------------

IgContext::IgContext(const TransitionSystem& sys, IgConfig cfg, OraclePool& pool, Clock& clock,
                     EventLog* log)
    : sys_(sys), cfg_(std::move(cfg)), pool_(pool), clock_(clock), log_(log), catalog_(*sys.sig, cfg_) {}

namespace {
constexpr std::size_t kSeparatorCache = 256;
}

std::unique_ptr<Separator> IgContext::checkout(int prefix) {
  {
    std::lock_guard<std::mutex> lock(sep_mu_);
    auto it = separators_.find(prefix);
    if (it != separators_.end()) {
      auto s = std::move(it->second.second);
      separators_.erase(it);
      return s;
    }
  }
  const QPrefix& p = catalog_.prefixes[static_cast<std::size_t>(prefix)];
  return std::make_unique<Separator>(sys_.sig, p, catalog_.template_for(p, cfg_));
}

void IgContext::checkin(int prefix, std::unique_ptr<Separator> s) {
  std::lock_guard<std::mutex> lock(sep_mu_);
  separators_[prefix] = {sep_stamp_++, std::move(s)};
  while (separators_.size() > kSeparatorCache) {
    auto victim = separators_.begin();
    for (auto it = separators_.begin(); it != separators_.end(); ++it)
      if (it->second.first < victim->second.first) victim = it;
    separators_.erase(victim);
  }
}

namespace {

const char* kind_name(SepConstraint::Kind k) {
  switch (k) {
    case SepConstraint::Kind::Positive: return "positive";
    case SepConstraint::Kind::Negative: return "negative";
    case SepConstraint::Kind::Implication: return "implication";
  }
  return "?";
}

enum class Outcome { Solved, Unsep, Suspended, Cancelled };

struct QueryState {
  IgContext& ctx;
  const IgRequest& req;
  std::vector<SepConstraint> negatives;
  std::mutex mu;  // scheduler, result, validity cache
  PrefixScheduler sched;
  std::stop_source done;
  int active = 0;
  int tried = 0;
  std::optional<PDNF> result;
  std::unordered_map<int, bool> usable_cache;

  QueryState(IgContext& c, const IgRequest& r) : ctx(c), req(r), sched(c.catalog()) {
    for (const auto& s : r.states) negatives.push_back(SepConstraint::negative(s));
  }

  /// Whether a stored constraint may be reused in this query.
  bool usable(int index) {
    const SepConstraint& c = ctx.store().at(index);
    if (c.kind == SepConstraint::Kind::Positive) return true;
    if (c.kind == SepConstraint::Kind::Negative) return false;
    {
      std::lock_guard<std::mutex> lock(mu);
      auto it = usable_cache.find(index);
      if (it != usable_cache.end()) return it->second;
    }
    bool ok = true;
    for (const auto& f : req.prior_frame)
      if (!eval(*c.first, *f)) {
        ok = false;
        break;
      }
    std::lock_guard<std::mutex> lock(mu);
    usable_cache[index] = ok;
    return ok;
  }

  void mark_usable(int index) {
    std::lock_guard<std::mutex> lock(mu);
    usable_cache[index] = true;
  }

  Outcome work(int prefix_index, SystemOracle& oracle, std::stop_token stop, PDNF& solution) {
    const QPrefix& prefix = ctx.catalog().prefixes[static_cast<std::size_t>(prefix_index)];
    const auto& sys = ctx.system();
    auto sep = ctx.checkout(prefix_index);
    struct Return {
      IgContext& ctx;
      int index;
      std::unique_ptr<Separator>& sep;
      ~Return() { ctx.checkin(index, std::move(sep)); }
    } give_back{ctx, prefix_index, sep};

    sep->reset_active();
    for (const auto& n : negatives) sep->activate(n);
    for (int i : ctx.store().reachable()) sep->activate(ctx.store().at(i));
    for (int i : ctx.store().of(prefix))
      if (usable(i)) sep->activate(ctx.store().at(i));

    auto record = [&](const SepConstraint& c, bool valid_here) {
      int idx = ctx.store().intern(c);
      if (valid_here) mark_usable(idx);
      ctx.store().add(prefix, idx);
      sep->activate(c);
      if (ctx.log())
        ctx.log()->emit("constraint", {{"query", req.tag},
                                       {"prefix", prefix.to_string(*sys.sig)},
                                       {"kind", kind_name(c.kind)}});
    };

    const std::int64_t slice_start = ctx.clock().now();
    SolveOptions opts;
    opts.stop = stop;
    while (true) {
      if (stop.stop_requested()) return Outcome::Cancelled;
      ctx.clock().tick();
      SepResult r = sep->solve(stop);
      if (r.status == SepStatus::Unknown) return Outcome::Cancelled;
      if (r.status == SepStatus::Unsep) {
        if (ctx.log())
          ctx.log()->emit("unsep", {{"query", req.tag}, {"prefix", prefix.to_string(*sys.sig)}});
        return Outcome::Unsep;
      }
      FormulaPtr f = r.separator->to_formula();

      bool added = false;
      for (int i : ctx.store().related(*sys.sig, prefix)) {
        const SepConstraint& c = ctx.store().at(i);
        if (c.kind == SepConstraint::Kind::Negative || !usable(i) || satisfies(f, c)) continue;
        ctx.store().add(prefix, i);
        sep->activate(c);
        added = true;
      }
      if (!added) {
        ctx.clock().tick();
        OracleResult init = oracle.one_state({sys.init(), negate(f)}, opts);
        if (init.unknown()) return Outcome::Cancelled;
        if (init.sat()) {
          record(SepConstraint::positive(*init.model), true);
          added = true;
        }
      }
      if (!added) {
        ctx.clock().tick();
        OracleResult ind = oracle.two_state({f}, {negate(f)}, req.prior_frame, opts);
        if (ind.unknown()) return Outcome::Cancelled;
        if (ind.sat()) {
          record(SepConstraint::implication(ind.model->pre_state(), ind.model->post_state()), true);
          added = true;
        }
      }
      if (!added) {
        solution = *r.separator;
        return Outcome::Solved;
      }
      if (ctx.clock().now() - slice_start >= ctx.config().quantum) return Outcome::Suspended;
    }
  }

  void worker() {
    auto lease = ctx.pool().acquire();
    std::stop_token stop = done.get_token();
    while (!stop.stop_requested()) {
      std::optional<PrefixScheduler::Pick> pick;
      {
        std::lock_guard<std::mutex> lock(mu);
        pick = sched.next();
        if (pick) {
          ++active;
          ++tried;
        } else if (active == 0) {
          return;
        }
      }
      if (!pick) {  // other workers may still suspend work
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
        continue;
      }
      const QPrefix& prefix = ctx.catalog().prefixes[static_cast<std::size_t>(pick->prefix)];
      if (ctx.log())
        ctx.log()->emit("prefix", {{"query", req.tag},
                                   {"prefix", prefix.to_string(*ctx.system().sig)},
                                   {"category", pick->category + 1}});
      std::int64_t t0 = ctx.clock().now();
      PDNF solution;
      Outcome out = work(pick->prefix, *lease, stop, solution);
      std::lock_guard<std::mutex> lock(mu);
      --active;
      sched.charge(pick->category, ctx.clock().now() - t0);
      switch (out) {
        case Outcome::Solved:
          sched.finish(*pick, PrefixStatus::Solved);
          if (!result) result = std::move(solution);
          done.request_stop();
          break;
        case Outcome::Unsep: sched.finish(*pick, PrefixStatus::Unsep); break;
        case Outcome::Suspended: sched.suspend(*pick); break;
        case Outcome::Cancelled: sched.finish(*pick, PrefixStatus::Abandoned); break;
      }
    }
  }
};

}  // namespace

IgResult ig_query(IgContext& ctx, const IgRequest& req) {
  ctx.queries.fetch_add(1);
  QueryState q(ctx, req);
  std::stop_callback forward(req.stop, [&] { q.done.request_stop(); });
  const std::int64_t t0 = ctx.clock().now();
  if (ctx.log())
    ctx.log()->emit("ig-start", {{"query", req.tag}, {"frame", req.frame}, {"states", req.states.size()}});

  int n = std::max(1, ctx.config().workers);
  if (n == 1) {
    q.worker();
  } else {
    std::vector<std::jthread> threads;
    for (int i = 0; i < n; ++i) threads.emplace_back([&q] { q.worker(); });
  }

  IgResult res;
  res.prefixes_tried = q.tried;
  res.category_time = q.sched.times();
  for (int c = 0; c < kCategoryCount; ++c) res.category_exhausted.push_back(q.sched.category_exhausted(c));
  res.elapsed = ctx.clock().now() - t0;
  if (q.result) {
    res.status = IgResult::Status::Found;
    res.formula = q.result->to_formula();
    res.lemma = std::move(q.result);
  } else if (req.stop.stop_requested()) {
    res.status = IgResult::Status::Cancelled;
  } else {
    res.status = IgResult::Status::Exhausted;
  }
  if (ctx.log()) {
    nlohmann::ordered_json f{{"query", req.tag},
                             {"status", res.status == IgResult::Status::Found       ? "found"
                                        : res.status == IgResult::Status::Cancelled ? "cancelled"
                                                                                    : "exhausted"},
                             {"prefixes", res.prefixes_tried}};
    if (res.formula) {
      f["lemma"] = print_formula(*res.formula);
      f["prefix"] = res.lemma->prefix.to_string(*ctx.system().sig);
    }
    ctx.log()->emit("ig-end", std::move(f));
  }
  return res;
}

}  // namespace qinv
