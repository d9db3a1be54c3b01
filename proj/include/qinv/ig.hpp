// Breadth-first inductive generalization over quantifier prefixes.
#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <stop_token>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "qinv/epr.hpp"
#include "qinv/oracle.hpp"
#include "qinv/separation.hpp"
#include "qinv/syntax.hpp"

namespace qinv {

enum class Mode { Universal, Epr, Fol };
const char* mode_name(Mode m);

/// Time source for scheduling and log timestamps. Logical mode counts
/// ticks (one per oracle or separation call) so sequential runs are
/// reproducible; otherwise milliseconds since construction.
class Clock {
 public:
  explicit Clock(bool logical) : logical_(logical), start_(std::chrono::steady_clock::now()) {}
  bool logical() const { return logical_; }
  std::int64_t now() const;
  void tick() { ticks_.fetch_add(1, std::memory_order_relaxed); }
  std::int64_t ticks() const { return ticks_.load(std::memory_order_relaxed); }
  double seconds() const;

 private:
  bool logical_;
  std::chrono::steady_clock::time_point start_;
  std::atomic<std::int64_t> ticks_{0};
};

/// JSON-lines event sink. Thread safe; a null stream disables output.
class EventLog {
 public:
  EventLog(std::ostream* out, const Clock& clock) : out_(out), clock_(clock) {}
  void emit(const std::string& event, nlohmann::ordered_json fields = nlohmann::ordered_json::object());
  bool enabled() const { return out_ != nullptr; }

 private:
  std::ostream* out_;
  const Clock& clock_;
  std::mutex mu_;
  std::int64_t seq_ = 0;
};

// ---------------------------------------------------------------------------
// Prefixes and categories.

/// Sorts within each block of same-kind quantifiers put in nondecreasing order.
QPrefix canonical_prefix(const Signature& sig, const QPrefix& p);
/// Strict order: depth, alternations, not starting with ∀, existentials,
/// then sort sequence, then kinds (∀ before ∃).
bool prefix_less(const QPrefix& a, const QPrefix& b);
/// All canonical prefixes up to `max_depth` with at most `max_alternations`,
/// sorted by prefix_less.
std::vector<QPrefix> enumerate_prefixes(const Signature& sig, int max_depth, int max_alternations);

constexpr int kCategoryCount = 5;
/// Category predicates 0..4: universal; universal with each sort at most
/// twice; at most one alternation and each sort at most twice; at most two
/// alternations and each sort at most twice; at most two alternations.
bool in_category(const QPrefix& p, int category, std::size_t nsorts);
/// Categories searched in a mode (universal mode uses only the first two).
std::vector<int> mode_categories(Mode mode);

/// Prefixes obtained by dropping one quantifier, canonicalized and deduplicated.
std::vector<QPrefix> sub_prefixes(const Signature& sig, const QPrefix& p);

// ---------------------------------------------------------------------------
// Constraint store.

/// Constraints per prefix (keyed by shape) plus global reachable positives.
/// Append-only and thread safe.
class ConstraintStore {
 public:
  /// Index of c in the global table (deduplicated).
  int intern(const SepConstraint& c);
  const SepConstraint& at(int index) const;
  std::size_t size() const;

  /// Record constraint `index` under P; false if already present.
  bool add(const QPrefix& p, int index);
  std::vector<int> of(const QPrefix& p) const;
  /// Union of the lists of the immediate sub-prefixes, deduplicated.
  std::vector<int> related(const Signature& sig, const QPrefix& p) const;

  void add_reachable(const Structure& s);
  std::vector<int> reachable() const;

 private:
  mutable std::mutex mu_;
  std::vector<std::unique_ptr<SepConstraint>> all_;
  std::unordered_map<SepConstraint, int, SepConstraintHash> index_;
  std::unordered_map<std::string, std::vector<int>> per_prefix_;
  std::vector<int> reachable_;
};

/// Convenience wrapper returning constraints rather than indices.
std::vector<SepConstraint> related_constraints(const Signature& sig, const QPrefix& p,
                                               const ConstraintStore& store);

// ---------------------------------------------------------------------------
// Scheduler.

struct IgConfig {
  Mode mode = Mode::Fol;
  int max_depth = 6;
  int k = 0;                  // 0: 1 for universal prefixes, 3 otherwise
  int literals_per_cube = 5;
  int workers = 1;
  bool logical_time = true;   // schedule by clock ticks instead of wall time
  std::int64_t quantum = 12;  // time slice per prefix before preemption
  EdgeSet allowed;            // EPR mode only
};

/// Shared, immutable prefix lists per category.
struct PrefixCatalog {
  std::vector<QPrefix> prefixes;               // global order
  std::vector<std::string> keys;               // shape keys
  std::vector<std::vector<int>> categories;    // indices into prefixes
  std::vector<int> active_categories;

  PrefixCatalog(const Signature& sig, const IgConfig& cfg);
  PDNFTemplate template_for(const QPrefix& p, const IgConfig& cfg) const;
};

enum class PrefixStatus { Unseen, Active, Suspended, Unsep, Abandoned, Solved };

/// Per-query bookkeeping of which prefix each category works on next.
class PrefixScheduler {
 public:
  explicit PrefixScheduler(const PrefixCatalog& catalog);

  struct Pick {
    int prefix = -1;
    int category = -1;
  };
  /// Least-time category with work; within it, the first unseen prefix, or
  /// else the oldest suspended one.
  std::optional<Pick> next();
  void charge(int category, std::int64_t time);
  void suspend(const Pick& p);
  void finish(const Pick& p, PrefixStatus status);
  /// No unseen or suspended prefix anywhere.
  bool exhausted() const;
  bool category_exhausted(int category) const;
  std::vector<std::int64_t> times() const { return time_; }
  PrefixStatus status(int prefix) const { return status_[static_cast<std::size_t>(prefix)]; }

 private:
  const PrefixCatalog& cat_;
  std::vector<PrefixStatus> status_;
  std::vector<std::size_t> cursor_;
  std::vector<std::vector<int>> suspended_;
  std::vector<std::int64_t> time_;
  bool has_work(int category);
};

// ---------------------------------------------------------------------------
// Queries.

/// State shared by every IG query of one run.
class IgContext {
 public:
  IgContext(const TransitionSystem& sys, IgConfig cfg, OraclePool& pool, Clock& clock,
            EventLog* log = nullptr);

  const TransitionSystem& system() const { return sys_; }
  const IgConfig& config() const { return cfg_; }
  const PrefixCatalog& catalog() const { return catalog_; }
  ConstraintStore& store() { return store_; }
  OraclePool& pool() { return pool_; }
  Clock& clock() { return clock_; }
  EventLog* log() { return log_; }

  /// Exclusive use of the separator for a prefix (created on demand).
  std::unique_ptr<Separator> checkout(int prefix);
  void checkin(int prefix, std::unique_ptr<Separator> s);

  std::atomic<std::int64_t> queries{0};

 private:
  const TransitionSystem& sys_;
  IgConfig cfg_;
  OraclePool& pool_;
  Clock& clock_;
  EventLog* log_;
  PrefixCatalog catalog_;
  ConstraintStore store_;
  std::mutex sep_mu_;
  std::map<int, std::pair<std::int64_t, std::unique_ptr<Separator>>> separators_;
  std::int64_t sep_stamp_ = 0;
};

struct IgRequest {
  std::vector<Structure> states;        // to exclude
  int frame = 1;                        // the lemma is for this frame
  std::vector<FormulaPtr> prior_frame;  // F_{frame-1}
  std::stop_token stop;
  std::int64_t tag = 0;                 // for logging
};

struct IgResult {
  enum class Status { Found, Cancelled, Exhausted };
  Status status = Status::Exhausted;
  std::optional<PDNF> lemma;
  FormulaPtr formula;
  std::vector<std::int64_t> category_time;
  std::vector<bool> category_exhausted;
  int prefixes_tried = 0;
  std::int64_t elapsed = 0;  // clock units
};

IgResult ig_query(IgContext& ctx, const IgRequest& req);

}  // namespace qinv
