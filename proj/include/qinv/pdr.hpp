// Frames of lemmas and the main inference loop.
#pragma once

#include <climits>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "qinv/ig.hpp"
#include "qinv/oracle.hpp"
#include "qinv/syntax.hpp"

namespace qinv {

constexpr int kInfinity = INT_MAX;

enum class Origin { Init, Safety, Learned };
const char* origin_name(Origin o);

struct Lemma {
  int id = 0;
  FormulaPtr formula;
  int frame = 0;  // kInfinity for F_∞
  bool bad = false;
  Origin origin = Origin::Learned;
  int literals = 0;    // matrix literal count
  std::string prefix;  // human-readable prefix of learned lemmas
  bool alternation = false;
};

/// Lemmas with a frame index each. F_i is every lemma with frame >= i; bad
/// lemmas stay in the frame views but are never pushed, sampled or returned
/// in an invariant.
class LemmaStore {
 public:
  int add(FormulaPtr f, int frame, Origin origin, int literals = 0, std::string prefix = {},
          bool alternation = false);
  std::vector<Lemma> snapshot() const;
  Lemma get(int id) const;
  void set_frame(int id, int frame);
  void mark_bad(int id);
  std::size_t size() const;

  std::vector<FormulaPtr> frame(int i) const;
  /// Largest finite frame index in use (0 when none).
  int max_finite_frame() const;
  /// Smallest frame among safety lemmas.
  int min_safety_frame() const;

  void add_reachable(const Structure& s);
  std::vector<Structure> reachable() const;

 private:
  mutable std::mutex mu_;
  std::vector<Lemma> lemmas_;
  std::vector<Structure> reachable_;
};

/// F_i over a snapshot.
std::vector<FormulaPtr> frame_of(const std::vector<Lemma>& lemmas, int i);

struct BlockTarget {
  enum class Kind { None, Obligation, Reachable };
  Kind kind = Kind::None;
  Structure state;                 // Obligation
  int frame = 0;                   // Obligation
  std::vector<Structure> chain;    // Reachable: concrete trace, init first
  bool exact_chain = true;         // false when built from plain diagrams
};

struct PdrConfig {
  IgConfig ig;
  std::vector<int> bounds;  // per sort
  int verify_extra = 2;
  std::uint64_t seed = 0;
  double timeout = 600;     // seconds
  bool sequential = true;
  bool audit = false;
  std::ostream* log = nullptr;
};

struct VerifyReport {
  bool ok = true;
  int failed = 0;  // 1 initiation, 2 consecution, 3 safety
  std::string message;
};

/// Conditions Init ⇒ I, I ⇒ wp(I), I ⇒ Safe at the given bounds.
VerifyReport verify_invariant(const TransitionSystem& sys, const std::vector<FormulaPtr>& inv,
                              const std::vector<int>& bounds);

/// First state satisfies Ax ∧ Init, consecutive pairs satisfy Ax ∧ Tr ∧ Ax′,
/// and the last state violates Safe.
bool validate_trace(const TransitionSystem& sys, const std::vector<Structure>& trace, std::string* why = nullptr);

struct RunStats {
  std::int64_t ig_queries = 0;
  std::int64_t lemmas = 0;
  std::int64_t learned = 0;
  std::int64_t oracle_calls = 0;
  std::int64_t audit_checks = 0;
  std::int64_t audit_violations = 0;
  int alternation_lemmas = 0;
  double wall_seconds = 0;
};

struct RunResult {
  enum class Kind { Invariant, Unsafe, Timeout, VerifyFailed };
  Kind kind = Kind::Timeout;
  std::vector<FormulaPtr> invariant;
  std::vector<Structure> trace;
  RunStats stats;
  std::string message;
};

class Engine {
 public:
  Engine(const TransitionSystem& sys, PdrConfig cfg);
  ~Engine();

  LemmaStore& store() { return store_; }
  IgContext& ig() { return *ig_; }
  Clock& clock() { return clock_; }
  const PdrConfig& config() const { return cfg_; }

  /// Add Init and Safe conjuncts at frame 0 and push. Returns a one-state
  /// trace when an initial state violates Safe.
  std::optional<std::vector<Structure>> init_frames();
  void push_fixpoint();
  /// Transition from a state in F_i to one violating the lemma, if any.
  std::optional<Structure> pushing_preventer(const std::vector<Lemma>& view, const Lemma& lemma,
                                             std::stop_token stop = {});
  BlockTarget to_block(const std::vector<Lemma>& view, const Lemma& lemma, bool exact,
                       std::stop_token stop = {});
  /// Block `target` (an obligation for `lemma`); true when a lemma was added.
  bool multiblock(const Lemma& lemma, const BlockTarget& target, std::stop_token stop = {});
  /// One may-obligation round; false when there was nothing to do.
  bool heuristic_step(std::mt19937_64& rng, std::stop_token stop = {});
  /// One must-obligation round on the lowest safety lemma.
  enum class Step { Progress, Stuck, Unsafe, Done };
  Step learning_step(std::stop_token stop = {});

  RunResult run();

  /// Frame meta-invariants at the configured bound; returns violations found.
  int audit();
  /// F_∞ implies Safe.
  bool converged();
  std::vector<FormulaPtr> invariant() const;

  const std::vector<Structure>& unsafe_trace() const { return trace_; }
  RunStats stats() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  const TransitionSystem& sys_;
  PdrConfig cfg_;
  Clock clock_;
  EventLog log_;
  OraclePool pool_;
  std::unique_ptr<IgContext> ig_;
  LemmaStore store_;
  std::vector<Structure> trace_;
};

}  // namespace qinv
