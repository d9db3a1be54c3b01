// Optional SMT-LIB2 backend: solver subprocesses with restarts.
#pragma once

#include <stop_token>
#include <string>
#include <vector>

#include "qinv/oracle.hpp"
#include "qinv/pdr.hpp"

namespace qinv {

struct ExternalConfig {
  std::string command;          // run through /bin/sh -c, query on stdin
  double restart_seconds = 30;  // a round is abandoned after this long
  int processes = 2;            // solver copies per round
  int rounds = 2;               // restarts before giving up
  bool bounded = false;         // also assert the query's universe bounds
};

/// The query as an SMT-LIB2 script ending in (check-sat) (get-model).
std::string to_smtlib(const Query& q, bool bounded);

/// Unknown("external-timeout") when no process answers in time,
/// Unknown("model-parse") when a model cannot be read back or fails eval.
OracleResult external_check(const Query& q, const ExternalConfig& cfg, std::stop_token stop = {});

/// Read a model printed after `sat` into a structure over sig.
/// Throws Error on malformed input.
Structure parse_smt_model(std::string_view text, const std::shared_ptr<const Signature>& sig);

/// verify_invariant through the external solver (unbounded unless configured).
VerifyReport verify_invariant_external(const TransitionSystem& sys, const std::vector<FormulaPtr>& inv,
                                       const ExternalConfig& cfg);

}  // namespace qinv
