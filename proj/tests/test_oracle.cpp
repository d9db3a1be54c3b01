#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>
#include <sstream>

#include "gen.hpp"
#include "qinv/oracle.hpp"

using namespace qinv;

namespace {

const char* kMonotone =
    "(sort s)(relation r (s) mutable)"
    "(init (forall ((x s)) (not (r x))))"
    "(transition add (exists ((x s)) (and (r' x) (forall ((y s)) (=> (not (= y x)) (= (r' y) (r y)))))))"
    "(safety (and))";

std::shared_ptr<const Signature> one_sort() {
  auto sig = std::make_shared<Signature>();
  SortId s = sig->add_sort("S");
  sig->add_symbol({"r", SymbolKind::Relation, {s}, -1, true});
  return sig;
}

}  // namespace

TEST_CASE("bounded_solve examples") {
  auto sig = one_sort();
  auto contra = parse_formula("(exists ((x S)) (and (r x) (not (r x))))", *sig);
  CHECK(bounded_solve({sig, {contra}, {3}}).verdict == Verdict::UnsatAtBound);

  auto some = parse_formula("(exists ((x S)) (r x))", *sig);
  auto r = bounded_solve({sig, {some}, {2}});
  REQUIRE(r.sat());
  CHECK(eval(*r.model, *some));
  CHECK(r.model->size(0) == 1);  // smallest first

  auto two = parse_formula("(forall ((x S)) (exists ((y S)) (not (= y x))))", *sig);
  auto r1 = bounded_solve({sig, {two}, {1}});
  CHECK(r1.verdict == Verdict::UnsatAtBound);
  CHECK(r1.bound == std::vector<int>{1});
  auto r2 = bounded_solve({sig, {two}, {2}});
  REQUIRE(r2.sat());
  CHECK(r2.model->size(0) == 2);
}

TEST_CASE("model soundness and monotonicity on random queries") {
  auto sig = testgen::mixed_signature();
  std::mt19937_64 rng(77);
  testgen::FormulaGen gen(*sig, rng);
  int sat = 0;
  for (int i = 0; i < 400; ++i) {
    std::vector<FormulaPtr> fs;
    for (int k = 0; k < 3; ++k) fs.push_back(gen.closed(3));
    auto r = bounded_solve({sig, fs, {2, 2}});
    REQUIRE(!r.unknown());
    if (r.sat()) {
      ++sat;
      for (const auto& f : fs) CHECK(eval(*r.model, *f));
      CHECK(bounded_solve({sig, fs, {3, 2}}).sat());
    }
  }
  CHECK(sat > 50);
}

TEST_CASE("smallest model agrees with exhaustive search at size 1") {
  auto sig = testgen::mixed_signature();
  std::mt19937_64 rng(4);
  testgen::FormulaGen gen(*sig, rng);
  for (int i = 0; i < 300; ++i) {
    auto f = gen.closed(3);
    auto r = bounded_solve({sig, {f}, {1, 1}});
    // exhaustive over all structures of size (1,1)
    bool any = false;
    Structure m(sig, {1, 1});
    std::vector<std::size_t> rels;
    for (std::size_t id = 0; id < sig->symbols().size(); ++id)
      if (sig->symbol(static_cast<SymbolId>(id)).kind == SymbolKind::Relation) rels.push_back(id);
    int cells = 0;
    for (auto id : rels) cells += static_cast<int>(m.table_size(static_cast<SymbolId>(id)));
    for (int mask = 0; mask < (1 << cells) && !any; ++mask) {
      int bit = 0;
      for (auto id : rels)
        for (std::size_t j = 0; j < m.table_size(static_cast<SymbolId>(id)); ++j)
          m.set_raw(static_cast<SymbolId>(id), j, (mask >> bit++) & 1);
      any = eval(m, *f);
    }
    CHECK(r.sat() == any);
  }
}

TEST_CASE("incremental_solve") {
  auto sig = one_sort();
  auto A = parse_formula("(exists ((x S)) (r x))", *sig);
  auto notA = negate(A);
  auto B = parse_formula("(exists ((x S)) (not (r x)))", *sig);
  auto r = incremental_solve(sig, {A, notA, B}, {}, {2});
  CHECK(r.unsat());
  CHECK(r.asserted <= 2);

  auto r2 = incremental_solve(sig, {truth()}, {A}, {2});
  REQUIRE(r2.sat());
  CHECK(r2.asserted == 0);
}

TEST_CASE("incremental_solve matches bounded_solve on random queries") {
  auto sig = testgen::mixed_signature();
  std::mt19937_64 rng(31);
  testgen::FormulaGen gen(*sig, rng);
  for (int i = 0; i < 200; ++i) {
    std::vector<FormulaPtr> core, rest;
    for (int k = 0; k < 1; ++k) core.push_back(gen.closed(2));
    for (int k = 0; k < 4; ++k) rest.push_back(gen.closed(3));
    std::vector<FormulaPtr> all = core;
    all.insert(all.end(), rest.begin(), rest.end());
    auto a = bounded_solve({sig, all, {2, 2}});
    auto b = incremental_solve(sig, rest, core, {2, 2});
    CHECK(a.sat() == b.sat());
    if (b.sat())
      for (const auto& f : all) CHECK(eval(*b.model, *f));
  }
}

TEST_CASE("check_initiation") {
  auto sys = parse_system(kMonotone);
  CHECK(check_initiation(truth(), sys, {3}).valid());
  auto c = check_initiation(parse_formula("(exists ((x s)) (r x))", *sys.sig), sys, {3});
  REQUIRE(c.kind == CheckResult::Kind::Cex);
  CHECK(eval(*c.cex, *sys.init()));
  CHECK(check_initiation(parse_formula("(forall ((x s)) (not (r x)))", *sys.sig), sys, {3}).valid());
}

TEST_CASE("check_relative_induction") {
  auto sys = parse_system(kMonotone);
  CHECK(check_relative_induction(truth(), {}, sys, {3}).valid());
  auto empty = parse_formula("(forall ((x s)) (not (r x)))", *sys.sig);
  auto c = check_relative_induction(empty, {truth()}, sys, {1});
  REQUIRE(c.kind == CheckResult::Kind::Cex);
  CHECK(eval(c.cex->pre_state(), *empty));
  CHECK_FALSE(eval(c.cex->post_state(), *empty));
  auto some = parse_formula("(exists ((x s)) (r x))", *sys.sig);
  CHECK(check_relative_induction(some, {some}, sys, {3}).valid());
}

TEST_CASE("system oracle agrees with one-shot queries") {
  auto sys = parse_system(kMonotone);
  SystemOracle o(sys, {3});
  auto empty = parse_formula("(forall ((x s)) (not (r x)))", *sys.sig);
  auto some = parse_formula("(exists ((x s)) (r x))", *sys.sig);
  for (int round = 0; round < 3; ++round) {
    CHECK(o.two_state({empty}, {negate(empty)}, {}, {}).sat());
    CHECK(o.two_state({some}, {negate(some)}, {}, {}).unsat());
    CHECK(o.two_state({}, {negate(some)}, {some}, {}).unsat());
    CHECK(o.one_state({sys.init(), some}, {}).unsat());
    CHECK(o.one_state({some}, {}).sat());
  }
}

TEST_CASE("cancellation yields Unknown") {
  auto sys = parse_system(kMonotone);
  std::stop_source src;
  src.request_stop();
  SolveOptions opts;
  opts.stop = src.get_token();
  auto r = bounded_solve({sys.sig, {parse_formula("(exists ((x s)) (r x))", *sys.sig)}, {3}}, opts);
  CHECK(r.unknown());
  CHECK(r.reason == "cancelled");
}

TEST_CASE("dimacs dump is flag gated") {
  auto sys = parse_system(kMonotone);
  std::ostringstream out;
  SolveOptions opts;
  opts.dimacs = &out;
  bounded_solve({sys.sig, {sys.init()}, {2}}, opts);
  CHECK(out.str().rfind("p cnf", 0) == 0);
}
