#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <random>

#include "gen.hpp"
#include "qinv/syntax.hpp"

using namespace qinv;

namespace {
const char* kExample =
    "(sort s)(relation r (s) mutable)(init (forall ((x s)) (not (r x))))"
    "(transition t (exists ((x s)) (and (r' x) (forall ((y s)) (=> (not (= y x)) (= (r' y) (r y)))))))"
    "(safety (or true))";
}

TEST_CASE("parse_system example") {
  TransitionSystem sys = parse_system(kExample);
  CHECK(sys.sig->sorts().size() == 1);
  CHECK(sys.transitions.size() == 1);
  CHECK(sys.transitions[0].name == "t");
  CHECK(sys.inits.size() == 1);
  CHECK(sys.safeties.size() == 1);
  // (= (r' y) (r y)) is an iff between atoms
  CHECK(print_formula(*sys.transitions[0].formula).find("(= (r' y) (r y))") != std::string::npos);
}

TEST_CASE("parse errors") {
  CHECK_THROWS_AS(parse_system("(relation r (s) mutable)"), ParseError);
  try {
    parse_system("(sort s)\n(relation r (s) mutable)\n(init (r' x))\n(transition t true)");
    FAIL("expected error");
  } catch (const ParseError& e) {
    CHECK(e.line == 3);
    CHECK(std::string(e.what()).find("primed") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_system("(sort s"), ParseError);
  CHECK_THROWS_AS(parse_system("(sort s)(bogus)"), ParseError);
  CHECK_THROWS_AS(
      parse_system("(sort s)(sort t)(constant a s immutable)(constant b t immutable)"
                   "(axiom (= a b))(transition t true)"),
      SortError);
}

TEST_CASE("declarations in any order") {
  auto a = parse_system("(transition t (r' c))(relation r (s) mutable)(constant c s immutable)(sort s)");
  auto b = parse_system("(sort s)(constant c s immutable)(relation r (s) mutable)(transition t (r' c))");
  CHECK(print_formula(*a.transitions[0].formula) == print_formula(*b.transitions[0].formula));
}

TEST_CASE("parse_formula examples") {
  auto sys = parse_system("(sort s)(sort u)(relation r (s) mutable)(constant x s immutable)(constant y u immutable)(transition t true)");
  auto f = parse_formula("(forall ((x s)) (r x))", *sys.sig);
  CHECK(f->kind == Formula::Kind::Forall);
  CHECK(is_true(*parse_formula("(and)", *sys.sig)));
  CHECK(is_false(*parse_formula("(or)", *sys.sig)));
  CHECK_THROWS_AS(parse_formula("(= x y)", *sys.sig), SortError);
  CHECK_THROWS_AS(parse_formula("(r' x)", *sys.sig), ParseError);
}

TEST_CASE("print_formula examples") {
  CHECK(print_formula(*forall({{"x", "s"}}, rel("r", {var("x")}))) == "(forall ((x s)) (r x))");
  CHECK(print_formula(*truth()) == "(and)");
  CHECK(print_formula(*negate(equals(app("a"), app("b")))) == "(not (= a b))");
  CHECK(print_formula(*rel("q")) == "q");
}

TEST_CASE("round trip (property, 10^4 formulas)") {
  auto sig = testgen::mixed_signature();
  std::mt19937_64 rng(2024);
  testgen::FormulaGen gen(*sig, rng);
  for (int i = 0; i < 10000; ++i) {
    auto f = gen.closed(4);
    std::string text = print_formula(*f);
    auto g = parse_formula(text, *sig);
    if (!equal(*f, *g)) FAIL_CHECK("round trip failed: " << text);
    CHECK(print_formula(*g) == text);
  }
}

TEST_CASE("parsing is deterministic") {
  std::string bad = "(sort s)(relation r (s) mutable)(init (r y))(transition t true)";
  std::string first, second;
  try { parse_system(bad); } catch (const Error& e) { first = e.what(); }
  try { parse_system(bad); } catch (const Error& e) { second = e.what(); }
  CHECK(!first.empty());
  CHECK(first == second);
}

TEST_CASE("bundled corpus parses") {
  int n = 0;
  for (const auto& entry : std::filesystem::directory_iterator(QINV_CORPUS_DIR)) {
    if (entry.path().extension() != ".fol") continue;
    CAPTURE(entry.path().string());
    CHECK_NOTHROW(load_system(entry.path().string()));
    ++n;
  }
  CHECK(n >= 5);
}
