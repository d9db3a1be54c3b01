#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "gen.hpp"
#include "qinv/epr.hpp"
#include "qinv/syntax.hpp"

using namespace qinv;

namespace {

// Sorts S=0, T=1, U=2.
std::shared_ptr<const Signature> three_sorts() {
  auto sig = std::make_shared<Signature>();
  sig->add_sort("S");
  sig->add_sort("T");
  sig->add_sort("U");
  return sig;
}

const char* kTwoSortSystem = R"(
(sort S)
(sort T)
(relation r (S T) mutable)
%EDGES%
(init (forall ((x S) (y T)) (not (r x y))))
(transition grow (exists ((x S) (y T))
  (forall ((a S) (b T)) (= (r' a b) (or (r a b) (and (= a x) (= b y)))))))
(safety %SAFE%)
)";

TransitionSystem two_sort_system(const std::string& edges, const std::string& safe) {
  std::string text = kTwoSortSystem;
  text.replace(text.find("%EDGES%"), 7, edges);
  text.replace(text.find("%SAFE%"), 6, safe);
  return parse_system(text, "two-sort");
}

}  // namespace

TEST_CASE("skolem edges") {
  auto sig = three_sorts();
  CHECK(skolem_edges(make_prefix(*sig, {{true, 0}, {false, 0}})) == EdgeSet{{0, 0}});
  CHECK(skolem_edges(make_prefix(*sig, {{false, 1}, {true, 0}})).empty());
  CHECK(skolem_edges(make_prefix(*sig, {{true, 0}, {true, 1}, {false, 2}})) == EdgeSet{{0, 2}, {1, 2}});
  CHECK(skolem_edges(make_prefix(*sig, {{false, 0}, {true, 1}, {false, 2}})) == EdgeSet{{1, 2}});
}

TEST_CASE("prefix filtering") {
  auto sig = three_sorts();
  CHECK(prefix_allowed(make_prefix(*sig, {{true, 0}, {false, 1}}), EdgeSet{{0, 1}}));
  CHECK_FALSE(prefix_allowed(make_prefix(*sig, {{true, 0}, {false, 0}}), EdgeSet{}));
  CHECK_FALSE(prefix_allowed(make_prefix(*sig, {{true, 1}, {false, 1}}), EdgeSet{{0, 1}}));
  CHECK(prefix_allowed(make_prefix(*sig, {{true, 0}, {true, 1}, {true, 2}}), EdgeSet{}));
  CHECK(prefix_allowed(QPrefix{}, EdgeSet{}));
}

TEST_CASE("prefix_allowed is monotone in the allowed set") {
  auto sig = three_sorts();
  std::mt19937_64 rng(7);
  for (int iter = 0; iter < 500; ++iter) {
    std::vector<std::pair<bool, SortId>> shape;
    int depth = static_cast<int>(rng() % 5);
    for (int i = 0; i < depth; ++i) shape.push_back({(rng() & 1) != 0, static_cast<SortId>(rng() % 3)});
    QPrefix p = make_prefix(*sig, shape);
    EdgeSet small, big;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) {
        unsigned roll = static_cast<unsigned>(rng() % 3);
        if (roll == 0) small.emplace(a, b);
        if (roll <= 1) big.emplace(a, b);
      }
    if (prefix_allowed(p, small)) CHECK(prefix_allowed(p, big));
  }
}

TEST_CASE("acyclicity") {
  CHECK(is_acyclic({}, 3));
  CHECK(is_acyclic({{0, 1}, {1, 2}, {0, 2}}, 3));
  CHECK_FALSE(is_acyclic({{0, 0}}, 3));
  CHECK_FALSE(is_acyclic({{0, 1}, {1, 2}, {2, 0}}, 3));
}

TEST_CASE("function edges") {
  auto sig = testgen::mixed_signature();
  CHECK(function_edges(*sig) == EdgeSet{{0, 1}});
}

TEST_CASE("formula edges follow negation normal form") {
  auto sys = two_sort_system("", "(forall ((x S)) (exists ((y T)) (r x y)))");
  const auto& s = *sys.sig;
  CHECK(formula_skolem_edges(sys.safeties[0], s) == EdgeSet{{0, 1}});
  // negation swaps the quantifier kinds: ∃x ∀y
  CHECK(formula_skolem_edges(negate(sys.safeties[0]), s).empty());
}

TEST_CASE("system check") {
  SUBCASE("universal system needs no edges") {
    auto sys = two_sort_system("", "(forall ((x S) (y T)) (or (r x y) (not (r x y))))");
    auto chk = check_epr_system(sys);
    CHECK(chk.ok);
    CHECK(chk.allowed.empty());
  }
  SUBCASE("forall-exists safety needs its edge") {
    auto sys = two_sort_system("", "(forall ((x S)) (exists ((y T)) (r x y)))");
    auto chk = check_epr_system(sys);
    CHECK_FALSE(chk.ok);
    CHECK(chk.message.find("S->T") != std::string::npos);
  }
  SUBCASE("declared edge accepted") {
    auto sys = two_sort_system("(epr-edge S T)", "(forall ((x S)) (exists ((y T)) (r x y)))");
    auto chk = check_epr_system(sys);
    CHECK(chk.ok);
    CHECK(chk.allowed == EdgeSet{{0, 1}});
  }
  SUBCASE("negated safety counts too") {
    // ¬safety is ∀x ∃y, which needs S->T
    auto sys = two_sort_system("(epr-edge S T)", "(exists ((x S)) (forall ((y T)) (r x y)))");
    CHECK(check_epr_system(sys).ok);
    auto bad = two_sort_system("(epr-edge T S)", "(exists ((x S)) (forall ((y T)) (r x y)))");
    CHECK_FALSE(check_epr_system(bad).ok);
  }
  SUBCASE("cyclic declaration rejected") {
    auto sys = two_sort_system("(epr-edge S T) (epr-edge T S)", "(forall ((x S) (y T)) (not (r x y)))");
    auto chk = check_epr_system(sys);
    CHECK_FALSE(chk.ok);
    CHECK(chk.message.find("cycl") != std::string::npos);
  }
}

TEST_CASE("corpus EPR status") {
  auto cs = load_system(std::string(QINV_CORPUS_DIR) + "/client_server_ae.fol");
  CHECK(check_epr_system(cs).ok);
  auto tc = load_system(std::string(QINV_CORPUS_DIR) + "/toy_consensus_forall.fol");
  // the quorum intersection axiom needs quorum->node, which is not declared
  auto chk = check_epr_system(tc);
  CHECK_FALSE(chk.ok);
  CHECK(chk.message.find("quorum->node") != std::string::npos);
}

TEST_CASE("edge printing") {
  auto sig = three_sorts();
  CHECK(edges_to_string({}, *sig) == "(none)");
  CHECK(edges_to_string({{0, 1}, {1, 2}}, *sig) == "S->T, T->U");
}
