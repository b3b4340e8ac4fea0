#include <catch_amalgamated.hpp>

#include <set>

#include "fixtures.hpp"

using namespace wstlpref;

namespace {

std::vector<std::string> ids(const std::vector<WeightSlot>& slots) {
  std::vector<std::string> out;
  for (const auto& s : slots) out.push_back(s.id);
  return out;
}

}  // namespace

TEST_CASE("parse the worked example", "[formula][parse]") {
  const Formula f = fixtures::example1_formula();
  const Node& root = f.root();
  REQUIRE(root.op == Op::eventually);
  CHECK(root.interval == Interval{0, 3});
  const Node& conj = *root.children[0];
  REQUIRE(conj.op == Op::conjunction);
  CHECK(conj.children[0]->op == Op::predicate);
  CHECK(conj.children[0]->predicate == PredicateFn{{{"s1", -1.0}}, 0.0});
  CHECK(conj.children[1]->predicate == PredicateFn{{{"s2", 1.0}}, 0.0});
  CHECK(weight_slots(f).size() == 6);
}

TEST_CASE("double negation is kept structurally", "[formula][parse]") {
  const Formula f = parse_formula("!(!(x>=0))");
  REQUIRE(f.root().op == Op::negation);
  REQUIRE(f.root().children[0]->op == Op::negation);
  CHECK(f.root().children[0]->children[0]->op == Op::predicate);
  CHECK(weight_slots(f).empty());
}

TEST_CASE("until carries two blocks of b-a+1 slots", "[formula][parse]") {
  const Formula f = parse_formula("(a>=0) U[1,2] (b>=0)");
  REQUIRE(f.root().op == Op::until);
  CHECK(ids(weight_slots(f)) == std::vector<std::string>{"r:w1[0]", "r:w1[1]", "r:w2[0]", "r:w2[1]"});
}

TEST_CASE("predicate normalization", "[formula][parse]") {
  CHECK(parse_formula("x <= 0").root().predicate == PredicateFn{{{"x", -1.0}}, 0.0});
  CHECK(parse_formula("x - 10 >= 0").root().predicate == PredicateFn{{{"x", 1.0}}, -10.0});
  CHECK(parse_formula("2*x + 3 <= y").root().predicate == PredicateFn{{{"y", 1.0}, {"x", -2.0}}, -3.0});
  CHECK(parse_formula("v - 3.5 <= 0").root().predicate == PredicateFn{{{"v", -1.0}}, 3.5});
  CHECK(parse_formula("p").root().predicate == PredicateFn::channel("p"));
  CHECK(parse_formula("x*2 >= 1e-3").root().predicate == PredicateFn{{{"x", 2.0}}, -1e-3});
}

TEST_CASE("implication desugars to a weighted disjunction", "[formula][parse]") {
  const Formula f = parse_formula("a >= 0 => b >= 0");
  REQUIRE(f.root().op == Op::disjunction);
  CHECK(f.root().children[0]->op == Op::negation);
  CHECK(ids(weight_slots(f)) == std::vector<std::string>{"r:w[0]", "r:w[1]"});
}

TEST_CASE("operator precedence", "[formula][parse]") {
  // => binds loosest, then |, &, U; prefix operators bind tightest
  const Formula f = parse_formula("F G x >= 0 & y >= 0 | z");
  REQUIRE(f.root().op == Op::disjunction);
  const Node& conj = *f.root().children[0];
  REQUIRE(conj.op == Op::conjunction);
  CHECK(conj.children[0]->op == Op::eventually);
  CHECK(conj.children[0]->children[0]->op == Op::always);
  CHECK(parse_formula("a U b U c").root().children[1]->op == Op::until);
  CHECK(parse_formula("a => b => c").root().children[1]->op == Op::disjunction);
}

TEST_CASE("pinned weights", "[formula][parse]") {
  const Formula f = parse_formula("a>=0 &{0.5,1.0} b>=0");
  const auto slots = weight_slots(f);
  REQUIRE(slots.size() == 2);
  CHECK(slots[0].constant == 0.5);
  CHECK(slots[1].constant == 1.0);

  const auto named = weight_slots(parse_formula("a>=0 &{w1,w2} b>=0"));
  CHECK(named[0].is_parameter());
  CHECK(named[1].is_parameter());

  const auto mixed = weight_slots(parse_formula("G[0,2]{1,_,2}(x)"));
  CHECK(mixed[0].constant == 1.0);
  CHECK(mixed[1].is_parameter());
  CHECK(mixed[2].constant == 2.0);
}

TEST_CASE("parse errors carry line and column", "[formula][parse][errors]") {
  auto column_of = [](const char* text) {
    try {
      parse_formula(text);
    } catch (const ParseError& e) {
      return std::pair{e.line(), e.column()};
    }
    return std::pair{0, 0};
  };
  CHECK(column_of("x >= 0 &") == std::pair{1, 9});
  CHECK(column_of("F[3,1](x)") == std::pair{1, 2});
  CHECK(column_of("x >= 0\n  & $") == std::pair{2, 5});
  CHECK(column_of("(x >= 0") == std::pair{1, 8});
  CHECK_THROWS_AS(parse_formula("x + 1"), ParseError);
  CHECK_THROWS_AS(parse_formula("a &{1} b"), ParseError);
  CHECK_THROWS_AS(parse_formula("a &{1,-1} b"), ParseError);
  CHECK_THROWS_AS(parse_formula("G{1}(x)"), ParseError);
  CHECK_THROWS_AS(parse_formula("F[0,1.5](x)"), ParseError);
  CHECK_THROWS_AS(parse_formula("G >= 0"), ParseError);
  CHECK_THROWS_AS(parse_formula("x = 0"), ParseError);
}

TEST_CASE("unknown channels are only reported at evaluation", "[formula][parse]") {
  const Formula f = parse_formula("nosuch >= 0");
  CHECK_THROWS_AS(rho(fixtures::example1_signal(), f), Error);
}

TEST_CASE("weight_slots enumerates depth-first, left to right", "[formula][slots]") {
  CHECK(ids(weight_slots(fixtures::example1_formula())) ==
        std::vector<std::string>{"r:w[0]", "r:w[1]", "r:w[2]", "r:w[3]", "r.0:w[0]", "r.0:w[1]"});
  CHECK(weight_slots(parse_formula("x>=0")).empty());
  CHECK(ids(weight_slots(parse_formula("! F[0,1](x>=0)"))) == std::vector<std::string>{"r.0:w[0]", "r.0:w[1]"});
}

TEST_CASE("unbounded operators size their block from the horizon", "[formula][slots]") {
  const Formula f = parse_formula("G F[2,inf] x");
  CHECK_THROWS_AS(weight_slots(f), Error);
  const auto slots = weight_slots(f, 9);
  // G: 10 entries, F[2,inf]: 8 entries
  CHECK(slots.size() == 18);
  CHECK(slots.back().id == "r.0:w[7]");
}

TEST_CASE("slot counts per operator", "[formula][slots][property]") {
  Rng rng(3);
  for (int i = 0; i < 300; ++i) {
    const Formula f = fixtures::random_formula(rng, 4);
    const FormulaLayout layout(f, 12);
    std::size_t expected = 0;
    for (const auto& n : layout.nodes()) {
      const Node& node = *n.node;
      const int width = !is_temporal(node.op)          ? 2
                        : node.interval.bounded()      ? *node.interval.b - node.interval.a + 1
                                                       : 12 - node.interval.a + 1;
      switch (node.op) {
        case Op::until: expected += 2 * width; break;
        case Op::always:
        case Op::eventually:
        case Op::conjunction:
        case Op::disjunction: expected += width; break;
        default: break;
      }
    }
    CHECK(layout.slots().size() == expected);
    std::set<std::string> unique;
    for (const auto& s : layout.slots()) unique.insert(s.id);
    CHECK(unique.size() == layout.slots().size());
  }
}

TEST_CASE("printer round-trips through the parser", "[formula][print][property]") {
  Rng rng(5);
  for (int i = 0; i < 500; ++i) {
    const Formula f = fixtures::random_formula(rng, 5);
    const std::string text = to_string(f);
    const Formula back = parse_formula(text);
    INFO(text);
    CHECK(back == f);
    CHECK(to_string(back) == text);
    CHECK(ids(weight_slots(back, 10)) == ids(weight_slots(f, 10)));
  }
  const Formula pinned = parse_formula("G[0,1]{0.25,_}(x - 3.5 >= 0) U[0,0]{a,2} !p");
  CHECK(parse_formula(to_string(pinned)) == pinned);
}

TEST_CASE("root_weight_slots looks through negation", "[formula][root]") {
  const auto root = root_weight_slots(fixtures::example1_formula());
  CHECK(ids(root) == std::vector<std::string>{"r:w[0]", "r:w[1]", "r:w[2]", "r:w[3]"});
  const auto negated = root_weight_slots(parse_formula("!F[0,3](-s1 >= 0 & s2 >= 0)"));
  REQUIRE(negated.size() == 4);
  CHECK(negated[0].id == "r.0:w[0]");
  CHECK_THROWS_AS(root_weight_slots(parse_formula("x>=0")), Error);
}

TEST_CASE("levels count weighted operators from the root", "[formula][levels]") {
  auto ops = [](const std::map<int, std::vector<LayoutNode>>& lv) {
    std::map<int, std::vector<Op>> out;
    for (const auto& [k, nodes] : lv) {
      for (const auto& n : nodes) out[k].push_back(n.node->op);
    }
    return out;
  };
  const Formula f = fixtures::example1_formula();
  CHECK(ops(levels(f)) == std::map<int, std::vector<Op>>{{1, {Op::eventually}}, {2, {Op::conjunction}}});
  CHECK(levels(parse_formula("x>=0")).empty());
  CHECK(ops(levels(parse_formula("((a>=0 & b>=0) | (c>=0 & d>=0))"))) ==
        std::map<int, std::vector<Op>>{{1, {Op::disjunction}}, {2, {Op::conjunction, Op::conjunction}}});
  CHECK(FormulaLayout(parse_formula("!(a & !G[0,1](b | c))")).depth() == 3);
}

TEST_CASE("weight valuations", "[formula][valuation]") {
  CHECK_THROWS_AS(WeightValuation({{"r:w[0]", 0.0}}), Error);
  CHECK_THROWS_AS(WeightValuation({{"r:w[0]", -1.0}}), Error);
  const FormulaLayout layout(parse_formula("a &{_,3} b"));
  const WeightValuation ones = WeightValuation::uniform(layout);
  CHECK(ones.size() == 1);
  CHECK(resolve_weights(layout, ones) == std::vector<double>{1.0, 3.0});
  CHECK_THROWS_AS(resolve_weights(layout, WeightValuation{}), Error);
}
