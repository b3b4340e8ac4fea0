#pragma once

// Shared test fixtures: the worked two-channel example, random formula and
// signal generators, and an independent recursive evaluator for the weighted
// semantics used as an oracle against the compiled graph.

#include <cmath>
#include <string>
#include <vector>

#include "wstlpref/formula.hpp"
#include "wstlpref/parser.hpp"
#include "wstlpref/rng.hpp"
#include "wstlpref/robustness.hpp"
#include "wstlpref/signal.hpp"

namespace fixtures {

using namespace wstlpref;

// s = [1 -1 -2 -2; 1 1 1 2], t_final = 3
inline Signal example1_signal() {
  return Signal({{"s1", ChannelKind::real}, {"s2", ChannelKind::real}}, {{1, -1, -2, -2}, {1, 1, 1, 2}});
}

inline Formula example1_formula() { return parse_formula("F[0,3](-s1 >= 0 & s2 >= 0)"); }

// Paper weights: eventually [1.5, 0.3, 3, 1.2], and [1, 2].
inline WeightValuation example1_weights() {
  return WeightValuation({{"r:w[0]", 1.5},
                          {"r:w[1]", 0.3},
                          {"r:w[2]", 3.0},
                          {"r:w[3]", 1.2},
                          {"r.0:w[0]", 1.0},
                          {"r.0:w[1]", 2.0}});
}

// ---------------------------------------------------------------------------
// Random instances. Channels: x, y real; p boolean.

inline Formula random_predicate(Rng& rng) {
  switch (uniform_index(rng, 5)) {
    case 0: return Formula::predicate(PredicateFn::channel("p"));
    case 1: return Formula::predicate({{{"x", 1.0}}, uniform(rng, -2, 2)});
    case 2: return Formula::predicate({{{"y", -1.0}}, uniform(rng, -2, 2)});
    case 3: return Formula::predicate({{{"x", uniform(rng, -2, 2)}, {"y", uniform(rng, -2, 2)}}, 0.5});
    default: return uniform_index(rng, 8) == 0 ? Formula::truth() : Formula::predicate({{{"y", 1.0}}, 0.0});
  }
}

inline Interval random_interval(Rng& rng) {
  if (uniform_index(rng, 6) == 0) return Interval::unbounded(static_cast<int>(uniform_index(rng, 2)));
  const int a = static_cast<int>(uniform_index(rng, 3));
  return Interval{a, a + static_cast<int>(uniform_index(rng, 4))};
}

inline Formula random_formula(Rng& rng, int depth) {
  if (depth <= 1 || uniform_index(rng, 5) == 0) return random_predicate(rng);
  switch (uniform_index(rng, 7)) {
    case 0: return Formula::negation(random_formula(rng, depth - 1));
    case 1: return Formula::conjunction(random_formula(rng, depth - 1), random_formula(rng, depth - 1));
    case 2: return Formula::disjunction(random_formula(rng, depth - 1), random_formula(rng, depth - 1));
    case 3: return Formula::always(random_formula(rng, depth - 1), random_interval(rng));
    case 4: return Formula::eventually(random_formula(rng, depth - 1), random_interval(rng));
    case 5:
      return Formula::until(random_formula(rng, depth - 1), random_formula(rng, depth - 1), random_interval(rng));
    default: return Formula::implication(random_formula(rng, depth - 1), random_formula(rng, depth - 1));
  }
}

/// Values on a 0.25 grid in [-4, 4] (ties likely) unless `continuous`.
inline Signal random_signal(Rng& rng, int length, bool continuous = false) {
  std::vector<std::vector<ExtReal>> samples(3, std::vector<ExtReal>(static_cast<std::size_t>(length)));
  for (int t = 0; t < length; ++t) {
    for (int c = 0; c < 2; ++c) {
      samples[c][t] = continuous ? uniform(rng, -4, 4) : 0.25 * uniform_int(rng, -16, 16);
    }
    samples[2][t] = uniform_index(rng, 3) == 0 ? kNegInf : kPosInf;
  }
  return Signal({{"x", ChannelKind::real}, {"y", ChannelKind::real}, {"p", ChannelKind::boolean}},
                std::move(samples));
}

struct Instance {
  Formula formula;
  Signal signal;
};

/// Random formula of depth <= max_depth and a signal of length <= max_length
/// on which it is evaluable at t = 0.
inline Instance random_instance(Rng& rng, int max_depth = 4, int max_length = 10, bool continuous = false) {
  while (true) {
    Formula f = random_formula(rng, static_cast<int>(uniform_int(rng, 1, max_depth)));
    Signal s = random_signal(rng, static_cast<int>(uniform_int(rng, 1, max_length)), continuous);
    if (is_evaluable(f, 0, s.t_final())) return {std::move(f), std::move(s)};
  }
}

inline WeightValuation random_valuation(Rng& rng, const FormulaLayout& layout, double lo = 0.1, double hi = 10.0) {
  WeightValuation w;
  for (const auto& s : layout.slots()) {
    if (s.is_parameter()) w.set(s.id, uniform(rng, lo, hi));
  }
  return w;
}

// ---------------------------------------------------------------------------
// Oracle: weighted robustness by direct recursion over the tree, written from
// the definitions and sharing nothing with RobustnessGraph.

struct RecursiveWeighted {
  const Signal& s;
  const FormulaLayout& layout;
  const WeightValuation& w;

  double weight(std::size_t node, int block, int k) const {
    const auto& slot = layout.slots()[layout.slot(node, block, k)];
    return slot.constant ? *slot.constant : w.at(slot.id);
  }

  ExtReal eval(std::size_t ln, int t) const {
    const LayoutNode& info = layout.nodes()[ln];
    const Node& n = *info.node;
    const int T = s.t_final();
    switch (n.op) {
      case Op::truth: return kPosInf;
      case Op::predicate: return evaluate(n.predicate, s, t);
      case Op::negation: return -eval(info.children[0], t);
      case Op::conjunction:
        return std::min(weight(ln, 0, 0) * eval(info.children[0], t), weight(ln, 0, 1) * eval(info.children[1], t));
      case Op::disjunction:
        return std::max(weight(ln, 0, 0) * eval(info.children[0], t), weight(ln, 0, 1) * eval(info.children[1], t));
      default: break;
    }
    const int lo = t + n.interval.a;
    if (lo > T) throw Error("window beyond trace");
    const int hi = n.interval.bounded() ? std::min(t + *n.interval.b, T) : T;
    ExtReal acc = n.op == Op::always ? kPosInf : kNegInf;
    for (int u = lo; u <= hi; ++u) {
      const int k = u - t - n.interval.a;
      if (n.op == Op::until) {
        ExtReal inner = kPosInf;
        for (int v = t; v < u; ++v) inner = std::min(inner, eval(info.children[0], v));
        acc = std::max(acc, std::min(weight(ln, 0, k) * eval(info.children[1], u), weight(ln, 1, k) * inner));
      } else {
        const ExtReal x = weight(ln, 0, k) * eval(info.children[0], u);
        acc = n.op == Op::always ? std::min(acc, x) : std::max(acc, x);
      }
    }
    return acc;
  }
};

inline ExtReal oracle_weighted(const Signal& s, const Formula& f, const WeightValuation& w, int t = 0) {
  const FormulaLayout layout(f, s.t_final());
  return RecursiveWeighted{s, layout, w}.eval(0, t);
}

}  // namespace fixtures
