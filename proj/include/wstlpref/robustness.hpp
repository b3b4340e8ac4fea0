#pragma once

// Robustness semantics.
//
// rho() is the classic STL robustness, evaluated by direct recursion. It
// ignores weights and serves as the reference for everything else.
//
// RobustnessGraph compiles a formula for one trace horizon into a DAG with one
// node per (subformula, time) pair. The same graph evaluates hard weighted
// robustness over extended reals, the log-sum-exp relaxation, and the reverse
// pass that yields d(soft robustness)/d(weight slot).
//
// Finite traces: a temporal operator at time t ranges over
// [t + a, min(t + b, t_final)] and requires t + a <= t_final. Until uses the
// half-open inner window [t, t') in both the STL and the weighted semantics;
// a min over an empty window is +inf.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "wstlpref/error.hpp"
#include "wstlpref/ext_real.hpp"
#include "wstlpref/formula.hpp"
#include "wstlpref/signal.hpp"

namespace wstlpref {

struct SoftConfig {
  double beta = 1e10;
  double inf_sentinel = 1e6;  // stands in for +-inf on the smooth path

  void validate() const {
    if (!(beta > 0) || !std::isfinite(beta)) throw Error("beta must be positive and finite");
    if (!(inf_sentinel > 0) || !std::isfinite(inf_sentinel)) throw Error("inf_sentinel must be positive and finite");
  }
};

/// (1/beta) * log(sum exp(beta * x_i)), shifted by the max so it cannot overflow.
inline double soft_max(std::span<const double> xs, double beta) {
  if (xs.empty()) throw Error("soft_max of an empty list");
  const double m = *std::max_element(xs.begin(), xs.end());
  double sum = 0.0;
  for (double x : xs) sum += std::exp(beta * (x - m));
  return m + std::log(sum) / beta;
}

inline double soft_min(std::span<const double> xs, double beta) {
  if (xs.empty()) throw Error("soft_min of an empty list");
  const double m = *std::min_element(xs.begin(), xs.end());
  double sum = 0.0;
  for (double x : xs) sum += std::exp(-beta * (x - m));
  return m - std::log(sum) / beta;
}

namespace detail {

struct Window {
  int lo;
  int hi;
};

inline Window window(const Interval& iv, int t, int t_final) {
  const int lo = t + iv.a;
  if (lo > t_final) {
    throw Error("interval starting at " + std::to_string(lo) + " lies beyond the trace end " +
                std::to_string(t_final));
  }
  const int hi = iv.bounded() ? std::min(t + *iv.b, t_final) : t_final;
  return {lo, hi};
}

inline ExtReal rho_rec(const Signal& s, const Node& n, int t) {
  switch (n.op) {
    case Op::truth: return kPosInf;
    case Op::predicate: return evaluate(n.predicate, s, t);
    case Op::negation: return -rho_rec(s, *n.children[0], t);
    case Op::conjunction: return std::min(rho_rec(s, *n.children[0], t), rho_rec(s, *n.children[1], t));
    case Op::disjunction: return std::max(rho_rec(s, *n.children[0], t), rho_rec(s, *n.children[1], t));
    case Op::always:
    case Op::eventually: {
      const Window w = window(n.interval, t, s.t_final());
      ExtReal acc = n.op == Op::always ? kPosInf : kNegInf;
      for (int u = w.lo; u <= w.hi; ++u) {
        const ExtReal v = rho_rec(s, *n.children[0], u);
        acc = n.op == Op::always ? std::min(acc, v) : std::max(acc, v);
      }
      return acc;
    }
    case Op::until: {
      const Window w = window(n.interval, t, s.t_final());
      ExtReal prefix = kPosInf;  // min of the left operand over [t, u)
      for (int u = t; u < w.lo; ++u) prefix = std::min(prefix, rho_rec(s, *n.children[0], u));
      ExtReal acc = kNegInf;
      for (int u = w.lo; u <= w.hi; ++u) {
        acc = std::max(acc, std::min(rho_rec(s, *n.children[1], u), prefix));
        if (u < w.hi) prefix = std::min(prefix, rho_rec(s, *n.children[0], u));
      }
      return acc;
    }
  }
  return kNegInf;
}

/// ok[t] is true when every temporal window reached from (n, t) starts inside
/// the trace. Computed for all t at once: nested Until makes this
/// non-monotone in t, so no single time can stand in for a window.
inline std::vector<char> evaluable_times(const Node& n, int t_final) {
  const auto len = static_cast<std::size_t>(t_final) + 1;
  if (n.op == Op::truth || n.op == Op::predicate) return std::vector<char>(len, 1);
  if (!is_temporal(n.op)) {
    std::vector<char> ok = evaluable_times(*n.children[0], t_final);
    if (n.children.size() > 1) {
      const std::vector<char> other = evaluable_times(*n.children[1], t_final);
      for (std::size_t t = 0; t < len; ++t) ok[t] = ok[t] && other[t];
    }
    return ok;
  }
  const std::vector<char> target = evaluable_times(*n.children.back(), t_final);
  std::vector<char> prefix_ok;
  if (n.op == Op::until) prefix_ok = evaluable_times(*n.children[0], t_final);
  std::vector<char> ok(len, 0);
  for (int t = 0; t <= t_final; ++t) {
    if (t + n.interval.a > t_final) break;
    const int hi = n.interval.bounded() ? std::min(t + *n.interval.b, t_final) : t_final;
    bool good = true;
    for (int u = t + n.interval.a; u <= hi && good; ++u) good = target[static_cast<std::size_t>(u)];
    if (n.op == Op::until) {
      for (int u = t; u < hi && good; ++u) good = prefix_ok[static_cast<std::size_t>(u)];
    }
    ok[static_cast<std::size_t>(t)] = good;
  }
  return ok;
}

}  // namespace detail

/// STL robustness of `f` on `s` at time t (weights ignored).
inline ExtReal rho(const Signal& s, const Formula& f, int t = 0) {
  if (t < 0 || t > s.t_final()) throw Error("evaluation time outside the trace");
  return detail::rho_rec(s, f.root(), t);
}

/// True when `f` can be evaluated at t on a trace ending at t_final.
inline bool is_evaluable(const Formula& f, int t, int t_final) {
  return t >= 0 && t <= t_final && detail::evaluable_times(f.root(), t_final)[static_cast<std::size_t>(t)];
}

/// Largest t such that `f` can be evaluated at every time in [0, t], or -1.
/// Until makes evaluability non-monotone in t, so later isolated times are
/// not counted.
inline int last_evaluable_time(const Formula& f, int t_final) {
  if (t_final < 0) return -1;
  const std::vector<char> ok = detail::evaluable_times(f.root(), t_final);
  int t = 0;
  while (t <= t_final && ok[static_cast<std::size_t>(t)]) ++t;
  return t - 1;
}

class RobustnessGraph {
 public:
  enum class Kind : std::uint8_t { leaf, truth, negate, min, max };

  struct Term {
    std::uint32_t node;
    std::int32_t slot;  // < 0: unit weight
  };

  struct GraphNode {
    Kind kind;
    std::uint32_t first_term = 0;
    std::uint32_t num_terms = 0;
    std::int32_t leaf = -1;
  };

  struct Leaf {
    std::size_t layout_node;
    int t;
  };

  /// Compiles `f` for traces ending at t_final, rooted at each of `root_times`.
  RobustnessGraph(Formula f, int t_final, const std::vector<int>& root_times = {0})
      : formula_(std::move(f)), layout_(formula_, t_final), t_final_(t_final) {
    if (t_final < 0) throw Error("t_final must be non-negative");
    memo_.assign(layout_.nodes().size(), std::vector<std::int32_t>(static_cast<std::size_t>(t_final) + 1, -1));
    for (int t : root_times) {
      if (t < 0 || t > t_final) throw Error("evaluation time outside the trace");
      roots_.push_back(build(0, t));
    }
  }

  const Formula& formula() const noexcept { return formula_; }
  const FormulaLayout& layout() const noexcept { return layout_; }
  int t_final() const noexcept { return t_final_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  const std::vector<std::uint32_t>& roots() const noexcept { return roots_; }
  const std::vector<Leaf>& leaves() const noexcept { return leaves_; }
  const GraphNode& node(std::size_t i) const { return nodes_.at(i); }
  std::span<const Term> terms(const GraphNode& n) const { return {terms_.data() + n.first_term, n.num_terms}; }

  /// Graph node for (layout node, t), or -1 if that pair was never reached.
  std::int32_t node_for(std::size_t layout_node, int t) const { return memo_[layout_node][static_cast<std::size_t>(t)]; }

  /// Predicate values at every leaf, in leaf order. Computed once per signal and
  /// reused across valuations.
  std::vector<ExtReal> leaf_values(const Signal& s) const {
    if (s.t_final() != t_final_) throw Error("signal length does not match the compiled horizon");
    std::vector<std::optional<BoundPredicate>> bound(layout_.nodes().size());
    std::vector<ExtReal> out(leaves_.size());
    for (std::size_t i = 0; i < leaves_.size(); ++i) {
      const auto& leaf = leaves_[i];
      auto& b = bound[leaf.layout_node];
      if (!b) b.emplace(layout_.nodes()[leaf.layout_node].node->predicate, s);
      out[i] = (*b)(s, leaf.t);
    }
    return out;
  }

  /// Hard weighted robustness of every graph node.
  void forward_hard(std::span<const ExtReal> leaf_vals, std::span<const double> weights,
                    std::vector<ExtReal>& values) const {
    check_weights(weights);
    values.resize(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const GraphNode& n = nodes_[i];
      switch (n.kind) {
        case Kind::leaf: values[i] = leaf_vals[static_cast<std::size_t>(n.leaf)]; break;
        case Kind::truth: values[i] = kPosInf; break;
        case Kind::negate: values[i] = -values[terms_[n.first_term].node]; break;
        case Kind::min:
        case Kind::max: {
          ExtReal acc = n.kind == Kind::min ? kPosInf : kNegInf;
          for (std::uint32_t k = 0; k < n.num_terms; ++k) {
            const ExtReal x = scaled(terms_[n.first_term + k], weights, values);
            acc = n.kind == Kind::min ? std::min(acc, x) : std::max(acc, x);
          }
          values[i] = acc;
          break;
        }
      }
    }
  }

  /// Smooth robustness of every graph node; +-inf leaves become +-inf_sentinel.
  void forward_soft(std::span<const ExtReal> leaf_vals, std::span<const double> weights, const SoftConfig& cfg,
                    std::vector<double>& values) const {
    check_weights(weights);
    values.resize(nodes_.size());
    std::vector<double> xs;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const GraphNode& n = nodes_[i];
      switch (n.kind) {
        case Kind::leaf: values[i] = clamp_sentinel(leaf_vals[static_cast<std::size_t>(n.leaf)], cfg); break;
        case Kind::truth: values[i] = cfg.inf_sentinel; break;
        case Kind::negate: values[i] = -values[terms_[n.first_term].node]; break;
        case Kind::min:
        case Kind::max: {
          xs.resize(n.num_terms);
          for (std::uint32_t k = 0; k < n.num_terms; ++k) xs[k] = scaled(terms_[n.first_term + k], weights, values);
          values[i] = n.kind == Kind::min ? soft_min(xs, cfg.beta) : soft_max(xs, cfg.beta);
          break;
        }
      }
    }
  }

  /// Reverse pass over values from forward_soft. Accumulates
  /// seed * d(values[root]) / d(weight) into `grad` (one entry per slot).
  void backward_soft(std::span<const double> weights, const SoftConfig& cfg, std::span<const double> values,
                     std::uint32_t root, double seed, std::span<double> grad) const {
    std::vector<double> adj(nodes_.size(), 0.0);
    adj[root] = seed;
    std::vector<double> xs;
    for (std::size_t i = root + 1; i-- > 0;) {
      const double a = adj[i];
      if (a == 0.0) continue;
      const GraphNode& n = nodes_[i];
      if (n.kind == Kind::negate) {
        adj[terms_[n.first_term].node] -= a;
        continue;
      }
      if (n.kind != Kind::min && n.kind != Kind::max) continue;
      xs.resize(n.num_terms);
      for (std::uint32_t k = 0; k < n.num_terms; ++k) xs[k] = scaled(terms_[n.first_term + k], weights, values);
      const double sgn = n.kind == Kind::max ? 1.0 : -1.0;
      const double m = sgn > 0 ? *std::max_element(xs.begin(), xs.end()) : *std::min_element(xs.begin(), xs.end());
      double sum = 0.0;
      for (double& x : xs) {
        x = std::exp(sgn * cfg.beta * (x - m));
        sum += x;
      }
      for (std::uint32_t k = 0; k < n.num_terms; ++k) {
        const Term& term = terms_[n.first_term + k];
        const double p = a * xs[k] / sum;
        if (p == 0.0) continue;
        if (term.slot >= 0) {
          grad[static_cast<std::size_t>(term.slot)] += p * values[term.node];
          adj[term.node] += p * weights[static_cast<std::size_t>(term.slot)];
        } else {
          adj[term.node] += p;
        }
      }
    }
  }

 private:
  static double clamp_sentinel(ExtReal x, const SoftConfig& cfg) {
    if (x == kPosInf) return cfg.inf_sentinel;
    if (x == kNegInf) return -cfg.inf_sentinel;
    return x;
  }

  template <class V>
  static double scaled(const Term& term, std::span<const double> weights, const V& values) {
    const double v = values[term.node];
    return term.slot < 0 ? v : weights[static_cast<std::size_t>(term.slot)] * v;
  }

  void check_weights(std::span<const double> weights) const {
    if (weights.size() != layout_.slots().size()) throw Error("weight vector does not match the formula's slots");
    for (double w : weights) {
      if (!(w > 0) || !std::isfinite(w)) throw Error("weights must be positive and finite");
    }
  }

  std::uint32_t add(Kind kind, std::vector<Term> terms, std::int32_t leaf = -1) {
    GraphNode n{kind, static_cast<std::uint32_t>(terms_.size()), static_cast<std::uint32_t>(terms.size()), leaf};
    terms_.insert(terms_.end(), terms.begin(), terms.end());
    nodes_.push_back(n);
    return static_cast<std::uint32_t>(nodes_.size() - 1);
  }

  std::int32_t slot(std::size_t ln, int block, int offset) const {
    return static_cast<std::int32_t>(layout_.slot(ln, block, offset));
  }

  std::uint32_t build(std::size_t ln, int t) {
    std::int32_t& memo = memo_[ln][static_cast<std::size_t>(t)];
    if (memo >= 0) return static_cast<std::uint32_t>(memo);
    const LayoutNode& info = layout_.nodes()[ln];
    const Node& n = *info.node;
    std::uint32_t id = 0;
    switch (n.op) {
      case Op::truth: id = add(Kind::truth, {}); break;
      case Op::predicate:
        leaves_.push_back({ln, t});
        id = add(Kind::leaf, {}, static_cast<std::int32_t>(leaves_.size() - 1));
        break;
      case Op::negation: id = add(Kind::negate, {{build(info.children[0], t), -1}}); break;
      case Op::conjunction:
      case Op::disjunction: {
        const std::uint32_t l = build(info.children[0], t);
        const std::uint32_t r = build(info.children[1], t);
        id = add(n.op == Op::conjunction ? Kind::min : Kind::max, {{l, slot(ln, 0, 0)}, {r, slot(ln, 0, 1)}});
        break;
      }
      case Op::always:
      case Op::eventually: {
        const detail::Window w = detail::window(n.interval, t, t_final_);
        std::vector<Term> terms;
        for (int u = w.lo; u <= w.hi; ++u) {
          terms.push_back({build(info.children[0], u), slot(ln, 0, u - t - n.interval.a)});
        }
        id = add(n.op == Op::always ? Kind::min : Kind::max, std::move(terms));
        break;
      }
      case Op::until: {
        const detail::Window w = detail::window(n.interval, t, t_final_);
        // prefix: running min of the left operand over [t, u); -1 while empty
        std::int64_t prefix = -1;
        auto extend = [&](int u) {
          const std::uint32_t c = build(info.children[0], u);
          prefix = prefix < 0 ? c : add(Kind::min, {{static_cast<std::uint32_t>(prefix), -1}, {c, -1}});
        };
        for (int u = t; u < w.lo; ++u) extend(u);
        std::vector<Term> candidates;
        for (int u = w.lo; u <= w.hi; ++u) {
          const int k = u - t - n.interval.a;
          std::vector<Term> terms{{build(info.children[1], u), slot(ln, 0, k)}};
          if (prefix >= 0) terms.push_back({static_cast<std::uint32_t>(prefix), slot(ln, 1, k)});
          candidates.push_back({add(Kind::min, std::move(terms)), -1});
          if (u < w.hi) extend(u);
        }
        id = add(Kind::max, std::move(candidates));
        break;
      }
    }
    memo_[ln][static_cast<std::size_t>(t)] = static_cast<std::int32_t>(id);
    return id;
  }

  Formula formula_;
  FormulaLayout layout_;
  int t_final_;
  std::vector<GraphNode> nodes_;
  std::vector<Term> terms_;
  std::vector<Leaf> leaves_;
  std::vector<std::vector<std::int32_t>> memo_;
  std::vector<std::uint32_t> roots_;
};

// Convenience entry points. Each compiles a graph for the signal's horizon;
// learners compile once and call the graph directly.

inline ExtReal wstl_robustness(const Signal& s, const Formula& f, const WeightValuation& w, int t = 0) {
  const RobustnessGraph g(f, s.t_final(), {t});
  std::vector<ExtReal> values;
  g.forward_hard(g.leaf_values(s), resolve_weights(g.layout(), w), values);
  return values[g.roots()[0]];
}

inline double soft_wstl_robustness(const Signal& s, const Formula& f, const WeightValuation& w,
                                   const SoftConfig& cfg, int t = 0) {
  cfg.validate();
  const RobustnessGraph g(f, s.t_final(), {t});
  std::vector<double> values;
  g.forward_soft(g.leaf_values(s), resolve_weights(g.layout(), w), cfg, values);
  return values[g.roots()[0]];
}

/// d soft_wstl_robustness / d w for every parameter slot. Slots the evaluation
/// never reaches get 0.
inline std::map<std::string, double> grad_weights(const Signal& s, const Formula& f, const WeightValuation& w,
                                                  const SoftConfig& cfg, int t = 0) {
  cfg.validate();
  const RobustnessGraph g(f, s.t_final(), {t});
  const std::vector<double> weights = resolve_weights(g.layout(), w);
  std::vector<double> values;
  g.forward_soft(g.leaf_values(s), weights, cfg, values);
  std::vector<double> grad(weights.size(), 0.0);
  g.backward_soft(weights, cfg, values, g.roots()[0], 1.0, grad);
  std::map<std::string, double> out;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (g.layout().slots()[i].is_parameter()) out[g.layout().slots()[i].id] = grad[i];
  }
  return out;
}

/// Hard weighted robustness at t = 0 .. last evaluable time (may be shorter
/// than the trace when nested windows run past its end).
inline std::vector<ExtReal> robustness_trace(const Signal& s, const Formula& f, const WeightValuation& w) {
  const int last = last_evaluable_time(f, s.t_final());
  if (last < 0) throw Error("formula cannot be evaluated at any time on this trace");
  std::vector<int> times(static_cast<std::size_t>(last) + 1);
  for (int t = 0; t <= last; ++t) times[static_cast<std::size_t>(t)] = t;
  const RobustnessGraph g(f, s.t_final(), times);
  std::vector<ExtReal> values;
  g.forward_hard(g.leaf_values(s), resolve_weights(g.layout(), w), values);
  std::vector<ExtReal> out;
  for (auto r : g.roots()) out.push_back(values[r]);
  return out;
}

/// Stable text dump of a weighted evaluation: the robustness trace, then every
/// formula node with its hard value at each time the trace reaches.
///
///   formula <text>
///   t_final <T>
///   trace <r(0)> <r(1)> ...
///   node <path> <op> <subformula>
///     t=<t> <value>
inline std::string robustness_dump(const Signal& s, const Formula& f, const WeightValuation& w) {
  const int last = last_evaluable_time(f, s.t_final());
  if (last < 0) throw Error("formula cannot be evaluated at any time on this trace");
  std::vector<int> times(static_cast<std::size_t>(last) + 1);
  for (int t = 0; t <= last; ++t) times[static_cast<std::size_t>(t)] = t;
  const RobustnessGraph g(f, s.t_final(), times);
  std::vector<ExtReal> values;
  g.forward_hard(g.leaf_values(s), resolve_weights(g.layout(), w), values);

  std::string out = "formula " + to_string(f) + "\nt_final " + std::to_string(s.t_final()) + "\ntrace";
  for (auto r : g.roots()) out += " " + format_ext_real(values[r]);
  out += "\n";
  const auto& nodes = g.layout().nodes();
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    std::string text;
    detail::print_node(text, *nodes[i].node);
    out += "node " + nodes[i].path + " " + op_name(nodes[i].node->op) + " " + text + "\n";
    for (int t = 0; t <= s.t_final(); ++t) {
      const std::int32_t id = g.node_for(i, t);
      if (id >= 0) out += "  t=" + std::to_string(t) + " " + format_ext_real(values[static_cast<std::size_t>(id)]) + "\n";
    }
  }
  return out;
}

}  // namespace wstlpref
