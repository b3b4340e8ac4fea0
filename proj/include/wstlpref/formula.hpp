#pragma once

// Parametric weighted STL formulas.
//
// A Formula is an immutable tree. Weighted operators (&, |, U, G, F) own a
// block of weight slots; every slot is either a learnable parameter or a
// pinned positive constant. Weight values live outside the tree, in a
// WeightValuation keyed by slot id, so one formula serves many valuations.
//
// Slot ids are path based: "r" is the root, "r.0.1" is the second child of the
// first child of the root, and a slot is "<path>:w[k]" (or ":w1[k]" / ":w2[k]"
// for the two blocks of Until). Re-parsing the same text gives the same ids.

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "wstlpref/error.hpp"
#include "wstlpref/ext_real.hpp"
#include "wstlpref/signal.hpp"

namespace wstlpref {

enum class Op { truth, predicate, negation, conjunction, disjunction, until, always, eventually };

inline bool is_weighted(Op op) noexcept {
  return op == Op::conjunction || op == Op::disjunction || op == Op::until || op == Op::always ||
         op == Op::eventually;
}

inline bool is_temporal(Op op) noexcept { return op == Op::until || op == Op::always || op == Op::eventually; }

/// Discrete interval [a, b]; b empty means unbounded.
struct Interval {
  int a = 0;
  std::optional<int> b;

  bool bounded() const noexcept { return b.has_value(); }
  bool operator==(const Interval&) const = default;

  static Interval unbounded(int a = 0) { return Interval{a, std::nullopt}; }
};

/// Pinned constant or parameter, as written in the source text.
struct WeightSpec {
  std::optional<double> value;  // set => constant
  std::string label;            // parameter name as written, "" for unnamed

  bool operator==(const WeightSpec&) const = default;
};

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
  Op op = Op::truth;
  PredicateFn predicate;          // Op::predicate
  std::vector<NodePtr> children;  // 0, 1 or 2
  Interval interval;              // temporal ops
  std::vector<WeightSpec> pins;   // empty, or one entry per slot (bounded ops only)
};

class Formula {
 public:
  Formula() : root_(std::make_shared<Node>()) {}
  explicit Formula(NodePtr root) : root_(std::move(root)) {}

  const Node& root() const noexcept { return *root_; }
  const NodePtr& ptr() const noexcept { return root_; }

  static Formula truth() { return Formula(); }

  static Formula predicate(PredicateFn fn) {
    auto n = std::make_shared<Node>();
    n->op = Op::predicate;
    n->predicate = std::move(fn);
    return Formula(std::move(n));
  }

  static Formula negation(const Formula& f) { return make(Op::negation, {f.ptr()}, {}, {}); }

  static Formula conjunction(const Formula& l, const Formula& r, std::vector<WeightSpec> pins = {}) {
    return make(Op::conjunction, {l.ptr(), r.ptr()}, {}, std::move(pins));
  }
  static Formula disjunction(const Formula& l, const Formula& r, std::vector<WeightSpec> pins = {}) {
    return make(Op::disjunction, {l.ptr(), r.ptr()}, {}, std::move(pins));
  }
  /// A => B, desugared to !A | B; the disjunction carries the weights.
  static Formula implication(const Formula& l, const Formula& r, std::vector<WeightSpec> pins = {}) {
    return disjunction(negation(l), r, std::move(pins));
  }
  static Formula until(const Formula& l, const Formula& r, Interval iv, std::vector<WeightSpec> pins = {}) {
    return make(Op::until, {l.ptr(), r.ptr()}, iv, std::move(pins));
  }
  static Formula always(const Formula& f, Interval iv, std::vector<WeightSpec> pins = {}) {
    return make(Op::always, {f.ptr()}, iv, std::move(pins));
  }
  static Formula eventually(const Formula& f, Interval iv, std::vector<WeightSpec> pins = {}) {
    return make(Op::eventually, {f.ptr()}, iv, std::move(pins));
  }

 private:
  static Formula make(Op op, std::vector<NodePtr> children, Interval iv, std::vector<WeightSpec> pins) {
    if (iv.bounded() && *iv.b < iv.a) throw Error("malformed interval: a > b");
    if (iv.a < 0) throw Error("malformed interval: negative bound");
    auto n = std::make_shared<Node>();
    n->op = op;
    n->children = std::move(children);
    n->interval = iv;
    n->pins = std::move(pins);
    if (!n->pins.empty()) {
      if (is_temporal(op) && !iv.bounded()) throw Error("weights cannot be pinned on an unbounded operator");
      const std::size_t width = is_temporal(op) ? static_cast<std::size_t>(*iv.b - iv.a + 1) : 2;
      const std::size_t expected = op == Op::until ? 2 * width : width;
      if (n->pins.size() != expected) {
        throw Error("expected " + std::to_string(expected) + " weights, got " + std::to_string(n->pins.size()));
      }
      for (const auto& p : n->pins) {
        if (p.value && !(*p.value > 0 && std::isfinite(*p.value))) throw Error("pinned weights must be positive");
      }
    }
    return Formula(std::move(n));
  }

  NodePtr root_;
};

/// Structural equality (pins compared by value and label).
inline bool structurally_equal(const Node& a, const Node& b) {
  if (a.op != b.op || !(a.predicate == b.predicate) || !(a.interval == b.interval) || a.pins != b.pins ||
      a.children.size() != b.children.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.children.size(); ++i) {
    if (!structurally_equal(*a.children[i], *b.children[i])) return false;
  }
  return true;
}

inline bool operator==(const Formula& a, const Formula& b) { return structurally_equal(a.root(), b.root()); }

inline bool has_unbounded(const Node& n) {
  if (is_temporal(n.op) && !n.interval.bounded()) return true;
  return std::any_of(n.children.begin(), n.children.end(), [](const NodePtr& c) { return has_unbounded(*c); });
}

// ---------------------------------------------------------------------------
// Layout: the formula flattened in pre-order with its weight slots resolved
// for a given trace horizon.

struct WeightSlot {
  std::string id;
  std::optional<double> constant;  // pinned value, empty for parameters
  std::size_t node = 0;            // index into FormulaLayout::nodes
  int block = 0;                   // 0 = w / w1, 1 = w2
  int offset = 0;

  bool is_parameter() const noexcept { return !constant.has_value(); }
};

struct LayoutNode {
  const Node* node = nullptr;
  std::string path;
  int level = 0;  // 1 + number of weighted ancestors; 0 for unweighted nodes
  int parent = -1;
  std::vector<std::size_t> children;
  std::size_t slot_base = 0;
  int block_width = 0;  // entries per block
  int num_blocks = 0;   // 0 (unweighted), 1, or 2 (Until)
};

class FormulaLayout {
 public:
  /// `t_final` is required when the formula contains an unbounded operator:
  /// such an operator's block is sized for evaluation at t = 0.
  explicit FormulaLayout(const Formula& f, std::optional<int> t_final = std::nullopt) : t_final_(t_final) {
    if (!t_final && has_unbounded(f.root())) {
      throw Error("formula has unbounded operators; a trace horizon is required to enumerate its weights");
    }
    visit(f.root(), "r", -1, 0);
  }

  const std::vector<LayoutNode>& nodes() const noexcept { return nodes_; }
  const std::vector<WeightSlot>& slots() const noexcept { return slots_; }
  std::optional<int> t_final() const noexcept { return t_final_; }

  std::optional<std::size_t> find_slot(const std::string& id) const {
    auto it = slot_index_.find(id);
    if (it == slot_index_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t num_parameters() const {
    return static_cast<std::size_t>(
        std::count_if(slots_.begin(), slots_.end(), [](const WeightSlot& s) { return s.is_parameter(); }));
  }

  /// Slot index of entry `offset` in `block` of node `n`.
  std::size_t slot(std::size_t n, int block, int offset) const {
    const LayoutNode& ln = nodes_[n];
    return ln.slot_base + static_cast<std::size_t>(block * ln.block_width + offset);
  }

  int depth() const {
    int d = 0;
    for (const auto& n : nodes_) d = std::max(d, n.level);
    return d;
  }

 private:
  int block_width_for(const Node& n) const {
    if (n.op == Op::conjunction || n.op == Op::disjunction) return 2;
    if (!is_temporal(n.op)) return 0;
    if (n.interval.bounded()) return *n.interval.b - n.interval.a + 1;
    return std::max(0, *t_final_ - n.interval.a + 1);
  }

  void visit(const Node& n, const std::string& path, int parent, int weighted_ancestors) {
    const std::size_t index = nodes_.size();
    LayoutNode ln;
    ln.node = &n;
    ln.path = path;
    ln.parent = parent;
    ln.slot_base = slots_.size();
    if (is_weighted(n.op)) {
      ln.level = weighted_ancestors + 1;
      ln.block_width = block_width_for(n);
      ln.num_blocks = n.op == Op::until ? 2 : 1;
      for (int b = 0; b < ln.num_blocks; ++b) {
        for (int k = 0; k < ln.block_width; ++k) {
          WeightSlot s;
          const std::string block_name = n.op == Op::until ? (b == 0 ? "w1" : "w2") : "w";
          s.id = path + ":" + block_name + "[" + std::to_string(k) + "]";
          s.node = index;
          s.block = b;
          s.offset = k;
          if (!n.pins.empty()) s.constant = n.pins[static_cast<std::size_t>(b * ln.block_width + k)].value;
          slot_index_.emplace(s.id, slots_.size());
          slots_.push_back(std::move(s));
        }
      }
    }
    nodes_.push_back(ln);
    if (parent >= 0) nodes_[static_cast<std::size_t>(parent)].children.push_back(index);
    const int below = weighted_ancestors + (is_weighted(n.op) ? 1 : 0);
    for (std::size_t i = 0; i < n.children.size(); ++i) {
      visit(*n.children[i], path + "." + std::to_string(i), static_cast<int>(index), below);
    }
  }

  std::optional<int> t_final_;
  std::vector<LayoutNode> nodes_;
  std::vector<WeightSlot> slots_;
  std::map<std::string, std::size_t> slot_index_;
};

inline std::vector<WeightSlot> weight_slots(const Formula& f, std::optional<int> t_final = std::nullopt) {
  return FormulaLayout(f, t_final).slots();
}

/// Slots of the weighted operator closest to the root, looking through negations.
inline std::vector<WeightSlot> root_weight_slots(const Formula& f, std::optional<int> t_final = std::nullopt) {
  const FormulaLayout layout(f, t_final);
  for (std::size_t i = 0; i < layout.nodes().size(); ++i) {
    if (layout.nodes()[i].level != 1) continue;
    std::vector<WeightSlot> out;
    for (const auto& s : layout.slots()) {
      if (s.node == i) out.push_back(s);
    }
    return out;
  }
  throw Error("formula has no weighted operator");
}

/// Weighted nodes grouped by level (root weighted operator = level 1).
inline std::map<int, std::vector<LayoutNode>> levels(const Formula& f, std::optional<int> t_final = std::nullopt) {
  std::map<int, std::vector<LayoutNode>> out;
  const FormulaLayout layout(f, t_final);
  for (const auto& n : layout.nodes()) {
    if (n.level > 0) out[n.level].push_back(n);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Weight valuations.

/// Positive value for every parameter slot, keyed by slot id.
class WeightValuation {
 public:
  WeightValuation() = default;
  explicit WeightValuation(std::map<std::string, double> values) {
    for (auto& [id, v] : values) set(id, v);
  }

  void set(const std::string& id, double value) {
    if (!(value > 0) || !std::isfinite(value)) {
      throw Error("weight for '" + id + "' must be positive and finite");
    }
    values_[id] = value;
  }

  const std::map<std::string, double>& values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }

  double at(const std::string& id) const {
    auto it = values_.find(id);
    if (it == values_.end()) throw Error("no value for weight slot '" + id + "'");
    return it->second;
  }

  bool operator==(const WeightValuation&) const = default;

  /// Every parameter slot set to `value` (1 gives the unweighted STL valuation).
  static WeightValuation uniform(const FormulaLayout& layout, double value = 1.0) {
    WeightValuation w;
    for (const auto& s : layout.slots()) {
      if (s.is_parameter()) w.set(s.id, value);
    }
    return w;
  }

 private:
  std::map<std::string, double> values_;
};

/// Dense weight vector over all slots of `layout`, constants included.
inline std::vector<double> resolve_weights(const FormulaLayout& layout, const WeightValuation& w) {
  std::vector<double> out(layout.slots().size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& s = layout.slots()[i];
    out[i] = s.constant ? *s.constant : w.at(s.id);
  }
  return out;
}

/// Inverse of resolve_weights for the parameter slots.
inline WeightValuation valuation_from_dense(const FormulaLayout& layout, const std::vector<double>& dense) {
  WeightValuation w;
  for (std::size_t i = 0; i < dense.size(); ++i) {
    if (layout.slots()[i].is_parameter()) w.set(layout.slots()[i].id, dense[i]);
  }
  return w;
}

// ---------------------------------------------------------------------------
// Canonical printer. parse(to_string(f)) == f.

namespace detail {

inline void print_affine(std::string& out, const PredicateFn& fn) {
  bool first = true;
  auto emit = [&](double c, const std::string& name) {
    double mag = c;
    if (!first) {
      out += c < 0 ? " - " : " + ";
      mag = std::abs(c);
    }
    if (name.empty()) {
      out += format_ext_real(mag);
    } else if (mag == 1.0) {
      out += name;
    } else if (mag == -1.0) {
      out += "-" + name;
    } else {
      out += format_ext_real(mag) + "*" + name;
    }
    first = false;
  };
  for (const auto& [name, c] : fn.terms) emit(c, name);
  if (fn.offset != 0.0 || fn.terms.empty()) emit(fn.offset, "");
}

inline void print_pins(std::string& out, const std::vector<WeightSpec>& pins) {
  if (pins.empty()) return;
  out += "{";
  for (std::size_t i = 0; i < pins.size(); ++i) {
    if (i) out += ",";
    out += pins[i].value ? format_ext_real(*pins[i].value) : (pins[i].label.empty() ? "_" : pins[i].label);
  }
  out += "}";
}

inline void print_interval(std::string& out, const Interval& iv) {
  if (!iv.bounded() && iv.a == 0) return;
  out += "[" + std::to_string(iv.a) + "," + (iv.bounded() ? std::to_string(*iv.b) : "inf") + "]";
}

inline void print_node(std::string& out, const Node& n) {
  switch (n.op) {
    case Op::truth: out += "true"; break;
    case Op::predicate:
      if (n.predicate.terms.size() == 1 && n.predicate.terms[0].second == 1.0 && n.predicate.offset == 0.0) {
        out += n.predicate.terms[0].first;
      } else {
        out += "(";
        print_affine(out, n.predicate);
        out += " >= 0)";
      }
      break;
    case Op::negation:
      out += "!";
      print_node(out, *n.children[0]);
      break;
    case Op::conjunction:
    case Op::disjunction:
    case Op::until:
      out += "(";
      print_node(out, *n.children[0]);
      out += n.op == Op::conjunction ? " &" : n.op == Op::disjunction ? " |" : " U";
      if (n.op == Op::until) print_interval(out, n.interval);
      print_pins(out, n.pins);
      out += " ";
      print_node(out, *n.children[1]);
      out += ")";
      break;
    case Op::always:
    case Op::eventually:
      out += n.op == Op::always ? "G" : "F";
      print_interval(out, n.interval);
      print_pins(out, n.pins);
      out += "(";
      print_node(out, *n.children[0]);
      out += ")";
      break;
  }
}

}  // namespace detail

inline std::string to_string(const Formula& f) {
  std::string out;
  detail::print_node(out, f.root());
  return out;
}

inline const char* op_name(Op op) {
  switch (op) {
    case Op::truth: return "true";
    case Op::predicate: return "pred";
    case Op::negation: return "not";
    case Op::conjunction: return "and";
    case Op::disjunction: return "or";
    case Op::until: return "until";
    case Op::always: return "always";
    case Op::eventually: return "eventually";
  }
  return "?";
}

}  // namespace wstlpref
