#pragma once

// Weight learning from pairwise preferences.
//
// A PreferenceDataset lists (preferred, other) signal ids over a signal store.
// Both solvers search the weight slots of a fixed formula: random sampling over
// (0,1]^n with lexicographic selection, and Adam on a logistic surrogate of the
// satisfied-pair count, restarted from the all-ones valuation and from random
// points. normalize_to_domain rescales any positive valuation into (0,1]^n
// without changing the order of robustness values.

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "wstlpref/error.hpp"
#include "wstlpref/formula.hpp"
#include "wstlpref/parser.hpp"
#include "wstlpref/rng.hpp"
#include "wstlpref/robustness.hpp"
#include "wstlpref/signal_io.hpp"

namespace wstlpref {

struct Preference {
  std::string preferred;
  std::string other;

  bool operator==(const Preference&) const = default;
};

class PreferenceDataset {
 public:
  PreferenceDataset(std::shared_ptr<const Dataset> store, std::vector<Preference> pairs)
      : store_(std::move(store)), pairs_(std::move(pairs)) {
    if (!store_) throw Error("preference dataset needs a signal store");
    for (const auto& p : pairs_) {
      if (!store_->contains(p.preferred)) throw Error("unknown signal id '" + p.preferred + "'");
      if (!store_->contains(p.other)) throw Error("unknown signal id '" + p.other + "'");
      if (p.preferred == p.other) throw Error("pair compares signal '" + p.preferred + "' with itself");
    }
  }

  const Dataset& store() const noexcept { return *store_; }
  const std::shared_ptr<const Dataset>& store_ptr() const noexcept { return store_; }
  const std::vector<Preference>& pairs() const noexcept { return pairs_; }
  std::size_t size() const noexcept { return pairs_.size(); }
  bool empty() const noexcept { return pairs_.empty(); }

  PreferenceDataset subset(const std::vector<std::size_t>& indices) const {
    std::vector<Preference> out;
    out.reserve(indices.size());
    for (std::size_t i : indices) out.push_back(pairs_.at(i));
    return {store_, std::move(out)};
  }

 private:
  std::shared_ptr<const Dataset> store_;
  std::vector<Preference> pairs_;
};

struct LearnConfig {
  int n_samples = 1000;
  double margin_fraction = 0.05;
  double M = 1e3;
  double epsilon = 0.01;
  double theta = 0.01;
  double beta = 1e10;
  double inf_sentinel = 1e6;
  double learning_rate = 1e-5;
  int batch_size = 5;
  double loss_tol = 1e-6;
  int restarts = 11;
  int max_iters = 5000;
  double w_floor = 1e-6;
  std::uint64_t seed = 0;

  void validate() const {
    auto positive = [](double x, const char* name) {
      if (!(x > 0) || !std::isfinite(x)) throw Error(std::string(name) + " must be positive");
    };
    if (n_samples <= 0) throw Error("n_samples must be positive");
    if (!(margin_fraction >= 0 && margin_fraction < 1)) throw Error("margin_fraction must lie in [0, 1)");
    positive(M, "M");
    positive(epsilon, "epsilon");
    positive(theta, "theta");
    positive(beta, "beta");
    positive(inf_sentinel, "inf_sentinel");
    positive(learning_rate, "learning_rate");
    if (batch_size <= 0) throw Error("batch_size must be positive");
    positive(loss_tol, "loss_tol");
    if (restarts <= 0) throw Error("restarts must be positive");
    if (max_iters < 0) throw Error("max_iters must be non-negative");
    positive(w_floor, "w_floor");
  }

  SoftConfig soft() const { return {beta, inf_sentinel}; }
};

enum class Solver { random_sampling, gradient, stl_baseline };

inline const char* solver_name(Solver s) {
  switch (s) {
    case Solver::random_sampling: return "random_sampling";
    case Solver::gradient: return "gradient";
    case Solver::stl_baseline: return "stl_baseline";
  }
  return "?";
}

inline Solver parse_solver(const std::string& name) {
  if (name == "random_sampling") return Solver::random_sampling;
  if (name == "gradient") return Solver::gradient;
  if (name == "stl_baseline") return Solver::stl_baseline;
  throw Error("unknown solver '" + name + "'");
}

struct LearnDiagnostics {
  int iterations = 0;  // gradient steps of the selected restart, or samples drawn
  std::optional<double> initial_loss;
  std::optional<double> final_loss;
  int restart_index = -1;
  int aborted_restarts = 0;
};

struct LearnResult {
  Formula formula = Formula::truth();
  int t_final = 0;
  WeightValuation valuation;
  int satisfied_pairs = 0;
  int total_pairs = 0;
  int margin_satisfied_pairs = 0;
  double mean_margin = 0.0;
  Solver solver = Solver::stl_baseline;
  LearnDiagnostics diagnostics;
};

enum class Choice { first, second, tie };

inline const char* choice_name(Choice c) {
  switch (c) {
    case Choice::first: return "first";
    case Choice::second: return "second";
    case Choice::tie: return "tie";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Normalization into (0,1]^n.

namespace detail {

inline int weighted_parent(const FormulaLayout& layout, std::size_t n, std::size_t* via_child) {
  std::size_t child = n;
  int p = layout.nodes()[n].parent;
  while (p >= 0) {
    if (is_weighted(layout.nodes()[static_cast<std::size_t>(p)].node->op)) {
      *via_child = child;
      return p;
    }
    child = static_cast<std::size_t>(p);
    p = layout.nodes()[child].parent;
  }
  return -1;
}

}  // namespace detail

/// Bottom-up rescaling over a dense slot vector. Each weighted node's entries
/// are divided by their max and the parent entries that multiply its robustness
/// absorb that max; the root block's max is dropped. Nodes carrying pinned
/// constants, and everything below them, are left as they are.
inline std::vector<double> normalize_dense(const FormulaLayout& layout, std::vector<double> w) {
  for (double x : w) {
    if (!(x > 0) || !std::isfinite(x)) throw Error("normalization needs strictly positive weights");
  }
  const auto& nodes = layout.nodes();
  std::vector<char> fixed(nodes.size(), 0);
  std::vector<int> parent(nodes.size(), -1);
  std::vector<std::size_t> via(nodes.size(), 0);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].level == 0) continue;
    parent[i] = detail::weighted_parent(layout, i, &via[i]);
    bool pinned = parent[i] >= 0 && fixed[static_cast<std::size_t>(parent[i])];
    const std::size_t n_slots = static_cast<std::size_t>(nodes[i].block_width * nodes[i].num_blocks);
    for (std::size_t k = 0; k < n_slots; ++k) {
      if (!layout.slots()[nodes[i].slot_base + k].is_parameter()) pinned = true;
    }
    fixed[i] = pinned;
  }
  for (int level = layout.depth(); level >= 1; --level) {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const LayoutNode& n = nodes[i];
      if (n.level != level || fixed[i]) continue;
      const std::size_t n_slots = static_cast<std::size_t>(n.block_width * n.num_blocks);
      if (n_slots == 0) continue;
      const auto first = w.begin() + static_cast<std::ptrdiff_t>(n.slot_base);
      const double m = *std::max_element(first, first + static_cast<std::ptrdiff_t>(n_slots));
      for (std::size_t k = 0; k < n_slots; ++k) w[n.slot_base + k] /= m;
      if (parent[i] < 0) continue;
      const auto p = static_cast<std::size_t>(parent[i]);
      const LayoutNode& pn = nodes[p];
      const std::size_t side = static_cast<std::size_t>(
          std::find(pn.children.begin(), pn.children.end(), via[i]) - pn.children.begin());
      switch (pn.node->op) {
        case Op::conjunction:
        case Op::disjunction: w[layout.slot(p, 0, static_cast<int>(side))] *= m; break;
        case Op::always:
        case Op::eventually:
          for (int k = 0; k < pn.block_width; ++k) w[layout.slot(p, 0, k)] *= m;
          break;
        case Op::until: {
          // the left operand feeds w2, the right operand w1
          const int block = side == 0 ? 1 : 0;
          for (int k = 0; k < pn.block_width; ++k) w[layout.slot(p, block, k)] *= m;
          break;
        }
        default: break;
      }
    }
  }
  return w;
}

inline WeightValuation normalize_to_domain(const Formula& f, const WeightValuation& w,
                                           std::optional<int> t_final = std::nullopt) {
  const FormulaLayout layout(f, t_final);
  return valuation_from_dense(layout, normalize_dense(layout, resolve_weights(layout, w)));
}

// ---------------------------------------------------------------------------
// Pair statistics.

struct PairStats {
  int satisfied = 0;
  int margin_satisfied = 0;
  double mean_margin = 0.0;

  /// Lexicographic: satisfied, then margin-satisfied, then mean margin.
  bool better_than(const PairStats& o) const {
    if (satisfied != o.satisfied) return satisfied > o.satisfied;
    if (margin_satisfied != o.margin_satisfied) return margin_satisfied > o.margin_satisfied;
    return mean_margin > o.mean_margin;
  }
};

/// `r` holds robustness per signal; `pairs` index into it. R is the spread of
/// the finite values; margins are reported in units of R when R > 0.
inline PairStats pair_stats(const std::vector<ExtReal>& r, const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                            double margin_fraction) {
  double lo = kPosInf, hi = kNegInf;
  for (ExtReal x : r) {
    if (std::isfinite(x)) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  }
  const double range = hi > lo ? hi - lo : 0.0;
  PairStats st;
  double sum = 0.0;
  int finite = 0;
  for (const auto& [a, b] : pairs) {
    const ExtReal d = r[a] - r[b];
    if (r[a] > r[b]) ++st.satisfied;
    if (r[a] > r[b] && d > margin_fraction * range) ++st.margin_satisfied;
    if (std::isfinite(d)) {
      sum += range > 0 ? d / range : d;
      ++finite;
    }
  }
  st.mean_margin = finite > 0 ? sum / finite : 0.0;
  return st;
}

// ---------------------------------------------------------------------------
// Compiled evaluation of one formula over the signals of a preference set.

class PairEvaluator {
 public:
  PairEvaluator(const PreferenceDataset& data, const Formula& f) : graph_(f, common_horizon(data)) {
    std::unordered_map<std::string, std::size_t> index;
    auto intern = [&](const std::string& id) {
      auto [it, inserted] = index.emplace(id, ids_.size());
      if (inserted) {
        ids_.push_back(id);
        leaf_values_.push_back(graph_.leaf_values(data.store().at(id)));
      }
      return it->second;
    };
    for (const auto& p : data.pairs()) pairs_.emplace_back(intern(p.preferred), intern(p.other));
  }

  const RobustnessGraph& graph() const noexcept { return graph_; }
  const FormulaLayout& layout() const noexcept { return graph_.layout(); }
  const std::vector<std::pair<std::size_t, std::size_t>>& pairs() const noexcept { return pairs_; }
  std::size_t num_signals() const noexcept { return ids_.size(); }

  std::vector<ExtReal> hard(const std::vector<double>& dense) const {
    std::vector<ExtReal> out(ids_.size());
    std::vector<ExtReal> values;
    for (std::size_t i = 0; i < ids_.size(); ++i) {
      graph_.forward_hard(leaf_values_[i], dense, values);
      out[i] = values[graph_.roots()[0]];
    }
    return out;
  }

  PairStats stats(const std::vector<double>& dense, double margin_fraction) const {
    return pair_stats(hard(dense), pairs_, margin_fraction);
  }

  /// Surrogate loss over the pairs in `batch` (indices into pairs()); adds
  /// d loss / d slot into `grad` when it is non-empty.
  double surrogate(const std::vector<std::size_t>& batch, const std::vector<double>& dense,
                   const std::vector<double>& init, const LearnConfig& cfg, std::vector<double>& grad) const {
    const SoftConfig soft = cfg.soft();
    std::unordered_map<std::size_t, double> seeds;
    std::unordered_map<std::size_t, std::vector<double>> values;
    auto soft_value = [&](std::size_t sig) {
      auto it = values.find(sig);
      if (it == values.end()) {
        it = values.emplace(sig, std::vector<double>{}).first;
        graph_.forward_soft(leaf_values_[sig], dense, soft, it->second);
      }
      return it->second[graph_.roots()[0]];
    };
    double loss = 0.0;
    for (std::size_t b : batch) {
      const auto [pos, neg] = pairs_.at(b);
      const double z = cfg.M * (soft_value(pos) - soft_value(neg) - cfg.epsilon);
      const double s = sigmoid(-z);
      loss += s;
      if (!grad.empty()) {
        const double dz = -s * sigmoid(z) * cfg.M;
        seeds[pos] += dz;
        seeds[neg] -= dz;
      }
    }
    double x = 0.0;
    for (std::size_t i = 0; i < dense.size(); ++i) {
      if (layout().slots()[i].is_parameter()) x += dense[i] * dense[i] - init[i] * init[i];
    }
    const double y = x + std::log(cfg.theta);
    loss += y > 0 ? y + std::log1p(std::exp(-y)) : std::log1p(std::exp(y));
    if (!grad.empty()) {
      const double g = sigmoid(y);
      for (std::size_t i = 0; i < dense.size(); ++i) {
        if (layout().slots()[i].is_parameter()) grad[i] += g * 2.0 * dense[i];
      }
      for (const auto& [sig, seed] : seeds) {
        if (seed != 0.0) graph_.backward_soft(dense, soft, values.at(sig), graph_.roots()[0], seed, grad);
      }
    }
    return loss;
  }

  double full_loss(const std::vector<double>& dense, const std::vector<double>& init, const LearnConfig& cfg) const {
    std::vector<std::size_t> all(pairs_.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    std::vector<double> no_grad;
    return surrogate(all, dense, init, cfg, no_grad);
  }

 private:
  static double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
  }

  static int common_horizon(const PreferenceDataset& data) {
    if (data.empty()) throw Error("preference dataset is empty");
    const int T = data.store().at(data.pairs()[0].preferred).t_final();
    for (const auto& p : data.pairs()) {
      if (data.store().at(p.preferred).t_final() != T || data.store().at(p.other).t_final() != T) {
        throw Error("all signals in a preference dataset must have the same length");
      }
    }
    return T;
  }

  RobustnessGraph graph_;
  std::vector<std::string> ids_;
  std::vector<std::vector<ExtReal>> leaf_values_;
  std::vector<std::pair<std::size_t, std::size_t>> pairs_;
};

// ---------------------------------------------------------------------------
// Public operations.

/// Pairs with r(preferred) > r(other) strictly, at t = 0.
inline int count_satisfied(const PreferenceDataset& data, const Formula& f, const WeightValuation& w) {
  if (data.empty()) return 0;
  const PairEvaluator ev(data, f);
  return ev.stats(resolve_weights(ev.layout(), w), 0.0).satisfied;
}

inline Choice predict(const Formula& f, const WeightValuation& w, const Signal& s1, const Signal& s2,
                      double margin = 0.0) {
  const ExtReal r1 = wstl_robustness(s1, f, w);
  const ExtReal r2 = wstl_robustness(s2, f, w);
  if (r1 == r2) return Choice::tie;
  const ExtReal d = r1 - r2;
  if (std::abs(d) <= margin) return Choice::tie;
  return d > 0 ? Choice::first : Choice::second;
}

/// Surrogate loss of `batch` under `w`, with `w_init` the restart's start point.
inline double surrogate_loss(const PreferenceDataset& batch, const Formula& f, const WeightValuation& w,
                             const WeightValuation& w_init, const LearnConfig& cfg) {
  cfg.validate();
  const PairEvaluator ev(batch, f);
  std::vector<std::size_t> all(batch.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  std::vector<double> no_grad;
  return ev.surrogate(all, resolve_weights(ev.layout(), w), resolve_weights(ev.layout(), w_init), cfg, no_grad);
}

namespace detail {

inline LearnResult make_result(const PairEvaluator& ev, const Formula& f, const std::vector<double>& dense,
                               Solver solver, double margin_fraction) {
  LearnResult out;
  out.formula = f;
  out.t_final = ev.graph().t_final();
  out.valuation = valuation_from_dense(ev.layout(), dense);
  const PairStats st = ev.stats(dense, margin_fraction);
  out.satisfied_pairs = st.satisfied;
  out.total_pairs = static_cast<int>(ev.pairs().size());
  out.margin_satisfied_pairs = st.margin_satisfied;
  out.mean_margin = st.mean_margin;
  out.solver = solver;
  return out;
}

inline std::vector<double> ones_dense(const FormulaLayout& layout) {
  return resolve_weights(layout, WeightValuation::uniform(layout));
}

inline std::vector<double> random_dense(const FormulaLayout& layout, Rng& rng) {
  std::vector<double> w = ones_dense(layout);
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (layout.slots()[i].is_parameter()) w[i] = uniform_open_closed(rng);
  }
  return w;
}

inline unsigned worker_count(std::size_t jobs) {
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  return static_cast<unsigned>(std::min<std::size_t>(hw, std::max<std::size_t>(jobs, 1)));
}

}  // namespace detail

/// The all-ones valuation, scored like a solver result.
inline LearnResult stl_baseline(const PreferenceDataset& data, const Formula& f, const LearnConfig& cfg = {}) {
  const PairEvaluator ev(data, f);
  return detail::make_result(ev, f, detail::ones_dense(ev.layout()), Solver::stl_baseline, cfg.margin_fraction);
}

inline LearnResult random_sampling_solve(const PreferenceDataset& data, const Formula& f, const LearnConfig& cfg,
                                         Rng& rng) {
  cfg.validate();
  if (data.empty()) throw Error("preference dataset is empty");
  const PairEvaluator ev(data, f);
  if (ev.layout().num_parameters() == 0) throw Error("formula has no weight parameters to learn");

  std::vector<std::vector<double>> samples(static_cast<std::size_t>(cfg.n_samples));
  for (auto& s : samples) s = detail::random_dense(ev.layout(), rng);

  std::vector<PairStats> stats(samples.size());
  const unsigned workers = detail::worker_count(samples.size());
  std::vector<std::future<void>> jobs;
  for (unsigned k = 0; k < workers; ++k) {
    jobs.push_back(std::async(std::launch::async, [&, k] {
      for (std::size_t i = k; i < samples.size(); i += workers) stats[i] = ev.stats(samples[i], cfg.margin_fraction);
    }));
  }
  for (auto& j : jobs) j.get();

  std::size_t best = 0;
  for (std::size_t i = 1; i < samples.size(); ++i) {
    if (stats[i].better_than(stats[best])) best = i;
  }
  LearnResult out = detail::make_result(ev, f, samples[best], Solver::random_sampling, cfg.margin_fraction);
  out.diagnostics.iterations = cfg.n_samples;
  out.diagnostics.restart_index = static_cast<int>(best);
  return out;
}

struct RestartOutcome {
  std::vector<double> weights;
  PairStats stats;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  int iterations = 0;
  bool aborted = false;
};

/// One Adam run from `init`. The full-dataset loss is checked once per pass
/// over the pairs; the run stops when it changes by less than loss_tol.
inline RestartOutcome adam_restart(const PairEvaluator& ev, std::vector<double> init, const LearnConfig& cfg,
                                   Rng& rng) {
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kAdamEps = 1e-8;
  const std::size_t n = init.size();
  const std::size_t P = ev.pairs().size();
  RestartOutcome out;
  std::vector<double> w = init;
  out.initial_loss = ev.full_loss(w, init, cfg);
  double prev = out.initial_loss;
  std::vector<double> m(n, 0.0), v(n, 0.0), grad(n);
  std::vector<std::size_t> order(P);
  for (std::size_t i = 0; i < P; ++i) order[i] = i;
  const std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), P);
  std::size_t cursor = P;  // forces a shuffle before the first batch
  int it = 0;
  while (it < cfg.max_iters) {
    if (cursor + batch > P) {
      shuffle(order, rng);
      cursor = 0;
    }
    const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(cursor),
                                       order.begin() + static_cast<std::ptrdiff_t>(cursor + batch));
    cursor += batch;
    std::fill(grad.begin(), grad.end(), 0.0);
    ev.surrogate(idx, w, init, cfg, grad);
    ++it;
    const double b1 = 1.0 - std::pow(kBeta1, it), b2 = 1.0 - std::pow(kBeta2, it);
    for (std::size_t i = 0; i < n; ++i) {
      if (!ev.layout().slots()[i].is_parameter()) continue;
      m[i] = kBeta1 * m[i] + (1 - kBeta1) * grad[i];
      v[i] = kBeta2 * v[i] + (1 - kBeta2) * grad[i] * grad[i];
      w[i] -= cfg.learning_rate * (m[i] / b1) / (std::sqrt(v[i] / b2) + kAdamEps);
      w[i] = std::max(w[i], cfg.w_floor);
    }
    const bool epoch_end = cursor + batch > P;
    if (epoch_end || it == cfg.max_iters) {
      const double loss = ev.full_loss(w, init, cfg);
      if (!std::isfinite(loss)) {
        out.aborted = true;
        return out;
      }
      const bool converged = std::abs(prev - loss) < cfg.loss_tol;
      prev = loss;
      if (converged) break;
    }
  }
  out.weights = std::move(w);
  out.final_loss = prev;
  out.iterations = it;
  out.stats = ev.stats(out.weights, cfg.margin_fraction);
  return out;
}

inline LearnResult gradient_solve(const PreferenceDataset& data, const Formula& f, const LearnConfig& cfg, Rng& rng) {
  cfg.validate();
  if (data.empty()) throw Error("preference dataset is empty");
  const PairEvaluator ev(data, f);
  if (ev.layout().num_parameters() == 0) throw Error("formula has no weight parameters to learn");

  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(cfg.restarts));
  for (auto& s : seeds) s = rng();
  std::vector<std::future<RestartOutcome>> runs;
  for (int r = 0; r < cfg.restarts; ++r) {
    runs.push_back(std::async(std::launch::async, [&, r] {
      Rng local(seeds[static_cast<std::size_t>(r)]);
      std::vector<double> init = r == 0 ? detail::ones_dense(ev.layout()) : detail::random_dense(ev.layout(), local);
      return adam_restart(ev, std::move(init), cfg, local);
    }));
  }
  std::vector<RestartOutcome> outcomes;
  for (auto& run : runs) outcomes.push_back(run.get());

  int best = -1, aborted = 0;
  for (int r = 0; r < cfg.restarts; ++r) {
    const RestartOutcome& o = outcomes[static_cast<std::size_t>(r)];
    if (o.aborted) {
      ++aborted;
      continue;
    }
    if (best < 0) {
      best = r;
      continue;
    }
    const RestartOutcome& b = outcomes[static_cast<std::size_t>(best)];
    if (o.stats.satisfied > b.stats.satisfied ||
        (o.stats.satisfied == b.stats.satisfied && o.final_loss < b.final_loss)) {
      best = r;
    }
  }
  if (best < 0) throw Error("every gradient restart diverged");
  const RestartOutcome& chosen = outcomes[static_cast<std::size_t>(best)];
  LearnResult out = detail::make_result(ev, f, normalize_dense(ev.layout(), chosen.weights), Solver::gradient,
                                        cfg.margin_fraction);
  out.diagnostics.iterations = chosen.iterations;
  out.diagnostics.initial_loss = chosen.initial_loss;
  out.diagnostics.final_loss = chosen.final_loss;
  out.diagnostics.restart_index = best;
  out.diagnostics.aborted_restarts = aborted;
  return out;
}

// ---------------------------------------------------------------------------
// Files.

inline constexpr int kLearnFormatVersion = 1;

inline json to_json(const LearnConfig& c) {
  return json{{"format", "wstlpref-learn-config"},
              {"version", kLearnFormatVersion},
              {"n_samples", c.n_samples},
              {"margin_fraction", c.margin_fraction},
              {"M", c.M},
              {"epsilon", c.epsilon},
              {"theta", c.theta},
              {"beta", c.beta},
              {"inf_sentinel", c.inf_sentinel},
              {"learning_rate", c.learning_rate},
              {"batch_size", c.batch_size},
              {"loss_tol", c.loss_tol},
              {"restarts", c.restarts},
              {"max_iters", c.max_iters},
              {"w_floor", c.w_floor},
              {"seed", c.seed}};
}

/// Missing fields keep their defaults; unknown fields are an error.
inline LearnConfig learn_config_from_json(const json& j) {
  check_format(j, "wstlpref-learn-config", kLearnFormatVersion);
  LearnConfig c;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "format" || key == "version") continue;
      if (key == "n_samples") c.n_samples = value.get<int>();
      else if (key == "margin_fraction") c.margin_fraction = value.get<double>();
      else if (key == "M") c.M = value.get<double>();
      else if (key == "epsilon") c.epsilon = value.get<double>();
      else if (key == "theta") c.theta = value.get<double>();
      else if (key == "beta") c.beta = value.get<double>();
      else if (key == "inf_sentinel") c.inf_sentinel = value.get<double>();
      else if (key == "learning_rate") c.learning_rate = value.get<double>();
      else if (key == "batch_size") c.batch_size = value.get<int>();
      else if (key == "loss_tol") c.loss_tol = value.get<double>();
      else if (key == "restarts") c.restarts = value.get<int>();
      else if (key == "max_iters") c.max_iters = value.get<int>();
      else if (key == "w_floor") c.w_floor = value.get<double>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else throw Error("unknown learn config field '" + key + "'");
    } catch (const json::exception& e) {
      throw Error("learn config field '" + key + "': " + e.what());
    }
  }
  c.validate();
  return c;
}

inline json to_json(const LearnResult& r) {
  json weights = json::object();
  for (const auto& [id, v] : r.valuation.values()) weights[id] = v;
  auto optional_number = [](const std::optional<double>& x) { return x ? json(*x) : json(nullptr); };
  return json{{"format", "wstlpref-learn-result"},
              {"version", kLearnFormatVersion},
              {"formula", to_string(r.formula)},
              {"t_final", r.t_final},
              {"solver", solver_name(r.solver)},
              {"weights", weights},
              {"satisfied_pairs", r.satisfied_pairs},
              {"total_pairs", r.total_pairs},
              {"margin_satisfied_pairs", r.margin_satisfied_pairs},
              {"mean_margin", r.mean_margin},
              {"diagnostics",
               {{"iterations", r.diagnostics.iterations},
                {"initial_loss", optional_number(r.diagnostics.initial_loss)},
                {"final_loss", optional_number(r.diagnostics.final_loss)},
                {"restart_index", r.diagnostics.restart_index},
                {"aborted_restarts", r.diagnostics.aborted_restarts}}}};
}

inline LearnResult learn_result_from_json(const json& j) {
  check_format(j, "wstlpref-learn-result", kLearnFormatVersion);
  try {
    LearnResult r;
    r.formula = parse_formula(j.at("formula").get<std::string>());
    r.t_final = j.at("t_final").get<int>();
    r.solver = parse_solver(j.at("solver").get<std::string>());
    for (const auto& [id, v] : j.at("weights").items()) r.valuation.set(id, v.get<double>());
    r.satisfied_pairs = j.at("satisfied_pairs").get<int>();
    r.total_pairs = j.at("total_pairs").get<int>();
    r.margin_satisfied_pairs = j.at("margin_satisfied_pairs").get<int>();
    r.mean_margin = j.at("mean_margin").get<double>();
    const json& d = j.at("diagnostics");
    r.diagnostics.iterations = d.at("iterations").get<int>();
    if (!d.at("initial_loss").is_null()) r.diagnostics.initial_loss = d.at("initial_loss").get<double>();
    if (!d.at("final_loss").is_null()) r.diagnostics.final_loss = d.at("final_loss").get<double>();
    r.diagnostics.restart_index = d.at("restart_index").get<int>();
    r.diagnostics.aborted_restarts = d.value("aborted_restarts", 0);
    // every slot of the formula must be covered
    resolve_weights(FormulaLayout(r.formula, r.t_final), r.valuation);
    return r;
  } catch (const json::exception& e) {
    throw Error(std::string("malformed learn result: ") + e.what());
  }
}

/// Preference files are self-contained: they embed the signals they reference.
inline json to_json(const PreferenceDataset& p) {
  json signals = json::array();
  std::vector<std::string> seen;
  auto add = [&](const std::string& id) {
    if (std::find(seen.begin(), seen.end(), id) != seen.end()) return;
    seen.push_back(id);
    signals.push_back({{"id", id}, {"signal", to_json(p.store().at(id))}});
  };
  json pairs = json::array();
  for (const auto& pr : p.pairs()) {
    add(pr.preferred);
    add(pr.other);
    pairs.push_back({{"preferred", pr.preferred}, {"other", pr.other}});
  }
  return json{{"format", "wstlpref-preferences"},
              {"version", kLearnFormatVersion},
              {"signals", signals},
              {"pairs", pairs}};
}

inline PreferenceDataset preferences_from_json(const json& j) {
  check_format(j, "wstlpref-preferences", kLearnFormatVersion);
  try {
    auto store = std::make_shared<Dataset>();
    for (const auto& e : j.at("signals")) {
      store->add(e.at("id").get<std::string>(), signal_from_json(e.at("signal")));
    }
    std::vector<Preference> pairs;
    for (const auto& e : j.at("pairs")) {
      pairs.push_back({e.at("preferred").get<std::string>(), e.at("other").get<std::string>()});
    }
    return {std::move(store), std::move(pairs)};
  } catch (const json::exception& e) {
    throw Error(std::string("malformed preference file: ") + e.what());
  }
}

inline PreferenceDataset load_preferences(const std::filesystem::path& p) {
  return preferences_from_json(read_json_file(p));
}
inline void save_preferences(const std::filesystem::path& p, const PreferenceDataset& d) {
  write_json_file(p, to_json(d));
}
inline LearnResult load_learn_result(const std::filesystem::path& p) { return learn_result_from_json(read_json_file(p)); }
inline void save_learn_result(const std::filesystem::path& p, const LearnResult& r) { write_json_file(p, to_json(r)); }
inline LearnConfig load_learn_config(const std::filesystem::path& p) {
  return learn_config_from_json(read_json_file(p));
}

}  // namespace wstlpref
