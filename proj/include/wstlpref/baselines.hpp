#pragma once

// Bradley-Terry baseline over spectral + robustness features, the split
// protocol, accuracy metrics, and the safety experiment that pairs satisfying
// with violating signals.

#include <array>
#include <cmath>
#include <functional>
#include <future>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "wstlpref/learn.hpp"
#include "wstlpref/robustness.hpp"
#include "wstlpref/signal.hpp"

namespace wstlpref {

inline constexpr std::size_t kFeatureBins = 5;
inline constexpr std::size_t kFeatureDim = kFeatureBins + 1;

using FeatureVector = std::array<double, kFeatureDim>;

/// Mean DFT magnitude (divided by n, averaged over real channels) in five
/// contiguous bins over frequencies 0..floor(n/2), then rho clamped to
/// +-inf_sentinel. Bins left empty by very short signals are 0.
inline FeatureVector feature_vector(const Signal& s, const Formula& stl, double inf_sentinel = 1e6) {
  const std::size_t n = static_cast<std::size_t>(s.length());
  const std::size_t K = n / 2 + 1;
  std::vector<double> spectrum(K, 0.0);
  int real_channels = 0;
  for (std::size_t c = 0; c < s.num_channels(); ++c) {
    if (s.channels()[c].kind != ChannelKind::real) continue;
    ++real_channels;
    const auto x = s.channel(c);
    for (std::size_t k = 0; k < K; ++k) {
      double re = 0.0, im = 0.0;
      for (std::size_t t = 0; t < n; ++t) {
        const double angle = -2.0 * std::numbers::pi * static_cast<double>(k * t % n) / static_cast<double>(n);
        re += x[t] * std::cos(angle);
        im += x[t] * std::sin(angle);
      }
      spectrum[k] += std::hypot(re, im) / static_cast<double>(n);
    }
  }
  if (real_channels == 0) throw Error("feature extraction needs at least one real channel");
  FeatureVector f{};
  for (std::size_t b = 0; b < kFeatureBins; ++b) {
    const std::size_t lo = b * K / kFeatureBins, hi = (b + 1) * K / kFeatureBins;
    if (hi == lo) continue;
    double sum = 0.0;
    for (std::size_t k = lo; k < hi; ++k) sum += spectrum[k];
    f[b] = sum / static_cast<double>(hi - lo) / real_channels;
  }
  f[kFeatureBins] = std::clamp(rho(s, stl), -inf_sentinel, inf_sentinel);
  return f;
}

struct BTModel {
  FeatureVector v{};
  FeatureVector mean{};
  FeatureVector scale{1, 1, 1, 1, 1, 1};

  FeatureVector standardize(const FeatureVector& f) const {
    FeatureVector z;
    for (std::size_t i = 0; i < kFeatureDim; ++i) z[i] = (f[i] - mean[i]) / scale[i];
    return z;
  }
  double score(const FeatureVector& f) const {
    const FeatureVector z = standardize(f);
    double u = 0.0;
    for (std::size_t i = 0; i < kFeatureDim; ++i) u += v[i] * z[i];
    return u;
  }
};

struct BTConfig {
  double learning_rate = 0.1;
  int epochs = 200;
  bool full_batch = false;  // one averaged step per epoch instead of per-pair steps
  double inf_sentinel = 1e6;
};

/// P(first preferred) = 1 / (1 + exp(u2 - u1)).
inline double bt_probability(const BTModel& m, const FeatureVector& first, const FeatureVector& second) {
  return 1.0 / (1.0 + std::exp(m.score(second) - m.score(first)));
}

/// One ascent step on log P(preferred beats other).
inline void bt_sgd_step(BTModel& m, const FeatureVector& preferred, const FeatureVector& other, double lr) {
  const double p = bt_probability(m, preferred, other);
  const FeatureVector a = m.standardize(preferred), b = m.standardize(other);
  for (std::size_t i = 0; i < kFeatureDim; ++i) m.v[i] += lr * (1.0 - p) * (a[i] - b[i]);
}

namespace detail {

inline std::map<std::string, FeatureVector> pair_features(const PreferenceDataset& data, const Formula& stl,
                                                          double inf_sentinel) {
  std::map<std::string, FeatureVector> out;
  for (const auto& p : data.pairs()) {
    for (const std::string* id : {&p.preferred, &p.other}) {
      if (!out.count(*id)) out.emplace(*id, feature_vector(data.store().at(*id), stl, inf_sentinel));
    }
  }
  return out;
}

}  // namespace detail

/// Mean negative log-likelihood of the recorded preferences.
inline double bt_nll(const BTModel& m, const PreferenceDataset& data, const Formula& stl, double inf_sentinel = 1e6) {
  const auto feats = detail::pair_features(data, stl, inf_sentinel);
  double sum = 0.0;
  for (const auto& p : data.pairs()) {
    const double d = m.score(feats.at(p.other)) - m.score(feats.at(p.preferred));
    sum += d > 0 ? d + std::log1p(std::exp(-d)) : std::log1p(std::exp(d));
  }
  return sum / static_cast<double>(data.size());
}

/// SGD from v = 0 with per-feature standardization fitted on the training
/// signals (zero spread uses scale 1).
inline BTModel bt_fit(const PreferenceDataset& data, const Formula& stl, const BTConfig& cfg, Rng& rng) {
  if (data.empty()) throw Error("Bradley-Terry needs at least one pair");
  const auto feats = detail::pair_features(data, stl, cfg.inf_sentinel);
  BTModel m;
  for (const auto& [id, f] : feats) {
    for (std::size_t i = 0; i < kFeatureDim; ++i) m.mean[i] += f[i];
  }
  for (double& x : m.mean) x /= static_cast<double>(feats.size());
  FeatureVector var{};
  for (const auto& [id, f] : feats) {
    for (std::size_t i = 0; i < kFeatureDim; ++i) var[i] += (f[i] - m.mean[i]) * (f[i] - m.mean[i]);
  }
  for (std::size_t i = 0; i < kFeatureDim; ++i) {
    const double sd = std::sqrt(var[i] / static_cast<double>(feats.size()));
    m.scale[i] = sd > 1e-12 ? sd : 1.0;
  }
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.full_batch) {
      FeatureVector step{};
      for (const auto& p : data.pairs()) {
        const FeatureVector& a = feats.at(p.preferred);
        const FeatureVector& b = feats.at(p.other);
        const double prob = bt_probability(m, a, b);
        const FeatureVector za = m.standardize(a), zb = m.standardize(b);
        for (std::size_t i = 0; i < kFeatureDim; ++i) step[i] += (1.0 - prob) * (za[i] - zb[i]);
      }
      for (std::size_t i = 0; i < kFeatureDim; ++i) m.v[i] += cfg.learning_rate * step[i] / data.size();
      continue;
    }
    shuffle(order, rng);
    for (std::size_t k : order) {
      const auto& p = data.pairs()[k];
      bt_sgd_step(m, feats.at(p.preferred), feats.at(p.other), cfg.learning_rate);
    }
  }
  return m;
}

/// First iff its score is strictly larger; ties go to the second signal.
inline Choice bt_predict(const BTModel& m, const Signal& s1, const Signal& s2, const Formula& stl,
                         double inf_sentinel = 1e6) {
  return m.score(feature_vector(s1, stl, inf_sentinel)) > m.score(feature_vector(s2, stl, inf_sentinel))
             ? Choice::first
             : Choice::second;
}

// ---------------------------------------------------------------------------
// Protocol.

using Predictor = std::function<Choice(const Signal&, const Signal&)>;

inline Predictor wstl_predictor(const Formula& f, const WeightValuation& w) {
  return [f, w](const Signal& a, const Signal& b) { return predict(f, w, a, b); };
}

inline Predictor bt_predictor(const BTModel& m, const Formula& stl, double inf_sentinel = 1e6) {
  return [m, stl, inf_sentinel](const Signal& a, const Signal& b) { return bt_predict(m, a, b, stl, inf_sentinel); };
}

/// Fraction of pairs for which the predictor picks the recorded preferred
/// signal; ties count as misses. 0 for an empty set.
inline double accuracy(const Predictor& predictor, const PreferenceDataset& data) {
  if (data.empty()) return 0.0;
  int hits = 0;
  for (const auto& p : data.pairs()) {
    hits += predictor(data.store().at(p.preferred), data.store().at(p.other)) == Choice::first;
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  std::uint64_t seed = 0;
};

/// Independent shuffles of 0..n_pairs-1; the first round(ratio * n) go to training.
inline std::vector<Split> make_splits(std::size_t n_pairs, int n_splits, double ratio, Rng& rng) {
  if (n_pairs < 2) throw Error("splitting needs at least two pairs");
  if (!(ratio > 0 && ratio < 1)) throw Error("split ratio must lie in (0, 1)");
  const auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n_pairs)));
  std::vector<Split> out;
  for (int k = 0; k < n_splits; ++k) {
    Split s;
    s.seed = rng();
    Rng local(s.seed);
    std::vector<std::size_t> idx(n_pairs);
    for (std::size_t i = 0; i < n_pairs; ++i) idx[i] = i;
    shuffle(idx, local);
    s.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
    out.push_back(std::move(s));
  }
  return out;
}

/// `n_pairs` random (satisfying, violating) pairs, satisfying signal first.
inline PreferenceDataset safety_pairs(const Dataset& satisfying, const Dataset& violating, int n_pairs, Rng& rng) {
  if (satisfying.empty() || violating.empty()) throw Error("safety pairs need satisfying and violating signals");
  auto store = std::make_shared<Dataset>();
  for (const auto& s : satisfying) store->add(s.id, s.signal);
  for (const auto& s : violating) store->add(s.id, s.signal);
  std::vector<Preference> pairs;
  for (int i = 0; i < n_pairs; ++i) {
    pairs.push_back({satisfying[uniform_index(rng, satisfying.size())].id,
                     violating[uniform_index(rng, violating.size())].id});
  }
  return {std::move(store), std::move(pairs)};
}

/// Fraction of random safe/unsafe pairs on which the predictor picks the
/// satisfying signal.
inline double safety_eval(const Predictor& predictor, const Dataset& satisfying, const Dataset& violating,
                          int n_pairs, Rng& rng) {
  return accuracy(predictor, safety_pairs(satisfying, violating, n_pairs, rng));
}

// ---------------------------------------------------------------------------
// Method comparison over splits.

struct MethodScore {
  std::string method;
  std::vector<double> train;
  std::vector<double> test;

  static double mean(const std::vector<double>& xs) {
    if (xs.empty()) return 0.0;
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
  }
  double train_mean() const { return mean(train); }
  double test_mean() const { return mean(test); }
};

struct EvalOptions {
  int n_splits = 10;
  double ratio = 0.7;
  bool random_sampling = true;
  bool gradient = true;
  bool bradley_terry = true;
  BTConfig bt;
  // Already-trained predictors (e.g. loaded learn results), scored on every
  // split after the STL row.
  std::vector<std::pair<std::string, Predictor>> fixed;
};

/// Trains every enabled method on each split's training pairs and scores it
/// on both halves. Rows: STL (unit weights), the fixed predictors, RS, GB, BT.
inline std::vector<MethodScore> evaluate_methods(const PreferenceDataset& data, const Formula& f,
                                                 const LearnConfig& cfg, const EvalOptions& opt, Rng& rng) {
  if (data.empty()) throw Error("evaluation needs at least one pair");
  const std::vector<Split> splits = make_splits(data.size(), opt.n_splits, opt.ratio, rng);
  const Formula stl = f;  // weights are ignored by rho, so the same formula serves as the STL one
  std::vector<MethodScore> rows{{"STL", {}, {}}};
  for (const auto& [name, p] : opt.fixed) rows.push_back({name, {}, {}});
  if (opt.random_sampling) rows.push_back({"RS", {}, {}});
  if (opt.gradient) rows.push_back({"GB", {}, {}});
  if (opt.bradley_terry) rows.push_back({"BT", {}, {}});

  struct SplitScores {
    std::vector<double> train, test;
  };
  std::vector<std::future<SplitScores>> jobs;
  for (const Split& split : splits) {
    jobs.push_back(std::async(std::launch::async, [&, split] {
      const PreferenceDataset train = data.subset(split.train);
      const PreferenceDataset test = data.subset(split.test);
      Rng local(split.seed);
      SplitScores out;
      auto score = [&](const Predictor& p) {
        out.train.push_back(accuracy(p, train));
        out.test.push_back(accuracy(p, test));
      };
      const FormulaLayout layout(f, data.store().at(data.pairs()[0].preferred).t_final());
      score(wstl_predictor(f, WeightValuation::uniform(layout)));
      for (const auto& fixed : opt.fixed) score(fixed.second);
      if (opt.random_sampling) score(wstl_predictor(f, random_sampling_solve(train, f, cfg, local).valuation));
      if (opt.gradient) score(wstl_predictor(f, gradient_solve(train, f, cfg, local).valuation));
      if (opt.bradley_terry) score(bt_predictor(bt_fit(train, stl, opt.bt, local), stl, opt.bt.inf_sentinel));
      return out;
    }));
  }
  for (auto& j : jobs) {
    const SplitScores s = j.get();
    for (std::size_t r = 0; r < rows.size(); ++r) {
      rows[r].train.push_back(s.train[r]);
      rows[r].test.push_back(s.test[r]);
    }
  }
  return rows;
}

inline json to_json(const std::vector<MethodScore>& rows) {
  json methods = json::array();
  for (const auto& r : rows) {
    methods.push_back({{"method", r.method},
                       {"train_mean", r.train_mean()},
                       {"test_mean", r.test_mean()},
                       {"train", r.train},
                       {"test", r.test}});
  }
  return json{{"format", "wstlpref-eval"}, {"version", 1}, {"methods", methods}};
}

inline std::string format_table(const std::vector<MethodScore>& rows) {
  std::string out = "method   train    test\n";
  char line[64];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-6s %6.1f%% %6.1f%%\n", r.method.c_str(), 100 * r.train_mean(),
                  100 * r.test_mean());
    out += line;
  }
  return out;
}

}  // namespace wstlpref
