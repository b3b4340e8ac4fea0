#include <catch_amalgamated.hpp>

#include "fixtures.hpp"
#include "wstlpref/baselines.hpp"
#include "wstlpref/scenarios.hpp"

using namespace wstlpref;
using Catch::Approx;

namespace {

Signal constant(double c, int n) {
  return Signal({{"x", ChannelKind::real}}, {std::vector<ExtReal>(static_cast<std::size_t>(n), c)});
}

// Signals whose only informative feature is rho: x is constant per signal,
// preferences follow the larger constant.
PreferenceDataset separable(Rng& rng, int n_signals, int n_pairs) {
  auto store = std::make_shared<Dataset>();
  std::vector<double> level;
  for (int i = 0; i < n_signals; ++i) {
    level.push_back(uniform(rng, -5, 5));
    store->add("s" + std::to_string(i), constant(level.back(), 8));
  }
  std::vector<Preference> pairs;
  while (static_cast<int>(pairs.size()) < n_pairs) {
    const auto a = uniform_index(rng, level.size()), b = uniform_index(rng, level.size());
    if (a == b) continue;
    const auto hi = level[a] > level[b] ? a : b, lo = hi == a ? b : a;
    pairs.push_back({"s" + std::to_string(hi), "s" + std::to_string(lo)});
  }
  return {store, pairs};
}

}  // namespace

TEST_CASE("feature vectors", "[baselines][features]") {
  const Formula stl = parse_formula("G(x >= 0)");
  SECTION("constant signal") {
    const FeatureVector f = feature_vector(constant(3.0, 10), stl);
    // frequencies 0..5 split as {0}, {1}, {2,3}, {4}, {5}
    CHECK(f[0] == Approx(3.0));
    for (int b = 1; b < 5; ++b) CHECK(f[static_cast<std::size_t>(b)] == Approx(0.0).margin(1e-12));
    CHECK(f[5] == 3.0);
  }
  SECTION("zero signal") {
    const FeatureVector f = feature_vector(constant(0.0, 7), stl);
    for (int b = 0; b < 5; ++b) CHECK(f[static_cast<std::size_t>(b)] == 0.0);
    CHECK(f[5] == 0.0);
  }
  SECTION("worked example robustness") {
    const FeatureVector f = feature_vector(fixtures::example1_signal(), fixtures::example1_formula());
    CHECK(f[5] == 2.0);
  }
  SECTION("pure tone lands in its bin") {
    std::vector<ExtReal> x(20);
    for (int t = 0; t < 20; ++t) x[static_cast<std::size_t>(t)] = std::cos(2 * std::numbers::pi * 8 * t / 20.0);
    const FeatureVector f = feature_vector(Signal({{"x", ChannelKind::real}}, {x}), stl);
    // 11 frequencies: bins {0,1}, {2,3}, {4,5}, {6,7}, {8,9,10}; |X_8| / n = 0.5
    CHECK(f[4] == Approx(0.5 / 3));
    CHECK(f[0] == Approx(0.0).margin(1e-12));
  }
  SECTION("infinite robustness is clamped and boolean channels are skipped") {
    const Signal s({{"x", ChannelKind::real}, {"p", ChannelKind::boolean}}, {{1, 1}, {kPosInf, kPosInf}});
    const FeatureVector f = feature_vector(s, parse_formula("G p"));
    CHECK(f[5] == 1e6);
    // 2 frequencies: bins {}, {}, {0}, {}, {1}
    CHECK(f[0] == 0.0);
    CHECK(f[2] == Approx(1.0));
    CHECK_THROWS_AS(feature_vector(Signal({{"p", ChannelKind::boolean}}, {{kPosInf}}), parse_formula("p")), Error);
  }
}

TEST_CASE("Bradley-Terry pieces", "[baselines][bt]") {
  BTModel m;
  const FeatureVector a{1, 2, 3, 4, 5, 6}, b{2, 2, 1, 4, 0, -6};
  CHECK(bt_probability(m, a, b) == 0.5);
  bt_sgd_step(m, a, b, 0.1);
  for (std::size_t i = 0; i < kFeatureDim; ++i) {
    const double d = a[i] - b[i];
    CHECK(sign(m.v[i]) == sign(d));
    CHECK(m.v[i] == Approx(0.1 * 0.5 * d));
  }
  const Formula stl = parse_formula("G(x >= 0)");
  BTModel zero;
  CHECK(bt_predict(zero, constant(1, 4), constant(-1, 4), stl) == Choice::second);
  CHECK(bt_predict(m, constant(1, 4), constant(1, 4), stl) == Choice::second);
}

TEST_CASE("Bradley-Terry fits a separable set", "[baselines][bt]") {
  Rng rng(3);
  const PreferenceDataset data = separable(rng, 30, 40);
  const Formula stl = parse_formula("G(x >= 0)");
  const BTModel m = bt_fit(data, stl, BTConfig{}, rng);
  CHECK(accuracy(bt_predictor(m, stl), data) == 1.0);
  CHECK(m.v[5] > 0);
  CHECK_THROWS_AS(bt_fit(data.subset({}), stl, BTConfig{}, rng), Error);
}

TEST_CASE("full-batch negative log-likelihood does not increase", "[baselines][bt][property]") {
  Rng rng(4);
  const PreferenceDataset data = separable(rng, 20, 30);
  const Formula stl = parse_formula("G(x >= 0)");
  BTConfig cfg;
  cfg.learning_rate = 0.01;
  cfg.full_batch = true;
  double prev = kPosInf;
  for (int epochs = 0; epochs <= 50; epochs += 5) {
    cfg.epochs = epochs;
    const double nll = bt_nll(bt_fit(data, stl, cfg, rng), data, stl);
    if (epochs == 0) CHECK(nll == Approx(std::log(2.0)));
    CHECK(nll <= prev + 1e-15);
    prev = nll;
  }
}

TEST_CASE("splits", "[baselines][splits]") {
  Rng rng(5);
  const auto s50 = make_splits(50, 10, 0.7, rng);
  REQUIRE(s50.size() == 10);
  for (const auto& s : s50) {
    CHECK(s.train.size() == 35);
    CHECK(s.test.size() == 15);
    std::vector<std::size_t> all = s.train;
    all.insert(all.end(), s.test.begin(), s.test.end());
    std::sort(all.begin(), all.end());
    for (std::size_t i = 0; i < 50; ++i) CHECK(all[i] == i);
  }
  CHECK(s50[0].train != s50[1].train);
  const auto s2 = make_splits(2, 1, 0.7, rng);
  CHECK(s2[0].train.size() == 1);
  CHECK(s2[0].test.size() == 1);
  Rng a(6), b(6);
  CHECK(make_splits(20, 3, 0.7, a)[2].train == make_splits(20, 3, 0.7, b)[2].train);
  CHECK_THROWS_AS(make_splits(1, 1, 0.7, rng), Error);
}

TEST_CASE("accuracy", "[baselines][accuracy]") {
  Rng rng(7);
  const PreferenceDataset data = separable(rng, 30, 200);
  const Predictor perfect = [](const Signal& a, const Signal& b) {
    return a.at(0, 0) > b.at(0, 0) ? Choice::first : Choice::second;
  };
  const Predictor anti = [&](const Signal& a, const Signal& b) {
    return perfect(a, b) == Choice::first ? Choice::second : Choice::first;
  };
  CHECK(accuracy(perfect, data) == 1.0);
  CHECK(accuracy(anti, data) == 0.0);
  CHECK(accuracy(perfect, data) + accuracy(anti, data) == 1.0);
  Rng coin(8);
  const Predictor random = [&](const Signal&, const Signal&) {
    return uniform01(coin) < 0.5 ? Choice::first : Choice::second;
  };
  double total = 0;
  for (int i = 0; i < 50; ++i) total += accuracy(random, data);
  CHECK(total / 50 == Approx(0.5).margin(0.02));
}

TEST_CASE("safety evaluation", "[baselines][safety]") {
  Rng rng(9);
  const StopSignSpec spec;
  const Dataset sat = generate_dataset(spec, 30, true, rng).signals;
  const Dataset vio = generate_dataset(spec, 30, false, rng).signals;
  const Formula f = stop_sign_formula(spec);
  const FormulaLayout layout(f, spec.horizon);
  for (int trial = 0; trial < 3; ++trial) {
    const WeightValuation w = fixtures::random_valuation(rng, layout, 0.01, 1.0);
    CHECK(safety_eval(wstl_predictor(f, w), sat, vio, 40, rng) == 1.0);
  }
  const Predictor second = [](const Signal&, const Signal&) { return Choice::second; };
  CHECK(safety_eval(second, sat, vio, 40, rng) == 0.0);

  const PreferenceDataset pairs = safety_pairs(sat, vio, 10, rng);
  for (const auto& p : pairs.pairs()) {
    CHECK(p.preferred.rfind("stop-sat-", 0) == 0);
    CHECK(p.other.rfind("stop-vio-", 0) == 0);
  }
  CHECK_THROWS_AS(safety_pairs(sat, Dataset{}, 1, rng), Error);
}

TEST_CASE("method comparison over splits", "[baselines][eval]") {
  Rng rng(10);
  const PreferenceDataset data = separable(rng, 30, 20);
  const Formula f = parse_formula("G[0,7](x >= 0)");
  LearnConfig cfg;
  cfg.n_samples = 50;
  cfg.restarts = 2;
  cfg.max_iters = 20;
  EvalOptions opt;
  opt.n_splits = 3;
  const auto rows = evaluate_methods(data, f, cfg, opt, rng);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].method == "STL");
  CHECK(rows[3].method == "BT");
  for (const auto& r : rows) {
    CHECK(r.train.size() == 3);
    CHECK(r.test.size() == 3);
  }
  CHECK(rows[1].train_mean() >= rows[0].train_mean());
  const json j = to_json(rows);
  CHECK(j["methods"][0]["method"] == "STL");
  CHECK(format_table(rows).find("BT") != std::string::npos);
  CHECK_THROWS_AS(evaluate_methods(data.subset({}), f, cfg, opt, rng), Error);
}
