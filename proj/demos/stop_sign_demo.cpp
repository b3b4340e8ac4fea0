// Stop-sign walkthrough: simulate trajectories, label pairs with a made-up
// driver who likes an early stop, learn weights back, and compare methods
// over random splits.
//
//   ./stop_sign_demo [seed]

#include <cstdio>
#include <cstdlib>

#include "wstlpref/baselines.hpp"
#include "wstlpref/scenarios.hpp"

using namespace wstlpref;

int main(int argc, char** argv) {
  const std::uint64_t seed = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 1;
  Rng rng(seed);

  const StopSignSpec spec;
  const Formula f = stop_sign_formula(spec);
  const GeneratedDataset sat = generate_dataset(spec, 100, true, rng);
  const GeneratedDataset vio = generate_dataset(spec, 100, false, rng);
  std::printf("formula   %s\n", to_string(f).c_str());
  std::printf("simulated %zu satisfying (acceptance %.2f), %zu violating\n", sat.signals.size(),
              sat.acceptance_rate(), vio.signals.size());

  // The "driver": weights on the eventually block fall off with time, so a
  // car that is stopped early scores higher than one with the same slack.
  const FormulaLayout layout(f, spec.horizon);
  WeightValuation driver = WeightValuation::uniform(layout);
  for (const auto& slot : layout.slots()) {
    if (slot.is_parameter() && slot.id.rfind("r.0:w[", 0) == 0) {
      driver.set(slot.id, 1.0 - 0.95 * slot.offset / spec.horizon);
    }
  }

  const PairSet pairs = build_pairs(sat.signals, 50, 2.0, {"x", "v"}, rng);
  auto store = std::make_shared<Dataset>(sat.signals);
  std::vector<Preference> prefs;
  for (const auto& p : pairs.pairs) {
    switch (predict(f, driver, store->at(p.first), store->at(p.second))) {
      case Choice::first: prefs.push_back({p.first, p.second}); break;
      case Choice::second: prefs.push_back({p.second, p.first}); break;
      case Choice::tie: break;
    }
  }
  const PreferenceDataset data(store, prefs);
  std::printf("labeled   %zu pairs\n\n", data.size());

  LearnConfig cfg;
  cfg.restarts = 2;
  cfg.max_iters = 300;
  const LearnResult rs = random_sampling_solve(data, f, cfg, rng);
  const LearnResult gb = gradient_solve(data, f, cfg, rng);
  const LearnResult stl = stl_baseline(data, f, cfg);
  for (const LearnResult* r : {&stl, &rs, &gb}) {
    std::printf("%-16s satisfied %d/%d, margin-satisfied %d\n", solver_name(r->solver), r->satisfied_pairs,
                r->total_pairs, r->margin_satisfied_pairs);
  }

  const double safe_rs = safety_eval(wstl_predictor(f, rs.valuation), sat.signals, vio.signals, 100, rng);
  const double safe_gb = safety_eval(wstl_predictor(f, gb.valuation), sat.signals, vio.signals, 100, rng);
  std::printf("\nsatisfying preferred over violating: RS %.0f%%, GB %.0f%%\n\n", 100 * safe_rs, 100 * safe_gb);

  EvalOptions opt;
  opt.n_splits = 5;
  cfg.restarts = 1;
  cfg.max_iters = 100;
  std::printf("%s", format_table(evaluate_methods(data, f, cfg, opt, rng)).c_str());
  return 0;
}
