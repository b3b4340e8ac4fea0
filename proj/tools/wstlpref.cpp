// wstlpref command-line tool.
//
//   wstlpref simulate   --scenario stop -n 100 --seed 1 --out data/stop.json
//   wstlpref pairs      --dataset data/stop.json -n 50 --threshold 2 --out pairs.json
//   wstlpref label      --pairs pairs.json --scenario stop --result hidden.json --out prefs.json
//   wstlpref learn      --method rs --preferences prefs.json --scenario stop --out result.json
//   wstlpref predict    --result result.json --preferences prefs.json
//   wstlpref eval       --preferences prefs.json --scenario stop --out eval.json
//   wstlpref elicit     --pairs pairs.json --session session.json --scenario stop --port 8080
//   wstlpref robustness --signal s.json --formula "G[0,3](x >= 0)"
//   wstlpref normalize  --result result.json --out normalized.json
//
// Exit status is 0 on success, 1 on a runtime error, and CLI11's code on a
// usage error.

#include <CLI11.hpp>

#include <csignal>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "wstlpref/baselines.hpp"
#include "wstlpref/scenarios.hpp"
#include "wstlpref/service.hpp"
#include "wstlpref/session.hpp"

namespace fs = std::filesystem;
using namespace wstlpref;

namespace {

// --- shared option groups --------------------------------------------------

struct FormulaSource {
  std::string text;
  std::string file;
  std::string scenario;
  std::string spec;

  void add(CLI::App& app) {
    app.add_option("--formula", text, "Formula text");
    app.add_option("--formula-file", file, "File holding the formula text")->check(CLI::ExistingFile);
    app.add_option("--scenario", scenario, "Use a scenario's formula")->check(CLI::IsMember({"stop", "pedestrian"}));
    app.add_option("--spec", spec, "Scenario spec file (defaults otherwise)")->check(CLI::ExistingFile);
  }

  bool given() const { return !text.empty() || !file.empty() || !scenario.empty(); }

  Formula resolve() const {
    const int n = !text.empty() + !file.empty() + !scenario.empty();
    if (n != 1) throw Error("give exactly one of --formula, --formula-file, --scenario");
    if (!text.empty()) return parse_formula(text);
    if (!file.empty()) return parse_formula(read_text_file(file));
    if (scenario == "stop") return stop_sign_formula(stop_spec());
    return pedestrian_formula(pedestrian_spec());
  }

  StopSignSpec stop_spec() const { return spec.empty() ? StopSignSpec{} : stop_spec_from_json(read_json_file(spec)); }
  PedestrianSpec pedestrian_spec() const {
    return spec.empty() ? PedestrianSpec{} : pedestrian_spec_from_json(read_json_file(spec));
  }
};

// Every LearnConfig field can come from --config and be overridden by a flag.
struct LearnOptions {
  std::string config_file;
  LearnConfig flags;
  std::vector<std::pair<CLI::Option*, std::function<void(LearnConfig&)>>> overrides;

  template <class T>
  void field(CLI::App& app, const std::string& name, T LearnConfig::*member, const std::string& help) {
    CLI::Option* o = app.add_option("--" + name, flags.*member, help);
    overrides.emplace_back(o, [this, member](LearnConfig& c) { c.*member = flags.*member; });
  }

  void add(CLI::App& app) {
    app.add_option("--config", config_file, "Learn config file")->check(CLI::ExistingFile);
    field(app, "n-samples", &LearnConfig::n_samples, "Random-sampling candidates");
    field(app, "margin-fraction", &LearnConfig::margin_fraction, "Margin as a fraction of the robustness range");
    field(app, "M", &LearnConfig::M, "Logistic steepness");
    field(app, "epsilon", &LearnConfig::epsilon, "Logistic offset");
    field(app, "theta", &LearnConfig::theta, "Regularizer scale");
    field(app, "beta", &LearnConfig::beta, "Soft min/max sharpness");
    field(app, "inf-sentinel", &LearnConfig::inf_sentinel, "Stand-in for infinite robustness in the soft path");
    field(app, "learning-rate", &LearnConfig::learning_rate, "Adam step size");
    field(app, "batch-size", &LearnConfig::batch_size, "Pairs per gradient step");
    field(app, "loss-tol", &LearnConfig::loss_tol, "Stop when the epoch loss changes less than this");
    field(app, "restarts", &LearnConfig::restarts, "Gradient restarts (the first starts from all ones)");
    field(app, "max-iters", &LearnConfig::max_iters, "Gradient steps per restart");
    field(app, "w-floor", &LearnConfig::w_floor, "Lower clamp for weights during gradient steps");
  }

  LearnConfig resolve(std::optional<std::uint64_t> seed) const {
    LearnConfig c = config_file.empty() ? LearnConfig{} : load_learn_config(config_file);
    for (const auto& [opt, apply] : overrides) {
      if (opt->count() > 0) apply(c);
    }
    if (seed) c.seed = *seed;
    c.validate();
    return c;
  }
};

struct PreferenceSource {
  std::string preferences;
  std::string session;

  void add(CLI::App& app) {
    auto* p = app.add_option("--preferences", preferences, "Preference file")->check(CLI::ExistingFile);
    auto* s = app.add_option("--session", session, "Completed elicitation session")->check(CLI::ExistingFile);
    p->excludes(s);
  }

  PreferenceDataset resolve() const {
    if (!preferences.empty()) return load_preferences(preferences);
    if (!session.empty()) return load_session_preferences(session);
    throw Error("give --preferences or --session");
  }
};

int horizon_of(const PreferenceDataset& data) {
  if (data.empty()) throw Error("preference set is empty");
  return data.store().at(data.pairs()[0].preferred).t_final();
}

std::string fmt(double x) { return format_ext_real(x); }

void report(const LearnResult& r) {
  std::cout << "solver " << solver_name(r.solver) << "\n"
            << "satisfied " << r.satisfied_pairs << "/" << r.total_pairs << "\n"
            << "margin_satisfied " << r.margin_satisfied_pairs << "/" << r.total_pairs << "\n"
            << "mean_margin " << fmt(r.mean_margin) << "\n";
  if (r.diagnostics.initial_loss) std::cout << "initial_loss " << fmt(*r.diagnostics.initial_loss) << "\n";
  if (r.diagnostics.final_loss) std::cout << "final_loss " << fmt(*r.diagnostics.final_loss) << "\n";
}

fs::path relative_to(const fs::path& target, const fs::path& from_file) {
  const fs::path base = fs::absolute(from_file).parent_path();
  return fs::relative(fs::absolute(target), base);
}

// --- subcommands ---------------------------------------------------------

struct Simulate {
  FormulaSource src;
  int n = 100;
  bool violating = false;
  std::uint64_t seed = 0;
  std::string out;
  std::string manifest;

  void add(CLI::App& app) {
    app.add_option("--scenario", src.scenario, "Scenario")->required()->check(CLI::IsMember({"stop", "pedestrian"}));
    app.add_option("--spec", src.spec, "Scenario spec file")->check(CLI::ExistingFile);
    app.add_option("-n,--count", n, "Number of signals")->check(CLI::PositiveNumber);
    app.add_flag("--violating", violating, "Keep violating trajectories instead of satisfying ones");
    app.add_option("--seed", seed, "Random seed");
    app.add_option("--out", out, "Dataset file")->required();
    app.add_option("--manifest", manifest, "Manifest file (default: <out stem>.manifest.json)");
  }

  int run() const {
    Rng rng(seed);
    GeneratedDataset g;
    json spec_json;
    if (src.scenario == "stop") {
      const StopSignSpec s = src.stop_spec();
      g = generate_dataset(s, n, !violating, rng);
      spec_json = to_json(s);
    } else {
      const PedestrianSpec s = src.pedestrian_spec();
      g = generate_dataset(s, n, !violating, rng);
      spec_json = to_json(s);
    }
    const fs::path out_path(out);
    if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
    save_dataset(out_path, g.signals);
    fs::path m(manifest);
    if (manifest.empty()) m = out_path.parent_path() / (out_path.stem().string() + ".manifest.json");
    write_json_file(m, json{{"format", "wstlpref-manifest"},
                            {"version", 1},
                            {"dataset", relative_to(out_path, m).string()},
                            {"scenario", src.scenario},
                            {"spec", spec_json},
                            {"count", n},
                            {"satisfying", !violating},
                            {"seed", seed},
                            {"draws", g.draws},
                            {"accepted", g.accepted},
                            {"acceptance_rate", g.acceptance_rate()}});
    std::cout << "wrote " << g.signals.size() << " signals to " << out << " (acceptance rate "
              << fmt(g.acceptance_rate()) << ")\n";
    return 0;
  }
};

struct Pairs {
  std::string dataset;
  int n = 50;
  double threshold = 2.0;
  std::vector<std::string> channels{"x", "v"};
  std::uint64_t seed = 0;
  std::string out;

  void add(CLI::App& app) {
    app.add_option("--dataset", dataset, "Dataset file")->required()->check(CLI::ExistingFile);
    app.add_option("-n,--count", n, "Number of pairs")->check(CLI::PositiveNumber);
    app.add_option("--threshold", threshold, "Minimum Euclidean distance between paired signals");
    app.add_option("--channels", channels, "Channels in the distance")->delimiter(',');
    app.add_option("--seed", seed, "Random seed");
    app.add_option("--out", out, "Pair file")->required();
  }

  int run() const {
    Rng rng(seed);
    PairSet p = build_pairs(load_dataset(dataset), n, threshold, channels, rng);
    const fs::path out_path(out);
    if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
    p.dataset = relative_to(dataset, out_path).string();
    save_pair_set(out_path, p);
    std::cout << "wrote " << p.pairs.size() << " pairs to " << out << "\n";
    return 0;
  }
};

// Labels a pair file with a known valuation: the signal with the higher
// weighted robustness is preferred. Tied pairs are dropped.
struct Label {
  std::string pairs;
  FormulaSource src;
  std::string result;
  std::string out;

  void add(CLI::App& app) {
    app.add_option("--pairs", pairs, "Pair file")->required()->check(CLI::ExistingFile);
    src.add(app);
    app.add_option("--result", result, "Learn result whose valuation labels the pairs (unit weights otherwise)")
        ->check(CLI::ExistingFile);
    app.add_option("--out", out, "Preference file")->required();
  }

  int run() const {
    const PairSet ps = load_pair_set(pairs);
    auto store = std::make_shared<Dataset>(load_pair_dataset(pairs, ps));
    std::optional<LearnResult> r;
    if (!result.empty()) r = load_learn_result(result);
    const Formula f = src.given() ? src.resolve() : r ? r->formula : throw Error("no formula given");
    std::optional<WeightValuation> w;
    if (r) w = r->valuation;
    std::vector<Preference> prefs;
    int ties = 0;
    for (const auto& p : ps.pairs) {
      const Signal& a = store->at(p.first);
      if (!w) w = WeightValuation::uniform(FormulaLayout(f, a.t_final()));
      switch (predict(f, *w, a, store->at(p.second))) {
        case Choice::first: prefs.push_back({p.first, p.second}); break;
        case Choice::second: prefs.push_back({p.second, p.first}); break;
        case Choice::tie: ++ties; break;
      }
    }
    save_preferences(out, PreferenceDataset(store, std::move(prefs)));
    std::cout << "labeled " << ps.pairs.size() - static_cast<std::size_t>(ties) << " pairs, dropped " << ties
              << " ties\n";
    return 0;
  }
};

struct Learn {
  std::string method;
  PreferenceSource prefs;
  FormulaSource src;
  LearnOptions learn;
  std::uint64_t seed = 0;
  std::string out;

  void add(CLI::App& app) {
    app.add_option("--method", method, "rs (random sampling) or gb (gradient)")
        ->required()
        ->check(CLI::IsMember({"rs", "gb"}));
    prefs.add(app);
    src.add(app);
    learn.add(app);
    app.add_option("--seed", seed, "Random seed");
    app.add_option("--out", out, "Result file")->required();
  }

  int run() const {
    const PreferenceDataset data = prefs.resolve();
    const Formula f = src.resolve();
    const LearnConfig cfg = learn.resolve(seed);
    Rng rng(cfg.seed);
    const LearnResult r =
        method == "rs" ? random_sampling_solve(data, f, cfg, rng) : gradient_solve(data, f, cfg, rng);
    save_learn_result(out, r);
    report(r);
    return 0;
  }
};

struct Predict {
  std::string result;
  std::string preferences;
  std::string first;
  std::string second;

  void add(CLI::App& app) {
    app.add_option("--result", result, "Learn result")->required()->check(CLI::ExistingFile);
    app.add_option("--preferences", preferences, "Score a preference file")->check(CLI::ExistingFile);
    app.add_option("--first", first, "First signal file")->check(CLI::ExistingFile);
    app.add_option("--second", second, "Second signal file")->check(CLI::ExistingFile);
  }

  int run() const {
    const LearnResult r = load_learn_result(result);
    if (!preferences.empty()) {
      const PreferenceDataset data = load_preferences(preferences);
      if (horizon_of(data) != r.t_final) throw Error("preference signals do not match the result's horizon");
      const Predictor p = wstl_predictor(r.formula, r.valuation);
      for (const auto& pair : data.pairs()) {
        const Choice c = p(data.store().at(pair.preferred), data.store().at(pair.other));
        std::cout << pair.preferred << " " << pair.other << " "
                  << (c == Choice::first ? "agree" : c == Choice::tie ? "tie" : "disagree") << "\n";
      }
      std::cout << "accuracy " << fmt(accuracy(p, data)) << "\n";
      return 0;
    }
    if (first.empty() || second.empty()) throw Error("give --preferences, or both --first and --second");
    const Signal a = load_signal(first), b = load_signal(second);
    std::cout << "r_first " << fmt(wstl_robustness(a, r.formula, r.valuation)) << "\n"
              << "r_second " << fmt(wstl_robustness(b, r.formula, r.valuation)) << "\n"
              << "preferred " << choice_name(predict(r.formula, r.valuation, a, b)) << "\n";
    return 0;
  }
};

struct Eval {
  PreferenceSource prefs;
  FormulaSource src;
  LearnOptions learn;
  std::vector<std::string> results;
  int splits = 10;
  double ratio = 0.7;
  bool no_rs = false, no_gb = false, no_bt = false;
  std::uint64_t seed = 0;
  std::string out;

  void add(CLI::App& app) {
    prefs.add(app);
    src.add(app);
    learn.add(app);
    app.add_option("--result", results, "Learn results scored as extra rows (repeatable)")->check(CLI::ExistingFile);
    app.add_option("--splits", splits, "Number of random splits")->check(CLI::PositiveNumber);
    app.add_option("--ratio", ratio, "Training fraction per split")->check(CLI::Range(0.0, 1.0));
    app.add_flag("--no-rs", no_rs, "Skip random sampling");
    app.add_flag("--no-gb", no_gb, "Skip the gradient solver");
    app.add_flag("--no-bt", no_bt, "Skip Bradley-Terry");
    app.add_option("--seed", seed, "Split and solver seed");
    app.add_option("--out", out, "Machine-readable results file");
  }

  int run() const {
    const PreferenceDataset data = prefs.resolve();
    std::optional<Formula> f;
    if (src.given()) f = src.resolve();
    EvalOptions opt;
    opt.n_splits = splits;
    opt.ratio = ratio;
    opt.random_sampling = !no_rs;
    opt.gradient = !no_gb;
    opt.bradley_terry = !no_bt;
    const int horizon = horizon_of(data);
    for (const auto& file : results) {
      const LearnResult r = load_learn_result(file);
      if (!f) f = r.formula;
      if (!(r.formula == *f)) throw Error(file + " was learned for a different formula");
      if (r.t_final != horizon) throw Error(file + " was learned on signals of a different length");
      opt.fixed.emplace_back(fs::path(file).stem().string(), wstl_predictor(r.formula, r.valuation));
    }
    if (!f) throw Error("give a formula (--formula, --formula-file, --scenario) or a --result");
    Rng rng(seed);
    const auto rows = evaluate_methods(data, *f, learn.resolve(seed), opt, rng);
    std::cout << format_table(rows);
    if (!out.empty()) write_json_file(out, to_json(rows));
    return 0;
  }
};

struct Elicit {
  std::string pairs;
  std::string session;
  std::string id;
  FormulaSource src;
  std::uint64_t seed = 0;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string assets;

  void add(CLI::App& app) {
    app.add_option("--pairs", pairs, "Pair file (needed to create a new session)")->check(CLI::ExistingFile);
    app.add_option("--session", session, "Session file; created when missing")->required();
    app.add_option("--id", id, "Session id for a new session (default: file stem)");
    app.add_option("--scenario", src.scenario, "Scenario of the pairs")->check(CLI::IsMember({"stop", "pedestrian"}));
    app.add_option("--spec", src.spec, "Scenario spec file, for the stop line or crosswalk marker")
        ->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "Seed for the left/right order of a new session");
    app.add_option("--host", host, "Bind address");
    app.add_option("--port", port, "Port (0 picks a free one)")->check(CLI::Range(0, 65535));
    app.add_option("--assets", assets, "Directory with the built UI")->check(CLI::ExistingDirectory);
  }

  void create() const {
    if (pairs.empty()) throw Error("session file does not exist; give --pairs to create it");
    if (src.scenario.empty()) throw Error("give --scenario to create a session");
    const PairSet ps = load_pair_set(pairs);
    load_pair_dataset(pairs, ps);
    const double marker = src.scenario == "stop" ? src.stop_spec().x_stop : src.pedestrian_spec().x_cross;
    const fs::path session_path(session);
    if (session_path.has_parent_path()) fs::create_directories(session_path.parent_path());
    const Session s = new_session(id.empty() ? session_path.stem().string() : id, src.scenario,
                                  relative_to(pairs, session_path).string(), ps.pairs.size(), seed, marker);
    save_session(session_path, s);
    std::cout << "created session " << s.id << " with " << s.total() << " pairs\n";
  }

  int run() const {
    if (!fs::exists(session)) create();
    std::optional<fs::path> dir;
    if (!assets.empty()) dir = fs::path(assets);
    ElicitationService service(session, dir);
    const int bound = service.bind(host, port);
    const Session s = service.session();
    std::cout << "session " << s.id << ": " << s.answered() << "/" << s.total() << " answered\n"
              << "serving http://" << host << ":" << bound << "/" << std::endl;
    service.listen();
    return 0;
  }
};

struct Robustness {
  std::string signal;
  FormulaSource src;
  std::string result;

  void add(CLI::App& app) {
    app.add_option("--signal", signal, "Signal file")->required()->check(CLI::ExistingFile);
    src.add(app);
    app.add_option("--result", result, "Learn result supplying the valuation (unit weights otherwise)")
        ->check(CLI::ExistingFile);
  }

  int run() const {
    const Signal s = load_signal(signal);
    std::optional<LearnResult> r;
    if (!result.empty()) r = load_learn_result(result);
    const Formula f = src.given() ? src.resolve() : r ? r->formula : throw Error("no formula given");
    const WeightValuation w = r ? r->valuation : WeightValuation::uniform(FormulaLayout(f, s.t_final()));
    std::cout << robustness_dump(s, f, w);
    return 0;
  }
};

// Rescales a result's valuation into (0, 1]. The stored pair statistics keep
// their counts; mean_margin is recomputed only when --preferences is given.
struct Normalize {
  std::string result;
  std::string preferences;
  std::string out;

  void add(CLI::App& app) {
    app.add_option("--result", result, "Learn result")->required()->check(CLI::ExistingFile);
    app.add_option("--preferences", preferences, "Recompute pair statistics on this file")
        ->check(CLI::ExistingFile);
    app.add_option("--out", out, "Normalized result file")->required();
  }

  int run() const {
    LearnResult r = load_learn_result(result);
    r.valuation = normalize_to_domain(r.formula, r.valuation, r.t_final);
    if (!preferences.empty()) {
      const PreferenceDataset data = load_preferences(preferences);
      if (horizon_of(data) != r.t_final) throw Error("preference signals do not match the result's horizon");
      const PairEvaluator ev(data, r.formula);
      const PairStats st = ev.stats(resolve_weights(ev.layout(), r.valuation), LearnConfig{}.margin_fraction);
      r.satisfied_pairs = st.satisfied;
      r.total_pairs = static_cast<int>(data.size());
      r.margin_satisfied_pairs = st.margin_satisfied;
      r.mean_margin = st.mean_margin;
    }
    save_learn_result(out, r);
    for (const auto& [slot, v] : r.valuation.values()) std::cout << slot << " " << fmt(v) << "\n";
    return 0;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learn weighted signal temporal logic formulas from pairwise preferences"};
  app.require_subcommand(1);

  Simulate simulate;
  Pairs pairs;
  Label label;
  Learn learn;
  Predict predict_cmd;
  Eval eval;
  Elicit elicit;
  Robustness robustness;
  Normalize normalize;
  std::function<int()> action;

  auto sub = [&](const char* name, const char* help, auto& cmd) {
    CLI::App* s = app.add_subcommand(name, help);
    cmd.add(*s);
    s->callback([&] { action = [&] { return cmd.run(); }; });
  };
  sub("simulate", "Generate a scenario dataset", simulate);
  sub("pairs", "Draw well-separated signal pairs from a dataset", pairs);
  sub("label", "Label pairs with a known valuation", label);
  sub("learn", "Learn weights from preferences", learn);
  sub("predict", "Apply a learned valuation", predict_cmd);
  sub("eval", "Compare methods over random train/test splits", eval);
  sub("elicit", "Serve an elicitation session over HTTP", elicit);
  sub("robustness", "Print the robustness trace and per-node values", robustness);
  sub("normalize", "Rescale a learned valuation into (0, 1]", normalize);

  CLI11_PARSE(app, argc, argv);
  try {
    return action();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
