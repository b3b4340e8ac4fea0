#pragma once

// Driving scenarios: formulas, kinematic trajectory generators, rejection
// sampling of satisfying / violating datasets, and pair construction.
//
// Stop sign: x decreases as the vehicle approaches, so x - x_stop >= 0 means
// the line has not been passed. Channels x, v, b (v == 0) and vnn (v >= 0).
//
// Pedestrian crossing: x increases toward x_cross, so x - x_cross <= 0 means
// the vehicle is still before the crosswalk. Channels x, v, p (pedestrian
// present).

#include <algorithm>
#include <cstdio>
#include <future>
#include <string>
#include <thread>
#include <vector>

#include "wstlpref/error.hpp"
#include "wstlpref/ext_real.hpp"
#include "wstlpref/formula.hpp"
#include "wstlpref/parser.hpp"
#include "wstlpref/rng.hpp"
#include "wstlpref/robustness.hpp"
#include "wstlpref/signal.hpp"
#include "wstlpref/signal_io.hpp"

namespace wstlpref {

struct Range {
  double lo = 0;
  double hi = 0;

  void validate(const char* name) const {
    if (!std::isfinite(lo) || !std::isfinite(hi) || lo > hi) throw Error(std::string("empty range for ") + name);
  }
  double sample(Rng& rng) const { return lo == hi ? lo : uniform(rng, lo, hi); }
};

struct IntRange {
  int lo = 0;
  int hi = 0;

  void validate(const char* name) const {
    if (lo > hi) throw Error(std::string("empty range for ") + name);
  }
  int sample(Rng& rng) const { return static_cast<int>(uniform_int(rng, lo, hi)); }
};

// ---------------------------------------------------------------------------
// Stop sign.

struct StopSignSpec {
  double x_stop = 20.0;
  int horizon = 60;  // samples 0..horizon
  double dt = 0.1;
  Range v0{4.0, 12.0};
  IntRange cruise_steps{0, 10};
  Range decel{2.0, 6.0};
  Range slack{-2.0, 4.0};  // stopped position minus x_stop
  double rolling_probability = 0.3;
  Range rolling_speed{0.3, 2.0};
  double resume_probability = 0.2;
  IntRange hold_steps{5, 30};
  Range resume_accel{1.0, 3.0};
  double eq_tol = 1e-9;

  void validate() const {
    if (!(x_stop > 0) || !std::isfinite(x_stop)) throw Error("x_stop must be positive");
    if (horizon < 1) throw Error("horizon must be at least 1");
    if (!(dt > 0)) throw Error("dt must be positive");
    v0.validate("v0");
    cruise_steps.validate("cruise_steps");
    decel.validate("decel");
    slack.validate("slack");
    rolling_speed.validate("rolling_speed");
    hold_steps.validate("hold_steps");
    resume_accel.validate("resume_accel");
    if (v0.lo < 0 || decel.lo < 0 || rolling_speed.lo < 0 || resume_accel.lo < 0 || cruise_steps.lo < 0 ||
        hold_steps.lo < 0) {
      throw Error("speeds, rates and step counts must be non-negative");
    }
    for (double p : {rolling_probability, resume_probability}) {
      if (!(p >= 0 && p <= 1)) throw Error("probabilities must lie in [0, 1]");
    }
    if (!(eq_tol >= 0)) throw Error("eq_tol must be non-negative");
  }
};

struct StopParams {
  double v0 = 0;
  int cruise_steps = 0;
  double decel = 0;
  double v_floor = 0;  // 0 for a full stop, > 0 for a rolling stop
  int hold_steps = -1;  // steps held at v_floor before resuming; -1 holds to the end
  double resume_accel = 0;
  double slack = 0;
};

inline Formula stop_sign_formula(const StopSignSpec& spec) {
  return parse_formula("F G((x - " + format_ext_real(spec.x_stop) + " >= 0) & b) & G vnn");
}

inline StopParams sample_params(const StopSignSpec& spec, Rng& rng) {
  StopParams p;
  p.v0 = spec.v0.sample(rng);
  p.cruise_steps = spec.cruise_steps.sample(rng);
  p.decel = spec.decel.sample(rng);
  if (uniform01(rng) < spec.rolling_probability) p.v_floor = std::min(spec.rolling_speed.sample(rng), p.v0);
  if (uniform01(rng) < spec.resume_probability) {
    p.hold_steps = spec.hold_steps.sample(rng);
    p.resume_accel = spec.resume_accel.sample(rng);
  }
  p.slack = spec.slack.sample(rng);
  return p;
}

namespace detail {

inline std::vector<double> displacement(const std::vector<double>& v, double dt) {
  std::vector<double> d(v.size(), 0.0);
  for (std::size_t t = 1; t < v.size(); ++t) d[t] = d[t - 1] + 0.5 * (v[t - 1] + v[t]) * dt;
  return d;
}

inline void require(bool ok, const char* what) {
  if (!ok) throw Error(std::string("trajectory parameter out of range: ") + what);
}

}  // namespace detail

inline Signal generate_trajectory(const StopSignSpec& spec, const StopParams& p) {
  spec.validate();
  detail::require(std::isfinite(p.v0) && p.v0 >= 0, "v0");
  detail::require(p.cruise_steps >= 0, "cruise_steps");
  detail::require(std::isfinite(p.decel) && p.decel >= 0, "decel");
  detail::require(std::isfinite(p.v_floor) && p.v_floor >= 0 && p.v_floor <= p.v0, "v_floor");
  detail::require(p.hold_steps >= -1, "hold_steps");
  detail::require(std::isfinite(p.resume_accel) && p.resume_accel >= 0, "resume_accel");
  detail::require(std::isfinite(p.slack), "slack");

  const auto n = static_cast<std::size_t>(spec.horizon) + 1;
  std::vector<double> v(n);
  v[0] = p.v0;
  int anchor = p.v0 == p.v_floor ? 0 : -1;
  for (std::size_t t = 1; t < n; ++t) {
    const double prev = v[t - 1];
    const int step = static_cast<int>(t);
    if (step <= p.cruise_steps && anchor < 0) {
      v[t] = prev;
    } else if (anchor < 0) {
      v[t] = std::max(prev - p.decel * spec.dt, p.v_floor);
      if (v[t] == p.v_floor) anchor = step;
    } else if (p.hold_steps >= 0 && step - anchor > p.hold_steps) {
      v[t] = std::min(prev + p.resume_accel * spec.dt, std::max(p.v0, p.v_floor));
    } else {
      v[t] = prev;
    }
  }
  if (anchor < 0) anchor = spec.horizon;
  const std::vector<double> d = detail::displacement(v, spec.dt);
  std::vector<double> x(n);
  const double x_anchor = spec.x_stop + p.slack;
  for (std::size_t t = 0; t < n; ++t) x[t] = x_anchor + d[static_cast<std::size_t>(anchor)] - d[t];

  Signal s({{"x", ChannelKind::real}, {"v", ChannelKind::real}}, {std::move(x), std::move(v)}, spec.dt);
  s = append_indicator_channel(s, PredicateFn::channel("v"), "b", spec.eq_tol);
  return append_nonnegative_channel(s, PredicateFn::channel("v"), "vnn", spec.eq_tol);
}

// ---------------------------------------------------------------------------
// Pedestrian crossing.

struct PedestrianSpec {
  double x_cross = 25.0;
  double v_lim = 3.0;
  int horizon = 60;
  double dt = 0.1;
  Range start_gap{6.0, 18.0};  // x_cross - x at t = 0
  Range v0{1.5, 4.0};
  IntRange brake_step{0, 15};
  Range decel{1.0, 4.0};
  Range v_hold{0.0, 1.0};
  IntRange resume_step{20, 60};
  Range accel{1.0, 3.0};
  IntRange entry{0, 20};  // pedestrian present on [entry, exit)
  IntRange exit{22, 50};
  double absent_probability = 0.1;

  void validate() const {
    if (!std::isfinite(x_cross)) throw Error("x_cross must be finite");
    if (!(v_lim > 0) || !std::isfinite(v_lim)) throw Error("v_lim must be positive");
    if (horizon < 1) throw Error("horizon must be at least 1");
    if (!(dt > 0)) throw Error("dt must be positive");
    start_gap.validate("start_gap");
    v0.validate("v0");
    brake_step.validate("brake_step");
    decel.validate("decel");
    v_hold.validate("v_hold");
    resume_step.validate("resume_step");
    accel.validate("accel");
    entry.validate("entry");
    exit.validate("exit");
    if (v0.lo < 0 || decel.lo < 0 || v_hold.lo < 0 || accel.lo < 0) {
      throw Error("speeds and rates must be non-negative");
    }
    if (entry.lo < 0 || exit.hi > horizon + 1 || entry.hi > horizon + 1) {
      throw Error("pedestrian schedule must lie within the trace");
    }
    if (!(absent_probability >= 0 && absent_probability <= 1)) throw Error("absent_probability must lie in [0, 1]");
  }
};

struct PedestrianParams {
  double x0 = 0;
  double v0 = 0;
  int brake_step = 0;
  double decel = 0;
  double v_hold = 0;
  int resume_step = 0;
  double accel = 0;
  int entry = 0;  // present on [entry, exit); empty when entry >= exit
  int exit = 0;
};

inline Formula pedestrian_formula(const PedestrianSpec& spec) {
  const std::string before = "(x - " + format_ext_real(spec.x_cross) + " <= 0)";
  return parse_formula("G((p & " + before + ") => ((" + before + " U !p) & (v - " + format_ext_real(spec.v_lim) +
                       " <= 0)))");
}

inline PedestrianParams sample_params(const PedestrianSpec& spec, Rng& rng) {
  PedestrianParams p;
  p.x0 = spec.x_cross - spec.start_gap.sample(rng);
  p.v0 = spec.v0.sample(rng);
  p.brake_step = spec.brake_step.sample(rng);
  p.decel = spec.decel.sample(rng);
  p.v_hold = std::min(spec.v_hold.sample(rng), p.v0);
  p.resume_step = spec.resume_step.sample(rng);
  p.accel = spec.accel.sample(rng);
  if (uniform01(rng) < spec.absent_probability) {
    p.entry = p.exit = 0;
  } else {
    p.entry = spec.entry.sample(rng);
    p.exit = std::max(p.entry + 1, spec.exit.sample(rng));
  }
  return p;
}

inline Signal generate_trajectory(const PedestrianSpec& spec, const PedestrianParams& p) {
  spec.validate();
  detail::require(std::isfinite(p.x0), "x0");
  detail::require(std::isfinite(p.v0) && p.v0 >= 0, "v0");
  detail::require(std::isfinite(p.decel) && p.decel >= 0, "decel");
  detail::require(std::isfinite(p.v_hold) && p.v_hold >= 0 && p.v_hold <= p.v0, "v_hold");
  detail::require(std::isfinite(p.accel) && p.accel >= 0, "accel");
  detail::require(p.brake_step >= 0 && p.resume_step >= 0, "brake_step / resume_step");
  detail::require(p.entry >= 0 && p.exit >= 0 && p.exit <= spec.horizon + 1, "pedestrian schedule");

  const auto n = static_cast<std::size_t>(spec.horizon) + 1;
  std::vector<double> v(n), presence(n);
  v[0] = p.v0;
  for (std::size_t t = 1; t < n; ++t) {
    const int step = static_cast<int>(t);
    if (step > p.resume_step) {
      v[t] = std::min(v[t - 1] + p.accel * spec.dt, p.v0);
    } else if (step > p.brake_step) {
      v[t] = std::max(v[t - 1] - p.decel * spec.dt, p.v_hold);
    } else {
      v[t] = v[t - 1];
    }
  }
  const std::vector<double> d = detail::displacement(v, spec.dt);
  std::vector<double> x(n);
  for (std::size_t t = 0; t < n; ++t) {
    x[t] = p.x0 + d[t];
    const int step = static_cast<int>(t);
    presence[t] = step >= p.entry && step < p.exit ? kPosInf : kNegInf;
  }
  return Signal({{"x", ChannelKind::real}, {"v", ChannelKind::real}, {"p", ChannelKind::boolean}},
                {std::move(x), std::move(v), std::move(presence)}, spec.dt);
}

// ---------------------------------------------------------------------------
// Datasets.

inline const char* scenario_name(const StopSignSpec&) { return "stop"; }
inline const char* scenario_name(const PedestrianSpec&) { return "pedestrian"; }
inline Formula scenario_formula(const StopSignSpec& s) { return stop_sign_formula(s); }
inline Formula scenario_formula(const PedestrianSpec& s) { return pedestrian_formula(s); }

struct GeneratedDataset {
  Dataset signals;
  long draws = 0;
  long accepted = 0;
  double acceptance_rate() const { return draws > 0 ? static_cast<double>(accepted) / static_cast<double>(draws) : 0; }
};

inline constexpr long kMaxDrawsBeforeCheck = 100000;

/// Rejection sampling: draws parameters until `n` trajectories have STL
/// robustness of the requested sign (zero is rejected either way).
template <class Spec>
GeneratedDataset generate_dataset(const Spec& spec, int n, bool satisfying, Rng& rng) {
  spec.validate();
  if (n <= 0) throw Error("number of signals must be positive");
  const Formula f = scenario_formula(spec);
  const std::string prefix = std::string(scenario_name(spec)) + (satisfying ? "-sat-" : "-vio-");
  const unsigned workers = std::max(1u, std::thread::hardware_concurrency());
  // fixed so the generator state afterwards does not depend on the core count
  const std::size_t batch = 256;
  GeneratedDataset out;
  while (out.accepted < n) {
    std::vector<decltype(sample_params(spec, rng))> params(batch);
    for (auto& p : params) p = sample_params(spec, rng);
    std::vector<std::optional<Signal>> kept(batch);
    std::vector<std::future<void>> jobs;
    for (unsigned k = 0; k < workers; ++k) {
      jobs.push_back(std::async(std::launch::async, [&, k] {
        for (std::size_t i = k; i < batch; i += workers) {
          Signal s = generate_trajectory(spec, params[i]);
          const ExtReal r = rho(s, f);
          if (satisfying ? r > 0 : r < 0) kept[i] = std::move(s);
        }
      }));
    }
    for (auto& j : jobs) j.get();
    for (std::size_t i = 0; i < batch && out.accepted < n; ++i) {
      ++out.draws;
      if (!kept[i]) continue;
      char id[32];
      std::snprintf(id, sizeof id, "%03ld", out.accepted);
      out.signals.add(prefix + id, std::move(*kept[i]));
      ++out.accepted;
    }
    if (out.draws >= kMaxDrawsBeforeCheck && out.accepted < n && out.acceptance_rate() < 0.01) {
      throw Error("acceptance rate below 1% after " + std::to_string(out.draws) +
                  " draws; the parameter ranges cannot produce " + (satisfying ? "satisfying" : "violating") +
                  " trajectories reliably");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pairs.

struct SignalPair {
  std::string first;
  std::string second;
  double distance = 0;
};

struct PairSet {
  std::string dataset;  // dataset file, relative to the pair file
  double threshold = 0;
  std::vector<std::string> channels;
  std::vector<SignalPair> pairs;
};

/// `n_pairs` distinct unordered pairs whose distance over `channels` exceeds
/// `threshold`, drawn uniformly from all such pairs.
inline PairSet build_pairs(const Dataset& signals, int n_pairs, double threshold,
                           const std::vector<std::string>& channels, Rng& rng) {
  if (n_pairs <= 0) throw Error("number of pairs must be positive");
  std::vector<SignalPair> candidates;
  for (std::size_t i = 0; i < signals.size(); ++i) {
    for (std::size_t j = i + 1; j < signals.size(); ++j) {
      const double d = euclidean_distance(signals[i].signal, signals[j].signal, channels);
      if (d > threshold) candidates.push_back({signals[i].id, signals[j].id, d});
    }
  }
  if (candidates.size() < static_cast<std::size_t>(n_pairs)) {
    throw Error("only " + std::to_string(candidates.size()) + " pairs exceed distance threshold " +
                format_ext_real(threshold) + "; " + std::to_string(n_pairs) + " requested");
  }
  shuffle(candidates, rng);
  candidates.resize(static_cast<std::size_t>(n_pairs));
  return {"", threshold, channels, std::move(candidates)};
}

inline constexpr int kPairFormatVersion = 1;

inline json to_json(const PairSet& p) {
  json pairs = json::array();
  for (const auto& e : p.pairs) pairs.push_back({{"first", e.first}, {"second", e.second}, {"distance", e.distance}});
  return json{{"format", "wstlpref-pairs"}, {"version", kPairFormatVersion}, {"dataset", p.dataset},
              {"threshold", p.threshold},   {"channels", p.channels},        {"pairs", pairs}};
}

inline PairSet pair_set_from_json(const json& j) {
  check_format(j, "wstlpref-pairs", kPairFormatVersion);
  try {
    PairSet p;
    p.dataset = j.at("dataset").get<std::string>();
    p.threshold = j.at("threshold").get<double>();
    p.channels = j.at("channels").get<std::vector<std::string>>();
    for (const auto& e : j.at("pairs")) {
      p.pairs.push_back({e.at("first").get<std::string>(), e.at("second").get<std::string>(),
                         e.at("distance").get<double>()});
    }
    return p;
  } catch (const json::exception& e) {
    throw Error(std::string("malformed pair file: ") + e.what());
  }
}

inline PairSet load_pair_set(const std::filesystem::path& p) { return pair_set_from_json(read_json_file(p)); }
inline void save_pair_set(const std::filesystem::path& p, const PairSet& s) { write_json_file(p, to_json(s)); }

/// The dataset a pair file refers to, resolved against the pair file's directory.
inline Dataset load_pair_dataset(const std::filesystem::path& pair_file, const PairSet& p) {
  std::filesystem::path d(p.dataset);
  if (d.is_relative()) d = pair_file.parent_path() / d;
  Dataset data = load_dataset(d);
  for (const auto& e : p.pairs) {
    if (!data.contains(e.first) || !data.contains(e.second)) {
      throw Error("pair file references signals missing from " + d.string());
    }
  }
  return data;
}

// ---------------------------------------------------------------------------
// Spec files.

namespace detail {

inline json range_json(const Range& r) { return json::array({r.lo, r.hi}); }
inline json range_json(const IntRange& r) { return json::array({r.lo, r.hi}); }
inline void read_range(const json& j, Range& r) { r = {j.at(0).get<double>(), j.at(1).get<double>()}; }
inline void read_range(const json& j, IntRange& r) { r = {j.at(0).get<int>(), j.at(1).get<int>()}; }

template <class Spec, class Fields>
Spec spec_from_json(const json& j, const char* scenario, Fields fields) {
  Spec s;
  if (j.value("scenario", std::string(scenario)) != scenario) {
    throw Error(std::string("spec file is not for the ") + scenario + " scenario");
  }
  for (const auto& [key, value] : j.items()) {
    if (key == "scenario") continue;
    try {
      if (!fields(s, key, value)) throw Error("unknown " + std::string(scenario) + " spec field '" + key + "'");
    } catch (const json::exception& e) {
      throw Error("spec field '" + key + "': " + e.what());
    }
  }
  s.validate();
  return s;
}

}  // namespace detail

inline json to_json(const StopSignSpec& s) {
  using detail::range_json;
  return json{{"scenario", "stop"},
              {"x_stop", s.x_stop},
              {"horizon", s.horizon},
              {"dt", s.dt},
              {"v0", range_json(s.v0)},
              {"cruise_steps", range_json(s.cruise_steps)},
              {"decel", range_json(s.decel)},
              {"slack", range_json(s.slack)},
              {"rolling_probability", s.rolling_probability},
              {"rolling_speed", range_json(s.rolling_speed)},
              {"resume_probability", s.resume_probability},
              {"hold_steps", range_json(s.hold_steps)},
              {"resume_accel", range_json(s.resume_accel)},
              {"eq_tol", s.eq_tol}};
}

/// Missing fields keep their defaults.
inline StopSignSpec stop_spec_from_json(const json& j) {
  using detail::read_range;
  return detail::spec_from_json<StopSignSpec>(j, "stop", [](StopSignSpec& s, const std::string& k, const json& v) {
    if (k == "x_stop") s.x_stop = v.get<double>();
    else if (k == "horizon") s.horizon = v.get<int>();
    else if (k == "dt") s.dt = v.get<double>();
    else if (k == "v0") read_range(v, s.v0);
    else if (k == "cruise_steps") read_range(v, s.cruise_steps);
    else if (k == "decel") read_range(v, s.decel);
    else if (k == "slack") read_range(v, s.slack);
    else if (k == "rolling_probability") s.rolling_probability = v.get<double>();
    else if (k == "rolling_speed") read_range(v, s.rolling_speed);
    else if (k == "resume_probability") s.resume_probability = v.get<double>();
    else if (k == "hold_steps") read_range(v, s.hold_steps);
    else if (k == "resume_accel") read_range(v, s.resume_accel);
    else if (k == "eq_tol") s.eq_tol = v.get<double>();
    else return false;
    return true;
  });
}

inline json to_json(const PedestrianSpec& s) {
  using detail::range_json;
  return json{{"scenario", "pedestrian"},
              {"x_cross", s.x_cross},
              {"v_lim", s.v_lim},
              {"horizon", s.horizon},
              {"dt", s.dt},
              {"start_gap", range_json(s.start_gap)},
              {"v0", range_json(s.v0)},
              {"brake_step", range_json(s.brake_step)},
              {"decel", range_json(s.decel)},
              {"v_hold", range_json(s.v_hold)},
              {"resume_step", range_json(s.resume_step)},
              {"accel", range_json(s.accel)},
              {"entry", range_json(s.entry)},
              {"exit", range_json(s.exit)},
              {"absent_probability", s.absent_probability}};
}

inline PedestrianSpec pedestrian_spec_from_json(const json& j) {
  using detail::read_range;
  return detail::spec_from_json<PedestrianSpec>(
      j, "pedestrian", [](PedestrianSpec& s, const std::string& k, const json& v) {
        if (k == "x_cross") s.x_cross = v.get<double>();
        else if (k == "v_lim") s.v_lim = v.get<double>();
        else if (k == "horizon") s.horizon = v.get<int>();
        else if (k == "dt") s.dt = v.get<double>();
        else if (k == "start_gap") read_range(v, s.start_gap);
        else if (k == "v0") read_range(v, s.v0);
        else if (k == "brake_step") read_range(v, s.brake_step);
        else if (k == "decel") read_range(v, s.decel);
        else if (k == "v_hold") read_range(v, s.v_hold);
        else if (k == "resume_step") read_range(v, s.resume_step);
        else if (k == "accel") read_range(v, s.accel);
        else if (k == "entry") read_range(v, s.entry);
        else if (k == "exit") read_range(v, s.exit);
        else if (k == "absent_probability") s.absent_probability = v.get<double>();
        else return false;
        return true;
      });
}

}  // namespace wstlpref
