#pragma once

// Elicitation sessions and the on-disk project layout.
//
// A session walks one participant through a PairSet. Each pair is shown with
// its two signals in a left/right order fixed by the session seed; choices are
// stored in PairSet terms (first / second) so the export does not depend on
// the presentation.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "wstlpref/error.hpp"
#include "wstlpref/learn.hpp"
#include "wstlpref/rng.hpp"
#include "wstlpref/scenarios.hpp"
#include "wstlpref/signal_io.hpp"

namespace wstlpref {

enum class PairChoice { unanswered, first, second };

inline const char* pair_choice_name(PairChoice c) {
  switch (c) {
    case PairChoice::unanswered: return "unanswered";
    case PairChoice::first: return "first";
    case PairChoice::second: return "second";
  }
  return "?";
}

inline PairChoice parse_pair_choice(const std::string& s) {
  if (s == "unanswered") return PairChoice::unanswered;
  if (s == "first") return PairChoice::first;
  if (s == "second") return PairChoice::second;
  throw Error("unknown pair choice '" + s + "'");
}

/// Current UTC time as YYYY-MM-DDTHH:MM:SSZ.
inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct Session {
  std::string id;
  std::string scenario;
  std::string pairs_file;  // relative to the session file unless absolute
  std::optional<double> marker;  // stop line or crosswalk position, for display
  std::uint64_t seed = 0;
  std::vector<bool> swapped;  // true: the pair's second signal is shown on the left
  std::vector<PairChoice> choices;
  long submissions = 0;  // only ever increases
  std::string created;
  std::string updated;

  std::size_t total() const noexcept { return choices.size(); }
  std::size_t answered() const {
    return static_cast<std::size_t>(std::count_if(choices.begin(), choices.end(),
                                                  [](PairChoice c) { return c != PairChoice::unanswered; }));
  }
  bool complete() const { return answered() == total(); }

  void validate() const {
    if (id.empty()) throw Error("session id is empty");
    if (swapped.size() != choices.size()) throw Error("session presentation order and choices differ in length");
  }

  /// Records the side the participant picked for pair i ("left" or "right").
  void choose(std::size_t i, const std::string& side) {
    if (i >= choices.size()) throw Error("pair index out of range");
    bool left;
    if (side == "left") left = true;
    else if (side == "right") left = false;
    else throw Error("choice must be \"left\" or \"right\"");
    const bool picked_first = left != swapped[i];
    choices[i] = picked_first ? PairChoice::first : PairChoice::second;
    ++submissions;
    updated = utc_timestamp();
  }

  std::optional<std::string> side_of(std::size_t i) const {
    if (choices.at(i) == PairChoice::unanswered) return std::nullopt;
    const bool first = choices[i] == PairChoice::first;
    return first != swapped[i] ? "left" : "right";
  }
};

inline Session new_session(std::string id, std::string scenario, std::string pairs_file, std::size_t n_pairs,
                           std::uint64_t seed, std::optional<double> marker = std::nullopt) {
  Session s;
  s.id = std::move(id);
  s.scenario = std::move(scenario);
  s.pairs_file = std::move(pairs_file);
  s.marker = marker;
  s.seed = seed;
  Rng rng(seed);
  for (std::size_t i = 0; i < n_pairs; ++i) s.swapped.push_back(uniform01(rng) < 0.5);
  s.choices.assign(n_pairs, PairChoice::unanswered);
  s.created = s.updated = utc_timestamp();
  return s;
}

inline constexpr int kSessionFormatVersion = 1;

inline json to_json(const Session& s) {
  json choices = json::array();
  for (auto c : s.choices) choices.push_back(pair_choice_name(c));
  return json{{"format", "wstlpref-session"},
              {"version", kSessionFormatVersion},
              {"id", s.id},
              {"scenario", s.scenario},
              {"pairs_file", s.pairs_file},
              {"marker", s.marker ? json(*s.marker) : json(nullptr)},
              {"seed", s.seed},
              {"swapped", s.swapped},
              {"choices", choices},
              {"submissions", s.submissions},
              {"created", s.created},
              {"updated", s.updated}};
}

inline Session session_from_json(const json& j) {
  check_format(j, "wstlpref-session", kSessionFormatVersion);
  try {
    Session s;
    s.id = j.at("id").get<std::string>();
    s.scenario = j.at("scenario").get<std::string>();
    s.pairs_file = j.at("pairs_file").get<std::string>();
    if (!j.at("marker").is_null()) s.marker = j.at("marker").get<double>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.swapped = j.at("swapped").get<std::vector<bool>>();
    for (const auto& c : j.at("choices")) s.choices.push_back(parse_pair_choice(c.get<std::string>()));
    s.submissions = j.at("submissions").get<long>();
    s.created = j.at("created").get<std::string>();
    s.updated = j.at("updated").get<std::string>();
    s.validate();
    return s;
  } catch (const json::exception& e) {
    throw Error(std::string("malformed session file: ") + e.what());
  }
}

inline Session load_session(const std::filesystem::path& p) {
  try {
    return session_from_json(read_json_file(p));
  } catch (const Error& e) {
    throw Error("refusing session file " + p.string() + ": " + e.what());
  }
}
inline void save_session(const std::filesystem::path& p, const Session& s) { write_json_file(p, to_json(s)); }

inline std::filesystem::path resolve_relative(const std::filesystem::path& base_file, const std::string& target) {
  std::filesystem::path t(target);
  return t.is_relative() ? base_file.parent_path() / t : t;
}

/// Preferences in (preferred, other) order. The session must be complete.
inline PreferenceDataset export_preferences(const Session& s, const PairSet& pairs, std::shared_ptr<const Dataset> store) {
  if (pairs.pairs.size() != s.total()) throw Error("session does not match its pair file");
  if (!s.complete()) {
    throw Error("session " + s.id + " is incomplete: " + std::to_string(s.answered()) + " of " +
                std::to_string(s.total()) + " pairs answered");
  }
  std::vector<Preference> out;
  for (std::size_t i = 0; i < s.total(); ++i) {
    const auto& p = pairs.pairs[i];
    if (s.choices[i] == PairChoice::first) out.push_back({p.first, p.second});
    else out.push_back({p.second, p.first});
  }
  return {std::move(store), std::move(out)};
}

/// Loads a session with its pair file and dataset and exports its preferences.
inline PreferenceDataset load_session_preferences(const std::filesystem::path& session_file) {
  const Session s = load_session(session_file);
  const auto pairs_path = resolve_relative(session_file, s.pairs_file);
  const PairSet pairs = load_pair_set(pairs_path);
  auto store = std::make_shared<Dataset>(load_pair_dataset(pairs_path, pairs));
  return export_preferences(s, pairs, std::move(store));
}

/// datasets/, pairs/, sessions/ and results/ under one root.
class ProjectStore {
 public:
  explicit ProjectStore(std::filesystem::path root) : root_(std::move(root)) {
    for (const char* d : {"datasets", "pairs", "sessions", "results"}) std::filesystem::create_directories(root_ / d);
  }

  const std::filesystem::path& root() const noexcept { return root_; }
  std::filesystem::path dataset(const std::string& name) const { return file("datasets", name); }
  std::filesystem::path pairs(const std::string& name) const { return file("pairs", name); }
  std::filesystem::path session(const std::string& name) const { return file("sessions", name); }
  std::filesystem::path result(const std::string& name) const { return file("results", name); }

 private:
  std::filesystem::path file(const char* dir, const std::string& name) const {
    if (name.empty() || name.find('/') != std::string::npos || name.find("..") != std::string::npos) {
      throw Error("invalid store entry name '" + name + "'");
    }
    return root_ / dir / (name + ".json");
  }

  std::filesystem::path root_;
};

}  // namespace wstlpref
