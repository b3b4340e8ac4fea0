#pragma once

// Text persistence for signals and datasets (JSON, version 1).
//
//   { "format": "wstlpref-signal", "version": 1, "dt": 0.1,
//     "channels": [ {"name": "x", "kind": "real"}, {"name": "b", "kind": "boolean"} ],
//     "samples": [ [12.5, "-inf"], [11.9, "-inf"], ... ] }      // one row per time index
//
//   { "format": "wstlpref-dataset", "version": 1,
//     "signals": [ {"id": "stop-sat-000", "signal": { ...signal object... }}, ... ] }
//
// Infinite samples are written as the strings "inf" / "-inf".

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "wstlpref/error.hpp"
#include "wstlpref/signal.hpp"

namespace wstlpref {

using json = nlohmann::json;

inline constexpr int kSignalFormatVersion = 1;

inline json ext_real_to_json(ExtReal x) {
  if (std::isinf(x)) return x > 0 ? json("inf") : json("-inf");
  return json(x);
}

inline ExtReal ext_real_from_json(const json& j) {
  if (j.is_string()) return parse_ext_real(j.get<std::string>());
  if (j.is_number()) return j.get<double>();
  throw Error("expected a number or \"inf\"/\"-inf\"");
}

inline void check_format(const json& j, const std::string& format, int version) {
  if (!j.is_object() || j.value("format", "") != format) throw Error("not a " + format + " document");
  if (j.value("version", 0) != version) {
    throw Error(format + ": unsupported version " + std::to_string(j.value("version", 0)));
  }
}

inline json to_json(const Signal& s) {
  json channels = json::array();
  for (const auto& c : s.channels()) {
    channels.push_back({{"name", c.name}, {"kind", c.kind == ChannelKind::real ? "real" : "boolean"}});
  }
  json rows = json::array();
  for (int t = 0; t <= s.t_final(); ++t) {
    json row = json::array();
    for (std::size_t c = 0; c < s.num_channels(); ++c) row.push_back(ext_real_to_json(s.at(c, t)));
    rows.push_back(std::move(row));
  }
  return {{"format", "wstlpref-signal"},
          {"version", kSignalFormatVersion},
          {"dt", s.dt()},
          {"channels", std::move(channels)},
          {"samples", std::move(rows)}};
}

inline Signal signal_from_json(const json& j) {
  check_format(j, "wstlpref-signal", kSignalFormatVersion);
  std::vector<Channel> channels;
  for (const auto& c : j.at("channels")) {
    const std::string kind = c.at("kind").get<std::string>();
    if (kind != "real" && kind != "boolean") throw Error("unknown channel kind '" + kind + "'");
    channels.push_back({c.at("name").get<std::string>(), kind == "real" ? ChannelKind::real : ChannelKind::boolean});
  }
  std::vector<std::vector<ExtReal>> samples(channels.size());
  for (const auto& row : j.at("samples")) {
    if (row.size() != channels.size()) throw Error("sample row width does not match channel count");
    for (std::size_t c = 0; c < channels.size(); ++c) samples[c].push_back(ext_real_from_json(row[c]));
  }
  return Signal(std::move(channels), std::move(samples), j.at("dt").get<double>());
}

struct NamedSignal {
  std::string id;
  Signal signal;
};

/// Ordered collection of signals addressable by id.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::vector<NamedSignal> signals) {
    for (auto& s : signals) add(std::move(s.id), std::move(s.signal));
  }

  void add(std::string id, Signal s) {
    if (index_.count(id)) throw Error("duplicate signal id '" + id + "'");
    index_.emplace(id, signals_.size());
    signals_.push_back({std::move(id), std::move(s)});
  }

  std::size_t size() const noexcept { return signals_.size(); }
  bool empty() const noexcept { return signals_.empty(); }
  const NamedSignal& operator[](std::size_t i) const { return signals_[i]; }
  auto begin() const { return signals_.begin(); }
  auto end() const { return signals_.end(); }

  bool contains(const std::string& id) const { return index_.count(id) != 0; }
  std::size_t index_of(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw Error("unknown signal id '" + id + "'");
    return it->second;
  }
  const Signal& at(const std::string& id) const { return signals_[index_of(id)].signal; }

 private:
  std::vector<NamedSignal> signals_;
  std::map<std::string, std::size_t> index_;
};

inline json to_json(const Dataset& d) {
  json signals = json::array();
  for (const auto& s : d) signals.push_back({{"id", s.id}, {"signal", to_json(s.signal)}});
  return {{"format", "wstlpref-dataset"}, {"version", kSignalFormatVersion}, {"signals", std::move(signals)}};
}

inline Dataset dataset_from_json(const json& j) {
  check_format(j, "wstlpref-dataset", kSignalFormatVersion);
  Dataset d;
  for (const auto& s : j.at("signals")) d.add(s.at("id").get<std::string>(), signal_from_json(s.at("signal")));
  return d;
}

// File helpers shared by every on-disk format.

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes to a sibling temp file and renames it over `path`.
inline void write_text_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw Error("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

inline json read_json_file(const std::filesystem::path& path) {
  try {
    return json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw Error("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

inline void write_json_file(const std::filesystem::path& path, const json& j) {
  write_text_file_atomic(path, j.dump(2) + "\n");
}

inline Signal load_signal(const std::filesystem::path& p) { return signal_from_json(read_json_file(p)); }
inline void save_signal(const std::filesystem::path& p, const Signal& s) { write_json_file(p, to_json(s)); }
inline Dataset load_dataset(const std::filesystem::path& p) { return dataset_from_json(read_json_file(p)); }
inline void save_dataset(const std::filesystem::path& p, const Dataset& d) { write_json_file(p, to_json(d)); }

}  // namespace wstlpref
