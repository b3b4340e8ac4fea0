#pragma once

// Local HTTP service for one elicitation session.
//
//   GET  /api/session              {id, scenario, total, answered, progress}
//   GET  /api/pairs/{i}            {index, left, right, answered, choice?}
//   POST /api/pairs/{i}/choice     {"choice": "left" | "right"}
//   GET  /api/export               preference file (409 until complete)
//   GET  /                         UI assets, or a placeholder page
//
// Every choice is written to the session file before the response is sent.

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>

#include "httplib.h"
#include "wstlpref/session.hpp"

namespace wstlpref {

/// Trajectory as the UI draws it: time axis plus x, v and, when present, the
/// pedestrian flag as booleans.
inline json signal_payload(const Signal& s) {
  json out;
  std::vector<double> time(static_cast<std::size_t>(s.length()));
  for (std::size_t t = 0; t < time.size(); ++t) time[t] = static_cast<double>(t) * s.dt();
  out["time"] = time;
  for (const char* name : {"x", "v"}) {
    if (auto c = s.find_channel(name)) {
      const auto span = s.channel(*c);
      out[name] = std::vector<double>(span.begin(), span.end());
    }
  }
  if (auto c = s.find_channel("p")) {
    std::vector<bool> p;
    for (ExtReal x : s.channel(*c)) p.push_back(x > 0);
    out["p"] = p;
  }
  return out;
}

class ElicitationService {
 public:
  explicit ElicitationService(std::filesystem::path session_file,
                              std::optional<std::filesystem::path> assets_dir = std::nullopt)
      : session_file_(std::move(session_file)), session_(load_session(session_file_)) {
    const auto pairs_path = resolve_relative(session_file_, session_.pairs_file);
    pairs_ = load_pair_set(pairs_path);
    store_ = std::make_shared<Dataset>(load_pair_dataset(pairs_path, pairs_));
    if (pairs_.pairs.size() != session_.total()) throw Error("session does not match its pair file");
    if (assets_dir) {
      if (!server_.set_mount_point("/", assets_dir->string())) {
        throw Error("asset directory not found: " + assets_dir->string());
      }
    } else {
      server_.Get("/", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(
            "<!doctype html><title>wstlpref</title><p>Elicitation service is running. Build the UI and pass "
            "its directory with --assets, or use the /api endpoints directly.</p>",
            "text/html");
      });
    }
    routes();
  }

  /// Binds to host:port (port 0 picks a free one) and returns the port.
  int bind(const std::string& host, int port) {
    if (port == 0) {
      const int p = server_.bind_to_any_port(host);
      if (p < 0) throw Error("cannot bind " + host);
      return p;
    }
    if (!server_.bind_to_port(host, port)) throw Error("cannot bind " + host + ":" + std::to_string(port));
    return port;
  }

  /// Serves until stop(); call after bind().
  void listen() { server_.listen_after_bind(); }
  void stop() { server_.stop(); }
  void wait_until_ready() const { server_.wait_until_ready(); }

  Session session() const {
    std::lock_guard lock(mutex_);
    return session_;
  }

 private:
  static void error(httplib::Response& res, int status, const std::string& message) {
    res.status = status;
    res.set_content(json{{"error", message}}.dump(), "application/json");
  }

  json progress_json() const {
    const auto answered = session_.answered();
    return json{{"id", session_.id},
                {"scenario", session_.scenario},
                {"marker", session_.marker ? json(*session_.marker) : json(nullptr)},
                {"total", session_.total()},
                {"answered", answered},
                {"progress", session_.total() ? static_cast<double>(answered) / session_.total() : 1.0}};
  }

  std::optional<std::size_t> index(const httplib::Request& req, httplib::Response& res) const {
    const std::string& text = req.matches[1].str();
    std::size_t i = 0;
    try {
      i = std::stoul(text);
    } catch (const std::exception&) {
      error(res, 400, "bad pair index");
      return std::nullopt;
    }
    if (i >= session_.total()) {
      error(res, 404, "pair index " + text + " out of range");
      return std::nullopt;
    }
    return i;
  }

  void routes() {
    server_.Get("/api/session", [this](const httplib::Request&, httplib::Response& res) {
      std::lock_guard lock(mutex_);
      res.set_content(progress_json().dump(), "application/json");
    });

    server_.Get(R"(/api/pairs/(\d+))", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mutex_);
      const auto i = index(req, res);
      if (!i) return;
      const auto& p = pairs_.pairs[*i];
      const Signal& first = store_->at(p.first);
      const Signal& second = store_->at(p.second);
      const bool swap = session_.swapped[*i];
      json out{{"index", *i},
               {"left", signal_payload(swap ? second : first)},
               {"right", signal_payload(swap ? first : second)},
               {"answered", session_.choices[*i] != PairChoice::unanswered}};
      if (auto side = session_.side_of(*i)) out["choice"] = *side;
      res.set_content(out.dump(), "application/json");
    });

    server_.Post(R"(/api/pairs/(\d+)/choice)", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mutex_);
      const auto i = index(req, res);
      if (!i) return;
      std::string side;
      try {
        side = json::parse(req.body).at("choice").get<std::string>();
      } catch (const json::exception&) {
        error(res, 400, "body must be {\"choice\": \"left\" | \"right\"}");
        return;
      }
      Session next = session_;
      try {
        next.choose(*i, side);
      } catch (const Error& e) {
        error(res, 400, e.what());
        return;
      }
      try {
        save_session(session_file_, next);
      } catch (const Error& e) {
        error(res, 500, e.what());
        return;
      }
      session_ = std::move(next);
      res.set_content(progress_json().dump(), "application/json");
    });

    server_.Get("/api/export", [this](const httplib::Request&, httplib::Response& res) {
      std::lock_guard lock(mutex_);
      try {
        res.set_content(to_json(export_preferences(session_, pairs_, store_)).dump(2) + "\n", "application/json");
      } catch (const Error& e) {
        error(res, 409, e.what());
      }
    });
  }

  std::filesystem::path session_file_;
  mutable std::mutex mutex_;
  Session session_;
  PairSet pairs_;
  std::shared_ptr<const Dataset> store_;
  httplib::Server server_;
};

}  // namespace wstlpref
