#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wstlpref/error.hpp"
#include "wstlpref/ext_real.hpp"

namespace wstlpref {

enum class ChannelKind { real, boolean };

struct Channel {
  std::string name;
  ChannelKind kind = ChannelKind::real;

  bool operator==(const Channel&) const = default;
};

/// Uniformly sampled multi-channel trace over [0, t_final]. Time is the
/// integer sample index; dt is metadata. Immutable after construction.
class Signal {
 public:
  /// `samples[c][t]` is channel c at index t.
  Signal(std::vector<Channel> channels, std::vector<std::vector<ExtReal>> samples, double dt = 1.0)
      : channels_(std::move(channels)), samples_(std::move(samples)), dt_(dt) {
    if (channels_.empty()) throw Error("signal needs at least one channel");
    if (samples_.size() != channels_.size()) throw Error("channel/sample count mismatch");
    if (!(dt_ > 0) || !std::isfinite(dt_)) throw Error("dt must be positive");
    const std::size_t n = samples_.front().size();
    if (n == 0) throw Error("signal must have at least one sample");
    for (std::size_t c = 0; c < channels_.size(); ++c) {
      if (samples_[c].size() != n) throw Error("channel '" + channels_[c].name + "' has a different length");
      for (std::size_t k = 0; k < c; ++k) {
        if (channels_[k].name == channels_[c].name) throw Error("duplicate channel '" + channels_[c].name + "'");
      }
      for (ExtReal x : samples_[c]) {
        if (std::isnan(x)) throw Error("channel '" + channels_[c].name + "' contains NaN");
        if (channels_[c].kind == ChannelKind::boolean && std::isfinite(x)) {
          throw Error("boolean channel '" + channels_[c].name + "' must hold only +inf/-inf");
        }
      }
    }
  }

  const std::vector<Channel>& channels() const noexcept { return channels_; }
  std::size_t num_channels() const noexcept { return channels_.size(); }
  std::size_t length() const noexcept { return samples_.front().size(); }
  int t_final() const noexcept { return static_cast<int>(length()) - 1; }
  double dt() const noexcept { return dt_; }

  std::optional<std::size_t> find_channel(const std::string& name) const {
    for (std::size_t c = 0; c < channels_.size(); ++c) {
      if (channels_[c].name == name) return c;
    }
    return std::nullopt;
  }

  std::size_t channel_index(const std::string& name) const {
    if (auto c = find_channel(name)) return *c;
    throw Error("unknown channel '" + name + "'");
  }

  std::span<const ExtReal> channel(std::size_t c) const { return samples_.at(c); }
  std::span<const ExtReal> channel(const std::string& name) const { return samples_[channel_index(name)]; }

  ExtReal at(std::size_t c, int t) const { return samples_[c][static_cast<std::size_t>(t)]; }

  ExtReal value_at(const std::string& name, int t) const {
    const std::size_t c = channel_index(name);
    if (t < 0 || t > t_final()) {
      throw Error("time index " + std::to_string(t) + " outside [0, " + std::to_string(t_final()) + "]");
    }
    return at(c, t);
  }

  const std::vector<std::vector<ExtReal>>& samples() const noexcept { return samples_; }

  bool operator==(const Signal& other) const = default;

 private:
  std::vector<Channel> channels_;
  std::vector<std::vector<ExtReal>> samples_;
  double dt_;
};

/// Affine map over named channels: sum_i coeff_i * s_i(t) + offset.
struct PredicateFn {
  std::vector<std::pair<std::string, double>> terms;
  double offset = 0.0;

  bool operator==(const PredicateFn&) const = default;

  static PredicateFn channel(std::string name, double coeff = 1.0) {
    return PredicateFn{{{std::move(name), coeff}}, 0.0};
  }
};

/// A PredicateFn resolved against one signal's channel layout.
class BoundPredicate {
 public:
  BoundPredicate(const PredicateFn& fn, const Signal& s) : offset_(fn.offset) {
    std::size_t nonzero = 0;
    bool has_boolean = false;
    for (const auto& [name, coeff] : fn.terms) {
      if (coeff == 0.0) continue;
      const std::size_t c = s.channel_index(name);
      ++nonzero;
      has_boolean = has_boolean || s.channels()[c].kind == ChannelKind::boolean;
      terms_.emplace_back(c, coeff);
    }
    if (has_boolean && nonzero > 1) {
      throw Error("a boolean channel must be the only nonzero term of its predicate");
    }
  }

  ExtReal operator()(const Signal& s, int t) const {
    ExtReal v = offset_;
    for (const auto& [c, coeff] : terms_) v += coeff * s.at(c, t);
    if (std::isnan(v)) throw Error("predicate evaluation mixes +inf and -inf");
    return v;
  }

 private:
  std::vector<std::pair<std::size_t, double>> terms_;
  double offset_;
};

inline ExtReal evaluate(const PredicateFn& fn, const Signal& s, int t) { return BoundPredicate(fn, s)(s, t); }

namespace detail {

inline Signal with_boolean_channel(const Signal& s, std::string name, std::vector<ExtReal> values) {
  if (s.find_channel(name)) throw Error("channel '" + name + "' already exists");
  std::vector<Channel> channels = s.channels();
  std::vector<std::vector<ExtReal>> samples = s.samples();
  channels.push_back({std::move(name), ChannelKind::boolean});
  samples.push_back(std::move(values));
  return Signal(std::move(channels), std::move(samples), s.dt());
}

inline std::vector<ExtReal> finite_values(const PredicateFn& f, const Signal& s) {
  const BoundPredicate bound(f, s);
  std::vector<ExtReal> v(s.length());
  for (int t = 0; t <= s.t_final(); ++t) {
    v[t] = bound(s, t);
    if (!std::isfinite(v[t])) throw Error("indicator function must be finite at every sample");
  }
  return v;
}

}  // namespace detail

inline constexpr double kDefaultEqTol = 1e-9;

/// Appends a boolean channel that is +inf where |f(s(t))| <= eq_tol and -inf
/// elsewhere. Turns an equality clause f(s) = 0 into a rankable predicate.
inline Signal append_indicator_channel(const Signal& s, const PredicateFn& f, const std::string& name,
                                       double eq_tol = kDefaultEqTol) {
  std::vector<ExtReal> b = detail::finite_values(f, s);
  for (ExtReal& x : b) x = std::abs(x) <= eq_tol ? kPosInf : kNegInf;
  return detail::with_boolean_channel(s, name, std::move(b));
}

/// Appends a boolean channel that is +inf where f(s(t)) >= -eq_tol.
inline Signal append_nonnegative_channel(const Signal& s, const PredicateFn& f, const std::string& name,
                                         double eq_tol = kDefaultEqTol) {
  std::vector<ExtReal> b = detail::finite_values(f, s);
  for (ExtReal& x : b) x = x >= -eq_tol ? kPosInf : kNegInf;
  return detail::with_boolean_channel(s, name, std::move(b));
}

/// 2-norm of the per-sample differences over the listed real channels.
inline double euclidean_distance(const Signal& a, const Signal& b, const std::vector<std::string>& channels) {
  if (a.length() != b.length()) throw Error("signals have different lengths");
  double sum = 0.0;
  for (const auto& name : channels) {
    const std::size_t ca = a.channel_index(name);
    const std::size_t cb = b.channel_index(name);
    if (a.channels()[ca].kind != ChannelKind::real || b.channels()[cb].kind != ChannelKind::real) {
      throw Error("distance channel '" + name + "' is not real-valued");
    }
    for (int t = 0; t <= a.t_final(); ++t) {
      const double d = a.at(ca, t) - b.at(cb, t);
      if (!std::isfinite(d)) throw Error("distance over non-finite samples in '" + name + "'");
      sum += d * d;
    }
  }
  return std::sqrt(sum);
}

}  // namespace wstlpref
