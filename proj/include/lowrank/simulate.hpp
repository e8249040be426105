#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "lowrank/error.hpp"
#include "lowrank/ratfun.hpp"

namespace lowrank {

struct TimeSeries {
  std::vector<double> samples;
  std::string label;

  std::size_t n() const noexcept { return samples.size(); }
  double operator[](std::size_t t) const noexcept { return samples[t]; }
};

/// Gaussian white noise N(0, variance) driven by a 64-bit seed.
struct NoiseSpec {
  double variance = 1.0;
  std::uint64_t seed = 0;
};

/// splitmix64 finalizer applied to master + (index + 1) * golden ratio.
/// Child streams for Monte-Carlo run r use mix_seed(master, r).
constexpr std::uint64_t mix_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + (index + 1) * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline TimeSeries gen_noise(std::size_t n, const NoiseSpec& spec, std::string label = "e") {
  if (n < 1) fail(ErrorCode::invalid_input, "gen_noise: n must be >= 1");
  if (!(spec.variance >= 0.0)) fail(ErrorCode::invalid_input, "gen_noise: variance must be >= 0");
  TimeSeries ts{std::vector<double>(n, 0.0), std::move(label)};
  if (spec.variance == 0.0) return ts;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> dist(0.0, std::sqrt(spec.variance));
  for (auto& x : ts.samples) x = dist(rng);
  return ts;
}

/// Response of W to u with zero pre-history, via the difference equation of
/// W written in the delay operator.
inline TimeSeries filter(const RatTF& w, const TimeSeries& u, std::string label = "") {
  if (!w.is_causal()) fail(ErrorCode::invalid_input, "filter: transfer function is not causal");
  TimeSeries y{std::vector<double>(u.n(), 0.0), label.empty() ? u.label : std::move(label)};
  if (w.is_zero()) return y;
  const DelayForm f = w.to_delay();
  const std::size_t nb = f.num.size();
  const std::size_t na = f.den.size();
  for (std::size_t t = 0; t < u.n(); ++t) {
    double acc = 0.0;
    for (std::size_t j = 0; j < nb && j <= t; ++j) acc += f.num[j] * u.samples[t - j];
    for (std::size_t j = 1; j < na && j <= t; ++j) acc -= f.den[j] * y.samples[t - j];
    if (!std::isfinite(acc))
      fail(ErrorCode::non_finite_output, "filter: output became non-finite at t=" + std::to_string(t));
    y.samples[t] = acc;
  }
  return y;
}

inline TimeSeries drop_front(const TimeSeries& ts, std::size_t count) {
  TimeSeries out{{}, ts.label};
  if (count < ts.n()) out.samples.assign(ts.samples.begin() + static_cast<std::ptrdiff_t>(count), ts.samples.end());
  return out;
}

struct LowRankSample {
  TimeSeries y1;
  TimeSeries y2;
};

namespace detail {
inline void require_stable_causal(const RatTF& w, const char* name, const char* op) {
  if (!w.is_causal() || !is_stable(w))
    fail(ErrorCode::invalid_input, std::string(op) + ": " + name + " must be stable and causal");
}
}  // namespace detail

/// y_i = W_i e for one shared noise path; the first burn_in samples are
/// discarded from both channels.
inline LowRankSample sim_low_rank(const RatTF& w1, const RatTF& w2, std::size_t n, const NoiseSpec& spec,
                                  std::size_t burn_in) {
  detail::require_stable_causal(w1, "W1", "sim_low_rank");
  detail::require_stable_causal(w2, "W2", "sim_low_rank");
  const TimeSeries e = gen_noise(burn_in + n, spec);
  return {drop_front(filter(w1, e, "y1"), burn_in), drop_front(filter(w2, e, "y2"), burn_in)};
}

struct InputSample {
  TimeSeries y1;
  TimeSeries y2;
  TimeSeries u;
};

/// y_i = F_i u + K_i e with independent white u and e.
inline InputSample sim_with_input(const RatTF& f1, const RatTF& f2, const RatTF& k1, const RatTF& k2,
                                  std::size_t n, const NoiseSpec& u_spec, const NoiseSpec& e_spec,
                                  std::size_t burn_in) {
  if (u_spec.seed == e_spec.seed)
    fail(ErrorCode::config, "sim_with_input: u and e must use distinct seeds");
  detail::require_stable_causal(f1, "F1", "sim_with_input");
  detail::require_stable_causal(f2, "F2", "sim_with_input");
  detail::require_stable_causal(k1, "K1", "sim_with_input");
  detail::require_stable_causal(k2, "K2", "sim_with_input");
  if (!f1.is_strictly_causal() || !f2.is_strictly_causal())
    fail(ErrorCode::invalid_input, "sim_with_input: F1 and F2 must be strictly causal");
  const TimeSeries u = gen_noise(burn_in + n, u_spec, "u");
  const TimeSeries e = gen_noise(burn_in + n, e_spec, "e");
  auto channel = [&](const RatTF& f, const RatTF& k, const char* name) {
    TimeSeries a = filter(f, u, name);
    const TimeSeries b = filter(k, e);
    for (std::size_t t = 0; t < a.n(); ++t) a.samples[t] += b.samples[t];
    return drop_front(a, burn_in);
  };
  return {channel(f1, k1, "y1"), channel(f2, k2, "y2"), drop_front(u, burn_in)};
}

}  // namespace lowrank
