#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "lowrank/error.hpp"
#include "lowrank/io.hpp"
#include "lowrank/ratfun.hpp"
#include "lowrank/simulate.hpp"

namespace lowrank {

/// Box-plot statistics. Quartiles use linear interpolation between order
/// statistics (type 7): Q(p) = x[h] + (h - floor h)(x[h+1] - x[h]), h = (n-1)p.
struct BoxStats {
  double median = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
  double min = 0.0;
  double max = 0.0;
  double variance = 0.0;  // unbiased; 0 for a single sample
  int outlier_count = 0;  // outside [q25 - 1.5 IQR, q75 + 1.5 IQR]
};

inline double quantile_sorted(const std::vector<double>& x, double p) {
  const double h = static_cast<double>(x.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, x.size() - 1);
  return x[lo] + (h - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

inline BoxStats boxplot_stats(std::vector<double> x) {
  if (x.empty()) fail(ErrorCode::invalid_input, "boxplot_stats: empty sample");
  std::sort(x.begin(), x.end());
  BoxStats s;
  s.min = x.front();
  s.max = x.back();
  s.median = quantile_sorted(x, 0.5);
  s.q25 = quantile_sorted(x, 0.25);
  s.q75 = quantile_sorted(x, 0.75);
  // Sums over the sorted sample keep the result independent of input order.
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  if (x.size() > 1) {
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    s.variance = ss / static_cast<double>(x.size() - 1);
  }
  const double iqr = s.q75 - s.q25;
  for (double v : x)
    if (v < s.q25 - 1.5 * iqr || v > s.q75 + 1.5 * iqr) ++s.outlier_count;
  return s;
}

struct ParamSummary {
  std::string name;
  std::optional<double> true_value;
  BoxStats stats;
};

struct BodeComparison {
  std::vector<double> angles;
  std::vector<double> mag_a;
  std::vector<double> mag_b;
  double max_rel_err = 0.0;
  double mean_rel_err = 0.0;
};

inline constexpr double kBodeFloor = 1e-12;

/// Magnitude-only comparison: err = ||a| - |b|| / max(|a|, 1e-12).
inline BodeComparison compare_magnitudes(std::vector<double> angles, std::vector<double> mag_a,
                                         std::vector<double> mag_b) {
  if (angles.size() != mag_a.size() || angles.size() != mag_b.size())
    fail(ErrorCode::invalid_input, "bode_compare: grids are not aligned");
  BodeComparison c{std::move(angles), std::move(mag_a), std::move(mag_b), 0.0, 0.0};
  double sum = 0.0;
  for (std::size_t k = 0; k < c.angles.size(); ++k) {
    const double e = std::abs(c.mag_a[k] - c.mag_b[k]) / std::max(c.mag_a[k], kBodeFloor);
    c.max_rel_err = std::max(c.max_rel_err, e);
    sum += e;
  }
  if (!c.angles.empty()) c.mean_rel_err = sum / static_cast<double>(c.angles.size());
  return c;
}

inline std::vector<double> magnitudes(const RatTF& w, const std::vector<double>& angles) {
  std::vector<double> m;
  m.reserve(angles.size());
  for (double th : angles) m.push_back(std::abs(w.eval(std::polar(1.0, th))));
  return m;
}

inline BodeComparison bode_compare(const RatTF& wa, const RatTF& wb, const std::vector<double>& angles) {
  return compare_magnitudes(angles, magnitudes(wa, angles), magnitudes(wb, angles));
}

// ---------------------------------------------------------------------------
// Monte-Carlo engine

/// What one run reports: parameter estimates in the order of
/// McDesign::param_names, a residual level, and one magnitude curve per
/// McDesign::curves entry.
struct RunRecord {
  std::vector<double> params;
  double residual_rms = 0.0;
  std::vector<std::vector<double>> curves;
};

struct BodeCurve {
  std::string name;
  std::vector<double> mag_true;
};

struct McDesign {
  std::string scenario_id;
  std::vector<std::string> param_names;
  std::vector<std::optional<double>> true_values;
  std::vector<double> angles;
  std::vector<BodeCurve> curves;
};

struct RunOutcome {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string status;
  RunRecord record;
};

struct CurveSummary {
  std::string name;
  BodeComparison comparison;  // mag_a: true, mag_b: Monte-Carlo mean of the estimates
};

struct McSummary {
  std::string scenario_id;
  int runs = 0;
  int failures = 0;
  bool valid = true;  // at most 5% of the runs failed
  std::vector<ParamSummary> params;
  std::vector<CurveSummary> bode;
};

struct McResult {
  McSummary summary;
  std::vector<RunOutcome> outcomes;
};

using RunFunction = std::function<RunRecord(std::uint64_t seed)>;

inline unsigned resolve_threads(unsigned requested, int runs) {
  unsigned t = requested == 0 ? std::max(1u, std::thread::hardware_concurrency()) : requested;
  return std::max(1u, std::min<unsigned>(t, static_cast<unsigned>(runs)));
}

/// Executes `runs` independent runs with seeds mix_seed(master_seed, r).
/// Outcomes are stored by run index, so the result does not depend on the
/// worker count. A failing run is recorded and excluded from the statistics.
inline McResult run_monte_carlo(const McDesign& design, int runs, std::uint64_t master_seed, const RunFunction& fn,
                                unsigned threads = 1) {
  if (runs < 1) fail(ErrorCode::invalid_input, "run_monte_carlo: runs must be >= 1");
  McResult res;
  res.outcomes.resize(static_cast<std::size_t>(runs));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int r = next++; r < runs; r = next++) {
      RunOutcome& o = res.outcomes[static_cast<std::size_t>(r)];
      o.seed = mix_seed(master_seed, static_cast<std::uint64_t>(r));
      try {
        o.record = fn(o.seed);
        if (o.record.params.size() != design.param_names.size() || o.record.curves.size() != design.curves.size())
          fail(ErrorCode::numeric, "run produced an unexpected number of parameters");
        o.ok = true;
        o.status = "ok";
      } catch (const Error& e) {
        o.status = "failed:" + std::string(to_string(e.code()));
      } catch (const std::exception&) {
        o.status = "failed:exception";
      }
    }
  };
  const unsigned n_threads = resolve_threads(threads, runs);
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned k = 0; k < n_threads; ++k) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  McSummary& s = res.summary;
  s.scenario_id = design.scenario_id;
  s.runs = runs;
  std::vector<const RunOutcome*> good;
  for (const auto& o : res.outcomes) {
    if (o.ok)
      good.push_back(&o);
    else
      ++s.failures;
  }
  s.valid = s.failures * 20 <= runs;
  if (good.empty()) {
    s.valid = false;
    return res;
  }
  for (std::size_t p = 0; p < design.param_names.size(); ++p) {
    std::vector<double> x;
    for (const auto* o : good) x.push_back(o->record.params[p]);
    s.params.push_back({design.param_names[p], design.true_values[p], boxplot_stats(std::move(x))});
  }
  for (std::size_t c = 0; c < design.curves.size(); ++c) {
    std::vector<double> mean(design.angles.size(), 0.0);
    for (const auto* o : good)
      for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += o->record.curves[c][k];
    for (double& v : mean) v /= static_cast<double>(good.size());
    s.bode.push_back({design.curves[c].name, compare_magnitudes(design.angles, design.curves[c].mag_true, mean)});
  }
  return res;
}

// ---------------------------------------------------------------------------
// Serialization

inline std::string runs_csv(const McDesign& design, const McResult& res) {
  std::vector<std::string> header{"run_index", "seed"};
  header.insert(header.end(), design.param_names.begin(), design.param_names.end());
  header.push_back("residual_rms");
  header.push_back("status");
  CsvWriter w(header);
  for (std::size_t r = 0; r < res.outcomes.size(); ++r) {
    const RunOutcome& o = res.outcomes[r];
    std::vector<std::string> cells{std::to_string(r), std::to_string(o.seed)};
    for (std::size_t p = 0; p < design.param_names.size(); ++p)
      cells.push_back(o.ok ? format_double(o.record.params[p]) : "");
    cells.push_back(o.ok ? format_double(o.record.residual_rms) : "");
    cells.push_back(o.status);
    w.row_strings(cells);
  }
  return w.str();
}

inline std::string bode_csv(const BodeComparison& c) {
  CsvWriter w({"theta", "mag_true", "mag_est"});
  for (std::size_t k = 0; k < c.angles.size(); ++k) w.row({c.angles[k], c.mag_a[k], c.mag_b[k]});
  return w.str();
}

inline json to_json(const McSummary& s) {
  json params = json::array();
  for (const auto& p : s.params) {
    params.push_back({{"name", p.name},
                      {"true_value", p.true_value ? json(*p.true_value) : json(nullptr)},
                      {"median", p.stats.median},
                      {"q25", p.stats.q25},
                      {"q75", p.stats.q75},
                      {"min", p.stats.min},
                      {"max", p.stats.max},
                      {"variance", p.stats.variance},
                      {"outlier_count", p.stats.outlier_count}});
  }
  json bode = json::array();
  for (const auto& c : s.bode)
    bode.push_back({{"name", c.name},
                    {"points", c.comparison.angles.size()},
                    {"max_rel_err", c.comparison.max_rel_err},
                    {"mean_rel_err", c.comparison.mean_rel_err}});
  return json{{"scenario_id", s.scenario_id}, {"runs", s.runs},   {"failures", s.failures},
              {"valid", s.valid},             {"params", params}, {"bode", bode}};
}

}  // namespace lowrank
