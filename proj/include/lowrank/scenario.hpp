#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lowrank/error.hpp"
#include "lowrank/estimate.hpp"
#include "lowrank/harness.hpp"
#include "lowrank/io.hpp"
#include "lowrank/ratfun.hpp"
#include "lowrank/simulate.hpp"

namespace lowrank {

/// Configuration problems; what() joins every offending field.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> issues)
      : Error(ErrorCode::config, join(issues)), issues_(std::move(issues)) {}

  const std::vector<std::string>& issues() const noexcept { return issues_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string s;
    for (const auto& i : v) s += (s.empty() ? "" : "; ") + i;
    return s;
  }
  std::vector<std::string> issues_;
};

enum class ScenarioKind { low_rank, with_input };

struct RelationSpec {
  bool bic = false;
  Orders orders{1, 1};
  Orders max_orders{3, 3};
  bool pin_b0 = false;
};

struct ArmaSpec {
  ArmaOrders orders{1, 1};
  bool refine = true;
};

struct InputSpec {
  bool bic = true;
  std::array<Orders, 2> orders{{{0, 2}, {0, 2}}};
  Orders max_orders{4, 5};
};

struct EstimationSpec {
  std::optional<int> ar_orders;
  std::optional<RelationSpec> relation;
  std::optional<ArmaSpec> arma;
  bool wiener = false;
  InputSpec input;
};

/// One experiment. For low_rank only
/// w1, w2 are used, for with_input only f1, f2, k1, k2.
struct ScenarioConfig {
  std::string id = "scenario";
  ScenarioKind kind = ScenarioKind::low_rank;
  RatTF w1, w2, f1, f2, k1, k2;
  std::size_t n = 500;
  std::size_t burn_in = 500;
  double e_variance = 1.0;
  double u_variance = 1.0;
  EstimationSpec estimation;
  int runs = 1;
  std::uint64_t master_seed = 0;
  std::string output_dir = "out";
  int bode_points = 128;
};

// ---------------------------------------------------------------------------
// JSON <-> config

namespace detail {

inline json orders_json(Orders o) { return json::array({o.q, o.r}); }

class ConfigReader {
 public:
  std::vector<std::string> issues;

  const json* field(const json& obj, const std::string& key, const std::string& where, bool required) {
    if (obj.is_object() && obj.contains(key)) return &obj.at(key);
    if (required) issues.push_back(where + key + ": missing");
    return nullptr;
  }

  template <class T>
  std::optional<T> integer(const json* j, const std::string& name, long long lo) {
    if (!j) return std::nullopt;
    if (!j->is_number_integer() || j->get<long long>() < lo) {
      issues.push_back(name + ": expected an integer >= " + std::to_string(lo));
      return std::nullopt;
    }
    return static_cast<T>(j->get<long long>());
  }

  std::optional<double> number(const json* j, const std::string& name, double lo, bool strict) {
    if (!j) return std::nullopt;
    if (!j->is_number() || (strict ? !(j->get<double>() > lo) : !(j->get<double>() >= lo))) {
      issues.push_back(name + ": expected a number " + (strict ? "> " : ">= ") + format_double(lo));
      return std::nullopt;
    }
    return j->get<double>();
  }

  std::optional<bool> boolean(const json* j, const std::string& name) {
    if (!j) return std::nullopt;
    if (!j->is_boolean()) {
      issues.push_back(name + ": expected true or false");
      return std::nullopt;
    }
    return j->get<bool>();
  }

  std::optional<Orders> pair(const json* j, const std::string& name) {
    if (!j) return std::nullopt;
    if (!j->is_array() || j->size() != 2 || !(*j)[0].is_number_integer() || !(*j)[1].is_number_integer() ||
        (*j)[0].get<long long>() < 0 || (*j)[1].get<long long>() < 0 || (*j)[0].get<long long>() > 50 ||
        (*j)[1].get<long long>() > 50) {
      issues.push_back(name + ": expected [q, r] with integers in [0, 50]");
      return std::nullopt;
    }
    return Orders{(*j)[0].get<int>(), (*j)[1].get<int>()};
  }

  RatTF system(const json& sys, const std::string& key, bool strictly_causal) {
    const std::string where = "system." + key;
    const json* j = field(sys, key, "system.", true);
    if (!j) return {};
    const std::size_t before = issues.size();
    RatTF w = rattf_from_json(*j, where, issues);
    if (issues.size() != before) return w;
    if (w.is_zero()) {
      issues.push_back(where + ": must not be identically zero");
      return w;
    }
    try {
      for (const auto& p : roots(w.den())) {
        if (std::abs(p) >= 1.0 - tol::kCircle) {
          std::ostringstream os;
          os << where << ": unstable pole at z=" << format_double(p.real());
          if (p.imag() != 0.0) os << (p.imag() > 0 ? "+" : "") << format_double(p.imag()) << "i";
          os << " (|z|=" << format_double(std::abs(p)) << ")";
          issues.push_back(os.str());
        }
      }
    } catch (const Error& e) {
      issues.push_back(where + ": " + e.what());
    }
    if (strictly_causal && !w.is_strictly_causal()) issues.push_back(where + ": must contain at least one delay");
    return w;
  }
};

}  // namespace detail

inline ScenarioConfig parse_config(const json& j) {
  detail::ConfigReader rd;
  ScenarioConfig c;
  if (!j.is_object()) throw ConfigError({"config: expected a JSON object"});

  if (const json* v = rd.field(j, "id", "", false)) {
    if (v->is_string())
      c.id = v->get<std::string>();
    else
      rd.issues.push_back("id: expected a string");
  }
  if (const json* v = rd.field(j, "kind", "", true)) {
    if (*v == "low_rank")
      c.kind = ScenarioKind::low_rank;
    else if (*v == "with_input")
      c.kind = ScenarioKind::with_input;
    else
      rd.issues.push_back("kind: expected \"low_rank\" or \"with_input\"");
  }
  const bool input = c.kind == ScenarioKind::with_input;

  if (const json* sys = rd.field(j, "system", "", true)) {
    if (!input) {
      c.w1 = rd.system(*sys, "w1", false);
      c.w2 = rd.system(*sys, "w2", false);
    } else {
      c.f1 = rd.system(*sys, "f1", true);
      c.f2 = rd.system(*sys, "f2", true);
      c.k1 = rd.system(*sys, "k1", false);
      c.k2 = rd.system(*sys, "k2", false);
    }
  }

  if (auto v = rd.integer<std::size_t>(rd.field(j, "n", "", true), "n", 20)) c.n = *v;
  if (auto v = rd.integer<std::size_t>(rd.field(j, "burn_in", "", false), "burn_in", 0)) c.burn_in = *v;
  if (auto v = rd.integer<int>(rd.field(j, "runs", "", false), "runs", 1)) c.runs = *v;
  if (auto v = rd.integer<int>(rd.field(j, "bode_points", "", false), "bode_points", 2)) c.bode_points = *v;
  if (const json* v = rd.field(j, "master_seed", "", true)) {
    if (v->is_number_unsigned() || (v->is_number_integer() && v->get<long long>() >= 0))
      c.master_seed = v->get<std::uint64_t>();
    else
      rd.issues.push_back("master_seed: expected a non-negative integer");
  }
  if (const json* v = rd.field(j, "output_dir", "", false)) {
    if (v->is_string() && !v->get<std::string>().empty())
      c.output_dir = v->get<std::string>();
    else
      rd.issues.push_back("output_dir: expected a nonempty string");
  }

  if (const json* noise = rd.field(j, "noise", "", true)) {
    if (auto v = rd.number(rd.field(*noise, "e_variance", "noise.", true), "noise.e_variance", 0.0, true))
      c.e_variance = *v;
    if (auto v = rd.number(rd.field(*noise, "u_variance", "noise.", input), "noise.u_variance", 0.0, true))
      c.u_variance = *v;
  }

  EstimationSpec& es = c.estimation;
  if (const json* est = rd.field(j, "estimation", "", true)) {
    if (auto v = rd.integer<int>(rd.field(*est, "ar_orders", "estimation.", false), "estimation.ar_orders", 1))
      es.ar_orders = *v;
    if (const json* rel = rd.field(*est, "relation", "estimation.", input)) {
      RelationSpec rs;
      if (const json* o = rd.field(*rel, "orders", "estimation.relation.", true)) {
        if (*o == "bic")
          rs.bic = true;
        else if (auto p = rd.pair(o, "estimation.relation.orders"))
          rs.orders = *p;
      }
      if (auto p = rd.pair(rd.field(*rel, "max_orders", "", false), "estimation.relation.max_orders"))
        rs.max_orders = *p;
      if (auto b = rd.boolean(rd.field(*rel, "pin_b0", "", false), "estimation.relation.pin_b0")) rs.pin_b0 = *b;
      es.relation = rs;
    }
    if (const json* arma = rd.field(*est, "arma", "estimation.", input)) {
      ArmaSpec as;
      if (auto p = rd.pair(rd.field(*arma, "orders", "estimation.arma.", true), "estimation.arma.orders"))
        as.orders = {p->q, p->r};
      if (auto b = rd.boolean(rd.field(*arma, "refine", "", false), "estimation.arma.refine")) as.refine = *b;
      es.arma = as;
    }
    if (auto b = rd.boolean(rd.field(*est, "wiener", "", false), "estimation.wiener")) es.wiener = *b;
    if (const json* in = rd.field(*est, "input", "estimation.", false)) {
      if (const json* o = rd.field(*in, "orders", "estimation.input.", true)) {
        if (*o == "bic") {
          es.input.bic = true;
        } else if (o->is_array() && o->size() == 2) {
          es.input.bic = false;
          for (std::size_t i = 0; i < 2; ++i)
            if (auto p = rd.pair(&(*o)[i], "estimation.input.orders[" + std::to_string(i) + "]"))
              es.input.orders[i] = *p;
        } else {
          rd.issues.push_back("estimation.input.orders: expected \"bic\" or [[q1, r1], [q2, r2]]");
        }
      }
      if (auto p = rd.pair(rd.field(*in, "max_orders", "", false), "estimation.input.max_orders"))
        es.input.max_orders = *p;
    }
    if (!input && !es.ar_orders && !es.relation && !es.arma)
      rd.issues.push_back("estimation: a low_rank scenario needs at least one of ar_orders, relation, arma");
    if (input && es.relation && es.relation->bic)
      rd.issues.push_back("estimation.relation.orders: with_input scenarios need explicit [q, r]");
    if (es.wiener && (input || !es.relation || !(es.ar_orders || es.arma)))
      rd.issues.push_back("estimation.wiener: requires a low_rank scenario with relation and ar_orders or arma");
  }

  if (!rd.issues.empty()) throw ConfigError(std::move(rd.issues));
  return c;
}

inline ScenarioConfig load_config(const std::string& path) {
  const std::string text = read_text(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError({path + ": invalid JSON (" + e.what() + ")"});
  }
  return parse_config(j);
}

/// Fully resolved configuration; parse_config(to_json(c)) reproduces c.
inline json to_json(const ScenarioConfig& c) {
  json sys;
  if (c.kind == ScenarioKind::low_rank) {
    sys = {{"w1", to_json(c.w1)}, {"w2", to_json(c.w2)}};
  } else {
    sys = {{"f1", to_json(c.f1)}, {"f2", to_json(c.f2)}, {"k1", to_json(c.k1)}, {"k2", to_json(c.k2)}};
  }
  json noise = {{"e_variance", c.e_variance}};
  if (c.kind == ScenarioKind::with_input) noise["u_variance"] = c.u_variance;
  const EstimationSpec& es = c.estimation;
  json est = json::object();
  if (es.ar_orders) est["ar_orders"] = *es.ar_orders;
  if (es.relation) {
    est["relation"] = {{"orders", es.relation->bic ? json("bic") : detail::orders_json(es.relation->orders)},
                       {"max_orders", detail::orders_json(es.relation->max_orders)},
                       {"pin_b0", es.relation->pin_b0}};
  }
  if (es.arma) {
    est["arma"] = {{"orders", json::array({es.arma->orders.p, es.arma->orders.q})}, {"refine", es.arma->refine}};
  }
  est["wiener"] = es.wiener;
  if (c.kind == ScenarioKind::with_input) {
    est["input"] = {{"orders", es.input.bic ? json("bic")
                                            : json::array({detail::orders_json(es.input.orders[0]),
                                                           detail::orders_json(es.input.orders[1])})},
                    {"max_orders", detail::orders_json(es.input.max_orders)}};
  }
  return json{{"id", c.id},
              {"kind", c.kind == ScenarioKind::low_rank ? "low_rank" : "with_input"},
              {"system", sys},
              {"n", c.n},
              {"burn_in", c.burn_in},
              {"noise", noise},
              {"estimation", est},
              {"runs", c.runs},
              {"master_seed", c.master_seed},
              {"output_dir", c.output_dir},
              {"bode_points", c.bode_points}};
}

// ---------------------------------------------------------------------------
// Presets

inline constexpr std::uint64_t kPresetSeed = 20210601;

inline std::vector<std::string> preset_names() { return {"example1", "example2", "example3"}; }

inline ScenarioConfig preset(const std::string& name) {
  ScenarioConfig c;
  c.id = name;
  c.n = 500;
  c.burn_in = 500;
  c.master_seed = kPresetSeed;
  c.output_dir = "out/" + name;
  if (name == "example1") {
    c.kind = ScenarioKind::low_rank;
    c.w1 = RatTF::from_delay({1.0}, {1.0, -0.2, -0.25, 0.05});
    c.w2 = RatTF::from_delay({1.0}, {1.0, -0.6, 0.03, 0.01});
    c.runs = 100;
    c.estimation.ar_orders = 3;
    c.estimation.relation = RelationSpec{true, {1, 1}, {3, 3}, true};
    c.estimation.wiener = true;
  } else if (name == "example2") {
    c.kind = ScenarioKind::low_rank;
    c.w1 = RatTF::from_delay({1.0, 2.0}, {1.0, -0.2});
    c.w2 = RatTF::from_delay({1.0, -2.0}, {1.0, -0.2});
    c.runs = 1;
    c.estimation.arma = ArmaSpec{{1, 1}, true};
    c.estimation.relation = RelationSpec{false, {1, 1}, {3, 3}, false};
    c.estimation.wiener = true;
  } else if (name == "example3") {
    c.kind = ScenarioKind::with_input;
    c.f1 = RatTF::from_delay({0.0, 0.3, 0.7, 0.3}, {1.0});
    c.f2 = RatTF::from_delay({0.0, 0.15, 0.9, -0.5}, {1.0});
    c.k1 = RatTF::from_delay({1.0, 0.1, 0.4}, {1.0, 0.3, 0.4});
    c.k2 = RatTF::from_delay({1.0, 0.1, 0.4}, {1.0, -0.2, 0.1});
    c.u_variance = 2.0;
    c.e_variance = 1.0;
    c.runs = 100;
    c.estimation.input = InputSpec{true, {{{0, 2}, {0, 2}}}, {4, 5}};
    c.estimation.relation = RelationSpec{false, {2, 2}, {3, 3}, false};
    c.estimation.arma = ArmaSpec{{2, 2}, true};
  } else {
    throw ConfigError({"preset: unknown name '" + name + "' (expected example1, example2 or example3)"});
  }
  return c;
}

// ---------------------------------------------------------------------------
// Pipelines

struct ScenarioData {
  TimeSeries y1, y2, u;  // u is empty for low_rank
};

/// Data of one run: low_rank draws e with `seed`; with_input draws u and e
/// with mix_seed(seed, 0) and mix_seed(seed, 1).
inline ScenarioData simulate_scenario(const ScenarioConfig& c, std::uint64_t seed) {
  if (c.kind == ScenarioKind::low_rank) {
    auto s = sim_low_rank(c.w1, c.w2, c.n, {c.e_variance, seed}, c.burn_in);
    return {std::move(s.y1), std::move(s.y2), {}};
  }
  auto s = sim_with_input(c.f1, c.f2, c.k1, c.k2, c.n, {c.u_variance, mix_seed(seed, 0)},
                          {c.e_variance, mix_seed(seed, 1)}, c.burn_in);
  return {std::move(s.y1), std::move(s.y2), std::move(s.u)};
}

struct ParamLayout {
  std::vector<std::string> names;
  std::vector<std::optional<double>> true_values;
};

namespace detail {

// Coefficients of w laid out as a model with A of order q and B of order r
// after `delay` leading zeros of the numerator; nullopt if w does not fit.
struct ModelCoeffs {
  std::vector<double> a;  // a_1..a_q
  std::vector<double> b;  // b_0..b_r
};

inline std::optional<ModelCoeffs> fit_structure(const RatTF& w, int q, int r, int delay) {
  const DelayForm d = w.to_delay();
  std::vector<double> num = d.num;
  for (int k = 0; k < delay; ++k) {
    if (num.empty()) break;
    if (num.front() != 0.0) return std::nullopt;
    num.erase(num.begin());
  }
  if (num.empty()) num.push_back(0.0);
  if (static_cast<int>(d.den.size()) - 1 > q || static_cast<int>(num.size()) - 1 > r) return std::nullopt;
  ModelCoeffs m;
  m.a.assign(static_cast<std::size_t>(q), 0.0);
  m.b.assign(static_cast<std::size_t>(r) + 1, 0.0);
  for (std::size_t k = 1; k < d.den.size(); ++k) m.a[k - 1] = d.den[k];
  for (std::size_t k = 0; k < num.size(); ++k) m.b[k] = num[k];
  return m;
}

inline void add_model(ParamLayout& l, const std::string& prefix, const std::optional<ModelCoeffs>& truth, int q, int r,
                      bool skip_b0) {
  for (int k = 1; k <= q; ++k) {
    l.names.push_back(prefix + "a" + std::to_string(k));
    l.true_values.push_back(truth ? std::optional<double>(truth->a[static_cast<std::size_t>(k - 1)]) : std::nullopt);
  }
  for (int k = skip_b0 ? 1 : 0; k <= r; ++k) {
    l.names.push_back(prefix + "b" + std::to_string(k));
    l.true_values.push_back(truth ? std::optional<double>(truth->b[static_cast<std::size_t>(k)]) : std::nullopt);
  }
}

inline void push_model(std::vector<double>& out, const std::vector<double>& a, const std::vector<double>& b, int q,
                       int r, bool skip_b0) {
  for (int k = 0; k < q; ++k) out.push_back(k < static_cast<int>(a.size()) ? a[static_cast<std::size_t>(k)] : 0.0);
  for (int k = skip_b0 ? 1 : 0; k <= r; ++k)
    out.push_back(k < static_cast<int>(b.size()) ? b[static_cast<std::size_t>(k)] : 0.0);
}

inline Orders relation_shape(const RelationSpec& rs) { return rs.bic ? rs.max_orders : rs.orders; }

inline RatTF true_relation(const ScenarioConfig& c) {
  return c.kind == ScenarioKind::low_rank ? c.w2 / c.w1 : c.k2 / c.k1;
}

// Innovation-form ARMA parameters (A, C monic, lambda^2) of the outer factor
// of w driven by noise of variance `var`.
inline std::optional<std::vector<double>> true_arma(const RatTF& w, double var, ArmaOrders o) {
  try {
    const DelayForm g = outer_inner(w).outer.to_delay();
    if (static_cast<int>(g.den.size()) - 1 > o.p || static_cast<int>(g.num.size()) - 1 > o.q) return std::nullopt;
    std::vector<double> v(static_cast<std::size_t>(o.p + o.q) + 1, 0.0);
    for (std::size_t k = 1; k < g.den.size(); ++k) v[k - 1] = g.den[k];
    for (std::size_t k = 1; k < g.num.size(); ++k) v[static_cast<std::size_t>(o.p) + k - 1] = g.num[k] / g.num[0];
    v.back() = var * g.num[0] * g.num[0];
    return v;
  } catch (const Error&) {
    return std::nullopt;
  }
}

inline void add_arma(ParamLayout& l, const std::string& prefix, const std::optional<std::vector<double>>& truth,
                     ArmaOrders o) {
  std::size_t i = 0;
  auto add = [&](const std::string& name) {
    l.names.push_back(prefix + name);
    l.true_values.push_back(truth ? std::optional<double>((*truth)[i]) : std::nullopt);
    ++i;
  };
  for (int k = 1; k <= o.p; ++k) add("ar" + std::to_string(k));
  for (int k = 1; k <= o.q; ++k) add("ma" + std::to_string(k));
  add("lambda2");
}

}  // namespace detail

/// Parameter columns of a scenario. BIC-selected models are padded with zeros
/// up to their maximum orders so every run has the same columns.
inline ParamLayout param_layout(const ScenarioConfig& c) {
  ParamLayout l;
  const EstimationSpec& es = c.estimation;
  if (c.kind == ScenarioKind::low_rank) {
    if (es.ar_orders) {
      const RatTF* ws[2] = {&c.w1, &c.w2};
      for (int i = 0; i < 2; ++i) {
        detail::add_model(l, "a" + std::to_string(i + 1) + "_", detail::fit_structure(*ws[i], *es.ar_orders, 0, 0),
                          *es.ar_orders, 0, true);
      }
    }
  } else {
    const RatTF* fs[2] = {&c.f1, &c.f2};
    for (std::size_t i = 0; i < 2; ++i) {
      const Orders o = es.input.bic ? es.input.max_orders : es.input.orders[i];
      detail::add_model(l, "f" + std::to_string(i + 1) + "_", detail::fit_structure(*fs[i], o.q, o.r, 1), o.q, o.r,
                        false);
    }
  }
  if (es.relation) {
    const Orders o = detail::relation_shape(*es.relation);
    detail::add_model(l, "h_", detail::fit_structure(detail::true_relation(c), o.q, o.r, 0), o.q, o.r,
                      es.relation->pin_b0);
  }
  if (es.arma) {
    const RatTF& w = c.kind == ScenarioKind::low_rank ? c.w1 : c.k1;
    detail::add_arma(l, c.kind == ScenarioKind::low_rank ? "g1_" : "k1_",
                     detail::true_arma(w, c.e_variance, es.arma->orders), es.arma->orders);
  }
  return l;
}

/// Everything estimated from one data set.
struct ScenarioEstimate {
  std::vector<double> params;  // in param_layout order
  double residual_rms = 0.0;
  std::optional<RatTF> w1_hat, w2_hat;  // low_rank
  std::optional<RatTF> k1_hat, k2_hat;  // with_input
  std::optional<InputModelFit> input_fit;
  std::optional<RelationFit> relation;
  std::optional<ArmaFit> arma;
  std::array<std::optional<ArmaFit>, 2> ar;
  std::vector<std::string> rank_warnings;
  bool ma_stabilized = false;
};

namespace detail {

inline RelationFit run_relation(const RelationSpec& rs, const TimeSeries& y1, const TimeSeries& y2) {
  Orders o = rs.orders;
  if (rs.bic) {
    const BicTable t = scan_bic(y1, y2, rs.max_orders.q, rs.max_orders.r, rs.pin_b0);
    o = {t.best.first, t.best.second};
  }
  return fit_relation(y1, y2, o.q, o.r, rs.pin_b0);
}

inline void push_arma(std::vector<double>& out, const ArmaFit& f) {
  out.insert(out.end(), f.ar.begin(), f.ar.end());
  out.insert(out.end(), f.ma.begin(), f.ma.end());
  out.push_back(f.innovation_variance);
}

}  // namespace detail

inline ScenarioEstimate estimate_scenario(const ScenarioConfig& c, const ScenarioData& d) {
  const EstimationSpec& es = c.estimation;
  ScenarioEstimate out;
  if (c.kind == ScenarioKind::low_rank) {
    if (es.ar_orders) {
      const TimeSeries* ys[2] = {&d.y1, &d.y2};
      for (std::size_t i = 0; i < 2; ++i) {
        out.ar[i] = fit_ar(*ys[i], *es.ar_orders);
        out.params.insert(out.params.end(), out.ar[i]->ar.begin(), out.ar[i]->ar.end());
        if (out.ar[i]->rank_warning) out.rank_warnings.push_back("ar y" + std::to_string(i + 1));
      }
    }
    if (es.relation) {
      out.relation = detail::run_relation(*es.relation, d.y1, d.y2);
      const Orders o = detail::relation_shape(*es.relation);
      detail::push_model(out.params, out.relation->a, out.relation->b, o.q, o.r, es.relation->pin_b0);
      if (out.relation->rank_warning) out.rank_warnings.push_back("relation");
    }
    if (es.arma) {
      out.arma = fit_arma(d.y1, es.arma->orders.p, es.arma->orders.q, es.arma->refine);
      detail::push_arma(out.params, *out.arma);
      if (out.arma->rank_warning) out.rank_warnings.push_back("arma y1");
      out.ma_stabilized = out.arma->ma_stabilized;
    }

    // Spectral factor of y1 per unit-variance innovation.
    std::optional<RatTF> g1;
    if (out.arma)
      g1 = out.arma->g_hat;
    else if (out.ar[0])
      g1 = std::sqrt(out.ar[0]->innovation_variance) * out.ar[0]->g_hat;
    if (g1 && out.relation) {
      const RecoveredBlocks rb = recover_w1_w2(*g1, out.relation->h_hat);
      out.w1_hat = rb.w1;
      out.w2_hat = rb.w2;
    } else {
      out.w1_hat = g1;
    }
    if (out.relation)
      out.residual_rms = out.relation->residual_rms;
    else if (out.arma)
      out.residual_rms = std::sqrt(out.arma->innovation_variance);
    else
      out.residual_rms = std::sqrt(out.ar[0]->innovation_variance);
  } else {
    if (es.relation->bic) fail(ErrorCode::unsupported, "with_input: relation orders must be given explicitly");
    InputIdentOptions opt;
    if (!es.input.bic) opt.input_orders = es.input.orders;
    opt.max_orders = es.input.max_orders;
    opt.relation_orders = es.relation->orders;
    opt.arma_orders = es.arma->orders;
    opt.arma_refine = es.arma->refine;
    InputModelFit fit = identify_with_input(d.y1, d.y2, d.u, opt);
    // Relation fit honours pin_b0, which identify_with_input leaves free.
    if (es.relation->pin_b0) {
      fit.relation = fit_relation(fit.residual1, fit.residual2, opt.relation_orders.q, opt.relation_orders.r, true);
      fit.h_hat = fit.relation.h_hat;
      fit.k2_hat = fit.h_hat * fit.k1_hat;
    }
    for (std::size_t i = 0; i < 2; ++i) {
      const Orders o = es.input.bic ? es.input.max_orders : es.input.orders[i];
      detail::push_model(out.params, fit.stage1[i].a, fit.stage1[i].b, o.q, o.r, false);
      if (fit.stage1[i].rank_warning) out.rank_warnings.push_back("stage1 y" + std::to_string(i + 1));
    }
    const Orders ro = es.relation->orders;
    detail::push_model(out.params, fit.relation.a, fit.relation.b, ro.q, ro.r, es.relation->pin_b0);
    if (fit.relation.rank_warning) out.rank_warnings.push_back("relation");
    detail::push_arma(out.params, fit.arma);
    if (fit.arma.rank_warning) out.rank_warnings.push_back("arma y1_tilde");
    out.ma_stabilized = fit.arma.ma_stabilized;
    out.k1_hat = fit.k1_hat;
    out.k2_hat = fit.k2_hat;
    out.relation = fit.relation;
    out.arma = fit.arma;
    out.residual_rms = fit.relation.residual_rms;
    out.input_fit = std::move(fit);
  }
  return out;
}

/// Monte-Carlo design: parameter layout plus the Bode curves compared on
/// `bode_points` angles in [0, pi]. low_rank compares sqrt(var_e) |W1| with
/// the estimated factor; with_input compares K1 and K2.
inline McDesign scenario_design(const ScenarioConfig& c) {
  McDesign d;
  d.scenario_id = c.id;
  const ParamLayout l = param_layout(c);
  d.param_names = l.names;
  d.true_values = l.true_values;
  d.angles = angle_grid(static_cast<std::size_t>(c.bode_points));
  const EstimationSpec& es = c.estimation;
  if (c.kind == ScenarioKind::low_rank) {
    if (es.ar_orders || es.arma) {
      auto m = magnitudes(c.w1, d.angles);
      for (double& v : m) v *= std::sqrt(c.e_variance);
      d.curves.push_back({"w1", std::move(m)});
    }
  } else {
    auto m1 = magnitudes(c.k1, d.angles);
    auto m2 = magnitudes(c.k2, d.angles);
    for (double& v : m1) v *= std::sqrt(c.e_variance);
    for (double& v : m2) v *= std::sqrt(c.e_variance);
    d.curves.push_back({"k1", std::move(m1)});
    d.curves.push_back({"k2", std::move(m2)});
  }
  return d;
}

inline RunRecord to_run_record(const ScenarioEstimate& e, const McDesign& d) {
  RunRecord r{e.params, e.residual_rms, {}};
  for (const auto& curve : d.curves) {
    const std::optional<RatTF>& w = curve.name == "w1" ? e.w1_hat : curve.name == "k1" ? e.k1_hat : e.k2_hat;
    if (!w) fail(ErrorCode::numeric, "no estimate available for curve " + curve.name);
    r.curves.push_back(magnitudes(*w, d.angles));
  }
  return r;
}

inline json wiener_json(const WienerPair& p) {
  return json{{"f_plus", to_json(p.f_plus)},
              {"k", to_json(p.k)},
              {"g2", to_json(p.g2)},
              {"q2", to_json(p.q2)},
              {"joint_minimum_phase", p.joint_minimum_phase},
              {"reconstruction_error", p.reconstruction_error}};
}

/// Estimation report for one data set.
inline json estimation_report(const ScenarioConfig& c, const ScenarioEstimate& e, const std::string& operation) {
  const ParamLayout l = param_layout(c);
  json coeffs = json::object();
  for (std::size_t k = 0; k < l.names.size(); ++k) coeffs[l.names[k]] = e.params[k];
  json orders = json::object();
  if (e.ar[0]) orders["ar"] = e.ar[0]->ar.size();
  if (e.relation) orders["relation"] = json::array({e.relation->a.size(), e.relation->b.size() - 1});
  if (e.arma) orders["arma"] = json::array({e.arma->ar.size(), e.arma->ma.size()});
  if (e.input_fit)
    orders["input"] = json::array({json::array({e.input_fit->stage1[0].q, e.input_fit->stage1[0].r}),
                                   json::array({e.input_fit->stage1[1].q, e.input_fit->stage1[1].r})});
  json tfs = json::object();
  if (e.w1_hat) tfs["w1_hat"] = to_json(*e.w1_hat);
  if (e.w2_hat) tfs["w2_hat"] = to_json(*e.w2_hat);
  if (e.relation) tfs["h_hat"] = to_json(e.relation->h_hat);
  if (e.k1_hat) tfs["k1_hat"] = to_json(*e.k1_hat);
  if (e.k2_hat) tfs["k2_hat"] = to_json(*e.k2_hat);
  if (e.input_fit) {
    tfs["f1_hat"] = to_json(e.input_fit->f1_hat);
    tfs["f2_hat"] = to_json(e.input_fit->f2_hat);
  }
  json flags = {{"ma_stabilized", e.ma_stabilized}, {"rank_warning", !e.rank_warnings.empty()}};
  if (e.arma) flags["minimum_phase"] = e.arma->minimum_phase;
  if (c.estimation.wiener && e.w1_hat && e.w2_hat) {
    try {
      const WienerPair p = wiener_predictor(*e.w1_hat, *e.w2_hat);
      tfs["f_plus_hat"] = to_json(p.f_plus);
      tfs["k_hat"] = to_json(p.k);
      flags["joint_minimum_phase"] = p.joint_minimum_phase;
    } catch (const Error& err) {
      flags["wiener_error"] = std::string(to_string(err.code())) + ": " + std::string(err.what());
    }
  }
  return json{{"operation", operation},   {"scenario_id", c.id},          {"orders", orders},
              {"coefficients", coeffs},   {"transfer_functions", tfs},    {"residual_rms", e.residual_rms},
              {"flags", flags},           {"rank_warnings", e.rank_warnings}};
}

// ---------------------------------------------------------------------------
// Batch execution

struct ScenarioArtifacts {
  McResult result;
  std::string runs_csv;
  std::string summary_json;
  std::vector<std::pair<std::string, std::string>> bode_files;  // file name, contents
  std::optional<std::string> wiener_json;
};

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

inline ScenarioArtifacts run_scenario(const ScenarioConfig& c, unsigned threads = 1) {
  const McDesign design = scenario_design(c);
  ScenarioArtifacts a;
  a.result = run_monte_carlo(
      design, c.runs, c.master_seed,
      [&](std::uint64_t seed) { return to_run_record(estimate_scenario(c, simulate_scenario(c, seed)), design); },
      threads);
  a.runs_csv = runs_csv(design, a.result);
  a.summary_json = dump(to_json(a.result.summary));
  for (std::size_t k = 0; k < a.result.summary.bode.size(); ++k) {
    const std::string file = k == 0 ? "bode.csv" : "bode_" + a.result.summary.bode[k].name + ".csv";
    a.bode_files.emplace_back(file, bode_csv(a.result.summary.bode[k].comparison));
  }
  if (c.estimation.wiener) {
    json w = json::object();
    w["true"] = wiener_json(wiener_predictor(c.w1, c.w2));
    // The estimated pair of run 0 (the same data as `simulate`).
    const auto& first = a.result.outcomes.front();
    if (first.ok) {
      const ScenarioEstimate e = estimate_scenario(c, simulate_scenario(c, first.seed));
      if (e.w1_hat && e.w2_hat) {
        try {
          w["run0"] = wiener_json(wiener_predictor(*e.w1_hat, *e.w2_hat));
        } catch (const Error& err) {
          w["run0"] = {{"error", to_string(err.code())}, {"message", err.what()}};
        }
      }
    }
    a.wiener_json = dump(w);
  }
  return a;
}

inline void write_artifacts(const ScenarioConfig& c, const ScenarioArtifacts& a) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(c.output_dir, ec);
  if (ec) fail(ErrorCode::io, "cannot create output directory '" + c.output_dir + "': " + ec.message());
  const fs::path dir(c.output_dir);
  write_text((dir / "config.echo.json").string(), dump(to_json(c)));
  write_text((dir / "runs.csv").string(), a.runs_csv);
  write_text((dir / "summary.json").string(), a.summary_json);
  for (const auto& [file, text] : a.bode_files) write_text((dir / file).string(), text);
  if (a.wiener_json) write_text((dir / "wiener.json").string(), *a.wiener_json);
}

}  // namespace lowrank
