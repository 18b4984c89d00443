#include "avalanche/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

#include "avalanche/branching.hpp"
#include "avalanche/exact_solver.hpp"

namespace avalanche {

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::holds: return "holds";
    case Verdict::violated: return "violated";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "?";
}

Verdict parse_verdict(const std::string& s) {
  if (s == "holds") return Verdict::holds;
  if (s == "violated") return Verdict::violated;
  if (s == "inconclusive") return Verdict::inconclusive;
  throw std::invalid_argument("unknown verdict: " + s);
}

void BoundReport::judge(bool asymptotic) {
  if (lower && upper && *lower > *upper)
    throw std::logic_error(name + ": lower bound above upper bound");
  if (!reference) {
    satisfied = Verdict::inconclusive;
    return;
  }
  const double r = *reference;
  const bool low_fail = lower && r < *lower - reference_error;
  const bool up_fail = upper && r > *upper + reference_error;
  if (!low_fail && !up_fail)
    satisfied = Verdict::holds;
  else if (asymptotic || (partial && !low_fail))
    satisfied = Verdict::inconclusive;
  else
    satisfied = Verdict::violated;
}

namespace {

void put_opt(nlohmann::json& j, const char* key, const std::optional<double>& v) {
  if (v)
    j[key] = *v;
  else
    j[key] = nullptr;
}

std::optional<double> get_opt(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

}  // namespace

void to_json(nlohmann::json& j, const BoundReport& r) {
  j = nlohmann::json::object();
  j["name"] = r.name;
  j["inputs"] = r.inputs;
  put_opt(j, "lower", r.lower);
  put_opt(j, "upper", r.upper);
  put_opt(j, "reference", r.reference);
  j["reference_error"] = r.reference_error;
  j["satisfied"] = verdict_name(r.satisfied);
  j["partial"] = r.partial;
  j["note"] = r.note;
}

void from_json(const nlohmann::json& j, BoundReport& r) {
  r.name = j.at("name").get<std::string>();
  r.inputs = j.at("inputs").get<std::map<std::string, double>>();
  r.lower = get_opt(j, "lower");
  r.upper = get_opt(j, "upper");
  r.reference = get_opt(j, "reference");
  r.reference_error = j.at("reference_error").get<double>();
  r.satisfied = parse_verdict(j.at("satisfied").get<std::string>());
  r.partial = j.value("partial", false);
  r.note = j.value("note", std::string());
}

ConditionCD::ConditionCD(double c_, double d_) : c(c_), d(d_) {
  if (!(d > 0.0 && d <= c)) throw std::domain_error("condition requires 0 < d <= c");
}

bool ConditionCD::admits(const ModelParams& params) const {
  const double np = params.n() * params.p();
  const double tol = 1e-12 * c;
  return np >= d - tol && np <= c + tol;
}

double mean_decay_bound(const ModelParams& params, double eh0, int k) {
  if (k < 1) throw std::domain_error("k must be at least 1");
  return std::pow(params.c(), k) * eh0 / params.n();
}

SurvivalBounds survival_bounds(const ModelParams& params, double eh0, int k) {
  if (k < 1) throw std::domain_error("k must be at least 1");
  const double nn = static_cast<double>(params.n());
  const double stay = -std::expm1(0.25 * nn * nn * params.log_q());
  return {std::pow(stay, k), mean_decay_bound(params, eh0, k)};
}

double node_excitation_bound(const ModelParams& params, double eh0, int k) {
  return mean_decay_bound(params, eh0, k) / params.n();
}

Bracket size_bounds_single(const ModelParams& params, const ConditionCD& cd, double ex0,
                           double ex0_sq) {
  if (!(cd.c < 1.0)) throw std::domain_error("size bounds need c < 1");
  if (!cd.admits(params)) throw std::domain_error("np outside [d, c]");
  const double gap = 1.0 - cd.c;
  return {ex0 / (1.0 - cd.d) - 3.0 * ex0_sq / (params.n() * gap * gap * gap), ex0 / gap};
}

double size_limit_correction(double lambda, std::int64_t i0) {
  if (!(lambda > 0.0 && lambda < 1.0)) throw std::domain_error("size correction needs 0 < lambda < 1");
  const double i = static_cast<double>(i0);
  const double den = 2.0 * (1.0 - lambda) * (1.0 - lambda) * (1.0 + lambda);
  return (3.0 * i * lambda * lambda + i * i * (2.0 * lambda - lambda * lambda)) / den;
}

namespace {

double epss_margin(double d, double eps) {
  return -std::expm1(-d * eps) * (1.0 - eps) / eps - 1.0;
}

}  // namespace

double epsilon_limit(double d) {
  if (!(d > 1.0)) throw std::domain_error("epsilon_limit needs d > 1");
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (epss_margin(d, mid) > 0.0 ? lo : hi) = mid;
  }
  return lo;
}

double rho_epsilon(double d, double eps) {
  if (!(d > 1.0)) throw std::domain_error("rho_epsilon needs d > 1");
  if (!(eps > 0.0 && eps < 1.0) || !(epss_margin(d, eps) > 0.0))
    throw std::domain_error("eps outside the admissible range");
  const double mu = -std::expm1(-d * eps) / eps * (1.0 - eps);
  return extinction_prob(mu);
}

Bracket reach_bounds_single(const ModelParams& params, const ConditionCD& cd, double eps, int i) {
  if (!(cd.d > 1.0)) throw std::domain_error("reach bounds need d > 1");
  if (!cd.admits(params)) throw std::domain_error("np outside [d, c]");
  const double top = params.n() * eps;
  if (!(i >= 1 && i < top)) throw std::domain_error("reach bounds need 1 <= i < n eps");
  const double rho = rho_epsilon(cd.d, eps);
  const double a = extinction_prob(cd.c);
  const double lower = std::expm1(i * std::log(rho)) / std::expm1(params.n() * std::log(rho));
  const double upper = std::expm1(i * std::log(a)) / std::expm1(top * std::log(a));
  return {lower, upper};
}

DurationBounds duration_bounds_single(const ModelParams& params, std::int64_t i0, std::int64_t m,
                                      double j_or_x,
                                      std::optional<SupercriticalConstants> constants) {
  const double c = params.c();
  const double n = params.n();
  const double md = static_cast<double>(m);
  if (m < 1 || md >= n) throw std::domain_error("duration bounds need 1 <= m < n");
  Interval ag = agresti_duration_bounds(c, i0, m);
  DurationBounds out{ag.lower, 0.0, ag.upper, 0.0, false};
  if (c > 1.0) {
    const double x = j_or_x;
    if (!(x > 0.0 && x * std::pow(c, md) < n)) throw std::domain_error("need x c^m < n");
    out.error_term = 3.0 * std::pow(c, 1.5 * (md + 1.0)) * md * std::pow(x, 1.5) / (2.0 * n);
    if (constants)
      out.error_term += std::pow(constants->K, static_cast<double>(i0)) * std::exp(-constants->theta * x);
    else
      out.partial = true;
  } else if (c < 1.0) {
    const double J = j_or_x;
    if (!(J > static_cast<double>(i0) && J < n)) throw std::domain_error("need i0 < J < n");
    const double la = std::log(extinction_prob(c));
    out.error_term = 3.0 * c * md * J * J / (2.0 * n) +
                     std::expm1(static_cast<double>(i0) * la) / std::expm1(J * la);
  } else {
    const double i = static_cast<double>(i0);
    out.error_term = 1.5 * std::cbrt(3.0 * md * i * i / n);
  }
  out.upper = out.agresti_upper + out.error_term;
  return out;
}

Bracket duration_limits_ensemble(double lambda, std::int64_t i0, std::int64_t m) {
  Interval ag = agresti_duration_bounds(lambda, i0, m);
  return {ag.lower, ag.upper};
}

std::int64_t scaling_horizon(double lambda, int n) {
  const double ln = std::log(static_cast<double>(n));
  double m;
  if (lambda > 1.0)
    m = 0.9 * 2.0 / (3.0 * std::log(lambda)) * ln;
  else if (lambda == 1.0)
    m = std::pow(static_cast<double>(n), 0.2);
  else
    m = 2.0 * ln;
  return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::floor(m)));
}

namespace {

bool gaps_shrink(const std::vector<ScalingRow>& rows) {
  if (rows.size() < 2) return false;
  for (std::size_t s = 1; s < rows.size(); ++s)
    if (rows[s].gap > rows[s - 1].gap + 1e-12) return false;
  return rows.back().gap < rows.front().gap;
}

}  // namespace

ScalingReport duration_scaling_check(double lambda, std::int64_t i0,
                                     const std::vector<int>& n_schedule) {
  if (!(lambda > 0.0)) throw std::domain_error("lambda must be positive");
  if (i0 < 1) throw std::domain_error("i0 must be at least 1");
  ScalingReport rep;
  rep.lambda = lambda;
  rep.i0 = i0;
  const double i = static_cast<double>(i0);
  double predicted;
  if (lambda > 1.0) {
    rep.statistic = "P(T > m)";
    predicted = -std::expm1(i * std::log(extinction_prob(lambda)));
  } else if (lambda == 1.0) {
    rep.statistic = "m P(T > m)";
    predicted = 2.0 * i;
  } else {
    rep.statistic = "log P(T > m) / m";
    predicted = std::log(lambda);
  }
  auto statistic = [&](double survival, std::int64_t m) {
    if (lambda > 1.0) return survival;
    if (lambda == 1.0) return static_cast<double>(m) * survival;
    return std::log(survival) / static_cast<double>(m);
  };
  for (int n : n_schedule) {
    if (n <= static_cast<int>(i0)) throw std::domain_error("n must exceed i0");
    const std::int64_t m = scaling_horizon(lambda, n);
    if (lambda == 1.0 && std::pow(static_cast<double>(m), 4) >= n)
      throw std::domain_error("schedule violates m^4 < n");
    const ModelParams params = ModelParams::from_c(n, lambda);
    const auto dist = state_distribution(params, static_cast<int>(i0), static_cast<int>(m));
    double survival = 0.0;
    for (std::size_t j = dist.back().size(); j-- > 1;) survival += dist.back()[j];
    const double v = statistic(survival, m);
    rep.exact.push_back({n, m, v, predicted, std::abs(v - predicted)});
  }
  const std::vector<std::int64_t> gw_m =
      lambda == 1.0 ? std::vector<std::int64_t>{10, 100, 1000, 10000}
                    : std::vector<std::int64_t>{5, 10, 20, 40};
  for (std::int64_t m : gw_m) {
    const double survival = 1.0 - gw_extinct_by(lambda, i0, m);
    if (!(survival > 0.0)) break;
    const double v = statistic(survival, m);
    rep.branching.push_back({0, m, v, predicted, std::abs(v - predicted)});
  }
  rep.exact_shrinks = gaps_shrink(rep.exact);
  rep.branching_shrinks = gaps_shrink(rep.branching);
  return rep;
}

double maxima_tail_critical(std::int64_t i0, std::int64_t m, const MaximaSlack& slack) {
  if (m <= i0) throw std::domain_error("need m > i0");
  return static_cast<double>(i0) / static_cast<double>(m) * (1.0 + slack.eps_m);
}

double maxima_mean_critical(std::int64_t k, const MaximaSlack& slack) {
  if (k < 1) throw std::domain_error("k must be at least 1");
  return std::log(static_cast<double>(k)) * (1.0 + slack.eps_m);
}

double maxima_scaled_subcritical(double c, std::int64_t m, double tail) {
  if (!(c > 0.0 && c < 1.0)) throw std::domain_error("need 0 < c < 1");
  const double md = static_cast<double>(m);
  return md * std::exp(md * std::log(extinction_prob(c))) * tail;
}

DriftCheck drift_check(const ModelParams& params, int i) {
  const int n = params.n();
  if (i < 0 || i > n) throw std::domain_error("state outside [0, n]");
  const std::vector<double> row = kernel_row(params, i);
  long double first = 0.0L, het = 0.0L;
  for (std::size_t j = 0; j < row.size(); ++j) {
    const long double jj = static_cast<long double>(j);
    first += row[j] * jj;
    het += row[j] * jj * (n - jj);
  }
  const double c = n * params.p();
  return {static_cast<double>(first), c * i, static_cast<double>(het),
          c * i * static_cast<double>(n - i)};
}

const std::vector<std::string>& grid_bound_names() {
  static const std::vector<std::string> names{
      "mean_decay",       "survival_naive",   "survival_refined", "node_excitation",
      "size_single",      "reach_single",     "duration_single",  "duration_limit",
      "maxima",           "drift_count",      "drift_heterogeneity"};
  return names;
}

namespace {

constexpr double kExactTol = 1e-9;

struct PointData {
  ModelParams params;
  int digits;
  std::unique_ptr<SubstochasticSystem> system;
  std::optional<SolveResult> size;
  std::optional<SolveResult> reach;
  double reach_eps = 0.0;

  const SubstochasticSystem& sys() {
    if (!system) {
      PrecisionConfig pc;
      pc.decimal_digits = digits;
      system = std::make_unique<SubstochasticSystem>(params, pc);
    }
    return *system;
  }
};

BoundReport base(const std::string& name, const ModelParams& params, std::int64_t i0) {
  BoundReport r;
  r.name = name;
  r.inputs = {{"n", params.n()}, {"c", params.c()}, {"i0", static_cast<double>(i0)}};
  return r;
}

BoundReport not_applicable(BoundReport r, const std::string& why) {
  r.satisfied = Verdict::inconclusive;
  r.note = "not applicable: " + why;
  return r;
}

// J in (i0, n) minimizing the subcritical error term.
double best_j(const ModelParams& params, std::int64_t i0, std::int64_t m) {
  double best = static_cast<double>(i0 + 1), best_err = 1e300;
  for (int J = static_cast<int>(i0) + 1; J < params.n(); ++J) {
    const double err = duration_bounds_single(params, i0, m, J).error_term;
    if (err < best_err) {
      best_err = err;
      best = J;
    }
  }
  return best;
}

void grid_point(PointData& pd, std::int64_t i0, const GridConfig& cfg,
                std::vector<BoundReport>& out) {
  const ModelParams& params = pd.params;
  const int n = params.n();
  const double c = params.c();
  const int k = cfg.k;
  const int i = static_cast<int>(i0);
  const double eh0 = static_cast<double>(i0) * (n - i0);
  const auto dist = state_distribution(params, i, k);
  double ex_k = 0.0, survival = 0.0;
  for (std::size_t j = dist.back().size(); j-- > 1;) {
    ex_k += static_cast<double>(j) * dist.back()[j];
    survival += dist.back()[j];
  }

  {
    BoundReport r = base("mean_decay", params, i0);
    r.inputs["k"] = k;
    r.upper = mean_decay_bound(params, eh0, k);
    r.reference = ex_k;
    r.reference_error = kExactTol * std::max(1.0, ex_k);
    r.judge();
    out.push_back(r);
  }
  const SurvivalBounds sb = survival_bounds(params, eh0, k);
  {
    BoundReport r = base("survival_naive", params, i0);
    r.inputs["k"] = k;
    r.upper = sb.naive;
    r.reference = survival;
    r.reference_error = kExactTol;
    r.judge();
    out.push_back(r);
  }
  {
    BoundReport r = base("survival_refined", params, i0);
    r.inputs["k"] = k;
    r.upper = sb.refined;
    r.reference = survival;
    r.reference_error = kExactTol;
    r.judge();
    if (sb.refined >= 1.0) {
      r.satisfied = Verdict::inconclusive;
      r.note = "bound exceeds 1";
    }
    out.push_back(r);
  }
  {
    // Exchangeable initial set: xi_k(x) = E(X_k)/n for every node.
    BoundReport r = base("node_excitation", params, i0);
    r.inputs["k"] = k;
    r.upper = node_excitation_bound(params, eh0, k);
    r.reference = ex_k / n;
    r.reference_error = kExactTol;
    r.judge();
    out.push_back(r);
  }
  {
    BoundReport r = base("size_single", params, i0);
    if (c < 1.0) {
      if (!pd.size) pd.size = expected_size(pd.sys());
      const double x0 = static_cast<double>(i0);
      Bracket b = size_bounds_single(params, ConditionCD::exact(params), x0, x0 * x0);
      r.lower = b.lower;
      r.upper = b.upper;
      r.reference = pd.size->value(i);
      r.reference_error = kExactTol * *r.reference;
      r.judge();
      out.push_back(r);
    } else {
      out.push_back(not_applicable(r, "needs c < 1"));
    }
  }
  {
    BoundReport r = base("reach_single", params, i0);
    const double eps = c > 1.0 ? std::min(0.1, 0.5 * epsilon_limit(c)) : 0.0;
    r.inputs["eps"] = eps;
    if (c <= 1.0) {
      out.push_back(not_applicable(r, "needs d > 1"));
    } else if (!(i0 < n * eps)) {
      out.push_back(not_applicable(r, "i0 >= n eps"));
    } else {
      if (!pd.reach) {
        pd.reach = reach_probability(pd.sys(), n * eps);
        pd.reach_eps = eps;
      }
      Bracket b = reach_bounds_single(params, ConditionCD::exact(params), eps, i);
      r.lower = b.lower;
      r.upper = b.upper;
      r.reference = pd.reach->value(i);
      r.reference_error = kExactTol;
      r.judge();
      out.push_back(r);
    }
  }
  {
    BoundReport r = base("duration_single", params, i0);
    r.inputs["m"] = k;
    double arg = 0.0;
    if (c < 1.0) {
      arg = best_j(params, i0, k);
      r.inputs["J"] = arg;
    } else if (c > 1.0) {
      arg = 0.5 * n / std::pow(c, k);
      r.inputs["x"] = arg;
    }
    DurationBounds db = duration_bounds_single(params, i0, k, arg);
    r.lower = db.lower;
    r.upper = db.upper;
    r.partial = db.partial;
    if (db.partial) r.note = "exponential term omitted (theta, K not configured)";
    r.reference = 1.0 - survival;
    r.reference_error = kExactTol;
    r.judge();
    out.push_back(r);
  }
  {
    BoundReport r = base("duration_limit", params, i0);
    r.inputs["m"] = k;
    Bracket b = duration_limits_ensemble(c, i0, k);
    r.lower = b.lower;
    r.upper = b.upper;
    r.reference = 1.0 - survival;
    r.reference_error = 0.02;
    r.note = "limit claim checked at finite n with slack 0.02";
    r.judge(true);
    out.push_back(r);
  }
  {
    BoundReport r = base("maxima", params, i0);
    const std::int64_t m = std::min<std::int64_t>(n - 1, 10 * i0);
    r.inputs["m"] = static_cast<double>(m);
    r.inputs["eps_m"] = cfg.slack.eps_m;
    r.partial = true;
    if (c > 1.0) {
      out.push_back(not_applicable(r, "needs np <= 1"));
    } else {
      const MaxDistribution md = max_distribution(pd.sys(), i);
      if (c == 1.0) {
        r.upper = maxima_tail_critical(i0, m, cfg.slack);
        r.reference = md.tail_at(static_cast<int>(m) + 1);
        r.reference_error = kExactTol;
        r.note = "slack eps_m is configuration";
        r.judge();
      } else {
        double worst = 0.0;
        const std::int64_t top = std::min<std::int64_t>(n - 1, i0 + 20);
        for (std::int64_t mm = i0 + 1; mm <= top; ++mm)
          worst = std::max(worst, maxima_scaled_subcritical(c, mm, md.tail_at(static_cast<int>(mm) + 1)));
        r.reference = worst;
        r.note = "sup over m of m alpha^m P(max > m); constant B is existential";
        r.satisfied = Verdict::inconclusive;
      }
      out.push_back(r);
    }
  }
  const DriftCheck dc = drift_check(params, i);
  {
    BoundReport r = base("drift_count", params, i0);
    r.upper = dc.count_bound;
    r.reference = dc.count_drift;
    r.reference_error = 1e-12 * std::max(1.0, dc.count_bound);
    r.judge();
    out.push_back(r);
  }
  {
    BoundReport r = base("drift_heterogeneity", params, i0);
    r.upper = dc.heterogeneity_bound;
    r.reference = dc.heterogeneity_drift;
    r.reference_error = 1e-12 * std::max(1.0, dc.heterogeneity_bound);
    r.judge();
    out.push_back(r);
  }
}

}  // namespace

std::vector<BoundReport> verify_grid(const GridConfig& cfg) {
  std::vector<BoundReport> out;
  for (int n : cfg.n) {
    for (double c : cfg.c) {
      PointData pd{ModelParams::from_c(n, c), cfg.digits, nullptr, {}, {}, 0.0};
      for (std::int64_t i0 : cfg.i0) {
        if (i0 >= n) throw std::domain_error("grid i0 must be below n");
        grid_point(pd, i0, cfg, out);
      }
    }
  }
  return out;
}

}  // namespace avalanche
