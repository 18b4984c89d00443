#include "avalanche/harness.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <json.hpp>
#include <mpfr.h>

#include "avalanche/branching.hpp"
#include "avalanche/coupling.hpp"
#include "avalanche/exact_solver.hpp"
#include "avalanche/mean_field.hpp"

namespace avalanche {

namespace {

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

double log10_abs(const Real& x) {
  mpfr_srcptr v = x.backend().data();
  if (mpfr_zero_p(v)) return -std::numeric_limits<double>::infinity();
  long e = 0;
  const double d = mpfr_get_d_2exp(&e, v, MPFR_RNDN);
  return std::log10(std::abs(d)) + static_cast<double>(e) * std::log10(2.0);
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  return f;
}

void check_stream(std::ostream& os, const std::string& what) {
  if (!os) throw std::runtime_error("write failed: " + what);
}

}  // namespace

ModelParams ExperimentConfig::params() const {
  if (p && c) throw std::invalid_argument("--p and --c are mutually exclusive");
  if (c) return ModelParams::from_c(n, *c);
  if (p) return ModelParams(n, *p);
  throw std::invalid_argument("one of --p or --c is required");
}

void ExperimentConfig::validate() const {
  if (reps < 1) throw std::invalid_argument("reps must be at least 1");
  if (workers < 1) throw std::invalid_argument("workers must be at least 1");
  if (digits < 50) throw std::invalid_argument("digits must be at least 50");
  if (max_steps < 1) throw std::invalid_argument("max_steps must be positive");
  if (p || c) {
    params();
    if (i0 < 1 || i0 >= n) throw std::invalid_argument("i0 must lie in [1, n-1]");
  }
}

SimulateSummary cmd_simulate(const ExperimentConfig& cfg, std::ostream& csv) {
  cfg.validate();
  const ModelParams params = cfg.params();
  struct Row {
    std::int64_t t, s, max;
    bool truncated;
  };
  SimulateOptions opts;
  opts.max_steps = cfg.max_steps;
  opts.record_states = false;
  std::optional<KernelSampler> sampler;
  if (params.n() <= KernelSampler::kMaxN) sampler.emplace(params);
  const auto rows = run_replicates<Row>(cfg.reps, cfg.workers, [&](std::int64_t r) {
    Rng rng = make_stream(cfg.seed, static_cast<std::uint64_t>(r));
    const int i0 = static_cast<int>(cfg.i0);
    Trajectory t = sampler ? simulate_count(*sampler, i0, rng, opts)
                           : simulate_count(params, i0, rng, opts);
    return Row{t.duration, t.size, t.max, t.truncated()};
  });

  csv << "replicate,T,S,max,truncated\n";
  std::vector<double> ts, ss, ms;
  SimulateSummary sum;
  sum.replicates = cfg.reps;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const Row& row = rows[r];
    csv << r << ',' << row.t << ',' << row.s << ',' << row.max << ',' << (row.truncated ? 1 : 0)
        << '\n';
    if (row.truncated) {
      ++sum.truncated;
      continue;
    }
    ts.push_back(static_cast<double>(row.t));
    ss.push_back(static_cast<double>(row.s));
    ms.push_back(static_cast<double>(row.max));
  }
  if (!ts.empty()) {
    sum.duration = EstimateWithCI::from_samples(ts);
    sum.size = EstimateWithCI::from_samples(ss);
    sum.max = EstimateWithCI::from_samples(ms);
  }
  auto line = [&](const char* label, auto get) {
    csv << label << ',' << fmt(get(sum.duration)) << ',' << fmt(get(sum.size)) << ','
        << fmt(get(sum.max)) << ',' << sum.truncated << '\n';
  };
  line("mean", [](const EstimateWithCI& e) { return e.estimate; });
  line("stderr", [](const EstimateWithCI& e) { return e.stderr_; });
  line("ci_low", [](const EstimateWithCI& e) { return e.ci_low(); });
  line("ci_high", [](const EstimateWithCI& e) { return e.ci_high(); });
  check_stream(csv, "simulate csv");
  return sum;
}

ExactOutcome cmd_exact(const ExperimentConfig& cfg) {
  cfg.validate();
  const ModelParams params = cfg.params();
  if (params.n() > kMaxExactN) throw std::invalid_argument("exact solver is limited to n <= 2000");
  PrecisionConfig pc;
  pc.decimal_digits = cfg.digits;
  const SubstochasticSystem sys(params, pc);
  const std::filesystem::path dir = cfg.out.empty() ? "." : cfg.out;
  std::filesystem::create_directories(dir);
  ExactOutcome outcome{{}, -std::numeric_limits<double>::infinity()};

  auto write_solution = [&](const std::string& name, const SolveResult& res) {
    const auto path = dir / name;
    std::ofstream f = open_out(path);
    f << "i,value,residual,digits\n";
    const std::string residual = to_decimal(res.residual, 6);
    for (std::size_t k = 0; k < res.values.size(); ++k)
      f << k + 1 << ',' << to_decimal(res.values[k], res.digits) << ',' << residual << ','
        << res.digits << '\n';
    check_stream(f, path.string());
    outcome.files.push_back(path.string());
    outcome.max_residual_log10 = std::max(outcome.max_residual_log10, log10_abs(res.residual));
  };
  write_solution("expected_duration.csv", expected_duration(sys));
  write_solution("expected_size.csv", expected_size(sys));
  if (cfg.J) write_solution("reach.csv", reach_probability(sys, *cfg.J));
  if (!cfg.m_list.empty()) {
    const std::int64_t top = *std::max_element(cfg.m_list.begin(), cfg.m_list.end());
    if (top < 0) throw std::invalid_argument("duration horizons must be non-negative");
    const auto series = duration_survival_series(sys, top);
    const auto path = dir / "duration_cdf.csv";
    std::ofstream f = open_out(path);
    f << "i,m,cdf\n";
    Real one = sys.make();
    mpfr_set_ui(one.backend().data(), 1, MPFR_RNDN);
    for (std::int64_t m : cfg.m_list) {
      if (m < 0) throw std::invalid_argument("duration horizons must be non-negative");
      const auto& row = series[static_cast<std::size_t>(m)];
      for (std::size_t k = 0; k < row.size(); ++k) {
        Real cdf = sys.make();
        mpfr_sub(cdf.backend().data(), one.backend().data(), row[k].backend().data(), MPFR_RNDN);
        f << k + 1 << ',' << m << ',' << to_decimal(cdf, cfg.digits) << '\n';
      }
    }
    check_stream(f, path.string());
    outcome.files.push_back(path.string());
  }
  return outcome;
}

std::vector<FigureCurve> cmd_figure(const ExperimentConfig& cfg, std::ostream& csv) {
  if (cfg.n < 3 || cfg.n > kMaxExactN) throw std::invalid_argument("figure needs 3 <= n <= 2000");
  if (cfg.digits < 50) throw std::invalid_argument("digits must be at least 50");
  PrecisionConfig pc;
  pc.decimal_digits = cfg.digits;
  const int top = std::min(cfg.i0_max, cfg.n - 1);
  csv << "c,i0,expected_duration\n";
  std::vector<FigureCurve> curves;
  for (double c : cfg.c_list) {
    const ModelParams params = ModelParams::from_c(cfg.n, c);
    const SubstochasticSystem sys(params, pc);
    const SolveResult res = expected_duration(sys);
    FigureCurve curve{c, {}, true, 0.0};
    for (int i = 1; i <= top; ++i) {
      const Real& v = res.values[static_cast<std::size_t>(i - 1)];
      csv << fmt(c) << ',' << i << ',' << to_decimal(v, 30) << '\n';
      curve.expected_duration.push_back(v.convert_to<double>());
    }
    const auto& e = curve.expected_duration;
    for (std::size_t k = 1; k < e.size(); ++k)
      if (!(e[k] > e[k - 1])) curve.increasing = false;
    if (e.size() >= 2) {
      const auto [lo, hi] = std::minmax_element(e.begin() + 1, e.end());
      curve.relative_spread = (*hi - *lo) / *lo;
    }
    curves.push_back(std::move(curve));
  }
  check_stream(csv, "figure csv");
  return curves;
}

LimitCheck reach_limit_check(int n, double lambda, int i, std::int64_t J, double tolerance,
                             std::int64_t reps, std::uint64_t seed, int workers,
                             bool asymptotic, std::int64_t max_steps) {
  if (!(lambda > 1.0)) throw std::domain_error("reach limit needs lambda > 1");
  if (i < 1 || J <= i || J >= n) throw std::domain_error("reach limit needs 1 <= i < J < n");
  const ModelParams params = ModelParams::from_c(n, lambda);
  // 0: absorbed first, 1: reached J, 2: undecided at the step cap.
  const auto outcomes = run_replicates<int>(reps, workers, [&](std::int64_t r) {
    Rng rng = make_stream(seed, static_cast<std::uint64_t>(r),
                          static_cast<std::uint64_t>(J) * 1000 + static_cast<std::uint64_t>(i));
    int x = i;
    for (std::int64_t k = 0; k < max_steps; ++k) {
      x = step_count(params, x, rng);
      if (x == 0) return 0;
      if (x >= J) return 1;
    }
    return 2;
  });
  std::int64_t hits = 0, decided = 0, truncated = 0;
  for (int o : outcomes) {
    if (o == 2) {
      ++truncated;
      continue;
    }
    ++decided;
    hits += o;
  }
  LimitCheck out;
  out.truncated_fraction = static_cast<double>(truncated) / static_cast<double>(reps);
  BoundReport& r = out.report;
  r.name = asymptotic ? "reach_limit_far" : "reach_limit";
  r.inputs = {{"n", n}, {"lambda", lambda}, {"i", i}, {"J", static_cast<double>(J)},
              {"tolerance", tolerance}, {"reps", static_cast<double>(reps)}};
  const double target = -std::expm1(i * std::log(extinction_prob(lambda)));
  r.lower = target - tolerance;
  r.upper = target + tolerance;
  if (decided > 0) {
    const EstimateWithCI est = EstimateWithCI::proportion(hits, decided);
    r.reference = est.estimate;
    r.reference_error = 3.0 * est.stderr_;
  }
  r.judge(asymptotic);
  if (out.truncated_fraction > 0.01) {
    r.satisfied = Verdict::inconclusive;
    r.note = "truncated fraction " + fmt(out.truncated_fraction) + " exceeds 1%";
  }
  return out;
}

VerifyOutcome cmd_verify(const ExperimentConfig& cfg, const GridConfig& grid, std::ostream& json) {
  if (cfg.reps < 1 || cfg.workers < 1) throw std::invalid_argument("reps and workers must be positive");
  VerifyOutcome out;
  out.reports = verify_grid(grid);
  const int n_near = 4000;
  const auto J_near = static_cast<std::int64_t>(std::floor(std::sqrt(static_cast<double>(n_near))));
  for (int i = 1; i <= 5; ++i)
    out.limit_checks.push_back(
        reach_limit_check(n_near, 1.5, i, J_near, 0.03, cfg.reps, cfg.seed, cfg.workers, false));
  for (int i = 1; i <= 3; ++i)
    out.limit_checks.push_back(
        reach_limit_check(1000, 5.0, i, 500, 0.03, cfg.reps, cfg.seed, cfg.workers, true));

  nlohmann::json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["command"] = "verify";
  doc["grid"] = {{"n", grid.n}, {"c", grid.c}, {"i0", grid.i0}, {"digits", grid.digits},
                 {"k", grid.k}, {"eps_m", grid.slack.eps_m}};
  std::map<std::string, std::int64_t> counts{{"holds", 0}, {"violated", 0}, {"inconclusive", 0}};
  std::int64_t partial = 0;
  doc["reports"] = nlohmann::json::array();
  for (const auto& r : out.reports) {
    doc["reports"].push_back(r);
    ++counts[verdict_name(r.satisfied)];
    partial += r.partial;
  }
  doc["limit_checks"] = nlohmann::json::array();
  for (const auto& lc : out.limit_checks) {
    nlohmann::json j = lc.report;
    j["truncated_fraction"] = lc.truncated_fraction;
    doc["limit_checks"].push_back(j);
    ++counts[verdict_name(lc.report.satisfied)];
    if (lc.truncated_fraction > 0.01) out.truncation_failure = true;
  }
  out.violated = counts["violated"];
  doc["summary"] = {{"holds", counts["holds"]},
                    {"violated", counts["violated"]},
                    {"inconclusive", counts["inconclusive"]},
                    {"partial", partial},
                    {"truncation_failure", out.truncation_failure}};
  json << doc.dump(2) << '\n';
  check_stream(json, "verify json");
  return out;
}

void cmd_deterministic(const ExperimentConfig& cfg, std::ostream& csv, std::ostream& json) {
  const double lambda = cfg.lambda;
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
  const MeanFieldPath path = iterate_mean_field(lambda, cfg.psi0, cfg.steps);
  csv << "k,psi,phi,b,v\n";
  for (std::size_t k = 0; k < path.psi.size(); ++k) {
    const double x = path.psi[k];
    csv << k << ',' << fmt(x) << ',' << fmt(path.phi[k]) << ',' << fmt(path.branching_factor[k])
        << ',' << fmt(g_map(lambda, x) * std::exp(-lambda * x)) << '\n';
  }
  check_stream(csv, "deterministic csv");

  nlohmann::json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["command"] = "deterministic";
  doc["lambda"] = lambda;
  doc["psi0"] = cfg.psi0;
  const MeanFieldLimit lim = mean_field_limit(lambda, cfg.psi0);
  doc["limit"] = {{"value", lim.value}, {"steps", lim.steps}, {"converged", lim.converged}};
  const MapParams mp = MapParams::at(lambda);
  doc["map"] = {{"alpha", mp.alpha}, {"nu", mp.nu}, {"chi", mp.chi}};
  doc["map"]["zeta"] = mp.zeta ? nlohmann::json(*mp.zeta) : nlohmann::json(nullptr);
  if (lambda > 1.0) {
    const StabilityInterval s = stability_interval(lambda);
    doc["stability"] = {{"a", s.a},     {"b", s.b},   {"eps", s.eps}, {"rho", s.rho},
                        {"gamma", s.gamma}, {"x1", s.x1}};
  }
  std::vector<EnvelopeKind> kinds;
  if (lambda > 1.0)
    kinds = {EnvelopeKind::supercritical_tracking};
  else if (lambda < 1.0)
    kinds = {EnvelopeKind::hitting, EnvelopeKind::subcritical_tracking};
  else
    kinds = {EnvelopeKind::hitting};
  auto kind_name = [](EnvelopeKind k) {
    switch (k) {
      case EnvelopeKind::supercritical_tracking: return "supercritical_tracking";
      case EnvelopeKind::hitting: return "hitting";
      case EnvelopeKind::subcritical_tracking: return "subcritical_tracking";
    }
    return "?";
  };
  doc["envelopes"] = nlohmann::json::array();
  for (EnvelopeKind kind : kinds) {
    nlohmann::json e = {{"kind", kind_name(kind)}, {"n", cfg.n}, {"delta", cfg.delta}};
    try {
      const Envelope env = concentration_envelope(cfg.n, lambda, cfg.psi0, cfg.delta, cfg.m, kind);
      const EstimateWithCI emp = stay_probability(cfg.n, lambda, cfg.psi0, cfg.delta, env.m, kind,
                                                  static_cast<int>(cfg.reps), cfg.seed);
      e["m"] = env.m;
      e["gamma"] = env.gamma;
      e["rho"] = env.rho;
      e["bound"] = env.bound;
      e["linear"] = env.linear;
      e["conservative_gamma"] = env.conservative_gamma;
      e["conservative_bound"] = env.conservative_bound;
      e["deterministic_below"] = env.deterministic_below;
      e["empirical"] = {{"estimate", emp.estimate}, {"stderr", emp.stderr_}, {"count", emp.count}};
      e["exceeded"] = emp.estimate + 3.0 * emp.stderr_ < env.bound;
      e["conservative_exceeded"] = emp.estimate + 3.0 * emp.stderr_ < env.conservative_bound;
    } catch (const std::domain_error& err) {
      e["error"] = err.what();
    }
    doc["envelopes"].push_back(e);
  }
  json << doc.dump(2) << '\n';
  check_stream(json, "deterministic json");
}

CoupleSummary cmd_couple(const ExperimentConfig& cfg, std::ostream& csv) {
  cfg.validate();
  const ModelParams params = cfg.params();
  const double c = -(params.n() - 1) * params.log_q();
  CoupledOptions opts;
  opts.max_steps = cfg.max_steps;
  struct Row {
    std::int64_t steps;
    bool ordered;
    std::int64_t x_duration;
    bool z_extinct;
    std::int64_t diverge;
  };
  const int i0 = static_cast<int>(cfg.i0);
  const auto rows = run_replicates<Row>(cfg.reps, cfg.workers, [&](std::int64_t r) {
    Rng rng = make_stream(cfg.seed, static_cast<std::uint64_t>(r));
    const CoupledPath path = simulate_coupled(params, c, i0, rng, opts);
    Row row{static_cast<std::int64_t>(path.x_seq.size()) - 1, true, -1,
            path.status == PathStatus::absorbed, -1};
    for (std::size_t k = 0; k < path.x_seq.size(); ++k) {
      if (!(path.x_seq[k] <= path.q_seq[k] && path.q_seq[k] <= path.z_seq[k])) row.ordered = false;
      if (row.x_duration < 0 && path.x_seq[k] == 0) row.x_duration = static_cast<std::int64_t>(k);
    }
    Rng rng2 = make_stream(cfg.seed, static_cast<std::uint64_t>(r), 1);
    const CoupledPath mc = simulate_maximal_coupled(params, i0, rng2, opts);
    if (mc.tau) row.diverge = *mc.tau;
    return row;
  });
  csv << "replicate,steps,ordered,x_duration,z_extinct,diverge_step\n";
  CoupleSummary sum;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const Row& row = rows[r];
    csv << r << ',' << row.steps << ',' << row.ordered << ',' << row.x_duration << ','
        << row.z_extinct << ',' << row.diverge << '\n';
    sum.steps += row.steps;
    sum.order_violations += !row.ordered;
    sum.divergences += row.diverge >= 0;
  }
  check_stream(csv, "couple csv");
  return sum;
}

}  // namespace avalanche
