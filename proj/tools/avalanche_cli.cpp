#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

#include <CLI11.hpp>

#include "avalanche/harness.hpp"

using namespace avalanche;

namespace {

const char* kSchemas = R"(Output schemas (CSV: comma separated, header row, decimal strings;
JSON: UTF-8 with a schema_version field):
  simulate       replicate,T,S,max,truncated  then rows mean/stderr/ci_low/ci_high
                 over non-truncated replicates (truncated column holds the count)
  exact          <out>/expected_duration.csv, expected_size.csv, reach.csv:
                 i,value,residual,digits; <out>/duration_cdf.csv: i,m,cdf
  figure         c,i0,expected_duration
  verify         {schema_version, command, grid, reports[], limit_checks[], summary};
                 report = {name, inputs, lower, upper, reference, reference_error,
                 satisfied: holds|violated|inconclusive, partial, note}
  deterministic  <out>/mean_field.csv: k,psi,phi,b,v; <out>/concentration.json:
                 {schema_version, command, lambda, psi0, limit, map, stability, envelopes[]}
  couple         replicate,steps,ordered,x_duration,z_extinct,diverge_step
Exit status of verify is nonzero iff a report is violated or more than 1% of
Monte Carlo walks in a limit check were truncated.)";

// Stream to a file, or stdout when the path is empty.
struct Sink {
  std::unique_ptr<std::ofstream> file;
  std::ostream& get() { return file ? *file : std::cout; }
  explicit Sink(const std::string& path) {
    if (path.empty()) return;
    file = std::make_unique<std::ofstream>(path);
    if (!*file) throw std::runtime_error("cannot write " + path);
  }
};

void model_options(CLI::App* sub, ExperimentConfig& cfg) {
  sub->add_option("--n", cfg.n, "number of nodes")->capture_default_str();
  auto* p = sub->add_option("--p", cfg.p, "excitation probability");
  auto* c = sub->add_option("--c", cfg.c, "intensity np, sets p = c/n");
  p->excludes(c);
  c->excludes(p);
  sub->add_option("--i0", cfg.i0, "initial excited count")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Avalanche model: simulation, exact solves and bound checks"};
  app.footer(kSchemas);
  app.set_config("--config", "", "INI/TOML config file; command-line flags take precedence");
  app.require_subcommand(1);
  app.fallthrough();

  ExperimentConfig cfg;
  app.add_option("--seed", cfg.seed, "master seed")->capture_default_str();
  app.add_option("--workers", cfg.workers, "worker threads")->capture_default_str();
  app.add_option("--out", cfg.out, "output file or directory");

  auto* sim = app.add_subcommand("simulate", "Monte Carlo trajectories");
  model_options(sim, cfg);
  sim->add_option("--reps", cfg.reps, "replicates")->capture_default_str();
  sim->add_option("--max-steps", cfg.max_steps, "truncation horizon")->capture_default_str();

  auto* exact = app.add_subcommand("exact", "high-precision absorbing-chain solves");
  model_options(exact, cfg);
  exact->add_option("--digits", cfg.digits, "decimal digits")->capture_default_str();
  exact->add_option("--J", cfg.J, "reach level for h_J");
  exact->add_option("--m", cfg.m_list, "duration horizons for P(T <= m)");

  auto* fig = app.add_subcommand("figure", "E(T | i0) curves over a list of intensities");
  fig->add_option("--n", cfg.n, "number of nodes")->capture_default_str();
  fig->add_option("--c-list", cfg.c_list, "intensities")->capture_default_str();
  fig->add_option("--i0-max", cfg.i0_max, "largest initial count")->capture_default_str();
  fig->add_option("--digits", cfg.digits, "decimal digits")->capture_default_str();

  auto* ver = app.add_subcommand("verify", "bound verification campaign");
  GridConfig grid;
  ver->add_option("--grid-n", grid.n, "network sizes")->capture_default_str();
  ver->add_option("--grid-c", grid.c, "intensities")->capture_default_str();
  ver->add_option("--grid-i0", grid.i0, "initial counts")->capture_default_str();
  ver->add_option("--digits", grid.digits, "decimal digits of the exact comparators")
      ->capture_default_str();
  ver->add_option("--eps-m", grid.slack.eps_m, "slack for the maxima envelopes")
      ->capture_default_str();
  ver->add_option("--reps", cfg.reps, "replicates per Monte Carlo limit check")
      ->capture_default_str();

  auto* det = app.add_subcommand("deterministic", "mean-field tables and concentration checks");
  det->add_option("--lambda", cfg.lambda, "ensemble intensity")->capture_default_str();
  det->add_option("--psi0", cfg.psi0, "initial fraction")->capture_default_str();
  det->add_option("--steps", cfg.steps, "table length")->capture_default_str();
  det->add_option("--n", cfg.n, "network size for the envelopes")->capture_default_str();
  det->add_option("--delta", cfg.delta, "envelope width")->capture_default_str();
  det->add_option("--m", cfg.m, "envelope horizon")->capture_default_str();
  det->add_option("--reps", cfg.reps, "Monte Carlo replicates")->capture_default_str();

  auto* cpl = app.add_subcommand("couple", "monotone and maximal couplings");
  model_options(cpl, cfg);
  cpl->add_option("--reps", cfg.reps, "replicates")->capture_default_str();
  cpl->add_option("--max-steps", cfg.max_steps, "truncation horizon")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) {
      Sink sink(cfg.out);
      SimulateSummary s = cmd_simulate(cfg, sink.get());
      std::fprintf(stderr, "E(T) = %.6g +- %.2g, truncated %lld of %lld\n", s.duration.estimate,
                   s.duration.stderr_, static_cast<long long>(s.truncated),
                   static_cast<long long>(s.replicates));
      return s.truncated_fraction() > 0.01 ? 3 : 0;
    }
    if (exact->parsed()) {
      ExactOutcome o = cmd_exact(cfg);
      for (const auto& f : o.files) std::fprintf(stderr, "wrote %s\n", f.c_str());
      std::fprintf(stderr, "max residual log10 %.1f\n", o.max_residual_log10);
      return 0;
    }
    if (fig->parsed()) {
      Sink sink(cfg.out);
      for (const FigureCurve& c : cmd_figure(cfg, sink.get()))
        std::fprintf(stderr, "c=%g increasing=%d spread=%.4g\n", c.c, c.increasing ? 1 : 0,
                     c.relative_spread);
      return 0;
    }
    if (ver->parsed()) {
      Sink sink(cfg.out);
      VerifyOutcome o = cmd_verify(cfg, grid, sink.get());
      std::fprintf(stderr, "%zu reports, %lld violated%s\n", o.reports.size() + o.limit_checks.size(),
                   static_cast<long long>(o.violated),
                   o.truncation_failure ? ", truncation above 1%" : "");
      return o.failed() ? 1 : 0;
    }
    if (det->parsed()) {
      if (cfg.out.empty()) {
        cmd_deterministic(cfg, std::cout, std::cout);
      } else {
        std::filesystem::create_directories(cfg.out);
        Sink csv((std::filesystem::path(cfg.out) / "mean_field.csv").string());
        Sink json((std::filesystem::path(cfg.out) / "concentration.json").string());
        cmd_deterministic(cfg, csv.get(), json.get());
      }
      return 0;
    }
    if (cpl->parsed()) {
      Sink sink(cfg.out);
      CoupleSummary s = cmd_couple(cfg, sink.get());
      std::fprintf(stderr, "%lld steps, %lld order violations, %lld divergences\n",
                   static_cast<long long>(s.steps), static_cast<long long>(s.order_violations),
                   static_cast<long long>(s.divergences));
      return s.order_violations ? 1 : 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
