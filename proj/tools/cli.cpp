#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "transfit/dataset.hpp"
#include "transfit/error.hpp"
#include "transfit/fit_io.hpp"
#include "transfit/inference.hpp"
#include "transfit/nested.hpp"
#include "transfit/simulation.hpp"

namespace transfit::cli {

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

double parse_double(const std::string& text, const std::string& what) {
  double x = 0.0;
  const char* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, x);
  if (res.ec != std::errc() || res.ptr != end || !std::isfinite(x)) {
    throw UsageError(what + ": not a finite number: '" + text + "'");
  }
  return x;
}

std::vector<double> parse_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(parse_double(cell, what));
  if (out.empty()) throw UsageError(what + ": empty list");
  return out;
}

unsigned default_threads() {
  if (const char* env = std::getenv("TRANSFIT_THREADS")) {
    unsigned v = 0;
    const std::string s(env);
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec == std::errc() && res.ptr == s.data() + s.size() && v > 0) return v;
    throw UsageError("TRANSFIT_THREADS must be a positive integer, got '" + s + "'");
  }
  return 1;
}

// Writes via `emit` to --out when given, otherwise to the provided stream.
template <class Emit>
void write_output(const std::string& path, std::ostream& fallback, Emit emit) {
  if (path.empty()) {
    emit(fallback);
    return;
  }
  std::ofstream f(path);
  if (!f) throw UsageError("cannot open '" + path + "' for writing");
  emit(f);
  if (!f) throw UsageError("write to '" + path + "' failed");
}

struct SimFlags {
  std::string config = "C1";
  double alpha = 0.0;
  int n = 100;
  std::optional<std::uint64_t> seed;
  std::string beta;

  void add(CLI::App* cmd) {
    cmd->add_option("--config", config, "Simulation configuration C1, C2 or C3")
        ->check(CLI::IsMember({"C1", "C2", "C3", "c1", "c2", "c3"}));
    cmd->add_option("--alpha", alpha, "Generating link parameter alpha >= 0")
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--n", n, "Subjects per dataset")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", seed, "Master seed (required)")->required();
    cmd->add_option("--beta", beta, "True coefficients b1,b2 (default: configuration's)");
  }

  SimConfig config_value() const {
    SimConfig sc = SimConfig::make(parse_scenario(config), alpha, n, *seed);
    if (!beta.empty()) {
      const auto b = parse_list(beta, "--beta");
      if (b.size() != 2) throw UsageError("--beta: expected two values");
      sc.beta_true << b[0], b[1];
    }
    return sc;
  }
};

}  // namespace

double parse_link(const std::string& text) {
  if (text == "ph") return 0.0;
  if (text == "po") return 1.0;
  if (text.rfind("alpha=", 0) == 0) {
    const double a = parse_double(text.substr(6), "--link");
    if (a < 0.0) throw UsageError("--link: alpha must be >= 0");
    return a;
  }
  throw UsageError("--link: expected ph, po or alpha=<x>, got '" + text + "'");
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Transformation models for interval-censored data"};
  app.name("transfit");
  app.require_subcommand(1);

  std::string out_path;
  std::string link_text = "ph";
  std::string data_path;
  std::optional<std::size_t> knots;
  double lambda_init = 1.0;
  unsigned threads = 0;
  int reps = 0;

  // fit
  std::string summary_path;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a dataset CSV; writes FitResult JSON");
  fit_cmd->add_option("--data", data_path, "Dataset CSV")->required();
  fit_cmd->add_option("--link", link_text, "ph, po or alpha=<x>");
  fit_cmd->add_option("--knots", knots, "Interior knot count (default ceil(n^(1/3)))")
      ->check(CLI::PositiveNumber);
  fit_cmd->add_option("--lambda-init", lambda_init, "Starting smoothing parameter")
      ->check(CLI::PositiveNumber);
  fit_cmd->add_option("--out", out_path, "JSON output file (default stdout)");
  fit_cmd->add_option("--summary", summary_path,
                      "Coefficient table CSV (default stdout when --out is given)");

  // simulate
  SimFlags sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Write a simulated dataset CSV");
  sim.add(sim_cmd);
  sim_cmd->add_option("--out", out_path, "Output file (default stdout)");

  // mc-table
  SimFlags mc;
  std::optional<double> fit_alpha;
  auto* mc_cmd = app.add_subcommand("mc-table", "Monte Carlo bias/SD/ASE/MSE/CP95 table");
  mc.add(mc_cmd);
  mc_cmd->add_option("--reps", reps, "Replications")->required()->check(CLI::PositiveNumber);
  mc_cmd->add_option("--knots", knots, "Interior knot count override")
      ->check(CLI::PositiveNumber);
  mc_cmd->add_option("--fit-alpha", fit_alpha, "Link used for fitting (default: generating)")
      ->check(CLI::NonNegativeNumber);
  mc_cmd->add_option("--threads", threads, "Worker threads (default TRANSFIT_THREADS or 1)")
      ->check(CLI::PositiveNumber);
  mc_cmd->add_option("--out", out_path, "Output file (default stdout)");

  // bootstrap-band
  std::optional<std::uint64_t> boot_seed;
  std::string grid_text;
  int grid_points = 50;
  auto* boot_cmd = app.add_subcommand("bootstrap-band", "Pointwise percentile band for phi");
  boot_cmd->add_option("--data", data_path, "Dataset CSV")->required();
  boot_cmd->add_option("--link", link_text, "ph, po or alpha=<x>");
  boot_cmd->add_option("--reps", reps, "Bootstrap resamples (>= 2)")
      ->required()
      ->check(CLI::Range(2, 1000000));
  boot_cmd->add_option("--seed", boot_seed, "Master seed (required)")->required();
  boot_cmd->add_option("--grid", grid_text, "Comma-separated time points");
  boot_cmd->add_option("--grid-points", grid_points,
                       "Evenly spaced points over the observed range (when --grid is absent)")
      ->check(CLI::Range(2, 100000));
  boot_cmd->add_option("--knots", knots, "Interior knot count override")
      ->check(CLI::PositiveNumber);
  boot_cmd->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  boot_cmd->add_option("--out", out_path, "Output file (default stdout)");

  // power
  SimFlags pw;
  std::string beta1_grid = "-1,-0.5,0,0.5,1";
  auto* power_cmd = app.add_subcommand("power", "Wald-test rejection rates over a beta1 grid");
  pw.add(power_cmd);
  power_cmd->add_option("--reps", reps, "Replications per grid point")
      ->required()
      ->check(CLI::PositiveNumber);
  power_cmd->add_option("--grid", beta1_grid, "Comma-separated beta1 values");
  power_cmd->add_option("--knots", knots, "Interior knot count override")
      ->check(CLI::PositiveNumber);
  power_cmd->add_option("--fit-alpha", fit_alpha, "Link used for fitting")
      ->check(CLI::NonNegativeNumber);
  power_cmd->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  power_cmd->add_option("--out", out_path, "Output file (default stdout)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kSuccess;
    }
    for (auto* sub : app.get_subcommands()) {
      if (sub->get_help_ptr() && sub->get_help_ptr()->count() > 0) {
        out << sub->help();
        return kSuccess;
      }
    }
    err << "error: " << e.what() << '\n';
    return kUsageError;
  }

  try {
    if (threads == 0) threads = default_threads();
    FitOptions fit_options;
    fit_options.lambda_init = lambda_init;
    fit_options.interior_knots = knots;

    if (fit_cmd->parsed()) {
      const LinkSpec link{parse_link(link_text)};
      const Dataset ds = load_dataset(data_path);
      const FitResult f = fit(ds, link, fit_options);
      for (const auto& m : f.diagnostics.messages) err << "warning: " << m << '\n';
      write_output(out_path, out, [&](std::ostream& os) { os << fit_to_json(f) << '\n'; });
      if (!summary_path.empty()) {
        write_output(summary_path, out, [&](std::ostream& os) { write_fit_summary(os, f); });
      } else if (!out_path.empty()) {
        write_fit_summary(out, f);
      }
      if (!f.converged) {
        err << "error: fit did not produce standard errors (singular information)\n";
        return kNumericalFailure;
      }
    } else if (sim_cmd->parsed()) {
      const Dataset ds = simulate_dataset(sim.config_value());
      write_output(out_path, out, [&](std::ostream& os) { write_dataset(os, ds); });
    } else if (mc_cmd->parsed()) {
      const SimConfig sc = mc.config_value();
      McOptions opt;
      opt.threads = threads;
      opt.fit_alpha = fit_alpha;
      opt.fit = fit_options;
      const MCSummary s = mc_replicate(sc, reps, knots, opt);
      if (s.flagged) {
        err << "warning: " << s.failures << " of " << s.replications
            << " replications failed (more than 10%)\n";
      }
      const std::vector<McTableRow> rows{{sc, fit_alpha.value_or(sc.alpha), knots, s}};
      write_output(out_path, out, [&](std::ostream& os) { write_mc_csv(os, rows); });
    } else if (boot_cmd->parsed()) {
      const LinkSpec link{parse_link(link_text)};
      const Dataset ds = load_dataset(data_path);
      std::vector<double> grid;
      if (!grid_text.empty()) {
        grid = parse_list(grid_text, "--grid");
      } else {
        const auto pool = ds.finite_endpoints();
        const auto [lo, hi] = std::minmax_element(pool.begin(), pool.end());
        for (int k = 0; k < grid_points; ++k) {
          grid.push_back(*lo + (*hi - *lo) * k / (grid_points - 1));
        }
      }
      BootstrapOptions opt;
      opt.fit = fit_options;
      opt.threads = threads;
      const PointwiseBand band = bootstrap_band(ds, link, grid, reps, *boot_seed, opt);
      if (band.failures > 0) {
        err << "warning: " << band.failures << " of " << band.replicates
            << " resamples failed and were dropped\n";
      }
      write_output(out_path, out, [&](std::ostream& os) { write_band_csv(os, band); });
    } else if (power_cmd->parsed()) {
      const SimConfig sc = pw.config_value();
      McOptions opt;
      opt.threads = threads;
      opt.fit_alpha = fit_alpha;
      opt.fit = fit_options;
      const auto curve = power_curve(sc, parse_list(beta1_grid, "--grid"), reps, opt);
      write_output(out_path, out, [&](std::ostream& os) { write_power_csv(os, sc, curve); });
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << '\n';
    return kNumericalFailure;
  } catch (const std::runtime_error& e) {
    // file I/O
    err << "error: " << e.what() << '\n';
    return kUsageError;
  }
  return kSuccess;
}

}  // namespace transfit::cli
