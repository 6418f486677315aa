#include "losscost_tools/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "losscost/cost_dist.hpp"
#include "losscost/error.hpp"
#include "losscost/howard.hpp"
#include "losscost/mc_sim.hpp"
#include "losscost/stationary.hpp"
#include "losscost/statistics.hpp"
#include "losscost_tools/csv.hpp"
#include "losscost_tools/model_io.hpp"

#ifndef LOSSCOST_VERSION
#define LOSSCOST_VERSION "unknown"
#endif

namespace losscost::tools {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Options {
  std::string model;
  std::string out = "losscost_out";
  std::optional<double> t;
  std::optional<int> steps;
  std::optional<int> rmax;
  std::string method = "exact";
  int terms = 6;
  long long reps = 1000;
  std::uint64_t seed = 1;
  std::string scheme;
};

struct Run {
  std::string command;
  Options opt;
  Model model;
  StateSpace space = StateSpace::from_states(1, {{0}}, {0});
  fs::path dir;
  std::vector<std::string> warnings;
  json flags = json::object();
  std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();

  void warn(std::string message) { warnings.push_back(std::move(message)); }
  fs::path file(const std::string& name) const { return dir / name; }
};

void write_manifest(const Run& run) {
  const auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                     run.started)
                           .count();
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  json m;
  m["tool"] = "losscost";
  m["version"] = LOSSCOST_VERSION;
  m["command"] = run.command;
  m["model_path"] = run.opt.model;
  m["model"] = run.model.document;
  m["output_dir"] = run.opt.out;
  m["flags"] = run.flags;
  m["seed"] = run.opt.seed;
  m["policy"] = policy_name(run.model.policy);
  m["states"] = run.space.size();
  m["started_at"] = stamp;
  m["wall_clock_seconds"] = elapsed;
  m["warnings"] = run.warnings;
  std::ofstream f(run.file("manifest_" + run.command + ".json"));
  f << m.dump(2) << '\n';
}

// --- stationary ------------------------------------------------------------

void cmd_stationary(Run& run) {
  const auto& classes = run.model.classes;
  const auto st = stationary(run.space, classes);
  {
    CsvWriter w(run.file("pi.csv"), {"state", "probability"});
    for (std::size_t i = 0; i < run.space.size(); ++i) {
      w.field(run.space.label(i)).field(st.pi[i]);
      w.end_row();
    }
    w.close();
  }
  const auto blocking = blocking_probabilities(run.space, st.pi);
  CsvWriter w(run.file("summary.csv"), {"quantity", "class", "value"});
  double G = std::numeric_limits<double>::infinity();
  try {
    G = st.G();
  } catch (const NumericError&) {
    run.warn("normalization constant overflows a double; see log_G");
  }
  w.field("G").field("").field(G);
  w.end_row();
  w.field("log_G").field("").field(st.log_G);
  w.end_row();
  w.field("g").field("").field(st.g);
  w.end_row();
  for (std::size_t j = 0; j < blocking.size(); ++j) {
    w.field("blocking_probability").field(j).field(blocking[j]);
    w.end_row();
  }
  w.close();
}

// --- shadow ----------------------------------------------------------------

struct ShadowOutcome {
  RelativeCosts costs;
  std::vector<std::array<double, 3>> residual_rows;  // n_terms, residual, interior
};

ShadowOutcome shadow_costs(Run& run, const StationaryDistribution& st) {
  const auto& classes = run.model.classes;
  ShadowOutcome out;
  const std::string& m = run.opt.method;
  auto single_row = [&] {
    out.residual_rows.push_back(
        {0.0, howard_residual(run.space, classes, st.g, st.cost_rate, out.costs.v),
         howard_interior_residual(run.space, classes, st.g, st.cost_rate, out.costs.v)});
  };
  if (m == "exact") {
    out.costs = solve_howard_exact(run.space, classes, st.g, st.cost_rate);
    single_row();
  } else if (m == "eq9" || m == "eq10" || m == "eq11") {
    const auto kind = m == "eq9"    ? Approximation::Symmetric
                      : m == "eq10" ? Approximation::EqualBandwidth
                                    : Approximation::General;
    out.costs = approximate_relative_costs(run.space, classes, run.model.policy, st.g, kind);
    single_row();
  } else if (m == "series") {
    if (run.opt.terms < 0) throw ValidationError("--terms must be non-negative");
    SeriesOptions so;
    so.n_terms = run.opt.terms;
    const auto u = series_start(run.space, classes);
    auto res = series_refine(run.space, classes, st.g, st.cost_rate, u, so);
    for (std::size_t n = 0; n < res.residual.size(); ++n)
      out.residual_rows.push_back(
          {static_cast<double>(n), res.residual[n], res.interior_residual[n]});
    if (!res.converged) run.warn(res.report);
    out.costs = std::move(res.costs);
  } else {
    throw ValidationError("unknown --method \"" + m + "\" (exact, eq9, eq10, eq11, series)");
  }
  return out;
}

void cmd_shadow(Run& run) {
  const auto& classes = run.model.classes;
  const auto st = stationary(run.space, classes);
  const auto outcome = shadow_costs(run, st);
  {
    CsvWriter w(run.file("relative_costs.csv"), {"state", "v"});
    for (std::size_t i = 0; i < run.space.size(); ++i) {
      w.field(run.space.label(i)).field(outcome.costs.v[i]);
      w.end_row();
    }
    w.close();
  }
  const ShadowPriceTable prices(outcome.costs, run.space);
  {
    CsvWriter w(run.file("shadow_prices.csv"), {"state", "class", "price"});
    for (const auto& e : prices.entries()) {
      w.field(run.space.label(e.state)).field(e.cls).field(e.price);
      w.end_row();
    }
    w.close();
  }
  {
    CsvWriter w(run.file("bill_dist.csv"), {"class", "price", "probability"});
    for (int k = 0; k < run.space.classes(); ++k) {
      try {
        for (const auto& pm : class_bill_distribution(prices, st.pi, k)) {
          w.field(k).field(pm.price).field(pm.probability);
          w.end_row();
        }
      } catch (const ValidationError& e) {
        run.warn(std::string("no bill distribution: ") + e.what());
      }
    }
    w.close();
  }
  {
    CsvWriter w(run.file("residual.csv"), {"method", "n_terms", "residual", "interior_residual"});
    for (const auto& row : outcome.residual_rows) {
      w.field(run.opt.method).field(static_cast<int>(row[0])).field(row[1]).field(row[2]);
      w.end_row();
    }
    w.close();
  }
  run.flags["method"] = run.opt.method;
  if (run.opt.method == "series") run.flags["terms"] = run.opt.terms;
}

// --- costdist --------------------------------------------------------------

double require_t(const Run& run) {
  if (!run.opt.t) throw ValidationError("--t is required for " + run.command);
  const double t = *run.opt.t;
  if (!(t > 0.0) || !std::isfinite(t)) throw ValidationError("--t must be positive");
  return t;
}

int default_steps(const StateSpace& space, std::span<const TrafficClass> classes, double t) {
  // well inside the step condition so the discrete schemes sit close to the
  // continuous limit
  const double rate = max_outflow_rate(space, classes);
  return std::max(1024, static_cast<int>(std::ceil(t * rate / 0.05)));
}

void write_cost_outputs(Run& run, double t, std::size_t states, int r_max,
                        const std::function<double(std::size_t, int)>& mass,
                        const std::vector<double>& total, double leakage) {
  {
    CsvWriter w(run.file("cost_dist.csv"), {"t", "state", "r", "probability"});
    for (std::size_t i = 0; i < states; ++i)
      for (int r = 0; r <= r_max; ++r) {
        w.field(t).field(run.space.label(i)).field(r).field(mass(i, r));
        w.end_row();
      }
    w.close();
  }
  auto summary = summarize_total_cost(t, total);
  {
    CsvWriter w(run.file("total_cost.csv"), {"t", "r", "probability", "cumulative"});
    double cumulative = 0.0;
    for (int r = 0; r <= r_max; ++r) {
      cumulative += total[r];
      w.field(t).field(r).field(total[r]).field(cumulative);
      w.end_row();
    }
    w.close();
  }
  CsvWriter w(run.file("risk.csv"), {"t", "mean", "q95", "q99", "leakage"});
  w.field(t).field(summary.mean).field(summary.q95).field(summary.q99).field(leakage);
  w.end_row();
  w.close();
  if (summary.q99 < 0)
    run.warn(fmt::format("r_max = {} does not reach the 99% quantile", r_max));
}

void cmd_costdist(Run& run) {
  const auto& classes = run.model.classes;
  const double t = require_t(run);
  const std::string scheme = run.opt.scheme.empty() ? "closed" : run.opt.scheme;
  if (run.opt.rmax && *run.opt.rmax < 0) throw ValidationError("--rmax must be non-negative");
  if (run.opt.steps && *run.opt.steps < 1) throw ValidationError("--steps must be at least 1");
  run.flags["t"] = t;
  run.flags["scheme"] = scheme;

  if (scheme == "closed") {
    const auto st = stationary(run.space, classes);
    int r_max = run.opt.rmax ? *run.opt.rmax : default_r_max(classes, t);
    auto build = [&](int rm) {
      if (run.opt.steps)
        return closed_form_discrete_grid(run.space, classes, st.pi, *run.opt.steps,
                                         t / *run.opt.steps, rm);
      return closed_form_continuous_grid(run.space, classes, st.pi, t, rm);
    };
    auto grid = build(r_max);
    auto total = grid.total_cost();
    auto leak = [&] {
      double s = 0.0;
      for (double x : total) s += x;
      return std::max(0.0, 1.0 - s);
    };
    if (!run.opt.rmax)
      for (int attempt = 0; attempt < 4 && leak() > 1e-12; ++attempt) {
        r_max = 2 * r_max + 1;
        grid = build(r_max);
        total = grid.total_cost();
      }
    if (leak() > 1e-6)
      run.warn(fmt::format("cost truncation at r_max = {} leaks {:.3e} of the mass", r_max,
                           leak()));
    if (run.opt.steps) run.flags["steps"] = *run.opt.steps;
    run.flags["rmax"] = r_max;
    write_cost_outputs(
        run, t, run.space.size(), r_max, [&](std::size_t i, int r) { return grid.at(i, r); },
        total, leak());
    return;
  }
  if (scheme != "shadow" && scheme != "simple")
    throw ValidationError("unknown --scheme \"" + scheme + "\" (shadow, simple, closed)");

  const int steps = run.opt.steps ? *run.opt.steps : default_steps(run.space, classes, t);
  GridOptions go;
  if (run.opt.rmax) go.r_max = *run.opt.rmax;
  const CostGrid grid = scheme == "shadow"
                            ? evolve_shadow_costs(run.space, classes, t, steps, go)
                            : evolve_simple_costs(run.space, classes, t, steps, go);
  if (!grid.warning.empty()) run.warn(grid.warning);
  run.flags["steps"] = steps;
  run.flags["rmax"] = grid.r_max;
  write_cost_outputs(
      run, t, run.space.size(), grid.r_max, [&](std::size_t i, int r) { return grid.at(i, r); },
      grid.total_cost(), grid.leakage);
}

// --- simulate --------------------------------------------------------------

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::vector<std::vector<std::string>> rows;
  std::ifstream in(path);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      continue;
    }
    std::vector<std::string> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(cell);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::optional<json> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  try {
    return json::parse(in);
  } catch (const json::exception&) {
    return std::nullopt;
  }
}

struct Comparison {
  std::string check;
  double analytic;
  double empirical;
  double se;
  double statistic;  // z score, or chi-square p-value for distribution checks
  bool pass;
};

void cmd_simulate(Run& run) {
  const auto& classes = run.model.classes;
  const double t = require_t(run);
  if (run.opt.reps < 1) throw ValidationError("--reps must be at least 1");
  const std::string scheme = run.opt.scheme.empty() ? "shadow" : run.opt.scheme;
  if (scheme != "shadow" && scheme != "simple")
    throw ValidationError("unknown --scheme \"" + scheme + "\" for simulate (shadow, simple)");

  double min_mu = classes.front().mu;
  for (const auto& c : classes) min_mu = std::min(min_mu, c.mu);
  SimConfig cfg;
  cfg.horizon = t;
  cfg.replications = static_cast<std::size_t>(run.opt.reps);
  cfg.seed = run.opt.seed;
  cfg.accounting =
      scheme == "simple" ? CostAccounting::TariffLockedAtStart : CostAccounting::Realized;
  // the simpler scheme's law assumes a stationary start
  cfg.warmup = scheme == "simple" ? 20.0 / min_mu : 0.0;
  run.flags["t"] = t;
  run.flags["reps"] = run.opt.reps;
  run.flags["scheme"] = scheme;
  run.flags["warmup"] = cfg.warmup;
  run.flags["method"] = run.opt.method;

  const auto st = stationary(run.space, classes);
  std::optional<ShadowPriceTable> prices;
  try {
    prices.emplace(shadow_costs(run, st).costs, run.space);
    cfg.record_bills = true;
  } catch (const NumericError& e) {
    run.warn(std::string("bills not recorded: ") + e.what());
  }
  const auto sim = simulate(run.space, classes, cfg, prices ? &*prices : nullptr);

  std::int64_t max_cost = 0;
  for (auto c : sim.total_cost_samples) max_cost = std::max(max_cost, c);
  const auto hist = empirical_total_cost_hist(sim, static_cast<int>(max_cost));
  {
    CsvWriter w(run.file("total_cost_mc.csv"),
                {"t", "r", "probability", "se", "wilson_lo", "wilson_hi", "count"});
    for (const auto& b : hist.bins) {
      w.field(t).field(b.r).field(b.probability).field(b.se).field(b.wilson.lo)
          .field(b.wilson.hi).field(static_cast<unsigned long long>(b.count));
      w.end_row();
    }
    w.close();
  }
  {
    std::vector<double> mass;
    for (const auto& b : hist.bins) mass.push_back(b.probability);
    const auto summary = summarize_total_cost(t, mass);
    const auto mean = sim.mean_total_cost();
    CsvWriter w(run.file("risk_mc.csv"), {"t", "mean", "mean_se", "q95", "q99"});
    w.field(t).field(mean.value).field(mean.se).field(summary.q95).field(summary.q99);
    w.end_row();
    w.close();
  }
  {
    CsvWriter w(run.file("occupancy_mc.csv"), {"state", "probability", "se"});
    for (std::size_t i = 0; i < run.space.size(); ++i) {
      w.field(run.space.label(i)).field(sim.occupancy[i]).field(sim.occupancy_se[i]);
      w.end_row();
    }
    w.close();
  }
  std::vector<BillHistogram> bill_hists(run.space.classes());
  std::vector<bool> has_bills(run.space.classes(), false);
  {
    CsvWriter w(run.file("bill_dist_mc.csv"), {"class", "price", "probability", "se", "count"});
    if (cfg.record_bills) {
      for (int k = 0; k < run.space.classes(); ++k) {
        if (sim.bill_samples[k].empty()) continue;
        bill_hists[k] = empirical_bill_hist(sim, k);
        has_bills[k] = true;
        for (const auto& b : bill_hists[k].bins) {
          w.field(k).field(b.price).field(b.probability).field(b.se)
              .field(static_cast<unsigned long long>(b.count));
          w.end_row();
        }
      }
    }
    w.close();
  }
  const auto rate = sim.cost_rate();
  {
    CsvWriter w(run.file("summary_mc.csv"), {"quantity", "class", "value", "se"});
    w.field("cost_rate").field("").field(rate.value).field(rate.se);
    w.end_row();
    for (int k = 0; k < run.space.classes(); ++k) {
      const double n = static_cast<double>(sim.arrivals[k]);
      const double p = n > 0 ? sim.blocked[k] / n : 0.0;
      w.field("blocking_probability").field(k).field(p).field(n > 0 ? std::sqrt(p * (1 - p) / n)
                                                                    : 0.0);
      w.end_row();
    }
    w.field("events").field("").field(static_cast<double>(sim.events)).field(0.0);
    w.end_row();
    w.close();
  }

  // Comparison against analytic outputs already present in the directory.
  std::vector<Comparison> checks;
  auto z_check = [&](std::string name, double analytic, double empirical, double se) {
    const double z = se > 0 ? (empirical - analytic) / se
                            : (std::abs(empirical - analytic) <= 1e-12 ? 0.0 : INFINITY);
    checks.push_back({std::move(name), analytic, empirical, se, z, std::abs(z) <= 3.0});
  };
  const bool stationary_start = scheme == "simple";
  if (auto manifest = read_manifest(run.file("manifest_costdist.json"));
      manifest && fs::exists(run.file("total_cost.csv"))) {
    const auto& f = (*manifest)["flags"];
    const std::string their = f.value("scheme", "");
    const bool same_family = (their == "shadow") == (scheme == "shadow");
    if (same_family && std::abs(f.value("t", -1.0) - t) <= 1e-12 * std::max(1.0, t)) {
      std::vector<double> expected;
      for (const auto& row : read_csv(run.file("total_cost.csv")))
        expected.push_back(std::stod(row.at(2)));
      std::vector<std::uint64_t> observed(expected.size(), 0);
      std::uint64_t overflow = 0;
      double mean = 0.0;
      for (std::size_t r = 0; r < expected.size(); ++r) mean += r * expected[r];
      for (auto c : sim.total_cost_samples) {
        if (static_cast<std::size_t>(c) < observed.size()) ++observed[c];
        else ++overflow;
      }
      const auto chi = chi_square_test(observed, expected, overflow);
      checks.push_back({"total_cost_chi_square", 0.0, chi.statistic, 0.0, chi.p_value,
                        chi.p_value > 0.01});
      const auto m = sim.mean_total_cost();
      z_check("total_cost_mean", mean, m.value, m.se);
    }
  }
  if (stationary_start && fs::exists(run.file("summary.csv"))) {
    for (const auto& row : read_csv(run.file("summary.csv")))
      if (row.at(0) == "g") z_check("cost_rate", std::stod(row.at(2)), rate.value, rate.se);
  }
  if (stationary_start && fs::exists(run.file("pi.csv"))) {
    const auto rows = read_csv(run.file("pi.csv"));
    if (rows.size() == run.space.size()) {
      std::vector<double> pi;
      for (const auto& row : rows) pi.push_back(std::stod(row.at(1)));
      double worst = 0.0;
      std::size_t at = 0;
      for (std::size_t i = 0; i < pi.size(); ++i) {
        if (!(sim.occupancy_se[i] > 0)) continue;
        const double z = std::abs(sim.occupancy[i] - pi[i]) / sim.occupancy_se[i];
        if (z > worst) {
          worst = z;
          at = i;
        }
      }
      z_check("occupancy_" + run.space.label(at), pi[at], sim.occupancy[at],
              sim.occupancy_se[at]);
    }
  }
  auto shadow_manifest = read_manifest(run.file("manifest_shadow.json"));
  if (stationary_start && cfg.record_bills && shadow_manifest &&
      (*shadow_manifest)["flags"].value("method", "") == run.opt.method &&
      fs::exists(run.file("bill_dist.csv"))) {
    for (const auto& row : read_csv(run.file("bill_dist.csv"))) {
      const int k = std::stoi(row.at(0));
      const double price = std::stod(row.at(1));
      const double prob = std::stod(row.at(2));
      if (k < 0 || k >= run.space.classes() || !has_bills[k]) continue;
      double emp = 0.0, se = 0.0;
      for (const auto& b : bill_hists[k].bins)
        if (std::abs(b.price - price) <= 1e-9 * std::max(1.0, std::abs(price))) {
          emp = b.probability;
          se = b.se;
        }
      if (se == 0.0) se = std::sqrt(prob * (1 - prob) / std::max<double>(1, bill_hists[k].samples));
      z_check(fmt::format("bill_class{}_price{}", k, format_real(price)), prob, emp, se);
    }
  }
  if (!checks.empty()) {
    CsvWriter w(run.file("comparison_mc.csv"),
                {"check", "analytic", "empirical", "se", "statistic", "pass"});
    for (const auto& c : checks) {
      w.field(c.check).field(c.analytic).field(c.empirical).field(c.se).field(c.statistic)
          .field(c.pass ? "true" : "false");
      w.end_row();
      if (!c.pass) run.warn("comparison check failed: " + c.check);
    }
    w.close();
  }
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stationary behaviour, shadow prices and cost distributions of multiservice "
               "loss systems",
               "losscost"};
  app.set_version_flag("--version", LOSSCOST_VERSION);
  app.require_subcommand(1);
  Options opt;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--model", opt.model, "model file (JSON)")->required();
    sub->add_option("--out", opt.out, "output directory")->capture_default_str();
  };
  auto* stat = app.add_subcommand("stationary", "product-form distribution and cost rate");
  common(stat);
  auto* shadow = app.add_subcommand("shadow", "relative costs, shadow prices and bills");
  common(shadow);
  shadow->add_option("--method", opt.method, "exact, eq9, eq10, eq11 or series")
      ->capture_default_str();
  shadow->add_option("--terms", opt.terms, "series terms")->capture_default_str();
  auto* cost = app.add_subcommand("costdist", "accumulated cost distribution");
  common(cost);
  cost->add_option("--t", opt.t, "time horizon")->required();
  cost->add_option("--scheme", opt.scheme, "shadow, simple or closed (default closed)");
  cost->add_option("--steps", opt.steps, "time steps (closed: discrete form when given)");
  cost->add_option("--rmax", opt.rmax, "largest accumulated cost kept");
  auto* sim = app.add_subcommand("simulate", "Monte Carlo simulation");
  common(sim);
  sim->add_option("--t", opt.t, "observation window")->required();
  sim->add_option("--reps", opt.reps, "replications")->capture_default_str();
  sim->add_option("--seed", opt.seed, "random seed")->capture_default_str();
  sim->add_option("--scheme", opt.scheme, "shadow (realized costs) or simple (default shadow)");
  sim->add_option("--method", opt.method, "relative-cost method for bill prices")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  Run run;
  run.opt = opt;
  run.command = app.get_subcommands().front()->get_name();
  try {
    run.model = load_model(opt.model);
    run.space = enumerate_states(run.model.classes, run.model.policy);
    run.dir = opt.out;
    fs::create_directories(run.dir);
    if (run.command == "stationary") cmd_stationary(run);
    else if (run.command == "shadow") cmd_shadow(run);
    else if (run.command == "costdist") cmd_costdist(run);
    else cmd_simulate(run);
    write_manifest(run);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    err << "failure: " << e.what() << '\n';
    return kExitNumeric;
  }
  for (const auto& w : run.warnings) err << "warning: " << w << '\n';
  out << fmt::format("{}: {} states, results in {}\n", run.command, run.space.size(),
                     run.dir.string());
  return run.warnings.empty() ? kExitOk : kExitWarnings;
}

}  // namespace losscost::tools
