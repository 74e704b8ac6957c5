#include "qlo/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include "qlo/csv.hpp"
#include "qlo/experiments.hpp"
#include "qlo/parallel.hpp"

#ifndef QLO_VERSION
#define QLO_VERSION "0.0.0"
#endif

namespace qlo::cli {

namespace {

constexpr std::array<std::pair<Subcommand, const char*>, 6> kSubcommands{{
    {Subcommand::simulate, "simulate"},
    {Subcommand::sweep, "sweep"},
    {Subcommand::staircase, "staircase"},
    {Subcommand::lifetimes, "lifetimes"},
    {Subcommand::uncertainty, "uncertainty"},
    {Subcommand::franck_hertz, "franck-hertz"},
}};

// Every flag lands here unresolved; absent means "not given".
struct Raw {
  std::optional<std::string> config;
  std::optional<std::string> profile;
  std::optional<std::string> output;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;

  std::optional<double> k, a0, omega_d, phi_d, eps_den;
  std::optional<double> dt, t_max;
  std::optional<std::size_t> stride;
  std::optional<double> eps_settle, settle_window, smoothing, max_drift, exit_threshold;

  std::optional<double> q0, v0, e0;
  std::optional<std::string> v0_list, t_obs;
  std::optional<double> v0_min, v0_max, v0_step;
  std::optional<std::string> levels;
  std::optional<std::size_t> ensemble;
  std::optional<double> chunk;
  std::optional<std::uint64_t> level;
  std::optional<std::string> delta_e;
  std::optional<double> escape_depth;
  std::optional<double> t0_min, t0_max, mass_ratio, relax_t_max;
  std::optional<std::size_t> t0_steps, phases;
  std::optional<bool> no_pump;
};

const char* description(Subcommand sub) {
  switch (sub) {
    case Subcommand::simulate: return "integrate one trajectory and write t,q,v,E";
    case Subcommand::sweep: return "energy and settled level at observation times over a V0 grid";
    case Subcommand::staircase: return "one long driven run with its plateaus and transitions";
    case Subcommand::lifetimes: return "mean residence time on levels under random drive phase";
    case Subcommand::uncertainty: return "escape time from just below a level versus the deficit";
    case Subcommand::franck_hertz: return "electron energy after one collision, averaged over phase";
  }
  return "";
}

struct Parser {
  std::unique_ptr<CLI::App> app;
  std::map<std::string, CLI::App*> subs;
};

template <typename T>
void opt(CLI::App* sub, const std::string& name, std::optional<T>& target,
         const std::string& help) {
  sub->add_option("--" + name, target, help);
}

Parser build_parser(Raw& raw) {
  Parser p;
  p.app = std::make_unique<CLI::App>("Nonlinear oscillator with quantized friction", "qlo");
  p.app->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  p.app->require_subcommand(1);
  p.app->set_version_flag("--version", QLO_VERSION);

  for (const auto& [sub_kind, name] : kSubcommands) {
    CLI::App* sub = p.app->add_subcommand(name, description(sub_kind));
    p.subs[name] = sub;
    opt(sub, "config", raw.config, "flat key=value file; flags override it");
    opt(sub, "output", raw.output, "CSV output path (default <subcommand>.csv)");
    opt(sub, "seed", raw.seed, "random seed (default 0)");
    opt(sub, "jobs", raw.jobs, "worker threads (default: available parallelism)");
    opt(sub, "k", raw.k, "friction strength 2*gamma0/pi^2 (default 0.2)");
    opt(sub, "a0", raw.a0, "drive amplitude");
    opt(sub, "omega-d", raw.omega_d, "drive frequency (default 2)");
    opt(sub, "phi-d", raw.phi_d, "drive phase (default 0)");
    opt(sub, "eps-den", raw.eps_den, "floor on s^2 in the friction denominator (default 1e-6)");
    opt(sub, "dt", raw.dt, "integration step");
    opt(sub, "stride", raw.stride, "record every k-th step");

    const auto sc = sub_kind;
    if (sc != Subcommand::sweep && sc != Subcommand::franck_hertz) {
      opt(sub, "t-max", raw.t_max, "end time (per-member budget for lifetimes)");
    }
    if (sc == Subcommand::sweep || sc == Subcommand::staircase || sc == Subcommand::lifetimes ||
        sc == Subcommand::franck_hertz) {
      opt(sub, "eps-settle", raw.eps_settle, "settling band around a level");
      opt(sub, "settle-window", raw.settle_window, "time the band must hold");
    }
    if (sc == Subcommand::sweep || sc == Subcommand::staircase || sc == Subcommand::lifetimes) {
      opt(sub, "smoothing", raw.smoothing, "width of the moving average applied to E");
      opt(sub, "exit-threshold", raw.exit_threshold, "departure distance ending a plateau");
      opt(sub, "profile", raw.profile, "pinned grids: fig1 (sweep), fig2 (staircase)");
    }
    switch (sc) {
      case Subcommand::simulate:
        opt(sub, "q0", raw.q0, "initial coordinate (default 0)");
        opt(sub, "v0", raw.v0, "initial velocity (default 1)");
        break;
      case Subcommand::sweep:
        opt(sub, "v0", raw.v0_list, "comma-separated initial velocities");
        opt(sub, "v0-min", raw.v0_min, "grid start");
        opt(sub, "v0-max", raw.v0_max, "grid end (inclusive)");
        opt(sub, "v0-step", raw.v0_step, "grid step");
        opt(sub, "t-obs", raw.t_obs, "comma-separated observation times");
        break;
      case Subcommand::staircase:
        opt(sub, "v0", raw.v0, "initial velocity");
        opt(sub, "e0", raw.e0, "initial energy (default 3.2); ignored when --v0 is given");
        break;
      case Subcommand::lifetimes:
        opt(sub, "levels", raw.levels, "comma-separated level indices (default 1,2,3)");
        opt(sub, "ensemble", raw.ensemble, "members per level (default 32)");
        opt(sub, "chunk", raw.chunk, "integration chunk length (default 250)");
        break;
      case Subcommand::uncertainty:
        opt(sub, "level", raw.level, "level index n >= 1 (default 2)");
        opt(sub, "delta-e", raw.delta_e, "comma-separated initial deficits (default 0.05,0.1,0.2)");
        opt(sub, "escape-depth", raw.escape_depth, "escape distance below the level (default 0.5)");
        break;
      case Subcommand::franck_hertz:
        opt(sub, "profile", raw.profile, "pinned grid: fig3");
        opt(sub, "t0-min", raw.t0_min, "lowest electron energy (default 0.1)");
        opt(sub, "t0-max", raw.t0_max, "highest electron energy (default 2.0)");
        opt(sub, "t0-steps", raw.t0_steps, "number of energies (default 39)");
        opt(sub, "phases", raw.phases, "collision phases per energy (default 64)");
        opt(sub, "mass-ratio", raw.mass_ratio, "electron over oscillator mass (default 1)");
        opt(sub, "relax-t-max", raw.relax_t_max, "relaxation budget (default 1e4)");
        opt(sub, "max-drift", raw.max_drift, "allowed growth of the level distance (default 1e-4)");
        opt(sub, "chunk", raw.chunk, "relaxation chunk length (default 200)");
        sub->add_flag("--no-pump", raw.no_pump,
                      "do not charge sub-ground pumping to the electron");
        break;
    }
  }
  return p;
}

void parse_with(Parser& parser, std::vector<std::string> args) {
  std::reverse(args.begin(), args.end());  // CLI11 consumes from the back
  try {
    parser.app->parse(args);
  } catch (const CLI::CallForHelp&) {
    throw HelpRequested(parser.app->help());
  } catch (const CLI::CallForAllHelp&) {
    throw HelpRequested(parser.app->help("", CLI::AppFormatMode::All));
  } catch (const CLI::CallForVersion&) {
    throw HelpRequested(QLO_VERSION);
  } catch (const CLI::ParseError& e) {
    throw ConfigError(e.what());
  }
}

Subcommand selected(const Parser& parser) {
  for (const auto& [kind, name] : kSubcommands) {
    if (parser.subs.at(name)->parsed()) return kind;
  }
  throw ConfigError("exactly one subcommand is required");
}

std::vector<double> parse_list(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw ConfigError("--" + flag + ": '" + item + "' is not a number");
    }
  }
  if (out.empty()) throw ConfigError("--" + flag + " must not be empty");
  return out;
}

void check(bool ok, const std::string& flag, const std::string& what) {
  if (!ok) throw ConfigError("--" + flag + " " + what);
}

template <typename T>
T pick(const std::optional<T>& flag, T fallback) {
  return flag ? *flag : fallback;
}

RunConfig resolve(const Raw& raw, Subcommand sub) {
  RunConfig cfg;
  cfg.subcommand = sub;
  cfg.profile = raw.profile.value_or("");
  if (!cfg.profile.empty()) {
    const bool ok = (cfg.profile == "fig1" && sub == Subcommand::sweep) ||
                    (cfg.profile == "fig2" && sub == Subcommand::staircase) ||
                    (cfg.profile == "fig3" && sub == Subcommand::franck_hertz);
    check(ok, "profile", "'" + cfg.profile + "' does not apply to " + to_string(sub));
  }

  const bool drive_off = sub == Subcommand::uncertainty || sub == Subcommand::franck_hertz;
  cfg.model.friction_strength = pick(raw.k, 0.2);
  cfg.model.drive_amplitude = pick(raw.a0, drive_off ? 0.0 : 0.05);
  cfg.model.drive_frequency = pick(raw.omega_d, 2.0);
  cfg.model.drive_phase = pick(raw.phi_d, 0.0);
  cfg.model.energy_floor = pick(raw.eps_den, 1e-6);
  check(std::isfinite(cfg.model.friction_strength) && cfg.model.friction_strength >= 0.0, "k",
        "must be >= 0");
  check(std::isfinite(cfg.model.drive_amplitude) && cfg.model.drive_amplitude >= 0.0, "a0",
        "must be >= 0");
  check(std::isfinite(cfg.model.drive_frequency) && cfg.model.drive_frequency > 0.0, "omega-d",
        "must be > 0");
  check(std::isfinite(cfg.model.drive_phase), "phi-d", "must be finite");
  check(std::isfinite(cfg.model.energy_floor) && cfg.model.energy_floor > 0.0, "eps-den",
        "must be > 0");
  if (drive_off) {
    check(cfg.model.drive_amplitude == 0.0, "a0", "must be 0 for " + to_string(sub));
  }

  // Per-subcommand integrator defaults.
  double dt = 1e-3;
  double t_max = 100.0;
  std::size_t stride = 10;
  switch (sub) {
    case Subcommand::simulate: break;
    case Subcommand::sweep: stride = 100; t_max = 0.0; break;
    case Subcommand::staircase: stride = 100; t_max = cfg.profile == "fig2" ? 1e5 : 1e4; break;
    case Subcommand::lifetimes: stride = 100; t_max = 2000.0; break;
    case Subcommand::uncertainty: stride = 1; t_max = 1e4; break;
    case Subcommand::franck_hertz: dt = 1e-2; stride = 1; t_max = 0.0; break;
  }
  cfg.integrator.dt = pick(raw.dt, dt);
  cfg.integrator.t_max = pick(raw.t_max, t_max);
  cfg.integrator.sample_stride = pick(raw.stride, stride);
  check(std::isfinite(cfg.integrator.dt) && cfg.integrator.dt > 0.0, "dt", "must be > 0");
  check(std::isfinite(cfg.integrator.t_max) && cfg.integrator.t_max >= 0.0, "t-max",
        "must be >= 0");
  check(cfg.integrator.sample_stride >= 1, "stride", "must be >= 1");

  cfg.settle = sub == Subcommand::franck_hertz ? franck_hertz_settle()
                                               : SettleCriterion::for_params(cfg.model);
  cfg.settle.tolerance = pick(raw.eps_settle, cfg.settle.tolerance);
  cfg.settle.window = pick(raw.settle_window, cfg.settle.window);
  cfg.settle.smoothing = pick(raw.smoothing, cfg.settle.smoothing);
  cfg.settle.max_drift = pick(raw.max_drift, cfg.settle.max_drift);
  check(std::isfinite(cfg.settle.tolerance) && cfg.settle.tolerance > 0.0, "eps-settle",
        "must be > 0");
  check(std::isfinite(cfg.settle.window) && cfg.settle.window > 0.0, "settle-window",
        "must be > 0");
  check(std::isfinite(cfg.settle.smoothing) && cfg.settle.smoothing >= 0.0, "smoothing",
        "must be >= 0");
  check(cfg.settle.max_drift >= 0.0, "max-drift", "must be >= 0");
  cfg.exit_threshold = pick(raw.exit_threshold, 0.1);
  check(std::isfinite(cfg.exit_threshold) && cfg.exit_threshold >= cfg.settle.tolerance,
        "exit-threshold", "must be >= the settling band");

  cfg.output_path = raw.output.value_or(to_string(sub) + ".csv");
  check(!cfg.output_path.empty(), "output", "must not be empty");
  cfg.seed = pick(raw.seed, std::uint64_t{0});
  cfg.jobs = raw.jobs ? *raw.jobs : default_jobs();
  check(cfg.jobs >= 1, "jobs", "must be >= 1");

  switch (sub) {
    case Subcommand::simulate:
      cfg.simulate.q0 = pick(raw.q0, 0.0);
      cfg.simulate.v0 = pick(raw.v0, 1.0);
      check(std::isfinite(cfg.simulate.q0), "q0", "must be finite");
      check(std::isfinite(cfg.simulate.v0), "v0", "must be finite");
      break;

    case Subcommand::sweep: {
      if (raw.v0_list) {
        cfg.sweep.v0_grid = parse_list(*raw.v0_list, "v0");
      } else {
        const bool fig1 = cfg.profile == "fig1";
        const double lo = pick(raw.v0_min, fig1 ? 0.5 : 0.5);
        const double hi = pick(raw.v0_max, fig1 ? 5.0 : 5.0);
        const double step = pick(raw.v0_step, 0.1);
        check(std::isfinite(step) && step > 0.0, "v0-step", "must be > 0");
        check(std::isfinite(lo) && std::isfinite(hi) && hi >= lo, "v0-max", "must be >= --v0-min");
        const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
        for (std::size_t i = 0; i < count; ++i) {
          cfg.sweep.v0_grid.push_back(lo + static_cast<double>(i) * step);
        }
      }
      for (double v : cfg.sweep.v0_grid) check(std::isfinite(v), "v0", "values must be finite");
      cfg.sweep.observation_times =
          raw.t_obs ? parse_list(*raw.t_obs, "t-obs") : std::vector<double>{10, 100, 1000, 10000};
      const auto& times = cfg.sweep.observation_times;
      for (std::size_t i = 0; i < times.size(); ++i) {
        check(times[i] > 0.0 && (i == 0 || times[i] > times[i - 1]), "t-obs",
              "must be positive and increasing");
      }
      break;
    }

    case Subcommand::staircase:
      cfg.staircase.v0 = raw.v0 ? *raw.v0 : std::sqrt(2.0 * pick(raw.e0, 3.2));
      check(std::isfinite(cfg.staircase.v0), "v0", "must be finite (check --e0 >= 0)");
      check(cfg.integrator.t_max >= cfg.settle.window, "t-max",
            "must cover at least one settling window");
      break;

    case Subcommand::lifetimes: {
      const auto levels =
          raw.levels ? parse_list(*raw.levels, "levels") : std::vector<double>{1, 2, 3};
      for (double n : levels) {
        check(n >= 0 && n == std::floor(n) && n <= static_cast<double>(Level::kMaxIndex), "levels",
              "must be non-negative integers");
        cfg.lifetimes.levels.push_back(static_cast<std::uint64_t>(n));
      }
      cfg.lifetimes.ensemble_size = pick(raw.ensemble, std::size_t{32});
      check(cfg.lifetimes.ensemble_size >= 1, "ensemble", "must be >= 1");
      cfg.lifetimes.chunk = pick(raw.chunk, 250.0);
      check(cfg.lifetimes.chunk > 0.0, "chunk", "must be > 0");
      break;
    }

    case Subcommand::uncertainty:
      cfg.uncertainty.level = pick(raw.level, std::uint64_t{2});
      check(cfg.uncertainty.level >= 1 && cfg.uncertainty.level <= Level::kMaxIndex, "level",
            "must be >= 1");
      check(cfg.model.friction_strength > 0.0, "k", "must be > 0 for uncertainty");
      cfg.uncertainty.escape_depth = pick(raw.escape_depth, kEscapeDepth);
      check(cfg.uncertainty.escape_depth > 0.0 && cfg.uncertainty.escape_depth <= 1.0,
            "escape-depth", "must be in (0, 1]");
      cfg.uncertainty.delta_e =
          raw.delta_e ? parse_list(*raw.delta_e, "delta-e") : std::vector<double>{0.05, 0.1, 0.2};
      for (double de : cfg.uncertainty.delta_e) {
        check(de > 0.0 && de < cfg.uncertainty.escape_depth, "delta-e",
              "values must lie in (0, escape depth)");
      }
      break;

    case Subcommand::franck_hertz: {
      const double lo = pick(raw.t0_min, 0.1);
      const double hi = pick(raw.t0_max, 2.0);
      const std::size_t steps = pick(raw.t0_steps, std::size_t{39});
      check(std::isfinite(lo) && lo > 0.0, "t0-min", "must be > 0");
      check(std::isfinite(hi) && hi >= lo, "t0-max", "must be >= --t0-min");
      check(steps >= 1, "t0-steps", "must be >= 1");
      for (std::size_t i = 0; i < steps; ++i) {
        const double frac = steps == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(steps - 1);
        cfg.franck_hertz.t0_grid.push_back(lo + frac * (hi - lo));
      }
      CollisionConfig& c = cfg.franck_hertz.collision;
      c.n_phases = pick(raw.phases, std::size_t{64});
      c.mass_ratio = pick(raw.mass_ratio, 1.0);
      c.relax_t_max = pick(raw.relax_t_max, 1e4);
      c.chunk = pick(raw.chunk, 200.0);
      c.pump_from_electron = !pick(raw.no_pump, false);
      c.settle = cfg.settle;
      c.integrator = cfg.integrator;
      c.jobs = cfg.jobs;
      check(c.n_phases >= 1, "phases", "must be >= 1");
      check(std::isfinite(c.mass_ratio) && c.mass_ratio > 0.0, "mass-ratio", "must be > 0");
      check(std::isfinite(c.relax_t_max) && c.relax_t_max > 0.0, "relax-t-max", "must be > 0");
      check(c.chunk > 0.0, "chunk", "must be > 0");
      break;
    }
  }
  return cfg;
}

std::string join(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += format_double(values[i]);
  }
  return out;
}

std::string with_suffix(const std::string& path, const std::string& suffix) {
  const auto slash = path.find_last_of('/');
  const auto dot = path.find_last_of('.');
  if (dot != std::string::npos && (slash == std::string::npos || dot > slash)) {
    return path.substr(0, dot) + suffix;
  }
  return path + suffix;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open output file '" + path + "'");
  return out;
}

struct Counters {
  std::size_t rows = 0;
  std::size_t numerical_failures = 0;
  std::vector<std::pair<std::string, std::string>> stats;
};

Counters run_simulate(const RunConfig& cfg, std::ostream& log) {
  Counters c;
  Trajectory traj;
  try {
    IntegratorConfig icfg = cfg.integrator;
    traj = integrate({0.0, cfg.simulate.q0, cfg.simulate.v0}, icfg, cfg.model);
  } catch (const NumericalFailure& failure) {
    log << "numerical failure: " << failure.what() << '\n';
    traj = failure.partial();
    ++c.numerical_failures;
  }
  auto out = open_output(cfg.output_path);
  write_trajectory_csv(out, traj);
  c.rows = traj.size();
  return c;
}

Counters run_sweep(const RunConfig& cfg, std::ostream&) {
  SweepConfig sweep;
  sweep.v0_grid = cfg.sweep.v0_grid;
  sweep.observation_times = cfg.sweep.observation_times;
  sweep.params = cfg.model;
  sweep.integrator = cfg.integrator;
  sweep.settle = cfg.settle;
  sweep.jobs = cfg.jobs;
  const SweepResult result = occupancy_sweep(sweep);

  auto out = open_output(cfg.output_path);
  CsvWriter csv(out, {"v0", "t_obs", "energy", "level"});
  for (const auto& row : result.rows) {
    std::optional<std::uint64_t> n;
    if (row.settled_level) n = row.settled_level->n();
    csv.row(row.v0, row.t_obs, row.energy_at_t, n);
  }
  Counters c;
  c.rows = result.rows.size();
  c.numerical_failures = result.failures;
  return c;
}

Counters run_staircase(const RunConfig& cfg, std::ostream& log) {
  Counters c;
  StaircaseResult result;
  try {
    result = staircase(cfg.staircase.v0, cfg.integrator.t_max, cfg.model, cfg.integrator,
                       cfg.settle, cfg.exit_threshold);
  } catch (const NumericalFailure& failure) {
    log << "numerical failure: " << failure.what() << '\n';
    ++c.numerical_failures;
    result.trajectory = failure.partial();
    result.plateaus = extract_plateaus(result.trajectory, cfg.settle, cfg.exit_threshold);
    result.transitions = transitions_between(result.plateaus);
  }
  {
    auto out = open_output(cfg.output_path);
    write_trajectory_csv(out, result.trajectory);
  }
  {
    auto out = open_output(with_suffix(cfg.output_path, ".plateaus.csv"));
    CsvWriter csv(out, {"level", "t_arrive", "t_leave", "lifetime", "open"});
    for (const auto& p : result.plateaus) {
      csv.row(p.level.n(), p.t_arrive, p.t_leave, p.lifetime(), p.open ? 1 : 0);
    }
  }
  {
    auto out = open_output(with_suffix(cfg.output_path, ".transitions.csv"));
    CsvWriter csv(out, {"from", "to", "t_leave", "t_arrive", "duration"});
    for (const auto& t : result.transitions) {
      csv.row(t.from_level.n(), t.to_level.n(), t.t_leave, t.t_arrive, t.duration());
    }
  }
  c.rows = result.trajectory.size();
  c.stats.emplace_back("stats.plateaus", std::to_string(result.plateaus.size()));
  c.stats.emplace_back("stats.transitions", std::to_string(result.transitions.size()));
  return c;
}

Counters run_lifetimes(const RunConfig& cfg, std::ostream&) {
  LifetimeConfig lc;
  for (auto n : cfg.lifetimes.levels) lc.levels.emplace_back(n);
  lc.ensemble_size = cfg.lifetimes.ensemble_size;
  lc.seed = cfg.seed;
  lc.params = cfg.model;
  lc.integrator = cfg.integrator;
  lc.settle = cfg.settle;
  lc.exit_threshold = cfg.exit_threshold;
  lc.chunk = cfg.lifetimes.chunk;
  lc.jobs = cfg.jobs;
  const auto stats = lifetime_stats(lc);

  auto out = open_output(cfg.output_path);
  CsvWriter csv(out, {"level", "mean", "std", "count", "censored"});
  Counters c;
  std::size_t censored = 0;
  for (const auto& s : stats) {
    csv.row(s.level.n(), s.mean_lifetime, s.std_lifetime, s.sample_count, s.censored);
    c.numerical_failures += s.failures;
    censored += s.censored;
  }
  c.rows = stats.size();
  c.stats.emplace_back("stats.censored", std::to_string(censored));
  return c;
}

Counters run_uncertainty(const RunConfig& cfg, std::ostream& log) {
  const Level level(cfg.uncertainty.level);
  const double predicted = predicted_uncertainty_product(level, cfg.model);
  auto out = open_output(cfg.output_path);
  CsvWriter csv(out, {"n", "delta_e", "delta_t", "product", "predicted"});
  Counters c;
  for (double de : cfg.uncertainty.delta_e) {
    const double one[] = {de};
    try {
      const auto rec = uncertainty_scan(level, one, cfg.model, cfg.integrator,
                                        cfg.uncertainty.escape_depth)
                           .front();
      csv.row(level.n(), rec.delta_e, rec.delta_t, rec.product, rec.predicted);
    } catch (const std::runtime_error& e) {
      log << "delta_e=" << format_double(de) << ": " << e.what() << '\n';
      ++c.numerical_failures;
      csv.row(level.n(), de, std::optional<double>{}, std::optional<double>{}, predicted);
    }
    ++c.rows;
  }
  return c;
}

Counters run_franck_hertz(const RunConfig& cfg, std::ostream&) {
  const CollisionConfig& collision = cfg.franck_hertz.collision;
  const auto curve = fh_curve(cfg.franck_hertz.t0_grid, collision, cfg.model);
  auto out = open_output(cfg.output_path);
  CsvWriter csv(out, {"t0", "mean_final_energy", "mean_final_speed", "n_phases",
                      "non_settled_count"});
  Counters c;
  std::size_t non_settled = 0;
  for (const auto& p : curve) {
    csv.row(p.t0, p.mean_final_energy, p.mean_final_speed, p.n_phases, p.non_settled_count);
    c.numerical_failures += p.failures;
    non_settled += p.non_settled_count;
  }
  c.rows = curve.size();
  c.stats.emplace_back("stats.non_settled", std::to_string(non_settled));
  return c;
}

void write_manifest(const RunConfig& cfg, const Counters& counters, double seconds) {
  auto out = open_output(cfg.output_path + ".manifest");
  out << "version=" << QLO_VERSION << '\n';
  for (const auto& [key, value] : cfg.describe()) out << key << '=' << value << '\n';
  out << "rows=" << counters.rows << '\n';
  out << "failures.numerical=" << counters.numerical_failures << '\n';
  for (const auto& [key, value] : counters.stats) out << key << '=' << value << '\n';
  out << "wall_clock_seconds=" << format_double(seconds) << '\n';
}

}  // namespace

std::string to_string(Subcommand sub) {
  for (const auto& [kind, name] : kSubcommands) {
    if (kind == sub) return name;
  }
  return "unknown";
}

std::vector<std::pair<std::string, std::string>> RunConfig::describe() const {
  std::vector<std::pair<std::string, std::string>> d;
  auto add = [&d](std::string key, std::string value) {
    d.emplace_back(std::move(key), std::move(value));
  };
  add("subcommand", to_string(subcommand));
  add("profile", profile);
  add("output", output_path);
  add("seed", std::to_string(seed));
  add("jobs", std::to_string(jobs));
  add("k", format_double(model.friction_strength));
  add("a0", format_double(model.drive_amplitude));
  add("omega-d", format_double(model.drive_frequency));
  add("phi-d", format_double(model.drive_phase));
  add("eps-den", format_double(model.energy_floor));
  add("dt", format_double(integrator.dt));
  add("t-max", format_double(integrator.t_max));
  add("stride", std::to_string(integrator.sample_stride));
  add("eps-settle", format_double(settle.tolerance));
  add("settle-window", format_double(settle.window));
  add("smoothing", format_double(settle.smoothing));
  add("max-drift", format_double(settle.max_drift));
  add("exit-threshold", format_double(exit_threshold));
  switch (subcommand) {
    case Subcommand::simulate:
      add("q0", format_double(simulate.q0));
      add("v0", format_double(simulate.v0));
      break;
    case Subcommand::sweep:
      add("v0", join(sweep.v0_grid));
      add("t-obs", join(sweep.observation_times));
      break;
    case Subcommand::staircase:
      add("v0", format_double(staircase.v0));
      break;
    case Subcommand::lifetimes: {
      std::string levels;
      for (std::size_t i = 0; i < lifetimes.levels.size(); ++i) {
        if (i) levels += ',';
        levels += std::to_string(lifetimes.levels[i]);
      }
      add("levels", levels);
      add("ensemble", std::to_string(lifetimes.ensemble_size));
      add("chunk", format_double(lifetimes.chunk));
      break;
    }
    case Subcommand::uncertainty:
      add("level", std::to_string(uncertainty.level));
      add("delta-e", join(uncertainty.delta_e));
      add("escape-depth", format_double(uncertainty.escape_depth));
      break;
    case Subcommand::franck_hertz:
      add("t0", join(franck_hertz.t0_grid));
      add("phases", std::to_string(franck_hertz.collision.n_phases));
      add("mass-ratio", format_double(franck_hertz.collision.mass_ratio));
      add("relax-t-max", format_double(franck_hertz.collision.relax_t_max));
      add("chunk", format_double(franck_hertz.collision.chunk));
      add("pump-from-electron", franck_hertz.collision.pump_from_electron ? "true" : "false");
      break;
  }
  return d;
}

std::vector<std::pair<std::string, std::string>> read_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t line_no = 0;
  const auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string{};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key = value");
    }
    std::string key = trim(t.substr(0, eq));
    if (key.starts_with("--")) key = key.substr(2);
    out.emplace_back(key, trim(t.substr(eq + 1)));
  }
  return out;
}

RunConfig parse_config(std::span<const std::string> args) {
  std::vector<std::string> user(args.begin(), args.end());

  Raw first;
  Parser parser = build_parser(first);
  parse_with(parser, user);
  const Subcommand sub = selected(parser);
  if (!first.config) return resolve(first, sub);

  // Splice file entries in right after the subcommand so that later flags win.
  const std::string name = to_string(sub);
  CLI::App* app_sub = parser.subs.at(name);
  std::vector<std::string> merged;
  auto at = std::find(user.begin(), user.end(), name);
  merged.insert(merged.end(), user.begin(), at + 1);
  for (const auto& [key, value] : read_key_values(*first.config)) {
    if (key == "config") throw ConfigError("config file may not set 'config'");
    if (app_sub->get_option_no_throw("--" + key) == nullptr) {
      throw ConfigError("unknown config key '" + key + "' for " + name);
    }
    merged.push_back("--" + key + "=" + value);
  }
  merged.insert(merged.end(), at + 1, user.end());

  Raw combined;
  Parser second = build_parser(combined);
  parse_with(second, merged);
  return resolve(combined, sub);
}

int run(const RunConfig& config, std::ostream& log) {
  const auto start = std::chrono::steady_clock::now();
  Counters counters;
  switch (config.subcommand) {
    case Subcommand::simulate: counters = run_simulate(config, log); break;
    case Subcommand::sweep: counters = run_sweep(config, log); break;
    case Subcommand::staircase: counters = run_staircase(config, log); break;
    case Subcommand::lifetimes: counters = run_lifetimes(config, log); break;
    case Subcommand::uncertainty: counters = run_uncertainty(config, log); break;
    case Subcommand::franck_hertz: counters = run_franck_hertz(config, log); break;
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (counters.rows > 0) write_manifest(config, counters, seconds);
  return counters.numerical_failures == 0 ? kExitOk : kExitNumerical;
}

int main(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  RunConfig config;
  try {
    config = parse_config(args);
  } catch (const HelpRequested& help) {
    std::cout << help.what() << '\n';
    return kExitOk;
  } catch (const ConfigError& e) {
    std::cerr << "qlo: configuration error: " << e.what() << '\n';
    return kExitConfig;
  }
  try {
    return run(config, std::cerr);
  } catch (const std::invalid_argument& e) {
    std::cerr << "qlo: configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "qlo: " << e.what() << '\n';
    return kExitNumerical;
  }
}

}  // namespace qlo::cli
