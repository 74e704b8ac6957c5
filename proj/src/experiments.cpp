#include "qlo/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <utility>

#include "qlo/parallel.hpp"

namespace qlo {

namespace {

std::size_t nearest_sample(const Trajectory& traj, double t) {
  const auto samples = traj.samples();
  auto it = std::lower_bound(samples.begin(), samples.end(), t,
                             [](const Sample& s, double value) { return s.t < value; });
  if (it == samples.end()) return samples.size() - 1;
  auto idx = static_cast<std::size_t>(it - samples.begin());
  if (idx > 0 && t - samples[idx - 1].t < samples[idx].t - t) --idx;
  return idx;
}

struct RunOutcome {
  Trajectory trajectory;
  std::optional<double> failure_time;
};

RunOutcome integrate_guarded(const OscillatorState& initial, const IntegratorConfig& cfg,
                             const ModelParams& params) {
  try {
    return {integrate(initial, cfg, params), std::nullopt};
  } catch (const NumericalFailure& failure) {
    return {failure.partial(), failure.time()};
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Occupancy sweep

void SweepConfig::validate() const {
  if (v0_grid.empty()) throw std::invalid_argument("v0 grid must not be empty");
  for (double v0 : v0_grid) {
    if (!std::isfinite(v0)) throw std::invalid_argument("v0 values must be finite");
  }
  if (observation_times.empty()) {
    throw std::invalid_argument("observation times must not be empty");
  }
  for (std::size_t i = 0; i < observation_times.size(); ++i) {
    const double t = observation_times[i];
    if (!(std::isfinite(t) && t > 0.0)) {
      throw std::invalid_argument("observation times must be positive");
    }
    if (i > 0 && !(t > observation_times[i - 1])) {
      throw std::invalid_argument("observation times must be increasing");
    }
  }
  params.validate();
  IntegratorConfig probe = integrator;
  probe.t_max = observation_times.back();
  probe.validate();
  resolved_settle().validate();
}

SettleCriterion SweepConfig::resolved_settle() const {
  return settle.value_or(SettleCriterion::for_params(params));
}

SweepResult occupancy_sweep(const SweepConfig& sweep) {
  sweep.validate();
  const SettleCriterion criterion = sweep.resolved_settle();
  const double spacing = sweep.integrator.dt * static_cast<double>(sweep.integrator.sample_stride);
  IntegratorConfig cfg = sweep.integrator;
  cfg.t_max = sweep.observation_times.back() + 0.5 * criterion.smoothing + spacing;

  const std::size_t n_runs = sweep.v0_grid.size();
  std::vector<SweepRun> runs(n_runs);
  std::vector<std::vector<OccupancyRow>> rows(n_runs);

  parallel_for(n_runs, sweep.jobs, [&](std::size_t i) {
    const double v0 = sweep.v0_grid[i];
    const RunOutcome run = integrate_guarded({0.0, 0.0, v0}, cfg, sweep.params);
    const Trajectory& traj = run.trajectory;
    const auto energy = smoothed_energy(traj, criterion.smoothing);

    runs[i] = {v0, detect_settle(traj, energy, criterion, 0), run.failure_time};
    // With a failure, only rows whose smoothing window was fully integrated
    // are valid.
    const double valid_until =
        run.failure_time ? traj.back().t - 0.5 * criterion.smoothing : cfg.t_max;
    for (double t_obs : sweep.observation_times) {
      if (t_obs > valid_until) {
        rows[i].push_back({v0, t_obs, std::nan(""), std::nullopt, true});
        continue;
      }
      const std::size_t idx = nearest_sample(traj, t_obs);
      rows[i].push_back({v0, t_obs, energy[idx], settled_at(traj, energy, idx, criterion)});
    }
  });

  SweepResult result;
  result.runs = std::move(runs);
  for (auto& per_run : rows) {
    for (auto& row : per_run) {
      if (row.failed) ++result.failures;
      result.rows.push_back(row);
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Staircase

StaircaseResult staircase(double v0, double t_max, const ModelParams& params,
                          const IntegratorConfig& integrator,
                          const std::optional<SettleCriterion>& settle,
                          double exit_threshold) {
  IntegratorConfig cfg = integrator;
  cfg.t_max = t_max;
  const SettleCriterion criterion = settle.value_or(SettleCriterion::for_params(params));
  if (!(t_max >= criterion.window)) {
    throw std::invalid_argument("staircase: t_max shorter than the settling window");
  }
  StaircaseResult out;
  out.trajectory = integrate({0.0, 0.0, v0}, cfg, params);
  out.plateaus = extract_plateaus(out.trajectory, criterion, exit_threshold);
  out.transitions = transitions_between(out.plateaus);
  return out;
}

// ---------------------------------------------------------------------------
// Lifetimes

void LifetimeConfig::validate() const {
  if (levels.empty()) throw std::invalid_argument("lifetime levels must not be empty");
  if (ensemble_size < 1) throw std::invalid_argument("ensemble_size must be >= 1");
  params.validate();
  integrator.validate();
  if (!(exit_threshold > 0.0)) throw std::invalid_argument("exit_threshold must be > 0");
  if (!(chunk > 0.0)) throw std::invalid_argument("chunk must be > 0");
}

std::vector<double> ensemble_phases(std::uint64_t seed, std::size_t count) {
  std::mt19937_64 rng(seed);
  std::vector<double> phases(count);
  for (double& phase : phases) {
    // 53 random bits; portable across standard library implementations.
    const double unit = static_cast<double>(rng() >> 11) * 0x1p-53;
    phase = 2.0 * kPi * unit;
  }
  return phases;
}

std::optional<double> measure_lifetime(const Level& level, const ModelParams& params,
                                       const IntegratorConfig& integrator,
                                       const SettleCriterion& settle, double exit_threshold,
                                       double chunk) {
  const double e_level = level.energy();
  const double budget = integrator.t_max;
  Trajectory traj;
  traj.append({0.0, 0.0, std::sqrt(2.0 * e_level)});
  std::size_t scan_from = 0;
  while (true) {
    const double t_last = traj.back().t;
    const bool final_chunk = t_last + chunk >= budget;
    IntegratorConfig cfg = integrator;
    cfg.t_max = final_chunk ? budget : t_last + chunk;
    traj.extend(integrate(traj.back().state(), cfg, params));

    const auto energy = smoothed_energy(traj, settle.smoothing);
    const double trusted = final_chunk ? traj.back().t : traj.back().t - 0.5 * settle.smoothing;
    const auto samples = traj.samples();
    std::size_t i = scan_from;
    for (; i < samples.size() && samples[i].t <= trusted; ++i) {
      if (std::abs(energy[i] - e_level) > exit_threshold) return samples[i].t;
    }
    scan_from = i;
    if (final_chunk) return std::nullopt;
  }
}

std::vector<LifetimeStat> lifetime_stats(const LifetimeConfig& config) {
  config.validate();
  const SettleCriterion criterion =
      config.settle.value_or(SettleCriterion::for_params(config.params));
  const std::size_t per_level = config.ensemble_size;
  const std::size_t total = config.levels.size() * per_level;
  const auto phases = ensemble_phases(config.seed, total);

  struct Member {
    std::optional<double> lifetime;
    bool failed = false;
  };
  std::vector<Member> members(total);
  parallel_for(total, config.jobs, [&](std::size_t i) {
    ModelParams params = config.params;
    params.drive_phase = phases[i];
    try {
      members[i].lifetime = measure_lifetime(config.levels[i / per_level], params,
                                             config.integrator, criterion,
                                             config.exit_threshold, config.chunk);
    } catch (const NumericalFailure&) {
      members[i].failed = true;
    }
  });

  std::vector<LifetimeStat> stats;
  for (std::size_t l = 0; l < config.levels.size(); ++l) {
    LifetimeStat stat;
    stat.level = config.levels[l];
    std::vector<double> values;
    for (std::size_t m = 0; m < per_level; ++m) {
      const Member& member = members[l * per_level + m];
      if (member.failed) {
        ++stat.failures;
      } else if (member.lifetime) {
        values.push_back(*member.lifetime);
      } else {
        ++stat.censored;
      }
    }
    stat.sample_count = values.size();
    if (!values.empty()) {
      const double mean = pairwise_sum(values) / static_cast<double>(values.size());
      std::vector<double> sq(values.size());
      for (std::size_t k = 0; k < values.size(); ++k) {
        sq[k] = (values[k] - mean) * (values[k] - mean);
      }
      stat.mean_lifetime = mean;
      stat.std_lifetime =
          values.size() > 1 ? std::sqrt(pairwise_sum(sq) / static_cast<double>(values.size() - 1))
                            : 0.0;
    }
    stats.push_back(stat);
  }
  return stats;
}

std::vector<LifetimeStat> lifetime_stats(std::span<const Level> level_targets,
                                         std::size_t ensemble_size, std::uint64_t seed,
                                         const ModelParams& params,
                                         const IntegratorConfig& integrator) {
  LifetimeConfig config;
  config.levels.assign(level_targets.begin(), level_targets.end());
  config.ensemble_size = ensemble_size;
  config.seed = seed;
  config.params = params;
  config.integrator = integrator;
  return lifetime_stats(config);
}

// ---------------------------------------------------------------------------
// Energy-time uncertainty

std::vector<UncertaintyRecord> uncertainty_scan(const Level& level,
                                                std::span<const double> delta_e_list,
                                                const ModelParams& params,
                                                const IntegratorConfig& integrator,
                                                double escape_depth) {
  params.validate();
  integrator.validate();
  if (level.n() < 1) throw std::invalid_argument("uncertainty_scan: level must have n >= 1");
  if (params.drive_amplitude != 0.0) {
    throw std::invalid_argument("uncertainty_scan: drive must be off (a0 = 0)");
  }
  if (!(escape_depth > 0.0 && escape_depth <= 1.0)) {
    throw std::invalid_argument("uncertainty_scan: escape depth must be in (0, 1]");
  }
  for (double de : delta_e_list) {
    if (!(de > 0.0 && de < escape_depth)) {
      throw std::invalid_argument("uncertainty_scan: each delta_e must lie in (0, escape depth)");
    }
  }

  const double predicted = predicted_uncertainty_product(level, params);
  const double target = level.energy() - escape_depth;
  std::vector<UncertaintyRecord> out;
  for (double de : delta_e_list) {
    const double e0 = level.energy() - de;
    const Trajectory traj = integrate({0.0, 0.0, std::sqrt(2.0 * e0)}, integrator, params,
                                      [target](const Sample& s) { return s.e <= target; });
    const Sample& hit = traj.back();
    if (hit.e > target || traj.size() < 2) {
      throw std::runtime_error("uncertainty_scan: no escape within the integration budget");
    }
    const Sample& prev = traj[traj.size() - 2];
    const double frac = (prev.e - target) / (prev.e - hit.e);
    const double delta_t = prev.t + frac * (hit.t - prev.t);
    out.push_back({level, de, delta_t, de * delta_t, predicted});
  }
  return out;
}

double predicted_uncertainty_product(const Level& level, const ModelParams& params) {
  if (level.n() < 1) {
    throw std::invalid_argument("predicted_uncertainty_product: ground level has no escape");
  }
  if (!(params.friction_strength > 0.0)) {
    throw std::invalid_argument("predicted_uncertainty_product: friction must be > 0");
  }
  const double two_e = 2.0 * level.energy();
  return two_e / (params.gamma0() * (two_e - 1.0));
}

double log_log_slope(std::span<const UncertaintyRecord> records) {
  if (records.size() < 2) throw std::invalid_argument("log_log_slope: need >= 2 records");
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (const auto& r : records) {
    const double x = std::log(r.delta_e);
    const double y = std::log(r.delta_t);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const auto n = static_cast<double>(records.size());
  const double denom = n * sxx - sx * sx;
  if (denom == 0.0) throw std::invalid_argument("log_log_slope: delta_e values must differ");
  return (n * sxy - sx * sy) / denom;
}

}  // namespace qlo
