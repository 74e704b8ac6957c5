#pragma once

// Drivers for the level-occupancy sweep, the transition staircase, level
// lifetimes and the energy-time uncertainty measurement.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "qlo/integrator.hpp"
#include "qlo/oscillator.hpp"
#include "qlo/settle.hpp"

namespace qlo {

// ---------------------------------------------------------------------------
// Occupancy sweep

struct SweepConfig {
  std::vector<double> v0_grid;
  std::vector<double> observation_times{10.0, 100.0, 1000.0, 10000.0};
  ModelParams params;
  /// dt and sample_stride are used; the end time follows from the
  /// observation times.
  IntegratorConfig integrator{.dt = 1e-3, .t_max = 0.0, .sample_stride = 100};
  /// Defaults to SettleCriterion::for_params(params).
  std::optional<SettleCriterion> settle;
  std::size_t jobs = 1;

  void validate() const;
  SettleCriterion resolved_settle() const;
};

struct OccupancyRow {
  double v0;
  double t_obs;
  /// Energy at t_obs, averaged over the settle criterion's smoothing window.
  double energy_at_t;
  std::optional<Level> settled_level;
  bool failed = false;
};

/// Per-V0 summary: the earliest settling anywhere in the run.
struct SweepRun {
  double v0;
  std::optional<SettleEvent> first_settle;
  std::optional<double> failure_time;
};

struct SweepResult {
  std::vector<OccupancyRow> rows;  ///< V0-major, in input order
  std::vector<SweepRun> runs;
  std::size_t failures = 0;
};

/// Integrates every V0 from (q=0, v=V0) and samples each observation time.
/// A numerical failure marks the affected rows and the sweep continues.
SweepResult occupancy_sweep(const SweepConfig& sweep);

// ---------------------------------------------------------------------------
// Staircase

struct StaircaseResult {
  Trajectory trajectory;
  std::vector<Plateau> plateaus;
  std::vector<TransitionEvent> transitions;
};

StaircaseResult staircase(double v0, double t_max, const ModelParams& params,
                          const IntegratorConfig& integrator,
                          const std::optional<SettleCriterion>& settle = std::nullopt,
                          double exit_threshold = 0.1);

// ---------------------------------------------------------------------------
// Lifetimes

struct LifetimeConfig {
  std::vector<Level> levels;
  std::size_t ensemble_size = 32;
  std::uint64_t seed = 0;
  ModelParams params;
  /// t_max is the per-member observation budget.
  IntegratorConfig integrator{.dt = 1e-3, .t_max = 2000.0, .sample_stride = 100};
  std::optional<SettleCriterion> settle;
  double exit_threshold = 0.1;
  double chunk = 250.0;
  std::size_t jobs = 1;

  void validate() const;
};

struct LifetimeStat {
  Level level;
  std::optional<double> mean_lifetime;  ///< absent when every member is censored
  std::optional<double> std_lifetime;
  std::size_t sample_count = 0;
  std::size_t censored = 0;
  std::size_t failures = 0;
};

/// Drive phases for the ensemble, level-major: phase of member m of level
/// index l is element l * ensemble_size + m. Uniform on [0, 2 pi).
std::vector<double> ensemble_phases(std::uint64_t seed, std::size_t count);

/// Time until a member started on `level` leaves the exit band, or nullopt
/// when it stays within the budget.
std::optional<double> measure_lifetime(const Level& level, const ModelParams& params,
                                       const IntegratorConfig& integrator,
                                       const SettleCriterion& settle, double exit_threshold,
                                       double chunk);

std::vector<LifetimeStat> lifetime_stats(const LifetimeConfig& config);

std::vector<LifetimeStat> lifetime_stats(std::span<const Level> level_targets,
                                         std::size_t ensemble_size, std::uint64_t seed,
                                         const ModelParams& params,
                                         const IntegratorConfig& integrator);

// ---------------------------------------------------------------------------
// Energy-time uncertainty

struct UncertaintyRecord {
  Level level;
  double delta_e;
  double delta_t;
  double product;
  double predicted;
};

/// Distance below the level at which the oscillator counts as escaped: the
/// midpoint to the next level down.
inline constexpr double kEscapeDepth = 0.5;

/// Starts each run at E = E_n - delta_e (q = 0) with the drive off and
/// measures the time until E first reaches E_n - escape_depth. The crossing
/// time is linearly interpolated between samples; integrator.t_max is the
/// budget.
std::vector<UncertaintyRecord> uncertainty_scan(const Level& level,
                                                std::span<const double> delta_e_list,
                                                const ModelParams& params,
                                                const IntegratorConfig& integrator,
                                                double escape_depth = kEscapeDepth);

/// Closed-form product 2 E_n / (gamma0 (2 E_n - 1)) from linearizing the
/// friction near the level, averaging v^2 over a period and integrating
/// dxi/dt = C xi^2.
double predicted_uncertainty_product(const Level& level, const ModelParams& params);

/// Least-squares slope of log(delta_t) against log(delta_e).
double log_log_slope(std::span<const UncertaintyRecord> records);

}  // namespace qlo
