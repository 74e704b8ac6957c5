#pragma once

// Level detection on recorded trajectories: settling, plateaus, transitions.

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "qlo/integrator.hpp"
#include "qlo/oscillator.hpp"

namespace qlo {

/// When a trajectory counts as sitting on a level.
///
/// The (optionally smoothed) energy must stay within `tolerance` of one level
/// for `window` time units, and its distance from that level may not grow by
/// more than `max_drift` across the window. `smoothing` is the width of a
/// centered moving average applied to E first; 0 uses the raw energy.
struct SettleCriterion {
  double tolerance = 1e-3;
  double window = 50.0;
  double smoothing = 0.0;
  double max_drift = std::numeric_limits<double>::infinity();

  void validate() const;

  /// Raw energy, 1e-3 band, 50 time units.
  static SettleCriterion undriven();
  /// One-period average of E, 0.05 band, half a period of dwell.
  static SettleCriterion driven();
  /// undriven() without drive, driven() otherwise.
  static SettleCriterion for_params(const ModelParams& params);
};

struct SettleEvent {
  Level level;
  double t_start;   ///< first time of the qualifying window
  double t_settle;  ///< time at which the window completes
  std::size_t start_index;
  std::size_t end_index;
};

/// Interval during which the energy stays within the exit threshold of a
/// level on which the trajectory settled at least once.
struct Plateau {
  Level level;
  double t_arrive;
  double t_leave;  ///< end of the trajectory when `open`
  bool open;       ///< still on the level when the trajectory ends
  std::size_t arrive_index;
  std::size_t leave_index;

  double lifetime() const noexcept { return t_leave - t_arrive; }
};

struct TransitionEvent {
  Level from_level;
  Level to_level;
  double t_leave;
  double t_arrive;

  double duration() const noexcept { return t_arrive - t_leave; }
};

/// Centered moving average of E over `smoothing` time units, truncated at the
/// ends. Returns the raw energies for smoothing == 0.
std::vector<double> smoothed_energy(const Trajectory& trajectory, double smoothing);

std::optional<SettleEvent> detect_settle(const Trajectory& trajectory,
                                         const SettleCriterion& criterion = {});

std::optional<SettleEvent> detect_settle(const Trajectory& trajectory, double eps_settle,
                                         double window);

/// Searches `energy` (one value per sample) starting at sample `from`.
std::optional<SettleEvent> detect_settle(const Trajectory& trajectory,
                                         std::span<const double> energy,
                                         const SettleCriterion& criterion,
                                         std::size_t from = 0);

/// Level the trajectory is settled on over the window ending at `index`.
std::optional<Level> settled_at(const Trajectory& trajectory, std::span<const double> energy,
                                std::size_t index, const SettleCriterion& criterion);

std::vector<Plateau> extract_plateaus(const Trajectory& trajectory,
                                      const SettleCriterion& criterion,
                                      double exit_threshold = 0.1);

std::vector<TransitionEvent> transitions_between(std::span<const Plateau> plateaus);

std::vector<TransitionEvent> extract_transitions(const Trajectory& trajectory,
                                                 const SettleCriterion& criterion,
                                                 double exit_threshold = 0.1);

std::vector<TransitionEvent> extract_transitions(const Trajectory& trajectory,
                                                 double exit_threshold = 0.1);


struct RelaxationResult {
  Trajectory trajectory;
  std::optional<SettleEvent> settle;
};

/// Integrates in chunks of `chunk` time units until `criterion` is met or
/// `budget` time units have elapsed. Settling that depends on a smoothing
/// window reaching past the recorded end is not accepted until more samples
/// exist. Throws NumericalFailure like integrate().
RelaxationResult integrate_until_settled(const OscillatorState& initial,
                                         const IntegratorConfig& integrator,
                                         const ModelParams& params,
                                         const SettleCriterion& criterion, double budget,
                                         double chunk = 200.0);

}  // namespace qlo
