#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

#include "qlo/oscillator.hpp"

namespace qlo {

struct IntegratorConfig {
  double dt = 1e-3;
  /// Absolute end time. A value at or before the initial time yields a
  /// single-sample trajectory.
  double t_max = 100.0;
  std::size_t sample_stride = 10;

  void validate() const;
};

struct Sample {
  double t;
  double q;
  double v;
  double e;

  OscillatorState state() const { return {t, q, v}; }
};

/// Recorded samples with strictly increasing time.
class Trajectory {
public:
  void append(const OscillatorState& state);
  /// Appends `other`, skipping its first sample when it repeats our last time.
  void extend(const Trajectory& other);
  void reserve(std::size_t n) { samples_.reserve(n); }

  std::span<const Sample> samples() const noexcept { return samples_; }
  std::size_t size() const noexcept { return samples_.size(); }
  bool empty() const noexcept { return samples_.empty(); }
  const Sample& operator[](std::size_t i) const { return samples_[i]; }
  const Sample& front() const { return samples_.front(); }
  const Sample& back() const { return samples_.back(); }

private:
  std::vector<Sample> samples_;
};

/// Raised when the integration produces a non-finite state. Carries the
/// samples recorded before the failure.
class NumericalFailure : public std::runtime_error {
public:
  NumericalFailure(double time, Trajectory partial);

  double time() const noexcept { return time_; }
  const Trajectory& partial() const noexcept { return partial_; }

private:
  double time_;
  Trajectory partial_;
};

/// One classical fourth-order Runge-Kutta step of size `dt`.
/// Throws NumericalFailure when the result is not finite.
OscillatorState step(const OscillatorState& state, double dt, const ModelParams& params);

using StopPredicate = std::function<bool(const Sample&)>;

/// Integrates from `initial` to `config.t_max`, recording the initial state,
/// every `sample_stride`-th step and the final state. When `stop` returns true
/// for a recorded sample the integration ends there.
Trajectory integrate(const OscillatorState& initial, const IntegratorConfig& config,
                     const ModelParams& params, const StopPredicate& stop = {});

/// CSV with header `t,q,v,E` and 17 significant digits.
void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory);

}  // namespace qlo
