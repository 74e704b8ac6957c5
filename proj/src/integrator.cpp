#include "qlo/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <utility>

#include "qlo/csv.hpp"

namespace qlo {

void IntegratorConfig::validate() const {
  if (!(std::isfinite(dt) && dt > 0.0)) throw std::invalid_argument("dt must be finite and > 0");
  if (!(std::isfinite(t_max) && t_max >= 0.0)) {
    throw std::invalid_argument("t_max must be finite and >= 0");
  }
  if (sample_stride < 1) throw std::invalid_argument("sample_stride must be >= 1");
}

void Trajectory::append(const OscillatorState& s) {
  if (!samples_.empty() && !(s.t() > samples_.back().t)) {
    throw std::logic_error("trajectory times must be strictly increasing");
  }
  samples_.push_back({s.t(), s.q(), s.v(), energy(s)});
}

void Trajectory::extend(const Trajectory& other) {
  for (const Sample& s : other.samples()) {
    if (!samples_.empty() && s.t == samples_.back().t) continue;
    append(s.state());
  }
}

NumericalFailure::NumericalFailure(double time, Trajectory partial)
    : std::runtime_error("non-finite oscillator state at t=" + format_double(time)),
      time_(time),
      partial_(std::move(partial)) {}

namespace {

struct Derivative {
  double dq;
  double dv;
};

// Right-hand side without constructing validated states.
inline Derivative rhs(double t, double q, double v, const ModelParams& p) noexcept {
  const double s = v * v + q * q;
  const double den = std::max(s * s, p.energy_floor);
  const double friction = -p.friction_strength * v * (s - 1.0) * level_selector(s) / den;
  const double force = p.drive_amplitude == 0.0
                           ? 0.0
                           : p.drive_amplitude * std::sin(p.drive_frequency * t + p.drive_phase);
  return {v, -q + friction + force};
}

struct Phase {
  double q;
  double v;
};

inline Phase rk4(double t, Phase x, double dt, const ModelParams& p) noexcept {
  const double h2 = 0.5 * dt;
  const Derivative k1 = rhs(t, x.q, x.v, p);
  const Derivative k2 = rhs(t + h2, x.q + h2 * k1.dq, x.v + h2 * k1.dv, p);
  const Derivative k3 = rhs(t + h2, x.q + h2 * k2.dq, x.v + h2 * k2.dv, p);
  const Derivative k4 = rhs(t + dt, x.q + dt * k3.dq, x.v + dt * k3.dv, p);
  const double w = dt / 6.0;
  return {x.q + w * (k1.dq + 2.0 * k2.dq + 2.0 * k3.dq + k4.dq),
          x.v + w * (k1.dv + 2.0 * k2.dv + 2.0 * k3.dv + k4.dv)};
}

inline bool finite(Phase x) noexcept { return std::isfinite(x.q) && std::isfinite(x.v); }

}  // namespace

OscillatorState step(const OscillatorState& state, double dt, const ModelParams& params) {
  if (!(dt > 0.0)) throw std::invalid_argument("step: dt must be > 0");
  const Phase next = rk4(state.t(), {state.q(), state.v()}, dt, params);
  const double t = state.t() + dt;
  if (!finite(next)) {
    Trajectory partial;
    partial.append(state);
    throw NumericalFailure(t, std::move(partial));
  }
  return {t, next.q, next.v};
}

Trajectory integrate(const OscillatorState& initial, const IntegratorConfig& config,
                     const ModelParams& params, const StopPredicate& stop) {
  config.validate();
  params.validate();

  Trajectory traj;
  traj.append(initial);
  if (stop && stop(traj.back())) return traj;

  const double t0 = initial.t();
  const double span = config.t_max - t0;
  if (!(span > 0.0)) return traj;

  // Times are t0 + i*dt, never accumulated. A trailing partial step lands
  // exactly on t_max.
  const double ratio = span / config.dt;
  auto full_steps = static_cast<std::size_t>(std::floor(ratio + 1e-9));
  double remainder = config.t_max - (t0 + static_cast<double>(full_steps) * config.dt);
  if (remainder <= 1e-9 * config.dt) remainder = 0.0;
  traj.reserve(full_steps / config.sample_stride + 2);

  Phase x{initial.q(), initial.v()};
  double t = t0;
  for (std::size_t i = 1; i <= full_steps; ++i) {
    x = rk4(t, x, config.dt, params);
    t = (i == full_steps && remainder == 0.0) ? config.t_max
                                              : t0 + static_cast<double>(i) * config.dt;
    if (!finite(x)) throw NumericalFailure(t, std::move(traj));
    const bool last = (i == full_steps) && remainder == 0.0;
    if (i % config.sample_stride == 0 || last) {
      traj.append({t, x.q, x.v});
      if (stop && stop(traj.back())) return traj;
    }
  }
  if (remainder > 0.0) {
    x = rk4(t, x, remainder, params);
    if (!finite(x)) throw NumericalFailure(config.t_max, std::move(traj));
    traj.append({config.t_max, x.q, x.v});
    if (stop) stop(traj.back());
  }
  return traj;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory) {
  CsvWriter csv(out, {"t", "q", "v", "E"});
  for (const Sample& s : trajectory.samples()) {
    csv.row(s.t, s.q, s.v, s.e);
  }
}

}  // namespace qlo
