#include "qlo/oscillator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qlo {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

OscillatorState::OscillatorState(double t, double q, double v) : t_(t), q_(q), v_(v) {
  require(std::isfinite(t) && std::isfinite(q) && std::isfinite(v),
          "oscillator state must be finite");
}

void ModelParams::validate() const {
  require(std::isfinite(friction_strength) && friction_strength >= 0.0,
          "friction_strength must be finite and >= 0");
  require(std::isfinite(drive_amplitude) && drive_amplitude >= 0.0,
          "drive_amplitude must be finite and >= 0");
  require(std::isfinite(drive_frequency) && drive_frequency > 0.0,
          "drive_frequency must be finite and > 0");
  require(std::isfinite(drive_phase), "drive_phase must be finite");
  require(std::isfinite(energy_floor) && energy_floor > 0.0,
          "energy_floor must be finite and > 0");
}

double ModelParams::gamma0() const noexcept {
  return friction_strength * kPi * kPi / 2.0;
}

Level::Level(std::uint64_t n) : n_(n) {
  if (n > kMaxIndex) throw std::out_of_range("level index exceeds cap of 1e6");
}

void GeneralFrictionSpec::validate() const {
  require(std::isfinite(a) && a > 0.0, "friction scale a must be finite and > 0");
}

double energy(const OscillatorState& state) noexcept {
  return 0.5 * (state.v() * state.v() + state.q() * state.q());
}

double drive(double t, const ModelParams& params) noexcept {
  if (params.drive_amplitude == 0.0) return 0.0;
  return params.drive_amplitude * std::sin(params.drive_frequency * t + params.drive_phase);
}

double level_selector(double s) noexcept {
  // cos(pi (m + d) / 2) = -sin(pi m / 2) sin(pi d / 2) for odd m.
  const double m = 2.0 * std::round((s - 1.0) / 2.0) + 1.0;
  const double d = s - m;
  const double h = std::sin(0.5 * kPi * d);
  return h * h;
}

double friction_term(const OscillatorState& state, const ModelParams& params) noexcept {
  const double v = state.v();
  const double s = v * v + state.q() * state.q();
  const double den = std::max(s * s, params.energy_floor);
  return -params.friction_strength * v * (s - 1.0) * level_selector(s) / den;
}

double acceleration(const OscillatorState& state, const ModelParams& params) noexcept {
  return -state.q() + friction_term(state, params) + drive(state.t(), params);
}

double energy_rate(const OscillatorState& state, const ModelParams& params) noexcept {
  return state.v() * (friction_term(state, params) + drive(state.t(), params));
}

Level nearest_level(double e) {
  if (!std::isfinite(e) || e < 0.0) {
    throw std::invalid_argument("nearest_level: energy must be finite and >= 0");
  }
  if (e <= 0.5) return Level(0);
  // Candidates n = floor(e - 1/2) and n + 1; ties resolve downward.
  const double lower = std::floor(e - 0.5);
  if (lower > static_cast<double>(Level::kMaxIndex)) {
    throw std::out_of_range("nearest_level: energy beyond level cap");
  }
  auto n = static_cast<std::uint64_t>(lower);
  const double below = e - (lower + 0.5);
  const double above = (lower + 1.5) - e;
  if (above < below) ++n;
  return Level(n);
}

double mu_general(double action, const GeneralFrictionSpec& spec) {
  spec.validate();
  if (!std::isfinite(action) || action < 0.0) {
    throw std::invalid_argument("mu_general: action must be finite and >= 0");
  }
  // cos^2(pi J) = level_selector(2J).
  return spec.a * (action - 0.5) * level_selector(2.0 * action);
}

std::string to_string(const Level& level) {
  return "n=" + std::to_string(level.n());
}

}  // namespace qlo
