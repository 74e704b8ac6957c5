#pragma once

// Nondimensional oscillator with action-selective friction.
//
// Units: time in 1/omega, coordinate in sqrt(hbar/(m omega)), energy in
// hbar*omega. In these units the equation of motion is
//
//   q'' + q = -k * v * (s - 1) * cos^2(pi s / 2) / s^2 + f(t),   s = q^2 + v^2
//
// with f(t) = a0 * sin(omega_d * t + phi_d). The friction vanishes on the
// Bohr-Sommerfeld levels s = 2n + 1 (E = n + 1/2), removes energy above the
// ground level and pumps energy in below it.

#include <compare>
#include <cstdint>
#include <string>

namespace qlo {

inline constexpr double kPi = 3.141592653589793238462643383279502884;

/// Instantaneous oscillator state. All fields are finite.
class OscillatorState {
public:
  OscillatorState() = default;
  OscillatorState(double t, double q, double v);

  double t() const noexcept { return t_; }
  double q() const noexcept { return q_; }
  double v() const noexcept { return v_; }

private:
  double t_ = 0.0;
  double q_ = 0.0;
  double v_ = 0.0;
};

/// Parameters of the equation of motion.
///
/// `friction_strength` is the dimensionless prefactor 2*gamma0/pi^2.
struct ModelParams {
  double friction_strength = 0.2;
  double drive_amplitude = 0.05;
  double drive_frequency = 2.0;
  double drive_phase = 0.0;
  double energy_floor = 1e-6;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;

  /// gamma0 = k * pi^2 / 2.
  double gamma0() const noexcept;

  bool driven() const noexcept { return drive_amplitude > 0.0; }
};

/// A stationary level E_n = n + 1/2. Its action equals its energy.
class Level {
public:
  static constexpr std::uint64_t kMaxIndex = 1'000'000;

  Level() = default;
  explicit Level(std::uint64_t n);

  std::uint64_t n() const noexcept { return n_; }
  double energy() const noexcept { return static_cast<double>(n_) + 0.5; }
  double action() const noexcept { return energy(); }

  friend auto operator<=>(const Level&, const Level&) = default;

private:
  std::uint64_t n_ = 0;
};

/// Scale of the general friction law mu(J) = a (J - 1/2) cos^2(pi J).
struct GeneralFrictionSpec {
  double a = 1.0;
  void validate() const;
};

double energy(const OscillatorState& state) noexcept;

/// External disturbance a0 * sin(omega_d t + phi_d).
double drive(double t, const ModelParams& params) noexcept;

/// cos^2(pi s / 2), evaluated as sin^2(pi d / 2) with d the offset of s from
/// the nearest odd integer. This is exactly zero on the levels and keeps full
/// relative accuracy next to them.
double level_selector(double s) noexcept;

double friction_term(const OscillatorState& state, const ModelParams& params) noexcept;
double acceleration(const OscillatorState& state, const ModelParams& params) noexcept;

/// dE/dt along trajectories: v * (friction + drive).
double energy_rate(const OscillatorState& state, const ModelParams& params) noexcept;

/// Closest level; exact midpoints go to the lower level. Throws on negative
/// or non-finite energy and on energies beyond the level cap.
Level nearest_level(double energy);

double mu_general(double action, const GeneralFrictionSpec& spec);

std::string to_string(const Level& level);

}  // namespace qlo
