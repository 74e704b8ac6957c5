#pragma once

// Electron scattering on the oscillator.
//
// An electron collides elastically and instantaneously with an oscillator
// resting on the ground level. The oscillator then relaxes without drive
// until it first settles on a level; whatever it emits (or absorbs) on the
// way is handed back to (or taken from) the electron. An oscillator stranded
// on an excited level keeps its quanta and the electron leaves with less
// energy.
//
// Energies are in oscillator units. With mass ratio r = m_electron /
// m_oscillator the electron's kinetic energy is r u^2 / 2.

#include <cstddef>
#include <span>
#include <vector>

#include "qlo/integrator.hpp"
#include "qlo/oscillator.hpp"
#include "qlo/settle.hpp"

namespace qlo {

struct ElectronState {
  double u = 0.0;
  double mass_ratio = 1.0;

  double kinetic() const noexcept { return 0.5 * mass_ratio * u * u; }
};

struct CollisionOutcome {
  double u;
  OscillatorState oscillator;
};

/// One-dimensional elastic collision; q and t are unchanged. Conserves
/// r u + v and r u^2 / 2 + v^2 / 2.
CollisionOutcome collide(double u, const OscillatorState& oscillator, double mass_ratio);

/// Band 0.05, 50 time units, and the distance to the level may grow by at
/// most 1e-4 over the window. The drift bound keeps an oscillator that is
/// escaping from just below an excited level from counting as settled there.
SettleCriterion franck_hertz_settle();

struct CollisionConfig {
  double mass_ratio = 1.0;
  std::size_t n_phases = 64;
  double relax_t_max = 1e4;
  SettleCriterion settle = franck_hertz_settle();
  bool pump_from_electron = true;
  IntegratorConfig integrator{.dt = 1e-2, .t_max = 0.0, .sample_stride = 1};
  double chunk = 200.0;
  double elastic_tolerance = 1e-3;
  std::size_t jobs = 1;

  void validate() const;
};

struct ScatterResult {
  double t0;
  double phase;
  double e1;          ///< oscillator energy just after the collision
  double e_settled;   ///< energy of the level the oscillator settled on
  double e_measured;  ///< oscillator energy when settling was detected
  double t_settle;
  double t_final;  ///< electron kinetic energy after the whole event
  double external_energy = 0.0;  ///< pumping not charged to the electron
  Level level;
  bool settled = false;
  bool elastic = false;
};

struct FHCurvePoint {
  double t0;
  double mean_final_energy;
  double mean_final_speed;
  std::size_t n_phases;
  std::size_t non_settled_count = 0;
  std::size_t failures = 0;
};

/// Collision phase phi places the oscillator at q = sin(phi), v = cos(phi).
/// Requires params with drive off. Throws NumericalFailure if relaxation
/// breaks down.
ScatterResult scatter_once(double t0, double phase, const CollisionConfig& config,
                           const ModelParams& params);

/// Phases 2 pi j / n_phases for j = 0 .. n_phases - 1.
std::vector<double> phase_grid(std::size_t n_phases);

FHCurvePoint scatter_ensemble(double t0, const CollisionConfig& config,
                              const ModelParams& params);

/// One point per energy, in input order. Averages use ordered pairwise
/// summation over settled phases only.
std::vector<FHCurvePoint> fh_curve(std::span<const double> t0_grid,
                                   const CollisionConfig& config, const ModelParams& params);

/// Every phase outcome behind fh_curve, energy-major.
std::vector<ScatterResult> scatter_grid(std::span<const double> t0_grid,
                                        const CollisionConfig& config,
                                        const ModelParams& params,
                                        std::vector<bool>* failed = nullptr);

}  // namespace qlo
