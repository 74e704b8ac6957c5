#include "qlo/franck_hertz.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "qlo/parallel.hpp"

namespace qlo {

CollisionOutcome collide(double u, const OscillatorState& oscillator, double r) {
  if (!std::isfinite(u) || !(std::isfinite(r) && r > 0.0)) {
    throw std::invalid_argument("collide: velocity must be finite and mass ratio > 0");
  }
  const double v = oscillator.v();
  const double u_after = ((r - 1.0) * u + 2.0 * v) / (r + 1.0);
  const double v_after = ((1.0 - r) * v + 2.0 * r * u) / (r + 1.0);
  return {u_after, OscillatorState(oscillator.t(), oscillator.q(), v_after)};
}

SettleCriterion franck_hertz_settle() {
  return {.tolerance = 0.05, .window = 50.0, .smoothing = 0.0, .max_drift = 1e-4};
}

void CollisionConfig::validate() const {
  if (!(std::isfinite(mass_ratio) && mass_ratio > 0.0)) {
    throw std::invalid_argument("mass_ratio must be finite and > 0");
  }
  if (n_phases < 1) throw std::invalid_argument("n_phases must be >= 1");
  if (!(std::isfinite(relax_t_max) && relax_t_max > 0.0)) {
    throw std::invalid_argument("relax_t_max must be finite and > 0");
  }
  settle.validate();
  integrator.validate();
  if (!(chunk > 0.0)) throw std::invalid_argument("chunk must be > 0");
  if (!(elastic_tolerance >= 0.0)) throw std::invalid_argument("elastic_tolerance must be >= 0");
}

ScatterResult scatter_once(double t0, double phase, const CollisionConfig& config,
                           const ModelParams& params) {
  config.validate();
  params.validate();
  if (params.drive_amplitude != 0.0) {
    throw std::invalid_argument("scatter_once: drive must be off (a0 = 0)");
  }
  if (!(std::isfinite(t0) && t0 > 0.0)) {
    throw std::invalid_argument("scatter_once: electron energy must be > 0");
  }
  if (!std::isfinite(phase)) throw std::invalid_argument("scatter_once: phase must be finite");

  const double r = config.mass_ratio;
  const ElectronState electron{std::sqrt(2.0 * t0 / r), r};
  const OscillatorState ground(0.0, std::sin(phase), std::cos(phase));
  const CollisionOutcome hit = collide(electron.u, ground, r);
  const double electron_after = ElectronState{hit.u, r}.kinetic();

  ScatterResult out{};
  out.t0 = t0;
  out.phase = phase;
  out.e1 = energy(hit.oscillator);

  const RelaxationResult relax = integrate_until_settled(
      hit.oscillator, config.integrator, params, config.settle, config.relax_t_max, config.chunk);

  if (relax.settle) {
    out.settled = true;
    out.level = relax.settle->level;
    out.e_settled = out.level.energy();
    out.e_measured = relax.trajectory[relax.settle->end_index].e;
    out.t_settle = relax.settle->t_settle;
  } else {
    // Budget exhausted: report what was emitted so far.
    out.level = nearest_level(relax.trajectory.back().e);
    out.e_measured = relax.trajectory.back().e;
    out.e_settled = out.e_measured;
    out.t_settle = relax.trajectory.back().t;
  }

  double emitted = out.e1 - out.e_settled;
  if (emitted < 0.0 && !config.pump_from_electron) {
    out.external_energy = -emitted;
    emitted = 0.0;
  }
  out.t_final = std::max(0.0, electron_after + emitted);
  out.elastic = out.settled && std::abs(out.t_final - t0) <= config.elastic_tolerance;
  return out;
}

std::vector<double> phase_grid(std::size_t n_phases) {
  std::vector<double> phases(n_phases);
  for (std::size_t j = 0; j < n_phases; ++j) {
    phases[j] = 2.0 * kPi * static_cast<double>(j) / static_cast<double>(n_phases);
  }
  return phases;
}

std::vector<ScatterResult> scatter_grid(std::span<const double> t0_grid,
                                        const CollisionConfig& config,
                                        const ModelParams& params, std::vector<bool>* failed) {
  config.validate();
  for (double t0 : t0_grid) {
    if (!(std::isfinite(t0) && t0 > 0.0)) {
      throw std::invalid_argument("franck-hertz energies must be positive");
    }
  }
  const auto phases = phase_grid(config.n_phases);
  const std::size_t per_point = phases.size();
  const std::size_t total = t0_grid.size() * per_point;
  std::vector<ScatterResult> results(total);
  std::vector<char> failure(total, 0);
  parallel_for(total, config.jobs, [&](std::size_t i) {
    const double t0 = t0_grid[i / per_point];
    const double phase = phases[i % per_point];
    try {
      results[i] = scatter_once(t0, phase, config, params);
    } catch (const NumericalFailure&) {
      results[i] = ScatterResult{};
      results[i].t0 = t0;
      results[i].phase = phase;
      failure[i] = 1;
    }
  });
  if (failed) failed->assign(failure.begin(), failure.end());
  return results;
}

std::vector<FHCurvePoint> fh_curve(std::span<const double> t0_grid,
                                   const CollisionConfig& config, const ModelParams& params) {
  if (t0_grid.empty()) throw std::invalid_argument("franck-hertz grid must not be empty");
  std::vector<bool> failed;
  const auto results = scatter_grid(t0_grid, config, params, &failed);
  const std::size_t per_point = config.n_phases;

  std::vector<FHCurvePoint> curve;
  curve.reserve(t0_grid.size());
  for (std::size_t p = 0; p < t0_grid.size(); ++p) {
    FHCurvePoint point{t0_grid[p], 0.0, 0.0, per_point};
    std::vector<double> energies;
    std::vector<double> speeds;
    for (std::size_t j = 0; j < per_point; ++j) {
      const std::size_t i = p * per_point + j;
      if (failed[i]) {
        ++point.failures;
        continue;
      }
      const ScatterResult& r = results[i];
      if (!r.settled) {
        ++point.non_settled_count;
        continue;
      }
      energies.push_back(r.t_final);
      speeds.push_back(std::sqrt(2.0 * r.t_final / config.mass_ratio));
    }
    if (energies.empty()) {
      point.mean_final_energy = std::nan("");
      point.mean_final_speed = std::nan("");
    } else {
      const auto count = static_cast<double>(energies.size());
      point.mean_final_energy = pairwise_sum(energies) / count;
      point.mean_final_speed = pairwise_sum(speeds) / count;
    }
    curve.push_back(point);
  }
  return curve;
}

FHCurvePoint scatter_ensemble(double t0, const CollisionConfig& config,
                              const ModelParams& params) {
  const double grid[] = {t0};
  return fh_curve(grid, config, params).front();
}

}  // namespace qlo
