#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "qlo/settle.hpp"

using namespace qlo;

namespace {

ModelParams undriven(double k = 0.2) {
  ModelParams p;
  p.friction_strength = k;
  p.drive_amplitude = 0.0;
  return p;
}

// One sample per `spacing` with E(t) given by `e`.
template <typename F>
Trajectory synthetic(double t_end, double spacing, F e) {
  Trajectory traj;
  const auto n = static_cast<std::size_t>(std::llround(t_end / spacing));
  for (std::size_t i = 0; i <= n; ++i) {
    const double t = static_cast<double>(i) * spacing;
    traj.append({t, 0.0, std::sqrt(2.0 * e(t))});
  }
  return traj;
}

}  // namespace

TEST_CASE("constant energy on a level settles after one window") {
  const auto traj = synthetic(80.0, 1.0, [](double) { return 1.5; });
  const auto event = detect_settle(traj);
  REQUIRE(event);
  CHECK(event->level.n() == 1);
  CHECK(event->t_start == 0.0);
  CHECK(event->t_settle == 50.0);
  CHECK(event->end_index == 50);
}

TEST_CASE("a window shorter than required never settles") {
  const auto traj = synthetic(49.0, 1.0, [](double) { return 1.5; });
  CHECK_FALSE(detect_settle(traj));
}

TEST_CASE("frictionless motion between levels never settles") {
  ModelParams p = undriven(0.0);
  const auto traj = integrate({0.0, 0.0, 2.0}, {.dt = 1e-3, .t_max = 200.0, .sample_stride = 10}, p);
  CHECK_FALSE(detect_settle(traj));
  CHECK_FALSE(detect_settle(traj, 1e-3, 50.0));
}

TEST_CASE("undriven decay from 3.2 settles on n = 2") {
  const auto traj = integrate({0.0, 0.0, std::sqrt(6.4)},
                              {.dt = 1e-3, .t_max = 3000.0, .sample_stride = 100}, undriven());
  const auto event = detect_settle(traj);
  REQUIRE(event);
  CHECK(event->level.n() == 2);
  CHECK(event->t_settle - event->t_start == doctest::Approx(50.0));
  CHECK(std::abs(traj[event->end_index].e - 2.5) <= 1e-3);
}

TEST_CASE("a tolerance band escape restarts the window") {
  // On the level, a short excursion at t = 30, then back.
  const auto traj = synthetic(120.0, 1.0, [](double t) { return t == 30.0 ? 1.6 : 1.5; });
  const auto event = detect_settle(traj);
  REQUIRE(event);
  CHECK(event->t_start == 31.0);
  CHECK(event->t_settle == 81.0);
}

TEST_CASE("drift bound rejects a slow escape") {
  // Distance to the level grows by 2e-3 over 100 time units.
  const auto traj = synthetic(100.0, 1.0, [](double t) { return 1.5 - 1e-3 - 2e-5 * t; });
  SettleCriterion strict{.tolerance = 0.05, .window = 50.0, .smoothing = 0.0, .max_drift = 1e-4};
  CHECK_FALSE(detect_settle(traj, strict));
  strict.max_drift = 2e-3;
  CHECK(detect_settle(traj, strict));
}

TEST_CASE("smoothing removes a period-2pi oscillation") {
  const auto traj = synthetic(40.0, 0.01, [](double t) { return 2.5 + 0.03 * std::sin(t); });
  const auto smooth = smoothed_energy(traj, 2.0 * kPi);
  REQUIRE(smooth.size() == traj.size());
  for (std::size_t i = 400; i + 400 < traj.size(); ++i) {
    CHECK(std::abs(smooth[i] - 2.5) <= 1e-4);
  }
  const auto raw = smoothed_energy(traj, 0.0);
  for (std::size_t i = 0; i < traj.size(); ++i) CHECK(raw[i] == traj[i].e);
}

TEST_CASE("settled_at needs a full window of history") {
  const auto traj = synthetic(80.0, 1.0, [](double) { return 0.5; });
  const auto energy = smoothed_energy(traj, 0.0);
  const SettleCriterion crit;
  CHECK_FALSE(settled_at(traj, energy, 20, crit));
  const auto level = settled_at(traj, energy, 60, crit);
  REQUIRE(level);
  CHECK(level->n() == 0);
}

TEST_CASE("single plateau gives no transitions") {
  const auto traj = synthetic(200.0, 1.0, [](double) { return 2.5; });
  const auto plateaus = extract_plateaus(traj, SettleCriterion{});
  REQUIRE(plateaus.size() == 1);
  CHECK(plateaus[0].open);
  CHECK(plateaus[0].level.n() == 2);
  CHECK(extract_transitions(traj).empty());
}

TEST_CASE("staircase plateaus and transitions") {
  // 2.5 until 100, falls linearly to 1.5 over [100, 108], holds until 300,
  // falls to 0.5 over [300, 316].
  const auto e = [](double t) {
    if (t < 100.0) return 2.5;
    if (t < 108.0) return 2.5 - (t - 100.0) / 8.0;
    if (t < 300.0) return 1.5;
    if (t < 316.0) return 1.5 - (t - 300.0) / 16.0;
    return 0.5;
  };
  const auto traj = synthetic(500.0, 0.5, e);
  const auto plateaus = extract_plateaus(traj, SettleCriterion{}, 0.1);
  REQUIRE(plateaus.size() == 3);
  CHECK(plateaus[0].level.n() == 2);
  CHECK(plateaus[1].level.n() == 1);
  CHECK(plateaus[2].level.n() == 0);
  CHECK(plateaus[2].open);
  CHECK_FALSE(plateaus[0].open);

  const auto transitions = transitions_between(plateaus);
  REQUIRE(transitions.size() == 2);
  CHECK(transitions[0].from_level.n() == 2);
  CHECK(transitions[0].to_level.n() == 1);
  CHECK(transitions[0].t_leave == doctest::Approx(101.0));
  CHECK(transitions[0].t_arrive == doctest::Approx(107.5));
  CHECK(transitions[1].duration() == doctest::Approx(314.5 - 302.0));
  CHECK(extract_transitions(traj, 0.1).size() == 2);
}

TEST_CASE("plateau extraction rejects an exit band inside the settle band") {
  const auto traj = synthetic(100.0, 1.0, [](double) { return 0.5; });
  SettleCriterion crit{.tolerance = 0.05, .window = 10.0};
  CHECK_THROWS_AS(extract_plateaus(traj, crit, 0.01), std::invalid_argument);
}

TEST_CASE("integrate until settled stops early") {
  const auto result = integrate_until_settled(
      {0.0, 0.0, std::sqrt(6.4)}, {.dt = 1e-3, .t_max = 0.0, .sample_stride = 100}, undriven(),
      SettleCriterion{}, 1e4, 500.0);
  REQUIRE(result.settle);
  CHECK(result.settle->level.n() == 2);
  CHECK(result.trajectory.back().t < 1e4);
  CHECK(result.trajectory.back().t >= result.settle->t_settle);
}

TEST_CASE("integrate until settled reports no settle within budget") {
  const auto result = integrate_until_settled(
      {0.0, 0.0, 2.0}, {.dt = 1e-3, .t_max = 0.0, .sample_stride = 100}, undriven(0.0),
      SettleCriterion{}, 300.0, 100.0);
  CHECK_FALSE(result.settle);
  CHECK(result.trajectory.back().t == doctest::Approx(300.0));
}

TEST_CASE("criterion presets") {
  ModelParams p;
  CHECK(SettleCriterion::for_params(p).smoothing == doctest::Approx(2.0 * kPi));
  p.drive_amplitude = 0.0;
  const auto c = SettleCriterion::for_params(p);
  CHECK(c.tolerance == 1e-3);
  CHECK(c.window == 50.0);
  CHECK(c.smoothing == 0.0);
  SettleCriterion bad;
  bad.tolerance = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}
