#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "oracle_values.hpp"
#include "qlo/franck_hertz.hpp"

using namespace qlo;

namespace {

ModelParams undriven() {
  ModelParams p;
  p.drive_amplitude = 0.0;
  return p;
}

CollisionConfig phases(std::size_t n) {
  CollisionConfig c;
  c.n_phases = n;
  return c;
}

}  // namespace

TEST_CASE("equal masses exchange velocities") {
  auto out = collide(1.5, {0.0, 0.3, 0.0}, 1.0);
  CHECK(out.u == 0.0);
  CHECK(out.oscillator.v() == 1.5);
  CHECK(out.oscillator.q() == 0.3);

  out = collide(0.0, {0.0, 0.0, -1.0}, 1.0);
  CHECK(out.u == -1.0);
  CHECK(out.oscillator.v() == 0.0);
}

TEST_CASE("collisions conserve momentum and kinetic energy") {
  for (double r : {0.1, 0.5, 1.0, 2.0, 10.0}) {
    for (double u : {2.0, -0.7, 0.0, 3.3}) {
      for (double v : {0.0, 1.0, -2.5}) {
        const auto out = collide(u, {0.0, 0.1, v}, r);
        const double p0 = r * u + v;
        const double p1 = r * out.u + out.oscillator.v();
        const double k0 = 0.5 * r * u * u + 0.5 * v * v;
        const double k1 = 0.5 * r * out.u * out.u + 0.5 * out.oscillator.v() * out.oscillator.v();
        CHECK(std::abs(p1 - p0) <= 1e-14 * std::max(1.0, std::abs(p0)));
        CHECK(std::abs(k1 - k0) <= 1e-14 * std::max(1.0, k0));
      }
    }
  }
  CHECK_THROWS_AS(collide(1.0, {0.0, 0.0, 0.0}, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(collide(std::nan(""), {0.0, 0.0, 0.0}, 1.0), std::invalid_argument);
}

TEST_CASE("below threshold the electron keeps its energy") {
  const auto r = scatter_once(1.4, 0.0, phases(1), undriven());
  CHECK(r.e1 == doctest::Approx(1.4));
  CHECK(r.settled);
  CHECK(r.level.n() == 0);
  CHECK(std::abs(r.t_final - 1.4) <= 1e-3);
  CHECK(r.elastic);
}

TEST_CASE("above threshold one quantum is lost") {
  const auto r = scatter_once(1.4, kPi / 2.0, phases(1), undriven());
  CHECK(r.e1 == doctest::Approx(1.9));
  REQUIRE(r.settled);
  CHECK(r.level.n() == 1);
  CHECK(r.e_settled == 1.5);
  CHECK(std::abs(r.e_measured - 1.5) <= 0.05);
  CHECK(r.t_final == doctest::Approx(0.4).epsilon(1e-12));
  CHECK_FALSE(r.elastic);
}

TEST_CASE("sub-ground pumping is charged to the electron unless disabled") {
  const auto charged = scatter_once(0.2, 0.0, phases(1), undriven());
  CHECK(charged.t_final == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(charged.external_energy == 0.0);

  CollisionConfig no_pump = phases(1);
  no_pump.pump_from_electron = false;
  const auto external = scatter_once(0.2, 0.0, no_pump, undriven());
  CHECK(external.t_final == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(external.external_energy == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("a velocity-matched collision changes nothing") {
  // t0 = 0.5 gives u = 1, equal to v at phase 0.
  const auto point = scatter_ensemble(0.5, phases(1), undriven());
  CHECK(point.n_phases == 1);
  CHECK(point.mean_final_energy == 0.5);
  CHECK(point.mean_final_speed == 1.0);
}

TEST_CASE("ensemble means") {
  const auto low = scatter_ensemble(0.5, phases(64), undriven());
  CHECK(std::abs(low.mean_final_energy - 0.5) <= 0.02 * 0.5);

  const auto mid = scatter_ensemble(1.3, phases(64), undriven());
  CHECK(mid.mean_final_energy < 1.25);
  CHECK(mid.mean_final_energy == doctest::Approx(oracle::kFhMeanEnergyT13).epsilon(1e-12));
  CHECK(mid.non_settled_count == 0);
}

TEST_CASE("elastic band") {
  const double grid[] = {0.2, 0.4, 0.6, 0.8};
  const auto curve = fh_curve(grid, phases(64), undriven());
  REQUIRE(curve.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(curve[i].t0 == grid[i]);
    CHECK(std::abs(curve[i].mean_final_energy - grid[i]) <= 0.02 * grid[i]);
  }
}

TEST_CASE("curve matches the landing-rule reference") {
  std::vector<double> grid;
  std::vector<std::size_t> index;
  for (std::size_t i = 0; i < std::size(oracle::kFhGrid); i += 3) {
    grid.push_back(oracle::kFhGrid[i]);
    index.push_back(i);
  }
  CollisionConfig config = phases(64);
  config.jobs = 0;
  const auto curve = fh_curve(grid, config, undriven());
  REQUIRE(curve.size() == grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    CAPTURE(grid[k]);
    CHECK(curve[k].mean_final_energy ==
          doctest::Approx(oracle::kFhMeanEnergy[index[k]]).epsilon(1e-12));
    CHECK(curve[k].mean_final_speed ==
          doctest::Approx(oracle::kFhMeanSpeed[index[k]]).epsilon(1e-12));
    CHECK(curve[k].non_settled_count == 0);
    CHECK(curve[k].failures == 0);
  }
}

TEST_CASE("inelastic losses are whole quanta") {
  const double grid[] = {1.1, 1.6, 2.0};
  for (const auto& r : scatter_grid(grid, phases(32), undriven())) {
    REQUIRE(r.settled);
    const double loss = r.t0 - r.t_final;
    if (loss > 1e-3) {
      CHECK(std::abs(loss - std::round(loss)) <= 1e-3);
      CHECK(std::round(loss) == static_cast<double>(r.level.n()));
    } else {
      CHECK(r.elastic);
    }
  }
}

TEST_CASE("coarse relaxation step gives the same curve as a fine one") {
  const double grid[] = {0.7, 1.2, 1.6};
  CollisionConfig coarse = phases(16);
  CollisionConfig fine = phases(16);
  fine.integrator.dt = 1e-3;
  fine.integrator.sample_stride = 10;
  const auto a = fh_curve(grid, coarse, undriven());
  const auto b = fh_curve(grid, fine, undriven());
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(a[i].mean_final_energy == doctest::Approx(b[i].mean_final_energy).epsilon(1e-12));
  }
}

TEST_CASE("worker count does not change the curve") {
  const double grid[] = {0.9, 1.3};
  CollisionConfig config = phases(8);
  config.jobs = 1;
  const auto serial = fh_curve(grid, config, undriven());
  config.jobs = 3;
  const auto parallel = fh_curve(grid, config, undriven());
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(serial[i].mean_final_energy == parallel[i].mean_final_energy);
    CHECK(serial[i].mean_final_speed == parallel[i].mean_final_speed);
  }
}

TEST_CASE("phase grid") {
  const auto grid = phase_grid(4);
  REQUIRE(grid.size() == 4);
  CHECK(grid[0] == 0.0);
  CHECK(grid[1] == doctest::Approx(kPi / 2.0));
  CHECK(grid[3] == doctest::Approx(3.0 * kPi / 2.0));
}

TEST_CASE("preconditions") {
  CHECK_THROWS_AS(scatter_once(1.0, 0.0, phases(1), ModelParams{}), std::invalid_argument);
  CHECK_THROWS_AS(scatter_once(0.0, 0.0, phases(1), undriven()), std::invalid_argument);
  CHECK_THROWS_AS(fh_curve({}, phases(1), undriven()), std::invalid_argument);
  CollisionConfig bad = phases(0);
  CHECK_THROWS_AS(scatter_ensemble(1.0, bad, undriven()), std::invalid_argument);
  bad = phases(1);
  bad.mass_ratio = -1.0;
  CHECK_THROWS_AS(scatter_ensemble(1.0, bad, undriven()), std::invalid_argument);
}
