#!/usr/bin/env python3
"""Reference values for the test suite, computed without the C++ library.

Closed forms use mpmath at 50 digits. Trajectories use scipy's DOP853 at
tight tolerances on the plain textbook right-hand side. Franck-Hertz means
use the relaxation landing rule directly: from e1 the undriven flow ends on
the level below (or on a level it starts on), with sub-ground energies
pumped up to n = 0. A start within the 0.05 band just under a level whose
distance to it grows by at most 1e-4 over the first 50 time units counts as
stranded on that level.

Usage: generate.py OUTPUT_HEADER
"""

import math
import sys

import mpmath as mp
import numpy as np
from scipy.integrate import solve_ivp

mp.mp.dps = 50
K = 0.2
EPS_DEN = 1e-6


def rhs(k, a0=0.0, omega=2.0, phi=0.0):
    def f(t, y):
        q, v = y
        s = q * q + v * v
        fr = -k * v * (s - 1.0) * math.cos(math.pi * s / 2.0) ** 2 / max(s * s, EPS_DEN)
        return [v, -q + fr + a0 * math.sin(omega * t + phi)]
    return f


def solve(y0, t_end, k, events=None, dense=False):
    return solve_ivp(rhs(k), (0.0, t_end), y0, method="DOP853", rtol=1e-12, atol=1e-14,
                     events=events, dense_output=dense)


def energy(y):
    return 0.5 * (y[0] ** 2 + y[1] ** 2)


def friction_example():
    s = mp.mpf(2)
    v = mp.sqrt(2)
    return -mp.mpf(K) * v * (s - 1) * mp.cos(mp.pi * s / 2) ** 2 / s ** 2


def predicted(n, k=K):
    e = mp.mpf(n) + mp.mpf(1) / 2
    gamma0 = mp.mpf(k) * mp.pi ** 2 / 2
    return 2 * e / (gamma0 * (2 * e - 1))


def escape_time(n, delta_e, depth=0.5):
    e0 = n + 0.5 - delta_e
    target = n + 0.5 - depth

    def hit(t, y):
        return energy(y) - target
    hit.terminal = True
    hit.direction = -1
    sol = solve([0.0, math.sqrt(2.0 * e0)], 1e4, K, events=hit)
    return sol.t_events[0][0]


def stranded(q, v, level_energy):
    sol = solve([q, v], 50.0, K)
    start = level_energy - energy([q, v])
    end = level_energy - energy(sol.y[:, -1])
    return end - start <= 1e-4


def landing_level(q, v):
    e1 = energy([q, v])
    if e1 < 0.5:
        return 0
    n = round(e1 - 0.5)
    if abs(e1 - (n + 0.5)) < 1e-9:
        return n
    above = math.floor(e1 - 0.5) + 1
    if above + 0.5 - e1 <= 0.05 and stranded(q, v, above + 0.5):
        return above
    return int(math.floor(e1 - 0.5))


def fh_point(t0, n_phases=64):
    finals = []
    for j in range(n_phases):
        phi = 2.0 * math.pi * j / n_phases
        q, v = math.sin(phi), math.cos(phi)
        u = math.sqrt(2.0 * t0)
        n = landing_level(q, u)  # equal masses swap velocities
        finals.append(t0 + 0.5 - (n + 0.5))
    finals = np.array(finals)
    return float(finals.mean()), float(np.sqrt(2.0 * finals).mean())


def main(path):
    out = []
    emit = lambda name, value: out.append(f"inline constexpr double {name} = {float(value)!r};")

    emit("kFrictionAtSqrt2", float(friction_example()))
    emit("kPredictedN1", float(predicted(1)))
    emit("kPredictedN2", float(predicted(2)))
    emit("kGammaInverse", float(1 / (mp.mpf(K) * mp.pi ** 2 / 2)))

    sol = solve([0.0, math.sqrt(6.4)], 1.0, K)
    emit("kDecayEnergyAtT1", energy(sol.y[:, -1]))

    sol = solve([0.0, math.sqrt(6.4)], 2000.0, K, dense=True)
    emit("kDecayEnergyAtT2000", energy(sol.y[:, -1]))
    samples = [energy(sol.sol(t)) for t in (10.0, 100.0, 500.0)]
    emit("kDecayEnergyAtT10", samples[0])
    emit("kDecayEnergyAtT100", samples[1])
    emit("kDecayEnergyAtT500", samples[2])

    for n in (1, 2, 3):
        for de, tag in ((0.05, "005"), (0.1, "010"), (0.2, "020")):
            emit(f"kEscapeTimeN{n}De{tag}", escape_time(n, de))

    grid = [0.1 + (i / 38.0) * (2.0 - 0.1) for i in range(39)]
    means = [fh_point(t0) for t0 in grid]
    out.append("inline constexpr double kFhGrid[] = {" +
               ", ".join(repr(t) for t in grid) + "};")
    out.append("inline constexpr double kFhMeanEnergy[] = {" +
               ", ".join(repr(m[0]) for m in means) + "};")
    out.append("inline constexpr double kFhMeanSpeed[] = {" +
               ", ".join(repr(m[1]) for m in means) + "};")
    emit("kFhMeanEnergyT13", fh_point(1.3)[0])

    with open(path, "w") as f:
        f.write("#pragma once\n\n// Generated by tools/oracles/generate.py. Do not edit.\n\n")
        f.write("namespace oracle {\n\n")
        f.write("\n".join(out))
        f.write("\n\n}  // namespace oracle\n")


if __name__ == "__main__":
    main(sys.argv[1])
