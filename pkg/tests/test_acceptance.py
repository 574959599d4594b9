"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -rA``; the lines are repeated in
the "acceptance criteria" section of the terminal summary.
"""

import time

import numpy as np
import pytest

from adiacheck import (PropagatorOptions, build_dual, constant, evaluate_conditions, evolve, landau_zener,
                       random_smooth, short_time_departure)
from adiacheck.conditions import (amin_analytic_p0, population_lower_bound, population_rates, sufficient_quantity,
                                  traditional_ratio)
from adiacheck.dual import coupling_relation_check, verify_evolution_inverse, verify_spectrum_and_states
from adiacheck.hamiltonian import AminScenario, time_rescaled
from adiacheck.propagate import uncertainty_time
from adiacheck.spectral import decompose

from conftest import random_unit_vector

RESONANT = AminScenario(epsilon=1.0, V=0.01, omega0=1.0)


def simulate(H, level, dt):
    res = evolve(H, level, PropagatorOptions(dt=dt))
    traj = decompose(H, res.grid)
    return traj, res, evaluate_conditions(traj, res, level)


@pytest.fixture(scope="module")
def resonant_run():
    start = time.perf_counter()
    out = simulate(RESONANT.hamiltonian(np.pi / RESONANT.V), 0, 1e-3)
    return out, time.perf_counter() - start


def test_criterion_1_resonant_breakdown(resonant_run, report_criterion):
    (traj, res, rep), seconds = resonant_run
    deviation = float(np.max(np.abs(res.populations[:, 0] - amin_analytic_p0(RESONANT, res.grid))))
    ok = deviation <= 0.05 and res.final_fidelity <= 0.05 and seconds <= 30
    report_criterion("criterion 1 (resonant breakdown vs closed form)", ok,
                     f"sup|P0 - (cos Vt + 1)/2| = {deviation:.3e} (<= 0.05), P0(T) = {res.final_fidelity:.3e} "
                     f"(<= 0.05), runtime {seconds:.1f} s (<= 30 s)")
    assert ok


def test_criterion_2_necessity_without_sufficiency(resonant_run, report_criterion):
    (traj, res, rep), _ = resonant_run
    ok = (rep.traditional.max <= 0.05 and 1 - res.final_fidelity >= 0.9
          and rep.verdict.classification == "necessary_only_violation")
    report_criterion("criterion 2 (local ratio passes, evolution not adiabatic)", ok,
                     f"max r = {rep.traditional.max:.4g} (<= 0.05), 1 - P0(T) = {1 - res.final_fidelity:.6f} "
                     f"(>= 0.9), verdict {rep.verdict.classification}")
    assert ok


def test_criterion_3_sufficient_condition_soundness(report_criterion):
    start = time.perf_counter()
    slack = 1e-6
    worst_margin, certified, certified_fail = np.inf, 0, []
    for seed in range(50):
        # amplitudes span four decades, capped below the no-crossing limit 1/(4 sqrt 2)
        amp = min(10 ** np.random.default_rng([2024, seed]).uniform(-4, -0.7), 0.17)
        H = random_smooth(3, seed, 10.0, amp)
        level = seed % 3
        traj, res, rep = simulate(H, level, 0.01)
        B, B_coarse = population_lower_bound(traj, level)
        worst_margin = min(worst_margin, res.final_fidelity - B + slack, B - B_coarse + slack)
        if sufficient_quantity(traj, level).total <= 0.02:
            certified += 1
            if 1 - res.final_fidelity > 0.02:
                certified_fail.append(seed)
    seconds = time.perf_counter() - start
    ok = worst_margin >= 0 and not certified_fail and seconds <= 120
    report_criterion("criterion 3 (P_n(T) >= B >= B_coarse over 50 random paths)", ok,
                     f"smallest margin incl. 1e-6 slack = {worst_margin:.3e}; {certified} runs with S <= 0.02, "
                     f"{len(certified_fail)} of them with 1 - P_n(T) > 0.02; runtime {seconds:.1f} s (<= 120 s)")
    assert ok


def test_criterion_4_adiabatic_at_leet_scale(report_criterion):
    _, res, _ = simulate(RESONANT.hamiltonian(1.0), 0, 1e-3)
    target = (np.cos(RESONANT.V * 1.0) + 1) / 2
    ok = res.final_fidelity >= 0.9999 and abs(res.final_fidelity - target) <= 5e-5
    report_criterion("criterion 4 (T = 1 stays in the ground state)", ok,
                     f"P0(1) = {res.final_fidelity:.8f} (>= 0.9999), |P0 - {target:.6f}| = "
                     f"{abs(res.final_fidelity - target):.2e} (<= 5e-5)")
    assert ok


def test_criterion_5_short_time_quadratic_law(report_criterion):
    ratios, stasis = [], []
    for seed in range(20):
        rng = np.random.default_rng([5, seed])
        H = random_smooth(4, seed, 10.0, 0.1)
        psi0 = random_unit_vector(rng, 4)
        d = short_time_departure(H, psi0, uncertainty_time(H, psi0, 1e-3))
        assert d.delta_h > 0
        ratios.append(d.p_exact / d.p_predicted)
        stasis.append(short_time_departure(H, psi0, uncertainty_time(H, psi0, 1e-2)).p_exact)
    ok = min(ratios) >= 0.95 and max(ratios) <= 1.05 and max(stasis) <= 2 * 0.01**2
    report_criterion("criterion 5 (short-time departure ~ (Delta H t)^2)", ok,
                     f"p_exact/p_predicted in [{min(ratios):.6f}, {max(ratios):.6f}] (within [0.95, 1.05]); "
                     f"max p_exact at t = 0.01/DeltaH = {max(stasis):.3e} (<= 2e-4)")
    assert ok


def test_criterion_6_dual_identities(report_criterion):
    commuting = build_dual(constant(np.diag([-0.5, 0.5]), 5.0), PropagatorOptions(dt=1e-2))
    exact = dict(verify_spectrum_and_states(commuting))
    exact["evolution_inverse"] = verify_evolution_inverse(commuting)
    exact["coupling"] = coupling_relation_check(commuting)["coupling"]
    exact_ok = max(exact.values()) <= 1e-10

    H = RESONANT.hamiltonian(10.0)
    spectrum, inverse = [], []
    for dt in (1e-3, 5e-4, 2.5e-4):
        opts = PropagatorOptions(dt=dt)
        dual = build_dual(H, opts)
        spectrum.append(verify_spectrum_and_states(dual)["spectrum"])
        inverse.append(verify_evolution_inverse(dual, opts))
    rate = lambda r: [a / b for a, b in zip(r, r[1:])]
    in_band = lambda r: all(3 <= x <= 5 for x in rate(r))
    size_ok = spectrum[0] <= 1e-5 and inverse[0] <= 1e-5
    ok = exact_ok and size_ok and in_band(spectrum) and in_band(inverse)
    report_criterion("criterion 6 (dual-system identities)", ok,
                     f"commuting max residual {max(exact.values()):.1e} (<= 1e-10); at dt=1e-3 spectrum "
                     f"{spectrum[0]:.1e}, U_B U_A - I {inverse[0]:.1e} (<= 1e-5); halving ratios spectrum "
                     f"{[round(x, 2) for x in rate(spectrum)]}, U_B U_A {[round(x, 2) for x in rate(inverse)]} "
                     f"(each in [3, 5])")
    assert exact_ok and size_ok
    assert in_band(inverse)
    assert in_band(spectrum), "spectrum residual sits at roundoff and does not shrink with dt"


def test_criterion_7_amplitude_dynamics_identity(report_criterion):
    scenarios = {
        "amin resonant": (RESONANT.hamiltonian(np.pi / RESONANT.V), 1e-3),
        "landau_zener": (landau_zener(1.0, 0.5, 20.0), 1e-3),
        "constant": (constant([[1.0, 0.3], [0.3, -1.0]], 5.0), 1e-3),
        "random_smooth": (random_smooth(3, 7, 10.0, 0.1), 1e-3),
        "dual of amin": (build_dual(RESONANT.hamiltonian(10.0), PropagatorOptions(dt=1e-3)).h_b, 1e-3),
    }
    worst_rate, worst_identity, parts = 0.0, 0.0, []
    for name, (H, dt) in scenarios.items():
        traj, res, rep = simulate(H, 0, dt)
        fd, pred = population_rates(res, traj)
        rate_err = float(np.max(np.abs(fd - pred)))
        worst_rate = max(worst_rate, rate_err)
        worst_identity = max(worst_identity, abs(rep.identity_residual))
        parts.append(f"{name} {rate_err:.1e}/{abs(rep.identity_residual):.1e}")
    ok = worst_rate <= 1e-5 and worst_identity <= 1e-6
    report_criterion("criterion 7 (dP_n/dt identity and P_n(T) = 1 - 2 sum eps)", ok,
                     f"sup rate error {worst_rate:.2e} (<= 1e-5), identity {worst_identity:.2e} (<= 1e-6); "
                     + ", ".join(parts))
    assert ok


def test_criterion_8_time_rescaling(report_criterion):
    H = RESONANT.hamiltonian(10.0)
    slow = time_rescaled(H, 2.0)
    a = decompose(H, np.linspace(0.0, H.T, 20001))
    b = decompose(slow, np.linspace(0.0, slow.T, 20001))
    r_change = abs(traditional_ratio(b).max / traditional_ratio(a).max - 1)
    s_error = abs(sufficient_quantity(b, 0).total / (2 * sufficient_quantity(a, 0).total) - 1)
    ok = r_change <= 1e-6 and s_error <= 1e-6
    report_criterion("criterion 8 (H(t) -> H(t/2), T -> 2T: max r invariant, S doubles)", ok,
                     f"relative change of max r = {r_change:.3g} (<= 1e-6), relative error of S against 2S = "
                     f"{s_error:.3g} (<= 1e-6)")
    assert r_change <= 1e-6, "slowing the path halves every coupling, so max r halves"
    assert s_error <= 1e-6, "2T max|chi| is unchanged when T doubles and chi halves"
