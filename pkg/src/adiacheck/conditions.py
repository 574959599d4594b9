"""Adiabaticity criteria and diagnostics evaluated on a simulated run.

All quantities are computed on the simulation grid.  Integrals use composite
Simpson; ``hbar = 1``.

Amplitudes obey ``da_n/dt = -sum_m a_m chi_nm - i E_n a_n`` in the
parallel-transport gauge, hence ``dP_n/dt = -2 sum_m Re(conj(a_n) a_m chi_nm)``.
Integrating from a pure eigenstate gives ``P_n(T) = 1 - 2 sum_m eps_nm`` and the
bound chain ``P_n(T) >= B >= B_coarse``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.integrate import cumulative_simpson, simpson
from scipy.signal import hilbert

from .errors import DegenerateSpectrum, GridMismatch, PhaseUndefined
from .hamiltonian import AminScenario
from .propagate import EvolutionResult
from .spectral import SpectralTrajectory

CLASSIFICATIONS = (
    "certified_adiabatic",
    "necessary_only_violation",
    "consistent_adiabatic",
    "non_adiabatic",
    "other",
)


@dataclass(frozen=True)
class Thresholds:
    """Explicit values for the "much less than one" comparisons."""

    eta_trad: float = 0.1
    eta_suff: float = 0.1
    eta_fid: float = 0.01
    resonance_tol: float = 0.1


def level_pairs(dim: int) -> List[Tuple[int, int]]:
    """Unordered pairs ``(n, m)``, ``n < m``, in lexicographic order."""
    return [(n, m) for n in range(dim) for m in range(n + 1, dim)]


def _integrate(y: np.ndarray, x: np.ndarray) -> np.ndarray:
    return simpson(y, x=x, axis=0)


def _gaps(traj: SpectralTrajectory) -> np.ndarray:
    """``|E_m - E_n|`` as a ``(K, d, d)`` stack."""
    E = traj.eigenvalues
    return np.abs(E[:, None, :] - E[:, :, None])


# -- condition (1): local ratio --------------------------------------------------------------


@dataclass(frozen=True)
class TraditionalRatio:
    pairs: List[Tuple[int, int]]
    series: np.ndarray  # (K, npairs)
    max: float
    argmax_time: float
    argmax_pair: Optional[Tuple[int, int]]
    argmax_index: int

    def pair_series(self, n: int, m: int) -> np.ndarray:
        return self.series[:, self.pairs.index((min(n, m), max(n, m)))]


def ratio_matrix(traj: SpectralTrajectory) -> np.ndarray:
    """``r[k, n, m] = |chi_nm(t_k)| / |E_m - E_n|`` with a zero diagonal."""
    g = _gaps(traj)
    off = ~np.eye(traj.dim, dtype=bool)
    if np.any(g[:, off] == 0):
        raise DegenerateSpectrum("zero gap in ratio evaluation")
    r = np.zeros(g.shape)
    r[:, off] = np.abs(traj.couplings[:, off]) / g[:, off]
    return r


def traditional_ratio(traj: SpectralTrajectory) -> TraditionalRatio:
    """Local ratio ``|<E_n|dE_m/dt>| / |E_m - E_n|`` for every pair, with its maximum.

    ``r_nm`` and ``r_mn`` coincide because the coupling matrix is
    anti-Hermitian; the larger of the two numerical values is kept.
    """
    r = ratio_matrix(traj)
    pairs = level_pairs(traj.dim)
    if not pairs:
        return TraditionalRatio(pairs, np.zeros((len(traj), 0)), 0.0, float(traj.grid[0]), None, 0)
    series = np.stack([np.maximum(r[:, n, m], r[:, m, n]) for n, m in pairs], axis=1)
    k, p = np.unravel_index(int(np.argmax(series)), series.shape)
    return TraditionalRatio(pairs, series, float(series[k, p]), float(traj.grid[k]), pairs[p], int(k))


# -- condition (9) and the bound chain --------------------------------------------------------


@dataclass(frozen=True)
class SufficientQuantity:
    level: int
    per_level: np.ndarray  # S_nm indexed by m; zero at m == n
    total: float
    max_coupling: np.ndarray  # max_t |chi_nm| indexed by m
    argmax_index: np.ndarray


def sufficient_quantity(traj: SpectralTrajectory, n: int) -> SufficientQuantity:
    """``S_nm = 2 T max_t |chi_nm|`` and the total over ``m != n``."""
    abschi = np.abs(traj.couplings[:, n, :])
    abschi[:, n] = 0.0
    mx = abschi.max(axis=0)
    S = 2.0 * traj.T * mx
    return SufficientQuantity(n, S, float(S.sum()), mx, abschi.argmax(axis=0))


def population_lower_bound(traj: SpectralTrajectory, n: int) -> Tuple[float, float]:
    """Return ``(B, B_coarse)``.

    ``B = 1 - 2 sum_{m != n} int |chi_nm| dt`` and
    ``B_coarse = 1 - 2 sum_{m != n} T max|chi_nm|``.  Both assume the run starts
    in level ``n``; they may be negative (vacuous).
    """
    abschi = np.abs(traj.couplings[:, n, :])
    abschi[:, n] = 0.0
    integral = float(np.sum(_integrate(abschi, traj.grid)))
    B = 1.0 - 2.0 * integral
    B_coarse = 1.0 - sufficient_quantity(traj, n).total
    return B, B_coarse


# -- LEET --------------------------------------------------------------------------------------


@dataclass(frozen=True)
class LeetReport:
    pairs: List[Tuple[int, int]]
    series: np.ndarray  # T_LEET(t) = 1/|E_m - E_n|, shape (K, npairs)
    mean_gap: np.ndarray  # |(1/T) int (E_n - E_m) dt|
    least_evolution_time: np.ndarray  # pi / mean_gap
    mean_leet: np.ndarray
    count: np.ndarray  # M = T / mean T_LEET


def leet(traj: SpectralTrajectory) -> LeetReport:
    pairs = level_pairs(traj.dim)
    g = _gaps(traj)
    if pairs and np.any(np.stack([g[:, n, m] for n, m in pairs]) == 0):
        raise DegenerateSpectrum("zero gap in LEET evaluation")
    E = traj.eigenvalues
    T = traj.T
    series = np.stack([1.0 / g[:, n, m] for n, m in pairs], axis=1) if pairs else np.zeros((len(traj), 0))
    diffs = np.stack([E[:, n] - E[:, m] for n, m in pairs], axis=1) if pairs else np.zeros((len(traj), 0))
    mean_gap = np.abs(_integrate(diffs, traj.grid)) / T
    mean_leet = _integrate(series, traj.grid) / T
    return LeetReport(pairs, series, mean_gap, np.pi / mean_gap, mean_leet, T / mean_leet)


# -- transition integrals ---------------------------------------------------------------------


def _check_grids(result: EvolutionResult, traj: SpectralTrajectory) -> None:
    if result.amplitudes is None:
        raise ValueError("evolution result carries no instantaneous-basis amplitudes")
    if result.grid.shape != traj.grid.shape or not np.allclose(result.grid, traj.grid, rtol=0,
                                                               atol=1e-12 * max(1.0, traj.T)):
        raise GridMismatch("evolution and spectral grids differ")


def transition_integrand(result: EvolutionResult, traj: SpectralTrajectory, n: int, m: int) -> np.ndarray:
    """``Re(conj(a_n) a_m chi_nm)`` on the grid."""
    _check_grids(result, traj)
    a = result.amplitudes
    return np.real(np.conj(a[:, n]) * a[:, m] * traj.couplings[:, n, m])


def epsilon_nm(result: EvolutionResult, traj: SpectralTrajectory, n: int, m: int) -> float:
    """Transition integral ``eps_nm = int_0^T Re(conj(a_n) a_m chi_nm) dt``."""
    return float(_integrate(transition_integrand(result, traj, n, m), traj.grid))


def population_rates(result: EvolutionResult, traj: SpectralTrajectory) -> Tuple[np.ndarray, np.ndarray]:
    """Return ``(finite-difference dP/dt, -2 sum_m Re(conj(a_n) a_m chi_nm))``, both ``(K, d)``."""
    _check_grids(result, traj)
    fd = np.gradient(result.populations, result.grid, axis=0, edge_order=2)
    a = result.amplitudes
    pred = -2.0 * np.real(np.conj(a) * np.einsum("knm,km->kn", traj.couplings, a))
    return fd, pred


# -- resonance ---------------------------------------------------------------------------------


@dataclass(frozen=True)
class ResonanceDiagnostics:
    n: int
    m: int
    omega: np.ndarray  # coupling phase rate
    omega_nm: np.ndarray  # running mean of E_n - E_m
    resonant: Optional[bool]  # None when the phase is undefined
    mismatch: float
    phase_source: str


def running_mean_gap(traj: SpectralTrajectory, n: int, m: int) -> np.ndarray:
    """``omega_nm(t) = (1/t) int_0^t (E_n - E_m) dt'``, continued to ``t=0`` by its limit."""
    diff = traj.eigenvalues[:, n] - traj.eigenvalues[:, m]
    t = traj.grid - traj.grid[0]
    cum = cumulative_simpson(diff, x=traj.grid, initial=0.0)
    out = np.empty_like(diff)
    out[0] = diff[0]
    out[1:] = cum[1:] / t[1:]
    return out


def coupling_phase_rate(chi: np.ndarray, grid: np.ndarray) -> Tuple[np.ndarray, str]:
    """Instantaneous angular rate of a coupling series.

    A coupling whose phase is constant modulo pi (the usual case for real
    Hamiltonians) carries its oscillation in a real amplitude; its phase rate
    is taken from the analytic signal.  Otherwise the unwrapped argument is
    differentiated directly.
    """
    power = np.sum(np.abs(chi) ** 2)
    coherence = np.abs(np.sum(chi**2)) / power if power > 0 else 1.0
    if coherence > 1 - 1e-6:
        phi0 = 0.5 * np.angle(np.sum(chi**2))
        signal = hilbert(np.real(chi * np.exp(-1j * phi0)))
        source = "analytic_signal"
    else:
        signal = chi
        source = "argument"
    phase = np.unwrap(np.angle(signal))
    return np.gradient(phase, grid), source


def resonance_diagnostics(traj: SpectralTrajectory, n: int, m: int, resonance_tol: float = 0.1,
                          phase_floor: float = 1e-12, strict: bool = False) -> ResonanceDiagnostics:
    """Compare the coupling phase rate with the running mean gap.

    Resonant when ``median | |omega| - |omega_nm| | <= resonance_tol *
    median |omega_nm|`` over points where ``|chi_nm| > phase_floor``.  Rates
    are compared in magnitude: a real oscillating coupling contains both
    signs of its frequency.  If the coupling is below the floor on half the
    grid or more, the verdict is ``None`` (or :class:`PhaseUndefined` when
    ``strict``).
    """
    chi = traj.couplings[:, n, m]
    omega_nm = running_mean_gap(traj, n, m)
    mask = np.abs(chi) > phase_floor
    if mask.sum() <= 0.5 * mask.size or mask.sum() < 3:
        if strict:
            raise PhaseUndefined(f"|chi_{n}{m}| below {phase_floor} on most of the grid")
        nan = np.full(len(traj), np.nan)
        return ResonanceDiagnostics(n, m, nan, omega_nm, None, float("nan"), "undefined")
    omega, source = coupling_phase_rate(chi, traj.grid)
    mismatch = float(np.median(np.abs(np.abs(omega[mask]) - np.abs(omega_nm[mask])))
                     / np.median(np.abs(omega_nm[mask])))
    return ResonanceDiagnostics(n, m, omega, omega_nm, bool(mismatch <= resonance_tol), mismatch, source)


# -- analytic oracle ---------------------------------------------------------------------------


def amin_analytic_p0(scenario: AminScenario, t):
    """Ground-state population ``(cos(V t) + 1) / 2`` of the resonant driven two-level system.

    Valid for ``epsilon ~ omega0`` and small ``V``.
    """
    return (np.cos(scenario.V * np.asarray(t, dtype=float)) + 1.0) / 2.0


def amin_validity(scenario: AminScenario) -> Dict[str, float]:
    return {
        "detuning": float(abs(scenario.epsilon - scenario.omega0)),
        "coupling_over_gap": float(scenario.V / abs(scenario.epsilon)) if scenario.epsilon else float("inf"),
    }


# -- verdict -----------------------------------------------------------------------------------


@dataclass(frozen=True)
class Verdict:
    traditional_pass: bool
    sufficient_pass: bool
    adiabatic_observed: bool
    classification: str
    thresholds: Thresholds


def verdict(max_ratio: float, sufficient_total: float, final_fidelity: float,
            thresholds: Thresholds = Thresholds()) -> Verdict:
    trad = max_ratio <= thresholds.eta_trad
    suff = sufficient_total <= thresholds.eta_suff
    obs = 1.0 - final_fidelity <= thresholds.eta_fid
    if suff:
        cls = "certified_adiabatic"
    elif trad and not obs:
        cls = "necessary_only_violation"
    elif trad and obs:
        cls = "consistent_adiabatic"
    elif not trad and not obs:
        cls = "non_adiabatic"
    else:
        cls = "other"
    return Verdict(bool(trad), bool(suff), bool(obs), cls, thresholds)


# -- full report -------------------------------------------------------------------------------


@dataclass(frozen=True)
class ConditionReport:
    level: int
    traditional: TraditionalRatio
    sufficient: SufficientQuantity
    bound: float
    bound_coarse: float
    leet: LeetReport
    epsilon: Dict[int, float]
    resonance: List[ResonanceDiagnostics]
    final_fidelity: float
    identity_residual: float
    verdict: Verdict
    notes: Dict[str, object] = field(default_factory=dict)

    @property
    def bound_chain_holds(self) -> bool:
        return self.final_fidelity >= self.bound - 1e-6 and self.bound >= self.bound_coarse - 1e-6


def evaluate_conditions(traj: SpectralTrajectory, result: EvolutionResult, level: Optional[int] = None,
                        thresholds: Thresholds = Thresholds()) -> ConditionReport:
    """Run every criterion for tracked ``level`` (default: the result's level)."""
    n = result.level if level is None else level
    _check_grids(result, traj)
    trad = traditional_ratio(traj)
    suff = sufficient_quantity(traj, n)
    B, Bc = population_lower_bound(traj, n)
    others = [m for m in range(traj.dim) if m != n]
    eps = {m: epsilon_nm(result, traj, n, m) for m in others}
    res = [resonance_diagnostics(traj, n, m, thresholds.resonance_tol) for m in others]
    fid = float(result.populations[-1, n])
    identity = fid - (float(result.populations[0, n]) - 2.0 * sum(eps.values()))
    v = verdict(trad.max, suff.total, fid, thresholds)
    return ConditionReport(
        level=n, traditional=trad, sufficient=suff, bound=B, bound_coarse=Bc, leet=leet(traj),
        epsilon=eps, resonance=res, final_fidelity=fid, identity_residual=float(identity), verdict=v,
        notes={"initial_population": float(result.populations[0, n]), "thresholds": asdict(thresholds)},
    )
