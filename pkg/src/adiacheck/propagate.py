"""Norm-preserving integration of the time-dependent Schroedinger equation.

Each step applies the exact exponential of the midpoint-sampled Hamiltonian,
``exp(-i H(t + dt/2) dt)``, so states stay unit-norm to roundoff and the
global error is second order in ``dt``.  Step exponentials are formed for all
steps at once from a batched Hermitian eigendecomposition; only the
accumulation over steps is sequential.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import simpson

from .errors import GridMismatch, NonNormalizedInput, StepTooCoarse, UnitarityLost
from .hamiltonian import TimeDependentHamiltonian
from .spectral import SpectralTrajectory, decompose, eigenstate

NORM_TOL = 1e-10


@dataclass(frozen=True)
class PropagatorOptions:
    """Stepper settings.

    ``dt=None`` picks ``0.05 / max ||H||`` (sampled on 256 points).  With
    ``refinement`` on, the run is repeated at ``dt/2`` and the final states
    must agree within ``refine_factor * dt**2``.
    """

    dt: Optional[float] = None
    refinement: bool = False
    unitarity_tol: float = 1e-10
    refine_factor: float = 10.0

    def __post_init__(self):
        if self.dt is not None and not self.dt > 0:
            raise ValueError("dt must be positive")

    def halved(self, times: int = 1) -> "PropagatorOptions":
        if self.dt is None:
            raise ValueError("cannot halve an automatic step")
        return PropagatorOptions(self.dt / 2**times, self.refinement, self.unitarity_tol, self.refine_factor)


def default_dt(H: TimeDependentHamiltonian) -> float:
    hmax = H.max_norm(256)
    return H.T if hmax == 0 else 0.05 / hmax


def make_grid(H: TimeDependentHamiltonian, opts: PropagatorOptions, t_final: Optional[float] = None) -> np.ndarray:
    """Uniform grid on ``[0, t_final]`` with spacing at most ``opts.dt``."""
    t_final = H.T if t_final is None else float(t_final)
    dt = opts.dt if opts.dt is not None else default_dt(H)
    n = max(1, math.ceil(t_final / dt - 1e-9))
    return np.linspace(0.0, t_final, n + 1)


def step_unitaries(H: TimeDependentHamiltonian, grid: np.ndarray) -> np.ndarray:
    """``exp(-i H(t_mid) dt_k)`` for every interval of ``grid``."""
    grid = np.asarray(grid, dtype=float)
    mids = 0.5 * (grid[:-1] + grid[1:])
    dts = np.diff(grid)
    w, V = np.linalg.eigh(H.evaluate(mids))
    phases = np.exp(-1j * w * dts[:, None])
    return np.einsum("kij,kj,klj->kil", V, phases, np.conj(V))


def _apply_steps(steps: np.ndarray, psi0: np.ndarray) -> np.ndarray:
    states = np.empty((steps.shape[0] + 1, psi0.size), dtype=complex)
    states[0] = psi0
    psi = psi0
    for k in range(steps.shape[0]):
        psi = steps[k] @ psi
        states[k + 1] = psi
    return states


def _final_state(steps: np.ndarray, psi0: np.ndarray) -> np.ndarray:
    psi = psi0
    for k in range(steps.shape[0]):
        psi = steps[k] @ psi
    return psi


def accumulate(steps: np.ndarray) -> np.ndarray:
    """Running products ``U_k = S_{k-1} ... S_0`` with ``U_0 = I``."""
    d = steps.shape[1]
    out = np.empty((steps.shape[0] + 1, d, d), dtype=complex)
    out[0] = np.eye(d)
    U = out[0]
    for k in range(steps.shape[0]):
        U = steps[k] @ U
        out[k + 1] = U
    return out


def unitarity_defect(U: np.ndarray) -> float:
    """``||U^dagger U - I||_2``, maximized over a stack."""
    U = np.asarray(U)
    G = np.conj(np.swapaxes(U, -1, -2)) @ U - np.eye(U.shape[-1])
    return float(np.max(np.linalg.norm(G.reshape((-1,) + G.shape[-2:]), ord=2, axis=(1, 2))))


@dataclass(frozen=True)
class EvolutionResult:
    """State trajectory plus its instantaneous-basis decomposition.

    ``amplitudes[k, m] = <E_m(t_k)|psi(t_k)>`` in the parallel-transport gauge
    and ``populations = |amplitudes|**2``.  ``final_fidelity`` is the
    population of the tracked ``level`` at the last grid point.
    """

    grid: np.ndarray
    states: np.ndarray
    amplitudes: Optional[np.ndarray] = None
    populations: Optional[np.ndarray] = None
    level: Optional[int] = None
    final_fidelity: Optional[float] = None
    dt: float = float("nan")
    refinement_difference: Optional[float] = None


def _check_normalized(psi0: np.ndarray) -> np.ndarray:
    psi0 = np.asarray(psi0, dtype=complex).reshape(-1)
    if abs(np.linalg.norm(psi0) - 1.0) > NORM_TOL:
        raise NonNormalizedInput(f"initial state has norm {np.linalg.norm(psi0)!r}")
    return psi0


def _refined_grid(grid: np.ndarray) -> np.ndarray:
    fine = np.empty(2 * grid.size - 1)
    fine[0::2] = grid
    fine[1::2] = 0.5 * (grid[:-1] + grid[1:])
    return fine


def amplitudes_in_instantaneous_basis(result: EvolutionResult, traj: SpectralTrajectory) -> np.ndarray:
    """Project each state onto the gauge-aligned eigenvectors of the matching frame."""
    if result.grid.shape != traj.grid.shape or not np.allclose(result.grid, traj.grid, rtol=0, atol=1e-12 * max(1.0, traj.T)):
        raise GridMismatch("evolution and spectral grids differ")
    return np.einsum("kin,ki->kn", np.conj(traj.eigenvectors), result.states)


def evolve(H: TimeDependentHamiltonian, psi0, opts: Optional[PropagatorOptions] = None, *,
           traj: Optional[SpectralTrajectory] = None, level: Optional[int] = None,
           t_final: Optional[float] = None, basis: bool = True) -> EvolutionResult:
    """Propagate ``psi0`` from ``t=0`` to ``t_final`` (default ``T``).

    ``psi0`` may be a state vector or an integer level, meaning that
    instantaneous eigenstate of ``H(0)``.  With ``basis`` on (the default) the
    result carries instantaneous-basis amplitudes; pass ``traj`` to reuse an
    existing decomposition on the same grid.

    Raises
    ------
    NonNormalizedInput
        ``psi0`` is not unit norm within 1e-10.
    StepTooCoarse
        Refinement is on and the step-halved run disagrees.
    """
    opts = opts or PropagatorOptions()
    if isinstance(psi0, (int, np.integer)):
        level = int(psi0) if level is None else level
        psi0 = eigenstate(H, int(psi0))
    psi0 = _check_normalized(psi0)
    if psi0.size != H.dim:
        raise ValueError(f"state has dimension {psi0.size}, Hamiltonian {H.dim}")

    grid = traj.grid if traj is not None else make_grid(H, opts, t_final)
    steps = step_unitaries(H, grid)
    states = _apply_steps(steps, psi0)
    drift = float(np.max(np.abs(np.linalg.norm(states, axis=1) - 1.0)))
    if drift > opts.unitarity_tol:
        raise UnitarityLost(f"norm drifted by {drift:.3e}")
    dt = float(np.max(np.diff(grid)))

    refine_diff = None
    if opts.refinement:
        refine_diff = _refinement_check(H, grid, psi0, states[-1], dt, opts)

    result = EvolutionResult(grid=grid, states=states, dt=dt, refinement_difference=refine_diff)
    if not basis:
        return result
    if traj is None:
        traj = decompose(H, grid)
    a = amplitudes_in_instantaneous_basis(result, traj)
    P = np.abs(a) ** 2
    if level is None:
        level = int(np.argmax(P[0]))
    return EvolutionResult(
        grid=grid, states=states, amplitudes=a, populations=P, level=level,
        final_fidelity=float(P[-1, level]), dt=dt, refinement_difference=refine_diff,
    )


def _refinement_check(H, grid, psi0, final, dt, opts) -> float:
    hmax = H.max_norm(256)
    if dt * hmax > np.pi:
        raise StepTooCoarse(f"dt*max||H|| = {dt * hmax:.3g} exceeds pi; step phases alias")
    fine = _final_state(step_unitaries(H, _refined_grid(grid)), psi0)
    diff = float(np.linalg.norm(fine - final))
    allowed = opts.refine_factor * dt**2
    if diff > allowed:
        raise StepTooCoarse(
            f"step-halved final state differs by {diff:.3e} > {allowed:.3e} (= {opts.refine_factor} dt^2)"
        )
    return diff


def propagators(H: TimeDependentHamiltonian, opts: Optional[PropagatorOptions] = None,
                grid: Optional[np.ndarray] = None) -> tuple:
    """Return ``(grid, U)`` with ``U[k]`` the accumulated evolution operator at ``grid[k]``."""
    opts = opts or PropagatorOptions()
    grid = make_grid(H, opts) if grid is None else np.asarray(grid, dtype=float)
    U = accumulate(step_unitaries(H, grid))
    defect = unitarity_defect(U[-1])
    if defect > opts.unitarity_tol:
        raise UnitarityLost(f"||U^dagger U - I|| = {defect:.3e}")
    return grid, U


def evolution_operator(H: TimeDependentHamiltonian, opts: Optional[PropagatorOptions] = None) -> np.ndarray:
    """Full evolution operator ``U(T)``."""
    return propagators(H, opts)[1][-1]


def time_averaged_hamiltonian(H: TimeDependentHamiltonian, t: float, panels: int = 64) -> np.ndarray:
    """``(1/t) * integral_0^t H`` by composite Simpson with ``panels`` (even) panels."""
    panels = max(64, panels + panels % 2)
    ts = np.linspace(0.0, t, panels + 1)
    return simpson(H.evaluate(ts), x=ts, axis=0) / t


def energy_spread(Hbar: np.ndarray, psi0: np.ndarray) -> float:
    """Root-mean-square deviation of ``Hbar`` in ``psi0``."""
    Hpsi = Hbar @ psi0
    mean = float(np.real(np.vdot(psi0, Hpsi)))
    second = float(np.real(np.vdot(Hpsi, Hpsi)))
    return math.sqrt(max(second - mean**2, 0.0))


@dataclass(frozen=True)
class ShortTimeDeparture:
    t: float
    p_exact: float
    p_predicted: float
    delta_h: float
    outside_regime: bool


def short_time_departure(H: TimeDependentHamiltonian, psi0, t: float, panels: int = 64,
                         steps: int = 64) -> ShortTimeDeparture:
    """Compare the exact probability of leaving ``psi0`` with ``(Delta Hbar)^2 t^2``.

    ``p_exact`` is evaluated as ``||(1 - |psi0><psi0|) psi(t)||^2``, which equals
    ``1 - |<psi0|psi(t)>|^2`` for unit vectors but avoids the cancellation at
    small ``t``.  ``outside_regime`` flags ``t * Delta Hbar >= 0.1``.
    """
    psi0 = _check_normalized(psi0)
    if not 0 < t <= H.T * (1 + 1e-12):
        raise ValueError(f"t must lie in (0, T], got {t!r}")
    dH = energy_spread(time_averaged_hamiltonian(H, t, panels), psi0)
    grid = np.linspace(0.0, t, steps + 1)
    psi_t = _final_state(step_unitaries(H, grid), psi0)
    perp = psi_t - psi0 * np.vdot(psi0, psi_t)
    p_exact = float(np.real(np.vdot(perp, perp)))
    outside = t * dH >= 0.1
    if outside:
        warnings.warn(f"t*DeltaH = {t * dH:.3g} is not small; short-time expansion may not apply")
    return ShortTimeDeparture(t=float(t), p_exact=p_exact, p_predicted=(dH * t) ** 2, delta_h=dH,
                              outside_regime=bool(outside))


def uncertainty_time(H: TimeDependentHamiltonian, psi0, scale: float, panels: int = 64,
                     max_iter: int = 50) -> float:
    """Solve ``t = scale / Delta Hbar(t)`` by fixed-point iteration.

    ``Delta Hbar`` depends on ``t`` through the averaging window, so the time at
    which ``t * Delta Hbar`` equals ``scale`` is found self-consistently.
    """
    psi0 = _check_normalized(psi0)
    dH = energy_spread(H.evaluate(0.0), psi0)
    if dH == 0:
        raise ValueError("psi0 has zero energy spread at t=0")
    t = min(scale / dH, H.T)
    for _ in range(max_iter):
        dH = energy_spread(time_averaged_hamiltonian(H, t, panels), psi0)
        if dH == 0:
            raise ValueError("averaged Hamiltonian has zero energy spread")
        t_new = min(scale / dH, H.T)
        if abs(t_new - t) <= 1e-13 * t:
            return t_new
        t = t_new
    return t
