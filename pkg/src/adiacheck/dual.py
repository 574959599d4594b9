"""Companion system ``H_B(t) = -U_A(t)^dagger H_A(t) U_A(t)`` and checks of its identities.

``U_A`` is accumulated on the propagation grid.  Between grid points it is
advanced by one extra midpoint-exponential substep, so ``H_B`` can be
evaluated at any time while converging at second order in ``dt`` to the
construction with the exact propagator.

Ascending eigenvalue order reverses under negation: level ``n`` of ``A``
pairs with level ``dim - 1 - n`` of ``B``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np
from scipy.integrate import simpson

from .hamiltonian import TimeDependentHamiltonian
from .propagate import PropagatorOptions, make_grid, propagators
from .spectral import align_gauge, decompose


def _dagger(U: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(U, -1, -2))


@dataclass(frozen=True)
class DualSystem:
    h_a: TimeDependentHamiltonian
    grid: np.ndarray
    u_a: np.ndarray  # U_A at every grid point
    h_b: TimeDependentHamiltonian
    pairing: np.ndarray  # pairing[n] = B level matched with A level n
    residuals: Dict[str, float] = field(default_factory=dict)

    def u_a_at(self, t) -> np.ndarray:
        return _interpolated_propagator(self.h_a, self.grid, self.u_a, np.atleast_1d(np.asarray(t, float)))


def _interpolated_propagator(h_a, grid, u_grid, ts):
    k = np.clip(np.searchsorted(grid, ts, side="right") - 1, 0, grid.size - 2)
    tau = ts - grid[k]
    w, V = np.linalg.eigh(h_a.evaluate(grid[k] + 0.5 * tau))
    sub = np.einsum("kij,kj,klj->kil", V, np.exp(-1j * w * tau[:, None]), np.conj(V))
    return sub @ u_grid[k]


def build_dual(h_a: TimeDependentHamiltonian, opts: Optional[PropagatorOptions] = None) -> DualSystem:
    """Propagate ``h_a`` and wrap the companion Hamiltonian as a ``dual_derived`` path.

    The derivative supplied for ``h_b`` is ``-U^dagger dH_A/dt U``, exact for
    the ideal construction and consistent to ``O(dt^2)`` with the numerical one.
    """
    opts = opts or PropagatorOptions()
    grid, U = propagators(h_a, opts)

    def func(ts):
        Ut = _interpolated_propagator(h_a, grid, U, ts)
        return -(_dagger(Ut) @ h_a.evaluate(ts) @ Ut)

    def dfunc(ts):
        Ut = _interpolated_propagator(h_a, grid, U, ts)
        return -(_dagger(Ut) @ h_a.derivative(ts) @ Ut)

    h_b = TimeDependentHamiltonian(
        dim=h_a.dim, T=h_a.T, func=func, dfunc=dfunc, kind="dual_derived",
        params={"base_kind": h_a.kind, "base": dict(h_a.params), "dt": float(np.max(np.diff(grid)))},
        herm_tol=max(h_a.herm_tol, 1e-10),
    )
    pairing = np.arange(h_a.dim)[::-1].copy()
    return DualSystem(h_a=h_a, grid=grid, u_a=U, h_b=h_b, pairing=pairing)


def verify_spectrum_and_states(dual: DualSystem, grid: Optional[np.ndarray] = None) -> Dict[str, float]:
    """Residuals of the spectrum negation and of the eigenstate map ``|E_n^B> = U_A^dagger |E_n^A>``.

    Returns ``spectrum`` (max ``|E_n^B + E_n^A|`` under the reversed pairing)
    and ``states`` (max ``1 - |<E_n^B| U_A^dagger |E_n^A>|``).
    """
    ts = dual.grid if grid is None else np.asarray(grid, float)
    Ua = dual.u_a if grid is None else dual.u_a_at(ts)
    ea, va = np.linalg.eigh(dual.h_a.evaluate(ts))
    eb, vb = np.linalg.eigh(dual.h_b.evaluate(ts))
    p = dual.pairing
    spectrum = float(np.max(np.abs(eb[:, p] + ea)))
    mapped = _dagger(Ua) @ va
    overlaps = np.abs(np.einsum("kin,kin->kn", np.conj(vb[:, :, p]), mapped))
    states = float(np.max(1.0 - overlaps))
    return {"spectrum": spectrum, "states": max(states, 0.0)}


def verify_evolution_inverse(dual: DualSystem, opts: Optional[PropagatorOptions] = None,
                             t: Optional[float] = None) -> float:
    """``||U_B(t) U_A(t) - I||_2`` with ``U_B`` from propagating ``h_b`` (default ``t = T``)."""
    opts = opts or PropagatorOptions(dt=float(np.max(np.diff(dual.grid))))
    t = dual.h_a.T if t is None else float(t)
    if t == 0:
        return 0.0
    grid_b = make_grid(dual.h_b, opts, t)
    _, Ub = propagators(dual.h_b, opts, grid_b)
    Ua = dual.u_a_at(t)[0]
    return float(np.linalg.norm(Ub[-1] @ Ua - np.eye(dual.h_a.dim), 2))


def _fourth_order_derivative(y: np.ndarray, dt: float) -> np.ndarray:
    """Five-point central difference along axis 0; drops two points at each end."""
    return (-y[4:] + 8 * y[3:-1] - 8 * y[1:-3] + y[:-4]) / (12 * dt)


def coupling_relation_check(dual: DualSystem) -> Dict[str, float]:
    """Check ``<E_k^B|dE_n^B/dt> = i E_n^A delta_nk + <E_k^A|dE_n^A/dt>``.

    The B eigenstates are taken in the gauge induced by the map
    ``|E_n^B> = U_A^dagger |E_n^A>`` (not parallel transport: the relation
    fixes the diagonal).  Both sides are differentiated numerically with a
    five-point stencil on the uniform propagation grid.
    """
    grid = dual.grid
    if grid.size < 5:
        raise ValueError("coupling relation check needs at least 5 grid points")
    dt = float(grid[1] - grid[0])
    if not np.allclose(np.diff(grid), dt, rtol=1e-9, atol=0):
        raise ValueError("coupling relation check needs a uniform grid")
    ea, va = np.linalg.eigh(dual.h_a.evaluate(grid))
    va = align_gauge(va)
    wb = _dagger(dual.u_a) @ va
    inner = slice(2, -2)
    lhs = np.einsum("kia,kib->kab", np.conj(wb[inner]), _fourth_order_derivative(wb, dt))
    chi_a = np.einsum("kia,kib->kab", np.conj(va[inner]), _fourth_order_derivative(va, dt))
    d = dual.h_a.dim
    rhs = chi_a + 1j * ea[inner][:, None, :] * np.eye(d)[None]
    diag = np.abs(np.einsum("knn->kn", lhs - rhs)).max()
    off = np.abs((lhs - rhs)[:, ~np.eye(d, dtype=bool)]).max() if d > 1 else 0.0
    return {"coupling": float(max(diag, off)), "diagonal": float(diag), "off_diagonal": float(off)}


def pi_phase_residual(h_a: TimeDependentHamiltonian, n: int, k: int, t: float,
                      points: Optional[int] = None) -> Tuple[float, int, float]:
    """Diagnostic ``(value, nearest_q, residual)`` for ``int_0^t (E_n - E_k) dt' = q pi``.

    Reported only; no pass/fail is attached.
    """
    if not 0 < t <= h_a.T * (1 + 1e-12):
        raise ValueError(f"t must lie in (0, T], got {t!r}")
    if points is None:
        hmax = max(h_a.max_norm(64), 1e-12)
        points = max(1025, 2 * int(np.ceil(t * hmax / 0.05)) + 1)
    ts = np.linspace(0.0, min(t, h_a.T), points)
    E = np.linalg.eigvalsh(h_a.evaluate(ts))
    value = float(simpson(E[:, n] - E[:, k], x=ts))
    q = int(round(value / np.pi))
    return value, q, abs(value - q * np.pi)


def dual_report(dual: DualSystem, opts: Optional[PropagatorOptions] = None) -> Dict[str, float]:
    """Run every verification and store the residuals on ``dual.residuals``."""
    res = dict(verify_spectrum_and_states(dual))
    res["evolution_inverse"] = verify_evolution_inverse(dual, opts)
    if dual.grid.size >= 5:
        res.update(coupling_relation_check(dual))
    # B must also be diagonalizable without crossings on the grid
    decompose(dual.h_b, dual.grid, coupling="hellmann_feynman")
    dual.residuals.update(res)
    return res
