"""Instantaneous eigendecomposition along a time grid.

Eigenvectors are aligned by discrete parallel transport: every vector's phase
is rotated so that its overlap with the same level on the previous frame is
real and positive.  In this gauge the diagonal couplings ``<E_n|dE_n/dt>``
vanish to second order in the grid spacing, which is the gauge all the
amplitude identities downstream assume.

Couplings ``chi[n, m] = <E_n|dE_m/dt>`` are available through two independent
routes: Hellmann-Feynman (``<E_n|dH/dt|E_m> / (E_m - E_n)``) and a central
finite difference of the aligned eigenvectors.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DegenerateSpectrum, InsufficientGrid, LevelTrackingLost
from .hamiltonian import TimeDependentHamiltonian

EIG_TOL = 1e-10
GAP_FLOOR = 1e-8
GAUGE_TOL = 1e-6
TRACKING_FRACTION = 0.5


@dataclass(frozen=True)
class SpectralFrame:
    t: float
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # column n pairs with eigenvalue n
    min_gap: float


@dataclass(frozen=True)
class SpectralTrajectory:
    """Gauge-aligned eigen-data on a grid.

    Arrays are indexed by grid point first: ``eigenvalues[k, n]``,
    ``eigenvectors[k, :, n]`` and ``couplings[k, n, m]``.
    """

    grid: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    couplings: np.ndarray
    coupling_method: str

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[1]

    @property
    def T(self) -> float:
        return float(self.grid[-1] - self.grid[0])

    @property
    def min_gaps(self) -> np.ndarray:
        if self.dim < 2:
            return np.full(self.grid.size, np.inf)
        return np.diff(self.eigenvalues, axis=1).min(axis=1)

    def __len__(self) -> int:
        return self.grid.size

    def frame(self, k: int) -> SpectralFrame:
        return SpectralFrame(
            t=float(self.grid[k]),
            eigenvalues=self.eigenvalues[k],
            eigenvectors=self.eigenvectors[k],
            min_gap=float(self.min_gaps[k]),
        )

    @property
    def frames(self):
        return [self.frame(k) for k in range(len(self))]


def _fix_initial_phase(V: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude component of each column real and positive."""
    idx = np.argmax(np.abs(V), axis=0)
    pivot = V[idx, np.arange(V.shape[1])]
    return V * (np.conj(pivot) / np.abs(pivot))[None, :]


def align_gauge(eigenvectors: np.ndarray) -> np.ndarray:
    """Discrete parallel transport of a ``(K, dim, dim)`` eigenvector stack.

    The phase correction of frame ``k+1`` is the running sum of minus the
    arguments of the raw overlaps, so the whole alignment is one ``cumsum``.
    Idempotent on an already aligned stack.
    """
    V = np.array(eigenvectors, dtype=complex, copy=True)
    V[0] = _fix_initial_phase(V[0])
    if V.shape[0] == 1:
        return V
    overlaps = np.einsum("kin,kin->kn", np.conj(V[:-1]), V[1:])
    if np.any(np.abs(overlaps) < 0.5):
        k, n = np.argwhere(np.abs(overlaps) < 0.5)[0]
        raise LevelTrackingLost(
            f"eigenvector {n} rotated too far between grid points {k} and {k + 1}; refine the grid"
        )
    phases = np.cumsum(-np.angle(overlaps), axis=0)
    V[1:] *= np.exp(1j * phases)[:, None, :]
    return V


def _hf_couplings(dH: np.ndarray, evals: np.ndarray, evecs: np.ndarray) -> np.ndarray:
    """Vectorized Hellmann-Feynman couplings; diagonal is exactly zero."""
    num = np.einsum("kia,kij,kjb->kab", np.conj(evecs), dH, evecs)
    gaps = evals[:, None, :] - evals[:, :, None]  # E_m - E_n at [k, n, m]
    d = evals.shape[1]
    off = ~np.eye(d, dtype=bool)
    if np.any(np.abs(gaps[:, off]) == 0):
        raise DegenerateSpectrum("exactly degenerate levels in coupling evaluation")
    chi = np.zeros_like(num)
    chi[:, off] = num[:, off] / gaps[:, off]
    return chi


def coupling_hellmann_feynman(H: TimeDependentHamiltonian, frame: SpectralFrame,
                              gap_floor: float = GAP_FLOOR) -> np.ndarray:
    """``chi[n, m] = <E_n|dH/dt|E_m> / (E_m - E_n)`` at one frame, zero diagonal."""
    scale = max(float(np.max(np.abs(frame.eigenvalues))), 1.0)
    if frame.eigenvalues.size > 1 and frame.min_gap <= gap_floor * scale:
        raise DegenerateSpectrum(f"min gap {frame.min_gap:.3e} at t={frame.t!r}")
    dH = H.derivative(frame.t)
    return _hf_couplings(dH[None], frame.eigenvalues[None], frame.eigenvectors[None])[0]


def coupling_finite_difference(traj: SpectralTrajectory) -> np.ndarray:
    """Couplings from central differences of the aligned eigenvectors.

    Interior points use the centred quotient
    ``<v_n(t_k)| (v_m(t_{k+1}) - v_m(t_{k-1})) / (t_{k+1} - t_{k-1})``;
    the two end points use second-order one-sided differences.  The result is
    returned raw (not anti-Hermitized).
    """
    if traj.grid.size < 3:
        raise InsufficientGrid("finite-difference couplings need at least 3 grid points")
    dV = np.gradient(traj.eigenvectors, traj.grid, axis=0, edge_order=2)
    return np.einsum("kia,kib->kab", np.conj(traj.eigenvectors), dV)


def _check_frames(Hs, evals, evecs, eig_tol, gap_floor, grid):
    norms = np.max(np.abs(evals), axis=1)
    scale = np.maximum(norms, 1e-300)
    resid = np.linalg.norm(
        np.einsum("kij,kjn->kin", Hs, evecs) - evecs * evals[:, None, :], axis=1
    ).max(axis=1)
    if np.any(resid > eig_tol * np.maximum(norms, 1.0)):
        k = int(np.argmax(resid))
        raise LevelTrackingLost(f"eigen-residual {resid[k]:.3e} at t={grid[k]!r}")
    if evals.shape[1] < 2:
        return np.full(grid.size, np.inf)
    gaps = np.diff(evals, axis=1).min(axis=1)
    bad = gaps <= gap_floor * scale
    if np.any(bad):
        k = int(np.argmax(bad))
        raise DegenerateSpectrum(
            f"levels nearly cross at t={grid[k]!r} (gap {gaps[k]:.3e}); "
            "the adiabatic analysis assumes non-crossing levels"
        )
    return gaps


def decompose(H: TimeDependentHamiltonian, grid, coupling: str = "auto",
              eig_tol: float = EIG_TOL, gap_floor: float = GAP_FLOOR,
              tracking_fraction: float = TRACKING_FRACTION) -> SpectralTrajectory:
    """Diagonalize ``H`` on ``grid`` and compute couplings.

    Parameters
    ----------
    coupling:
        ``"hellmann_feynman"``, ``"finite_difference"`` or ``"auto"`` (the
        former when ``H`` has an analytic derivative).

    Raises
    ------
    DegenerateSpectrum
        If an adjacent gap falls below ``gap_floor * ||H(t)||``.
    LevelTrackingLost
        If an eigenvalue moves by more than ``tracking_fraction`` of the local
        minimum gap between consecutive frames.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2:
        raise InsufficientGrid("decompose needs a grid with at least 2 points")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    Hs = H.evaluate(grid)
    evals, evecs = np.linalg.eigh(Hs)
    gaps = _check_frames(Hs, evals, evecs, eig_tol, gap_floor, grid)
    if evals.shape[1] > 1:
        jumps = np.abs(np.diff(evals, axis=0)).max(axis=1)
        local = np.minimum(gaps[:-1], gaps[1:])
        bad = jumps >= tracking_fraction * local
        if np.any(bad):
            k = int(np.argmax(bad))
            raise LevelTrackingLost(
                f"eigenvalues jump {jumps[k]:.3e} between t={grid[k]!r} and t={grid[k + 1]!r}, "
                f"more than {tracking_fraction} of the local gap {local[k]:.3e}"
            )
    evecs = align_gauge(evecs)

    if coupling == "auto":
        coupling = "hellmann_feynman" if H.has_analytic_derivative else "finite_difference"
    if coupling == "hellmann_feynman":
        chi = _hf_couplings(H.derivative(grid), evals, evecs)
    elif coupling == "finite_difference":
        raw = SpectralTrajectory(grid, evals, evecs, np.zeros_like(Hs), "finite_difference")
        chi = coupling_finite_difference(raw)
        # the exact coupling is anti-Hermitian; project out the O(h^2) defect
        chi = 0.5 * (chi - np.conj(np.swapaxes(chi, 1, 2)))
    else:
        raise ValueError(f"unknown coupling method {coupling!r}")
    return SpectralTrajectory(grid, evals, evecs, chi, coupling)


def gauge_defect(traj: SpectralTrajectory) -> float:
    """Largest ``|Im <v_n(t_k)|v_n(t_{k+1})>|`` over the trajectory."""
    if traj.grid.size < 2:
        return 0.0
    ov = np.einsum("kin,kin->kn", np.conj(traj.eigenvectors[:-1]), traj.eigenvectors[1:])
    return float(np.max(np.abs(ov.imag)))


def orthonormality_defect(traj: SpectralTrajectory) -> float:
    V = traj.eigenvectors
    G = np.einsum("kia,kib->kab", np.conj(V), V)
    return float(np.max(np.abs(G - np.eye(traj.dim)[None])))


def eigenstate(H: TimeDependentHamiltonian, level: int, t: Optional[float] = None) -> np.ndarray:
    """Instantaneous eigenvector ``level`` (ascending order) of ``H(t)``, default ``t=0``."""
    M = H.evaluate(0.0 if t is None else t)
    if not 0 <= level < H.dim:
        raise ValueError(f"level {level} out of range for dim {H.dim}")
    _, V = np.linalg.eigh(M)
    return _fix_initial_phase(V)[:, level]
