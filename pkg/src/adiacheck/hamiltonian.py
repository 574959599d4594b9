"""Time-dependent Hermitian Hamiltonians on a finite horizon ``[0, T]``.

Units are natural throughout (hbar = 1), so time and energy are reciprocal.
Every Hamiltonian carries a *vectorized* evaluator: it maps an array of
``k`` times to a ``(k, dim, dim)`` complex stack.  This keeps the inner loops
of propagation and diagonalization inside numpy.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .errors import NonHermitianSample, TimeOutOfDomain

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)

KINDS = (
    "amin",
    "landau_zener",
    "constant",
    "dual_derived",
    "custom_sampled",
    "random_smooth",
    "analytic",
)

MatrixStackFn = Callable[[np.ndarray], np.ndarray]


def hermiticity_residual(H: np.ndarray) -> np.ndarray:
    """Return ``max|H_ij - conj(H_ji)|`` for a matrix or a stack of matrices."""
    H = np.asarray(H)
    diff = np.abs(H - np.conj(np.swapaxes(H, -1, -2)))
    return diff.max(axis=(-1, -2))


def _check_hermitian(H: np.ndarray, tol: float, what: str = "sample") -> None:
    resid = hermiticity_residual(H)
    scale = 1.0 + np.abs(H).max(axis=(-1, -2))
    bad = resid > tol * scale
    if np.any(bad):
        worst = float(np.max(resid))
        raise NonHermitianSample(f"non-Hermitian {what}: residual {worst:.3e} exceeds tolerance")


@dataclass(frozen=True)
class TimeDependentHamiltonian:
    """A Hermitian matrix path ``H(t)`` for ``t`` in ``[0, T]``.

    Parameters
    ----------
    dim:
        Hilbert-space dimension.
    T:
        Horizon; the domain is the closed interval ``[0, T]``.
    func:
        Vectorized evaluator, ``(k,) -> (k, dim, dim)``.
    dfunc:
        Optional vectorized ``dH/dt``.  When absent, :meth:`derivative` falls
        back to a central finite difference of step ``fd_step``.
    kind:
        Provenance tag, one of :data:`KINDS`.
    params:
        Scenario parameters, echoed into reports.
    fd_step:
        Finite-difference step; defaults to ``1e-6 * T``.
    herm_tol:
        Relative hermiticity tolerance checked on every evaluation.
    """

    dim: int
    T: float
    func: MatrixStackFn = field(repr=False)
    dfunc: Optional[MatrixStackFn] = field(default=None, repr=False)
    kind: str = "analytic"
    params: Mapping = field(default_factory=dict)
    fd_step: Optional[float] = None
    herm_tol: float = 1e-12

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim!r}")
        if not np.isfinite(self.T) or self.T <= 0:
            raise ValueError(f"horizon T must be positive, got {self.T!r}")
        if self.kind not in KINDS:
            raise ValueError(f"unknown Hamiltonian kind {self.kind!r}")

    @property
    def has_analytic_derivative(self) -> bool:
        return self.dfunc is not None

    @property
    def derivative_method(self) -> str:
        return "analytic" if self.dfunc is not None else "finite_difference"

    @property
    def h_fd(self) -> float:
        return self.fd_step if self.fd_step is not None else 1e-6 * self.T

    def _times(self, t):
        ts = np.asarray(t, dtype=float)
        scalar = ts.ndim == 0
        ts = np.atleast_1d(ts)
        slack = 1e-12 * self.T
        if np.any(ts < -slack) or np.any(ts > self.T + slack) or not np.all(np.isfinite(ts)):
            bad = ts[(ts < -slack) | (ts > self.T + slack) | ~np.isfinite(ts)][0]
            raise TimeOutOfDomain(f"t={bad!r} outside [0, {self.T!r}]")
        return np.clip(ts, 0.0, self.T), scalar

    def evaluate(self, t):
        """Return ``H(t)``; a single matrix for scalar ``t``, a stack otherwise."""
        ts, scalar = self._times(t)
        Hs = np.asarray(self.func(ts), dtype=complex)
        if Hs.shape != (ts.size, self.dim, self.dim):
            raise ValueError(f"evaluator returned shape {Hs.shape}, expected {(ts.size, self.dim, self.dim)}")
        _check_hermitian(Hs, self.herm_tol)
        return Hs[0] if scalar else Hs

    __call__ = evaluate

    def derivative(self, t):
        """Return ``dH/dt``.

        Uses the analytic derivative when one was supplied.  Otherwise a
        central difference is taken in the interior and a second-order
        one-sided difference within ``fd_step`` of either endpoint.
        """
        ts, scalar = self._times(t)
        if self.dfunc is not None:
            dH = np.asarray(self.dfunc(ts), dtype=complex)
        else:
            dH = self._fd_derivative(ts)
        # symmetrize away roundoff; the exact derivative is Hermitian
        dH = 0.5 * (dH + np.conj(np.swapaxes(dH, -1, -2)))
        return dH[0] if scalar else dH

    def _fd_derivative(self, ts: np.ndarray) -> np.ndarray:
        h = self.h_fd
        out = np.empty((ts.size, self.dim, self.dim), dtype=complex)
        left = ts - h < 0.0
        right = (ts + h > self.T) & ~left
        mid = ~(left | right)
        f = lambda x: np.asarray(self.func(x), dtype=complex)
        if mid.any():
            tm = ts[mid]
            out[mid] = (f(tm + h) - f(tm - h)) / (2 * h)
        if left.any():
            tl = ts[left]
            out[left] = (-3 * f(tl) + 4 * f(tl + h) - f(tl + 2 * h)) / (2 * h)
        if right.any():
            tr = ts[right]
            out[right] = (3 * f(tr) - 4 * f(tr - h) + f(tr - 2 * h)) / (2 * h)
        return out

    def max_norm(self, samples: int = 256) -> float:
        """Largest spectral norm of ``H(t)`` over ``samples`` equispaced times."""
        Hs = self.evaluate(np.linspace(0.0, self.T, samples))
        return float(np.max(np.abs(np.linalg.eigvalsh(Hs))))


def _stack(ts: np.ndarray, M: np.ndarray) -> np.ndarray:
    return np.broadcast_to(M, (ts.size,) + M.shape).copy()


@dataclass(frozen=True)
class AminScenario:
    """Driven two-level system ``H(t) = -eps*sz/2 - V sin(omega0 t) sx``."""

    epsilon: float
    V: float
    omega0: float

    def __post_init__(self):
        if not self.V > 0:
            raise ValueError("V must be positive")
        if not self.omega0 > 0:
            raise ValueError("omega0 must be positive")

    def hamiltonian(self, T: float) -> TimeDependentHamiltonian:
        eps, V, w = float(self.epsilon), float(self.V), float(self.omega0)
        base = -0.5 * eps * SIGMA_Z

        def func(ts):
            return base[None] - (V * np.sin(w * ts))[:, None, None] * SIGMA_X[None]

        def dfunc(ts):
            return -(V * w * np.cos(w * ts))[:, None, None] * SIGMA_X[None]

        return TimeDependentHamiltonian(
            dim=2, T=T, func=func, dfunc=dfunc, kind="amin",
            params={"epsilon": eps, "V": V, "omega0": w},
        )

    def gap(self, t):
        """Exact instantaneous gap ``sqrt(eps^2 + 4 V^2 sin^2(omega0 t))``."""
        return np.sqrt(self.epsilon**2 + 4 * self.V**2 * np.sin(self.omega0 * np.asarray(t)) ** 2)


def amin(epsilon: float, V: float, omega0: float, T: float) -> TimeDependentHamiltonian:
    return AminScenario(epsilon, V, omega0).hamiltonian(T)


def landau_zener(v: float, delta: float, T: float) -> TimeDependentHamiltonian:
    """Linear sweep ``H(t) = v (t - T/2) sz/2 + delta sx`` centred on the horizon."""
    v, delta = float(v), float(delta)
    if delta == 0:
        raise ValueError("delta must be non-zero (levels would cross)")

    def func(ts):
        return (0.5 * v * (ts - 0.5 * T))[:, None, None] * SIGMA_Z[None] + delta * SIGMA_X[None]

    def dfunc(ts):
        return _stack(ts, 0.5 * v * SIGMA_Z)

    return TimeDependentHamiltonian(
        dim=2, T=T, func=func, dfunc=dfunc, kind="landau_zener", params={"v": v, "delta": delta}
    )


def constant(matrix, T: float, herm_tol: float = 1e-12) -> TimeDependentHamiltonian:
    H0 = np.array(matrix, dtype=complex)
    if H0.ndim != 2 or H0.shape[0] != H0.shape[1]:
        raise ValueError(f"constant Hamiltonian must be square, got shape {H0.shape}")
    _check_hermitian(H0[None], herm_tol, "matrix")
    zero = np.zeros_like(H0)
    return TimeDependentHamiltonian(
        dim=H0.shape[0], T=T,
        func=lambda ts: _stack(ts, H0),
        dfunc=lambda ts: _stack(ts, zero),
        kind="constant",
        params={"matrix": H0.tolist()},
        herm_tol=herm_tol,
    )


def sampled(times: Sequence[float], matrices, herm_tol: float = 1e-12) -> TimeDependentHamiltonian:
    """Entrywise linear interpolation of Hermitian samples.

    ``times`` must start at 0 and be strictly increasing; the horizon is the
    last sample time.  The derivative is the exact slope of the interpolant
    (right-hand slope at interior knots).
    """
    ts = np.asarray(times, dtype=float)
    Ms = np.asarray(matrices, dtype=complex)
    if ts.ndim != 1 or ts.size < 2:
        raise ValueError("need at least two sample times")
    if Ms.ndim != 3 or Ms.shape[0] != ts.size or Ms.shape[1] != Ms.shape[2]:
        raise ValueError(f"matrices must have shape (len(times), dim, dim), got {Ms.shape}")
    if np.any(np.diff(ts) <= 0):
        raise ValueError("sample times must be strictly increasing")
    if abs(ts[0]) > 1e-12 * max(1.0, ts[-1]):
        raise ValueError("sample times must start at t = 0")
    _check_hermitian(Ms, herm_tol)
    slopes = np.diff(Ms, axis=0) / np.diff(ts)[:, None, None]

    def segment(x):
        return np.clip(np.searchsorted(ts, x, side="right") - 1, 0, ts.size - 2)

    def func(x):
        i = segment(x)
        w = ((x - ts[i]) / (ts[i + 1] - ts[i]))[:, None, None]
        return (1 - w) * Ms[i] + w * Ms[i + 1]

    def dfunc(x):
        return slopes[segment(x)]

    return TimeDependentHamiltonian(
        dim=Ms.shape[1], T=float(ts[-1]), func=func, dfunc=dfunc, kind="custom_sampled",
        params={"samples": int(ts.size)}, herm_tol=herm_tol,
    )


def _parse_row(row):
    return [float(x) for x in row]


def read_csv(path) -> TimeDependentHamiltonian:
    """Read a sampled Hamiltonian from CSV.

    Column 0 is time; the remaining ``2*dim**2`` columns hold the matrix
    entries row-major with real and imaginary parts interleaved.  A single
    non-numeric header row is skipped.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise ValueError(f"{path}: empty CSV")
    try:
        _parse_row(rows[0])
    except ValueError:
        rows = rows[1:]
    data = np.array([_parse_row(r) for r in rows], dtype=float)
    ncols = data.shape[1] - 1
    dim = int(round(np.sqrt(ncols / 2)))
    if dim < 1 or 2 * dim * dim != ncols:
        raise ValueError(f"{path}: expected 1 + 2*dim^2 columns, got {data.shape[1]}")
    entries = data[:, 1::2] + 1j * data[:, 2::2]
    H = sampled(data[:, 0], entries.reshape(-1, dim, dim))
    return H


def write_csv(path, times, matrices) -> None:
    """Inverse of :func:`read_csv`."""
    Ms = np.asarray(matrices, dtype=complex)
    dim = Ms.shape[1]
    header = ["t"] + [f"{p}{i}{j}" for i in range(dim) for j in range(dim) for p in ("re", "im")]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for t, M in zip(times, Ms):
            flat = M.reshape(-1)
            vals = np.empty(2 * flat.size)
            vals[0::2], vals[1::2] = flat.real, flat.imag
            w.writerow([f"{t:.17g}"] + [f"{v:.17g}" for v in vals])


def _random_hermitian(rng: np.random.Generator, dim: int) -> np.ndarray:
    X = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    A = 0.5 * (X + X.conj().T)
    return A / np.linalg.norm(A, 2)


def random_smooth(dim: int, seed: int, T: float, amplitude: float = 0.05,
                  n_modes: int = 2) -> TimeDependentHamiltonian:
    """Seeded random smooth path ``diag(levels) + amplitude * sum_j (A_j cos w_j t + B_j sin w_j t)``.

    Level spacings are drawn from ``[1, 2]`` and each ``A_j``, ``B_j`` is a
    random Hermitian matrix of unit spectral norm, so for
    ``amplitude < 1 / (2 sqrt(2) n_modes)`` no two levels can touch.
    """
    rng = np.random.default_rng(seed)
    levels = np.cumsum(rng.uniform(1.0, 2.0, size=dim))
    levels -= levels.mean()
    H0 = np.diag(levels).astype(complex)
    A = np.array([_random_hermitian(rng, dim) for _ in range(n_modes)])
    B = np.array([_random_hermitian(rng, dim) for _ in range(n_modes)])
    w = rng.uniform(0.2, 2.0, size=n_modes)
    amp = float(amplitude)

    def func(ts):
        c, s = np.cos(np.outer(ts, w)), np.sin(np.outer(ts, w))
        return H0[None] + amp * (np.einsum("kj,jab->kab", c, A) + np.einsum("kj,jab->kab", s, B))

    def dfunc(ts):
        c, s = np.cos(np.outer(ts, w)), np.sin(np.outer(ts, w))
        return amp * (np.einsum("kj,jab->kab", -s * w, A) + np.einsum("kj,jab->kab", c * w, B))

    return TimeDependentHamiltonian(
        dim=dim, T=T, func=func, dfunc=dfunc, kind="random_smooth",
        params={"dim": dim, "seed": seed, "amplitude": amp, "n_modes": n_modes},
    )


def from_callable(func: Callable, T: float, dim: int, dfunc: Optional[Callable] = None,
                  vectorized: bool = False, **kwargs) -> TimeDependentHamiltonian:
    """Wrap user callables.  Scalar callables (``t -> matrix``) are looped."""
    if not vectorized:
        scalar_f = func
        func = lambda ts: np.array([scalar_f(float(t)) for t in ts], dtype=complex)
        if dfunc is not None:
            scalar_d = dfunc
            dfunc = lambda ts: np.array([scalar_d(float(t)) for t in ts], dtype=complex)
    return TimeDependentHamiltonian(dim=dim, T=T, func=func, dfunc=dfunc, **kwargs)


def time_rescaled(H: TimeDependentHamiltonian, factor: float) -> TimeDependentHamiltonian:
    """``H'(t) = H(t / factor)`` on ``[0, factor * T]``: the same path traversed slower."""
    factor = float(factor)
    if factor <= 0:
        raise ValueError("factor must be positive")
    dfunc = None
    if H.dfunc is not None:
        dfunc = lambda ts: H.dfunc(ts / factor) / factor
    params = dict(H.params)
    params["time_rescale"] = factor * params.get("time_rescale", 1.0)
    return TimeDependentHamiltonian(
        dim=H.dim, T=H.T * factor, func=lambda ts: H.func(ts / factor), dfunc=dfunc,
        kind=H.kind, params=params,
        fd_step=None if H.fd_step is None else H.fd_step * factor, herm_tol=H.herm_tol,
    )
