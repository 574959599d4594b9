"""End-to-end runs and their JSON / CSV serialization.

Reports contain no timestamps and floats are written with ``repr`` (shortest
round-trip form, at most 17 significant digits), so identical configurations
produce byte-identical JSON.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from .conditions import (ConditionReport, amin_analytic_p0, amin_validity, evaluate_conditions,
                         population_lower_bound, population_rates)
from .config import ConfigError, RunConfig, build_hamiltonian
from .dual import build_dual, dual_report
from .errors import StepTooCoarse
from .hamiltonian import AminScenario, TimeDependentHamiltonian
from .propagate import EvolutionResult, evolve, make_grid
from .spectral import SpectralTrajectory, decompose, eigenstate

MAX_SERIES_POINTS = 10_000
B_REFINEMENT_TOL = 1e-6


@dataclass
class RunOutcome:
    config: RunConfig
    hamiltonian: TimeDependentHamiltonian
    trajectory: SpectralTrajectory
    evolution: EvolutionResult
    conditions: ConditionReport
    oracle_deviation: Optional[float] = None
    bound_refinement_shift: Optional[float] = None
    dual: Optional[Dict[str, float]] = None


def run(cfg: RunConfig, check: bool = False, with_dual: bool = False) -> RunOutcome:
    """Simulate a configured scenario and evaluate every criterion.

    In ``check`` mode the propagator's step-halving refinement is forced on
    and the bound ``B`` is recomputed on the halved grid; a shift of
    ``1e-6`` or more raises :class:`StepTooCoarse`.
    """
    opts = cfg.options
    if check and not opts.refinement:
        opts = type(opts)(opts.dt, True, opts.unitarity_tol, opts.refine_factor)
    H = build_hamiltonian(cfg.scenario, cfg.horizon, opts)
    if cfg.initial_level >= H.dim:
        raise ConfigError(f"initial_level {cfg.initial_level} >= dimension {H.dim}")
    grid = make_grid(H, opts)
    traj = decompose(H, grid)
    result = evolve(H, eigenstate(H, cfg.initial_level), opts, traj=traj, level=cfg.initial_level)
    cond = evaluate_conditions(traj, result, cfg.initial_level, cfg.threshold_values)
    out = RunOutcome(cfg, H, traj, result, cond)

    if H.kind == "amin":
        sc = AminScenario(**{k: H.params[k] for k in ("epsilon", "V", "omega0")})
        out.oracle_deviation = float(np.max(np.abs(result.populations[:, 0] - amin_analytic_p0(sc, grid))))
    if check:
        fine = np.empty(2 * grid.size - 1)
        fine[0::2], fine[1::2] = grid, 0.5 * (grid[:-1] + grid[1:])
        B_fine, _ = population_lower_bound(decompose(H, fine), cfg.initial_level)
        out.bound_refinement_shift = abs(B_fine - cond.bound)
        if out.bound_refinement_shift >= B_REFINEMENT_TOL:
            raise StepTooCoarse(f"bound B moved by {out.bound_refinement_shift:.3e} under grid refinement")
    if with_dual:
        dual = build_dual(H, opts)
        out.dual = dual_report(dual, opts)
    return out


# -- downsampling -------------------------------------------------------------------------------


def downsample_indices(n: int, keep: Sequence[int] = (), limit: int = MAX_SERIES_POINTS) -> np.ndarray:
    """Evenly spaced indices (always including both ends and every index in ``keep``)."""
    keep = sorted({int(k) for k in keep if 0 <= k < n} | {0, n - 1})
    if n <= limit:
        return np.arange(n)
    base = np.linspace(0, n - 1, max(limit - len(keep), 2)).round().astype(int)
    idx = np.union1d(base, keep)
    while idx.size > limit:  # union may overshoot by a few; thin the even part
        base = base[::2] if base.size > 2 else base[:0]
        idx = np.union1d(base, keep)
    return idx


def _argmax_indices(out: RunOutcome) -> List[int]:
    keep = [out.conditions.traditional.argmax_index]
    keep.extend(int(i) for i in out.conditions.sufficient.argmax_index)
    if out.conditions.traditional.series.size:
        keep.extend(int(i) for i in np.argmax(out.conditions.traditional.series, axis=0))
    return keep


# -- JSON ---------------------------------------------------------------------------------------


def to_json_safe(obj: Any) -> Any:
    """Convert numpy types and non-finite floats into JSON-safe values."""
    if isinstance(obj, dict):
        return {str(k): to_json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_json_safe(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_json_safe(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def _pair_key(n: int, m: int) -> str:
    return f"{n}_{m}"


def report_document(out: RunOutcome) -> Dict[str, Any]:
    c = out.conditions
    traj, res = out.trajectory, out.evolution
    idx = downsample_indices(len(traj), _argmax_indices(out))
    pairs = c.traditional.pairs
    n = c.level
    fd, pred = population_rates(res, traj)
    doc: Dict[str, Any] = {
        "tool": {"name": "adiacheck", "version": __version__},
        "config": out.config.to_dict(),
        "grid": {
            "points": int(len(traj)),
            "T": traj.T,
            "dt": res.dt,
            "derivative_method": out.hamiltonian.derivative_method,
            "coupling_method": traj.coupling_method,
            "kind": out.hamiltonian.kind,
            "dim": out.hamiltonian.dim,
            "series_points": int(idx.size),
        },
        "evolution": {
            "level": n,
            "final_populations": res.populations[-1],
            "final_fidelity": res.final_fidelity,
            "refinement_difference": res.refinement_difference,
            "max_norm_drift": float(np.max(np.abs(np.linalg.norm(res.states, axis=1) - 1.0))),
        },
        "conditions": {
            "traditional_ratio": {
                "max": c.traditional.max,
                "argmax_time": c.traditional.argmax_time,
                "argmax_pair": c.traditional.argmax_pair,
                "pair_max": {_pair_key(*p): float(c.traditional.series[:, i].max()) for i, p in enumerate(pairs)},
            },
            "sufficient": {
                "level": n,
                "per_level": c.sufficient.per_level,
                "total": c.sufficient.total,
                "max_coupling": c.sufficient.max_coupling,
            },
            "population_bound": {"B": c.bound, "B_coarse": c.bound_coarse, "chain_holds": c.bound_chain_holds,
                                 "refinement_shift": out.bound_refinement_shift},
            "leet": {
                "pairs": pairs,
                "mean_leet": c.leet.mean_leet,
                "least_evolution_time": c.leet.least_evolution_time,
                "mean_gap": c.leet.mean_gap,
                "count": c.leet.count,
            },
            "epsilon": {str(m): v for m, v in c.epsilon.items()},
            "identity_residual": c.identity_residual,
            "rate_identity_residual": float(np.max(np.abs(fd - pred)[1:-1])) if len(traj) > 2 else 0.0,
            "resonance": [
                {"n": r.n, "m": r.m, "resonant": r.resonant, "mismatch": r.mismatch, "phase_source": r.phase_source}
                for r in c.resonance
            ],
            "series": {
                "t": traj.grid[idx],
                "eigenvalues": traj.eigenvalues[idx],
                "populations": res.populations[idx],
                "abs_chi": {_pair_key(a, b): np.abs(traj.couplings[idx, a, b]) for a, b in pairs},
                "ratio": {_pair_key(*p): c.traditional.series[idx, i] for i, p in enumerate(pairs)},
                "leet": {_pair_key(*p): c.leet.series[idx, i] for i, p in enumerate(pairs)},
            },
        },
        "verdict": {
            "traditional_pass": c.verdict.traditional_pass,
            "sufficient_pass": c.verdict.sufficient_pass,
            "adiabatic_observed": c.verdict.adiabatic_observed,
            "classification": c.verdict.classification,
            "thresholds": asdict(c.verdict.thresholds),
        },
    }
    if out.oracle_deviation is not None:
        p = out.hamiltonian.params
        doc["analytic_oracle"] = {
            "max_deviation": out.oracle_deviation,
            "validity": amin_validity(AminScenario(p["epsilon"], p["V"], p["omega0"])),
        }
    if out.dual is not None:
        doc["dual"] = out.dual
    return to_json_safe(doc)


def dumps(doc: Dict[str, Any]) -> str:
    return json.dumps(doc, indent=1, allow_nan=False) + "\n"


# -- CSV ----------------------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def timeseries_columns(dim: int) -> List[str]:
    pairs = [(n, m) for n in range(dim) for m in range(n + 1, dim)]
    return (["t"] + [f"E_{n}" for n in range(dim)] + [f"P_{n}" for n in range(dim)]
            + [f"abs_chi_{a}_{b}" for a, b in pairs] + [f"r_{a}_{b}" for a, b in pairs])


def timeseries_csv(out: RunOutcome) -> str:
    traj, res, c = out.trajectory, out.evolution, out.conditions
    idx = downsample_indices(len(traj), _argmax_indices(out))
    pairs = c.traditional.pairs
    cols = [traj.grid[idx]]
    cols += [traj.eigenvalues[idx, k] for k in range(traj.dim)]
    cols += [res.populations[idx, k] for k in range(traj.dim)]
    cols += [np.abs(traj.couplings[idx, a, b]) for a, b in pairs]
    cols += [c.traditional.series[idx, i] for i in range(len(pairs))]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(timeseries_columns(traj.dim))
    for row in zip(*cols):
        w.writerow([_fmt(x) for x in row])
    return buf.getvalue()


SWEEP_COLUMNS = ["value", "max_ratio", "sufficient_total", "final_fidelity", "epsilon_sum", "bound",
                 "resonant", "classification"]


def sweep_row(value: float, out: RunOutcome) -> List[str]:
    c = out.conditions
    flags = [r.resonant for r in c.resonance]
    resonant = "" if not flags or any(f is None for f in flags) else str(any(flags)).lower()
    return [_fmt(value), _fmt(c.traditional.max), _fmt(c.sufficient.total), _fmt(c.final_fidelity),
            _fmt(sum(c.epsilon.values())), _fmt(c.bound), resonant, c.verdict.classification]


def sweep_csv(values: Sequence[float], outcomes: Sequence[RunOutcome]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for v, o in zip(values, outcomes):
        w.writerow(sweep_row(v, o))
    return buf.getvalue()


def write_atomic(path: str, text: str) -> None:
    """Write via a temporary file in the target directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
