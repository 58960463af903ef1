"""Path-following max-min precoding.

:func:`initialize` iterates the Shannon-rate subproblem from a random start;
:func:`run` then iterates the URLLC subproblem. Each iterate is feasible and
the minimum rate never decreases, because each subproblem maximizes a
minorant that is tight at the current point.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import surrogates as sg
from .rates import dispersion, evaluate_rates, penalty_factor, per_ap_power, shannon_rate, sinr_all
from .subproblem import build_init_subproblem, build_subproblem, solve

_START_REDRAWS = 10


class InitializationFailed(RuntimeError):
    def __init__(self, user: int, phi: float, floor: float):
        super().__init__(f"user {user} cannot reach SINR floor {floor:.1e} (SINR {phi:.3e})")
        self.user = user
        self.phi = phi


@dataclass
class IterationRecord:
    phase: str  # "init" | "main"
    iteration: int
    objective: float  # min_k of the surrogate solved at this step
    min_urllc: float
    min_shannon: float
    urllc: np.ndarray
    shannon: np.ndarray
    status: str
    solver_iterations: int
    wall_time: float


@dataclass
class PfaTrace:
    """Per-iteration history of one run; rates in nats/s/Hz.

    Iteration 0 of each phase is the phase's starting point (status "start").
    """

    records: list = field(default_factory=list)
    converged: bool = False

    def phase(self, name: str) -> list:
        return [r for r in self.records if r.phase == name]

    def min_urllc(self, phase: str = "main") -> np.ndarray:
        return np.array([r.min_urllc for r in self.phase(phase)])

    def min_shannon(self, phase: str = "main") -> np.ndarray:
        return np.array([r.min_shannon for r in self.phase(phase)])

    def objective_series(self, phase: str = "main") -> np.ndarray:
        return np.array([r.objective for r in self.phase(phase)])

    @property
    def iterations(self) -> int:
        """Number of main-loop subproblems solved."""
        return max(0, len(self.phase("main")) - 1)

    @property
    def init_iterations(self) -> int:
        return max(0, len(self.phase("init")) - 1)

    def is_monotone(self, slack: float = 1e-9, phase: str = "main", key: str = "min_urllc") -> bool:
        vals = np.array([getattr(r, key) for r in self.phase(phase)])
        return bool(np.all(np.diff(vals) >= -slack))

    def rows(self) -> list[dict]:
        out = []
        for r in self.records:
            row = {
                "phase": r.phase,
                "iteration": r.iteration,
                "objective": r.objective,
                "min_urllc": r.min_urllc,
                "min_shannon": r.min_shannon,
                "status": r.status,
                "solver_iterations": r.solver_iterations,
                "wall_time": r.wall_time,
            }
            for k, v in enumerate(r.urllc):
                row[f"urllc_{k}"] = v
            for k, v in enumerate(r.shannon):
                row[f"shannon_{k}"] = v
            out.append(row)
        return out

    def to_csv(self, path: str | Path) -> None:
        """One row per iteration: phase, iteration, objective, min rates,
        solver status, solver iterations, wall time, then per-user
        ``urllc_k`` and ``shannon_k`` (nats/s/Hz)."""
        rows = self.rows()
        if not rows:
            Path(path).write_text("")
            return
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            writer.writerows(rows)


def random_start(LN: int, K: int, L: int, p_max: float, rng: np.random.Generator) -> np.ndarray:
    """Complex Gaussian precoder with every AP at power ``min(p_max, K)``."""
    W = (rng.standard_normal((LN, K)) + 1j * rng.standard_normal((LN, K))) / np.sqrt(2.0)
    target = min(p_max, K)
    scale = np.sqrt(target / per_ap_power(W, L))
    return W * np.repeat(scale, LN // L)[:, None]


def _record(trace, phase, it, H, W, config, objective, status, solver_its, wall):
    rv = evaluate_rates(H, W, config.sigma2, config.t, config.B, config.epsilon)
    trace.records.append(
        IterationRecord(phase, it, float(objective), rv.min_urllc, rv.min_shannon,
                        rv.urllc, rv.shannon, status, solver_its, wall)
    )
    return rv


def _converged(old: float, new: float, tol: float) -> bool:
    # relative for large rates, absolute (nats) near zero
    return abs(new - old) <= tol * (1.0 + abs(old))


def _draw_start(H, config, rng):
    LN, K = H.shape
    L = LN // config.N
    for _ in range(_START_REDRAWS):
        W = random_start(LN, K, L, config.p_max, rng)
        phi = sinr_all(H, W, config.sigma2)
        if np.all(phi >= config.phi_floor):
            return W
    k = int(np.argmin(phi))
    raise InitializationFailed(k, float(phi[k]), config.phi_floor)


def initialize(
    H: np.ndarray,
    config,
    rng: Optional[np.random.Generator] = None,
    start: Optional[np.ndarray] = None,
    trace: Optional[PfaTrace] = None,
) -> np.ndarray:
    """Feasible starting precoder with every SINR above ``config.phi_floor``.

    Starts from ``start`` (or a random draw from ``rng``) and iterates the
    Shannon-rate subproblem until the minimum Shannon rate changes by at
    most ``config.pfa_tol * (1 + |previous|)`` or ``config.init_max_iter``
    steps have been taken.
    """
    if start is None:
        if rng is None:
            raise ValueError("initialize needs an rng or a start point")
        W = _draw_start(H, config, rng)
    else:
        W = np.array(start, dtype=complex)
        phi = sinr_all(H, W, config.sigma2)
        if not np.all(phi >= config.phi_floor):
            k = int(np.argmin(phi))
            raise InitializationFailed(k, float(phi[k]), config.phi_floor)
    trace = trace if trace is not None else PfaTrace()
    rv = _record(trace, "init", 0, H, W, config, np.nan, "start", 0, 0.0)
    prev = rv.min_shannon
    for it in range(1, config.init_max_iter + 1):
        t0 = time.perf_counter()
        state = sg.freeze_state(H, W, config.sigma2, 0.0, config.phi_floor)
        res = solve(build_init_subproblem(state, H, config), W, tol=config.solver_tol)
        W = res.W_next
        rv = _record(trace, "init", it, H, W, config, res.objective, res.status,
                     res.iterations, time.perf_counter() - t0)
        if _converged(prev, rv.min_shannon, config.pfa_tol):
            break
        prev = rv.min_shannon
    return W


def run(
    H: np.ndarray,
    config,
    rng: Optional[np.random.Generator] = None,
    start: Optional[np.ndarray] = None,
    a: Optional[float] = None,
    init: bool = True,
):
    """Initialization followed by the path-following loop.

    ``a`` overrides the dispersion weight (``a = 0`` gives Shannon max-min).
    With ``init=False`` the (already initialized) ``start`` is used as the
    first expansion point directly. Returns ``(W, trace)``; the trace's
    main-phase minimum rate (under the weight actually optimized) is
    non-decreasing.
    """
    if a is None:
        a = penalty_factor(config.t, config.B, config.epsilon)
    trace = PfaTrace()
    if init:
        W = initialize(H, config, rng, start=start, trace=trace)
    else:
        if start is None:
            raise ValueError("init=False needs a start point")
        W = np.array(start, dtype=complex)

    def objective(Wc):
        phi = sinr_all(H, Wc, config.sigma2)
        return float(np.min(shannon_rate(phi) - a * np.sqrt(dispersion(phi))))

    cur = objective(W)
    _record(trace, "main", 0, H, W, config, cur, "start", 0, 0.0)
    for it in range(1, config.pfa_max_iter + 1):
        t0 = time.perf_counter()
        state = sg.freeze_state(H, W, config.sigma2, a, config.phi_floor)
        res = solve(build_subproblem(state, H, config), W, tol=config.solver_tol)
        new = objective(res.W_next)
        if new < cur:
            # rounding-level loss: keep the current point
            W_next, new = W, cur
        else:
            W_next = res.W_next
        W = W_next
        _record(trace, "main", it, H, W, config, res.objective, res.status,
                res.iterations, time.perf_counter() - t0)
        cur_old, cur = cur, new
        if res.status == "infeasible":
            break
        if _converged(cur_old, new, config.pfa_tol):
            trace.converged = True
            break
    return W, trace
