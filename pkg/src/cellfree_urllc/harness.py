"""Monte-Carlo experiments, rate statistics, sweeps and serialization.

Every trial derives its generators from ``(seed, trial)`` only (see
:func:`~cellfree_urllc.scenario.trial_rng`), so different precoding modes
see identical user drops and channels and results do not depend on the
worker count or execution order.
"""

from __future__ import annotations

import csv
import json
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from . import pfa
from .config import ScenarioConfig
from .decentralized import flop_ratio, partition_aps, run_decentralized
from .mmse import flop_report, mmse_precoding
from .rates import LN2, dispersion, evaluate_rates, penalty_factor, shannon_rate, sinr_all
from .scenario import ap_grid, draw_scenario, trial_rng

MODES = ("centralized", "decentralized", "mmse", "shannon-centralized")
WORKERS_ENV = "CELLFREE_URLLC_WORKERS"
MAX_FAILURE_FRACTION = 0.01


class ExperimentAborted(RuntimeError):
    pass


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def percentile(samples, q: float) -> float:
    """Empirical quantile with linear interpolation between order statistics."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("percentile of an empty sample")
    if not 0.0 <= q <= 1.0:
        raise ValueError("q must lie in [0, 1]")
    return float(np.quantile(x, q, method="linear"))


@dataclass
class TrialResult:
    trial: int
    shannon: np.ndarray  # nats/s/Hz, per user
    urllc: np.ndarray
    iterations: int = 0  # outer (main-loop) iterations, summed over clusters
    solver_iterations: int = 0
    solver_time: float = 0.0
    wall_time: float = 0.0


@dataclass
class RateReport:
    """Per-trial per-user rates (bits/s/Hz, clamped at zero) plus metadata."""

    mode: str
    seed: int
    config: dict
    config_digest: str
    trials: list = field(default_factory=list)  # trial indices kept
    shannon_bits: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    urllc_bits: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    failed: list = field(default_factory=list)
    wall_times: list = field(default_factory=list)
    iterations: list = field(default_factory=list)
    flops: dict = field(default_factory=dict)

    def samples(self, kind: str = "urllc") -> np.ndarray:
        arr = self.urllc_bits if kind == "urllc" else self.shannon_bits
        return np.asarray(arr, dtype=float).ravel()

    def cdf(self, kind: str = "urllc"):
        """Sorted pooled samples and their empirical CDF values ``i/n``."""
        x = np.sort(self.samples(kind))
        return x, np.arange(1, x.size + 1) / max(x.size, 1)

    def mean(self, kind: str = "urllc") -> float:
        return float(np.mean(self.samples(kind)))

    def likely95(self, kind: str = "urllc") -> float:
        """5th percentile of the pooled per-user rates."""
        return percentile(self.samples(kind), 0.05)

    def min_rate_stats(self, kind: str = "urllc") -> dict:
        arr = self.urllc_bits if kind == "urllc" else self.shannon_bits
        mins = np.min(arr, axis=1)
        return {"mean": float(mins.mean()), "median": float(np.median(mins)),
                "min": float(mins.min()), "max": float(mins.max())}

    def summary(self) -> dict:
        out = {"mode": self.mode, "trials": len(self.trials), "failed": len(self.failed)}
        if self.trials:
            for kind in ("urllc", "shannon"):
                out[f"{kind}_mean_bits"] = self.mean(kind)
                out[f"{kind}_95_likely_bits"] = self.likely95(kind)
            out["mean_iterations"] = float(np.mean(self.iterations))
        return out

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "seed": self.seed,
            "config": self.config,
            "config_digest": self.config_digest,
            "trials": list(self.trials),
            "shannon_bits": np.asarray(self.shannon_bits).tolist(),
            "urllc_bits": np.asarray(self.urllc_bits).tolist(),
            "failed": list(self.failed),
            "wall_times": list(self.wall_times),
            "iterations": list(self.iterations),
            "flops": self.flops,
            "summary": self.summary(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RateReport":
        K = len(d["shannon_bits"][0]) if d["shannon_bits"] else 0
        shape = (len(d["shannon_bits"]), K)
        return cls(
            mode=d["mode"], seed=d["seed"], config=d["config"], config_digest=d["config_digest"],
            trials=list(d["trials"]),
            shannon_bits=np.array(d["shannon_bits"], dtype=float).reshape(shape),
            urllc_bits=np.array(d["urllc_bits"], dtype=float).reshape(shape),
            failed=list(d["failed"]), wall_times=list(d["wall_times"]),
            iterations=list(d["iterations"]), flops=d.get("flops", {}),
        )


# -- single trials ------------------------------------------------------------


def trial_channel(config: ScenarioConfig, trial: int):
    return draw_scenario(config, trial_rng(config.seed, trial, 0))


def run_trial(config: ScenarioConfig, mode: str, trial: int) -> TrialResult:
    """One user drop + channel draw, precoded with ``mode``; rates in nats."""
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; choose from {MODES}")
    t0 = time.perf_counter()
    geometry, _, H = trial_channel(config, trial)
    rng = trial_rng(config.seed, trial, 1)
    its = solver_its = 0
    solver_time = 0.0
    if mode == "mmse":
        W = mmse_precoding(H, config.p_mmse, config.sigma2, config.p_max, N=config.N)
    elif mode == "decentralized":
        part = partition_aps(geometry, config.M, config.cluster_map)
        W, _, traces = run_decentralized(H, part, config, rng, return_traces=True)
        for tr in traces:
            its += tr.iterations
            solver_its += sum(r.solver_iterations for r in tr.records)
            solver_time += sum(r.wall_time for r in tr.records)
    else:
        a = 0.0 if mode == "shannon-centralized" else None
        W, tr = pfa.run(H, config, rng, a=a)
        its = tr.iterations
        solver_its = sum(r.solver_iterations for r in tr.records)
        solver_time = sum(r.wall_time for r in tr.records)
    rv = evaluate_rates(H, W, config.sigma2, config.t, config.B, config.epsilon)
    return TrialResult(trial, rv.shannon, rv.urllc, its, solver_its, solver_time,
                       time.perf_counter() - t0)


def _guarded(fn, *args):
    try:
        return fn(*args)
    except Exception as exc:  # recorded and counted by the caller
        return exc


def _map_trials(fn, arg_list, workers: int):
    if workers > 1 and len(arg_list) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(_guarded, [fn] * len(arg_list), *zip(*arg_list)))
    return [_guarded(fn, *args) for args in arg_list]


def _check_failures(results, n: int, label: str):
    failed = [i for i, r in enumerate(results) if isinstance(r, Exception)]
    if failed:
        warnings.warn(f"{label}: {len(failed)} of {n} trials failed and were excluded "
                      f"(first error: {results[failed[0]]!r})", RuntimeWarning, stacklevel=3)
    if len(failed) > MAX_FAILURE_FRACTION * n:
        raise ExperimentAborted(f"{label}: {len(failed)} of {n} trials failed")
    return failed


def _report(config, mode, trial_ids, results) -> RateReport:
    failed = _check_failures(results, len(trial_ids), mode)
    ok = [r for r in results if not isinstance(r, Exception)]
    K = config.K
    sh = np.array([r.shannon for r in ok]).reshape(len(ok), K)
    ur = np.array([r.urllc for r in ok]).reshape(len(ok), K)
    iters = [r.iterations for r in ok]
    flops = flop_report(config, mode="decentralized" if mode == "decentralized" else "centralized",
                        iterations=float(np.mean(iters)) if iters else None)
    solver_its = sum(r.solver_iterations for r in ok)
    if solver_its:
        flops["measured_seconds_per_solver_iteration"] = sum(r.solver_time for r in ok) / solver_its
    return RateReport(
        mode=mode, seed=config.seed, config=config.to_dict(), config_digest=config.digest(),
        trials=[r.trial for r in ok],
        shannon_bits=np.maximum(sh, 0.0) / LN2,
        urllc_bits=np.maximum(ur, 0.0) / LN2,
        failed=[trial_ids[i] for i in failed],
        wall_times=[r.wall_time for r in ok],
        iterations=iters,
        flops=flops,
    )


def run_experiment(config: ScenarioConfig, mode: str, trials: Optional[int] = None,
                   workers: Optional[int] = None) -> RateReport:
    """Run ``trials`` (default ``config.trials``) Monte-Carlo trials of ``mode``.

    Failed trials are excluded with a warning; more than 1% failures raise
    :class:`ExperimentAborted`.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; choose from {MODES}")
    ap_grid(config)  # configuration errors surface here, not as trial failures
    n = config.trials if trials is None else int(trials)
    workers = default_workers() if workers is None else workers
    ids = list(range(n))
    results = _map_trials(run_trial, [(config, mode, i) for i in ids], workers)
    return _report(config, mode, ids, results)


# -- sweeps --------------------------------------------------------------------


def _t_sweep_trial(config: ScenarioConfig, trial: int, t_values: tuple):
    """Per-trial work of :func:`sweep_t`: one shared initialization, then a
    Shannon max-min run and a URLLC run per ``t``. Returns per-user nats
    arrays ``(shannon, urllc[t])``."""
    _, _, H = trial_channel(config, trial)
    rng = trial_rng(config.seed, trial, 1)
    W0 = pfa.initialize(H, config, rng)
    W_sh, _ = pfa.run(H, config, start=W0, a=0.0, init=False)
    shannon = shannon_rate(sinr_all(H, W_sh, config.sigma2))
    urllc = []
    for t in t_values:
        cfg_t = config.replace(t=t)
        W_t, _ = pfa.run(H, cfg_t, start=W0, init=False)
        phi = sinr_all(H, W_t, config.sigma2)
        a = penalty_factor(t, config.B, config.epsilon)
        urllc.append(shannon_rate(phi) - a * np.sqrt(dispersion(phi)))
    return shannon, np.array(urllc)


def sweep_t(config: ScenarioConfig, t_values: Sequence[float], trials: Optional[int] = None,
            workers: Optional[int] = None) -> list[dict]:
    """95%-likely URLLC and Shannon rates versus transmission time ``t``.

    The initialization phase does not depend on ``t``, so it is computed
    once per trial and shared; each ``t`` then gives the same precoder as a
    separate centralized experiment. The Shannon column comes from the
    ``t``-independent Shannon max-min precoder.
    """
    ap_grid(config)
    n = config.trials if trials is None else int(trials)
    workers = default_workers() if workers is None else workers
    t_values = tuple(float(t) for t in t_values)
    results = _map_trials(_t_sweep_trial, [(config, i, t_values) for i in range(n)], workers)
    _check_failures(results, n, "sweep-t")
    ok = [r for r in results if not isinstance(r, Exception)]
    sh = np.maximum(np.concatenate([r[0] for r in ok]), 0.0) / LN2
    rows = []
    for j, t in enumerate(t_values):
        ur = np.maximum(np.concatenate([r[1][j] for r in ok]), 0.0) / LN2
        rows.append({
            "t": t,
            "K": config.K,
            "urllc_95_likely_bits": percentile(ur, 0.05),
            "shannon_95_likely_bits": percentile(sh, 0.05),
            "urllc_mean_bits": float(ur.mean()),
            "shannon_mean_bits": float(sh.mean()),
        })
    return rows


def sweep_clusters(config: ScenarioConfig, cluster_counts: Iterable[int] = (1, 2, 4, 16),
                   trials: Optional[int] = None, workers: Optional[int] = None) -> list[dict]:
    """Centralized (one cluster) versus decentralized runs with ``L / M`` clusters."""
    rows = []
    base = None
    for c in cluster_counts:
        if c < 1 or config.L % c:
            raise ValueError(f"{c} clusters do not divide L={config.L}")
        M = config.L // c
        cfg = config.replace(M=M, cluster_map=None)
        mode = "centralized" if c == 1 else "decentralized"
        rep = run_experiment(cfg, mode, trials, workers)
        part = partition_aps(config.L, M)
        ratio = flop_ratio(config, part)
        sec = rep.flops.get("measured_seconds_per_solver_iteration", np.nan)
        if c == 1:
            base = sec
        rows.append({
            "clusters": c,
            "M": M,
            "urllc_95_likely_bits": rep.likely95("urllc"),
            "urllc_mean_bits": rep.mean("urllc"),
            "order_ratio_per_cluster": ratio["ratio_per_cluster"],
            "seconds_per_solver_iteration": sec,
            "measured_time_ratio": sec / base if base else np.nan,
            "trials": len(rep.trials),
        })
    return rows


def sweep_n(config: ScenarioConfig, n_values: Iterable[int], modes: Sequence[str] = ("centralized", "mmse"),
            trials: Optional[int] = None, workers: Optional[int] = None) -> list[dict]:
    """Mean and 95%-likely rates for each antenna count and mode."""
    rows = []
    for N in n_values:
        cfg = config.replace(N=int(N))
        for mode in modes:
            rep = run_experiment(cfg, mode, trials, workers)
            rows.append({
                "N": int(N),
                "mode": mode,
                "urllc_95_likely_bits": rep.likely95("urllc"),
                "urllc_mean_bits": rep.mean("urllc"),
                "shannon_95_likely_bits": rep.likely95("shannon"),
                "shannon_mean_bits": rep.mean("shannon"),
                "trials": len(rep.trials),
            })
    return rows


# -- serialization ---------------------------------------------------------------

CSV_COLUMNS = ("trial", "user", "shannon_bits", "urllc_bits")


def emit(report: RateReport, path: str | Path, format: str = "csv") -> None:
    """Write a report.

    ``csv``: one row per (trial, user) with columns ``trial, user,
    shannon_bits, urllc_bits``. ``json``: :meth:`RateReport.to_dict`.
    Floats are written with round-trip precision.
    """
    path = Path(path)
    if format == "csv":
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for i, trial in enumerate(report.trials):
                for k in range(report.shannon_bits.shape[1]):
                    w.writerow([trial, k, repr(float(report.shannon_bits[i, k])),
                                repr(float(report.urllc_bits[i, k]))])
    elif format == "json":
        path.write_text(json.dumps(report.to_dict(), indent=1))
    else:
        raise ValueError(f"unknown format {format!r}")


def load_report(path: str | Path, format: Optional[str] = None) -> RateReport:
    """Parse a file written by :func:`emit`. CSV files carry rates only."""
    path = Path(path)
    format = format or ("json" if path.suffix == ".json" else "csv")
    if format == "json":
        return RateReport.from_dict(json.loads(path.read_text()))
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    trials = sorted({int(r["trial"]) for r in rows})
    K = len({int(r["user"]) for r in rows})
    pos = {t: i for i, t in enumerate(trials)}
    sh = np.zeros((len(trials), K))
    ur = np.zeros((len(trials), K))
    for r in rows:
        i, k = pos[int(r["trial"])], int(r["user"])
        sh[i, k] = float(r["shannon_bits"])
        ur[i, k] = float(r["urllc_bits"])
    return RateReport(mode="", seed=0, config={}, config_digest="", trials=trials,
                      shannon_bits=sh, urllc_bits=ur)


def emit_table(rows: list[dict], path: str | Path, format: str = "csv") -> None:
    """Write sweep rows (a list of flat dicts) as CSV or JSON."""
    path = Path(path)
    if format == "json":
        path.write_text(json.dumps(rows, indent=1))
        return
    if format != "csv":
        raise ValueError(f"unknown format {format!r}")
    with open(path, "w", newline="") as fh:
        if not rows:
            return
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
