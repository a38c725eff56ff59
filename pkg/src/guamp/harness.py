"""Monte Carlo sweep orchestration: JSON config, seeded trial fan-out,
CSV persistence and per-cell summaries.

Trials are independently seeded from (master_seed, cell_index, trial), so
they may run in any order across a worker pool; rows are buffered and
written in (cell, trial, algorithm, iteration) order, which makes
results.csv byte-deterministic for a fixed config and seed.  Wall-clock
timings are collected in memory for progress estimates but never written
to results.csv (they would break determinism).
"""

from __future__ import annotations

import io
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field

import numpy as np

from .algorithms import RunParams, gamp_run, guamp_run, uamp_run
from .errors import ConfigError
from .metrics import to_db
from .model import atomic_write_text, economy_svd, generate_problem

CHANNEL_NAMES = ("onebit", "twobit", "gaussian")
ALGORITHM_NAMES = ("guamp", "gamp", "uamp")

RESULT_COLUMNS = (
    "algorithm",
    "trial",
    "rho",
    "snr_db",
    "channel",
    "outer_iter",
    "dnmse_z_db",
    "nmse_z_db",
    "nmse_x_db",
    "diverged",
)

SUMMARY_COLUMNS = (
    "channel",
    "rho",
    "snr_db",
    "algorithm",
    "trials",
    "median_dnmse_z_db",
    "mean_dnmse_z_db",
    "median_nmse_z_db",
    "mean_nmse_z_db",
)


@dataclass(frozen=True)
class SweepConfig:
    m: int
    n: int
    rho_list: tuple
    snr_db_list: tuple
    channels: tuple
    lam: float
    algorithms: tuple
    trials: int
    master_seed: int
    t_max: int
    t_a: int
    t_b: int
    out_path: str


@dataclass(frozen=True)
class RunRecord:
    algorithm: str
    trial: int
    rho: float
    snr_db: float
    channel: str
    outer_iter: int
    dnmse_z_db: float
    nmse_z_db: float
    nmse_x_db: float
    diverged: bool
    wall_ms: float


_JSON_KEYS = {
    "m": "m",
    "n": "n",
    "rho_list": "rho_list",
    "snr_db_list": "snr_db_list",
    "channels": "channels",
    "lambda": "lam",
    "algorithms": "algorithms",
    "trials": "trials",
    "master_seed": "master_seed",
    "T_max": "t_max",
    "T_A": "t_a",
    "T_B": "t_b",
    "out_path": "out_path",
}


def config_from_dict(doc):
    """Build and validate a SweepConfig; unknown keys are an error so
    sweep-definition typos fail loudly."""
    unknown = set(doc) - set(_JSON_KEYS)
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown key")
    missing = set(_JSON_KEYS) - set(doc)
    if missing:
        raise ConfigError(sorted(missing)[0], "missing")
    kw = {attr: doc[key] for key, attr in _JSON_KEYS.items()}
    kw["rho_list"] = tuple(float(r) for r in kw["rho_list"])
    kw["snr_db_list"] = tuple(float(s) for s in kw["snr_db_list"])
    kw["channels"] = tuple(kw["channels"])
    kw["algorithms"] = tuple(kw["algorithms"])
    cfg = SweepConfig(**kw)
    validate_config(cfg)
    return cfg


def load_config(path):
    with open(path) as fh:
        return config_from_dict(json.load(fh))


def validate_config(cfg):
    if not (isinstance(cfg.m, int) and cfg.m >= 1):
        raise ConfigError("m", "must be an integer >= 1")
    if not (isinstance(cfg.n, int) and cfg.n >= 1):
        raise ConfigError("n", "must be an integer >= 1")
    if not cfg.rho_list:
        raise ConfigError("rho_list", "must be nonempty")
    for r in cfg.rho_list:
        if not (0.0 <= r < 1.0):
            raise ConfigError("rho_list", f"rho {r} outside [0, 1)")
    if not cfg.snr_db_list:
        raise ConfigError("snr_db_list", "must be nonempty")
    if not cfg.channels:
        raise ConfigError("channels", "must be nonempty")
    for ch in cfg.channels:
        if ch not in CHANNEL_NAMES:
            raise ConfigError("channels", f"unknown channel {ch!r}")
    if not (0.0 < cfg.lam <= 1.0):
        raise ConfigError("lambda", "must lie in (0, 1]")
    if not cfg.algorithms:
        raise ConfigError("algorithms", "must be nonempty")
    for alg in cfg.algorithms:
        if alg not in ALGORITHM_NAMES:
            raise ConfigError("algorithms", f"unknown algorithm {alg!r}")
    if "uamp" in cfg.algorithms and any(ch != "gaussian" for ch in cfg.channels):
        raise ConfigError("algorithms", "uamp runs only on the gaussian channel")
    if not (isinstance(cfg.trials, int) and cfg.trials >= 1):
        raise ConfigError("trials", "must be an integer >= 1")
    if not (isinstance(cfg.master_seed, int) and cfg.master_seed >= 0):
        raise ConfigError("master_seed", "must be a non-negative integer")
    if cfg.t_max < 0:
        raise ConfigError("T_max", "must be >= 0")
    if cfg.t_a < 1 or cfg.t_b < 1:
        raise ConfigError("T_A", "inner iteration counts must be >= 1")
    if not isinstance(cfg.out_path, str) or not cfg.out_path:
        raise ConfigError("out_path", "must be a nonempty path")


def cells_of(cfg):
    """(cell_index, channel, rho, snr_db) in fixed config order."""
    cells = []
    idx = 0
    for ch in cfg.channels:
        for rho in cfg.rho_list:
            for snr in cfg.snr_db_list:
                cells.append((idx, ch, rho, snr))
                idx += 1
    return cells


def _run_trial(args):
    """Worker entry: one (cell, trial) -> per-algorithm records.

    Returns plain tuples so the coordinator can assemble rows without
    touching worker-local objects.
    """
    (m, n, rho, snr_db, channel, lam, algorithms,
     master_seed, cell_idx, trial, t_max, t_a, t_b) = args
    t0 = time.perf_counter()
    problem = generate_problem(m, n, rho, lam, snr_db, channel, (master_seed, cell_idx, trial))
    params = RunParams(t_max=t_max, t_a=t_a, t_b=t_b)
    needs_svd = any(a in ("guamp", "uamp") for a in algorithms)
    svd = economy_svd(problem.A) if needs_svd else None

    records = []
    var_lo, var_hi = np.inf, -np.inf
    for alg in algorithms:
        walls = []
        last = time.perf_counter()

        def observer(it, row, _walls=walls):
            nonlocal last
            now = time.perf_counter()
            _walls.append((now - last) * 1e3)
            last = now

        if alg == "guamp":
            res = guamp_run(problem, params, observer=observer, svd=svd)
        elif alg == "gamp":
            res = gamp_run(problem, params, observer=observer)
        else:
            res = uamp_run(problem, params, observer=observer, svd=svd)

        for row, wall in zip(res.trace.rows, walls):
            records.append(
                RunRecord(
                    algorithm=alg,
                    trial=trial,
                    rho=rho,
                    snr_db=snr_db,
                    channel=channel,
                    outer_iter=row.outer_iter,
                    dnmse_z_db=to_db(row.dnmse_z),
                    nmse_z_db=to_db(row.nmse_z),
                    nmse_x_db=to_db(row.nmse_x),
                    diverged=row.diverged,
                    wall_ms=wall,
                )
            )
            var_lo = min(var_lo, row.var_min)
            var_hi = max(var_hi, row.var_max)
    return cell_idx, trial, records, var_lo, var_hi, time.perf_counter() - t0


@dataclass
class SweepResult:
    results_path: str
    summary_path: str
    row_count: int
    var_min: float
    var_max: float
    records: list = field(repr=False, default_factory=list)


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if np.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def _csv_text(columns, rows):
    buf = io.StringIO()
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue()


def worker_count():
    """Pool size from GUAMP_WORKERS; defaults to the available cores."""
    raw = os.environ.get("GUAMP_WORKERS", "").strip()
    if raw:
        return max(1, int(raw))
    return os.cpu_count() or 1


def run_sweep(cfg, verbose=True):
    """Execute the full sweep and write results.csv + summary.csv.

    Per-trial divergence never aborts the sweep; rows for diverged runs
    carry the sticky flag and possibly 'inf' dB sentinels.
    """
    cells = cells_of(cfg)
    tasks = [
        (cfg.m, cfg.n, rho, snr, ch, cfg.lam, cfg.algorithms,
         cfg.master_seed, idx, trial, cfg.t_max, cfg.t_a, cfg.t_b)
        for idx, ch, rho, snr in cells
        for trial in range(cfg.trials)
    ]

    by_key = {}
    var_lo, var_hi = np.inf, -np.inf
    announced = set()
    workers = min(worker_count(), len(tasks)) or 1

    def consume(result):
        nonlocal var_lo, var_hi
        cell_idx, trial, records, lo, hi, wall_s = result
        by_key[(cell_idx, trial)] = records
        var_lo = min(var_lo, lo)
        var_hi = max(var_hi, hi)
        if verbose and cell_idx not in announced:
            announced.add(cell_idx)
            _, ch, rho, snr = cells[cell_idx]
            print(
                f"[cell channel={ch} rho={rho} snr={snr}] first trial {wall_s:.2f}s; "
                f"estimated {wall_s * cfg.trials:.1f}s for {cfg.trials} trials",
                flush=True,
            )

    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_trial, t) for t in tasks]
            for fut in as_completed(futures):
                consume(fut.result())
    else:
        for t in tasks:
            consume(_run_trial(t))

    records = []
    for idx, ch, rho, snr in cells:
        for trial in range(cfg.trials):
            records.extend(by_key[(idx, trial)])

    rows = [
        (
            r.algorithm, r.trial, r.rho, r.snr_db, r.channel, r.outer_iter,
            r.dnmse_z_db, r.nmse_z_db, r.nmse_x_db, r.diverged,
        )
        for r in records
    ]
    atomic_write_text(cfg.out_path, _csv_text(RESULT_COLUMNS, rows))

    summary_rows = summarize(cfg, records)
    summary_path = os.path.join(os.path.dirname(os.path.abspath(cfg.out_path)), "summary.csv")
    atomic_write_text(summary_path, _csv_text(SUMMARY_COLUMNS, summary_rows))

    return SweepResult(
        results_path=cfg.out_path,
        summary_path=summary_path,
        row_count=len(rows),
        var_min=float(var_lo),
        var_max=float(var_hi),
        records=records,
    )


def summarize(cfg, records):
    """Per-cell, per-algorithm median and mean of the final-iteration
    metrics.  Medians stay meaningful when some trials diverge; the mean
    of a cell containing diverged trials is legitimately inf."""
    rows = []
    for _, ch, rho, snr in cells_of(cfg):
        for alg in cfg.algorithms:
            finals = [
                r
                for r in records
                if r.channel == ch and r.rho == rho and r.snr_db == snr
                and r.algorithm == alg and r.outer_iter == cfg.t_max
            ]
            if not finals:
                continue
            dn = np.array([r.dnmse_z_db for r in finals])
            nm = np.array([r.nmse_z_db for r in finals])
            rows.append(
                (
                    ch, rho, snr, alg, len(finals),
                    float(np.median(dn)), float(np.mean(dn)),
                    float(np.median(nm)), float(np.mean(nm)),
                )
            )
    return rows
