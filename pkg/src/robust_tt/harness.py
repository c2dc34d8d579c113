"""Monte-Carlo experiment sweeps with resumable, deterministic output.

A sweep is the Cartesian product of its axes.  Every (cell, trial) pair owns
a problem instance whose seeds are hashed from ``(master_seed, family,
trial)``, where the family indexes the (N, d, r) combination only.  Cells
that differ in m, p_s or solver therefore share ground truth and seeds:
sensing row k depends on (seed, k) alone, so a larger m extends the
measurements of a smaller one.  These common random numbers keep Monte-Carlo
noise from masking monotone trends along the m and p_s axes.  Results are
reduced in trial order, which makes summaries independent of the worker
count.

Output directory layout::

    <cell_id>.csv     mean trace over trials
    summary.json      one entry per completed cell (no timings)
    manifest.json     spec hash, completed cells and wall-time stats
"""

import csv
import hashlib
import itertools
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .analysis import recovery_error
from .errors import ConfigurationError, SolverAbort
from .rng import derive_seed
from .sensing import make_problem
from .solvers import (
    TRACE_COLUMNS,
    SolverConfig,
    StepSchedule,
    frsubgm_run,
    psubgm_run,
    truncated_spectral_init,
)

log = logging.getLogger(__name__)

SOLVERS = ("psubgm", "frsubgm")
INSTANCE_AXES = ("N", "d", "r", "m", "p_s")
FAMILY_AXES = ("N", "d", "r")


class HarnessError(RuntimeError):
    """Unusable results directory (corrupt or foreign manifest)."""


def _as_list(v):
    return list(v) if isinstance(v, (list, tuple)) else [v]


def _per_solver(v, solver):
    if isinstance(v, dict):
        if solver not in v:
            raise ConfigurationError(f"no value given for solver {solver!r}")
        return _as_list(v[solver])
    return _as_list(v)


@dataclass
class ExperimentSpec:
    """Sweep description; ``lam`` and ``q`` may be per-solver dicts."""

    N: list
    d: list
    r: list
    m: list
    p_s: list
    lam: object = 0.5
    q: object = 0.9
    solvers: list = field(default_factory=lambda: ["psubgm"])
    trials: int = 20
    success_threshold: float = 1e-5
    max_iters: int = 1000
    master_seed: int = 0
    alpha: float = None
    trace_every: int = 1
    outlier_sigma2: float = 10.0
    sigma_bar_mode: str = "from_init"

    def __post_init__(self):
        for ax in INSTANCE_AXES:
            setattr(self, ax, _as_list(getattr(self, ax)))
            if not getattr(self, ax):
                raise ConfigurationError(f"sweep axis {ax} is empty")
        self.solvers = _as_list(self.solvers)
        bad = [s for s in self.solvers if s not in SOLVERS]
        if bad:
            raise ConfigurationError(f"unknown solver(s) {bad}")
        if self.trials < 1:
            raise ConfigurationError("trials must be >= 1")
        if self.max_iters < 1:
            raise ConfigurationError("max_iters must be >= 1")

    @classmethod
    def from_dict(cls, doc):
        doc = dict(doc)
        if "lambda" in doc:
            doc["lam"] = doc.pop("lambda")
        known = set(cls.__dataclass_fields__)
        extra = sorted(set(doc) - known)
        if extra:
            raise ConfigurationError(f"unknown spec keys {extra}")
        return cls(**doc)

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self):
        return asdict(self)

    def digest(self):
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def instances(self):
        return list(itertools.product(*(getattr(self, ax) for ax in INSTANCE_AXES)))

    def families(self):
        return list(itertools.product(*(getattr(self, ax) for ax in FAMILY_AXES)))

    def cells(self):
        """All cells in sweep order as dicts with a stable ``cell_id``."""
        out = []
        family = {f: k for k, f in enumerate(self.families())}
        for inst in self.instances():
            for solver in self.solvers:
                for lam in _per_solver(self.lam, solver):
                    for q in _per_solver(self.q, solver):
                        cell = dict(zip(INSTANCE_AXES, inst))
                        cell.update(solver=solver, lam=lam, q=q, family=family[inst[:3]])
                        cell["cell_id"] = f"c{len(out):04d}_{solver}"
                        out.append(cell)
        return out


def trial_seeds(master_seed, family, trial):
    base = derive_seed(master_seed, family, trial)
    return {
        "xstar_seed": derive_seed(base, 0),
        "master_seed": derive_seed(base, 1),
        "support_seed": derive_seed(base, 2),
        "value_seed": derive_seed(base, 3),
    }


def run_trial(spec, cell, trial):
    """One instance, one solver run; returns a plain-data result dict."""
    t0 = time.perf_counter()
    N, d, r, m, p_s = (cell[k] for k in INSTANCE_AXES)
    dims, ranks = (d,) * N, (r,) * (N - 1)
    prob = make_problem(dims, ranks, m, p_s, outlier_sigma2=spec.outlier_sigma2,
                        **trial_seeds(spec.master_seed, cell["family"], trial))
    alpha = p_s if spec.alpha is None else spec.alpha
    x0 = truncated_spectral_init(prob.ensemble, prob.y, ranks, alpha)
    cfg = SolverConfig(StepSchedule(cell["lam"], cell["q"]), max_iters=spec.max_iters,
                       trace_every=spec.trace_every, sigma_bar_mode=spec.sigma_bar_mode)
    run = psubgm_run if cell["solver"] == "psubgm" else frsubgm_run
    aborted = False
    try:
        tt, trace = run(prob.ensemble, prob.y, ranks, x0, cfg, x_star=prob.x_star)
        final = recovery_error(tt, prob.x_star)
    except SolverAbort as exc:
        log.warning("%s trial %d aborted: %s", cell["cell_id"], trial, exc)
        trace, final, aborted = exc.trace, float("inf"), True
    return {
        "trial": trial,
        "init_error": recovery_error(x0, prob.x_star),
        "final_error": final,
        "aborted": aborted,
        "trace": [rec.as_row() for rec in trace],
        "seconds": time.perf_counter() - t0,
    }


def _mean_trace(results, length):
    # aborted runs are padded with their last record so every t has all trials
    rows = []
    for j in range(length):
        full = [res["trace"][j] for res in results if len(res["trace"]) > j]
        if not full:
            break
        recs = [res["trace"][min(j, len(res["trace"]) - 1)] for res in results]
        row = [full[0][0]]
        for col in range(1, len(TRACE_COLUMNS)):
            vals = [rec[col] for rec in recs if rec[col] is not None]
            row.append(float(np.mean(vals)) if len(vals) == len(recs) else None)
        rows.append(row)
    return rows


def _expected_length(spec):
    return spec.max_iters // spec.trace_every + (1 if spec.max_iters % spec.trace_every else 0) + 1


def write_trace_csv(path, rows):
    tmp = Path(str(path) + ".tmp")
    with open(tmp, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(TRACE_COLUMNS)
        for row in rows:
            w.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in row])
    os.replace(tmp, path)


def read_trace_csv(path):
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd, None)
        if header is None or tuple(header) != TRACE_COLUMNS:
            raise ConfigurationError(f"{path} is not a trace CSV")
        rows = []
        for rec in rd:
            rows.append([None if v == "" else (int(v) if i == 0 else float(v)) for i, v in enumerate(rec)])
    return rows


def summarize_cell(spec, cell, results):
    results = sorted(results, key=lambda res: res["trial"])
    finals = [res["final_error"] for res in results]
    ok = [np.isfinite(e) and e <= spec.success_threshold for e in finals]
    entry = {k: cell[k] for k in ("cell_id", *INSTANCE_AXES, "solver", "lam", "q")}
    entry.update(
        trials=len(results),
        successes=int(sum(ok)),
        success_rate=float(np.mean(ok)),
        final_errors=[float(e) for e in finals],
        init_errors=[float(res["init_error"]) for res in results],
        aborted=int(sum(res["aborted"] for res in results)),
    )
    secs = [res["seconds"] for res in results]
    timing = {"mean": float(np.mean(secs)), "min": float(np.min(secs)),
              "max": float(np.max(secs)), "total": float(np.sum(secs))}
    return entry, _mean_trace(results, _expected_length(spec)), timing


def worker_count(requested=None):
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get("TTR_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigurationError(f"TTR_THREADS={env!r} is not an integer") from None
    return max(1, os.cpu_count() or 1)


def _load_manifest(path, digest):
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise HarnessError(f"manifest {path} is unreadable; refusing to resume") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("completed"), dict):
        raise HarnessError(f"manifest {path} is malformed; refusing to resume")
    if doc.get("spec_digest") != digest:
        raise HarnessError(f"manifest {path} belongs to a different spec; refusing to resume")
    for cell_id, info in doc["completed"].items():
        if not isinstance(info, dict) or "summary" not in info:
            raise HarnessError(f"manifest entry {cell_id} is malformed; refusing to resume")
        if not (path.parent / f"{cell_id}.csv").is_file():
            raise HarnessError(f"trace for {cell_id} is missing; refusing to resume")
    return doc


def _write_json(path, doc):
    tmp = Path(str(path) + ".tmp")
    tmp.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    os.replace(tmp, path)


def run_experiment(spec, out_dir, *, workers=None, max_cells=None):
    """Run (or resume) a sweep; returns the summary document.

    ``max_cells`` stops after that many newly completed cells, which is how
    interruption is simulated in tests.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest_path = out / "manifest.json"
    digest = spec.digest()
    if manifest_path.exists():
        manifest = _load_manifest(manifest_path, digest)
    else:
        manifest = {"spec_digest": digest, "spec": spec.to_dict(), "completed": {}}

    nworkers = worker_count(workers)
    pool = ProcessPoolExecutor(nworkers) if nworkers > 1 else None
    done_now = 0
    try:
        for cell in spec.cells():
            if cell["cell_id"] in manifest["completed"]:
                continue
            if max_cells is not None and done_now >= max_cells:
                break
            log.info("running %s (%d trials)", cell["cell_id"], spec.trials)
            if pool is None:
                results = [run_trial(spec, cell, k) for k in range(spec.trials)]
            else:
                futs = [pool.submit(run_trial, spec, cell, k) for k in range(spec.trials)]
                results = [f.result() for f in futs]
            entry, rows, timing = summarize_cell(spec, cell, results)
            write_trace_csv(out / f"{cell['cell_id']}.csv", rows)
            manifest["completed"][cell["cell_id"]] = {"summary": entry, "wall_time": timing}
            _write_json(manifest_path, manifest)
            done_now += 1
    finally:
        if pool is not None:
            pool.shutdown()

    order = [c["cell_id"] for c in spec.cells()]
    cells = [manifest["completed"][cid]["summary"] for cid in order if cid in manifest["completed"]]
    summary = {"spec": spec.to_dict(), "complete": len(cells) == len(order), "cells": cells}
    _write_json(out / "summary.json", summary)
    return summary


# --------------------------------------------------------------------------
# reading results


def success_grid(summary, solver, row_axis="N", col_axis="m", **fixed):
    """``{row: {col: success_rate}}`` for one solver, filtering on ``fixed``."""
    grid = {}
    for c in summary["cells"]:
        if c["solver"] != solver or any(c[k] != v for k, v in fixed.items()):
            continue
        grid.setdefault(c[row_axis], {})[c[col_axis]] = c["success_rate"]
    return grid


def minimal_m(row, level=0.9):
    """Smallest ``m`` whose success rate reaches ``level`` (None if never)."""
    hits = [m for m, rate in sorted(row.items()) if rate >= level]
    return hits[0] if hits else None
