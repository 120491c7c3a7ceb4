"""Parameter sweeps: one steady state (plus spectrum) per point, written as CSV + JSON sidecar.

Workers receive an immutable (config, point) pair and return a plain row dict;
the orchestrator writes rows in sweep order.  CSV bodies contain no timestamps
or host data, so reruns with the same config and seed are byte-identical.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import platform
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__
from .config import RunConfig, build_model
from .cumulant import (MomentState, build_moment_system, evolve_to_steady, mixed_state, observables,
                       pumped_state)
from .spectrum import compute_spectrum, linearized_qrt_system
from .spin import spin_matrices

log = logging.getLogger(__name__)

SCHEMA = "corrsteady-sweep/1"
INVARIANT_TOL = 1e-8


@dataclass(frozen=True)
class Point:
    index: int
    values: dict      # model overrides for this point, e.g. {"theta": 0.3}


def sweep_points(cfg: RunConfig) -> list[Point]:
    sw, N = cfg.sweep, cfg.model.N
    if sw.variable == "none":
        return [Point(0, {})]
    ax = sw.axis(N)
    if sw.variable == "theta":
        return [Point(i, {"theta": float(v)}) for i, v in enumerate(ax)]
    if sw.variable == "w_plus":
        return [Point(i, {"w_plus": float(v)}) for i, v in enumerate(ax)]
    if sw.variable == "gamma_ratio":
        g = cfg.model.gamma_minus
        return [Point(i, {"gamma_plus": float(v) * g}) for i, v in enumerate(ax)]
    # w_plus x gamma_ratio grid, w_plus varying slowest
    g = cfg.model.gamma_minus
    pts = []
    for wp in ax:
        for r in sw.axis2():
            pts.append(Point(len(pts), {"w_plus": float(wp), "gamma_plus": float(r) * g}))
    return pts


def _swept_columns(cfg):
    v = cfg.sweep.variable
    if v == "none":
        return []
    if v == "grid":
        return ["w_plus", "gamma_ratio"]
    return [v]


def _swept_values(cfg, point):
    out = {}
    for k, val in point.values.items():
        if k == "gamma_plus":
            out["gamma_ratio"] = val / cfg.model.gamma_minus
        else:
            out[k] = val
    return out


def initial_state(cfg: RunConfig, space, index: int) -> MomentState:
    kind = cfg.solver.init
    if kind == "pumped":
        return pumped_state(space)
    if kind == "mixed":
        return mixed_state(space)
    # random product state near full pumping, reproducible per point
    rng = np.random.default_rng([cfg.seed, index])
    p = rng.dirichlet(np.ones(space.d))
    eps = cfg.solver.perturbation
    rho = (1 - eps) * pumped_state(space).rho1 + eps * np.diag(p)
    return MomentState.product(rho)


def columns(cfg: RunConfig, d: int) -> list[str]:
    F = (d - 1) / 2
    pops = [f"p[{_fmt_m(-F + k)}]" for k in range(d)]
    peaks = []
    for i in range(cfg.spectrum.max_peaks if cfg.spectrum.enabled else 0):
        peaks += [f"peak{i}_center", f"peak{i}_height", f"peak{i}_fwhm"]
    return (["index"] + _swept_columns(cfg) +
            ["status", "converged", "residual", "polarization", "tau2_norm", "pair_coherence"] +
            pops + ["invariant_violation", "min_eig_rho2"] +
            (["dominant_center", "dominant_fwhm", "coherent"] if cfg.spectrum.enabled else []) + peaks)


def _fmt_m(m):
    return str(int(m)) if float(m).is_integer() else f"{int(round(2 * m))}/2"


def solve_point(cfg: RunConfig, point: Point) -> dict:
    """Steady state, observables and (optionally) spectral peaks of one sweep point."""
    row = {"index": point.index, **_swept_values(cfg, point)}
    try:
        model = build_model(cfg, **point.values)
        eqs = build_moment_system(model)
        init = initial_state(cfg, model.space, point.index)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            st = evolve_to_steady(eqs, init, tol=cfg.solver.tol, max_steps=cfg.solver.max_steps,
                                  jacobian=cfg.solver.jacobian, newton=cfg.solver.newton)
    except Exception as exc:  # recorded in-row, never aborts the sweep
        log.exception("point %d failed", point.index)
        row.update(status="ERROR", converged=False, error=f"{type(exc).__name__}: {exc}")
        return row
    obs = observables(st, model.space, cfg.norm)
    sm = spin_matrices(model.space)
    row.update(status=st.status, converged=bool(st.converged), residual=st.residual,
               polarization=obs["polarization"], tau2_norm=obs["tau2_norm"],
               pair_coherence=float(np.real(np.trace(np.kron(sm.plus, sm.minus) @ st.rho2))))
    for m, p in zip(model.space.m_values, obs["populations"]):
        row[f"p[{_fmt_m(m)}]"] = float(p)
    # invariants are re-checked on the exact matrices that produced the row
    row["invariant_violation"] = max(st.check_invariants().values())
    row["min_eig_rho2"] = float(np.linalg.eigvalsh(0.5 * (st.rho2 + st.rho2.conj().T))[0])
    if row["invariant_violation"] > INVARIANT_TOL:
        row["converged"] = False
        row["status"] = "INVARIANT_VIOLATION"
    if "oscillation_period" in st.info:
        row["oscillation_period"] = float(st.info["oscillation_period"])
    if cfg.spectrum.enabled and st.status in ("CONVERGED", "UNSTABLE"):
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                res = compute_spectrum(linearized_qrt_system(eqs, st, cfg.spectrum.scheme),
                                       spectrum_grid(cfg))
        except Exception as exc:
            row.update(converged=False, status="SPECTRUM_ERROR", error=f"{type(exc).__name__}: {exc}")
            return row
        peaks = sorted(res.peaks, key=lambda p: -p.height)
        dom = res.dominant
        if dom is not None:
            row.update(dominant_center=dom.center, dominant_fwhm=dom.fwhm)
        row["coherent"] = res.coherent
        for i, p in enumerate(peaks[:cfg.spectrum.max_peaks]):
            row.update({f"peak{i}_center": p.center, f"peak{i}_height": p.height, f"peak{i}_fwhm": p.fwhm})
    row["_d"] = model.d
    return row


def spectrum_grid(cfg: RunConfig):
    s = cfg.spectrum
    if s.omega_min is None or s.omega_max is None:
        return None
    return np.linspace(s.omega_min, s.omega_max, int(s.points))


def _solve(args):
    return solve_point(*args)


def run_points(cfg: RunConfig, points, workers=1) -> list[dict]:
    """Rows in sweep order; ``workers > 1`` uses a process pool."""
    jobs = [(cfg, p) for p in points]
    if workers <= 1 or len(jobs) <= 1:
        return [_solve(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        # map preserves submission order whatever the completion order
        return list(ex.map(_solve, jobs))


# -- output ----------------------------------------------------------------------------

def fmt(v) -> str:
    """17 significant digits, '.' decimal separator; empty for missing values."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    return str(v)


def header_line(cfg: RunConfig, kind: str) -> str:
    return f"# {SCHEMA} kind={kind} variant={cfg.variant} corrsteady={__version__}"


def write_csv(path, header, cols, rows):
    """RFC 4180 quoting, '\\n' line ends.  Columns not in ``cols`` are ignored."""
    buf = io.StringIO(newline="")
    buf.write(header + "\n")
    w = csv.writer(buf, lineterminator="\n", quoting=csv.QUOTE_MINIMAL)
    w.writerow(cols)
    for r in rows:
        w.writerow([fmt(r.get(c)) for c in cols])
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())


def write_sidecar(path, cfg: RunConfig, extra=None):
    meta = {
        "schema": SCHEMA,
        "version": __version__,
        "config": cfg.to_dict(),
        "created": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "python": platform.python_version(),
        "numpy": np.__version__,
    }
    if extra:
        meta.update(extra)
    with open(path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return [o.real, o.imag]
    return str(o)


def run_sweep(cfg: RunConfig, out_dir, workers=1, stem="sweep"):
    """Run every sweep point and write ``<stem>.csv`` and ``<stem>.json``.

    Returns (rows, n_failed).  A point fails when its steady state is not a
    certified stable fixed point or its invariants are violated.
    """
    cfg.validate()
    points = sweep_points(cfg)
    t0 = time.time()
    rows = run_points(cfg, points, workers)
    d = next((r["_d"] for r in rows if "_d" in r), build_model(cfg).d)
    cols = columns(cfg, d)
    failed = [r["index"] for r in rows if not r.get("converged")]
    os.makedirs(out_dir, exist_ok=True)
    write_csv(os.path.join(out_dir, f"{stem}.csv"), header_line(cfg, stem), cols, rows)
    errors = {str(r["index"]): r["error"] for r in rows if "error" in r}
    periods = {str(r["index"]): r["oscillation_period"] for r in rows if "oscillation_period" in r}
    write_sidecar(os.path.join(out_dir, f"{stem}.json"), cfg,
                  dict(columns=cols, points=len(rows), failed=failed, errors=errors,
                       oscillation_periods=periods, workers=workers,
                       elapsed_s=round(time.time() - t0, 3)))
    return rows, len(failed)
