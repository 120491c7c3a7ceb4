"""Command line: ``corrsteady {steady,sweep,spectrum,oracle,derive-rates} --config run.yaml``.

Exit codes: 0 success, 1 some point failed to converge, 2 configuration error.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
import warnings
from dataclasses import replace

import numpy as np

from . import __version__
from .config import VARIANTS, ConfigError, RunConfig, SweepConfig, build_model, load, physical_rates
from .sweep import (Point, columns, header_line, run_sweep, solve_point, spectrum_grid, write_csv,
                    write_sidecar)

EXIT_OK, EXIT_PARTIAL, EXIT_CONFIG = 0, 1, 2

log = logging.getLogger("corrsteady")


def _single(cfg: RunConfig) -> RunConfig:
    return replace(cfg, sweep=SweepConfig())


def cmd_steady(cfg, args):
    cfg = _single(cfg)
    row = solve_point(cfg, Point(0, {}))
    d = row.get("_d") or build_model(cfg).d
    write_csv(os.path.join(args.out, "steady.csv"), header_line(cfg, "steady"), columns(cfg, d), [row])
    write_sidecar(os.path.join(args.out, "steady.json"), cfg,
                  dict(status=row.get("status"), error=row.get("error")))
    return EXIT_OK if row.get("converged") else EXIT_PARTIAL


def cmd_sweep(cfg, args):
    _, n_failed = run_sweep(cfg, args.out, workers=args.workers)
    return EXIT_PARTIAL if n_failed else EXIT_OK


def cmd_spectrum(cfg, args):
    from .cumulant import build_moment_system, evolve_to_steady
    from .spectrum import compute_spectrum, linearized_qrt_system

    cfg = _single(cfg)
    model = build_model(cfg)
    eqs = build_moment_system(model)
    st = evolve_to_steady(eqs, tol=cfg.solver.tol, max_steps=cfg.solver.max_steps)
    meta = dict(status=st.status, residual=st.residual)
    if st.status == "FAILED_STATIONARY":
        meta["oscillation_period"] = st.info.get("oscillation_period")
        write_sidecar(os.path.join(args.out, "spectrum.json"), cfg, meta)
        return EXIT_PARTIAL
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        res = compute_spectrum(linearized_qrt_system(eqs, st, cfg.spectrum.scheme), spectrum_grid(cfg))
    hdr = header_line(cfg, "spectrum")
    write_csv(os.path.join(args.out, "spectrum.csv"), hdr, ["omega", "S"],
              [dict(omega=w, S=s) for w, s in zip(res.omega, res.S)])
    order = np.lexsort((res.poles.real, res.poles.imag))
    write_csv(os.path.join(args.out, "spectrum_modes.csv"), hdr,
              ["pole_re", "pole_im", "weight_re", "weight_im"],
              [dict(pole_re=res.poles[k].real, pole_im=res.poles[k].imag,
                    weight_re=res.weights[k].real, weight_im=res.weights[k].imag) for k in order])
    write_csv(os.path.join(args.out, "spectrum_peaks.csv"), hdr,
              ["center", "height", "fwhm", "grid_fwhm", "weight", "dominant", "merged"],
              [dict(center=p.center, height=p.height, fwhm=p.fwhm, grid_fwhm=p.grid_fwhm,
                    weight=p.weight, dominant=p.dominant, merged=p.merged) for p in res.peaks])
    meta.update(coherent=res.coherent, scheme=res.info.get("scheme"), c0=res.info.get("c0"),
                warnings=[str(w.message) for w in caught])
    write_sidecar(os.path.join(args.out, "spectrum.json"), cfg, meta)
    return EXIT_OK if st.converged else EXIT_PARTIAL


def cmd_oracle(cfg, args):
    from .cumulant import evolve_to_steady, build_moment_system, observables
    from .oracle import OracleSizeError, exact_steady, reduced_density

    cfg = _single(cfg)
    N = cfg.oracle.N
    model = build_model(cfg).with_N(N)
    try:
        ex = exact_steady(model, N, cap=cfg.oracle.cap, allow_large=cfg.oracle.allow_large)
    except OracleSizeError as exc:
        raise ConfigError(str(exc)) from exc
    st = evolve_to_steady(build_moment_system(model), tol=cfg.solver.tol, max_steps=cfg.solver.max_steps)
    rho1 = reduced_density(ex, 1)
    rho2 = reduced_density(ex, 2) if N >= 2 else np.kron(rho1, rho1)
    o_ex = observables(type(st)(rho1, rho2), model.space, cfg.norm)
    o_mo = observables(st, model.space, cfg.norm)
    rows = [dict(quantity="polarization", exact=o_ex["polarization"], moments=o_mo["polarization"]),
            dict(quantity="tau2_norm", exact=o_ex["tau2_norm"], moments=o_mo["tau2_norm"])]
    for m, a, b in zip(model.space.m_values, o_ex["populations"], o_mo["populations"]):
        rows.append(dict(quantity=f"p[{m:g}]", exact=a, moments=b))
    rows.append(dict(quantity="max_abs_rho2", exact=0.0, moments=float(np.max(np.abs(rho2 - st.rho2)))))
    for r in rows[:-1]:
        r["abs_diff"] = abs(r["exact"] - r["moments"])
    rows[-1]["abs_diff"] = rows[-1]["moments"]
    write_csv(os.path.join(args.out, "oracle.csv"), header_line(cfg, "oracle"),
              ["quantity", "exact", "moments", "abs_diff"], rows)
    write_sidecar(os.path.join(args.out, "oracle.json"), cfg,
                  dict(N=N, degeneracy=ex.degeneracy, exact_residual=ex.residual,
                       moment_status=st.status, checks=ex.check()))
    return EXIT_OK if st.converged and ex.degeneracy == 1 else EXIT_PARTIAL


def cmd_derive_rates(cfg, args):
    if cfg.physical is None:
        raise ConfigError("derive-rates needs a 'physical' block")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        r = physical_rates(cfg)
    rows = [dict(name=k, value=v) for k, v in r.items()]
    write_csv(os.path.join(args.out, "rates.csv"), header_line(cfg, "rates"), ["name", "value"], rows)
    write_sidecar(os.path.join(args.out, "rates.json"), cfg,
                  dict(rates=r, warnings=[str(w.message) for w in caught]))
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    return EXIT_OK


COMMANDS = {
    "steady": cmd_steady,
    "sweep": cmd_sweep,
    "spectrum": cmd_spectrum,
    "oracle": cmd_oracle,
    "derive-rates": cmd_derive_rates,
}


def parser():
    p = argparse.ArgumentParser(prog="corrsteady", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="YAML run configuration")
        s.add_argument("--out", default=".", help="output directory")
        s.add_argument("--workers", type=int, default=1)
        s.add_argument("--seed", type=int, default=None, help="unsigned 64-bit seed (overrides config)")
        s.add_argument("--variant", choices=VARIANTS, default=None)
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    p = parser()
    try:
        args = p.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors, which is the config-error code
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.workers < 1:
            raise ConfigError("--workers must be positive")
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        cfg = load(args.config, variant=args.variant, seed=args.seed)
        os.makedirs(args.out, exist_ok=True)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
