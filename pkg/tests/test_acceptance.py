"""Acceptance criteria: each test prints one PASS/FAIL line and asserts it.

Tolerances are pinned; a criterion that the model cannot reach fails here and
is discussed in the project notes rather than relaxed.
"""
import time
import warnings

import numpy as np
import pytest

from conftest import model_specs, random_pair_state, report
from corrsteady import cumulant as cu
from corrsteady import oracle as orc
from corrsteady import rates
from corrsteady import spectrum as sp
from corrsteady import twolevel as tl
from corrsteady.config import from_dict
from corrsteady.models import f1_model, full_model, two_level_model
from corrsteady.spin import PolarizabilitySet
from corrsteady.sweep import run_points, sweep_points


# -- two-level laser ---------------------------------------------------------------------

def test_c1_ode_matches_quadratic_roots():
    N = 1e4
    t0 = time.time()
    worst = 0.0
    for x in np.linspace(0.05, 1.2, 20):
        p = tl.TwoLevelParams(N=N, w_plus=x * N)
        a, b = tl.cumulant_ode_steady(p), tl.gen_steady(p)
        worst = max(worst, abs(a.sz - b.sz), abs(a.spsm - b.spsm))
    dt = time.time() - t0
    ok = worst < 1e-8 and dt < 10
    assert report(1, ok, f"max |delta| = {worst:.2e} (< 1e-8), runtime {dt:.2f} s (< 10 s)")


def test_c2_threshold_window():
    N = 1e4
    guard = 5 / N
    # w / (N gamma); the lower edge 1/N has no room for a guard band below it
    inside = np.geomspace(1 / N + guard, 1 - guard, 40)
    outside = np.concatenate([np.array([0.1, 0.5, 0.9]) / N, 1 + guard + np.geomspace(1e-4, 10, 20)])
    c_in = np.array([tl.gen_steady(tl.TwoLevelParams(N=N, w_plus=x * N)).spsm for x in inside])
    c_out = np.array([tl.gen_steady(tl.TwoLevelParams(N=N, w_plus=x * N)).spsm for x in outside])
    ok_in = bool(np.all(c_in > 1e-3))
    ok_out = bool(np.all(c_out < 1e-6))
    lo = inside[np.argmin(c_in)]
    hi = outside[np.argmax(c_out)]
    assert report(2, ok_in and ok_out,
                  f"inside min <s+s-> = {c_in.min():.2e} at w/Ng = {lo:.2e} (need > 1e-3); "
                  f"outside max = {c_out.max():.2e} at w/Ng = {hi:.4g} (need < 1e-6)")


def test_c3_peak_correlation():
    N = 1e4
    m = tl.cumulant_ode_steady(tl.TwoLevelParams(N=N, w_plus=N / 2))
    dev = abs(m.spsm - 0.125)
    assert report(3, dev <= 5 / N, f"<s+s-> = {m.spsm:.8f}, |delta| = {dev:.2e} (<= {5 / N:.0e})")


def _onsets(N, wm, gp, n=1301):
    """Correlation onsets in w+: corners (curvature maxima) of the stable <s+s-> branch."""
    def c(w):
        return np.array([tl.gen_steady(tl.TwoLevelParams(N=N, w_plus=x, w_minus=wm, gamma_plus=gp)).spsm
                         for x in w])

    def corners(w):
        s = c(w)
        d2 = np.gradient(np.gradient(s, w), w)
        k = [i for i in range(1, len(w) - 1) if d2[i] > d2[i - 1] and d2[i] >= d2[i + 1]
             and d2[i] > 0.05 * d2.max()]
        return [w[i] for i in k]

    coarse = corners(np.linspace(1e-3 * N, 1.5 * N, n))
    out = []
    for w0 in coarse:
        fine = np.linspace(0.97 * w0, 1.03 * w0, 2001)
        f = corners(fine)
        out.append(min(f, key=lambda x: abs(x - w0)) if f else w0)
    # the correlated branch starts at w+ = gamma when w- = 0 (zero of <s+s->)
    if wm == 0:
        out = [1.0] + out
    return out


def test_c4_generalized_threshold():
    N = 1e4
    worst = 0.0
    details = []
    swapped_worst = 0.0
    for gp in (0.0, 0.2, 0.5):
        for wmr in (0.0, 0.05):
            wm = wmr * N
            lo, hi = tl.threshold_bounds(N, wm, 1.0, gp)
            found = _onsets(N, wm, gp)
            for b in (lo, hi):
                w = min(found, key=lambda x: abs(x - b))
                # relative error; a zero bound is compared on the scale N (g- - g+)
                err = abs(w - b) / (b if b > 0 else N * (1 - gp))
                worst = max(worst, err)
            details.append(f"({gp},{wmr}): bounds {lo:.0f},{hi:.0f} found {','.join(f'{x:.0f}' for x in found)}")
            # the swapped reading of W+ gives the window w+ + w- < N dg
            swapped_worst = max(swapped_worst, abs(N * (1 - gp) - wm - hi) / hi)
    ok = worst <= 0.02
    assert report(4, ok, f"max relative onset error {worst:.2%} (<= 2%); printed W+ reading selected "
                         f"(swapped reading off by up to {swapped_worst:.1%}); " + "; ".join(details))


def test_c5_linewidth_and_sidebands():
    N, nu = 1e6, 50.0
    worst_fwhm, worst_ratio, n_ratio = 0.0, 0.0, 0
    for r in np.linspace(0.0, 0.45, 10):
        for x in np.linspace(0.1, 0.9, 10):
            wp = x * N * (1 - r)
            model = two_level_model(N, wp, 0.0, 1.0, r, nu)
            eqs = cu.build_moment_system(model)
            st = cu.evolve_to_steady(eqs)
            assert st.converged
            sz = float(np.real(st.rho1[1, 1] - st.rho1[0, 0]))
            p = tl.TwoLevelParams(N=N, w_plus=wp, gamma_plus=r, nu=nu)
            gamma = tl.gen_linewidth(p, tl.TwoLevelMoments(sz, 0.0))
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", sp.CoarseGridWarning)
                res = sp.compute_spectrum(sp.linearized_qrt_system(eqs, st))
            worst_fwhm = max(worst_fwhm, abs(res.dominant.fwhm - gamma) / gamma)
            if r > 0:
                # J- (frequency label -nu) emits at +nu, J+ at -nu
                up = sum(pk.weight for pk in res.peaks if abs(pk.center + nu) < nu / 2)
                down = sum(pk.weight for pk in res.peaks if abs(pk.center - nu) < nu / 2)
                worst_ratio = max(worst_ratio, abs(up / down - r) / r)
                n_ratio += 1
    ok = worst_fwhm <= 1e-6 and worst_ratio <= 0.01
    assert report(5, ok, f"max FWHM error {worst_fwhm:.1e} (<= 1e-6) on 10x10 grid; "
                         f"max sideband-ratio error {worst_ratio:.2e} (<= 1%) over {n_ratio} points")


# -- oracle ---------------------------------------------------------------------------------

def _random_models(rng):
    out = []
    for _ in range(5):
        w = rng.uniform(0.1, 1.0, 5)
        out.append(two_level_model(2, w[0], w[1], w[2], w[3], nu=rng.uniform(0, 3)))
    for _ in range(5):
        w = rng.uniform(0.1, 1.0, 3)
        out.append(f1_model(2, rng.uniform(0, np.pi / 2), w[0], w[1], epsilon=rng.uniform(0, 0.5),
                            gamma=w[2], zeeman=(0.0, 10.0, 30.0)))
    return out


def test_c6_oracle_equivalence():
    rng = np.random.default_rng(2024)
    t0 = time.time()
    rho_err = pole_err = 0.0
    for model in _random_models(rng):
        ex = orc.exact_steady(model, 2)
        eqs = cu.build_moment_system(model)
        st = cu.evolve_to_steady(eqs)
        rho_err = max(rho_err, float(np.max(np.abs(st.rho2 - ex.rho))))
        qrt = sp.linearized_qrt_system(eqs, st, "pair")
        lam = orc.liouvillian_eigenvalues(model, 2)
        res = sp.compute_spectrum(qrt, np.linspace(-1, 1, 3), peaks=False)
        for p in res.poles:
            pole_err = max(pole_err, float(np.min(np.abs(lam - p))))
    dt = time.time() - t0
    ok = rho_err <= 1e-6 and pole_err <= 1e-6 and dt < 60
    assert report(6, ok, f"max |rho2 - exact| = {rho_err:.1e}, max pole distance = {pole_err:.1e} "
                         f"(<= 1e-6), 10 models, runtime {dt:.1f} s (< 60 s)")


# -- F = 1 angle sweep ----------------------------------------------------------------------

F1 = dict(variant="f1", model=dict(N=2e5, w_minus=200.0, w_plus=1000.0, epsilon=0.1, zeeman=[0, 10, 30]),
          sweep=dict(variable="theta", start=0.0, stop=0.5, points=40, unit="pi"),
          spectrum=dict(enabled=True, max_peaks=8))


@pytest.fixture(scope="module")
def f1_sweep():
    cfg = from_dict(F1).validate()
    t0 = time.time()
    rows = run_points(cfg, sweep_points(cfg))
    return rows, time.time() - t0


def _regions(mask):
    out, start = [], None
    for i, m in enumerate(mask):
        if m and start is None:
            start = i
        if not m and start is not None:
            out.append((start, i - 1))
            start = None
    if start is not None:
        out.append((start, len(mask) - 1))
    return out


def test_c7a_two_correlated_regions(f1_sweep):
    rows, dt = f1_sweep
    th = np.array([r["theta"] for r in rows])
    tau = np.array([r["tau2_norm"] for r in rows])
    reg = _regions(tau > 1e-3)
    ok = len(reg) == 2 and th[reg[0][1]] < np.pi / 4 < th[reg[1][0]] and all(r["converged"] for r in rows)
    ok = ok and dt < 300
    desc = ", ".join(f"[{th[a] / np.pi:.3f}pi, {th[b] / np.pi:.3f}pi]" for a, b in reg)
    assert report("7a", ok, f"tau2 > 1e-3 regions {desc}; 40-point sweep {dt:.0f} s (< 300 s)")


def test_c7b_linewidth_at_quarter_pi():
    model = f1_model(2e5, np.pi / 4, 1000.0, 200.0)
    eqs = cu.build_moment_system(model)
    st = cu.evolve_to_steady(eqs)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sp.CoarseGridWarning)
        res = sp.compute_spectrum(sp.linearized_qrt_system(eqs, st))
    target = 2 + 200 + 1000
    err = abs(res.dominant.fwhm - target) / target
    assert report("7b", err <= 0.01, f"dominant FWHM {res.dominant.fwhm:.1f} vs 2g+w-+w+ = {target} "
                                     f"(rel. error {err:.1%}, need <= 1%)")


def _near(center, fwhm, lines):
    # a line position is resolved to within half the peak width
    return min(abs(center - c) for c in lines) <= max(fwhm / 2, 1e-9)


def test_c7c_peak_positions(f1_sweep):
    rows, _ = f1_sweep
    lines = (-20.0, -10.0, 10.0, 20.0)
    bad = []
    for r in rows:
        for i in range(8):
            c = r.get(f"peak{i}_center")
            if c is not None and not _near(c, r[f"peak{i}_fwhm"], lines):
                bad.append((round(r["theta"] / np.pi, 3), round(c, 2)))
    assert report("7c", not bad, f"peaks off +-10, +-20 (within FWHM/2): {bad if bad else 'none'}")


def test_c7d_dominant_peak(f1_sweep):
    rows, _ = f1_sweep
    bad = []
    for r in rows:
        if abs(r["theta"] - np.pi / 4) < 1e-12:
            continue
        want = (20.0, -20.0) if r["theta"] < np.pi / 4 else (10.0, -10.0)
        if not _near(r["dominant_center"], r["dominant_fwhm"], want):
            bad.append((round(r["theta"] / np.pi, 3), round(r["dominant_center"], 2)))
    assert report("7d", not bad, f"dominant peak off the expected line: {bad if bad else 'none'}")


# -- F = 4 ------------------------------------------------------------------------------

def _f4_populations(theta):
    # the stated rate ratios gamma/gamma_dec = 1.9e-6, w/gamma_dec = 5.8e-3 (the probe
    # parameters do not reproduce the second one, see criterion 10)
    gamma_dec = 1 / 1.9e-6
    pol = PolarizabilitySet.from_epsilon(0.02, s1=0.02)
    model = full_model(4, 1e9, theta, pol, 1.0, gamma_dec, 5.8e-3 * gamma_dec)
    t0 = time.time()
    st = cu.steady_state(model)
    obs = cu.observables(st, model.space)
    return st, obs, time.time() - t0


@pytest.fixture(scope="module")
def f4_states():
    return {k: _f4_populations(k * np.pi) for k in (0.0, 0.254, 0.5)}


def test_c8_f4_population_signature(f4_states):
    p = {k: v[1]["populations"] for k, v in f4_states.items()}
    runtime = max(v[2] for v in f4_states.values())
    conv = all(v[0].converged for v in f4_states.values())
    up = {k: q[8] / q[4] for k, q in p.items()}      # p(4) / p(0)
    down = {k: q[0] / q[4] for k, q in p.items()}    # p(-4) / p(0)
    literal_up = up[0.0] >= 10 * up[0.254]
    literal_down = down[0.5] >= 10 * down[0.254]
    ok = literal_up and literal_down and conv and runtime < 1800
    assert report(8, ok, f"p4/p0: theta=0 {up[0.0]:.3g}, 0.254pi {up[0.254]:.3g} (need ratio >= 10: "
                         f"{up[0.0] / up[0.254]:.3g}); p-4/p0: pi/2 {down[0.5]:.3g}, 0.254pi {down[0.254]:.3g} "
                         f"(need ratio >= 10: {down[0.5] / down[0.254]:.3g}); max {runtime:.0f} s per theta")


def test_c8_f4_flatness(f4_states):
    # steepness max(r, 1/r) of the end-to-middle ratio; flat means close to 1
    p = {k: v[1]["populations"] for k, v in f4_states.items()}
    steep = lambda r: max(r, 1 / r)
    up = {k: steep(q[8] / q[4]) for k, q in p.items()}
    down = {k: steep(q[0] / q[4]) for k, q in p.items()}
    ok = up[0.254] >= 10 * up[0.0] and down[0.254] >= 10 * down[0.5]
    report("8 (steepness)", ok, f"m>=0 steepness theta=0 {up[0.0]:.3g} vs 0.254pi {up[0.254]:.3g}; "
                                f"m<=0 steepness pi/2 {down[0.5]:.3g} vs 0.254pi {down[0.254]:.3g}")
    assert ok


# -- invariants -----------------------------------------------------------------------------

def test_c9_invariant_suite():
    from hypothesis import given, settings, strategies as st

    failures = []

    @settings(max_examples=40, deadline=None, database=None)
    @given(model_specs(max_d=9), st.integers(0, 2**31))
    def structure(model, seed):
        rng = np.random.default_rng(seed)
        eqs = cu.build_moment_system(model)
        M = random_pair_state(rng, model.d)
        dM = eqs.rhs(M)
        P = cu.swap_matrix(model.d)
        s = max(1.0, np.max(np.abs(dM)))
        for name, v in (("trace", abs(np.trace(dM))), ("hermitian", np.max(np.abs(dM - dM.conj().T))),
                        ("swap", np.max(np.abs(P @ dM @ P - dM)))):
            if v > 1e-10 * s:
                failures.append((name, float(v)))

    @settings(max_examples=12, deadline=None, database=None)
    @given(model_specs(max_d=3))
    def steady(model):
        eqs = cu.build_moment_system(model)
        a = cu.evolve_to_steady(eqs)
        b = cu.evolve_to_steady(cu.build_moment_system(model))
        if not np.array_equal(a.rho2, b.rho2):
            failures.append(("determinism", 0.0))
        if a.status == "FAILED_STATIONARY":
            return
        for k, v in a.check_invariants().items():
            if v > 1e-9:
                failures.append((k, v))
        if a.status == "CONVERGED" and eqs.collective:
            res = sp.compute_spectrum(sp.linearized_qrt_system(eqs, a), peaks=False)
            if len(res.poles) and np.all(res.poles.real < 0):
                c0 = float(np.real(np.sum(res.weights)))
                if c0 > 1e-8:
                    integral = sp.parseval_integral(res)
                    if abs(integral - np.sqrt(2 * np.pi) * c0) > 1e-4 * np.sqrt(2 * np.pi) * c0:
                        failures.append(("parseval", integral))

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        structure()
        steady()
    assert report(9, not failures, f"trace/hermiticity/swap/reduced/Parseval/determinism over random "
                                   f"models (d <= 9): {failures[:4] if failures else 'no violations'}")


# -- rates ---------------------------------------------------------------------------------

def test_c10_rate_derivation():
    r = rates.derive_rates(rates.cesium_d2_example())
    e1 = abs(r["gamma_over_dec"] - 1.9e-6) / 1.9e-6
    e2 = abs(r["w_over_dec"] - 5.8e-3) / 5.8e-3
    assert report(10, e1 <= 0.05 and e2 <= 0.05,
                  f"gamma/gamma_dec = {r['gamma_over_dec']:.4g} ({e1:.1%} off 1.9e-6), "
                  f"w/gamma_dec = {r['w_over_dec']:.4g} ({e2:.0%} off 5.8e-3); need <= 5%")
