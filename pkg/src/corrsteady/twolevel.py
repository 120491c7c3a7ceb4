"""Generalized superradiant laser: two-level cumulant equations and closed forms.

Master equation (per unit of time, rates in any common unit)::

    drho/dt = w+ sum_i L[s+_i] + w- sum_i L[s-_i] + g- L[J-] + g+ L[J+]

The moment equations kept here are the exact second-order cumulant closure of
that master equation, including the single-atom parts of the collective
dissipators and the N-1 / N-2 site counting.  For N >> 1 they reduce to the
large-N forms usually quoted for the superradiant laser.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import solve_ivp


@dataclass(frozen=True)
class TwoLevelParams:
    N: float
    w_plus: float
    w_minus: float = 0.0
    gamma_minus: float = 1.0
    gamma_plus: float = 0.0
    nu: float = 0.0

    def __post_init__(self):
        if self.N < 2:
            raise ValueError("need at least two atoms")
        for name in ("w_plus", "w_minus", "gamma_minus", "gamma_plus"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def dgamma(self):
        return self.gamma_minus - self.gamma_plus

    @property
    def total_rate(self):
        return self.w_plus + self.w_minus + self.gamma_minus + self.gamma_plus

    def relabelled(self) -> "TwoLevelParams":
        """Swap the roles of the two levels (+ <-> -)."""
        return replace(self, w_plus=self.w_minus, w_minus=self.w_plus,
                       gamma_minus=self.gamma_plus, gamma_plus=self.gamma_minus, nu=-self.nu)


@dataclass(frozen=True)
class TwoLevelMoments:
    sz: float
    spsm: float
    stable: bool | None = None
    eigenvalues: tuple = ()
    residual: float = 0.0
    converged: bool = True
    roots: tuple = field(default=(), compare=False, repr=False)


def rhs(p: TwoLevelParams, sz, spsm):
    """Time derivatives of <s^z_1> and <s^+_1 s^-_2>."""
    N, dg, S = p.N, p.dgamma, p.total_rate
    gs = p.gamma_minus + p.gamma_plus
    a0 = p.w_plus - p.w_minus + p.gamma_plus - p.gamma_minus
    dsz = a0 - S * sz - 2 * (N - 1) * dg * spsm
    dc = ((N - 2) * dg * sz - S) * spsm + 0.5 * (dg + gs * sz) * sz
    return dsz, dc


def jacobian(p: TwoLevelParams, sz, spsm):
    N, dg, S = p.N, p.dgamma, p.total_rate
    gs = p.gamma_minus + p.gamma_plus
    return np.array([
        [-S, -2 * (N - 1) * dg],
        [(N - 2) * dg * spsm + 0.5 * dg + gs * sz, (N - 2) * dg * sz - S],
    ])


def _classify(p, sz, spsm):
    ev = np.linalg.eigvals(jacobian(p, sz, spsm))
    scale = max(p.N * (p.gamma_minus + p.gamma_plus), p.total_rate, 1e-300)
    stable = bool(np.all(ev.real < -1e-13 * scale))
    return TwoLevelMoments(float(sz), float(spsm), stable, tuple(ev))


def stationary_roots(p: TwoLevelParams) -> list[TwoLevelMoments]:
    """All real stationary points, each with its linear-stability classification."""
    N, dg, S = p.N, p.dgamma, p.total_rate
    gs = p.gamma_minus + p.gamma_plus
    a0 = p.w_plus - p.w_minus + p.gamma_plus - p.gamma_minus
    if S == 0:
        # no dynamics at all: every state is stationary; report the dark state
        return [TwoLevelMoments(-1.0, 0.0, False, (0.0, 0.0))]
    if dg == 0:
        sz = a0 / S
        return [_classify(p, sz, 0.5 * gs * sz**2 / S)]
    # substitute spsm from the first equation into the second
    a = (N - 1) * dg * gs - (N - 2) * dg * S
    b = (N - 2) * dg * a0 + S**2 + (N - 1) * dg**2
    c = -S * a0
    if a == 0:
        szs = [-c / b]
    else:
        disc = b * b - 4 * a * c
        if disc < 0:
            disc = 0.0
        q = -0.5 * (b + np.copysign(np.sqrt(disc), b))
        szs = [q / a, c / q] if q != 0 else [0.0]
    out = []
    for sz in szs:
        spsm = (a0 - S * sz) / (2 * (N - 1) * dg)
        out.append(_classify(p, sz, spsm))
    return out


def _pick(roots):
    phys = [r for r in roots if abs(r.sz) <= 1 + 1e-9 and abs(r.spsm) <= 0.25 + 1e-9]
    for pool in ([r for r in phys if r.stable], phys, [r for r in roots if r.stable], roots):
        if pool:
            return pool[0]
    raise RuntimeError("no stationary point found")


def gen_steady(p: TwoLevelParams) -> TwoLevelMoments:
    """Stable stationary solution of the two-level cumulant equations."""
    roots = stationary_roots(p)
    best = _pick(roots)
    return replace(best, roots=tuple(roots))


def simple_steady(w: float, gamma: float, N: float) -> TwoLevelMoments:
    """Superradiant laser with pump w and collective decay gamma only."""
    return gen_steady(TwoLevelParams(N=N, w_plus=w, gamma_minus=gamma))


def gen_threshold(p: TwoLevelParams):
    """Leading-order superradiance condition; returns (inside, margin = rhs - lhs)."""
    if p.w_plus >= p.w_minus:
        wp, wm, dg = p.w_plus, p.w_minus, p.dgamma
    else:
        wp, wm, dg = p.w_minus, p.w_plus, -p.dgamma
    if wp + wm == 0:
        return False, -0.0
    margin = p.N * dg * (wp - wm) / (wp + wm) - wm - wp
    return bool(margin > 0), float(margin)


def threshold_bounds(N, w_minus, gamma_minus, gamma_plus=0.0):
    """Pump rates w+ at which the leading-order condition changes (lower, upper).

    Solves (w+ + w-)^2 = N (g- - g+) (w+ - w-); returns None if no window exists.
    """
    B = N * (gamma_minus - gamma_plus)
    a = w_minus
    # x^2 + (2a - B) x + a^2 + a B = 0
    bq, cq = 2 * a - B, a * a + a * B
    disc = bq * bq - 4 * cq
    if B <= 0 or disc < 0:
        return None
    r = np.sqrt(disc)
    return (float((-bq - r) / 2), float((-bq + r) / 2))


def optimal_pump(p: TwoLevelParams) -> float:
    """Leading-order pump rate maximizing the pair correlation."""
    return p.N * p.dgamma / 2 - p.w_minus


def max_correlation_asymptotic(p: TwoLevelParams) -> float:
    """Leading-order maximum of <s+_1 s-_2> over w+ (valid for g+ < g-)."""
    return 0.125 - p.w_minus / (p.N * p.dgamma)


def gen_linewidth(p: TwoLevelParams, m: TwoLevelMoments) -> float:
    """FWHM of the sideband Lorentzians from the steady-state moments."""
    return p.gamma_minus + p.gamma_plus + p.w_plus + p.w_minus - (p.N - 1) * p.dgamma * m.sz


def w_variables(p: TwoLevelParams, reading: str = "printed"):
    """Dimensionless (W+, W-) entering the asymptotic linewidth.

    ``printed`` takes the definition literally, W+- = (w+ +- w-)(w+ + w-)/(N dg (w+ - w-)).
    ``swapped`` uses (w+ +- w-)(w+ -+ w-) in the numerator instead.
    """
    wp, wm = p.w_plus, p.w_minus
    den = p.N * p.dgamma * (wp - wm)
    if reading == "printed":
        return (wp + wm) * (wp + wm) / den, (wp - wm) * (wp + wm) / den
    if reading == "swapped":
        return (wp + wm) * (wp - wm) / den, (wp - wm) * (wp + wm) / den
    raise ValueError(f"unknown reading {reading!r}")


def linewidth_asymptotic(p: TwoLevelParams, reading: str = "derived") -> float:
    """Leading-order FWHM in 1/N.

    ``derived`` is the expansion of the exact moment equations,
    Gamma = (dg + gs W-) W+ / (W- (1 - W+)) - dg W-  with the printed W+- and
    gs = g- + g+.  ``printed`` and ``swapped`` evaluate the published rational
    expression under the two readings of W+-; both agree with ``derived`` only
    for w- = g+ = 0.
    """
    if reading == "derived":
        Wp, Wm = w_variables(p, "printed")
        gs = p.gamma_minus + p.gamma_plus
        return (p.dgamma + gs * Wm) * Wp / (Wm * (1 - Wp)) - p.dgamma * Wm
    Wp, Wm = w_variables(p, reading)
    num = Wp + Wp * Wm * (Wm - Wp * Wm - 1)
    den = (Wp - 1) * (Wm - 1) * Wm
    return p.gamma_minus * num / den * (1 - p.gamma_plus / p.gamma_minus)


def collective_moments(p: TwoLevelParams, m: TwoLevelMoments):
    """<J^z> (sum of Pauli z), <J+J->, <J-J+> assembled from single and pair moments."""
    N = p.N
    jz = N * m.sz
    jpjm = N * (1 + m.sz) / 2 + N * (N - 1) * m.spsm
    jmjp = N * (1 - m.sz) / 2 + N * (N - 1) * m.spsm
    return jz, jpjm, jmjp


def sideband_ratio(p: TwoLevelParams, m: TwoLevelMoments, form: str = "physical") -> float:
    """Ratio of integrated sideband intensities, (g+ channel) / (g- channel).

    ``physical`` weights each channel with its own photon number, g+ <J-J+> / g- <J+J->.
    ``printed`` evaluates (g+/g-) / (1 - <J^z>/<J+J->).
    """
    if p.gamma_plus == 0:
        return 0.0
    jz, jpjm, jmjp = collective_moments(p, m)
    if abs(jpjm) < 1e-300 or (form == "printed" and abs(jpjm - jz) < 1e-12 * abs(jpjm)):
        raise ZeroDivisionError("collective dipole moment vanishes")
    ratio = p.gamma_plus / p.gamma_minus
    if form == "physical":
        return ratio * jmjp / jpjm
    if form == "printed":
        return ratio / (1 - jz / jpjm)
    raise ValueError(f"unknown form {form!r}")


def cumulant_ode_steady(p: TwoLevelParams, init=(-1.0, 0.0), tol=1e-12, t_max=None,
                        max_chunks=60, polish=True, switch=1e-6) -> TwoLevelMoments:
    """Integrate the moment equations from ``init`` until they stop moving.

    Integration runs until the residual drops below ``switch`` (relative to the
    fastest rate), i.e. into the basin of the attracting fixed point; Newton
    refinement then removes the remaining slow exponential tail.
    """
    scale = max(p.N * (p.gamma_minus + p.gamma_plus), p.total_rate)
    if scale == 0:
        return TwoLevelMoments(float(init[0]), float(init[1]), None, residual=0.0)

    def f(t, y):
        return rhs(p, y[0], y[1])

    def jac(t, y):
        return jacobian(p, y[0], y[1])

    y = np.array(init, dtype=float)
    span = 10.0 / scale if t_max is None else t_max / max_chunks
    stop = switch if polish else tol
    res = np.inf
    for _ in range(max_chunks):
        sol = solve_ivp(f, (0.0, span), y, method="Radau", jac=jac, rtol=1e-9, atol=1e-13)
        y = sol.y[:, -1]
        res = float(np.max(np.abs(f(0, y))))
        if res < stop * scale:
            break
        span *= 2
    converged = res < stop * scale
    if polish and converged:
        for _ in range(20):
            step = np.linalg.solve(jacobian(p, *y), np.array(f(0, y)))
            y = y - step
            if np.max(np.abs(step)) < 1e-16:
                break
        res = float(np.max(np.abs(f(0, y))))
        converged = res < tol * scale
    c = _classify(p, y[0], y[1])
    return replace(c, residual=res, converged=converged)
