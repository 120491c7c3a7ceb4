"""Two-time correlations by the quantum regression theorem and the emission spectrum.

Fourier convention ``F[f](w) = (2 pi)^{-1/2} int dt exp(-i w t) f(t)``.  For a
stationary correlator ``C(tau) = sum_k w_k exp(l_k tau)`` (tau >= 0, extended
by ``C(-tau) = C(tau)^*``)::

    S(w) = sqrt(2/pi) sum_k Re[ w_k / (i w - l_k) ]

so every pole ``l_k`` gives a peak at ``Im l_k`` with FWHM ``2 |Re l_k|`` and
``int S dw = sqrt(2 pi) C(0)``.

Each collective channel ``J_c = sum_i V_i`` with rate ``r_c`` contributes
``r_c F[<J_c^dag(tau) J_c(0)> - |<J_c>|^2]``; cross terms between channels of
different frequency are dropped (secular approximation, as in the master
equation itself).
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .cumulant import MomentEquations, MomentState, Reducer, kron2, ptrace2, ptrace2_left, channel_charge

log = logging.getLogger(__name__)

NORM = np.sqrt(2 / np.pi)


class CoarseGridWarning(UserWarning):
    pass


@dataclass
class Peak:
    center: float
    height: float
    fwhm: float
    dominant: bool = False
    merged: bool = False
    poles: tuple = ()
    grid_fwhm: float = np.nan
    weight: float = 0.0     # integrated intensity of the cluster, Re sum of its C(0) weights


@dataclass
class SpectrumResult:
    poles: np.ndarray
    weights: np.ndarray
    omega: np.ndarray
    S: np.ndarray
    peaks: list = field(default_factory=list)
    coherent: float = 0.0
    info: dict = field(default_factory=dict)

    @property
    def modes(self):
        return list(zip(self.poles, self.weights))

    def evaluate(self, omega):
        return lorentzian_sum(omega, self.poles, self.weights)

    def correlator(self, tau):
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        return np.exp(np.outer(tau, self.poles)) @ self.weights

    @property
    def dominant(self):
        for p in self.peaks:
            if p.dominant:
                return p
        return None


def lorentzian_sum(omega, poles, weights):
    omega = np.asarray(omega, dtype=float)
    poles = np.asarray(poles, dtype=complex)
    weights = np.asarray(weights, dtype=complex)
    if poles.size == 0:
        return np.zeros_like(omega)
    out = np.zeros(omega.shape)
    # chunk over the grid to bound memory for large pole sets
    flat = omega.ravel()
    res = out.ravel()
    step = max(1, 2_000_000 // max(poles.size, 1))
    for i in range(0, flat.size, step):
        z = 1j * flat[i:i + step, None] - poles[None, :]
        res[i:i + step] = NORM * np.real(weights[None, :] / z).sum(axis=1)
    return res.reshape(omega.shape)


# -- linearized regression systems -------------------------------------------------------

@dataclass
class Emitter:
    label: str
    rate: float
    frequency: float
    x0: np.ndarray
    readout: np.ndarray
    readout_same: np.ndarray | None = None
    mean: complex = 0.0


@dataclass
class QRTSystem:
    """Linear tau-evolution ``dx/dtau = A x`` shared by all emitters."""
    A: np.ndarray
    emitters: list
    scheme: str
    N: float
    info: dict = field(default_factory=dict)

    def modes(self, emitter: Emitter, readout=None):
        ev, R = self._eig()
        c = np.linalg.solve(R, emitter.x0)
        a = emitter.readout if readout is None else readout
        return ev, emitter.rate * (a @ R) * c

    def _eig(self):
        if "eig" not in self.info:
            ev, R = np.linalg.eig(self.A)
            self.info["eig"] = (ev, R)
            self.info["condition"] = float(np.linalg.cond(R))
        return self.info["eig"]

    @property
    def poles(self):
        return self._eig()[0]

    def correlator(self, tau, emitter: Emitter):
        """Direct propagation (for cross-checks), C(tau) for scalar tau."""
        from scipy.linalg import expm
        return emitter.rate * emitter.readout @ (expm(self.A * tau) @ emitter.x0)


def _single_generator(eqs: MomentEquations):
    """Single-site Lindblad superoperator on row-major vectorized d x d matrices."""
    d = eqs.d
    I = np.eye(d)
    H = np.diag(eqs.model.zeeman).astype(complex)

    def sup(A, B):
        # X -> A X B for row-major vec
        return np.kron(A, B.T)

    L = -1j * (sup(H, I) - sup(I, H))
    ops = [(ch.rate, np.asarray(ch.op, complex)) for ch in eqs.model.local]
    ops += [(c["rate"], c["V"]) for c in eqs.collective]
    for r, V in ops:
        Vd = V.conj().T
        VdV = Vd @ V
        L = L + r * (sup(V, Vd) - 0.5 * sup(VdV, I) - 0.5 * sup(I, VdV))
    return L


def _frozen_generator(eqs: MomentEquations, rho1):
    """Generator for (chi_s, chi_x) with single-atom moments frozen at ``rho1``.

    chi_s is the one-site reduction of the perturbation V_1 rho, chi_x that of
    V_2 rho seen from site 1.  Two-site reductions of the perturbation are
    factorized as chi (x) rho1 + rho1 (x) chi'.
    """
    d = eqs.d
    n = d * d
    N = eqs.N
    L1 = _single_generator(eqs)
    A = np.zeros((2 * n, 2 * n), dtype=complex)
    A[:n, :n] = L1
    A[n:, n:] = L1
    I = np.eye(d)
    for c in eqs.collective:
        r, V, Vd = c["rate"], c["V"], c["Vd"]
        v = np.trace(V @ rho1)
        vd = np.trace(Vd @ rho1)
        # chi -> <V>[chi, V^+] + <V^+>[V, chi], diagonal blocks
        K = 0.5 * (v * (np.kron(I, Vd.T) - np.kron(Vd, I)) + vd * (np.kron(V, I) - np.kron(I, V.T)))
        # chi' -> Tr(V chi') [rho1, V^+] + Tr(V^+ chi') [V, rho1], coupling blocks
        gvec = (rho1 @ Vd - Vd @ rho1).ravel()
        hvec = (V @ rho1 - rho1 @ V).ravel()
        tg = V.T.ravel()   # Tr(V X) = sum_ij V_ji X_ij
        th = Vd.T.ravel()
        C = 0.5 * (np.outer(gvec, tg) + np.outer(hvec, th))
        A[:n, :n] += r * (N - 1) * K
        A[:n, n:] += r * (N - 1) * C
        A[n:, :n] += r * C
        A[n:, n:] += r * ((N - 2) * C + (N - 1) * K)
    return A


def linearized_qrt_system(eqs: MomentEquations, steady: MomentState, scheme="frozen",
                          stationary_tol=1e-6, channels=None) -> QRTSystem:
    """Linear regression system for the collective channel correlators at ``steady``.

    ``frozen`` evolves the one-site correlators <A_1(tau) V_1(0)>, <A_1(tau) V_2(0)>
    with single-atom moments frozen in the collective cross terms.  ``pair``
    evolves the two-site reduction of the perturbation under the tangent of the
    closed pair equations (exact for N = 2).
    """
    res = np.max(np.abs(eqs.rhs(steady.rho2))) / eqs.rate_scale
    if res > stationary_tol:
        raise ValueError(f"input is not stationary (relative residual {res:.2e})")
    rho1, M = steady.rho1, steady.rho2
    d, N = eqs.d, eqs.N
    chans = eqs.collective if channels is None else channels
    if scheme == "frozen":
        A = _frozen_generator(eqs, rho1)
        r12 = M.reshape(d, d, d, d)
        emitters = []
        for c in chans:
            V, Vd = c["V"], c["Vd"]
            v = np.trace(V @ rho1)
            xs = V @ rho1 - v * rho1
            # Tr_2[(1 x V) rho12] -- by swap symmetry equal to Tr_1[(V x 1) rho12]
            xx = ptrace2_left(V, M, d) - v * rho1
            a = Vd.T.ravel()
            emitters.append(Emitter(c["label"], c["rate"], 0.0, np.concatenate([xs.ravel(), xx.ravel()]),
                                    N * np.concatenate([a, (N - 1) * a]),
                                    N * np.concatenate([a, 0 * a]), v))
        return QRTSystem(A, emitters, "frozen", N)
    if scheme == "pair":
        return _pair_system(eqs, steady, chans)
    raise ValueError(f"unknown scheme {scheme!r}")


def _pair_system(eqs, steady, chans):
    d, N = eqs.d, eqs.N
    rho1, M = steady.rho1, steady.rho2
    space = eqs.model.space
    I = np.eye(d)
    groups = {}
    for c in chans:
        q = channel_charge(c["V"], space.m_values) if eqs.graded else None
        groups.setdefault(q, []).append(c)
    blocks = []
    emitters = []
    offset = 0
    for q, cs in groups.items():
        red = Reducer(space, q)
        J = eqs.jacobian(M, reducer=red)
        blocks.append(J)
        for c in cs:
            V, Vd = c["V"], c["Vd"]
            v = np.trace(V @ rho1)
            t = ptrace2_left(V, M, d)
            X = (np.kron(V, I) + np.kron(I, V)) @ M - N * v * M
            if N > 2:
                X = X + (N - 2) * (v * M + kron2(t, rho1) + kron2(rho1, t) - 2 * v * kron2(rho1, rho1))
            x0 = red.compress(X)
            # readout N Tr(V^+ Tr_2 X) as a functional on reduced coordinates
            E = red.expand(np.eye(red.size))
            a = N * np.einsum("ab,kba->k", Vd, ptrace2(E, d))
            emitters.append((offset, red.size, Emitter(c["label"], c["rate"], 0.0, x0, a, None, v)))
        offset += red.size
    n = offset
    A = np.zeros((n, n), dtype=complex)
    pos = 0
    for B in blocks:
        A[pos:pos + len(B), pos:pos + len(B)] = B
        pos += len(B)
    out = []
    for off, size, e in emitters:
        x0 = np.zeros(n, dtype=complex)
        a = np.zeros(n, dtype=complex)
        x0[off:off + size] = e.x0
        a[off:off + size] = e.readout
        out.append(Emitter(e.label, e.rate, e.frequency, x0, a, None, e.mean))
    return QRTSystem(A, out, "pair", N, info=dict(blocks=[len(b) for b in blocks]))


# -- spectrum --------------------------------------------------------------------------

def auto_grid(poles, weights, n=4001, margin=6.0):
    sig = _significant(poles, weights)
    if not np.any(sig):
        return np.linspace(-1, 1, n)
    p = poles[sig]
    lo = np.min(p.imag - margin * np.abs(p.real))
    hi = np.max(p.imag + margin * np.abs(p.real))
    span = max(hi - lo, 1e-12)
    return np.linspace(lo - 0.05 * span, hi + 0.05 * span, n)


def _significant(poles, weights, rel=1e-9):
    h = np.abs(weights) / np.maximum(np.abs(poles.real), 1e-300)
    return h > rel * (np.max(h) if h.size else 0)


def compute_spectrum(qrt: QRTSystem, omega=None, zero_tol=1e-12, peaks=True) -> SpectrumResult:
    """Pole decomposition of the emission spectrum, sampled on ``omega``."""
    poles, weights = [], []
    c0_same = c0_total = 0.0
    coherent = 0.0
    for e in qrt.emitters:
        ev, w = qrt.modes(e)
        poles.append(ev)
        weights.append(w)
        c0_total += float(np.real(np.sum(w)))
        if e.readout_same is not None:
            c0_same += float(np.real(e.rate * e.readout_same @ e.x0))
        coherent += e.rate * qrt.N**2 * abs(e.mean) ** 2
    poles = np.concatenate(poles) if poles else np.zeros(0, complex)
    weights = np.concatenate(weights) if weights else np.zeros(0, complex)
    # stationary (zero) modes carry no fluctuation weight after the mean subtraction
    scale = max(np.max(np.abs(poles)) if poles.size else 1.0, 1e-300)
    zero = np.abs(poles) < zero_tol * scale
    if np.any(zero) and np.max(np.abs(weights[zero]), initial=0) > 1e-8 * max(np.max(np.abs(weights)), 1e-300):
        log.warning("stationary mode carries spectral weight")
    keep = ~zero & (np.abs(weights) > 0)
    poles, weights = poles[keep], weights[keep]
    unstable = poles.real > 1e-9 * scale
    if np.any(unstable & _significant(poles, weights)):
        warnings.warn("growing mode in the regression system; spectrum is not stationary")
    if omega is None:
        omega = auto_grid(poles, weights)
    omega = np.asarray(omega, dtype=float)
    S = lorentzian_sum(omega, poles, weights)
    info = dict(scheme=qrt.scheme, c0=c0_total, condition=qrt.info.get("condition"))
    if qrt.scheme == "frozen":
        info.update(c0_same=c0_same, c0_cross=c0_total - c0_same)
    res = SpectrumResult(poles, weights, omega, S, coherent=coherent, info=info)
    if peaks:
        res.peaks = extract_peaks(res)
    return res


def parseval_integral(result: SpectrumResult, limit=2000):
    """int S dw by adaptive quadrature over the real line."""
    from scipy.integrate import quad
    f = lambda w: float(result.evaluate(np.array([w]))[0])
    pts = sorted(set(np.round(result.poles.imag, 12)))
    total = 0.0
    edges = [-np.inf] + list(pts) + [np.inf]
    for a, b in zip(edges[:-1], edges[1:]):
        val, _ = quad(f, a, b, limit=limit)
        total += val
    return total


def extract_peaks(result: SpectrumResult, rel=1e-6) -> list[Peak]:
    """Peaks from the pole decomposition; overlapping poles are merged into one peak.

    The height is the spectrum evaluated at the pole centre; FWHM is 2|Re pole| of
    the strongest pole in the cluster, with a half-maximum scan of the sampled
    grid stored as ``grid_fwhm``.
    """
    poles, weights = result.poles, result.weights
    if poles.size == 0:
        return []
    height = NORM * np.real(weights) / np.maximum(np.abs(poles.real), 1e-300)
    amp = np.abs(weights) / np.maximum(np.abs(poles.real), 1e-300)
    sig = np.flatnonzero(amp > rel * amp.max())
    order = sig[np.argsort(poles[sig].imag)]
    clusters = []
    for k in order:
        if clusters:
            j = clusters[-1][-1]
            gap = poles[k].imag - poles[j].imag
            if gap < abs(poles[k].real) + abs(poles[j].real) + 1e-12 * max(1, abs(poles[k].imag)):
                clusters[-1].append(k)
                continue
        clusters.append([k])
    peaks = []
    for cl in clusters:
        main = cl[int(np.argmax(height[cl]))]
        center = float(poles[main].imag)
        h = float(result.evaluate(np.array([center]))[0])
        if h <= 0:
            continue
        pk = Peak(center, h, 2 * abs(float(poles[main].real)), merged=len(cl) > 1,
                  poles=tuple(poles[cl]), weight=float(np.real(np.sum(weights[cl]))))
        pk.grid_fwhm = _half_max_width(result.omega, result.S, center)
        peaks.append(pk)
    if peaks:
        best = int(np.argmax([p.height for p in peaks]))
        peaks[best].dominant = True
        dw = np.min(np.diff(result.omega)) if result.omega.size > 1 else np.inf
        narrow = min(p.fwhm for p in peaks)
        if narrow < 2 * dw:
            warnings.warn(f"grid spacing {dw:.3g} does not resolve FWHM {narrow:.3g}", CoarseGridWarning)
            result.info["coarse_grid"] = True
    return peaks


def _half_max_width(omega, S, center):
    if omega.size < 3 or not omega[0] < center < omega[-1]:
        return np.nan
    k = int(np.argmin(np.abs(omega - center)))
    # climb to the local maximum
    while 0 < k < len(S) - 1 and max(S[k - 1], S[k + 1]) > S[k]:
        k = k - 1 if S[k - 1] > S[k + 1] else k + 1
    half = S[k] / 2
    i = k
    while i > 0 and S[i] > half:
        i -= 1
    j = k
    while j < len(S) - 1 and S[j] > half:
        j += 1
    if S[i] > half or S[j] > half:
        return np.nan
    left = np.interp(half, [S[i], S[i + 1]], [omega[i], omega[i + 1]])
    right = np.interp(half, [S[j], S[j - 1]], [omega[j], omega[j - 1]])
    return float(right - left)


def steady_spectrum(model, steady=None, omega=None, scheme="frozen", **kw) -> SpectrumResult:
    from .cumulant import build_moment_system, evolve_to_steady
    eqs = build_moment_system(model)
    if steady is None:
        steady = evolve_to_steady(eqs, **kw)
    return compute_spectrum(linearized_qrt_system(eqs, steady, scheme), omega)
