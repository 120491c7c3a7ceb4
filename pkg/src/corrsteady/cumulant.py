"""Second-order cumulant closure for N identical atoms with collective jump operators.

The closed state is the two-atom reduced density matrix ``rho2`` (a ``d^2 x d^2``
matrix, sites ordered ``(1, 2)``); ``rho1 = Tr_2 rho2``.  Permutation symmetry
of identical atoms means one pair matrix describes every pair.  For a
collective channel ``J = sum_i V_i`` the two-atom equation reads::

    d rho12/dt |_J = r D[V1 + V2] rho12
                     + r (N-2)/2 sum_{a=1,2} ([V_a, Tr_3 V3^+ rho123] + [Tr_3 V3 rho123, V_a^+])

and the three-atom matrix is closed with vanishing third-order cumulant,
``rho123 ~ rho12 rho3 + rho13 rho2 + rho23 rho1 - 2 rho1 rho2 rho3``.
Moments are linear in the density matrices, so this is the same closure as
``<XYZ> ~ <XY><Z> + <XZ><Y> + <YZ><X> - 2<X><Y><Z>`` on operator moments.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .models import ModelSpec
from .spin import SpinSpace

log = logging.getLogger(__name__)


def ptrace2(M, d):
    """Trace out the second site of a (..., d^2, d^2) operator."""
    M4 = M.reshape(M.shape[:-2] + (d, d, d, d))
    return np.einsum("...abcb->...ac", M4)


def ptrace1(M, d):
    M4 = M.reshape(M.shape[:-2] + (d, d, d, d))
    return np.einsum("...abad->...bd", M4)


def ptrace2_left(B, M, d):
    """Tr_2[(1 x B) M] as an operator on site 1."""
    M4 = M.reshape(M.shape[:-2] + (d, d, d, d))
    return np.einsum("xb,...abcx->...ac", B, M4)


def kron2(A, B):
    """Batched Kronecker product of (..., d, d) operators."""
    d = A.shape[-1]
    out = np.einsum("...ac,...bd->...abcd", A, B)
    return out.reshape(out.shape[:-4] + (d * d, d * d))


def swap_matrix(d):
    P = np.zeros((d * d, d * d))
    for a in range(d):
        for b in range(d):
            P[b * d + a, a * d + b] = 1
    return P


def _dissipator(L, Ld, LdL, M, rate):
    return rate * (L @ M @ Ld - 0.5 * (LdL @ M + M @ LdL))


def channel_charge(op, m_values, tol=1e-12):
    """Common value of m_row - m_col over the nonzero elements, or None if mixed."""
    r, c = np.nonzero(np.abs(op) > tol)
    if len(r) == 0:
        return 0.0
    dm = m_values[r] - m_values[c]
    return float(dm[0]) if np.allclose(dm, dm[0]) else None


class Reducer:
    """Coordinates for swap-symmetric pair matrices, optionally restricted to one charge sector.

    A pair element ``M[(m1 m2), (n1 n2)]`` carries charge ``m1 + m2 - n1 - n2``.
    """

    def __init__(self, space: SpinSpace, charge=None):
        d = space.d
        D = d * d
        m = space.m_values
        msum = (m[:, None] + m[None, :]).ravel()
        ch = msum[:, None] - msum[None, :]
        allowed = np.ones((D, D), bool) if charge is None else np.isclose(ch, charge)
        perm = np.array([(k % d) * d + k // d for k in range(D)])
        flat = np.flatnonzero(allowed.ravel())
        orbit = {}
        reps = []
        orbit_of = np.empty(len(flat), dtype=int)
        for n, f in enumerate(flat):
            i, j = divmod(int(f), D)
            key = min(f, perm[i] * D + perm[j])
            if key not in orbit:
                orbit[key] = len(reps)
                reps.append(key)
            orbit_of[n] = orbit[key]
        self.d, self.D, self.charge = d, D, charge
        self.flat = flat
        self.orbit_of = orbit_of
        self.reps = np.array(reps, dtype=int)
        self.size = len(reps)
        self.mult = np.bincount(orbit_of, minlength=self.size)
        diag = np.flatnonzero(np.isin(self.reps, np.arange(D) * (D + 1)))
        self.diag_orbits = diag
        # trace functional in reduced coordinates
        self.trace_weights = np.zeros(self.size)
        self.trace_weights[diag] = self.mult[diag]

    def expand(self, x):
        x = np.asarray(x)
        out = np.zeros(x.shape[:-1] + (self.D * self.D,), dtype=complex)
        out[..., self.flat] = x[..., self.orbit_of]
        return out.reshape(x.shape[:-1] + (self.D, self.D))

    def compress(self, M):
        return M.reshape(M.shape[:-2] + (self.D * self.D,))[..., self.reps]


class MomentEquations:
    """Generated right-hand side of the closed moment system for one model.

    Immutable after construction.  ``rhs`` and ``jvp`` act on full pair matrices;
    ``linear_matrix`` and ``jacobian`` give coefficient matrices in reduced coordinates.
    """

    def __init__(self, model: ModelSpec):
        if model.N < 2:
            raise ValueError("need N >= 2")
        d = model.d
        for ch in model.channels:
            if ch.op.shape != (d, d):
                raise ValueError(f"channel {ch.label!r} does not act on a {d}-level atom")
        self.model = model
        self.d = d
        self.D = d * d
        I = np.eye(d)
        self.N = float(model.N)
        H = np.diag(model.zeeman).astype(complex)
        self.H2 = np.kron(H, I) + np.kron(I, H)
        self.local = []
        for ch in model.local:
            for L in (np.kron(ch.op, I), np.kron(I, ch.op)):
                Ld = L.conj().T
                self.local.append((L, Ld, Ld @ L, ch.rate))
        self.collective = []
        for ch in model.collective:
            V = np.asarray(ch.op, dtype=complex)
            V1, V2 = np.kron(V, I), np.kron(I, V)
            V12 = V1 + V2
            self.collective.append(dict(
                rate=ch.rate, V=V, Vd=V.conj().T, V1=V1, V2=V2, V1d=V1.conj().T, V2d=V2.conj().T,
                V12=V12, V12d=V12.conj().T, V12dV12=V12.conj().T @ V12, label=ch.label))
        charges = [channel_charge(ch.op, model.space.m_values) for ch in model.channels]
        self.graded = all(c is not None for c in charges)
        self.metadata = [dict(label=ch.label, rate=ch.rate, collective=ch.collective,
                              frequency=ch.frequency, charge=q) for ch, q in zip(model.channels, charges)]
        self.reducer = Reducer(model.space, 0.0 if self.graded else None)
        self._lin = None

    @property
    def rate_scale(self):
        return self.model.rate_scale()

    # -- right-hand side ---------------------------------------------------------------
    def linear(self, M):
        out = -1j * (self.H2 @ M - M @ self.H2)
        for L, Ld, LdL, r in self.local:
            out = out + _dissipator(L, Ld, LdL, M, r)
        for c in self.collective:
            out = out + _dissipator(c["V12"], c["V12d"], c["V12dV12"], M, c["rate"])
        return out

    def _commutators(self, c, sigma, tau):
        V1, V2, V1d, V2d = c["V1"], c["V2"], c["V1d"], c["V2d"]
        Va = V1 + V2
        Vad = V1d + V2d
        return (Va @ sigma - sigma @ Va) + (tau @ Vad - Vad @ tau)

    def nonlinear(self, M):
        if self.N == 2 or not self.collective:
            return np.zeros_like(M)
        d = self.d
        r1 = ptrace2(M, d)
        r11 = kron2(r1, r1)
        out = np.zeros_like(M)
        for c in self.collective:
            pre = c["rate"] * (self.N - 2) / 2
            parts = []
            for B in (c["Vd"], c["V"]):
                v = np.einsum("ab,...ba->...", B, r1)[..., None, None]
                s = ptrace2_left(B, M, d)
                parts.append(v * M + kron2(s, r1) + kron2(r1, s) - 2 * v * r11)
            out = out + pre * self._commutators(c, *parts)
        return out

    def nonlinear_jvp(self, M, dM):
        if self.N == 2 or not self.collective:
            return np.zeros(np.broadcast_shapes(M.shape, dM.shape), dtype=complex)
        d = self.d
        r1, dr1 = ptrace2(M, d), ptrace2(dM, d)
        r11 = kron2(r1, r1)
        dr11 = kron2(dr1, r1) + kron2(r1, dr1)
        out = 0
        for c in self.collective:
            pre = c["rate"] * (self.N - 2) / 2
            parts = []
            for B in (c["Vd"], c["V"]):
                v = np.einsum("ab,ba->", B, r1)
                dv = np.einsum("ab,...ba->...", B, dr1)[..., None, None]
                s = ptrace2_left(B, M, d)
                ds = ptrace2_left(B, dM, d)
                parts.append(dv * M + v * dM + kron2(ds, r1) + kron2(s, dr1) + kron2(dr1, s)
                             + kron2(r1, ds) - 2 * dv * r11 - 2 * v * dr11)
            out = out + pre * self._commutators(c, *parts)
        return out

    def rhs(self, M):
        return self.linear(M) + self.nonlinear(M)

    def jvp(self, M, dM):
        return self.linear(dM) + self.nonlinear_jvp(M, dM)

    # -- reduced coordinates -----------------------------------------------------------
    def jacobian(self, M, reducer=None, batch=256):
        """Exact Jacobian of the closed right-hand side at ``M`` in reduced coordinates."""
        red = reducer or self.reducer
        n = red.size
        J = self._linear_cached(red).copy()
        if self.N == 2 or not self.collective:
            return J
        for start in range(0, n, batch):
            stop = min(n, start + batch)
            E = np.zeros((stop - start, n))
            E[np.arange(stop - start), np.arange(start, stop)] = 1
            J[:, start:stop] += red.compress(self.nonlinear_jvp(M, red.expand(E))).T
        return J

    def _linear_cached(self, red):
        key = (red.size, red.charge)
        if self._lin is None:
            self._lin = {}
        if key not in self._lin:
            self._lin[key] = self.linear_matrix(red)
        return self._lin[key]

    def fd_jacobian(self, M, reducer=None, h=1e-7):
        """Finite-difference Jacobian (the right-hand side is holomorphic in the entries)."""
        red = reducer or self.reducer
        x0 = red.compress(M)
        f0 = red.compress(self.rhs(M))
        J = np.empty((red.size, red.size), dtype=complex)
        for k in range(red.size):
            x = x0.copy()
            x[k] += h
            J[:, k] = (red.compress(self.rhs(red.expand(x))) - f0) / h
        return J

    def linear_matrix(self, reducer=None, batch=256):
        """Coefficients of the terms linear in the pair matrix (reduced coordinates).

        The remaining closure terms are polynomial (up to cubic) in the pair matrix
        and are evaluated on demand by ``nonlinear`` / ``nonlinear_jvp``.
        """
        red = reducer or self.reducer
        n = red.size
        out = np.empty((n, n), dtype=complex)
        for start in range(0, n, batch):
            stop = min(n, start + batch)
            E = np.zeros((stop - start, n))
            E[np.arange(stop - start), np.arange(start, stop)] = 1
            out[:, start:stop] = red.compress(self.linear(red.expand(E))).T
        return out


@dataclass
class MomentState:
    rho1: np.ndarray
    rho2: np.ndarray
    residual: float = np.nan
    converged: bool = False
    status: str = "UNSOLVED"
    info: dict = field(default_factory=dict)

    @property
    def d(self):
        return self.rho1.shape[0]

    @property
    def single(self):
        """Moments <|m><n|> ordered by (m, n)."""
        return self.rho1.T.ravel()

    @property
    def pair(self):
        """Moments <|m><n|_1 |p><q|_2> as a (d^2, d^2) matrix indexed by (m n), (p q)."""
        d = self.d
        R = self.rho2.reshape(d, d, d, d)  # [m1, p1 ... ] = rho[(a b), (c e)]
        # <|m><n|_1 |p><q|_2> = rho2[(n q), (m p)]
        return np.einsum("nqmp->mnpq", R).reshape(d * d, d * d)

    @classmethod
    def product(cls, rho1):
        rho1 = np.asarray(rho1, dtype=complex)
        return cls(rho1, np.kron(rho1, rho1))

    @classmethod
    def from_pair(cls, rho2, d, **kw):
        return cls(ptrace2(rho2, d), rho2, **kw)

    def check_invariants(self, tol=1e-9):
        """Largest violation of each structural invariant."""
        d = self.d
        P = swap_matrix(d)
        r2 = self.rho2
        return {
            "trace": abs(np.trace(self.rho1) - 1),
            "hermitian1": float(np.max(np.abs(self.rho1 - self.rho1.conj().T))),
            "hermitian2": float(np.max(np.abs(r2 - r2.conj().T))),
            "swap": float(np.max(np.abs(P @ r2 @ P - r2))),
            "reduced": float(np.max(np.abs(ptrace2(r2, d) - self.rho1))),
        }


def pumped_state(space: SpinSpace):
    rho = np.zeros((space.d, space.d), dtype=complex)
    rho[-1, -1] = 1
    return MomentState.product(rho)


def mixed_state(space: SpinSpace):
    return MomentState.product(np.eye(space.d) / space.d)


def build_moment_system(model: ModelSpec) -> MomentEquations:
    return MomentEquations(model)


class SteadyStateError(RuntimeError):
    pass


def _unstable_modes(eqs, M, scale, tol=1e-7):
    """Eigenpairs of the Jacobian with growth rate above tol * scale (trace mode excluded)."""
    J = eqs.jacobian(M)
    ev, vec = np.linalg.eig(J)
    bad = ev.real > tol * scale
    return ev[bad], vec[:, bad], ev


def _integrate_reduced(eqs, x0, span, growth=None, jac=None):
    """Leave an unstable fixed point: linearized backward-Euler steps of length 1/(2 growth).

    Short implicit steps amplify the growing mode (factor 1/(1 - growth dt) = 2 per
    step) while staying stable for the stiff decaying ones; error-controlled BDF
    works too but is orders of magnitude slower once collective rates reach ~N.
    """
    red = eqs.reducer
    jac = jac or eqs.jacobian
    dt = span / 80 if growth is None else 0.5 / growth
    I = np.eye(red.size)
    x, t = x0, 0.0
    while t < span:
        M = red.expand(x)
        f = red.compress(eqs.rhs(M))
        try:
            x = x + np.linalg.solve(I / dt - jac(M), f)
        except np.linalg.LinAlgError:
            break
        t += dt
    return x


def _min_population(red, x, d):
    r1 = ptrace2(red.expand(x), d)
    return float(np.linalg.eigvalsh(0.5 * (r1 + r1.conj().T))[0])


def _ptc(eqs, x, scale, tol, max_steps, dt, jac, switch, pos_tol=1e-9):
    """Backward-Euler pseudo-transient continuation; stops once the residual drops below ``switch``.

    Steps that make the one-atom state non-positive are rejected: closure systems
    have unphysical fixed points that large implicit steps are otherwise drawn to.
    """
    red = eqs.reducer
    I = np.eye(red.size)
    lo = _min_population(red, x, eqs.d)

    def resid(x):
        return red.compress(eqs.rhs(red.expand(x)))

    f = resid(x)
    res = np.max(np.abs(f)) / scale
    history = [res]
    steps, t = 0, 0.0
    while steps < max_steps and res > switch:
        steps += 1
        J = jac(red.expand(x))
        try:
            dx = np.linalg.solve(I / dt - J, f)
        except np.linalg.LinAlgError:
            dt /= 4
            continue
        xn = x + dx
        fn = resid(xn)
        rn = np.max(np.abs(fn)) / scale
        if not np.all(np.isfinite(fn)) or rn > 10 * res:
            dt /= 4
            continue
        lo_n = _min_population(red, xn, eqs.d)
        if lo_n < -pos_tol and lo_n < lo and dt * scale > 1e-6:
            dt /= 4
            continue
        lo = lo_n
        t += dt
        # grow on every accepted step, faster when the residual falls (SER rule)
        dt *= float(np.clip(res / max(rn, 1e-300), 1.5, 10.0))
        x, f, res = xn, fn, rn
        history.append(res)
    return x, f, res, steps, t, history


def _newton(eqs, x, f, res, scale, tol, jac, max_iter=60, pos_tol=1e-9):
    red = eqs.reducer
    row = int(red.diag_orbits[0])
    history = []
    lo = _min_population(red, x, eqs.d)

    def resid(x):
        return red.compress(eqs.rhs(red.expand(x)))

    for _ in range(max_iter):
        if res <= tol:
            break
        A = jac(red.expand(x))
        b = f.copy()
        A[row] = red.trace_weights
        b[row] = red.trace_weights @ x - 1
        try:
            dx = np.linalg.solve(A, -b)
        except np.linalg.LinAlgError:
            dx = np.linalg.lstsq(A, -b, rcond=None)[0]
        lam = 1.0
        for _ in range(30):
            xn = x + lam * dx
            fn = resid(xn)
            rn = np.max(np.abs(fn)) / scale
            if np.all(np.isfinite(fn)) and (rn < res * (1 - 1e-4 * lam) or rn <= tol):
                lo_n = _min_population(red, xn, eqs.d)
                if lo_n >= -pos_tol or lo_n >= lo:
                    break
            lam /= 2
        else:
            break
        x, f, res, lo = xn, fn, rn, lo_n
        history.append(res)
    return x, f, res, history


def evolve_to_steady(eqs: MomentEquations, init: MomentState | None = None, tol=1e-10,
                     max_steps=400, dt0=None, newton=True, jacobian="analytic",
                     check=True, stability=True, max_restarts=4, kick=1e-3,
                     fallback=True) -> MomentState:
    """Drive the closed system to a stable stationary state.

    Pseudo-transient continuation (backward-Euler steps, step size grown by the
    residual-reduction ratio) followed by damped Newton iterations with the trace
    row replaced by the normalization constraint.  Residuals are measured relative
    to the model's fastest rate.  Large implicit steps behave like Newton and can
    land on an unstable fixed point; with ``stability`` the Jacobian spectrum is
    checked and the search restarts from a small kick along the growing mode.
    With ``fallback``, a search that keeps returning to an unstable point is
    repeated once from the maximally mixed state before UNSTABLE is reported.
    """
    red = eqs.reducer
    d = eqs.d
    scale = eqs.rate_scale
    if init is None:
        init = pumped_state(eqs.model.space)
    if check:
        bad = {k: v for k, v in init.check_invariants().items() if v > 1e-9}
        if bad:
            raise ValueError(f"initial state violates invariants: {bad}")
    jac = eqs.jacobian if jacobian == "analytic" else eqs.fd_jacobian
    x = red.compress(init.rho2.astype(complex))
    dt = dt0 if dt0 is not None else 1.0 / scale
    history, steps, t, restarts = [], 0, 0.0, 0
    info = {}
    while True:
        x, f, res, n, dt_t, h = _ptc(eqs, x, scale, tol, max_steps, dt,
                                      jac, 1e-6 if newton else tol)
        steps += n
        t += dt_t
        history += h
        if newton and res > tol:
            x, f, res, h = _newton(eqs, x, f, res, scale, tol, jac)
            steps += len(h)
            history += h
        if not (stability and res <= tol):
            break
        M = red.expand(x)
        grow, vecs, ev = _unstable_modes(eqs, M, scale)
        info["leading_eigenvalue"] = complex(ev[np.argmax(ev.real)]) if len(ev) else 0j
        if not len(grow):
            break
        if restarts >= max_restarts and fallback and not info.get("fallback_init"):
            # large steps keep falling back into the same point; start elsewhere
            info["fallback_init"] = True
            x = red.compress(mixed_state(eqs.model.space).rho2)
            restarts, dt = 0, 1.0 / scale
            log.info("restarting from the mixed state")
            continue
        if restarts >= max_restarts:
            info["unstable"] = True
            break
        restarts += 1
        k = int(np.argmax(grow.real))
        v = red.expand(vecs[:, k])
        v = v + v.conj().T
        v = v / np.max(np.abs(v))
        # the eigenvector sign is arbitrary; kick towards the side that keeps rho2 positive
        lo = [np.linalg.eigvalsh(0.5 * (K + K.conj().T))[0] for K in (M + kick * v, M - kick * v)]
        if lo[1] > lo[0]:
            v = -v
        log.info("unstable fixed point (growth %.3e), restarting", grow[k].real)
        # implicit steps longer than 2/growth damp the growing mode spuriously,
        # so leave the fixed point with short steps first
        span = 40.0 / grow[k].real
        x = _integrate_reduced(eqs, red.compress(M + kick * v), span, grow[k].real, jac)
        t += span
        dt = 1.0 / scale
    if res <= tol and not info.get("unstable"):
        status = "CONVERGED"
    elif res <= tol:
        status = "UNSTABLE"
    else:
        status = "FAILED_STATIONARY"
    M = red.expand(x)
    M = 0.5 * (M + M.conj().T)
    state = MomentState.from_pair(M, d, residual=float(res), converged=status == "CONVERGED",
                                  status=status)
    state.info = dict(info, steps=steps, time=t, history=history, restarts=restarts)
    if status == "FAILED_STATIONARY":
        ev = np.linalg.eigvals(eqs.jacobian(M))
        osc = ev[np.abs(ev.imag) > 0]
        if len(osc):
            lead = osc[np.argmax(osc.real)]
            state.info["oscillation_period"] = 2 * np.pi / abs(lead.imag)
        log.warning("steady state not certified: residual %.3e", res)
    return state


def steady_state(model: ModelSpec, init=None, **kw) -> MomentState:
    return evolve_to_steady(build_moment_system(model), init, **kw)


def integrate(eqs: MomentEquations, init: MomentState, t_eval, rtol=1e-9, atol=1e-12):
    """Time-resolved trajectory (full pair matrices) for diagnostics and invariant checks."""
    from scipy.integrate import solve_ivp
    red = eqs.reducer
    x0 = red.compress(init.rho2.astype(complex))

    def f(t, x):
        return red.compress(eqs.rhs(red.expand(x)))

    def jac(t, x):
        return eqs.jacobian(red.expand(x))

    sol = solve_ivp(f, (t_eval[0], t_eval[-1]), x0, method="BDF", jac=jac, t_eval=t_eval,
                    rtol=rtol, atol=atol)
    return [MomentState.from_pair(red.expand(x), eqs.d) for x in sol.y.T]


def observables(state: MomentState, space: SpinSpace, norm="fro"):
    """Polarization <F0>/F, level populations (m = -F..F) and the pair-correlation norm."""
    pops = np.real(np.diag(state.rho1))
    pol = float(np.dot(space.m_values, pops) / space.F)
    tau = state.rho2 - np.kron(state.rho1, state.rho1)
    if norm == "fro":
        tn = float(np.linalg.norm(tau))
    elif norm == "spectral":
        tn = float(np.linalg.norm(tau, 2))
    else:
        raise ValueError(f"unknown norm {norm!r}")
    return dict(polarization=pol, populations=pops, tau2_norm=tn)


def positivity(state: MomentState):
    """Smallest eigenvalues of rho1 and rho2 (closure may produce slight negativity)."""
    return (float(np.min(sla.eigvalsh(0.5 * (state.rho1 + state.rho1.conj().T)))),
            float(np.min(sla.eigvalsh(0.5 * (state.rho2 + state.rho2.conj().T)))))
