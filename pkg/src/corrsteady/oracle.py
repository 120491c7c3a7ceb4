"""Exact Lindblad dynamics of small ensembles (brute-force Liouvillian)."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import reduce

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .models import ModelSpec

log = logging.getLogger(__name__)

DEFAULT_CAP = 100


class OracleSizeError(ValueError):
    pass


@dataclass
class DensityOperator:
    N: int
    d: int
    rho: np.ndarray
    degeneracy: int = 1
    residual: float = 0.0

    def check(self, tol=1e-10):
        ev = np.linalg.eigvalsh(0.5 * (self.rho + self.rho.conj().T))
        return {
            "trace": abs(np.trace(self.rho) - 1),
            "hermitian": float(np.max(np.abs(self.rho - self.rho.conj().T))),
            "min_eig": float(ev.min()),
        }


def site_operator(op, k, N, d):
    """Operator ``op`` acting on site ``k`` of ``N`` sites (site 0 is the most significant factor)."""
    ops = [sp.identity(d, format="csr", dtype=complex)] * N
    ops = list(ops)
    ops[k] = sp.csr_matrix(op)
    return reduce(lambda a, b: sp.kron(a, b, format="csr"), ops)


def _n_sites(model, N):
    N = int(round(model.N if N is None else N))
    if N < 1:
        raise ValueError("need at least one atom")
    return N


def hamiltonian(model: ModelSpec, N=None):
    N = _n_sites(model, N)
    H = np.diag(model.zeeman).astype(complex)
    return sum(site_operator(H, k, N, model.d) for k in range(N))


def jump_operators(model: ModelSpec, N=None):
    """(rate, operator) for every Lindblad term of the N-atom master equation."""
    N = _n_sites(model, N)
    out = []
    for ch in model.channels:
        ops = [site_operator(ch.op, k, N, model.d) for k in range(N)]
        if ch.collective:
            out.append((ch.rate, sum(ops)))
        else:
            out += [(ch.rate, o) for o in ops]
    return out


def liouvillian(model: ModelSpec, N=None, cap=DEFAULT_CAP, allow_large=False):
    """Sparse superoperator acting on column-stacked density matrices."""
    N = _n_sites(model, N)
    dim = model.d ** N
    if dim > cap and not allow_large:
        raise OracleSizeError(f"Hilbert dimension {dim} exceeds cap {cap}")
    I = sp.identity(dim, format="csr", dtype=complex)
    H = hamiltonian(model, N)
    # vec(A X B) = (B^T kron A) vec(X)
    L = -1j * (sp.kron(I, H) - sp.kron(H.T, I))
    for r, J in jump_operators(model, N):
        JdJ = (J.conj().T @ J).tocsr()
        L = L + r * (sp.kron(J.conj(), J) - 0.5 * sp.kron(I, JdJ) - 0.5 * sp.kron(JdJ.T, I))
    return L.tocsr(), dim


def _vec(rho):
    return rho.reshape(-1, order="F")


def _unvec(v, dim):
    return v.reshape(dim, dim, order="F")


def exact_steady(model: ModelSpec, N=None, cap=DEFAULT_CAP, allow_large=False,
                 degeneracy_tol=1e-9) -> DensityOperator:
    """Trace-normalized null vector of the Liouvillian."""
    N = _n_sites(model, N)
    L, dim = liouvillian(model, N, cap, allow_large)
    scale = max(abs(L).max(), 1e-300)
    if dim * dim <= 1600:
        _, s, vh = np.linalg.svd(L.toarray())
        null = vh[-1].conj()
        deg = int(np.sum(s < degeneracy_tol * scale))
        if deg > 1:
            log.warning("steady manifold has dimension %d", deg)
    else:
        # replace one equation by the trace condition and solve directly
        tr = _vec(np.eye(dim)).astype(complex)
        A = L.tolil()
        A[0, :] = tr
        b = np.zeros(dim * dim, dtype=complex)
        b[0] = 1
        null = spla.spsolve(A.tocsc(), b)
        deg = 1
    rho = _unvec(null, dim)
    rho = rho / np.trace(rho)
    rho = 0.5 * (rho + rho.conj().T)
    res = float(np.max(np.abs(L @ _vec(rho)))) / scale
    return DensityOperator(N, model.d, rho, deg, res)


def reduced_density(state: DensityOperator, k: int) -> np.ndarray:
    """Density matrix of the first k sites."""
    N, d = state.N, state.d
    if not 0 < k <= N:
        raise ValueError("k must lie in 1..N")
    dk, drest = d**k, d ** (N - k)
    R = state.rho.reshape(dk, drest, dk, drest)
    return np.einsum("arbr->ab", R)


def swap_operator(N, d, i, j):
    dim = d**N
    idx = np.arange(dim)
    digits = np.array(np.unravel_index(idx, (d,) * N))
    digits[[i, j]] = digits[[j, i]]
    perm = np.ravel_multi_index(tuple(digits), (d,) * N)
    P = np.zeros((dim, dim))
    P[perm, idx] = 1
    return P


def liouvillian_eigenvalues(model: ModelSpec, N=None, cap=DEFAULT_CAP, allow_large=False):
    L, _ = liouvillian(model, N, cap, allow_large)
    return np.linalg.eigvals(L.toarray())


class Eigensystem:
    """Eigendecomposition of a dense Liouvillian, with a conditioning flag."""

    def __init__(self, L, cond_max=1e10):
        self.L = L.toarray() if sp.issparse(L) else np.asarray(L)
        self.ev, self.R = np.linalg.eig(self.L)
        self.cond = float(np.linalg.cond(self.R))
        self.ok = self.cond < cond_max

    def modes(self, a, x0):
        """Poles and weights of a.exp(L tau) x0."""
        c = np.linalg.solve(self.R, x0)
        return self.ev, (a @ self.R) * c

    def resolvent(self, a, x0, omega):
        I = np.eye(self.L.shape[0])
        return np.array([a @ np.linalg.solve(1j * om * I - self.L, x0) for om in omega])


def correlation_modes(model: ModelSpec, A, B, state: DensityOperator | None = None, N=None,
                      cap=DEFAULT_CAP, allow_large=False):
    """Poles and weights of C(tau) = <A^dag(tau) B(0)> = Tr[A^dag e^{L tau}(B rho)]."""
    N = _n_sites(model, N)
    if state is None:
        state = exact_steady(model, N, cap, allow_large)
    L, _ = liouvillian(model, N, cap, allow_large)
    es = Eigensystem(L)
    return es.modes(_observable(A), _vec(_dense(B) @ state.rho))


def _dense(A):
    return A.toarray() if sp.issparse(A) else np.asarray(A)


def _observable(A):
    # Tr[A^dag X] = sum_ij conj(A_ij) X_ij
    return _vec(_dense(A).conj())


def collective_operator(model: ModelSpec, op, N=None):
    N = _n_sites(model, N)
    return sum(site_operator(op, k, N, model.d) for k in range(N)).toarray()


def exact_spectrum(model: ModelSpec, omega, state: DensityOperator | None = None, N=None,
                   channels=None, cap=DEFAULT_CAP, allow_large=False):
    """Spectrum of the collective channels, sum_c r_c F[<J_c^dag(tau) J_c(0)>](omega).

    Uses the Liouvillian eigendecomposition; falls back to the resolvent
    ``Re a.(i omega - L)^{-1} x0`` on every grid point for defective Liouvillians.
    Returns a ``SpectrumResult`` with the same conventions as the moment-based spectrum.
    """
    from .spectrum import SpectrumResult, lorentzian_sum, extract_peaks

    N = _n_sites(model, N)
    omega = np.asarray(omega, dtype=float)
    if state is None:
        state = exact_steady(model, N, cap, allow_large)
    chans = model.collective if channels is None else channels
    L, dim = liouvillian(model, N, cap, allow_large)
    es = Eigensystem(L)
    poles, weights = [], []
    S = np.zeros_like(omega)
    coherent = 0.0
    for ch in chans:
        J = collective_operator(model, ch.op, N)
        mean = np.trace(J @ state.rho)
        # subtract the coherent part so the spectrum is the fluctuation spectrum
        x0 = _vec(J @ state.rho) - mean * _vec(state.rho)
        a = _observable(J)
        coherent += ch.rate * abs(mean) ** 2
        if es.ok:
            ev, w = es.modes(a, x0)
            w = ch.rate * w
            keep = np.abs(w) > 1e-14 * max(np.max(np.abs(w)), 1e-300)
            poles += list(ev[keep])
            weights += list(w[keep])
        else:
            S += ch.rate * np.sqrt(2 / np.pi) * np.real(es.resolvent(a, x0, omega))
    poles = np.array(poles, dtype=complex)
    weights = np.array(weights, dtype=complex)
    if len(poles):
        S = S + lorentzian_sum(omega, poles, weights)
    res = SpectrumResult(poles, weights, omega, S, coherent=coherent,
                         info=dict(exact_modes=es.ok, condition=es.cond, source="oracle"))
    res.peaks = extract_peaks(res)
    return res
