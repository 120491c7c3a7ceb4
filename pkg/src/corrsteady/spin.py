"""Single-atom operators: ladder matrices, polarizability tensors, jump operators.

Basis ordering is ``m = -F, ..., +F`` (index ``k`` holds ``m = -F + k``).  The
quantization axis is the direction of atomic polarization (lab ``x``), so
``F0 = F_x`` and ``F^+- = F_y +- i F_z``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

MAX_SPIN = 4.5


@dataclass(frozen=True)
class SpinSpace:
    F: float
    max_spin: float = MAX_SPIN

    def __post_init__(self):
        twice = 2 * self.F
        if self.F <= 0 or abs(twice - round(twice)) > 1e-12:
            raise ValueError(f"F must be a positive half-integer, got {self.F}")
        if self.F > self.max_spin:
            raise ValueError(f"F={self.F} exceeds the configured bound {self.max_spin}")
        object.__setattr__(self, "F", round(twice) / 2)

    @property
    def d(self) -> int:
        return int(round(2 * self.F)) + 1

    @property
    def m_values(self) -> np.ndarray:
        return -self.F + np.arange(self.d)


class SpinMatrices(NamedTuple):
    plus: np.ndarray
    minus: np.ndarray
    zero: np.ndarray
    sq: np.ndarray

    def cartesian(self):
        """(F_x, F_y, F_z) with x along the quantization axis."""
        fy = (self.plus + self.minus) / 2
        fz = (self.plus - self.minus) / 2j
        return self.zero, fy, fz


def spin_matrices(space: SpinSpace) -> SpinMatrices:
    m = space.m_values
    F = space.F
    plus = np.zeros((space.d, space.d), dtype=complex)
    for k in range(space.d - 1):
        plus[k + 1, k] = np.sqrt(F * (F + 1) - m[k] * (m[k] + 1))
    zero = np.diag(m).astype(complex)
    sq = F * (F + 1) * np.eye(space.d, dtype=complex)
    return SpinMatrices(plus, plus.conj().T.copy(), zero, sq)


@dataclass(frozen=True)
class PolarizabilitySet:
    s0: float = 0.0
    s1: float = 1.0
    s2: float = 0.0

    @property
    def epsilon(self) -> float:
        if self.s1 == 0:
            raise ValueError("epsilon is undefined for s1 = 0")
        return float(np.sqrt(2) * abs(self.s2 / self.s1))

    @classmethod
    def from_epsilon(cls, epsilon: float, s1: float = 1.0, s0: float = 0.0, sign: int = -1):
        """Coefficients with |s2/s1| = epsilon/sqrt(2).

        ``sign`` is the sign of s2/s1.  The default -1 makes the vector and W1 parts
        of ``full_jump_q`` reproduce the transition-rate pattern of ``simplified_v``
        at the same theta; +1 mirrors it (theta -> pi/2 - theta).
        """
        if sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        return cls(s0=s0, s1=s1, s2=sign * epsilon * s1 / np.sqrt(2))


def w1_operator(space: SpinSpace) -> np.ndarray:
    """(F0 + 1/2) F- + (F0 - 1/2) F+, the Delta m = +-1 part of the tensor coupling."""
    S = spin_matrices(space)
    one = np.eye(space.d)
    return (S.zero + one / 2) @ S.minus + (S.zero - one / 2) @ S.plus


def w2_operator(space: SpinSpace) -> np.ndarray:
    S = spin_matrices(space)
    return 3 * S.zero @ S.zero - S.sq + S.minus @ S.minus + S.plus @ S.plus


def full_jump_q(space: SpinSpace, pol: PolarizabilitySet, theta: float) -> np.ndarray:
    """Single-atom jump operator for forward scattering into the orthogonal polarization."""
    S = spin_matrices(space)
    vec = 0.5j * pol.s1 * (S.minus - S.plus)
    ten = 1j * np.cos(2 * theta) / np.sqrt(2) * w1_operator(space)
    ten = ten + np.sin(2 * theta) / 4 * w2_operator(space)
    return vec - pol.s2 * ten


def polarizability_tensor(space: SpinSpace, k: int) -> np.ndarray:
    """Rank-k polarizability operator as a (3, 3, d, d) array over Cartesian x, y, z."""
    fx, fy, fz = spin_matrices(space).cartesian()
    F = (fx, fy, fz)
    d = space.d
    one = np.eye(d, dtype=complex)
    T = np.zeros((3, 3, d, d), dtype=complex)
    # (F x)_{ab} = eps_{acb} F_c
    cross = np.zeros_like(T)
    for a in range(3):
        for b in range(3):
            for c in range(3):
                e = _levi_civita(a, c, b)
                if e:
                    cross[a, b] += e * F[c]
    if k == 0:
        for a in range(3):
            T[a, a] = -one / np.sqrt(3)
    elif k == 1:
        T = 1j / np.sqrt(2) * cross
    elif k == 2:
        fsq = fx @ fx + fy @ fy + fz @ fz
        for a in range(3):
            for b in range(3):
                T[a, b] = 2 * F[a] @ F[b] + 1j * cross[a, b]
                if a == b:
                    T[a, b] -= 2 / 3 * fsq
        T = T / 2
    else:
        raise ValueError("k must be 0, 1 or 2")
    return T


def _levi_civita(a, b, c):
    return int(np.sign((b - a) * (c - a) * (c - b))) if len({a, b, c}) == 3 else 0


def polarization_vectors(theta: float) -> dict[str, np.ndarray]:
    c, s = np.cos(theta), np.sin(theta)
    return {
        "c": np.array([c, s, 0.0]),
        "q": np.array([-s, c, 0.0]),
        "z": np.array([0.0, 0.0, 1.0]),
    }


def tensor_jump(space: SpinSpace, pol: PolarizabilitySet, theta: float, mu: str = "q") -> np.ndarray:
    """Direct construction sum_k s_k e_mu^T T^(k) e_c."""
    e = polarization_vectors(theta)
    out = np.zeros((space.d, space.d), dtype=complex)
    for k, s in enumerate((pol.s0, pol.s1, pol.s2)):
        if s:
            T = polarizability_tensor(space, k)
            out += s * np.einsum("a,abij,b->ij", e[mu], T, e["c"])
    return out


def simplified_v(space: SpinSpace, s1: float, epsilon: float, theta: float, sign: int) -> np.ndarray:
    """V^+ (sign=+1) or V^- (sign=-1) of the F=1 model without the W2 terms."""
    if space.d != 3:
        raise ValueError("the simplified jump operators are defined for F=1 only")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    S = spin_matrices(space)
    ladder = S.plus if sign == 1 else S.minus
    one = np.eye(3)
    return s1 * (one + epsilon * np.cos(2 * theta) * (-sign * S.zero + one / 2)) @ ladder


@dataclass(frozen=True, eq=False)
class JumpChannel:
    op: np.ndarray
    rate: float
    collective: bool = False
    frequency: float = 0.0
    label: str = ""
    merged: bool = False

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError(f"negative rate {self.rate} on channel {self.label!r}")

    def scaled(self, rate):
        return JumpChannel(self.op, rate, self.collective, self.frequency, self.label, self.merged)


def frequency_tolerance(zeeman) -> float:
    scale = float(np.max(np.abs(zeeman))) if len(zeeman) else 0.0
    return 1e-9 * scale if scale > 0 else 1e-12


def eigen_decompose(op, zeeman, rate=1.0, collective=False, label="", tol=None) -> list[JumpChannel]:
    """Split ``op`` into parts connecting levels with a fixed energy difference.

    Channels are returned in order of increasing frequency; their operators sum to
    ``op`` up to elements below 1e-14 of its largest element.
    """
    op = np.asarray(op, dtype=complex)
    zeeman = np.asarray(zeeman, dtype=float)
    if zeeman.shape != (op.shape[0],):
        raise ValueError("zeeman needs one energy per level")
    if tol is None:
        tol = frequency_tolerance(zeeman)
    # rounding residue (e.g. sin(2 theta) at theta = pi/2) must not open extra channels
    amp = np.abs(op)
    rows, cols = np.nonzero(amp > 1e-14 * amp.max()) if amp.size and amp.max() > 0 else ((), ())
    groups: list[list] = []
    for r, c in sorted(zip(rows, cols), key=lambda rc: zeeman[rc[0]] - zeeman[rc[1]]):
        w = zeeman[r] - zeeman[c]
        if groups and abs(w - groups[-1][0]) <= tol:
            groups[-1][1].append((r, c))
        else:
            groups.append([w, [(r, c)]])
    out = []
    for w, pairs in groups:
        part = np.zeros_like(op)
        for r, c in pairs:
            part[r, c] = op[r, c]
        merged = len(pairs) > 1
        if merged and len({round(zeeman[r] - zeeman[c], 12) for r, c in pairs}) > 1:
            warnings.warn(f"transitions with different frequencies merged into channel at {w}")
        tag = f"{label}({w:g})" if label else f"({w:g})"
        out.append(JumpChannel(part, rate, collective, float(w), tag, merged))
    return out


def rate_table(op, gamma: float = 1.0) -> np.ndarray:
    """gamma |<m|op|n>|^2 for every level pair."""
    return gamma * np.abs(np.asarray(op)) ** 2


def transition_rates(space: SpinSpace, s1: float, epsilon: float, theta: float, gamma: float = 1.0) -> np.ndarray:
    """Rates gamma_{m,n} of the simplified F=1 model (row m, column n, both indexed from -F)."""
    vp = simplified_v(space, s1, epsilon, theta, +1)
    vm = simplified_v(space, s1, epsilon, theta, -1)
    return rate_table(vp, gamma) + rate_table(vm, gamma)
