"""Model specifications: one master equation of N identical spin-F atoms."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .spin import (JumpChannel, PolarizabilitySet, SpinSpace, eigen_decompose,
                   full_jump_q, simplified_v, spin_matrices, tensor_jump)

VARIANTS = ("two-level", "f1", "full", "custom")

# Relative factor between the direct tensor construction and the printed V^q.
TENSOR_TO_CANONICAL = -1j * np.sqrt(2)


@dataclass(frozen=True, eq=False)
class ModelSpec:
    space: SpinSpace
    N: float
    zeeman: np.ndarray
    channels: tuple
    variant: str = "custom"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.N < 2:
            raise ValueError("N must be at least 2")
        z = np.asarray(self.zeeman, dtype=float)
        if z.shape != (self.space.d,):
            raise ValueError(f"zeeman needs {self.space.d} entries")
        object.__setattr__(self, "zeeman", z)
        object.__setattr__(self, "channels", tuple(self.channels))
        for ch in self.channels:
            if ch.op.shape != (self.space.d, self.space.d):
                raise ValueError(f"channel {ch.label!r} has shape {ch.op.shape}")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")

    @property
    def d(self):
        return self.space.d

    @property
    def collective(self):
        return [c for c in self.channels if c.collective]

    @property
    def local(self):
        return [c for c in self.channels if not c.collective]

    def with_N(self, N):
        return ModelSpec(self.space, N, self.zeeman, self.channels, self.variant, dict(self.meta))

    def rate_scale(self) -> float:
        """Fastest rate in the model (collective channels counted with their N enhancement)."""
        scale = float(np.ptp(self.zeeman)) if self.d > 1 else 0.0
        for ch in self.channels:
            nrm = np.linalg.norm(ch.op, 2) ** 2
            scale = max(scale, ch.rate * nrm * (self.N if ch.collective else 1.0))
        return scale if scale > 0 else 1.0


def _nonzero(channels):
    return [c for c in channels if c.rate > 0 and np.any(c.op)]


def two_level_model(N, w_plus, w_minus=0.0, gamma_minus=1.0, gamma_plus=0.0, nu=0.0) -> ModelSpec:
    """Generalized superradiant laser as a spin-1/2 model (index 0 = ground, 1 = excited)."""
    space = SpinSpace(0.5)
    S = spin_matrices(space)
    ch = [
        JumpChannel(S.plus, w_plus, False, nu, "pump+"),
        JumpChannel(S.minus, w_minus, False, -nu, "pump-"),
        JumpChannel(S.minus, gamma_minus, True, -nu, "J-"),
        JumpChannel(S.plus, gamma_plus, True, nu, "J+"),
    ]
    meta = dict(w_plus=w_plus, w_minus=w_minus, gamma_minus=gamma_minus, gamma_plus=gamma_plus, nu=nu)
    return ModelSpec(space, N, np.array([0.0, nu]), _nonzero(ch), "two-level", meta)


def f1_model(N, theta, w_plus, w_minus, epsilon=0.1, s1=1.0, gamma=1.0,
             zeeman=(0.0, 10.0, 30.0), secular=True) -> ModelSpec:
    """Spin-1 model with the simplified jump operators V^+-(theta) (no W2 terms)."""
    space = SpinSpace(1)
    S = spin_matrices(space)
    zeeman = np.asarray(zeeman, dtype=float)
    ch = []
    for sign, tag in ((1, "V+"), (-1, "V-")):
        V = simplified_v(space, s1, epsilon, theta, sign)
        if secular:
            ch += eigen_decompose(V, zeeman, gamma, True, tag)
        else:
            ch.append(JumpChannel(V, gamma, True, 0.0, tag))
    ch.append(JumpChannel(S.plus, w_plus, False, 0.0, "pump+"))
    ch.append(JumpChannel(S.minus, w_minus, False, 0.0, "pump-"))
    meta = dict(theta=theta, w_plus=w_plus, w_minus=w_minus, epsilon=epsilon, s1=s1, gamma=gamma)
    return ModelSpec(space, N, zeeman, _nonzero(ch), "f1", meta)


def decoherence_operators(space, pol, theta):
    """Single-atom scattering operators V^c, V^q, V^z in the normalization of the printed V^q."""
    return {
        "c": TENSOR_TO_CANONICAL * tensor_jump(space, pol, theta, "c"),
        "q": full_jump_q(space, pol, theta),
        "z": TENSOR_TO_CANONICAL * tensor_jump(space, pol, theta, "z"),
    }


def full_model(F, N, theta, pol: PolarizabilitySet, gamma=1.0, gamma_dec=0.0, w=0.0, w_minus=0.0,
               zeeman=None, zeeman_splitting=1.0) -> ModelSpec:
    """Complete master equation for spin F: collective V^q(omega), decoherence, optical pumping.

    ``zeeman`` defaults to a linear splitting ``zeeman_splitting * m``.
    """
    space = SpinSpace(F)
    S = spin_matrices(space)
    if zeeman is None:
        zeeman = zeeman_splitting * space.m_values
    zeeman = np.asarray(zeeman, dtype=float)
    ops = decoherence_operators(space, pol, theta)
    ch = eigen_decompose(ops["q"], zeeman, gamma, True, "Vq")
    if gamma_dec > 0:
        for mu, op in ops.items():
            ch += eigen_decompose(op, zeeman, gamma_dec, False, f"dec{mu}")
    ch.append(JumpChannel(S.plus, w, False, 0.0, "pump+"))
    ch.append(JumpChannel(S.minus, w_minus, False, 0.0, "pump-"))
    meta = dict(theta=theta, s0=pol.s0, s1=pol.s1, s2=pol.s2, gamma=gamma, gamma_dec=gamma_dec,
                w=w, w_minus=w_minus)
    return ModelSpec(space, N, zeeman, _nonzero(ch), "full", meta)
