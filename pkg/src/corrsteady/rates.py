"""Physical probe parameters -> collective and single-atom scattering rates."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from scipy import constants as sc


@dataclass(frozen=True)
class PhysicalParams:
    """Probe and ensemble parameters in SI units; angular frequencies in rad/s.

    Either ``power`` (W) or ``photon_flux`` (1/s) must be given.  The photon
    flux follows from the power as P / (h c / lambda).
    """
    area: float                 # beam cross section A, m^2
    wavelength: float           # m
    detuning: float             # Delta, rad/s
    gamma0: float               # natural linewidth, rad/s
    N: float
    power: float | None = None
    photon_flux: float | None = None
    pump: float = 0.0           # w, 1/s

    def __post_init__(self):
        if (self.power is None) == (self.photon_flux is None):
            raise ValueError("give exactly one of power or photon_flux")
        for name in ("area", "wavelength", "detuning", "gamma0", "N"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.pump < 0:
            raise ValueError("pump must be non-negative")
        if self.power is not None and not self.power > 0:
            raise ValueError("power must be positive")
        if self.photon_flux is not None and not self.photon_flux > 0:
            raise ValueError("photon_flux must be positive")

    @property
    def flux(self) -> float:
        if self.photon_flux is not None:
            return self.photon_flux
        return self.power * self.wavelength / (sc.h * sc.c)

    @property
    def sigma0(self) -> float:
        return 3 * self.wavelength**2 / (2 * math.pi)

    @property
    def optical_depth(self) -> float:
        return self.N * self.sigma0 / self.area


def _round(v, digits=4):
    if v <= 0:
        return False
    e = math.floor(math.log10(v))
    m = v / 10**e
    return abs(m - round(m, digits - 1)) < 1e-9 * m


def _convention(v):
    if _round(v / (2 * math.pi)):
        return "angular"
    if _round(v):
        return "hz"
    return "unknown"


def _unit_checks(p: PhysicalParams):
    ratio = p.detuning / p.gamma0
    if ratio < 10:
        warnings.warn(f"detuning is only {ratio:.3g} linewidths; the dispersive rates assume |Delta| >> gamma0")
    # a value typed as 2 pi x (round number) is angular; a plain round number is probably Hz
    kinds = {name: _convention(getattr(p, name)) for name in ("detuning", "gamma0")}
    if {kinds["detuning"], kinds["gamma0"]} == {"angular", "hz"}:
        warnings.warn(f"detuning and gamma0 look like different units ({kinds}); both must be rad/s")
    if p.wavelength > 1e-4 or p.wavelength < 1e-8:
        warnings.warn(f"wavelength {p.wavelength} m looks like the wrong unit")
    if p.area > 1e-2 or p.area < 1e-14:
        warnings.warn(f"area {p.area} m^2 looks like the wrong unit")


def derive_rates(p: PhysicalParams) -> dict:
    """gamma_dec = (Phi/8)(sigma0/A)(gamma0/Delta)^2, gamma = (Phi/16)(sigma0/A)^2(gamma0/Delta)^2.

    Returns rates in 1/s and the dimensionless ratios used by the engine.  By
    construction N gamma / gamma_dec = D / 2 with D = N sigma0 / A.
    """
    _unit_checks(p)
    s = p.sigma0 / p.area
    x = (p.gamma0 / p.detuning) ** 2
    gamma_dec = p.flux / 8 * s * x
    gamma = p.flux / 16 * s**2 * x
    D = p.optical_depth
    return dict(
        photon_flux=p.flux,
        gamma=gamma,
        gamma_dec=gamma_dec,
        D=D,
        gamma_over_dec=gamma / gamma_dec,
        w_over_dec=p.pump / gamma_dec,
        N_gamma_over_dec=p.N * gamma / gamma_dec,
        # engine normalization: rates in units of gamma
        gamma_dec_units=gamma_dec / gamma,
        w_units=p.pump / gamma,
    )


def cesium_d2_example(**kw) -> PhysicalParams:
    """Probe settings of the F=4 example: 6 mW, (300 um)^2, 852 nm, 2 pi x 3 GHz, N = 1e9, w = 1 kHz."""
    base = dict(area=(300e-6) ** 2, wavelength=852e-9, detuning=2 * math.pi * 3e9,
                gamma0=2 * math.pi * 5.234e6, N=1e9, power=6e-3, pump=1e3)
    base.update(kw)
    return PhysicalParams(**base)
