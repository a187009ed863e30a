"""Closed-form Lambda-system EIT quantities.

Frequencies passed as "Gamma units" are dimensionless multiples of the
excited-state decay rate.  Physical rates are angular (rad/s).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy import integrate, optimize

__all__ = [
    "RB87_D1_GAMMA",
    "AtomicMedium",
    "ControlFieldSpec",
    "optical_depth",
    "optical_depth_per_atom",
    "eit_window_width",
    "eit_susceptibility",
    "transmission_spectrum",
    "transparency_fwhm",
    "group_velocity",
    "group_delay",
    "radial_weighted_depth",
]

#: Natural linewidth of the 87Rb D1 line, 2*pi x 5.746 MHz (rad/s).
RB87_D1_GAMMA = 2 * np.pi * 5.746e6


def _positive(name, value):
    if not (np.isfinite(value) and value > 0):
        raise ValueError(f"{name} must be positive, got {value}")


@dataclass(frozen=True)
class AtomicMedium:
    """Cold Lambda-system ensemble.

    Attributes
    ----------
    gamma : float
        Excited-state decay rate (rad/s).
    gamma21 : float
        Ground-coherence decay rate (rad/s), ``0 <= gamma21 < gamma``.
    d_opt : float
        Resonant optical depth (intensity), ``>= 0``.
    length : float
        Medium length (m).
    sigma0, density, waist : float, optional
        Cross-section (m^2), number density (m^-3) and beam waist (m).
        When ``sigma0`` and ``density`` are both set, ``d_opt`` must equal
        ``sigma0 * density * length``.
    """

    gamma: float = RB87_D1_GAMMA
    gamma21: float = 0.0
    d_opt: float = 109.0
    length: float = 0.03
    sigma0: float | None = None
    density: float | None = None
    waist: float | None = None

    def __post_init__(self):
        _positive("gamma", self.gamma)
        _positive("length", self.length)
        if not (0.0 <= self.gamma21 < self.gamma):
            raise ValueError("gamma21 must satisfy 0 <= gamma21 < gamma")
        if not (np.isfinite(self.d_opt) and self.d_opt >= 0):
            raise ValueError("d_opt must be >= 0")
        for name in ("sigma0", "density", "waist"):
            v = getattr(self, name)
            if v is not None:
                _positive(name, v)
        if self.sigma0 is not None and self.density is not None:
            expect = self.sigma0 * self.density * self.length
            if not np.isclose(self.d_opt, expect, rtol=1e-12, atol=0.0):
                raise ValueError(f"d_opt={self.d_opt} inconsistent with sigma0*n*L={expect}")

    @classmethod
    def from_density(cls, sigma0, density, length, **kw) -> "AtomicMedium":
        return cls(d_opt=optical_depth(sigma0, density, length), length=length,
                   sigma0=sigma0, density=density, **kw)

    @property
    def gamma21_rel(self) -> float:
        """Ground-coherence decay in Gamma units."""
        return self.gamma21 / self.gamma


@dataclass(frozen=True)
class ControlFieldSpec:
    """Rabi frequencies and detunings of the Lambda scheme, Gamma units."""

    rabi_plus: float = 3.6
    rabi_minus: float = 0.0
    detuning_probe: float = 0.0
    detuning_plus: float = 0.0
    detuning_minus: float = 2.5

    def __post_init__(self):
        if self.rabi_plus < 0 or self.rabi_minus < 0:
            raise ValueError("Rabi frequencies must be >= 0")

    @property
    def omega0_sq(self) -> float:
        return self.rabi_plus**2 + self.rabi_minus**2


def optical_depth(sigma0, density, length) -> float:
    """Resonant optical depth ``sigma0 * n * L``."""
    for name, v in (("sigma0", sigma0), ("density", density), ("length", length)):
        _positive(name, v)
    return sigma0 * density * length


def optical_depth_per_atom(sigma0, waist) -> float:
    """Single-atom optical depth ``sigma0 / (pi w0^2)``."""
    _positive("sigma0", sigma0)
    _positive("waist", waist)
    return sigma0 / (np.pi * waist**2)


def eit_window_width(rabi, d_opt, gamma=1.0):
    """Transparency-window width ``Omega^2 / (gamma sqrt(d_opt))``.

    ``rabi`` and ``gamma`` share units; the result is in the same units.
    """
    if not d_opt > 0:
        raise ValueError("d_opt must be positive")
    return np.asarray(rabi) ** 2 / (gamma * np.sqrt(d_opt))


def eit_susceptibility(delta_probe, rabi, gamma=1.0, gamma21=0.0, delta_control=0.0):
    """Normalized linear probe response of a Lambda system.

    ``chi = (gamma/2) i (g21 - i d2) / [(gamma/2 - i dp)(g21 - i d2) + rabi^2/4]``
    with two-photon detuning ``d2 = dp - delta_control``.  The prefactor
    makes ``Im chi = 1`` on resonance without control, so the intensity
    transmission is ``exp(-d_opt Im chi)``.
    """
    dp = np.asarray(delta_probe, dtype=float)
    two_level = 0.5 * gamma * 1j / (0.5 * gamma - 1j * dp)
    if rabi == 0:
        # ground state |2> decouples, including at two-photon resonance
        return two_level
    g2 = gamma21 - 1j * (dp - delta_control)
    num = 0.5 * gamma * 1j * g2
    den = (0.5 * gamma - 1j * dp) * g2 + 0.25 * rabi**2
    # den vanishes only on exact two-photon resonance with rabi^2 underflowing;
    # the dark state is still perfectly transparent there
    safe = np.where(den == 0, 1.0, den)
    return np.where(den == 0, 0j, num / safe)


def transmission_spectrum(medium: AtomicMedium, control: ControlFieldSpec, delta_grid):
    """Intensity transmission ``exp(-d_opt Im chi)`` over probe detunings.

    ``delta_grid`` is the probe detuning in Gamma units; it replaces
    ``control.detuning_probe``.  The forward control sets the window.
    """
    grid = np.asarray(delta_grid, dtype=float)
    if not np.all(np.isfinite(grid)):
        raise ValueError("delta_grid must be finite")
    chi = eit_susceptibility(grid, control.rabi_plus, 1.0, medium.gamma21_rel, control.detuning_plus)
    return np.exp(-medium.d_opt * chi.imag)


def transparency_fwhm(medium: AtomicMedium, control: ControlFieldSpec) -> float:
    """Numerical full width at half maximum of the transparency peak, Gamma units.

    The half level is taken relative to the transmission at two-photon
    resonance.  Edges are bracketed between the center and the
    Autler-Townes absorption maximum, then polished with Brent's method.
    """
    center = control.detuning_plus
    rabi = control.rabi_plus
    if rabi <= 0:
        raise ValueError("no transparency window without control field")

    def t(x):
        return float(transmission_spectrum(medium, control, [x])[0])

    half = 0.5 * t(center)
    # the absorption maximum lies near +/- rabi/2; extend until T < half
    reach = max(0.5 * rabi, 1e-6)
    edges = []
    for sign in (1.0, -1.0):
        far = reach
        while t(center + sign * far) >= half:
            far *= 1.5
            if far > 1e6:
                raise ValueError("transparency peak does not fall to half maximum")
        # locate the first crossing on a fine grid, then refine
        xs = center + sign * np.linspace(0.0, far, 2001)
        ts = transmission_spectrum(medium, control, xs)
        k = int(np.argmax(ts < half))
        edges.append(optimize.brentq(lambda x: t(x) - half, xs[k - 1], xs[k], xtol=1e-13))
    return abs(edges[0] - edges[1])


def group_velocity(omega0_sq, medium: AtomicMedium) -> float:
    """Dark-state polariton group velocity ``Omega0^2 L / (Gamma d_opt)`` in m/s.

    ``omega0_sq`` is given in Gamma^2 units.
    """
    if omega0_sq < 0:
        raise ValueError("omega0_sq must be >= 0")
    if medium.d_opt == 0:
        return float("inf")
    return omega0_sq * medium.gamma * medium.length / medium.d_opt


def group_delay(omega0_sq, medium: AtomicMedium) -> float:
    """EIT delay ``L / v_gr = d_opt / (Gamma Omega0^2)`` in seconds."""
    if omega0_sq <= 0:
        raise ValueError("omega0_sq must be positive")
    return medium.d_opt / (medium.gamma * omega0_sq)


def radial_weighted_depth(
    medium: AtomicMedium,
    mode_radius: float,
    density_profile: Literal["gaussian", "flat-top"] = "gaussian",
    profile_radius: float | None = None,
    *,
    method: Literal["analytic", "quadrature"] = "analytic",
) -> float:
    """Effective optical depth of a Gaussian mode in a radially varying cloud.

    The mode intensity is ``exp(-2 r^2 / w^2)`` with ``w = mode_radius``.
    ``medium.d_opt`` is the on-axis depth.  Density profiles:

    * ``"gaussian"``: ``exp(-r^2 / (2 s^2))`` with ``s = profile_radius``;
      overlap ``1 / (1 + w^2 / (4 s^2))``.
    * ``"flat-top"``: uniform inside ``R = profile_radius``; overlap
      ``1 - exp(-2 R^2 / w^2)``.

    ``profile_radius=None`` means a uniform, unbounded cloud (overlap 1).
    """
    _positive("mode_radius", mode_radius)
    if profile_radius is None:
        return medium.d_opt
    if not profile_radius >= 0:
        raise ValueError("profile_radius must be >= 0")
    if profile_radius == 0:
        raise ValueError("zero overlap between mode and density profile")
    w, s = mode_radius, profile_radius
    if density_profile == "gaussian":
        if method == "analytic":
            overlap = 1.0 / (1.0 + w**2 / (4 * s**2))
        else:
            # radial variable in units of the mode radius
            k = (w / s) ** 2
            num, _ = integrate.quad(lambda x: x * np.exp(-2 * x**2) * np.exp(-0.5 * k * x**2), 0, np.inf)
            overlap = 4 * num
    elif density_profile == "flat-top":
        if method == "analytic":
            overlap = 1.0 - np.exp(-2 * s**2 / w**2)
        else:
            num, _ = integrate.quad(lambda x: x * np.exp(-2 * x**2), 0, s / w)
            overlap = 4 * num
    else:
        raise ValueError(f"unknown density profile {density_profile!r}")
    return medium.d_opt * overlap
