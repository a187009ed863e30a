"""Jones-calculus model of an elliptically birefringent fiber.

Forward model
-------------
A linearly polarized unit field at angle ``theta`` enters a fiber whose
fixed optical axis sits at angle ``beta`` from horizontal.  In the axis
frame the fiber acts with

    J = [[c - i s cos(chi),  -s sin(chi)],
         [s sin(chi),         c + i s cos(chi)]],   c = cos(phi/2), s = sin(phi/2)

so the lab-frame output is ``R(beta) J R(-beta) (cos theta, sin theta)``.
The real field is ``Re[E exp(-i w t)]``.

Three independent routes give the degree of linear polarization (DOP):

* :func:`degree_of_polarization`, the closed form in (phi, chi, theta - beta);
* :func:`dop_bruteforce`, which samples the real field over one period and
  projects it on analyzer angles;
* :func:`ellipse_normal_form` applied to :func:`ellipse_coefficients`.

All angles are radians.  The input amplitude is normalized to one.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.optimize import least_squares, minimize_scalar

from .errors import AmbiguousFitError, DegenerateEllipseError, FitError

__all__ = [
    "JonesParameters",
    "PolarizationField",
    "EllipseCoefficients",
    "PolarizerScan",
    "DopMeasurement",
    "BirefringenceRates",
    "LengthMap",
    "REFERENCE_FIBER",
    "wrap_half_pi",
    "rotation",
    "jones_matrix",
    "propagate",
    "output_orientation",
    "degree_of_polarization",
    "dop_bruteforce",
    "ellipse_coefficients",
    "axis_frame_coefficients",
    "ellipse_normal_form",
    "dop_from_normal_form",
    "analyze_polarizer_scan",
    "fit_birefringence",
    "fit_residuals",
    "canonicalize",
    "resolve_phase_ambiguity",
    "beat_length",
    "dop_length_map",
]

HALF_PI = 0.5 * np.pi


def wrap_half_pi(angle):
    """Map an angle (or array) into the half-open interval (-pi/2, pi/2]."""
    return HALF_PI - np.mod(HALF_PI - np.asarray(angle, dtype=float), np.pi)


def _wrap_quarter_pi(angle):
    """Map into (-pi/4, pi/4]; the model is invariant under beta -> beta + pi/2."""
    q = 0.25 * np.pi
    return q - np.mod(q - angle, HALF_PI)


def rotation(angle) -> np.ndarray:
    """2x2 rotation matrix ``R(angle)``."""
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class JonesParameters:
    """Elliptical-birefringence triple of a fiber.

    Attributes
    ----------
    phi_linear : float
        Accumulated linear birefringence phase (rad).  Nonnegative.
    chi_circular : float
        Circular-birefringence angle in [-pi/2, pi/2] (rad).
    beta_axis : float
        Optical-axis orientation from horizontal (rad), normalized to
        (-pi/2, pi/2] on construction.
    fiber_length : float
        Fiber length (m).
    winding : int or None
        ``None`` once the 2*pi ambiguity is resolved.  Otherwise
        ``phi_linear`` lies in [0, 2*pi) and ``winding`` counts the
        discarded turns.
    """

    phi_linear: float
    chi_circular: float
    beta_axis: float
    fiber_length: float = 1.0
    winding: int | None = None

    def __post_init__(self):
        phi, chi = float(self.phi_linear), float(self.chi_circular)
        if not np.isfinite(phi) or phi < 0.0:
            raise ValueError(f"phi_linear must be finite and >= 0, got {phi}")
        if not -HALF_PI - 1e-12 <= chi <= HALF_PI + 1e-12:
            raise ValueError(f"chi_circular must lie in [-pi/2, pi/2], got {chi}")
        if not self.fiber_length > 0:
            raise ValueError("fiber_length must be positive")
        if self.winding is not None and not 0.0 <= phi < 2 * np.pi:
            raise ValueError("a wrapped phase must lie in [0, 2*pi)")
        object.__setattr__(self, "phi_linear", phi)
        object.__setattr__(self, "chi_circular", float(np.clip(chi, -HALF_PI, HALF_PI)))
        object.__setattr__(self, "beta_axis", float(wrap_half_pi(self.beta_axis)))

    @property
    def absolute_phi(self) -> float:
        """Phase including discarded turns."""
        return self.phi_linear + 2 * np.pi * (self.winding or 0)

    def wrapped(self) -> "JonesParameters":
        """Reduce ``phi_linear`` modulo 2*pi, recording the winding."""
        phi = self.absolute_phi
        turns = int(np.floor(phi / (2 * np.pi)))
        return replace(self, phi_linear=phi - 2 * np.pi * turns, winding=turns)

    def resolved(self, winding: int | None = None) -> "JonesParameters":
        """Absolute phase, optionally replacing the stored winding."""
        turns = self.winding if winding is None else winding
        return replace(self, phi_linear=self.phi_linear + 2 * np.pi * (turns or 0), winding=None)


#: Fiber triple for the 22 cm reference fiber.
REFERENCE_FIBER = JonesParameters(164.84, 0.50, 0.15, fiber_length=0.22)


@dataclass(frozen=True)
class PolarizationField:
    """Complex Jones vector ``(ex, ey)`` with unit norm."""

    ex: complex
    ey: complex

    @property
    def norm(self) -> float:
        return float(np.sqrt(abs(self.ex) ** 2 + abs(self.ey) ** 2))

    def as_array(self) -> np.ndarray:
        return np.array([self.ex, self.ey], dtype=complex)


@dataclass(frozen=True)
class EllipseCoefficients:
    """Real-field coefficients ``Ex = a cos(wt) + b sin(wt)``, ``Ey = c cos(wt) + d sin(wt)``."""

    a: float
    b: float
    c: float
    d: float

    @property
    def delta(self) -> float:
        return self.a * self.d - self.b * self.c

    @property
    def power(self) -> float:
        return self.a**2 + self.b**2 + self.c**2 + self.d**2


@dataclass
class PolarizerScan:
    """Analyzer transmission samples at one input orientation.

    Attributes
    ----------
    theta_in : float
        Input polarization angle (rad).
    analyzer : ndarray
        Polarizer angles (rad).
    power : ndarray
        Transmitted power normalized to the input, in [0, 1].
    wavelength : float, optional
        Wavelength (m), informational.
    """

    theta_in: float
    analyzer: np.ndarray
    power: np.ndarray
    wavelength: float | None = None

    def __post_init__(self):
        self.analyzer = np.asarray(self.analyzer, dtype=float)
        self.power = np.asarray(self.power, dtype=float)
        if self.analyzer.shape != self.power.shape or self.analyzer.ndim != 1:
            raise ValueError("analyzer and power must be 1D arrays of equal length")
        n = self.analyzer.size
        if n < 8:
            raise ValueError(f"need at least 8 analyzer angles, got {n}")
        # A uniform grid of n points covering one period spans pi*(n-1)/n.
        span = np.ptp(self.analyzer)
        if span < np.pi * (n - 1) / n - 1e-9:
            raise ValueError(f"analyzer angles span {np.degrees(span):.1f} deg, need a full pi period")
        if np.any(self.power < 0) or np.any(self.power > 1):
            raise ValueError("normalized powers must lie in [0, 1]")


@dataclass
class DopMeasurement:
    """DOP and output orientation measured at one input angle (radians).

    ``theta_out`` may be NaN when only the DOP is available.
    """

    theta_in: float
    dop: float
    theta_out: float = float("nan")
    dop_err: float = 0.0
    theta_out_err: float = 0.0
    clipped: bool = False


# --------------------------------------------------------------------------
# forward model


def _jones(phi, chi):
    c, s = np.cos(0.5 * phi), np.sin(0.5 * phi)
    cx, sx = np.cos(chi), np.sin(chi)
    return np.array([[c - 1j * s * cx, -s * sx], [s * sx, c + 1j * s * cx]])


def jones_matrix(params: JonesParameters) -> np.ndarray:
    """Jones matrix of the fiber in its own axis frame (unitary, det 1)."""
    return _jones(params.absolute_phi, params.chi_circular)


def _axis_frame_field(phi, chi, tt):
    """Output field in the axis frame for input angle ``tt = theta - beta``."""
    c, s = np.cos(0.5 * phi), np.sin(0.5 * phi)
    cx, sx = np.cos(chi), np.sin(chi)
    ct, st = np.cos(tt), np.sin(tt)
    ex = (c - 1j * s * cx) * ct - s * sx * st
    ey = s * sx * ct + (c + 1j * s * cx) * st
    return ex, ey


def propagate(params: JonesParameters, theta_in) -> PolarizationField:
    """Lab-frame output field for a unit linear input at ``theta_in``."""
    beta = params.beta_axis
    vin = rotation(-beta) @ np.array([np.cos(theta_in), np.sin(theta_in)])
    out = rotation(beta) @ (jones_matrix(params) @ vin)
    return PolarizationField(complex(out[0]), complex(out[1]))


def _orientation(phi, chi, beta, theta):
    ex, ey = _axis_frame_field(phi, chi, np.asarray(theta) - beta)
    # Major axis of the ellipse; equal to Re[arctan(ey/ex)].
    cross = 2.0 * np.real(ex * np.conj(ey))
    diff = np.abs(ex) ** 2 - np.abs(ey) ** 2
    return wrap_half_pi(0.5 * np.arctan2(cross, diff) + beta)


def output_orientation(params: JonesParameters, theta_in):
    """Major-axis orientation of the output ellipse in (-pi/2, pi/2]."""
    return _orientation(params.absolute_phi, params.chi_circular, params.beta_axis, theta_in)


def _dop(phi, chi, beta, theta):
    tt = np.asarray(theta) - beta
    s, c = np.sin(0.5 * phi), np.cos(0.5 * phi)
    u = np.sin(2 * tt) * c + np.cos(2 * tt) * s * np.sin(chi)
    arg = 1.0 - 4.0 * np.cos(chi) ** 2 * s**2 * u**2
    return np.sqrt(np.clip(arg, 0.0, 1.0))


def degree_of_polarization(params: JonesParameters, theta_in):
    """Closed-form DOP at input angle(s) ``theta_in``."""
    return _dop(params.absolute_phi, params.chi_circular, params.beta_axis, theta_in)


def dop_bruteforce(params: JonesParameters, theta_in: float, n_samples: int = 4096) -> float:
    """DOP from the sampled real field.

    The field ``Re[E exp(-i w t)]`` is sampled at ``n_samples`` instants
    over one period.  The time-averaged intensity behind an analyzer is
    evaluated on ``n_samples`` angles in [0, pi) and the extrema are
    refined by bounded scalar minimization.
    """
    if n_samples < 360:
        raise ValueError("n_samples must be >= 360")
    f = propagate(params, theta_in).as_array()
    wt = 2 * np.pi * np.arange(n_samples) / n_samples
    carrier = np.exp(-1j * wt)
    ex_t = np.real(f[0] * carrier)
    ey_t = np.real(f[1] * carrier)
    # second moments of the sampled trajectory
    sxx, syy, sxy = np.mean(ex_t * ex_t), np.mean(ey_t * ey_t), np.mean(ex_t * ey_t)

    def intensity(v):
        cv, sv = np.cos(v), np.sin(v)
        return cv * cv * sxx + 2 * cv * sv * sxy + sv * sv * syy

    grid = np.pi * np.arange(n_samples) / n_samples
    values = intensity(grid)
    step = grid[1] - grid[0]

    def refine(k, sign):
        res = minimize_scalar(
            lambda v: sign * intensity(v),
            bounds=(grid[k] - step, grid[k] + step),
            method="bounded",
            options={"xatol": 1e-12},
        )
        return sign * min(sign * values[k], res.fun)

    i_max = refine(int(np.argmax(values)), -1.0)
    i_min = max(refine(int(np.argmin(values)), 1.0), 0.0)
    return float((i_max - i_min) / (i_max + i_min))


def ellipse_coefficients(fld: PolarizationField) -> EllipseCoefficients:
    """Coefficients of the real field traced by the Jones vector ``fld``."""
    return EllipseCoefficients(fld.ex.real, fld.ex.imag, fld.ey.real, fld.ey.imag)


def axis_frame_coefficients(params: JonesParameters, theta_in: float) -> EllipseCoefficients:
    """Axis-frame coefficients written out explicitly in (phi, chi, theta - beta).

    Equal to :func:`ellipse_coefficients` of the axis-frame field, i.e.
    before rotating back by ``beta``.
    """
    tt = theta_in - params.beta_axis
    h = 0.5 * params.absolute_phi
    chi = params.chi_circular
    a = np.cos(tt) * np.cos(h) - np.sin(tt) * np.sin(chi) * np.sin(h)
    b = -np.cos(chi) * np.sin(h) * np.cos(tt)
    c = np.cos(tt) * np.sin(h) * np.sin(chi) + np.sin(tt) * np.cos(h)
    d = np.sin(tt) * np.cos(chi) * np.sin(h)
    return EllipseCoefficients(float(a), float(b), float(c), float(d))


def ellipse_normal_form(coeffs: EllipseCoefficients, rtol: float = 1e-14):
    """Eigenvalues and major-axis angle of the ellipse quadratic form.

    The trajectory satisfies ``r^T Q r = 1`` with
    ``Q = [[c^2+d^2, -(ac+bd)], [-(ac+bd), a^2+b^2]] / delta^2``.

    Returns
    -------
    r1, r2 : float
        Eigenvalues of ``Q`` with ``r1 <= r2``.
    orientation : float
        Angle of the major axis (eigenvector of ``r1``) in (-pi/2, pi/2].

    Raises
    ------
    DegenerateEllipseError
        If ``delta`` vanishes (linear output, DOP = 1).
    """
    a, b, c, d = coeffs.a, coeffs.b, coeffs.c, coeffs.d
    delta = coeffs.delta
    if abs(delta) <= rtol * max(coeffs.power, np.finfo(float).tiny):
        raise DegenerateEllipseError("ellipse is degenerate (delta = 0): linear output, DOP = 1")
    off = -(a * c + b * d)
    q = np.array([[c * c + d * d, off], [off, a * a + b * b]]) / delta**2
    w, v = np.linalg.eigh(q)
    orientation = float(wrap_half_pi(np.arctan2(v[1, 0], v[0, 0])))
    return float(w[0]), float(w[1]), orientation


def dop_from_normal_form(r1: float, r2: float) -> float:
    return (r2 - r1) / (r2 + r1)


# --------------------------------------------------------------------------
# data reduction


def analyze_polarizer_scan(scan: PolarizerScan) -> DopMeasurement:
    """Fit ``P/P0 = b + a cos(2(v - theta'))`` to an analyzer scan.

    The model is linear in ``(b, p, q)`` with ``p = a cos 2theta'`` and
    ``q = a sin 2theta'``, so it is solved by ordinary least squares.  The
    orientation is read from the fitted minimum plus 90 degrees.  A ratio
    ``a/b > 1`` is clipped to 1 and flagged.
    """
    v, y = scan.analyzer, scan.power
    design = np.column_stack([np.ones_like(v), np.cos(2 * v), np.sin(2 * v)])
    coef, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    rss = float(resid @ resid)
    if rank < 3:
        raise FitError(f"polarizer fit is rank deficient (rank {rank}); residual norm {np.sqrt(rss):.3g}")
    b, p, q = coef
    if not b > 0:
        raise FitError(f"polarizer fit gave non-positive mean power b={b:.3g}; residual norm {np.sqrt(rss):.3g}")
    a = float(np.hypot(p, q))
    vmin = wrap_half_pi(0.5 * np.arctan2(q, p) + HALF_PI)
    theta_out = float(wrap_half_pi(vmin + HALF_PI))

    dof = max(v.size - 3, 1)
    cov = np.linalg.inv(design.T @ design) * rss / dof
    # error propagation to (a/b, theta')
    a_safe = max(a, np.finfo(float).tiny)
    grad_dop = np.array([-a / b**2, p / (a_safe * b), q / (a_safe * b)])
    grad_th = np.array([0.0, -0.5 * q / a_safe**2, 0.5 * p / a_safe**2])
    dop_err = float(np.sqrt(max(grad_dop @ cov @ grad_dop, 0.0)))
    th_err = float(np.sqrt(max(grad_th @ cov @ grad_th, 0.0)))

    dop = a / b
    # rounding above 1 is not worth a flag
    clipped = dop > 1.0 + 1e-9
    if clipped:
        warnings.warn(f"fitted DOP {dop:.4f} > 1 clipped to 1", RuntimeWarning, stacklevel=2)
    dop = min(dop, 1.0)
    return DopMeasurement(float(scan.theta_in), float(dop), theta_out, dop_err, th_err, clipped)


# --------------------------------------------------------------------------
# inverse problem

DEFAULT_DOP_SIGMA = 0.01
DEFAULT_THETA_SIGMA = np.radians(1.0)


def _arrays(measurements: Sequence[DopMeasurement]):
    th = np.array([m.theta_in for m in measurements], dtype=float)
    dop = np.array([m.dop for m in measurements], dtype=float)
    tout = np.array([m.theta_out for m in measurements], dtype=float)
    sd = np.array([m.dop_err if m.dop_err > 0 else DEFAULT_DOP_SIGMA for m in measurements])
    st = np.array([m.theta_out_err if m.theta_out_err > 0 else DEFAULT_THETA_SIGMA for m in measurements])
    return th, dop, tout, sd, st


def _residual_vector(x, th, dop, tout, sd, st, has_theta):
    phi, chi, beta = x
    r_dop = (_dop(phi, chi, beta, th) - dop) / sd
    model_t = _orientation(phi, chi, beta, th[has_theta])
    r_th = wrap_half_pi(model_t - tout[has_theta]) / st[has_theta]
    return np.concatenate([r_dop, r_th])


def fit_residuals(params: JonesParameters, measurements: Sequence[DopMeasurement]) -> dict:
    """Raw (unweighted) residuals of a parameter set against measurements."""
    th, dop, tout, _, _ = _arrays(measurements)
    phi, chi, beta = params.absolute_phi, params.chi_circular, params.beta_axis
    has = np.isfinite(tout)
    r_th = np.full(th.shape, np.nan)
    r_th[has] = wrap_half_pi(_orientation(phi, chi, beta, th[has]) - tout[has])
    return {"dop": _dop(phi, chi, beta, th) - dop, "theta_out": r_th}


def canonicalize(phi: float, chi: float, beta: float, phi_seed: float):
    """Pick the representative of an observationally equivalent triple.

    The observables are unchanged by ``beta -> beta + pi/2`` and by
    ``(phi, chi) -> (2 pi k - phi, -chi)``.  The representative has
    ``chi >= 0``, ``beta`` in (-pi/4, pi/4] and ``phi`` closest to the seed.

    Returns
    -------
    phi, chi, beta : float
    sign : float
        -1 if (phi, chi) were reflected, for covariance transforms.
    """
    sign = 1.0
    if chi < 0:
        k = np.round((phi + phi_seed) / (2 * np.pi))
        phi, chi, sign = 2 * np.pi * k - phi, -chi, -1.0
    k = np.round((phi_seed - phi) / (2 * np.pi))
    phi = phi + 2 * np.pi * k
    return float(phi), float(chi), float(_wrap_quarter_pi(beta)), sign


def fit_birefringence(
    measurements: Sequence[DopMeasurement],
    phi_seed: float,
    *,
    fiber_length: float = 1.0,
    max_nfev: int = 200,
):
    """Joint weighted least-squares fit of (phi, chi, beta).

    DOP and orientation residuals are weighted by their uncertainties
    (fallbacks 0.01 and 1 degree when missing).  ``phi`` is bounded to
    ``phi_seed +/- pi``.  A multi-start over ``beta in {0, +/-pi/4}`` and
    ``chi`` of both signs guards against local minima.

    Returns
    -------
    params : JonesParameters
        Canonical representative, see :func:`canonicalize`.
    covariance : ndarray, shape (3, 3)
        Covariance of (phi, chi, beta), absolute-sigma convention.

    Raises
    ------
    AmbiguousFitError
        No orientation data, or a singular Jacobian at the optimum.
    FitError
        Too few distinct input angles or no converged start.
    """
    th, dop, tout, sd, st = _arrays(measurements)
    if np.unique(np.round(th, 12)).size < 6:
        raise FitError("need at least 6 measurements at distinct input angles")
    has_theta = np.isfinite(tout)
    if not has_theta.any():
        raise AmbiguousFitError("DOP data alone do not determine phi uniquely; orientation data are required")
    if phi_seed - np.pi < 0:
        raise FitError("phi_seed must be >= pi so the search window stays nonnegative")

    lo = [phi_seed - np.pi, -HALF_PI, -HALF_PI]
    hi = [phi_seed + np.pi, HALF_PI, HALF_PI]
    args = (th, dop, tout, sd, st, has_theta)
    best = None
    for beta0 in (0.0, 0.25 * np.pi, -0.25 * np.pi):
        for chi0 in (0.3, -0.3):
            for dphi in (0.0, -0.5 * np.pi, 0.5 * np.pi):
                x0 = [phi_seed + dphi, chi0, beta0]
                res = least_squares(
                    _residual_vector, x0, args=args, bounds=(lo, hi), method="trf",
                    ftol=1e-10, xtol=1e-12, gtol=1e-12, max_nfev=max_nfev,
                )
                if best is None or res.cost < best.cost:
                    best = res
    if best is None or not np.all(np.isfinite(best.x)):
        raise FitError("no start converged")

    jac = best.jac
    jtj = jac.T @ jac
    if np.linalg.matrix_rank(jtj, tol=1e-10 * max(np.abs(jtj).max(), 1e-300)) < 3:
        raise AmbiguousFitError("Jacobian is rank deficient at the optimum; parameters not identifiable")
    cov = np.linalg.inv(jtj)
    phi, chi, beta, sign = canonicalize(*best.x, phi_seed)
    flip = np.diag([sign, sign, 1.0])
    cov = flip @ cov @ flip
    params = JonesParameters(phi, chi, beta, fiber_length=fiber_length)
    return params, cov


def resolve_phase_ambiguity(short_fiber_phi: float, short_length: float, long_length: float) -> float:
    """Extrapolate an absolute phase from a short fiber to a long one."""
    if not (short_length > 0 and long_length > 0):
        raise ValueError("fiber lengths must be positive")
    return long_length / short_length * short_fiber_phi


def beat_length(params: JonesParameters) -> float:
    """Polarization beat length ``2 pi l / phi`` in meters.

    Returns ``inf`` (with a warning) when the phase vanishes.
    """
    phi = params.absolute_phi
    if phi == 0:
        warnings.warn("zero linear birefringence: infinite beat length", RuntimeWarning, stacklevel=2)
        return float("inf")
    return 2 * np.pi * params.fiber_length / phi


# --------------------------------------------------------------------------
# length scaling


@dataclass(frozen=True)
class BirefringenceRates:
    """Birefringence per unit length, assumed uniform along the fiber.

    Attributes
    ----------
    phi_per_m : float
        Linear phase per meter (rad/m).
    chi_per_m : float
        Circular angle per meter (rad/m).
    beta : float
        Fixed axis orientation (rad).
    """

    phi_per_m: float
    chi_per_m: float
    beta: float

    @classmethod
    def from_parameters(cls, params: JonesParameters) -> "BirefringenceRates":
        L = params.fiber_length
        return cls(params.absolute_phi / L, params.chi_circular / L, params.beta_axis)

    def at_length(self, length):
        """Raw (phi, chi, beta) at ``length``; not wrapped into invariant ranges."""
        return self.phi_per_m * np.asarray(length), self.chi_per_m * np.asarray(length), self.beta


@dataclass
class LengthMap:
    """DOP and orientation change versus fiber length.

    ``dop`` and ``delta_theta`` have shape ``(len(lengths), len(theta_in))``.
    """

    lengths: np.ndarray
    theta_in: np.ndarray
    dop: np.ndarray
    delta_theta: np.ndarray = field(repr=False)

    def column(self, k: int = 0):
        return self.dop[:, k], self.delta_theta[:, k]


def dop_length_map(rates: BirefringenceRates, lengths, theta_policy="beta") -> LengthMap:
    """Evaluate DOP and ``theta' - theta`` over fiber lengths.

    Parameters
    ----------
    rates : BirefringenceRates
        Per-meter birefringence.  Both phases scale with length.
    lengths : array_like
        Positive lengths (m).
    theta_policy : "beta", float or array_like
        Input angles.  ``"beta"`` launches along the optical axis.
    """
    lengths = np.atleast_1d(np.asarray(lengths, dtype=float))
    if np.any(lengths <= 0):
        raise ValueError("lengths must be positive")
    if isinstance(theta_policy, str):
        if theta_policy != "beta":
            raise ValueError(f"unknown theta_policy {theta_policy!r}")
        thetas = np.array([rates.beta])
    else:
        thetas = np.atleast_1d(np.asarray(theta_policy, dtype=float))
    phi, chi, beta = rates.at_length(lengths[:, None])
    dop = _dop(phi, chi, beta, thetas[None, :])
    dth = wrap_half_pi(_orientation(phi, chi, beta, thetas[None, :]) - thetas[None, :])
    return LengthMap(lengths, thetas, dop, dth)
