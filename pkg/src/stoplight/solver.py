"""One-dimensional Maxwell-Bloch solver for bidirectional probes in a Lambda medium.

Model (Gamma = 1, L = 1, light speed ``c = 1 / light_transit``)::

    (d/dt + c d/dz) E+ = i g P+
    (d/dt - c d/dz) E- = i g P-
    d/dt P+ = -(1/2 + i D+) P+ + (i/2) E+ + (i/2) W+ S
    d/dt P- = -(1/2 + i D-) P- + (i/2) E- + (i/2) W- S exp(i dk z)
    d/dt S  = -(g21 + i d2) S + (i/2) conj(W+) P+ + (i/2) conj(W-) P- exp(-i dk z)

with ``g = d_opt c / 2`` so that an undriven medium attenuates intensity by
``exp(-d_opt)``.  Fields are probe Rabi envelopes (Gamma units).

Numerics: the backward quantities are carried in the gauge
``X~ = X exp(-i dk z)`` so the atomic coupling is z independent.  Fields
move exactly one cell per step along their characteristics
(``dt = dz / c``).  The atomic update is an exponential integrator with a
linear-in-time source; the field-atom coupling is trapezoidal and solved
implicitly per cell.  This gives one small step matrix per distinct pair
of control values, applied by a compiled kernel.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.linalg import expm

from .eit import AtomicMedium, group_delay
from .errors import BoundaryContaminationError, ConfigError, SolverError
from .schedule import (
    DEFAULT_RAMP,
    ControlSchedule,
    SlpOffsets,
    gaussian_probe,
    lsr_schedule,
    slow_light_schedule,
    slp_schedule,
)

__all__ = [
    "SolverConfig",
    "FieldState",
    "Snapshot",
    "RunResult",
    "step_matrices",
    "evolve",
    "slow_light_delay",
    "run_slow_light",
    "run_lsr",
    "run_slp",
    "level_for_ratio",
    "slp_velocity_factor",
    "centroid_velocity",
    "excitation_content",
]

_ROWS = ("probe_fwd", "probe_bwd", "pol_fwd", "pol_bwd", "spin")


@dataclass(frozen=True)
class SolverConfig:
    """Grid and output settings.

    Attributes
    ----------
    nz : int
        Grid nodes on [0, L], at least 64.
    light_transit : float
        Empty-medium transit time ``L / c`` in units of 1/Gamma.  Light
        speed is rescaled jointly with L; dimensionless outputs do not
        depend on it once it is short against all other time scales.
    phase_mismatch : float
        Backward-probe wavevector mismatch dk (rad/m).
    snapshot_times : tuple of float
        Times (s) at which spatial profiles are recorded.
    truncation_order : int
        Spin-grating truncation order; only the single-grating model (1)
        is implemented.
    decay_convention : {"amplitude", "efficiency"}
        How ``medium.gamma21`` enters: ``"amplitude"`` damps the spin
        coherence at gamma21, so stored energy and efficiency fall as
        ``exp(-2 gamma21 tau)``; ``"efficiency"`` damps it at gamma21 / 2,
        so efficiency falls as ``exp(-gamma21 tau)``.
    """

    nz: int = 256
    light_transit: float = 0.25
    phase_mismatch: float = 0.0
    snapshot_times: tuple = ()
    truncation_order: int = 1
    decay_convention: str = "amplitude"

    def __post_init__(self):
        if int(self.nz) != self.nz or self.nz < 64:
            raise ConfigError("nz must be an integer >= 64")
        if not self.light_transit > 0:
            raise ConfigError("light_transit must be positive")
        if not np.isfinite(self.phase_mismatch):
            raise ConfigError("phase_mismatch must be finite")
        if self.truncation_order != 1:
            raise ConfigError("only truncation_order = 1 is implemented")
        if self.decay_convention not in ("amplitude", "efficiency"):
            raise ConfigError("decay_convention must be 'amplitude' or 'efficiency'")
        object.__setattr__(self, "snapshot_times", tuple(float(t) for t in self.snapshot_times))

    @property
    def dt_gamma(self) -> float:
        """Time step in units of 1/Gamma; equals dz / c."""
        return self.light_transit / (self.nz - 1)

    def cfl_dt(self, gamma: float) -> float:
        """Time step in seconds."""
        return self.dt_gamma / gamma

    def with_(self, **kw) -> "SolverConfig":
        d = dict(self.__dict__)
        d.update(kw)
        return SolverConfig(**d)


@dataclass
class FieldState:
    """Complex envelopes on the grid ``z`` (m); backward rows in the lab frame."""

    probe_fwd: np.ndarray
    probe_bwd: np.ndarray
    pol_fwd: np.ndarray
    pol_bwd: np.ndarray
    spin: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        n = len(self.z)
        if n < 64:
            raise ConfigError("grid must have at least 64 points")
        for name in _ROWS:
            arr = np.asarray(getattr(self, name), dtype=complex)
            if arr.shape != (n,):
                raise ConfigError(f"{name} has shape {arr.shape}, expected ({n},)")
            setattr(self, name, arr)

    @classmethod
    def empty(cls, nz: int, length: float) -> "FieldState":
        z = np.linspace(0.0, length, nz)
        zero = np.zeros(nz, dtype=complex)
        return cls(zero, zero.copy(), zero.copy(), zero.copy(), zero.copy(), z)

    def stacked(self) -> np.ndarray:
        return np.array([getattr(self, r) for r in _ROWS])


@dataclass
class Snapshot:
    """Spatial profiles at time ``t`` (s)."""

    t: float
    z: np.ndarray
    probe_fwd_abs2: np.ndarray
    probe_bwd_abs2: np.ndarray
    spin_abs2: np.ndarray
    pol_abs2: np.ndarray
    density: np.ndarray
    content: float


@dataclass
class RunResult:
    """Output of :func:`evolve`.

    Fluxes are ``|E|^2`` at the exits (``flux_fwd`` at z = L, ``flux_bwd``
    at z = 0) and the injected ``flux_in``, sampled on ``t`` (s).  Areas
    are time integrals in flux x seconds.
    """

    t: np.ndarray
    flux_in: np.ndarray
    flux_fwd: np.ndarray
    flux_bwd: np.ndarray
    omega_plus: np.ndarray
    omega_minus: np.ndarray
    snapshots: list
    final_state: FieldState
    info: dict = field(default_factory=dict)

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    def area(self, which: str = "flux_fwd", t_min: float = -np.inf, t_max: float = np.inf) -> float:
        """Rectangle-rule integral of a flux over ``[t_min, t_max)``."""
        f = getattr(self, which)
        mask = (self.t >= t_min) & (self.t < t_max)
        return float(np.sum(f[mask]) * self.dt)

    def snapshot_at(self, t: float) -> Snapshot:
        return min(self.snapshots, key=lambda s: abs(s.t - t))


# --------------------------------------------------------------------------
# step matrices and kernel


def step_matrices(wp, wm, dt, g, dkdz, dp=0.0, dm=0.0, g21=0.0, d2=0.0):
    """Affine update matrices for interior, inlet and outlet nodes.

    Each matrix maps the 9-vector
    ``[E+, E~-, P+, P~-, S, E+_left, P+_left, E~-_right, P~-_right]``
    at time ``t`` (with the left/right neighbours, or the injected field at
    the inlet) to the 5 node values at ``t + dt``.

    Returns
    -------
    ndarray, shape (3, 5, 9)
        Interior, left boundary, right boundary.
    """
    a = np.array([
        [-(0.5 + 1j * dp), 0, 0.5j * wp],
        [0, -(0.5 + 1j * dm), 0.5j * wm],
        [0.5j * np.conj(wp), 0.5j * np.conj(wm), -(g21 + 1j * d2)],
    ])
    src = np.array([[0.5j, 0], [0, 0.5j], [0, 0]])
    big = np.zeros((7, 7), complex)
    big[:3, :3] = a * dt
    big[:3, 3:5] = src * dt
    big[3:5, 5:7] = np.eye(2)
    e = expm(big)
    phi = e[:3, :3]
    w1 = e[:3, 5:7]  # weight of the end-of-step source
    w0 = e[:3, 3:5] - w1  # weight of the start-of-step source
    h = 0.5j * g * dt
    ph = np.exp(1j * dkdz)
    out = np.zeros((3, 5, 9), complex)
    for k, kind in enumerate(("interior", "left", "right")):
        # new fields = ta @ [E+_l, P+_l, E~-_r, P~-_r] + hh @ [P+, P~-, S]_new
        hh = np.zeros((2, 3), complex)
        hh[0, 0] = h
        hh[1, 1] = h
        ta = np.array([[1, h, 0, 0], [0, 0, ph, ph * h]], dtype=complex)
        if kind == "left":
            hh[0, 0] = 0
            ta[0] = [1, 0, 0, 0]
        elif kind == "right":
            hh[1, 1] = 0
            ta[1] = [0, 0, 0, 0]
        kinv = np.linalg.inv(np.eye(3) - w1 @ hh)
        y = np.zeros((3, 9), complex)
        y[:, 0:2] = w0
        y[:, 2:5] = phi
        y[:, 5:9] = w1 @ ta
        y = kinv @ y
        s = np.zeros((2, 9), complex)
        s[:, 5:9] = ta
        s += hh @ y
        out[k, 0:2] = s
        out[k, 2:5] = y
    return out


@njit(cache=True)
def _advance(x, mats, idx, ein, out_f, out_b, n0, n1):  # pragma: no cover - compiled
    nz = x.shape[1]
    y = np.empty_like(x)
    for n in range(n0, n1):
        m = mats[idx[n]]
        e = ein[n + 1]
        for j in range(nz):
            if j == 0:
                k = 1
            elif j == nz - 1:
                k = 2
            else:
                k = 0
            if j > 0:
                el = x[0, j - 1]
                pl = x[2, j - 1]
            else:
                el = e
                pl = 0j
            if j < nz - 1:
                er = x[1, j + 1]
                pr = x[3, j + 1]
            else:
                er = 0j
                pr = 0j
            for r in range(5):
                y[r, j] = (m[k, r, 0] * x[0, j] + m[k, r, 1] * x[1, j] + m[k, r, 2] * x[2, j]
                           + m[k, r, 3] * x[3, j] + m[k, r, 4] * x[4, j] + m[k, r, 5] * el
                           + m[k, r, 6] * pl + m[k, r, 7] * er + m[k, r, 8] * pr)
        for r in range(5):
            for j in range(nz):
                x[r, j] = y[r, j]
        out_f[n + 1] = x[0, nz - 1]
        out_b[n + 1] = x[1, 0]


def _advance_numpy(x, mats, idx, ein, out_f, out_b, n0, n1):
    """Reference implementation of the compiled kernel."""
    nz = x.shape[1]
    for n in range(n0, n1):
        m = mats[idx[n]]
        v = np.zeros((9, nz), complex)
        v[:5] = x
        v[5, 1:] = x[0, :-1]
        v[5, 0] = ein[n + 1]
        v[6, 1:] = x[2, :-1]
        v[7, :-1] = x[1, 1:]
        v[8, :-1] = x[3, 1:]
        new = m[0] @ v
        new[:, 0] = m[1] @ v[:, 0]
        new[:, -1] = m[2] @ v[:, -1]
        x[:] = new
        out_f[n + 1] = x[0, -1]
        out_b[n + 1] = x[1, 0]


def _density(x, g):
    """Polariton density: photons plus coupling-weighted atomic excitation."""
    a2 = np.abs(x) ** 2
    return a2[0] + a2[1] + 2.0 * g * (a2[2] + a2[3] + a2[4])


def _node_weights(nz):
    w = np.full(nz, 1.0 / (nz - 1))
    w[0] = w[-1] = 0.5 / (nz - 1)
    return w


def excitation_content(state: FieldState, medium: AtomicMedium, config: SolverConfig) -> float:
    """Excitation stored in the medium, in flux x seconds."""
    dkz = config.phase_mismatch * state.z
    x = state.stacked()
    x[1] *= np.exp(-1j * dkz)
    x[3] *= np.exp(-1j * dkz)
    c = 1.0 / config.light_transit
    g = medium.d_opt * c / 2.0
    rho = _density(x, g)
    return float(np.sum(rho * _node_weights(len(state.z))) / c / medium.gamma)


def evolve(
    state: FieldState | None,
    schedule: ControlSchedule,
    t0: float,
    t1: float,
    *,
    medium: AtomicMedium,
    config: SolverConfig = SolverConfig(),
    use_numpy: bool = False,
) -> RunResult:
    """Integrate the Maxwell-Bloch equations from ``t0`` to ``t1`` (s).

    Parameters
    ----------
    state : FieldState or None
        Initial condition; ``None`` starts from an empty medium.
    schedule : ControlSchedule
        Control envelopes (Gamma units), the probe intensity injected at
        z = 0 (flux units, amplitude ``sqrt``) and detunings.
    use_numpy : bool
        Use the uncompiled reference kernel.

    Raises
    ------
    ConfigError
        Grid mismatch between ``state`` and ``config``.
    SolverError
        Non-finite values during integration.
    """
    if not t1 > t0:
        raise ConfigError("t1 must exceed t0")
    nz = config.nz
    gam = medium.gamma
    if state is None:
        state = FieldState.empty(nz, medium.length)
    if len(state.z) != nz:
        raise ConfigError(f"state has {len(state.z)} nodes, config expects {nz}")
    if not np.isclose(state.z[-1], medium.length) or not np.allclose(np.diff(state.z), medium.length / (nz - 1)):
        raise ConfigError("state grid must be uniform on [0, medium.length]")

    c = 1.0 / config.light_transit
    dz = 1.0 / (nz - 1)
    dt = config.dt_gamma
    g = medium.d_opt * c / 2.0
    dk = config.phase_mismatch * medium.length
    nt = int(np.ceil((t1 - t0) * gam / dt - 1e-9))
    t = t0 + np.arange(nt + 1) * dt / gam
    t_mid = t[:-1] + 0.5 * dt / gam

    _, wp_mid, wm_mid = schedule.evaluate(t_mid)
    pairs = np.column_stack([wp_mid, wm_mid])
    table, inverse = np.unique(pairs, axis=0, return_inverse=True)
    dp = schedule.detuning_probe
    d2 = schedule.detuning_probe - schedule.detuning_plus
    dm = schedule.detuning_minus + d2
    g21 = medium.gamma21_rel * (1.0 if config.decay_convention == "amplitude" else 0.5)
    mats = np.array([step_matrices(a, b, dt, g, dk * dz, dp=dp, dm=dm, g21=g21, d2=d2)
                     for a, b in table])
    idx = np.ascontiguousarray(inverse.ravel(), dtype=np.int64)

    probe, wp_t, wm_t = schedule.evaluate(t)
    probe = np.clip(probe, 0.0, None)
    ein = np.sqrt(probe).astype(complex)
    wmax = max(float(np.max(wp_t)), float(np.max(wm_t)))
    pmax = float(np.sqrt(probe.max())) if probe.size else 0.0
    if wmax > 0 and pmax > 0.1 * wmax:
        warnings.warn(f"probe amplitude {pmax:.3g} exceeds 0.1 x control {wmax:.3g}: outside the weak-probe regime",
                      RuntimeWarning, stacklevel=2)

    zn = np.linspace(0.0, 1.0, nz)
    gauge = np.exp(-1j * dk * zn)
    x = state.stacked()
    x[1] *= gauge
    x[3] *= gauge
    x[0, 0] = ein[0]
    out_f = np.zeros(nt + 1, complex)
    out_b = np.zeros(nt + 1, complex)
    out_f[0], out_b[0] = x[0, -1], x[1, 0]

    # chunk boundaries at snapshot steps
    snap_steps = sorted({int(round((ts - t0) * gam / dt)) for ts in config.snapshot_times
                         if t0 <= ts <= t1 + 0.5 * dt / gam})
    snap_steps = [s for s in snap_steps if 0 <= s <= nt]
    stops = sorted(set(snap_steps) | {nt})
    weights = _node_weights(nz)
    z_m = zn * medium.length
    snapshots = []
    advance = _advance_numpy if use_numpy else _advance
    n = 0
    for stop in stops:
        if stop > n:
            advance(x, mats, idx, ein, out_f, out_b, n, stop)
            n = stop
        if not np.all(np.isfinite(x)):
            raise SolverError(f"non-finite field values by t = {t[n]:.4e} s (step {n})")
        if n in snap_steps:
            rho = _density(x, g)
            a2 = np.abs(x) ** 2
            snapshots.append(Snapshot(
                t=float(t[n]), z=z_m, probe_fwd_abs2=a2[0], probe_bwd_abs2=a2[1], spin_abs2=a2[4],
                pol_abs2=a2[2] + a2[3], density=rho, content=float(np.sum(rho * weights) / c / gam),
            ))

    x[1] /= gauge
    x[3] /= gauge
    final = FieldState(*x, z=z_m)
    info = {"nz": nz, "nt": nt, "dt": dt / gam, "n_matrices": len(table), "coupling": g,
            "light_transit": config.light_transit / gam}
    return RunResult(t, np.abs(ein) ** 2, np.abs(out_f) ** 2, np.abs(out_b) ** 2,
                     wp_t, wm_t, snapshots, final, info)


# --------------------------------------------------------------------------
# scenarios


def _centroid(t, f):
    total = np.sum(f)
    if not total > 0:
        raise SolverError("no pulse above the noise floor")
    return float(np.sum(t * f) / total)


def slow_light_delay(result: RunResult, floor: float = 1e-9) -> float:
    """Centroid delay (s) of the forward output relative to the input."""
    a_in = np.sum(result.flux_in)
    if not np.sum(result.flux_fwd) > floor * a_in:
        raise SolverError("no transmitted pulse above the noise floor")
    return _centroid(result.t, result.flux_fwd) - _centroid(result.t, result.flux_in)


def _probe_defaults(tau_p, t_probe):
    return 2.0 * tau_p if t_probe is None else t_probe


def run_slow_light(
    config: SolverConfig,
    medium: AtomicMedium,
    rabi: float,
    *,
    tau_p: float = 150e-9,
    t_probe: float | None = None,
    t_end: float | None = None,
    probe_peak: float = 1e-4,
    detuning_probe: float = 0.0,
) -> RunResult:
    """Gaussian pulse through a medium with a constant forward control (Gamma units)."""
    t_probe = _probe_defaults(tau_p, t_probe)
    delay = group_delay(rabi**2, medium) if rabi > 0 else 0.0
    if t_end is None:
        t_end = t_probe + config.light_transit / medium.gamma + 1.5 * delay + 3.0 * tau_p
    sched = slow_light_schedule(rabi, 0.0, t_end).with_probe(
        gaussian_probe(tau_p, t_probe, probe_peak), tau_p=tau_p, detuning_probe=detuning_probe)
    return evolve(None, sched, 0.0, t_end, medium=medium, config=config)


def _switch_time(config, medium, rabi, t_probe):
    """Time at which the pulse centroid sits mid-medium."""
    return t_probe + 0.5 * (config.light_transit / medium.gamma + group_delay(rabi**2, medium))


def run_lsr(
    config: SolverConfig,
    medium: AtomicMedium,
    tau_lsr: float,
    *,
    rabi: float = 3.6,
    tau_p: float = 150e-9,
    ramp: float = DEFAULT_RAMP,
    t_probe: float | None = None,
    t_switch: float | None = None,
    t_end: float | None = None,
    probe_peak: float = 1e-4,
):
    """Store a pulse for ``tau_lsr`` seconds and retrieve it.

    Returns
    -------
    result : RunResult
        ``info`` gains ``leakage`` (fraction of the input leaving before
        the retrieval ramp), ``stored`` (content in the middle of the
        hold), ``residual`` (content at the end), all relative to the
        input area.
    eta : float
        Retrieved forward area after the ramp-up start over input area.
    """
    if rabi <= 0:
        raise ConfigError("rabi must be positive")
    t_probe = _probe_defaults(tau_p, t_probe)
    if t_switch is None:
        t_switch = _switch_time(config, medium, rabi, t_probe)
    delay = group_delay(rabi**2, medium)
    if t_end is None:
        t_end = t_switch + 2 * ramp + tau_lsr + config.light_transit / medium.gamma + 2.5 * delay + 3 * tau_p
    sched = lsr_schedule(rabi, tau_lsr, ramp, t_switch=t_switch, tail=t_end)
    sched = sched.with_probe(gaussian_probe(tau_p, t_probe, probe_peak), tau_p=tau_p)
    ev = sched.events
    t_hold = 0.5 * (ev["off"] + ev["switch_on"])
    snaps = tuple(config.snapshot_times) + (ev["off"], t_hold, t_end)
    res = evolve(None, sched, 0.0, t_end, medium=medium, config=config.with_(snapshot_times=snaps))

    a_in = res.area("flux_in")
    eta = res.area("flux_fwd", ev["switch_on"]) / a_in
    leak_fwd = res.area("flux_fwd", -np.inf, ev["switch_on"]) / a_in
    leak_bwd = res.area("flux_bwd") / a_in
    late_input = res.area("flux_in", ev["switch_off"]) / a_in
    early = res.area("flux_fwd", -np.inf, ev["off"]) / a_in
    if early + late_input > 0.01:
        warnings.warn(f"probe not fully inside the medium at switch-off: leakage fraction {early + late_input:.3f}",
                      RuntimeWarning, stacklevel=2)
    res.info.update(
        mode="lsr", eta=eta, leakage=leak_fwd + leak_bwd, leakage_fwd=leak_fwd, leakage_bwd=leak_bwd,
        stored=res.snapshot_at(t_hold).content / a_in, residual=res.snapshot_at(t_end).content / a_in,
        input_area=a_in, events=dict(ev), tau_lsr=tau_lsr,
    )
    res.info["schedule"] = sched
    return res, eta


def level_for_ratio(omega0: float, ratio: float) -> float:
    """Backward level giving ``omega_minus / omega_plus = ratio`` at fixed ``omega0``."""
    return omega0 * ratio / np.sqrt(1.0 + ratio**2)


def run_slp(
    config: SolverConfig,
    medium: AtomicMedium,
    tau_slp: float,
    omega_minus_level: float,
    *,
    omega0: float = 3.5,
    detuning_minus: float = 2.5,
    tau_p: float = 150e-9,
    ramp: float = DEFAULT_RAMP,
    t_probe: float | None = None,
    t_on: float | None = None,
    shift: float = 0.0,
    t_end: float | None = None,
    probe_peak: float = 1e-4,
    n_snapshots: int = 0,
):
    """Stationary-light run at constant ``omega0^2``.

    ``n_snapshots`` equally spaced profiles over the plateau are recorded
    and used for ``info["drift_velocity"]`` (NaN when the envelope touches
    a boundary or fewer than three are requested).

    Returns
    -------
    result : RunResult
    eta : float
        Forward area after the backward control is off, over input area.
    leakage : float
        Output area (both ends) during the stationary window over input area.
    """
    if omega0 <= 0:
        raise ConfigError("omega0 must be positive")
    t_probe = _probe_defaults(tau_p, t_probe)
    if t_on is None:
        t_on = _switch_time(config, medium, omega0, t_probe)
    delay = group_delay(omega0**2, medium)
    if t_end is None:
        t_end = t_on + shift + 2 * ramp + tau_slp + 4 * delay + 3 * tau_p
    sched = slp_schedule(omega0, omega_minus_level, tau_slp, SlpOffsets(t_on, ramp, shift), tail=t_end)
    sched.detuning_minus = detuning_minus
    sched = sched.with_probe(gaussian_probe(tau_p, t_probe, probe_peak), tau_p=tau_p)
    ev = sched.events
    plateau = tuple(np.linspace(ev["slp_start"], ev["slp_end"], n_snapshots)) if n_snapshots > 0 else ()
    res = evolve(None, sched, 0.0, t_end, medium=medium,
                 config=config.with_(snapshot_times=tuple(config.snapshot_times) + plateau))
    drift = float("nan")
    if n_snapshots >= 3 and tau_slp > 0:
        try:
            # snapshots land on the time grid, up to one step from the request
            pad = config.cfl_dt(medium.gamma)
            drift = centroid_velocity(res.snapshots, (ev["slp_start"] - pad, ev["slp_end"] + pad))
        except (BoundaryContaminationError, SolverError):
            pass
    a_in = res.area("flux_in")
    eta = res.area("flux_fwd", ev["slp_ramp_off"]) / a_in
    leakage = (res.area("flux_fwd", ev["slp_ramp_on"], ev["slp_ramp_off"])
               + res.area("flux_bwd", ev["slp_ramp_on"], ev["slp_ramp_off"])) / a_in
    wp = float(np.sqrt(max(omega0**2 - omega_minus_level**2, 0.0)))
    res.info.update(
        mode="slp", eta=eta, leakage=leakage, input_area=a_in, events=dict(ev), tau_slp=tau_slp,
        drift_velocity=drift,
        omega_minus=omega_minus_level, omega_plus_slp=wp,
        ratio=omega_minus_level / wp if wp > 0 else float("inf"),
        retrieval_centroid=_centroid(res.t[res.t >= ev["slp_ramp_off"]], res.flux_fwd[res.t >= ev["slp_ramp_off"]])
        if eta > 0 else float("nan"),
    )
    res.info["schedule"] = sched
    return res, eta, leakage


def slp_velocity_factor(rabi_minus: float, rabi_plus: float) -> float:
    """Stationary-light velocity factor ``cos 2phi`` with ``tan^2 phi = (W-/W+)^2``."""
    a, b = rabi_plus**2, rabi_minus**2
    if a + b == 0:
        raise ValueError("mixing angle undefined when both controls vanish")
    return (a - b) / (a + b)


def centroid_velocity(snapshots, window, edge_tol: float = 1e-2) -> float:
    """Drift velocity (m/s) of the polariton-density centroid.

    Parameters
    ----------
    snapshots : sequence of Snapshot
    window : (t_lo, t_hi)
        Time window (s); at least three snapshots must fall inside.
    edge_tol : float
        Maximum density at either boundary relative to the peak.

    Raises
    ------
    BoundaryContaminationError
        The envelope touches a boundary inside the window.
    """
    lo, hi = window
    sel = sorted((s for s in snapshots if lo <= s.t <= hi), key=lambda s: s.t)
    if len(sel) < 3:
        raise ValueError("need at least 3 snapshots inside the window")
    ts, zc = [], []
    for s in sel:
        rho = s.density
        peak = rho.max()
        if not peak > 0:
            raise SolverError(f"empty medium at t = {s.t:.4e} s")
        edge = max(rho[0], rho[-1]) / peak
        if edge > edge_tol:
            raise BoundaryContaminationError(f"envelope at boundary (edge/peak = {edge:.3g}) at t = {s.t:.4e} s")
        w = _node_weights(len(s.z)) * rho
        ts.append(s.t)
        zc.append(np.sum(s.z * w) / np.sum(w))
    slope = np.polyfit(np.array(ts), np.array(zc), 1)[0]
    return float(slope)
