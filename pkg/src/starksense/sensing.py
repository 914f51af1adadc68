"""Drive sensing: invert Stark-shifted lines into drive amplitude and frequency.

The forward model maps a drive ``(A_D, nu_D)`` to the measured one-photon
``omega01`` line and the two-photon ``omega02/2`` line. Two inversions are
provided: both drive parameters free (2D damped Newton), or the drive
frequency known (1D bracketed root on ``omega01``, with ``omega02/2`` used as a
consistency check). Uncertainties come from re-solving at the four corners
``(+-delta, +-delta)`` of the measured lines.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.constants import hbar
from scipy.optimize import brentq

from .errors import (
    AllCornersFailed,
    DegeneratePerturbation,
    IllConditionedWarning,
    InconsistentInput,
    InvalidParams,
    NegativeDetuning,
    NoConvergence,
    StarkSenseError,
)
from .qudit import CircuitParams, DriveTone, lab_transitions

CONDITION_THRESHOLD = 1e4
SOLVER_TOL = 1e-11
SUCCESS_TOL = 1e-6
FD_STEP = 1e-6
MIN_DETUNING = 1e-3


@dataclass(frozen=True)
class SensingInput:
    """Measured lines (GHz) plus the undriven circuit.

    ``bare_omega01`` and ``bare_gamma`` define the circuit through
    ``omega_q = bare_omega01 + bare_gamma / 2``.
    """

    omega01_meas: float
    omega02_half_meas: float
    bare_omega01: float
    bare_gamma: float
    omega_d_known: Optional[float] = None
    delta_meas: float = 1e-3

    def __post_init__(self):
        if not self.omega02_half_meas < self.omega01_meas:
            # the order-4 lines do cross for strong drives close to resonance
            warnings.warn("omega02/2 lies at or above omega01", stacklevel=3)
        if not self.bare_gamma > 0 or not self.bare_omega01 > 0:
            raise InvalidParams("bare circuit parameters must be positive")
        if not self.delta_meas >= 0:
            raise InvalidParams("delta_meas must be non-negative")

    @property
    def circuit(self) -> CircuitParams:
        return CircuitParams(self.bare_omega01 + self.bare_gamma / 2, self.bare_gamma)

    @classmethod
    def from_circuit(cls, circuit: CircuitParams, omega01, omega02_half, **kw) -> "SensingInput":
        return cls(omega01, omega02_half, circuit.omega01, circuit.gamma, **kw)

    def shifted(self, d01: float, d02: float) -> "SensingInput":
        return replace(
            self,
            omega01_meas=self.omega01_meas + d01,
            omega02_half_meas=self.omega02_half_meas + d02,
        )


@dataclass(frozen=True)
class SensingEstimate:
    """Inferred drive with uncertainty intervals and diagnostics.

    ``residual`` is the largest mismatch of the solved equations (GHz). In
    fixed mode ``consistency`` holds the ``omega02/2`` mismatch, which is not
    solved for and reflects measurement noise.
    """

    amplitude: float
    frequency: float
    amplitude_interval: Tuple[float, float]
    frequency_interval: Optional[Tuple[float, float]]
    residual: float
    mode: str
    condition: float = float("nan")
    ill_conditioned: bool = False
    consistency: float = float("nan")
    iterations: int = 0
    corner_failures: Dict[str, str] = field(default_factory=dict)


def forward_observables(
    circuit: CircuitParams, drive: DriveTone, order: int = 4
) -> Tuple[float, float]:
    """``(omega01, omega02/2)`` of the driven circuit in GHz."""
    sol = lab_transitions(circuit, drive, k_max=2, order=order)
    return float(sol.lab_transitions[1]), float(sol.lab_transitions[2])


def dispersive_seed(inp: SensingInput) -> Tuple[float, float]:
    """Starting ``(A_D, nu_D)`` from the leading-order line shifts."""
    c = inp.circuit
    s1 = inp.omega01_meas - c.omega01
    s2 = inp.omega02_half_meas - (c.omega_q - 0.75 * c.gamma)
    if s1 >= 0:
        return 0.0, c.omega01 + 0.3
    if s2 - s1 > 1e-9:
        delta = 0.75 * c.gamma * (-s1) / (s2 - s1)
    else:
        delta = 0.3
    delta = min(max(delta, 0.05), 5.0)
    alpha = math.sqrt(-s1 / c.gamma)
    amp = c.gamma * alpha**3 + 2 * delta * alpha
    return amp, c.omega01 + delta


def _jacobian(f, x, r0, h=FD_STEP):
    """Central differences, one-sided where ``A_D`` would go negative."""
    J = np.empty((2, 2))
    for i in range(2):
        e = np.zeros(2)
        e[i] = h
        if i == 0 and x[0] < h:
            J[:, i] = (f(x + e) - r0) / h
        else:
            J[:, i] = (f(x + e) - f(x - e)) / (2 * h)
    return J


def invert_free(
    inp: SensingInput, order: int = 4, max_iterations: int = 60, warn: bool = True
) -> SensingEstimate:
    """Solve for ``(A_D, nu_D)`` matching both measured lines.

    Damped Newton with a finite-difference Jacobian, started from
    :func:`dispersive_seed`. Steps are halved until the residual drops and the
    drive stays above the first transition.

    Raises
    ------
    NoConvergence
        If the residual does not fall below 1e-6 GHz.
    """
    c = inp.circuit
    meas = np.array([inp.omega01_meas, inp.omega02_half_meas])
    f_min = c.omega01 + MIN_DETUNING

    def resid(x):
        return np.array(forward_observables(c, DriveTone(max(x[0], 0.0), x[1]), order)) - meas

    x = np.array(dispersive_seed(inp))
    r = resid(x)
    norm = np.max(np.abs(r))
    it = 0
    while norm > SOLVER_TOL and it < max_iterations:
        it += 1
        J = _jacobian(resid, x, r)
        try:
            dx = -np.linalg.lstsq(J, r, rcond=None)[0]
        except np.linalg.LinAlgError as exc:
            raise NoConvergence(f"singular Jacobian: {exc}") from None
        lam = 1.0
        while lam > 1e-6:
            xt = x + lam * dx
            xt[0] = max(xt[0], 0.0)
            if xt[1] > f_min:
                try:
                    rt = resid(xt)
                except (DegeneratePerturbation, NegativeDetuning):
                    rt = None
                if rt is not None and np.max(np.abs(rt)) < norm:
                    break
            lam *= 0.5
        else:
            break
        x, r, norm = xt, rt, float(np.max(np.abs(rt)))
    if not norm < SUCCESS_TOL:
        raise NoConvergence(f"free inversion stalled at residual {norm:.3g} GHz")

    J = _jacobian(resid, x, r)
    cond = float(np.linalg.cond(J))
    bad = not cond < CONDITION_THRESHOLD
    if bad and warn:
        warnings.warn(
            f"Jacobian condition number {cond:.3g} exceeds {CONDITION_THRESHOLD:g}",
            IllConditionedWarning,
            stacklevel=2,
        )
    a, f = float(x[0]), float(x[1])
    return SensingEstimate(a, f, (a, a), (f, f), norm, "free", cond, bad, iterations=it)


def invert_fixed(inp: SensingInput, order: int = 4, max_iterations: int = 200) -> SensingEstimate:
    """Solve for ``A_D`` at the known drive frequency from ``omega01`` alone.

    Raises
    ------
    NoConvergence
        If no bracket or root is found.
    InconsistentInput
        If the ``omega02/2`` mismatch exceeds three times its propagated
        measurement uncertainty.
    """
    if inp.omega_d_known is None:
        raise InvalidParams("fixed mode needs omega_d_known")
    c = inp.circuit
    f_d = inp.omega_d_known
    if f_d - c.omega01 <= 0:
        raise NegativeDetuning(f"drive {f_d} GHz is not above omega01 = {c.omega01} GHz")

    def lines(a):
        return forward_observables(c, DriveTone(a, f_d), order)

    def g(a):
        return lines(a)[0] - inp.omega01_meas

    g0 = g(0.0)
    if abs(g0) <= SOLVER_TOL:
        a = 0.0
        it = 0
    elif g0 < 0:
        raise NoConvergence("omega01 lies above the bare line; no positive amplitude matches")
    else:
        lo, hi = 0.0, max(dispersive_seed(inp)[0], 1e-3)
        it = 0
        while True:
            try:
                ghi = g(hi)
            except DegeneratePerturbation as exc:
                raise NoConvergence(f"no bracket before the series breaks down: {exc}") from None
            if ghi < 0:
                break
            lo, hi = hi, 2 * hi
            it += 1
            if it > 40:
                raise NoConvergence("could not bracket the amplitude")
        try:
            a, info = brentq(g, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps,
                             maxiter=max_iterations, full_output=True)
        except (RuntimeError, DegeneratePerturbation) as exc:
            raise NoConvergence(str(exc)) from None
        it += info.iterations
    l1, l2 = lines(a)
    resid = abs(l1 - inp.omega01_meas)
    if not resid < SUCCESS_TOL:
        raise NoConvergence(f"fixed inversion residual {resid:.3g} GHz")

    # slope ratio of the two lines in amplitude sets the propagated uncertainty
    h = FD_STEP
    lp, lm = lines(a + h), lines(max(a - h, 0.0))
    dh = a + h - max(a - h, 0.0)
    d1 = (lp[0] - lm[0]) / dh
    d2 = (lp[1] - lm[1]) / dh
    ratio = d2 / d1 if d1 != 0 else 0.0
    sigma = max(inp.delta_meas * math.sqrt(1 + ratio**2), 1e-8)
    mismatch = l2 - inp.omega02_half_meas
    if abs(mismatch) > 3 * sigma:
        raise InconsistentInput(
            f"omega02/2 mismatch {mismatch * 1e3:.3g} MHz exceeds 3 x {sigma * 1e3:.3g} MHz"
        )
    a = float(a)
    return SensingEstimate(a, f_d, (a, a), None, float(resid), "fixed",
                           consistency=float(mismatch), iterations=it)


CORNERS = {"++": (1, 1), "+-": (1, -1), "-+": (-1, 1), "--": (-1, -1)}


@dataclass(frozen=True)
class UncertaintyIntervals:
    amplitude: Tuple[float, float]
    frequency: Optional[Tuple[float, float]]
    estimates: Dict[str, SensingEstimate]
    failures: Dict[str, str]


def propagate_uncertainty(
    inp: SensingInput, order: int = 4, mode: Optional[str] = None, delta: Optional[float] = None
) -> UncertaintyIntervals:
    """Intervals spanned by the nominal and the four ``(+-delta, +-delta)`` solves.

    ``mode`` defaults to fixed when the drive frequency is known. ``delta``
    defaults to ``inp.delta_meas``.

    Raises
    ------
    AllCornersFailed
        If none of the four corners can be inverted.
    """
    if mode is None:
        mode = "fixed" if inp.omega_d_known is not None else "free"
    if mode not in ("free", "fixed"):
        raise InvalidParams(f"unknown mode {mode!r}")
    d = inp.delta_meas if delta is None else delta
    solve = invert_fixed if mode == "fixed" else _quiet_free

    estimates = {"nominal": solve(inp, order)}
    failures = {}
    for name, (s1, s2) in CORNERS.items():
        try:
            estimates[name] = solve(inp.shifted(s1 * d, s2 * d), order)
        except (StarkSenseError, InvalidParams) as exc:
            failures[name] = f"{type(exc).__name__}: {exc}"
    if len(failures) == len(CORNERS):
        raise AllCornersFailed("; ".join(f"{k}: {v}" for k, v in failures.items()))
    amps = [e.amplitude for e in estimates.values()]
    freqs = [e.frequency for e in estimates.values()]
    a_int = (min(amps), max(amps))
    f_int = (min(freqs), max(freqs)) if mode == "free" else None
    return UncertaintyIntervals(a_int, f_int, estimates, failures)


def _quiet_free(inp, order):
    return invert_free(inp, order, warn=False)


def sense(inp: SensingInput, order: int = 4, delta: Optional[float] = None) -> SensingEstimate:
    """Invert in the appropriate mode and attach corner intervals."""
    mode = "fixed" if inp.omega_d_known is not None else "free"
    nominal = invert_fixed(inp, order) if mode == "fixed" else invert_free(inp, order)
    unc = propagate_uncertainty(inp, order, mode, delta)
    return replace(
        nominal,
        amplitude_interval=unc.amplitude,
        frequency_interval=unc.frequency,
        corner_failures=unc.failures,
    )


# conversions ---------------------------------------------------------------


def photon_number_from_amplitude(amplitude: float, g: float) -> float:
    """Resonator photon number ``A^2 / (4 g^2)`` for a drive amplitude (GHz)."""
    if not g > 0:
        raise InvalidParams("g must be positive")
    return amplitude**2 / (4 * g**2)


def amplitude_from_photon_number(n: float, g: float) -> float:
    if not g > 0:
        raise InvalidParams("g must be positive")
    if n < 0:
        raise InvalidParams("photon number must be non-negative")
    return 2 * g * math.sqrt(n)


def _loaded_q(q_c, q_i):
    if not (q_c > 0 and q_i > 0):
        raise InvalidParams("quality factors must be positive")
    return q_c * q_i / (q_c + q_i)


def photon_number_from_feedline_power(power_w: float, q_c: float, q_i: float, omega_r: float) -> float:
    """Photons in a notch resonator fed with ``power_w`` watts.

    ``omega_r`` is the ordinary resonator frequency in GHz.
    """
    if not omega_r > 0:
        raise InvalidParams("omega_r must be positive")
    if power_w < 0:
        raise InvalidParams("power must be non-negative")
    w = 2 * math.pi * omega_r * 1e9
    q_l = _loaded_q(q_c, q_i)
    return 4 * power_w * q_l**2 / (q_c * hbar * w**2)


def feedline_power_from_photon_number(n: float, q_c: float, q_i: float, omega_r: float) -> float:
    """Inverse of :func:`photon_number_from_feedline_power` (watts)."""
    if not omega_r > 0:
        raise InvalidParams("omega_r must be positive")
    if n < 0:
        raise InvalidParams("photon number must be non-negative")
    w = 2 * math.pi * omega_r * 1e9
    q_l = _loaded_q(q_c, q_i)
    return n * q_c * hbar * w**2 / (4 * q_l**2)


def dbm_to_watts(dbm: float) -> float:
    return 1e-3 * 10 ** (dbm / 10)


def watts_to_dbm(watts: float) -> float:
    if watts <= 0:
        return -math.inf
    return 10 * math.log10(watts / 1e-3)


@dataclass(frozen=True)
class ResonatorParams:
    """Readout resonator used to convert on-chip amplitude to feedline power."""

    g: float
    q_c: float
    q_i: float
    omega_r: float

    def __post_init__(self):
        if not (self.g > 0 and self.q_c > 0 and self.q_i > 0 and self.omega_r > 0):
            raise InvalidParams("resonator parameters must be positive")


def attenuation_estimate(amplitude: float, source_dbm: float, resonator: ResonatorParams) -> float:
    """Line attenuation in dB (negative for loss) from source to chip."""
    n = photon_number_from_amplitude(amplitude, resonator.g)
    p = feedline_power_from_photon_number(n, resonator.q_c, resonator.q_i, resonator.omega_r)
    return watts_to_dbm(p) - source_dbm


# calibration ---------------------------------------------------------------


@dataclass(frozen=True)
class CalibrationPoint:
    drive_frequency: float
    source_dbm: float
    amplitude: float
    amplitude_interval: Tuple[float, float]
    attenuation_db: float
    status: str = "ok"

    @property
    def ok(self) -> bool:
        return self.status == "ok"


@dataclass(frozen=True)
class CalibrationCurve:
    points: Tuple[CalibrationPoint, ...]

    def __len__(self):
        return len(self.points)

    @property
    def amplitudes(self) -> np.ndarray:
        return np.array([p.amplitude for p in self.points])

    @property
    def attenuations(self) -> np.ndarray:
        return np.array([p.attenuation_db for p in self.points])


def calibration_curve(
    inputs: Sequence[SensingInput],
    source_dbm: Sequence[float],
    resonator: Optional[ResonatorParams] = None,
    order: int = 4,
) -> CalibrationCurve:
    """Fixed-frequency inversion for every drive frequency.

    Rows that fail carry NaN values and the exception name as ``status``.
    Attenuation needs ``resonator``; without it the column is NaN.
    """
    if len(inputs) != len(source_dbm):
        raise InvalidParams("need one source power per input row")
    points: List[CalibrationPoint] = []
    nan = float("nan")
    for inp, p_src in zip(inputs, source_dbm):
        if inp.omega_d_known is None:
            raise InvalidParams("calibration rows need the drive frequency")
        try:
            est = sense(inp, order)
        except (StarkSenseError, InvalidParams) as exc:
            points.append(CalibrationPoint(inp.omega_d_known, p_src, nan, (nan, nan), nan,
                                           type(exc).__name__))
            continue
        att = nan
        if resonator is not None and est.amplitude > 0:
            att = attenuation_estimate(est.amplitude, p_src, resonator)
        points.append(CalibrationPoint(inp.omega_d_known, p_src, est.amplitude,
                                       est.amplitude_interval, att))
    return CalibrationCurve(tuple(points))
