"""Lindblad master-equation spectroscopy of a driven, probed transmon.

The Hamiltonian is ``sum_k E_k |k><k| + f(t) (a + a^dag)`` with
``f(t) = A_P cos(w_P t) + A_D cos(w_D t)`` and the ladder ``a`` taken from
the exact transmon eigenbasis. Dissipation uses

    sqrt((n_th + 1)/T1) a,   sqrt(n_th/T1) a^dag,   sqrt(1/T2) a^dag a

where the dephasing operator is built from the same (normalized) ladder.
Note that this is not the conventional pure-dephasing rate
``1/T2 - 1/(2 T1)``; linewidths therefore mix T1 and T2.

Internally the equation is integrated in the frame rotating at
``w01 * n``. The transformation is exact (counter-rotating terms are kept),
so results are identical to a lab-frame integration but the state carries
no fast carrier phase. Times are in ns and frequencies in GHz throughout;
angular factors are applied internally.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import signal
from scipy.integrate import trapezoid

from . import _kernels
from .errors import InvalidParams, StepSizeFailure, WindowTooShort
from .qudit import DriveTone, ProbeTone
from .transmon import CooperPairBoxParams, LadderOperators, diagonalize

TWO_PI = 2.0 * np.pi
THREADS_ENV = "STARK_SENSE_THREADS"
INTEGRATORS = ("auto", "rk4", "dp5")


@dataclass(frozen=True)
class SimulationConfig:
    """Relaxation, truncation and integration settings.

    Parameters
    ----------
    T1, T2 : float
        Relaxation and dephasing times in ns. ``math.inf`` disables the channel.
    n_therm : float
        Thermal population of the bath.
    T_sim : float
        Total simulated time in ns.
    levels : int
        Retained transmon levels.
    integrator_tolerance : float
        Relative (and absolute) tolerance of the adaptive integrator.
    averaging_window_fraction : float
        The population is averaged over the last ``fraction * T1`` of the run.
    steps_per_period : int
        Upper bound on the step: at least this many steps per period of the
        fastest drive component ``nu_P + nu_D``.
    integrator : str
        ``"dp5"`` (adaptive Dormand-Prince), ``"rk4"`` (fixed-step classical
        Runge-Kutta at the step bound) or ``"auto"``: adaptive for single
        trajectories, fixed-step for sweeps.
    """

    T1: float = 250.0
    T2: float = 250.0
    n_therm: float = 0.1
    T_sim: float = 500.0
    levels: int = 10
    integrator_tolerance: float = 1e-8
    averaging_window_fraction: float = 0.25
    steps_per_period: int = 50
    integrator: str = "auto"

    def __post_init__(self):
        if not (self.T1 > 0 and self.T2 > 0):
            raise InvalidParams("T1 and T2 must be positive")
        if not 0 <= self.n_therm < 1:
            raise InvalidParams("n_therm must lie in [0, 1)")
        if not self.T_sim > 0:
            raise InvalidParams("T_sim must be positive")
        if self.levels < 3:
            raise InvalidParams("levels must be >= 3")
        if not 0 < self.integrator_tolerance < 1e-2:
            raise InvalidParams("integrator_tolerance must lie in (0, 1e-2)")
        if not 0 < self.averaging_window_fraction:
            raise InvalidParams("averaging_window_fraction must be positive")
        if self.steps_per_period < 4:
            raise InvalidParams("steps_per_period must be >= 4")
        if self.integrator not in INTEGRATORS:
            raise InvalidParams(f"integrator must be one of {INTEGRATORS}")
        if self.T2 > 2 * self.T1:
            warnings.warn("T2 > 2 T1 is unphysical", stacklevel=3)
        if self.window > self.T_sim:
            raise InvalidParams("averaging window longer than T_sim")

    @property
    def window(self) -> float:
        """Length of the averaging window in ns."""
        if not math.isfinite(self.T1):
            return self.T_sim * self.averaging_window_fraction
        return self.averaging_window_fraction * self.T1

    @property
    def window_start(self) -> float:
        return self.T_sim - self.window

    def scaled_times(self, factor: float) -> "SimulationConfig":
        """Copy with T1, T2 and T_sim multiplied by ``factor``."""
        return replace(self, T1=self.T1 * factor, T2=self.T2 * factor, T_sim=self.T_sim * factor)


@dataclass(frozen=True)
class DensityState:
    """Density matrix at a given time (ns)."""

    matrix: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InvalidParams("density matrix must be square")
        if np.max(np.abs(m - m.conj().T)) > 1e-10:
            raise InvalidParams("density matrix is not Hermitian")
        if abs(np.trace(m).real - 1) > 1e-6:
            raise InvalidParams("density matrix trace differs from 1")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def basis(cls, levels: int, k: int = 0, time: float = 0.0) -> "DensityState":
        m = np.zeros((levels, levels), dtype=complex)
        m[k, k] = 1.0
        return cls(m, time)

    @property
    def levels(self) -> int:
        return self.matrix.shape[0]

    @property
    def populations(self) -> np.ndarray:
        return self.matrix.diagonal().real.copy()

    @property
    def mean_level(self) -> float:
        return float(np.dot(np.arange(self.levels), self.populations))


@dataclass(frozen=True)
class DrivenQudit:
    """Time-dependent Hamiltonian: eigenenergies, ladder, probe and drive."""

    energies: np.ndarray
    ladder: np.ndarray
    probe: Optional[ProbeTone] = None
    drive: Optional[DriveTone] = None

    def __post_init__(self):
        e = np.asarray(self.energies, dtype=float)
        a = np.asarray(self.ladder, dtype=float)
        if e.ndim != 1 or len(e) < 2:
            raise InvalidParams("need at least two energies")
        if a.shape != (len(e) - 1,):
            raise InvalidParams("ladder must have len(energies) - 1 elements")
        object.__setattr__(self, "energies", e - e[0])
        object.__setattr__(self, "ladder", a)

    @classmethod
    def from_transmon(
        cls, params: CooperPairBoxParams, levels: int, probe=None, drive=None
    ) -> "DrivenQudit":
        spectrum, ladder = diagonalize(params, levels)
        return cls(spectrum.energies, ladder.elements, probe, drive)

    @property
    def levels(self) -> int:
        return len(self.energies)

    @property
    def omega01(self) -> float:
        return float(self.energies[1])

    def with_tones(self, probe=None, drive=None) -> "DrivenQudit":
        return DrivenQudit(self.energies, self.ladder, probe, drive)


@dataclass(frozen=True)
class Trajectory:
    """Sampled evolution plus the integrator's own average of the mean level."""

    times: np.ndarray
    states: np.ndarray
    window_start: float = float("nan")
    window_integral: float = float("nan")
    steps: int = 0
    rejected: int = 0

    def __len__(self):
        return len(self.times)

    def __getitem__(self, i) -> DensityState:
        return DensityState(self.states[i], float(self.times[i]))

    @property
    def final(self) -> DensityState:
        return self[-1]

    def mean_levels(self) -> np.ndarray:
        k = np.arange(self.states.shape[1])
        return np.einsum("k,tkk->t", k, self.states).real


def build_collapse_operators(config: SimulationConfig, ladder) -> List[np.ndarray]:
    """Return ``[sqrt((n_th+1)/T1) a, sqrt(n_th/T1) a^dag, sqrt(1/T2) a^dag a]``.

    ``ladder`` is a :class:`LadderOperators` or the array of nearest-neighbour
    elements. Rates are in 1/ns.
    """
    elements = ladder.elements if isinstance(ladder, LadderOperators) else np.asarray(ladder)
    a = np.diag(np.asarray(elements, dtype=float), 1)
    g1 = 1.0 / config.T1
    g2 = 1.0 / config.T2
    return [
        np.sqrt((config.n_therm + 1) * g1) * a,
        np.sqrt(config.n_therm * g1) * a.T,
        np.sqrt(g2) * (a.T @ a),
    ]


def lindblad_rhs(rho, t, qudit: DrivenQudit, config: SimulationConfig) -> np.ndarray:
    """Dense lab-frame right-hand side ``d rho/dt`` (reference implementation)."""
    a = np.diag(qudit.ladder, 1)
    x = a + a.T
    f = 0.0
    for tone in (qudit.probe, qudit.drive):
        if tone is not None:
            f += tone.amplitude * np.cos(TWO_PI * tone.frequency * t)
    h = TWO_PI * (np.diag(qudit.energies) + f * x)
    out = -1j * (h @ rho - rho @ h)
    for c in build_collapse_operators(config, qudit.ladder):
        cd = c.conj().T
        out += c @ rho @ cd - 0.5 * (cd @ c @ rho + rho @ cd @ c)
    return out


def _generator(qudit: DrivenQudit, config: SimulationConfig, wref: float):
    """Padded coefficient arrays for the compiled right-hand side."""
    d = qudit.levels
    a = qudit.ladder
    e = TWO_PI * (qudit.energies - np.arange(d) * wref)
    m = np.concatenate([[0.0], a**2])
    p = np.concatenate([a**2, [0.0]])
    rd = (config.n_therm + 1) / config.T1
    ru = config.n_therm / config.T1
    rp = 1.0 / config.T2
    G = -0.5 * (
        rd * (m[:, None] + m[None, :])
        + ru * (p[:, None] + p[None, :])
        + rp * (m[:, None] - m[None, :]) ** 2
    )
    Ki = -(e[:, None] - e[None, :])
    a_lo = np.concatenate([a, [0.0]])
    a_hi = np.concatenate([[0.0], a])
    Rd = rd * np.outer(a_lo, a_lo)
    Ru = ru * np.outer(a_hi, a_hi)
    ap = np.zeros(d + 2)
    ap[1:d] = a
    nvec = np.zeros(d + 2)
    nvec[1:-1] = np.arange(d)
    pad = lambda M: np.ascontiguousarray(np.pad(M, 1))
    return pad(G), pad(Ki), ap, pad(Rd), pad(Ru), nvec


def _to_frame(rho, t, wref):
    ph = np.exp(1j * TWO_PI * wref * np.multiply.outer(t, np.arange(rho.shape[-1])))
    return rho * ph[..., :, None] * ph.conj()[..., None, :]


def _from_frame(rho, t, wref):
    return _to_frame(rho, t, -wref)


def _pack(rhos):
    """(nc, d, d) complex -> padded split arrays (d+2, d+2, nc)."""
    nc, d, _ = rhos.shape
    xr = np.zeros((d + 2, d + 2, nc))
    xi = np.zeros((d + 2, d + 2, nc))
    xr[1:-1, 1:-1] = np.moveaxis(rhos.real, 0, -1)
    xi[1:-1, 1:-1] = np.moveaxis(rhos.imag, 0, -1)
    return xr, xi


def _unpack(xr, xi):
    """Padded upper-triangle arrays -> full Hermitian (..., nc, d, d)."""
    up = xr[..., 1:-1, 1:-1, :] + 1j * xi[..., 1:-1, 1:-1, :]
    up = np.moveaxis(up, -1, -3)
    out = np.triu(up)
    return out + np.conj(np.swapaxes(np.triu(up, 1), -1, -2))


def _method(config: SimulationConfig, default: str):
    name = config.integrator if config.integrator != "auto" else default
    if name == "rk4":
        return False, _kernels.RK4_A, _kernels.RK4_B, _kernels.RK4_C, _kernels.RK4_E, False
    return True, _kernels.DP5_A, _kernels.DP5_B, _kernels.DP5_C, _kernels.DP5_E, True


def _run(qudit, config, rhos, probe_amp, probe_freq, stops, store, t_window, default_method,
         t0=0.0):
    """Integrate a batch sharing one drive; probe tones may differ per cell."""
    wref = qudit.omega01
    Kr, Ki, ap, Rd, Ru, nvec = _generator(qudit, config, wref)
    xr, xi = _pack(np.asarray(rhos, dtype=complex))
    nc = xr.shape[2]
    f_probe = float(np.max(probe_freq * (probe_amp != 0), initial=0.0))
    f_drive = qudit.drive.frequency if qudit.drive is not None and qudit.drive.amplitude else 0.0
    f_fast = max(f_probe + f_drive, qudit.omega01)
    hmax = 1.0 / (config.steps_per_period * f_fast)
    adaptive, A, B, C, E, fsal = _method(config, default_method)
    n_store = int(np.count_nonzero(store))
    snap_r = np.zeros((n_store,) + xr.shape)
    snap_i = np.zeros((n_store,) + xr.shape)
    amp_d = qudit.drive.amplitude if qudit.drive is not None else 0.0
    w_d = qudit.drive.frequency if qudit.drive is not None else 0.0
    span = float(stops[-1]) - t0
    max_steps = int(50 * span / hmax) + 1000
    tol = config.integrator_tolerance
    acc, n_acc, n_rej, status = _kernels.integrate(
        float(t0), np.asarray(stops, dtype=float), np.asarray(store, dtype=np.bool_),
        hmax, adaptive, tol, tol, max_steps,
        xr, xi, Kr, Ki, ap, Rd, Ru,
        TWO_PI * np.asarray(probe_amp, dtype=float), TWO_PI * np.asarray(probe_freq, dtype=float),
        TWO_PI * amp_d, TWO_PI * w_d, TWO_PI * wref,
        nvec, t_window, snap_r, snap_i, A, B, C, E, fsal,
    )
    return acc, n_acc, n_rej, status, snap_r, snap_i


def evolve(
    qudit: DrivenQudit,
    config: SimulationConfig,
    initial: Optional[DensityState] = None,
    times: Optional[Sequence[float]] = None,
    sample_interval: float = 1.0,
) -> Trajectory:
    """Integrate the master equation from ``initial`` (default ``|0><0|``).

    Parameters
    ----------
    times : sequence of float, optional
        Sample times in ns, ascending and after the initial time. Defaults to
        a grid of spacing ``sample_interval`` up to ``config.T_sim``.

    Returns
    -------
    Trajectory
        Lab-frame states at the initial time and every sample time. The
        window integral covers ``[T_sim - window, T_sim]`` when the samples
        reach ``T_sim``.

    Raises
    ------
    StepSizeFailure
        If the step size collapses or the state becomes non-finite.
    """
    if initial is None:
        initial = DensityState.basis(qudit.levels)
    if initial.levels != qudit.levels:
        raise InvalidParams("initial state dimension does not match the Hamiltonian")
    t0 = initial.time
    if times is None:
        n = max(1, int(round((config.T_sim - t0) / sample_interval)))
        times = np.linspace(t0, config.T_sim, n + 1)[1:]
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) <= 0) or (len(times) and times[0] <= t0):
        raise InvalidParams("sample times must be ascending and after the initial time")

    t_window = config.window_start
    stops = times
    if t0 < t_window < times[-1] and not np.any(np.isclose(times, t_window, rtol=0, atol=1e-9)):
        stops = np.sort(np.append(times, t_window))
    store = np.isin(stops, times)

    rho0 = _to_frame(initial.matrix, t0, qudit.omega01)[None]
    probe = qudit.probe
    amp = np.array([probe.amplitude if probe is not None else 0.0])
    freq = np.array([probe.frequency if probe is not None else 0.0])
    acc, n_acc, n_rej, status, sr, si = _run(
        qudit, config, rho0, amp, freq, stops, store, t_window, "dp5", t0=t0
    )
    if status != _kernels.OK:
        raise StepSizeFailure(_status_message(status, n_acc, n_rej))
    states = _unpack(sr, si)[:, 0]
    states = _from_frame(states, times, qudit.omega01)
    all_t = np.concatenate([[t0], times])
    all_s = np.concatenate([initial.matrix[None], states])
    covered = t0 <= t_window and abs(times[-1] - config.T_sim) < 1e-9
    integral = float(acc[0]) if covered else float("nan")
    return Trajectory(all_t, all_s, t_window, integral, n_acc, n_rej)


def _status_message(status, n_acc, n_rej):
    what = {
        _kernels.STEP_UNDERFLOW: "step size underflow",
        _kernels.MAX_STEPS: "step budget exhausted",
        _kernels.NOT_FINITE: "state became non-finite",
    }.get(status, f"status {status}")
    return f"integration failed ({what}) after {n_acc} accepted / {n_rej} rejected steps"


def averaged_population(trajectory: Trajectory, config: SimulationConfig) -> float:
    """Time average of ``sum_k k rho_kk`` over ``[T_sim - window, T_sim]``.

    Uses the integrator's own quadrature when the trajectory carries it,
    otherwise the trapezoidal rule on the samples.

    Raises
    ------
    WindowTooShort
        If the samples do not cover the window.
    """
    t = trajectory.times
    start, stop = config.window_start, config.T_sim
    if len(t) < 2 or t[0] > start + 1e-9 or t[-1] < stop - 1e-9:
        raise WindowTooShort(
            f"trajectory spans [{t[0]:g}, {t[-1]:g}] ns, window is [{start:g}, {stop:g}] ns"
        )
    if np.isfinite(trajectory.window_integral) and abs(trajectory.window_start - start) < 1e-9:
        return trajectory.window_integral / config.window
    n = trajectory.mean_levels()
    inside = (t >= start - 1e-9) & (t <= stop + 1e-9)
    ti, ni = t[inside], n[inside]
    # include interpolated end points when samples do not land on them
    if ti[0] > start:
        ti = np.concatenate([[start], ti])
        ni = np.concatenate([[np.interp(start, t, n)], ni])
    if ti[-1] < stop:
        ti = np.concatenate([ti, [stop]])
        ni = np.concatenate([ni, [np.interp(stop, t, n)]])
    return float(trapezoid(ni, ti) / (stop - start))


@dataclass(frozen=True)
class SpectrumGrid:
    """Time-averaged mean level on a probe-frequency x drive-setting grid.

    ``values[i, j]`` belongs to ``probe_frequencies[i]`` and
    ``drive_values[j]``. Failed cells hold NaN and are flagged in ``failed``.
    """

    probe_frequencies: np.ndarray
    drive_values: np.ndarray
    values: np.ndarray
    normalized: bool = False
    failed: Optional[np.ndarray] = None
    drive_label: str = "amplitude_ghz"

    def __post_init__(self):
        p = np.asarray(self.probe_frequencies, dtype=float)
        d = np.asarray(self.drive_values, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if v.shape != (len(p), len(d)):
            raise InvalidParams(f"values shape {v.shape} does not match axes ({len(p)}, {len(d)})")
        f = np.zeros(v.shape, bool) if self.failed is None else np.asarray(self.failed, bool)
        object.__setattr__(self, "probe_frequencies", p)
        object.__setattr__(self, "drive_values", d)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "failed", f)

    def column(self, j: int) -> np.ndarray:
        return self.values[:, j]


def frequency_axis(start: float, stop: float, step: float) -> np.ndarray:
    """Inclusive grid ``start, start + step, ..., stop`` (GHz)."""
    if not step > 0:
        raise InvalidParams("step must be positive")
    if stop < start:
        raise InvalidParams("stop must not be below start")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(n)


def thread_count(requested: Optional[int] = None) -> int:
    """Worker threads for sweeps: explicit value, else the environment cap, else CPUs."""
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise InvalidParams(f"{THREADS_ENV} must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def sweep_spectrum(
    qudit: DrivenQudit,
    probe_frequencies: Sequence[float],
    drive_amplitudes: Sequence[float],
    drive_frequency: float,
    probe_amplitude: float,
    config: SimulationConfig,
    threads: Optional[int] = None,
    batch_size: int = 64,
) -> SpectrumGrid:
    """Simulate two-tone spectroscopy on a grid and average the mean level.

    Every cell starts in ``|0>`` and is integrated to ``config.T_sim``. Cells
    are grouped into fixed batches along the probe axis of each drive column,
    so the result does not depend on the number of threads. A batch that
    fails is retried cell by cell; cells that still fail are NaN and flagged.
    """
    probe = np.asarray(probe_frequencies, dtype=float)
    drives = np.asarray(drive_amplitudes, dtype=float)
    if probe.size == 0 or drives.size == 0:
        raise InvalidParams("probe and drive axes must be non-empty")
    if qudit.levels != config.levels:
        raise InvalidParams(
            f"qudit has {qudit.levels} levels but config asks for {config.levels}"
        )
    stops = np.array([config.window_start, config.T_sim])
    store = np.array([False, False])
    tasks = []
    for j, amp in enumerate(drives):
        q = qudit.with_tones(drive=DriveTone(float(amp), drive_frequency))
        for lo in range(0, probe.size, batch_size):
            tasks.append((j, lo, min(lo + batch_size, probe.size), q))

    def work(task):
        j, lo, hi, q = task
        freqs = probe[lo:hi]
        amps = np.full(freqs.shape, probe_amplitude)
        out = np.full(freqs.shape, np.nan)
        bad = np.zeros(freqs.shape, bool)
        rho0 = np.zeros((len(freqs), q.levels, q.levels), complex)
        rho0[:, 0, 0] = 1.0
        acc, _, _, status, _, _ = _run(q, config, rho0, amps, freqs, stops, store,
                                       config.window_start, "rk4")
        if status == _kernels.OK:
            out[:] = acc / config.window
            return j, lo, hi, out, bad
        for i in range(len(freqs)):
            acc, _, _, status, _, _ = _run(q, config, rho0[i:i + 1], amps[i:i + 1],
                                           freqs[i:i + 1], stops, store,
                                           config.window_start, "rk4")
            if status == _kernels.OK:
                out[i] = acc[0] / config.window
            else:
                bad[i] = True
        return j, lo, hi, out, bad

    values = np.full((probe.size, drives.size), np.nan)
    failed = np.zeros(values.shape, bool)
    n_threads = min(thread_count(threads), len(tasks))
    if n_threads == 1:
        results = map(work, tasks)
    else:
        pool = ThreadPoolExecutor(n_threads)
        results = pool.map(work, tasks)
    for j, lo, hi, out, bad in results:
        values[lo:hi, j] = out
        failed[lo:hi, j] = bad
    if n_threads > 1:
        pool.shutdown()
    return SpectrumGrid(probe, drives, values, False, failed)


def normalize_columns(grid: SpectrumGrid) -> SpectrumGrid:
    """Rescale every column to ``[0, 1]``; constant columns become 0."""
    v = grid.values
    lo = np.nanmin(v, axis=0) if v.size else v
    hi = np.nanmax(v, axis=0) if v.size else v
    span = hi - lo
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(span > 0, (v - lo) / np.where(span > 0, span, 1.0), 0.0)
    out[np.isnan(v)] = np.nan
    return replace(grid, values=out, normalized=True)


@dataclass(frozen=True)
class Peak:
    frequency: float
    height: float
    width: float


@dataclass(frozen=True)
class PeakSet:
    """Peaks per grid column, each list sorted by frequency."""

    columns: Tuple[Tuple[Peak, ...], ...]

    def __getitem__(self, j) -> Tuple[Peak, ...]:
        return self.columns[j]

    def __len__(self):
        return len(self.columns)

    def nearest(self, j: int, frequency: float) -> Optional[Peak]:
        peaks = self.columns[j]
        if not peaks:
            return None
        return min(peaks, key=lambda p: abs(p.frequency - frequency))


def column_peaks(freqs: np.ndarray, column: np.ndarray, prominence_threshold: float = 0.05):
    """Peaks of one column with parabolic sub-bin refinement.

    Widths are full widths at half prominence in GHz.
    """
    y = np.nan_to_num(np.asarray(column, dtype=float), nan=-np.inf)
    if y.size < 3 or not np.isfinite(y).any():
        return ()
    finite_min = np.min(y[np.isfinite(y)])
    y = np.where(np.isfinite(y), y, finite_min)
    idx, props = signal.find_peaks(y, prominence=prominence_threshold, plateau_size=1)
    if idx.size == 0:
        return ()
    # plateaus resolve toward the lower frequency
    idx = props["left_edges"]
    widths, _, left, right = signal.peak_widths(y, idx, rel_height=0.5)
    pos = np.arange(y.size, dtype=float)
    peaks = []
    for n, i in enumerate(idx):
        x = float(i)
        if 0 < i < y.size - 1:
            y0, y1, y2 = y[i - 1], y[i], y[i + 1]
            den = y0 - 2 * y1 + y2
            if den < 0:
                x = i + 0.5 * (y0 - y2) / den
        f = float(np.interp(x, pos, freqs))
        w = float(np.interp(right[n], pos, freqs) - np.interp(left[n], pos, freqs))
        peaks.append(Peak(f, float(y[i]), w))
    return tuple(sorted(peaks, key=lambda p: p.frequency))


def find_peaks(grid: SpectrumGrid, prominence_threshold: float = 0.05) -> PeakSet:
    """Local maxima of every column whose prominence exceeds the threshold."""
    return PeakSet(
        tuple(
            column_peaks(grid.probe_frequencies, grid.values[:, j], prominence_threshold)
            for j in range(len(grid.drive_values))
        )
    )
