"""Analytic model of a strongly driven anharmonic ladder.

The qudit is ``H/h = omega_q n - (gamma/4) n (n + 1)`` driven by
``A_D (a + a^dag) cos(omega_D t)``. In the frame rotating with the drive the
linear drive term is removed by a coherent displacement ``a -> a + alpha``
where ``alpha`` solves ``gamma alpha^3 + 2 Delta alpha - A_D = 0`` with
``Delta = omega_D - omega_q + gamma/2``. The remaining nonlinear terms are
treated with Rayleigh-Schroedinger perturbation theory up to fourth order.

All frequencies are ordinary frequencies in GHz. The displacement cubic and
the energies are homogeneous of degree one in frequency, so no factors of
2 pi appear in this module.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .errors import DegeneratePerturbation, InvalidParams, NegativeDetuning

#: Smallest perturbation denominator (GHz) tolerated before the series is
#: declared meaningless.
DENOMINATOR_EPS = 1e-3

#: Extra intermediate levels kept above ``k_max`` in the perturbation sums.
#: The perturbation couples levels at most two apart, so four applications
#: reach at most eight levels away.
EXTRA_LEVELS = 8


@dataclass(frozen=True)
class CircuitParams:
    """Anharmonic circuit parameters.

    Parameters
    ----------
    omega_q : float
        Harmonic frequency (GHz). The bare 0-1 line sits at ``omega_q - gamma/2``.
    gamma : float
        Nonlinearity (GHz), twice the charging-energy anharmonicity.
    """

    omega_q: float
    gamma: float

    def __post_init__(self):
        if not np.isfinite(self.omega_q) or self.omega_q <= 0:
            raise InvalidParams(f"omega_q must be positive, got {self.omega_q}")
        if not np.isfinite(self.gamma) or self.gamma <= 0:
            raise InvalidParams(f"gamma must be positive, got {self.gamma}")

    @property
    def omega01(self) -> float:
        """Bare 0-1 transition frequency (GHz)."""
        return self.omega_q - self.gamma / 2

    @classmethod
    def from_bare_lines(cls, omega01: float, omega02_half: float) -> "CircuitParams":
        """Circuit reproducing the undriven ``omega01`` and ``omega02/2`` lines."""
        gamma = 4.0 * (omega01 - omega02_half)
        return cls(omega_q=omega01 + gamma / 2, gamma=gamma)

    def scaled(self, factor: float) -> "CircuitParams":
        return CircuitParams(self.omega_q * factor, self.gamma * factor)


@dataclass(frozen=True)
class DriveTone:
    """Strong drive: amplitude and frequency, both in GHz."""

    amplitude: float
    frequency: float

    def __post_init__(self):
        if not np.isfinite(self.amplitude) or self.amplitude < 0:
            raise InvalidParams(f"drive amplitude must be >= 0, got {self.amplitude}")
        if not np.isfinite(self.frequency) or self.frequency <= 0:
            raise InvalidParams(f"drive frequency must be positive, got {self.frequency}")


@dataclass(frozen=True)
class ProbeTone:
    """Weak spectroscopy probe: amplitude and frequency, both in GHz."""

    amplitude: float
    frequency: float

    def __post_init__(self):
        if not np.isfinite(self.amplitude) or self.amplitude < 0:
            raise InvalidParams(f"probe amplitude must be >= 0, got {self.amplitude}")
        if not np.isfinite(self.frequency) or self.frequency <= 0:
            raise InvalidParams(f"probe frequency must be positive, got {self.frequency}")


@dataclass(frozen=True)
class LevelSolution:
    """Result of :func:`lab_transitions`.

    ``rotating_energies[k]`` is the drive-frame energy of level ``k``;
    ``lab_transitions[k]`` the ``k``-photon probe line ``(E_k - E_0)/k + omega_D``.
    Index 0 of ``lab_transitions`` has no meaning and holds NaN.
    """

    alpha: float
    order: int
    rotating_energies: np.ndarray
    lab_transitions: np.ndarray
    drive_frequency: float

    @property
    def k_max(self) -> int:
        return len(self.rotating_energies) - 1

    def line(self, k: int) -> float:
        if not 1 <= k <= self.k_max:
            raise IndexError(f"line index {k} outside 1..{self.k_max}")
        return float(self.lab_transitions[k])

    @property
    def lab_energies(self) -> np.ndarray:
        """Lab-frame level energies above the ground state (GHz)."""
        e = self.rotating_energies
        k = np.arange(len(e))
        return e - e[0] + k * self.drive_frequency


@dataclass(frozen=True)
class MultiPhotonLine:
    """A probe resonance ``n_probe*f_P + n_drive*f_D = E_k`` (lab frame)."""

    level: int
    n_probe: int
    n_drive: int
    probe_frequency: float


@dataclass(frozen=True)
class AlphaRoots:
    """All real roots of the displacement cubic, ascending."""

    roots: Tuple[float, ...]
    discriminant: float

    @property
    def count(self) -> int:
        return len(self.roots)


def detuning(circuit: CircuitParams, drive: DriveTone) -> float:
    """Drive detuning from the bare 0-1 line, ``omega_D - omega_q + gamma/2``."""
    return drive.frequency - circuit.omega_q + circuit.gamma / 2


def _cubic(alpha, gamma, delta, amplitude):
    return gamma * alpha**3 + 2.0 * delta * alpha - amplitude


def _polish(alpha, gamma, delta, amplitude, iterations=4):
    for _ in range(iterations):
        slope = 3.0 * gamma * alpha**2 + 2.0 * delta
        if slope == 0.0:
            break
        step = _cubic(alpha, gamma, delta, amplitude) / slope
        alpha -= step
        if abs(step) <= 1e-17 * max(1.0, abs(alpha)):
            break
    return alpha


def solve_alpha(circuit: CircuitParams, drive: DriveTone) -> float:
    """Displacement ``alpha`` for a drive above the 0-1 line.

    For positive detuning the cubic is strictly increasing, so its only real
    root is bracketed by ``[0, A_D / (2 Delta)]``. A safeguarded Newton
    iteration inside that bracket converges to machine precision; the closed
    form (:func:`alpha_closed_form`) is kept as a cross-check only because it
    loses accuracy for small detunings.

    Raises
    ------
    NegativeDetuning
        If ``Delta <= 0``; call :func:`enumerate_alpha_roots` instead.
    """
    gamma = circuit.gamma
    delta = detuning(circuit, drive)
    amplitude = drive.amplitude
    if delta <= 0:
        raise NegativeDetuning(
            f"detuning {delta:.6g} GHz <= 0; the cubic may have three real roots"
        )
    if amplitude == 0:
        return 0.0

    lo, hi = 0.0, amplitude / (2.0 * delta)
    # Cap by the strong-drive asymptote so Newton starts near the root.
    hi = min(hi, (amplitude / gamma) ** (1.0 / 3.0))
    alpha = 0.5 * (lo + hi)
    for _ in range(200):
        f = _cubic(alpha, gamma, delta, amplitude)
        if f > 0:
            hi = alpha
        else:
            lo = alpha
        slope = 3.0 * gamma * alpha**2 + 2.0 * delta
        trial = alpha - f / slope
        if not lo <= trial <= hi:
            trial = 0.5 * (lo + hi)
        if abs(trial - alpha) <= 4 * np.finfo(float).eps * max(abs(trial), 1e-300):
            alpha = trial
            break
        alpha = trial
    return float(_polish(alpha, gamma, delta, amplitude))


def alpha_closed_form(gamma: float, delta: float, amplitude: float) -> float:
    """Cardano-type closed form of the real displacement root (``Delta > 0``)."""
    root = np.sqrt(81 * amplitude**2 * gamma + 96 * delta**3)
    numerator = 2 ** (1 / 3) * (root + 9 * amplitude * np.sqrt(gamma)) ** (2 / 3) - 4 * 3 ** (
        1 / 3
    ) * delta
    denominator = (
        36 * np.sqrt(3 * gamma**3 * (27 * amplitude**2 * gamma + 32 * delta**3))
        + 324 * amplitude * gamma**2
    ) ** (1 / 3)
    return float(numerator / denominator)


def cubic_discriminant(gamma: float, delta: float, amplitude: float) -> float:
    """Discriminant of ``gamma x^3 + 2 delta x - amplitude``.

    Positive: three distinct real roots. Negative: one real root.
    """
    return -4.0 * gamma * (2.0 * delta) ** 3 - 27.0 * gamma**2 * amplitude**2


def critical_amplitude(circuit: CircuitParams, delta: float) -> float:
    """Drive amplitude above which only one real root survives (``Delta < 0``)."""
    if delta >= 0:
        return 0.0
    return float(np.sqrt(-32.0 * delta**3 / (27.0 * circuit.gamma)))


def enumerate_alpha_roots(circuit: CircuitParams, drive: DriveTone) -> AlphaRoots:
    """All real roots of the displacement cubic, for either sign of detuning.

    No root is singled out as physical when three exist.
    """
    gamma = circuit.gamma
    delta = detuning(circuit, drive)
    amplitude = drive.amplitude
    disc = cubic_discriminant(gamma, delta, amplitude)
    roots = np.roots([gamma, 0.0, 2.0 * delta, -amplitude])
    # The discriminant fixes the count; pick the least-imaginary candidates.
    scale = max(abs(disc), gamma * max(abs(delta), amplitude, gamma) ** 3)
    # A vanishing discriminant means a repeated real root; report it twice.
    n_real = 3 if (disc > 0 or abs(disc) <= 1e-12 * scale) else 1
    order = np.argsort(np.abs(roots.imag))
    real = sorted(float(_polish(r.real, gamma, delta, amplitude)) for r in roots[order[:n_real]])
    return AlphaRoots(roots=tuple(real), discriminant=float(disc))


def unperturbed_energies(circuit: CircuitParams, drive: DriveTone, alpha: float, n_levels: int):
    """Diagonal energies of the displaced drive-frame Hamiltonian (GHz)."""
    k = np.arange(n_levels, dtype=float)
    linear = circuit.omega_q - drive.frequency - circuit.gamma / 4 - circuit.gamma * alpha**2
    return linear * k - circuit.gamma * k**2 / 4


def perturbation_matrix(alpha: float, gamma: float, n_levels: int) -> np.ndarray:
    """Off-diagonal part of the displaced drive-frame Hamiltonian (GHz).

    ``-(gamma/4)(alpha^2 a^dag^2 + h.c.) - (gamma/2)(alpha a^dag^2 a + h.c.)``
    in the Fock basis, truncated to ``n_levels``. Only elements with
    ``|m - k|`` equal to 1 or 2 are nonzero.
    """
    k = np.arange(n_levels, dtype=float)
    v = np.zeros((n_levels, n_levels))
    # <k+1| a^dag^2 a |k> = k sqrt(k+1)
    one = -(gamma / 2) * alpha * k[:-1] * np.sqrt(k[:-1] + 1)
    # <k+2| a^dag^2 |k> = sqrt((k+1)(k+2))
    two = -(gamma / 4) * alpha**2 * np.sqrt((k[:-2] + 1) * (k[:-2] + 2))
    v[np.arange(1, n_levels), np.arange(n_levels - 1)] = one
    v[np.arange(2, n_levels), np.arange(n_levels - 2)] = two
    return v + v.T


def _check_order(order):
    if order not in (0, 1, 2, 3, 4):
        raise InvalidParams(f"perturbation order must be 0..4, got {order}")


def rotating_energies(
    circuit: CircuitParams,
    drive: DriveTone,
    k_max: int,
    order: int = 4,
    alpha: Optional[float] = None,
) -> np.ndarray:
    """Drive-frame energies of levels ``0..k_max`` to the given order (GHz).

    Parameters
    ----------
    alpha : float, optional
        Displacement to expand around. Defaults to :func:`solve_alpha`, which
        requires a positive detuning; pass one of the roots from
        :func:`enumerate_alpha_roots` to work below the 0-1 line.
    """
    _check_order(order)
    if k_max < 0:
        raise InvalidParams("k_max must be >= 0")
    if alpha is None:
        alpha = solve_alpha(circuit, drive)
    n = k_max + EXTRA_LEVELS + 1
    e0 = unperturbed_energies(circuit, drive, alpha, n)
    if order < 2 or alpha == 0.0:
        return e0[: k_max + 1].copy()

    v = perturbation_matrix(alpha, circuit.gamma, n)
    reach = 2 if order < 4 else 4
    idx = np.arange(n)
    out = np.empty(k_max + 1)
    for k in range(k_max + 1):
        assert v[k, k] == 0.0  # first-order term vanishes identically
        gap = e0[k] - e0
        near = (idx != k) & (np.abs(idx - k) <= reach) & (np.abs(gap) < DENOMINATOR_EPS)
        if near.any():
            m = int(idx[near][0])
            raise DegeneratePerturbation(
                f"levels {k} and {m} are {abs(gap[m]):.3g} GHz apart; "
                "close to a multi-photon resonance"
            )
        inv = np.zeros(n)
        mask = idx != k
        inv[mask] = 1.0 / gap[mask]
        rv = inv[:, None] * v  # R V, with R the reduced resolvent
        col = rv[:, k]
        e2 = v[k] @ col
        energy = e0[k] + e2
        if order >= 3:
            rvc = rv @ col
            energy += v[k] @ rvc
            if order >= 4:
                e4 = v[k] @ (rv @ rvc) - e2 * (v[k] @ (inv * col))
                energy += e4
        out[k] = energy
    return out


def rotating_energy(
    circuit: CircuitParams,
    drive: DriveTone,
    k: int,
    order: int = 4,
    alpha: Optional[float] = None,
) -> float:
    """Drive-frame energy of level ``k`` (GHz); see :func:`rotating_energies`."""
    if k < 0:
        raise InvalidParams("level index must be >= 0")
    return float(rotating_energies(circuit, drive, k, order, alpha)[k])


def lab_transitions(
    circuit: CircuitParams, drive: DriveTone, k_max: int = 3, order: int = 4
) -> LevelSolution:
    """Lab-frame ``k``-photon probe lines ``omega_{0->k}/k`` for ``k = 1..k_max``."""
    if k_max < 1:
        raise InvalidParams("k_max must be >= 1")
    alpha = solve_alpha(circuit, drive)
    energies = rotating_energies(circuit, drive, k_max, order, alpha)
    k = np.arange(k_max + 1)
    lines = np.full(k_max + 1, np.nan)
    lines[1:] = (energies[1:] - energies[0]) / k[1:] + drive.frequency
    return LevelSolution(
        alpha=alpha,
        order=order,
        rotating_energies=energies,
        lab_transitions=lines,
        drive_frequency=drive.frequency,
    )


def bare_lines(circuit: CircuitParams, k_max: int = 3) -> np.ndarray:
    """Undriven ``k``-photon lines ``omega_q - gamma (k+1)/4``; index 0 is NaN."""
    k = np.arange(k_max + 1, dtype=float)
    lines = circuit.omega_q - circuit.gamma * (k + 1) / 4
    lines[0] = np.nan
    return lines


def dispersive_shift(circuit: CircuitParams, drive: DriveTone, k: int = 1) -> float:
    """Large-detuning level shift ``-gamma (A_D / 2 Delta)^2 k`` (GHz)."""
    delta = detuning(circuit, drive)
    if delta == 0:
        raise ZeroDivisionError("dispersive shift undefined at zero detuning")
    return -circuit.gamma * (drive.amplitude / (2.0 * delta)) ** 2 * k


def mixed_photon_lines(
    circuit: CircuitParams,
    drive: DriveTone,
    k_max: int = 4,
    n_probe_max: int = 2,
    n_drive_max: int = 2,
    order: int = 4,
) -> List[MultiPhotonLine]:
    """Probe frequencies where probe and drive photons together reach level ``k``.

    A line needs ``n_probe + n_drive = k`` photons with ``n_probe >= 1``:
    ``f_P = (E_k - n_drive f_D) / n_probe``. Lines at non-positive
    frequency are dropped. With ``n_drive = 0`` this is the ordinary
    ``k``-photon line of :func:`lab_transitions`.
    """
    solution = lab_transitions(circuit, drive, k_max, order)
    energies = solution.lab_energies
    lines = []
    for k in range(1, k_max + 1):
        for n_drive in range(0, min(n_drive_max, k - 1) + 1):
            n_probe = k - n_drive
            if n_probe > n_probe_max:
                continue
            f = (energies[k] - n_drive * drive.frequency) / n_probe
            if f > 0:
                lines.append(MultiPhotonLine(k, n_probe, n_drive, float(f)))
    return lines
