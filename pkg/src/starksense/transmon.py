"""Exact transmon (Cooper-pair box) eigenstructure in the charge basis.

``H = 4 E_C (n - n_g)^2 - E_J cos(phi)`` is tridiagonal in the charge basis
``|n>, n = -N..N``. Its eigenvalues supply the level energies of the
master-equation model, and charge matrix elements between neighbouring
eigenstates supply the level-dependent ladder operator.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.optimize import root

from .errors import ConvergenceWarning, InvalidParams, NoConvergence
from .qudit import CircuitParams


@dataclass(frozen=True)
class CooperPairBoxParams:
    """Transmon parameters; energies in GHz (``E/h``).

    ``charge_cutoff`` N sets the basis ``n = -N..N``.
    """

    E_C: float
    E_J: float
    n_g: float = 0.0
    charge_cutoff: int = 30

    def __post_init__(self):
        if not self.E_C > 0:
            raise InvalidParams(f"E_C must be positive, got {self.E_C}")
        if not self.E_J > 0:
            raise InvalidParams(f"E_J must be positive, got {self.E_J}")
        if self.charge_cutoff < 10:
            raise InvalidParams("charge_cutoff must be >= 10")
        if self.E_J / self.E_C < 20:
            warnings.warn(
                f"E_J/E_C = {self.E_J / self.E_C:.3g} is outside the transmon regime",
                stacklevel=3,
            )

    @property
    def plasma_frequency(self) -> float:
        return float(np.sqrt(8 * self.E_J * self.E_C))


@dataclass(frozen=True)
class EigenSpectrum:
    """Eigenenergies ``E_k/h`` in GHz, ascending, with ``E_0 = 0``."""

    energies: np.ndarray

    @property
    def levels(self) -> int:
        return len(self.energies)

    @property
    def transitions(self) -> np.ndarray:
        """Neighbouring transition frequencies ``E_{k+1} - E_k``."""
        return np.diff(self.energies)

    @property
    def omega01(self) -> float:
        return float(self.energies[1] - self.energies[0])

    @property
    def anharmonicity(self) -> float:
        """``omega12 - omega01`` (negative for a transmon)."""
        return float(self.energies[2] - 2 * self.energies[1] + self.energies[0])

    def photon_lines(self) -> np.ndarray:
        """Multi-photon lines ``E_k/k`` from the ground state; index 0 is NaN."""
        k = np.arange(self.levels, dtype=float)
        lines = np.full(self.levels, np.nan)
        lines[1:] = (self.energies[1:] - self.energies[0]) / k[1:]
        return lines


@dataclass(frozen=True)
class LadderOperators:
    """Nearest-neighbour lowering operator in the transmon eigenbasis.

    ``elements[k] = |<k|n|k+1>| / |<0|n|1>|``, so the 0-1 element is 1.
    """

    elements: np.ndarray

    @property
    def dimension(self) -> int:
        return len(self.elements) + 1

    @property
    def lowering(self) -> np.ndarray:
        return np.diag(self.elements, 1)

    @property
    def raising(self) -> np.ndarray:
        return self.lowering.T.copy()

    @classmethod
    def harmonic(cls, dimension: int) -> "LadderOperators":
        return cls(np.sqrt(np.arange(1, dimension, dtype=float)))


def charge_hamiltonian(params: CooperPairBoxParams) -> Tuple[np.ndarray, np.ndarray]:
    """Diagonal and off-diagonal of the charge-basis Hamiltonian (GHz)."""
    n = np.arange(-params.charge_cutoff, params.charge_cutoff + 1, dtype=float)
    diag = 4.0 * params.E_C * (n - params.n_g) ** 2
    off = np.full(len(n) - 1, -params.E_J / 2.0)
    return diag, off


def _eigensystem(params, levels):
    diag, off = charge_hamiltonian(params)
    w, v = eigh_tridiagonal(diag, off, select="i", select_range=(0, levels - 1))
    return w, v


def absolute_energies(params: CooperPairBoxParams, levels: int) -> np.ndarray:
    """Lowest eigenvalues without the ground-state reference shift (GHz)."""
    return _eigensystem(params, levels)[0]


def diagonalize(
    params: CooperPairBoxParams, levels: Optional[int] = None, check: bool = True
) -> Tuple[EigenSpectrum, LadderOperators]:
    """Eigenenergies and ladder elements of the lowest ``levels`` states.

    Parameters
    ----------
    levels : int, optional
        Number of retained states. Defaults to :func:`bound_levels`.
    check : bool
        Re-diagonalize with ``charge_cutoff + 5`` and emit a
        :class:`ConvergenceWarning` if any retained energy moves by more
        than 1 kHz.
    """
    if levels is None:
        levels = bound_levels(params)
    basis = 2 * params.charge_cutoff + 1
    if levels < 2 or levels > 2 * params.charge_cutoff:
        raise InvalidParams(f"levels must lie in 2..{2 * params.charge_cutoff}, got {levels}")
    w, v = _eigensystem(params, levels)
    energies = w - w[0]

    if check:
        bigger = CooperPairBoxParams(
            params.E_C, params.E_J, params.n_g, params.charge_cutoff + 5
        )
        w2 = absolute_energies(bigger, levels)
        drift = np.max(np.abs((w2 - w2[0]) - energies))
        if drift > 1e-6:
            warnings.warn(
                f"charge cutoff {params.charge_cutoff} not converged: "
                f"levels move by {drift:.3g} GHz",
                ConvergenceWarning,
                stacklevel=2,
            )

    n = np.arange(-params.charge_cutoff, params.charge_cutoff + 1, dtype=float)
    assert v.shape == (basis, levels)
    elements = np.abs(np.einsum("ik,i,ik->k", v[:, :-1], n, v[:, 1:]))
    elements = elements / elements[0]
    return EigenSpectrum(energies), LadderOperators(elements)


def bound_levels(params: CooperPairBoxParams) -> int:
    """Number of eigenstates lying below the top of the cosine potential.

    Energies are measured from the potential minimum ``-E_J``; the barrier
    height is ``2 E_J``.
    """
    n_max = 2 * params.charge_cutoff
    w = absolute_energies(params, n_max)
    return int(np.count_nonzero(w + params.E_J < 2 * params.E_J))


def analytic_circuit(
    spectrum: EigenSpectrum, mapping: str = "transitions", E_C: Optional[float] = None
) -> CircuitParams:
    """Map an exact spectrum onto the two-parameter analytic ladder.

    ``mapping="transitions"`` matches the undriven 0-1 and 0-2 lines exactly
    (``gamma = -2 * anharmonicity``). ``mapping="charging"`` uses
    ``gamma = 2 E_C`` and keeps ``omega_q = omega01 + gamma/2``.
    """
    if mapping == "transitions":
        gamma = -2.0 * spectrum.anharmonicity
    elif mapping == "charging":
        if E_C is None:
            raise InvalidParams("mapping='charging' needs E_C")
        gamma = 2.0 * E_C
    else:
        raise InvalidParams(f"unknown mapping {mapping!r}")
    return CircuitParams(omega_q=spectrum.omega01 + gamma / 2, gamma=gamma)


def fit_from_transitions(
    omega01: float,
    anharmonicity: float,
    n_g: float = 0.0,
    charge_cutoff: int = 30,
    tol: float = 1e-10,
    max_iterations: int = 100,
) -> CooperPairBoxParams:
    """Find ``(E_C, E_J)`` reproducing ``omega01`` and ``omega12 - omega01``.

    Seeded with ``E_C = -anharmonicity`` and
    ``E_J = (omega01 + E_C)^2 / (8 E_C)``; solved in log-parameters so both
    energies stay positive.

    Raises
    ------
    NoConvergence
        If the solver fails, or the seed needs a wider charge basis than
        ``charge_cutoff`` provides (the harmonic limit ``anharmonicity -> 0``).
    """
    if not omega01 > 0:
        raise InvalidParams("omega01 must be positive")
    if not anharmonicity < 0:
        raise InvalidParams("anharmonicity must be negative")
    ec0 = -anharmonicity
    ej0 = (omega01 + ec0) ** 2 / (8 * ec0)
    # Ground-state charge spread ~ (E_J / 8 E_C)^(1/4); it must fit the basis.
    spread = (ej0 / (8 * ec0)) ** 0.25
    if 6 * spread > charge_cutoff:
        raise NoConvergence(
            f"E_J/E_C ~ {ej0 / ec0:.3g} needs a charge cutoff above {charge_cutoff}"
        )

    target = np.array([omega01, anharmonicity])

    def residual(x):
        ec, ej = np.exp(x)
        w = absolute_energies(CooperPairBoxParams(ec, ej, n_g, charge_cutoff), 3)
        return np.array([w[1] - w[0], w[2] - 2 * w[1] + w[0]]) - target

    with warnings.catch_warnings():
        # intermediate iterates may leave the transmon regime
        warnings.simplefilter("ignore")
        sol = root(
            residual, np.log([ec0, ej0]), method="hybr",
            options={"maxfev": max_iterations * 3},
        )
        ec, ej = np.exp(sol.x)
        if not sol.success or np.max(np.abs(residual(sol.x))) > max(tol, 1e-9 * omega01):
            raise NoConvergence(f"transmon fit did not converge: {sol.message}")
        return CooperPairBoxParams(float(ec), float(ej), n_g, charge_cutoff)
