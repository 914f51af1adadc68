import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import mathieu_energies
from starksense.errors import ConvergenceWarning, InvalidParams, NoConvergence
from starksense.qudit import bare_lines
from starksense.transmon import (
    CooperPairBoxParams,
    LadderOperators,
    analytic_circuit,
    bound_levels,
    charge_hamiltonian,
    diagonalize,
    fit_from_transitions,
)


class TestParams:
    @pytest.mark.parametrize("ec, ej", [(0.0, 10.0), (-0.2, 10.0), (0.2, 0.0)])
    def test_rejects_non_positive(self, ec, ej):
        with pytest.raises(InvalidParams):
            CooperPairBoxParams(ec, ej)

    def test_rejects_small_cutoff(self):
        with pytest.raises(InvalidParams):
            CooperPairBoxParams(0.2, 15.0, charge_cutoff=5)

    def test_warns_outside_transmon_regime(self):
        with pytest.warns(UserWarning, match="transmon regime"):
            CooperPairBoxParams(1.0, 5.0)

    def test_hamiltonian_shape(self, device):
        diag, off = charge_hamiltonian(device)
        assert diag.shape == (61,)
        assert off.shape == (60,)
        np.testing.assert_allclose(off, -device.E_J / 2)


class TestSpectrum:
    def test_frozen_levels(self, device):
        spectrum, _ = diagonalize(device, 6)
        # Mathieu characteristic values, scipy.special
        np.testing.assert_allclose(
            spectrum.energies,
            [0.0, 4.74467502, 9.26971811, 13.55568072, 17.57484848, 21.29929258],
            atol=1e-7,
        )
        assert spectrum.omega01 == pytest.approx(4.744675, abs=1e-6)
        assert spectrum.anharmonicity == pytest.approx(-0.2196319, abs=1e-6)

    @settings(max_examples=15, deadline=None)
    @given(ec=st.floats(0.15, 0.35), ratio=st.floats(30.0, 120.0))
    def test_matches_mathieu(self, ec, ratio):
        p = CooperPairBoxParams(ec, ec * ratio)
        spectrum, _ = diagonalize(p, 6, check=False)
        np.testing.assert_allclose(spectrum.energies, mathieu_energies(ec, ec * ratio), atol=1e-8)

    def test_asymptotic_formulas(self, device):
        spectrum, _ = diagonalize(device, 3)
        approx01 = device.plasma_frequency - device.E_C
        assert abs(spectrum.omega01 - approx01) / spectrum.omega01 < 0.02
        assert spectrum.anharmonicity == pytest.approx(-device.E_C, rel=0.15)

    def test_harmonic_limit(self):
        p = CooperPairBoxParams(0.01, 200.0, charge_cutoff=60)
        spectrum, _ = diagonalize(p, 4)
        t = spectrum.transitions
        assert np.ptp(t) / t[0] < 1e-2

    def test_transitions_and_photon_lines(self, device):
        spectrum, _ = diagonalize(device, 4)
        np.testing.assert_allclose(spectrum.transitions, np.diff(spectrum.energies))
        lines = spectrum.photon_lines()
        assert lines[1] == pytest.approx(spectrum.omega01)
        assert lines[2] == pytest.approx(spectrum.energies[2] / 2)

    def test_bound_levels(self, device):
        assert bound_levels(device) == 8

    def test_default_levels_are_bound(self, device):
        spectrum, ladder = diagonalize(device)
        assert spectrum.levels == 8
        assert ladder.dimension == 8

    @pytest.mark.parametrize("levels", [1, 61])
    def test_invalid_level_count(self, device, levels):
        with pytest.raises(InvalidParams):
            diagonalize(device, levels)

    def test_charge_dispersion_lowest_levels(self, device):
        ref, _ = diagonalize(device, 4)
        off, _ = diagonalize(CooperPairBoxParams(0.1977, 15.5, n_g=0.5), 4)
        assert np.max(np.abs(ref.energies[:3] - off.energies[:3])) < 1e-4

    def test_charge_dispersion_grows(self, device):
        ref, _ = diagonalize(device, 6)
        off, _ = diagonalize(CooperPairBoxParams(0.1977, 15.5, n_g=0.5), 6)
        spread = np.abs(ref.energies - off.energies)
        assert np.all(np.diff(spread[1:]) > 0)

    def test_cutoff_converged(self, device):
        with warnings.catch_warnings():
            warnings.simplefilter("error", ConvergenceWarning)
            diagonalize(device, 10)

    def test_cutoff_warning(self):
        with pytest.warns(ConvergenceWarning):
            diagonalize(CooperPairBoxParams(0.02, 60.0, charge_cutoff=10), 10)


class TestLadder:
    def test_frozen_elements(self, device):
        _, ladder = diagonalize(device, 10)
        np.testing.assert_allclose(
            ladder.elements[:6],
            [1.0, 1.38073127, 1.64483504, 1.8374427, 1.96968353, 2.04012803],
            atol=1e-7,
        )

    def test_near_harmonic_low_levels(self, device):
        _, ladder = diagonalize(device, 10)
        k = np.arange(4)
        rel = np.abs(ladder.elements[:4] - np.sqrt(k + 1)) / np.sqrt(k + 1)
        assert np.all(rel < 0.10)

    def test_operators(self):
        lad = LadderOperators.harmonic(4)
        a, ad = lad.lowering, lad.raising
        np.testing.assert_allclose(ad, a.T)
        np.testing.assert_allclose(np.diag(ad @ a), [0, 1, 2, 3], atol=1e-12)


class TestMapping:
    def test_transitions_mapping_reproduces_lines(self, device):
        spectrum, _ = diagonalize(device, 3)
        c = analytic_circuit(spectrum)
        lines = bare_lines(c, 2)
        assert lines[1] == pytest.approx(spectrum.omega01)
        assert lines[2] == pytest.approx(spectrum.energies[2] / 2)
        assert c.gamma == pytest.approx(0.4392639, abs=1e-6)

    def test_charging_mapping(self, device):
        spectrum, _ = diagonalize(device, 3)
        c = analytic_circuit(spectrum, "charging", E_C=device.E_C)
        assert c.gamma == pytest.approx(2 * device.E_C)
        assert c.omega01 == pytest.approx(spectrum.omega01)

    def test_unknown_mapping(self, device):
        spectrum, _ = diagonalize(device, 3)
        with pytest.raises(InvalidParams):
            analytic_circuit(spectrum, "other")
        with pytest.raises(InvalidParams):
            analytic_circuit(spectrum, "charging")


class TestFit:
    def test_roundtrip(self, device):
        spectrum, _ = diagonalize(device, 3)
        p = fit_from_transitions(spectrum.omega01, spectrum.anharmonicity)
        assert p.E_C == pytest.approx(0.1977, rel=1e-7)
        assert p.E_J == pytest.approx(15.5, rel=1e-7)

    @settings(max_examples=10, deadline=None)
    @given(ec=st.floats(0.15, 0.3), ratio=st.floats(40.0, 100.0))
    def test_roundtrip_property(self, ec, ratio):
        spectrum, _ = diagonalize(CooperPairBoxParams(ec, ec * ratio), 3, check=False)
        p = fit_from_transitions(spectrum.omega01, spectrum.anharmonicity)
        assert p.E_C == pytest.approx(ec, rel=1e-6)
        assert p.E_J == pytest.approx(ec * ratio, rel=1e-6)

    def test_harmonic_limit_refused(self):
        with pytest.raises(NoConvergence):
            fit_from_transitions(5.0, -1e-4)

    def test_invalid_inputs(self):
        with pytest.raises(InvalidParams):
            fit_from_transitions(5.0, 0.1)
        with pytest.raises(InvalidParams):
            fit_from_transitions(-5.0, -0.2)
