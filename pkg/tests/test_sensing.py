import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.constants import hbar

from starksense.errors import (
    IllConditionedWarning,
    InconsistentInput,
    InvalidParams,
    NegativeDetuning,
    NoConvergence,
)
from starksense.qudit import CircuitParams, DriveTone
from starksense.sensing import (
    ResonatorParams,
    SensingInput,
    amplitude_from_photon_number,
    attenuation_estimate,
    calibration_curve,
    dbm_to_watts,
    feedline_power_from_photon_number,
    forward_observables,
    invert_fixed,
    invert_free,
    photon_number_from_amplitude,
    photon_number_from_feedline_power,
    propagate_uncertainty,
    sense,
    watts_to_dbm,
)

CIRCUIT = CircuitParams(5.0, 0.4)


def measured(amplitude, delta, known=False, circuit=CIRCUIT, **kw):
    f = circuit.omega01 + delta
    l1, l2 = forward_observables(circuit, DriveTone(amplitude, f))
    return SensingInput.from_circuit(circuit, l1, l2, omega_d_known=f if known else None, **kw)


class TestForward:
    def test_undriven(self):
        assert forward_observables(CIRCUIT, DriveTone(0.0, 5.2)) == pytest.approx((4.8, 4.7))

    def test_input_validation(self):
        with pytest.raises(InvalidParams):
            SensingInput(4.7, 4.6, 4.8, -0.4)
        with pytest.raises(InvalidParams):
            SensingInput(4.7, 4.6, 4.8, 0.4, delta_meas=-1e-3)

    def test_crossed_lines_warn(self):
        with pytest.warns(UserWarning, match="omega02/2"):
            SensingInput(4.7, 4.71, 4.8, 0.4)


class TestFreeInversion:
    @settings(max_examples=30, deadline=None)
    @given(amplitude=st.floats(0.05, 0.9), delta=st.floats(0.1, 0.5))
    def test_roundtrip(self, amplitude, delta):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            est = invert_free(measured(amplitude, delta))
        assert est.amplitude == pytest.approx(amplitude, abs=1e-6)
        assert est.frequency == pytest.approx(CIRCUIT.omega01 + delta, abs=1e-6)
        assert not est.ill_conditioned

    @pytest.mark.parametrize("order", [2, 4])
    def test_roundtrip_each_order(self, order):
        f = CIRCUIT.omega01 + 0.3
        l1, l2 = forward_observables(CIRCUIT, DriveTone(0.4, f), order)
        est = invert_free(SensingInput.from_circuit(CIRCUIT, l1, l2), order)
        assert est.amplitude == pytest.approx(0.4, abs=1e-8)
        assert est.frequency == pytest.approx(f, abs=1e-8)

    def test_order_zero_cannot_separate_frequency(self):
        # equal shifts on both lines leave only the combination gamma alpha^2
        f = CIRCUIT.omega01 + 0.25
        l1, l2 = forward_observables(CIRCUIT, DriveTone(0.4, f), 0)
        with pytest.warns(IllConditionedWarning):
            est = invert_free(SensingInput.from_circuit(CIRCUIT, l1, l2), 0)
        assert est.ill_conditioned

    def test_unshifted_lines_are_ill_conditioned(self):
        inp = SensingInput.from_circuit(CIRCUIT, 4.8, 4.7)
        with pytest.warns(IllConditionedWarning):
            est = invert_free(inp)
        assert est.ill_conditioned
        assert est.amplitude == pytest.approx(0.0, abs=1e-9)

    def test_unreachable_lines(self):
        # blue-shifted 0-1 line with a red-shifted 0-2 line has no drive solution
        inp = SensingInput.from_circuit(CIRCUIT, 4.85, 4.6)
        with pytest.raises(NoConvergence):
            invert_free(inp)


class TestFixedInversion:
    @settings(max_examples=30, deadline=None)
    @given(amplitude=st.floats(0.05, 0.9), delta=st.floats(0.1, 0.5))
    def test_roundtrip(self, amplitude, delta):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            est = invert_fixed(measured(amplitude, delta, known=True))
        assert est.amplitude == pytest.approx(amplitude, abs=1e-9)
        assert abs(est.consistency) < 1e-9

    def test_needs_frequency(self):
        with pytest.raises(InvalidParams):
            invert_fixed(measured(0.3, 0.3))

    def test_drive_below_line(self):
        inp = SensingInput.from_circuit(CIRCUIT, 4.79, 4.69, omega_d_known=4.7)
        with pytest.raises(NegativeDetuning):
            invert_fixed(inp)

    def test_zero_amplitude(self):
        inp = SensingInput.from_circuit(CIRCUIT, 4.8, 4.7, omega_d_known=5.1)
        assert invert_fixed(inp).amplitude == 0.0

    def test_inconsistent_second_line(self):
        inp = measured(0.3, 0.3, known=True).shifted(0.0, 0.02)
        with pytest.raises(InconsistentInput):
            invert_fixed(inp)

    def test_blue_shift_rejected(self):
        inp = SensingInput.from_circuit(CIRCUIT, 4.81, 4.7, omega_d_known=5.1)
        with pytest.raises(NoConvergence):
            invert_fixed(inp)


class TestUncertainty:
    def test_zero_delta_gives_point_intervals(self):
        u = propagate_uncertainty(measured(0.3, 0.3), delta=0.0)
        assert u.amplitude[0] == pytest.approx(u.amplitude[1], abs=1e-9)
        assert u.frequency[0] == pytest.approx(u.frequency[1], abs=1e-9)

    def test_intervals_contain_truth(self):
        u = propagate_uncertainty(measured(0.3, 0.3, delta_meas=1e-3))
        assert u.amplitude[0] <= 0.3 <= u.amplitude[1]
        assert u.frequency[0] <= 5.1 <= u.frequency[1]

    def test_monotone_in_delta(self):
        inp = measured(0.3, 0.3, known=True)
        widths = [np.ptp(propagate_uncertainty(inp, delta=d).amplitude) for d in (1e-4, 1e-3, 3e-3)]
        assert widths[0] < widths[1] < widths[2]

    def test_fixed_linear_in_delta(self):
        inp = measured(0.2, 0.3, known=True)
        w1 = np.ptp(propagate_uncertainty(inp, delta=1e-3).amplitude)
        w2 = np.ptp(propagate_uncertainty(inp, delta=1e-4).amplitude)
        assert w1 / w2 == pytest.approx(10.0, rel=0.02)

    def test_detuning_degrades_free_mode(self):
        near = np.ptp(propagate_uncertainty(measured(0.3, 0.2)).amplitude)
        far = np.ptp(propagate_uncertainty(measured(0.3, 0.7)).amplitude)
        assert far > 3 * near

    def test_fixed_tighter_than_free(self):
        free = np.ptp(propagate_uncertainty(measured(0.3, 0.3)).amplitude)
        fixed = np.ptp(propagate_uncertainty(measured(0.3, 0.3, known=True)).amplitude)
        assert fixed < free

    def test_sense_attaches_intervals(self):
        est = sense(measured(0.3, 0.3, known=True))
        assert est.mode == "fixed"
        assert est.amplitude_interval[0] < est.amplitude < est.amplitude_interval[1]
        assert est.frequency_interval is None

    def test_unknown_mode(self):
        with pytest.raises(InvalidParams):
            propagate_uncertainty(measured(0.3, 0.3), mode="other")


class TestConversions:
    def test_photon_number(self):
        assert photon_number_from_amplitude(0.9, 0.0715) == pytest.approx(39.6, abs=0.1)

    @given(n=st.floats(0.0, 1e4), g=st.floats(1e-3, 1.0))
    def test_photon_roundtrip(self, n, g):
        a = amplitude_from_photon_number(n, g)
        assert photon_number_from_amplitude(a, g) == pytest.approx(n, rel=1e-12, abs=1e-12)

    def test_feedline_closed_form(self):
        # n = 4 P Q_l^2 / (Q_c hbar w^2) for a notch-coupled resonator
        p, qc, qi, fr = 1e-15, 2e4, 1e5, 7.0
        ql = qc * qi / (qc + qi)
        w = 2 * math.pi * fr * 1e9
        assert photon_number_from_feedline_power(p, qc, qi, fr) == pytest.approx(
            4 * p * ql**2 / (qc * hbar * w**2)
        )

    def test_feedline_roundtrip(self):
        p = feedline_power_from_photon_number(40.0, 2e4, 1e5, 7.0)
        assert photon_number_from_feedline_power(p, 2e4, 1e5, 7.0) == pytest.approx(40.0)

    def test_dbm(self):
        assert dbm_to_watts(0.0) == pytest.approx(1e-3)
        assert watts_to_dbm(dbm_to_watts(-93.0)) == pytest.approx(-93.0)
        assert watts_to_dbm(0.0) == -math.inf

    @pytest.mark.parametrize(
        "call",
        [
            lambda: photon_number_from_amplitude(0.1, 0.0),
            lambda: amplitude_from_photon_number(-1.0, 0.07),
            lambda: photon_number_from_feedline_power(1e-15, -1.0, 1e5, 7.0),
            lambda: photon_number_from_feedline_power(-1e-15, 2e4, 1e5, 7.0),
            lambda: ResonatorParams(0.07, 2e4, 1e5, 0.0),
        ],
    )
    def test_rejects_invalid(self, call):
        with pytest.raises(InvalidParams):
            call()


class TestCalibration:
    RES = ResonatorParams(g=0.0715, q_c=2e4, q_i=1e5, omega_r=7.0)

    def rows(self, amplitudes, freqs):
        inputs = []
        for a, f in zip(amplitudes, freqs):
            l1, l2 = forward_observables(CIRCUIT, DriveTone(a, f))
            inputs.append(SensingInput.from_circuit(CIRCUIT, l1, l2, omega_d_known=f))
        return inputs

    def test_flat_input(self):
        freqs = np.linspace(4.95, 5.25, 7)
        curve = calibration_curve(self.rows([0.3] * 7, freqs), [-20.0] * 7, self.RES)
        np.testing.assert_allclose(curve.amplitudes, 0.3, atol=1e-9)
        assert np.ptp(curve.attenuations) < 1e-9
        assert all(p.ok for p in curve.points)

    def test_ripple_tracked(self):
        freqs = np.linspace(4.95, 5.25, 13)
        amps = 0.3 + 0.05 * np.sin(2 * np.pi * (freqs - 4.95) / 0.1)
        curve = calibration_curve(self.rows(amps, freqs), [-20.0] * 13, self.RES)
        np.testing.assert_allclose(curve.amplitudes, amps, atol=1e-9)

    def test_attenuation_roundtrip(self):
        a = 0.3
        n = photon_number_from_amplitude(a, self.RES.g)
        p_chip = watts_to_dbm(feedline_power_from_photon_number(n, 2e4, 1e5, 7.0))
        curve = calibration_curve(self.rows([a], [5.1]), [p_chip + 60.0], self.RES)
        assert curve.attenuations[0] == pytest.approx(-60.0, abs=1e-6)
        assert attenuation_estimate(a, p_chip + 60.0, self.RES) == pytest.approx(-60.0)

    def test_failed_row_marked(self):
        good = self.rows([0.3], [5.1])[0]
        bad = good.shifted(0.0, 0.05)
        curve = calibration_curve([good, bad], [-20.0, -20.0], self.RES)
        assert curve.points[0].ok
        assert curve.points[1].status == "InconsistentInput"
        assert math.isnan(curve.points[1].amplitude)

    def test_without_resonator(self):
        curve = calibration_curve(self.rows([0.3], [5.1]), [-20.0])
        assert math.isnan(curve.attenuations[0])

    def test_length_mismatch(self):
        with pytest.raises(InvalidParams):
            calibration_curve(self.rows([0.3], [5.1]), [])
