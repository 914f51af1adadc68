import math

import numpy as np
import pytest

from oracles import bloch_excited_population, dressed_lines, lindblad_trajectory, lorentzian
from starksense.errors import InvalidParams, WindowTooShort
from starksense.dynamics import (
    DensityState,
    DrivenQudit,
    SimulationConfig,
    SpectrumGrid,
    Trajectory,
    averaged_population,
    build_collapse_operators,
    evolve,
    find_peaks,
    frequency_axis,
    lindblad_rhs,
    normalize_columns,
    sweep_spectrum,
    thread_count,
)
from starksense.qudit import DriveTone, ProbeTone
from starksense.transmon import CooperPairBoxParams, LadderOperators, diagonalize

ENERGIES = np.array([0.0, 4.7, 9.2, 13.5, 17.5])
LADDER = np.array([1.0, 1.4, 1.7, 1.9])


@pytest.fixture
def driven():
    return DrivenQudit(ENERGIES, LADDER, ProbeTone(0.03, 4.6), DriveTone(0.4, 4.95))


def random_state(d, seed=0):
    rng = np.random.default_rng(seed)
    m = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = m @ m.conj().T
    return rho / np.trace(rho)


class TestConfig:
    def test_defaults(self):
        c = SimulationConfig()
        assert (c.T1, c.T2, c.n_therm, c.T_sim, c.levels) == (250.0, 250.0, 0.1, 500.0, 10)
        assert c.window == pytest.approx(62.5)
        assert c.window_start == pytest.approx(437.5)

    @pytest.mark.parametrize(
        "kw",
        [dict(T1=0), dict(T2=-1), dict(n_therm=-0.1), dict(levels=2), dict(T_sim=0),
         dict(integrator="euler"), dict(T_sim=50.0)],
    )
    def test_invalid(self, kw):
        with pytest.raises(InvalidParams):
            SimulationConfig(**kw)

    def test_unphysical_dephasing_warns(self):
        with pytest.warns(UserWarning, match="T2"):
            SimulationConfig(T1=100, T2=300)

    def test_infinite_t1_window(self):
        c = SimulationConfig(T1=math.inf, T2=math.inf, T_sim=200)
        assert c.window == pytest.approx(50.0)

    def test_scaled_times(self):
        c = SimulationConfig().scaled_times(2.0)
        assert (c.T1, c.T2, c.T_sim) == (500.0, 500.0, 1000.0)


class TestStates:
    def test_density_validation(self):
        with pytest.raises(InvalidParams):
            DensityState(np.array([[0.5, 0.1], [0.0, 0.5]]))
        with pytest.raises(InvalidParams):
            DensityState(np.eye(2))

    def test_basis(self):
        s = DensityState.basis(4, 2)
        assert s.mean_level == 2.0
        np.testing.assert_array_equal(s.populations, [0, 0, 1, 0])

    def test_qudit_shapes(self):
        with pytest.raises(InvalidParams):
            DrivenQudit(ENERGIES, LADDER[:2])
        q = DrivenQudit(ENERGIES + 3.0, LADDER)
        assert q.energies[0] == 0.0
        assert q.omega01 == pytest.approx(4.7)

    def test_from_transmon(self, device):
        q = DrivenQudit.from_transmon(device, 6)
        assert q.levels == 6
        assert q.omega01 == pytest.approx(4.744675, abs=1e-6)


class TestCollapse:
    def test_operators(self):
        c = SimulationConfig(T1=100, T2=50, n_therm=0.2)
        down, up, deph = build_collapse_operators(c, LadderOperators.harmonic(3))
        assert down[0, 1] == pytest.approx(np.sqrt(1.2 / 100))
        assert up[1, 0] == pytest.approx(np.sqrt(0.2 / 100))
        np.testing.assert_allclose(np.diag(deph), np.sqrt(1 / 50) * np.array([0, 1, 2]))

    def test_rhs_preserves_trace_and_hermiticity(self, driven):
        rho = random_state(5)
        d = lindblad_rhs(rho, 0.37, driven, SimulationConfig(T1=50, T2=40))
        assert abs(np.trace(d)) < 1e-12
        np.testing.assert_allclose(d, d.conj().T, atol=1e-12)


class TestEvolve:
    def test_matches_reference_integrator(self, driven):
        cfg = SimulationConfig(T1=50, T2=40, n_therm=0.1, T_sim=20)
        times = np.array([1.0, 5.0, 10.0, 20.0])
        rho0 = random_state(5, seed=3)
        ref = lindblad_trajectory(
            ENERGIES, LADDER, [(0.03, 4.6), (0.4, 4.95)], 50, 40, 0.1, times, rho0
        )
        tr = evolve(driven, cfg, DensityState(rho0), times)
        np.testing.assert_allclose(tr.states[1:], ref, atol=1e-9)

    def test_rk4_agrees_with_dp5(self, driven):
        times = np.array([5.0, 20.0])
        a = evolve(driven, SimulationConfig(T1=50, T2=40, T_sim=20, integrator="dp5"), times=times)
        b = evolve(driven, SimulationConfig(T1=50, T2=40, T_sim=20, integrator="rk4"), times=times)
        np.testing.assert_allclose(a.states, b.states, atol=1e-6)

    def test_ground_state_is_stationary(self):
        q = DrivenQudit(ENERGIES, LADDER)
        cfg = SimulationConfig(T1=100, T2=100, n_therm=0.0, T_sim=100)
        tr = evolve(q, cfg)
        np.testing.assert_allclose(tr.final.matrix, DensityState.basis(5).matrix, atol=1e-12)
        assert averaged_population(tr, cfg) == pytest.approx(0.0, abs=1e-12)

    def test_thermal_steady_state(self):
        q = DrivenQudit([0.0, 5.0], [1.0])
        cfg = SimulationConfig(T1=20, T2=20, n_therm=0.1, T_sim=300)
        tr = evolve(q, cfg)
        assert tr.final.populations[1] == pytest.approx(0.1 / 1.2, abs=1e-6)

    def test_bloch_steady_state(self):
        q = DrivenQudit([0.0, 5.0], [1.0], drive=DriveTone(0.004, 5.0))
        cfg = SimulationConfig(T1=20, T2=20, n_therm=0.1, T_sim=300)
        tr = evolve(q, cfg)
        expected = bloch_excited_population(0.004, 20, 20, 0.1)
        assert averaged_population(tr, cfg) == pytest.approx(expected, abs=1e-4)

    def test_physical_along_trajectory(self, driven):
        cfg = SimulationConfig(T1=50, T2=40, T_sim=30)
        tr = evolve(driven, cfg, sample_interval=2.0)
        traces = np.einsum("tkk->t", tr.states).real
        np.testing.assert_allclose(traces, 1.0, atol=1e-10)
        for s in tr.states:
            np.testing.assert_allclose(s, s.conj().T, atol=1e-12)
            assert np.linalg.eigvalsh(s).min() > -1e-9

    def test_sample_times_validated(self, driven):
        with pytest.raises(InvalidParams):
            evolve(driven, SimulationConfig(T1=50, T2=40, T_sim=20), times=[5.0, 2.0])
        with pytest.raises(InvalidParams):
            evolve(driven, SimulationConfig(T1=50, T2=40, T_sim=20),
                   initial=DensityState.basis(3))


class TestAveraging:
    def test_integrator_quadrature_matches_samples(self, driven):
        cfg = SimulationConfig(T1=40, T2=40, T_sim=40)
        tr = evolve(driven, cfg, sample_interval=0.005)
        exact = averaged_population(tr, cfg)
        no_integral = Trajectory(tr.times, tr.states, tr.window_start)
        assert averaged_population(no_integral, cfg) == pytest.approx(exact, rel=1e-4)

    def test_synthetic_signal(self):
        cfg = SimulationConfig(T1=40, T2=40, T_sim=100)
        t = np.linspace(0, 100, 4001)
        p = np.sin(np.pi * t / 10) ** 2
        states = np.zeros((len(t), 3, 3), complex)
        states[:, 0, 0] = 1 - p
        states[:, 1, 1] = p
        avg = averaged_population(Trajectory(t, states), cfg)
        assert avg == pytest.approx(0.5, abs=1e-6)

    def test_window_too_short(self):
        cfg = SimulationConfig(T1=40, T2=40, T_sim=100)
        t = np.linspace(0, 50, 11)
        states = np.tile(np.eye(3, dtype=complex) / 3, (11, 1, 1))
        with pytest.raises(WindowTooShort):
            averaged_population(Trajectory(t, states), cfg)


class TestPeaks:
    def test_frequency_axis(self):
        ax = frequency_axis(4.2, 4.9, 0.002)
        assert len(ax) == 351
        assert ax[-1] == pytest.approx(4.9)

    def test_normalize(self):
        g = SpectrumGrid([1.0, 2.0, 3.0], [0.0, 1.0], [[1.0, 2.0], [3.0, 2.0], [2.0, 2.0]])
        n = normalize_columns(g)
        np.testing.assert_allclose(n.values[:, 0], [0.0, 1.0, 0.5])
        np.testing.assert_allclose(n.values[:, 1], 0.0)
        assert n.normalized

    def test_lorentzian_positions_and_widths(self):
        f = frequency_axis(4.2, 4.9, 0.002)
        col = lorentzian(f, 4.6013, 0.01) + 0.6 * lorentzian(f, 4.4507, 0.02)
        peaks = find_peaks(SpectrumGrid(f, [0.0], col[:, None]))
        assert len(peaks[0]) == 2
        low, high = peaks[0]
        assert low.frequency == pytest.approx(4.4507, abs=5e-4)
        assert high.frequency == pytest.approx(4.6013, abs=5e-4)
        assert high.width == pytest.approx(0.01, rel=0.1)
        assert low.width == pytest.approx(0.02, rel=0.1)
        assert peaks.nearest(0, 4.45) is low

    def test_prominence_threshold(self):
        f = frequency_axis(0.0, 1.0, 0.01)
        col = lorentzian(f, 0.3, 0.05) + 0.03 * lorentzian(f, 0.7, 0.05)
        grid = SpectrumGrid(f, [0.0], col[:, None])
        assert len(find_peaks(grid, 0.05)[0]) == 1
        assert len(find_peaks(grid, 0.01)[0]) == 2

    def test_nan_cells_ignored(self):
        f = frequency_axis(0.0, 1.0, 0.01)
        col = lorentzian(f, 0.5, 0.05)
        col[10] = np.nan
        peaks = find_peaks(SpectrumGrid(f, [0.0], col[:, None]))
        assert [p.frequency for p in peaks[0]] == pytest.approx([0.5], abs=1e-3)


class TestSweep:
    def small(self, threads, batch_size=4):
        q = DrivenQudit(ENERGIES[:4], LADDER[:3])
        cfg = SimulationConfig(T1=20, T2=20, T_sim=40, levels=4)
        return sweep_spectrum(q, frequency_axis(4.6, 4.8, 0.02), [0.0, 0.2], 4.95, 0.02, cfg,
                              threads=threads, batch_size=batch_size)

    def test_deterministic_across_threads(self):
        a = self.small(1)
        b = self.small(3)
        assert a.values.tobytes() == b.values.tobytes()
        assert not a.failed.any()

    def test_resonance_visible(self):
        g = self.small(1)
        i = int(np.argmax(g.values[:, 0]))
        assert g.probe_frequencies[i] == pytest.approx(4.7, abs=0.011)

    def test_level_mismatch(self):
        q = DrivenQudit(ENERGIES, LADDER)
        with pytest.raises(InvalidParams):
            sweep_spectrum(q, [4.7], [0.0], 4.95, 0.02, SimulationConfig(levels=4))

    def test_thread_count_env(self, monkeypatch):
        monkeypatch.setenv("STARK_SENSE_THREADS", "3")
        assert thread_count() == 3
        assert thread_count(2) == 2
        monkeypatch.setenv("STARK_SENSE_THREADS", "many")
        with pytest.raises(InvalidParams):
            thread_count()


@pytest.mark.slow
class TestTransmonSpectroscopy:
    """Full-length runs on the transmon; a few minutes each."""

    def test_peaks_follow_dressed_levels(self, device):
        spectrum, ladder = diagonalize(device, 10)
        q = DrivenQudit(spectrum.energies, ladder.elements)
        probe = frequency_axis(4.45, 4.75, 0.002)
        grid = normalize_columns(
            sweep_spectrum(q, probe, [0.3], 4.95, 0.02, SimulationConfig())
        )
        peaks = find_peaks(grid, 0.02)
        ref = dressed_lines(spectrum.energies, ladder.elements, 0.3, 4.95)
        for k in (1, 2):
            p = peaks.nearest(0, ref[k - 1])
            assert abs(p.frequency - ref[k - 1]) < 0.002

    def test_truncation_insensitive(self, device):
        # the two-photon line barely moves when the ladder is cut to 6 levels
        probe = frequency_axis(4.55, 4.65, 0.001)
        found = []
        for levels in (10, 6):
            spectrum, ladder = diagonalize(device, levels)
            q = DrivenQudit(spectrum.energies, ladder.elements)
            cfg = SimulationConfig(levels=levels)
            grid = normalize_columns(sweep_spectrum(q, probe, [0.3], 4.95, 0.02, cfg))
            found.append(max(find_peaks(grid, 0.02)[0], key=lambda p: p.height).frequency)
        assert abs(found[0] - found[1]) < 0.002
