"""A small two-tone spectroscopy sweep compared with the analytic lines.

Shortened coherence times keep this to about 15 s on one core.
"""

import numpy as np

from starksense import (
    CooperPairBoxParams,
    DriveTone,
    DrivenQudit,
    SimulationConfig,
    analytic_circuit,
    diagonalize,
    find_peaks,
    lab_transitions,
    normalize_columns,
    sweep_spectrum,
)
from starksense.dynamics import frequency_axis

#%%
device = CooperPairBoxParams(E_C=0.1977, E_J=15.5)
spectrum, ladder = diagonalize(device, 6)
qudit = DrivenQudit(spectrum.energies, ladder.elements)
circuit = analytic_circuit(spectrum)

config = SimulationConfig(T1=100, T2=100, T_sim=200, levels=6)
probe = frequency_axis(4.45, 4.80, 0.004)
amplitudes = [0.0, 0.15, 0.3]
f_drive = 4.95

#%%
grid = sweep_spectrum(qudit, probe, amplitudes, f_drive, 0.02, config)
peaks = find_peaks(normalize_columns(grid), 0.02)

#%%
# Compare the two strongest features with the order-4 lines.
for j, amp in enumerate(amplitudes):
    sol = lab_transitions(circuit, DriveTone(amp, f_drive), 2)
    for k in (1, 2):
        p = peaks.nearest(j, sol.line(k))
        print("A_D=%.2f k=%d  analytic %.4f  simulated %.4f  width %.1f MHz"
              % (amp, k, sol.line(k), p.frequency, p.width * 1e3))

#%%
# Crude text rendering of the first column.
col = grid.values[:, 0]
for f, v in zip(probe[::4], col[::4]):
    print("%.3f %s" % (f, "#" * int(60 * v / np.nanmax(col))))
