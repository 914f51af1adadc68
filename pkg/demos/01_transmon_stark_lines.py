"""Stark-shifted transmon lines from the charge-basis spectrum and the analytic model."""

import numpy as np

from starksense import CooperPairBoxParams, DriveTone, analytic_circuit, diagonalize, lab_transitions
from starksense.transmon import bound_levels

#%%
# Exact transmon levels for a typical device.
device = CooperPairBoxParams(E_C=0.1977, E_J=15.5)
spectrum, ladder = diagonalize(device, 10)
print("omega01       %.6f GHz" % spectrum.omega01)
print("anharmonicity %.6f GHz" % spectrum.anharmonicity)
print("bound levels  %d" % bound_levels(device))
print("ladder        ", np.round(ladder.elements, 3))

#%%
# Two-parameter model that reproduces the undriven 0-1 and 0-2 lines.
circuit = analytic_circuit(spectrum)
print("omega_q = %.5f GHz, gamma = %.5f GHz" % (circuit.omega_q, circuit.gamma))

#%%
# Multi-photon lines versus drive amplitude, drive 200 MHz above omega01.
f_drive = spectrum.omega01 + 0.2
print(" A_D     w01      w02/2    w03/3   (GHz)")
for amp in np.linspace(0.0, 0.5, 6):
    sol = lab_transitions(circuit, DriveTone(amp, f_drive), k_max=3)
    print("%.2f  " % amp + "  ".join("%.5f" % x for x in sol.lab_transitions[1:]))

#%%
# Convergence in perturbation order for one strong drive.
drive = DriveTone(0.4, f_drive)
for order in (0, 2, 4):
    lines = lab_transitions(circuit, drive, 3, order).lab_transitions[1:]
    print("order %d:" % order, np.round(lines, 5))
