"""Inferring an unknown drive from two measured lines."""

import warnings

import numpy as np

from starksense import CircuitParams, DriveTone, SensingInput, forward_observables
from starksense.sensing import (
    ResonatorParams,
    calibration_curve,
    invert_free,
    photon_number_from_amplitude,
    propagate_uncertainty,
    sense,
)

circuit = CircuitParams.from_bare_lines(4.744675, 4.634857)

#%%
# Forward: an "unknown" drive produces two shifted lines.
true = DriveTone(0.35, 5.05)
l1, l2 = forward_observables(circuit, true)
print("measured omega01 %.5f, omega02/2 %.5f GHz" % (l1, l2))

#%%
# Free mode: both amplitude and frequency from the two lines.
inp = SensingInput.from_circuit(circuit, l1, l2, delta_meas=1e-3)
est = invert_free(inp)
unc = propagate_uncertainty(inp)
print("A_D  = %.4f GHz  in [%.4f, %.4f]" % (est.amplitude, *unc.amplitude))
print("f_D  = %.4f GHz  in [%.4f, %.4f]" % (est.frequency, *unc.frequency))
print("condition number %.1f" % est.condition)

#%%
# Fixed mode: the drive frequency is known, so only omega01 is inverted.
fixed = sense(SensingInput.from_circuit(circuit, l1, l2, omega_d_known=5.05))
print("fixed A_D = %.4f GHz in [%.4f, %.4f]" % (fixed.amplitude, *fixed.amplitude_interval))
print("photons in a g = 71.5 MHz resonator: %.1f"
      % photon_number_from_amplitude(fixed.amplitude, 0.0715))

#%%
# Calibration curve: a line with a 3 dB ripple across frequency.
freqs = np.linspace(4.9, 5.2, 7)
amps = 0.3 * 10 ** (1.5 / 20 * np.sin(2 * np.pi * (freqs - 4.9) / 0.15))
rows = []
with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    for a, f in zip(amps, freqs):
        m1, m2 = forward_observables(circuit, DriveTone(a, f))
        rows.append(SensingInput.from_circuit(circuit, m1, m2, omega_d_known=f))
resonator = ResonatorParams(g=0.0715, q_c=2e4, q_i=1e5, omega_r=7.0)
curve = calibration_curve(rows, [-10.0] * len(rows), resonator)
for p in curve.points:
    print("%.3f GHz  A_D %.4f  attenuation %.1f dB" % (p.drive_frequency, p.amplitude, p.attenuation_db))
