"""
Steady state and transmission of the Lambda system
==================================================

Build the Bloch matrix at the reference operating point, solve for the
steady state, and sweep the two-photon detuning to see the transparency
window in the DC transmission of both beams.
"""

import numpy as np

from eitcorr import build_bloch_system, dc_transmission, reference_params, steady_state

###############################################################################
# One point first. The optical coherences p1, p2 are tiny near two-photon
# resonance because the atoms are pumped into the dark state.

p = reference_params(delta1_mhz=0.2, delta_mhz=0.0)
ss = steady_state(build_bloch_system(p))
print("p1 =", ss.p1, " p2 =", ss.p2)
print("populations =", ss.populations, " residual =", ss.residual)

###############################################################################
# Now the sweep. Transmission is 1 at the center and dips on either side.

deltas = np.linspace(-6, 6, 25)
for d in deltas:
    q = reference_params(0.2, d)
    t1, t2 = dc_transmission(steady_state(build_bloch_system(q)), q)
    bar = "#" * int(400 * (1 - t1))
    print(f"{d:+6.2f} MHz  T1={t1:.4f}  T2={t2:.4f}  {bar}")
