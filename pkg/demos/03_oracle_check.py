"""
Checking the analytic spectra against simulated trajectories
============================================================

Simulate an ensemble of noisy-laser trajectories, estimate the intensity
noise spectra at one analysis frequency, and compare with the linear-response
result. Both orders of the analytic expansion are shown. Takes about a minute.
"""

from eitcorr import EstimatorConfig, analyze_point, estimate_spectra, reference_params, mhz, simulate_ensemble
from eitcorr.oracle import max_step, min_duration

w = mhz(2.0)
p = reference_params(0.0, 2.0, gamma_bar_mhz=0.1)
ens = simulate_ensemble(p, max_step(p, w), min_duration(p), 64, base_seed=1, sample_every=4, omega_max=w)
est = estimate_spectra(ens, EstimatorConfig.for_frequencies([w], ens.sample_dt))

full = analyze_point(p, w, "full")
low = analyze_point(p, w, "lowest")
print(f"simulated   C = {est.c[0]:+.3f} +- {est.c_se[0]:.3f}")
print(f"full order  C = {full.c:+.3f}")
print(f"lowest      C = {low.c:+.3f}")
for name in ("s11", "s22", "s12"):
    print(f"{name}: simulated {getattr(est, name)[0]:.4e} +- {getattr(est, name + '_se')[0]:.1e}, "
          f"analytic {getattr(full, name):.4e}")
