"""
Power broadening of the sideband dip
====================================

At a 5 MHz one-photon detuning the correlation shows a dip where the lower
sideband meets two-photon resonance. Raising the optical power broadens the
resonance and the dip disappears into the anticorrelated background.
"""

from eitcorr import ScanConfig, run_scan
from eitcorr.scan import column, sideband_dip_depth

cfg = ScanConfig(delta_start_mhz=-8, delta_stop_mhz=8, delta_count=801, analysis_mhz=(4.0,),
                 delta1_mhz=(5.0,), power_scales=(1.0, 2.0, 3.0, 4.0))
recs = run_scan(cfg)
for ps in cfg.power_scales:
    sub = [r for r in recs if r.power_scale == ps]
    x, c = column(sub, "delta_mhz"), column(sub, "c_analytic")
    print(f"power x{ps:g}: dip depth at -4 MHz = {sideband_dip_depth(x, c, -4.0):.3f}")
