"""
Interferometric phase of the transferred state
==============================================

A spectator level |h> serves as a phase reference. After one loop the target
eigenstate is rotated into |f> and the closing f-h pulse phase is swept; the
fringe phase chi is the phase picked up along the loop.

For the transferred state (psi_- to psi_+) the two directions differ by pi and
chi barely moves as J_min changes. For psi_- itself the dynamical phase does
not cancel and chi drifts with J_min.
"""

from epsim import analysis
from epsim.config import load_config
from epsim.protocols import evolve_interferometer, run_phase_interferometry, scan_from_state

null = analysis.fit_fringe(run_phase_interferometry(None, target="psi_minus"))
print(f"no loop: contrast {null.contrast:.3f} offset {null.offset:.3f} chi {null.chi:+.3f}")

cfg = load_config("fig2")
print("\nJ_min  target     chi_ccw  chi_cw  dchi   contrast ccw/cw")
for j in cfg.options["j_min"][::2]:
    fits = {}
    for direction, sign in (("ccw", 1), ("cw", -1)):
        loop = cfg.loop.with_(J_min=float(j), Delta_amp=sign * abs(cfg.loop.Delta_amp))
        rho = evolve_interferometer(loop, cfg.engine, cfg.rates, cfg.integrator)
        for target in cfg.options["targets"]:
            fits[direction, target] = analysis.fit_fringe(scan_from_state(rho, loop, target))
    for target in cfg.options["targets"]:
        a, b = fits["ccw", target], fits["cw", target]
        d = analysis.phase_difference_summary(a, b)
        print(f"{j:+5.1f}  {target:9s} {a.chi:+7.3f} {b.chi:+7.3f} {d.delta_chi:+6.3f}  "
              f"{a.contrast:.3f}/{b.contrast:.3f}")
