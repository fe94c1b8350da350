"""
Chiral state transfer
=====================

Start in psi_- and go once around a loop enclosing one EP. Counterclockwise
the post-selected state ends near psi_+; clockwise it strays far from the
instantaneous eigenstate on the way and survives post-selection far less often.
"""

from epsim.config import load_config
from epsim.protocols import run_encircle_tomography

for preset in ("fig1e", "fig1f"):
    cfg = load_config(preset)
    records = run_encircle_tomography(cfg.loop, cfg.engine, 13, rates=cfg.rates, cfg=cfg.integrator)
    print(f"\n{preset}: direction {cfg.loop.direction}")
    print("  t_us      x       y       z    x_eig  survival")
    for r in records:
        print(f"  {r.t_s:5.3f} {r.x:+7.3f} {r.y:+7.3f} {r.z:+7.3f} {r.x_eig:+7.3f}  {r.survival:.3g}")

# %%
# With a finite number of shots each Pauli value is a binomial estimate.
cfg = load_config("fig1e")
noisy = run_encircle_tomography(cfg.loop, n_pauses=5, shots=10_000, seed=1)
print("\nsampled x with 10^4 shots:", [round(r.x, 3) for r in noisy])
