"""
Eigenvalue sheets and exceptional points
========================================

The effective qubit Hamiltonian has two complex eigenvalues that coalesce at
J = +/- gamma/4 on the Delta = 0 axis. This demo locates the EPs, shows the
eigenvectors merging there, and follows both sheets across the branch cut.
"""

import numpy as np

from epsim.paths import ParameterLoop, winding_count
from epsim.spectra import HamiltonianParams, eigensystem, ep_locations, riemann_surface

gamma = 6.2

# %%
# Where are the EPs?
for ep in ep_locations(gamma):
    print(f"EP at J = {ep.J_ep:+.3f} rad/us, Delta = {ep.Delta_ep}")

# %%
# Approaching the EP the two eigenvectors become parallel.
for J in (10.0, 3.0, 1.8, 1.56, 1.55):
    pair = eigensystem(HamiltonianParams(J, 0.0, gamma))
    overlap = abs(np.vdot(pair.psi_plus, pair.psi_minus))
    print(f"J={J:5.2f}  lambda+={pair.lambda_plus:.4f}  lambda-={pair.lambda_minus:.4f}  "
          f"|<psi+|psi->|={overlap:.4f}  coalesced={pair.coalesced}")

# %%
# Between the EPs the principal-branch imaginary parts jump when Delta changes
# sign. Tracking the sheets keeps each one continuous.
deltas = np.linspace(-0.5, 0.5, 5)
table = riemann_surface([0.5], deltas, gamma)
for d, lp in zip(table["Delta"], table["lambda_plus"]):
    print(f"Delta={d:+.2f}  tracked lambda+ = {lp:.4f}")

# %%
# Which loops enclose an EP?
for j_min in (0.3, 6.0, -30.0):
    loop = ParameterLoop(30.0, j_min, 10 * np.pi, 1.5, gamma)
    print(f"J_min={j_min:+6.1f}: encloses {winding_count(loop)} EP(s)")
