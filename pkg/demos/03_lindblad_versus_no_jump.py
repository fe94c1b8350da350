"""
Master equation versus no-jump evolution
========================================

When |e> relaxation is the only loss channel, every jump leaves the qubit
subspace. Post-selecting the master-equation solution on {|e>, |f>} then
reproduces the normalized no-jump state. Extra channels break this agreement.
"""

import numpy as np

from epsim.evolve import DissipationRates, embed_qubit_state, postselect_ef, propagate_lindblad, propagate_nh
from epsim.paths import ParameterLoop

loop = ParameterLoop(30.0, 0.3, 10 * np.pi, 1.5, gamma=6.2)
psi0 = np.array([0.6, 0.8j])
nh = propagate_nh(psi0, loop, loop.T)
target = np.outer(nh.normalized(), nh.normalized().conj())
four = embed_qubit_state(psi0)
rho0 = np.outer(four, four.conj())

for label, rates in [("gamma_e only", DissipationRates(gamma_e=6.2)),
                     ("all measured rates", DissipationRates.measured())]:
    rho_ef, prob = postselect_ef(propagate_lindblad(rho0, loop, loop.T, rates))
    print(f"{label:20s} max |rho - rho_nh| = {np.max(np.abs(rho_ef - target)):.2e}   "
          f"kept {prob:.4f} (no-jump {nh.survival:.4f})")
