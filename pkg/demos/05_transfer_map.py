"""
Fast-driving transfer map
=========================

P(psi_-) after a single period, scanned over J_min and the loop period T.
Slow counterclockwise loops that enclose the EP empty psi_-; at J_min = 6 the
loop misses the EP and the result oscillates with T differently for the two
directions.
"""

import numpy as np

from epsim.config import load_config
from epsim.protocols import run_transfer_map

cfg = load_config("fig3")
j_grid = [0.3, 3.0, 6.0]
t_grid = np.linspace(0.1, 1.5, 8)

for direction in ("ccw", "cw"):
    cells = run_transfer_map(j_grid, t_grid, direction, cfg.engine, cfg.loop, cfg.rates, cfg.integrator)
    print(f"\n{direction}: rows J_min, columns T (us)")
    print("       " + " ".join(f"{t:5.2f}" for t in t_grid))
    for j in j_grid:
        row = [c.P_psi_minus for c in cells if c.J_min == j]
        print(f"{j:5.1f}  " + " ".join(f"{p:5.2f}" for p in row))
