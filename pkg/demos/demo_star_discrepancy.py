"""
Star discrepancy lower bounds
=============================

The ODE solver returns an actual box, so its value is a certified lower bound
of the star discrepancy.  For small sets the exact value is available by
enumerating the critical grid.
"""

import time

import numpy as np

from mcpp_ode import PointSet, solve_stardisc
from mcpp_ode.stardisc import exact_star_discrepancy

rng = np.random.default_rng(3)
print(f"{'N':>3} {'d':>2} {'exact':>9} {'ode':>9} {'ratio':>6} {'time':>6}")
for N, d in [(8, 2), (16, 2), (12, 3), (16, 3), (24, 4)]:
    U = PointSet(rng.random((N, d)))
    exact = exact_star_discrepancy(U)
    t0 = time.perf_counter()
    res = solve_stardisc(U, trials=20, seed=0)
    dt = time.perf_counter() - t0
    print(f"{N:>3} {d:>2} {exact:9.5f} {res.value:9.5f} {res.value / exact:6.3f} {dt:5.1f}s")

# a centered lattice in one dimension has discrepancy 1/(2N)
n = 10
print("centered grid, N = 10:", solve_stardisc(PointSet((np.arange(n) + 0.5)[:, None] / n),
                                               trials=5).value)
