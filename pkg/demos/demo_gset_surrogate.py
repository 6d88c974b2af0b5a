"""
A G-Set sized MAX-CUT run
=========================

G1 is an 800-vertex random graph with 19176 unit edges.  Pass the path of a
G-Set file as the first argument to use it; otherwise a random graph with the
same size stands in.  Each trial takes a few seconds; set MCPP_ODE_THREADS to
run trials in parallel.

    python demos/demo_gset_surrogate.py [path/to/G1 or ""] [trials]
"""

import sys
import time

import numpy as np

from mcpp_ode import Graph, solve_maxkcut
from mcpp_ode.maxcut import critical_temperature, read_gset

if len(sys.argv) > 1 and sys.argv[1]:
    g = read_gset(sys.argv[1])
    name = sys.argv[1]
else:
    rng = np.random.default_rng(1)
    n, m = 800, 19176
    pairs = set()
    while len(pairs) < m:
        i, j = sorted(rng.choice(n, 2, replace=False))
        pairs.add((int(i), int(j)))
    g = Graph.from_edges(n, [(i, j, 1.0) for i, j in sorted(pairs)])
    name = "random surrogate"
trials = int(sys.argv[2]) if len(sys.argv) > 2 else 3

print(f"{name}: {g.n_vertices} vertices, {g.n_edges} edges, total weight {g.w_tot:.0f}")
print(f"critical temperature for k = 2: {critical_temperature(g, 2):.3f} (default T1 = 3)")

t0 = time.perf_counter()
res = solve_maxkcut(g, k=2, trials=trials, seed=0)
dt = time.perf_counter() - t0
for t in res.trials:
    print(f"  seed {t.seed}: cut {t.value:.0f}, {t.steps} FE steps, "
          f"{t.temperatures} temperatures, {t.status}")
print(f"best cut {res.best_cut:.0f} ({dt / trials:.1f} s per trial)")
