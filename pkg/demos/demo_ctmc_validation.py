"""
The ODE as a mean-field Markov chain
====================================

On a tiny problem the underlying continuous-time Markov chain can be built
exactly.  Its stationary law is the Boltzmann distribution; the ODE
equilibrium approximates its mean, exactly so for a single block.  At low
temperature the equilibrium rounds to a local optimum and the a-posteriori
certificate can confirm it.
"""

import numpy as np

from mcpp_ode import Partition, StepController
from mcpp_ode.polynomial import random_polynomial_objective
from mcpp_ode.solver import integrate_to_equilibrium, sample_initial
from mcpp_ode.validation import (boltzmann_mean, build_ctmc, certify_equilibrium,
                                 check_detailed_balance, check_local_optimality,
                                 integrate_forward_equation, mean_field_gap,
                                 stationary_distribution, boltzmann_distribution)

rng = np.random.default_rng(7)
part = Partition((3, 2, 3))
obj = random_polynomial_objective(part, rng, degree=2)

ctmc = build_ctmc(obj, 1.0)
print(f"{ctmc.size} states, detailed balance residual {check_detailed_balance(ctmc):.1e}")
p = stationary_distribution(ctmc)
print(f"stationary vs Boltzmann: {np.max(np.abs(p - boltzmann_distribution(ctmc))):.1e}")

# relax the master equation from a single state
p0 = np.zeros(ctmc.size)
p0[0] = 1.0
_, times, means = integrate_forward_equation(ctmc, p0, 30.0, 0.01, record_every=500)
exact = boltzmann_mean(ctmc)
for t, m in zip(times, means):
    print(f"  t = {t:5.1f}  |mean - Boltzmann mean| = {np.max(np.abs(m - exact)):.2e}")

print(f"\n{'T':>6} {'gap':>9} {'eps':>9} {'cert':>5} {'local':>5}")
y = sample_initial(part, rng)
for T in [2.0, 1.0, 0.5, 0.2, 0.1, 0.05, 0.02]:
    eq = integrate_to_equilibrium(y, T, obj, StepController(), tol_eq=1e-12, max_steps=10**6)
    y = eq.y
    cert = certify_equilibrium(y, obj, T)
    local = check_local_optimality(cert.y_hat, obj).ok
    print(f"{T:6.2f} {mean_field_gap(y, build_ctmc(obj, T)):9.2e} {cert.eps:9.2e} "
          f"{str(cert.passed):>5} {str(local):>5}")
