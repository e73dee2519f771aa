"""Simulate the coupled plant/observer network and watch every node converge.

All observers start at z_i(0) = 0, so each node begins with a nonzero
estimation error.  The trace shows the errors decaying at (at least) the
designed rate alpha while staying inside the invariant subspace im(T_is).
"""

import numpy as np

from distobs import (
    NetworkGraph,
    Plant,
    SimulationConfig,
    SynthesisParameters,
    build_error_system,
    check_invariance,
    estimate_rate,
    simulate,
    spectral_data,
    suggested_timestep,
    synthesize,
)

rng = np.random.default_rng(42)

n = 4
plant = Plant(a=rng.standard_normal((n, n)), c=rng.standard_normal((3, n)),
              node_rows=(1, 1, 1))
w = np.zeros((3, 3))
w[1, 0] = w[2, 1] = w[0, 2] = 1.0
graph = NetworkGraph(weights=w)

alpha = 1.0
realization = synthesize(plant, graph, SynthesisParameters(alpha=alpha))
spectral = spectral_data(graph)
err_sys = build_error_system(realization, spectral)

dt = suggested_timestep(realization, plant, spectral.laplacian,
                        err_sys.full_matrix)
t_final = 10.0
print(f"integrating to t = {t_final} with dt = {dt:.2e}")

cfg = SimulationConfig(t_final=t_final, dt=dt, x0=np.array([1.0, -2.0, 0.5, 3.0]),
                       record_stride=50)
trace = simulate(realization, plant, graph, cfg)

print("\n  t      ||e_1||     ||e_2||     ||e_3||")
for k in np.linspace(0, trace.times.size - 1, 11).astype(int):
    norms = "  ".join(f"{np.linalg.norm(e[k]):.3e}" for e in trace.errors)
    print(f"{trace.times[k]:5.1f}   {norms}")

alpha_hat = estimate_rate(trace)
print(f"\nempirical decay rate alpha_hat = {alpha_hat:.3f} "
      f"(designed for alpha = {alpha})")
print(f"worst relative off-subspace residual = {check_invariance(trace):.3e}")
