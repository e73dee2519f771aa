"""Fixed-step simulation of the plant coupled with the N local observers.

A classical explicit 4th-order scheme is used with simultaneous stage
evaluation of the neighbor-estimate coupling, keeping traces deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .graph import NetworkGraph
from .synthesis import ObserverRealization, Plant


class SimulationDiverged(RuntimeError):
    def __init__(self, t: float):
        super().__init__(f"non-finite state at t = {t:.6g}; unstable or dt too large")
        self.t = t


@dataclass(frozen=True)
class SimulationConfig:
    t_final: float
    dt: float
    x0: np.ndarray
    z0: list[np.ndarray] | None = None
    record_stride: int = 1

    def __post_init__(self):
        if self.dt <= 0 or self.t_final <= 0 or self.dt >= self.t_final:
            raise ValueError("need 0 < dt < t_final")
        if self.record_stride < 1:
            raise ValueError("record_stride must be a positive integer")
        object.__setattr__(self, "x0", np.asarray(self.x0, dtype=float))


@dataclass(frozen=True)
class SimulationTrace:
    times: np.ndarray
    x: np.ndarray                 # (samples, n)
    z: list[np.ndarray]           # per node (samples, n - p_i)
    xhat: list[np.ndarray]        # per node (samples, n)
    errors: list[np.ndarray]      # per node (samples, n), xhat_i - x
    invariance_residuals: np.ndarray = field(default=None)  # (samples, N)


def suggested_timestep(
    realization: ObserverRealization,
    plant: Plant,
    laplacian: np.ndarray,
    full_error_matrix: np.ndarray,
) -> float:
    """Default step respecting the stiffness introduced by a large coupling gain."""
    from .linalg import spectral_abscissa

    absc = abs(spectral_abscissa(full_error_matrix))
    a_norm = np.linalg.norm(plant.a, 2)
    lap_norm = np.linalg.norm(laplacian, 2)
    # The injection blocks can dominate A and gamma*L when the internal
    # Lyapunov weights are ill-conditioned; bound the step by the spectral
    # norm of the assembled error matrix as well.
    scale = max(a_norm + realization.gamma * lap_norm,
                np.linalg.norm(full_error_matrix, 2))
    return 0.1 / (absc + scale + 1e-12)


def equilibrium_initial_observer_states(
    realization: ObserverRealization, plant: Plant, x0: np.ndarray
) -> list[np.ndarray]:
    """Observer initial states giving zero initial estimation error.

    From the error-coordinate identity z_i = S_i^T (T_i^T e_i - K_i y_i + T_i^T x)
    at e_i = 0: z_i(0) = T_is^T x0 - (S_i^T K_i) C_i x0.
    """
    out = []
    for i, g in enumerate(realization.nodes):
        y0 = plant.c_block(i) @ x0
        out.append(g.t_is.T @ x0 - g.k_mat[g.p_dim :, :] @ y0)
    return out


def simulate(
    realization: ObserverRealization,
    plant: Plant,
    graph: NetworkGraph,
    cfg: SimulationConfig,
) -> SimulationTrace:
    """Integrate plant and observers; record every record_stride steps."""
    n = plant.n
    big_n = plant.node_count
    nodes = realization.nodes
    orders = [g.n_gain.shape[0] for g in nodes]
    if cfg.x0.shape != (n,):
        raise ValueError("x0 has the wrong dimension")
    if cfg.z0 is None:
        z_list = [np.zeros(k) for k in orders]
    else:
        z_list = [np.asarray(z, dtype=float) for z in cfg.z0]
        if [z.shape[0] for z in z_list] != orders:
            raise ValueError("z0 dimensions do not match observer orders")

    a_w = graph.weights
    gamma = realization.gamma
    r = np.asarray(realization.r_vector)
    c_blocks = [plant.c_block(i) for i in range(big_n)]
    offsets = np.concatenate([[0], np.cumsum(orders)]).astype(int)

    state = np.concatenate([cfg.x0] + z_list)

    def estimates(s):
        x = s[:n]
        xh = np.empty((big_n, n))
        for i, g in enumerate(nodes):
            z_i = s[n + offsets[i] : n + offsets[i + 1]]
            xh[i] = g.p_out @ z_i + g.q_out @ (c_blocks[i] @ x)
        return xh

    def rhs(s):
        x = s[:n]
        xh = estimates(s)
        ds = np.empty_like(s)
        ds[:n] = plant.a @ x
        for i, g in enumerate(nodes):
            z_i = s[n + offsets[i] : n + offsets[i + 1]]
            coupling = np.zeros(n)
            for j in range(big_n):
                if a_w[i, j] > 0:
                    coupling += a_w[i, j] * (xh[j] - xh[i])
            ds[n + offsets[i] : n + offsets[i + 1]] = (
                g.n_gain @ z_i + g.l_gain @ (c_blocks[i] @ x)
                + gamma * r[i] * (g.m_gain @ coupling)
            )
        return ds

    # land exactly on t_final: full steps of dt plus one truncated final step
    # when dt does not divide the horizon
    steps = int(math.floor(cfg.t_final / cfg.dt + 1e-9))
    remainder = cfg.t_final - steps * cfg.dt
    if remainder > 1e-9 * cfg.t_final:
        steps += 1
    else:
        remainder = 0.0
    times, xs = [], []
    zs = [[] for _ in range(big_n)]
    xhs = [[] for _ in range(big_n)]

    def record(t, s):
        times.append(t)
        xs.append(s[:n].copy())
        xh = estimates(s)
        for i in range(big_n):
            zs[i].append(s[n + offsets[i] : n + offsets[i + 1]].copy())
            xhs[i].append(xh[i].copy())

    record(0.0, state)
    for step in range(1, steps + 1):
        last = step == steps
        dt = cfg.dt if not (last and remainder) else remainder
        with np.errstate(over="ignore", invalid="ignore"):
            k1 = rhs(state)
            k2 = rhs(state + 0.5 * dt * k1)
            k3 = rhs(state + 0.5 * dt * k2)
            k4 = rhs(state + dt * k3)
            state = state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = cfg.t_final if last else step * cfg.dt
        if not np.all(np.isfinite(state)):
            raise SimulationDiverged(t)
        if step % cfg.record_stride == 0 or last:
            record(t, state)

    times = np.asarray(times)
    x_arr = np.asarray(xs)
    z_arrs = [np.asarray(z) for z in zs]
    xh_arrs = [np.asarray(xh) for xh in xhs]
    err_arrs = [xh - x_arr for xh in xh_arrs]

    inv = np.empty((len(times), big_n))
    for i, g in enumerate(nodes):
        # ||T_ip^T e_i|| equals the norm of the component off im T_is
        e = err_arrs[i]
        off = e - (e @ g.t_is) @ g.t_is.T
        inv[:, i] = np.linalg.norm(off, axis=1)

    return SimulationTrace(
        times=times,
        x=x_arr,
        z=z_arrs,
        xhat=xh_arrs,
        errors=err_arrs,
        invariance_residuals=inv,
    )


def estimate_rate(trace: SimulationTrace, window: float = 0.5) -> float:
    """Decay-rate estimate from a log-linear fit on the tail of ||e(t)||.

    Returns +inf when the stacked error is already below the numerical floor
    across the fitting window (converged beyond measurement).
    """
    if not (0 < window <= 1):
        raise ValueError("window must lie in (0, 1]")
    e_norm = np.linalg.norm(np.hstack(trace.errors), axis=1)
    alive = e_norm > 1e-12
    if not np.any(alive):
        return math.inf
    last = np.nonzero(alive)[0][-1]
    usable = np.arange(last + 1)[alive[: last + 1]]
    take = max(int(round(window * usable.size)), 2)
    idx = usable[-take:]
    if idx.size < 10:
        return math.inf
    slope = np.polyfit(trace.times[idx], np.log(e_norm[idx]), 1)[0]
    return float(-slope)


def check_invariance(trace: SimulationTrace) -> float:
    """Worst relative off-subspace residual max_{t,i} ||T_ip^T e_i|| / max(1, ||e_i||)."""
    worst = 0.0
    for i, e in enumerate(trace.errors):
        denom = np.maximum(1.0, np.linalg.norm(e, axis=1))
        worst = max(worst, float(np.max(trace.invariance_residuals[:, i] / denom)))
    return worst
