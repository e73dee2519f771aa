"""Constructive design of the reduced-order distributed observer.

Per node the observer is
    z_i' = N_i z_i + L_i y_i + gamma * r_i * M_i * sum_j a_ij (xhat_j - xhat_i)
    xhat_i = P_i z_i + Q_i y_i
with z_i of dimension n - p_i, so the total observer order is N*n - sum p_i.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .graph import GraphSpectralData, NetworkGraph, is_strongly_connected, spectral_data
from .linalg import (
    DEFAULT_RANK_TOL,
    FullRankFactorization,
    NodeDecomposition,
    full_rank_factorize,
    min_symmetric_eigenvalue,
    numerical_rank,
    observability_decomposition,
    observability_matrix,
    solve_lyapunov,
    spectral_abscissa,
)

# smallest bisection bracket for the coupling-gain scalar test
BETA_FLOOR = 1e-6


class SynthesisError(RuntimeError):
    """Design failure carrying the pipeline step at which it occurred."""

    def __init__(self, step: str, message: str):
        super().__init__(message)
        self.step = step
        self.message = message


@dataclass(frozen=True)
class Plant:
    """Autonomous LTI plant x' = Ax, y = Cx with C row-partitioned over nodes."""

    a: np.ndarray
    c: np.ndarray
    node_rows: tuple[int, ...]

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        c = np.atleast_2d(np.asarray(self.c, dtype=float))
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("A must be square")
        if c.shape[1] != a.shape[0]:
            raise ValueError("C must have as many columns as A")
        rows = tuple(int(r) for r in self.node_rows)
        if any(r < 1 for r in rows):
            raise ValueError("each node must own at least one output row")
        if sum(rows) != c.shape[0]:
            raise ValueError("node output row counts must sum to the rows of C")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(c))):
            raise ValueError("plant matrices must be finite")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "node_rows", rows)

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def node_count(self) -> int:
        return len(self.node_rows)

    def c_block(self, i: int) -> np.ndarray:
        start = sum(self.node_rows[:i])
        return self.c[start : start + self.node_rows[i], :]


@dataclass(frozen=True)
class SynthesisParameters:
    """Tuning knobs of the constructive design."""

    alpha: float = 0.0
    g_weights: tuple[float, ...] | None = None
    epsilon_fraction: float = 0.9
    gamma_safety: float = 1.25
    rank_tol: float = DEFAULT_RANK_TOL

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        if not (0 < self.epsilon_fraction < 1):
            raise ValueError("epsilon_fraction must lie in (0, 1)")
        if self.gamma_safety <= 1:
            raise ValueError("gamma_safety must exceed 1")
        if self.g_weights is not None and any(g <= 0 for g in self.g_weights):
            raise ValueError("g weights must be positive")


@dataclass(frozen=True)
class NodeGains:
    """Gain matrices of one local observer (N, L, M, P, Q, K, H)."""

    n_gain: np.ndarray
    l_gain: np.ndarray
    m_gain: np.ndarray
    p_out: np.ndarray
    q_out: np.ndarray
    k_mat: np.ndarray
    h_inj: np.ndarray
    p_ie: np.ndarray
    t_is: np.ndarray
    p_dim: int
    v_dim: int


@dataclass(frozen=True)
class ObserverRealization:
    """Complete distributed observer: per-node gains plus global scalars."""

    nodes: tuple[NodeGains, ...]
    gamma: float
    epsilon: float
    r_vector: np.ndarray
    alpha: float
    certificate: dict = field(default_factory=dict)

    @property
    def total_order(self) -> int:
        return sum(g.n_gain.shape[0] for g in self.nodes)


def compute_epsilon(
    decomps: list[NodeDecomposition],
    spectral: GraphSpectralData,
    g_weights,
    epsilon_fraction: float,
) -> float:
    """Strict-positivity margin of T^T (mirror (x) I_n) T + G, scaled down.

    G stacks per-node diag(g_i I_v, 0).  The returned epsilon is
    epsilon_fraction times the smallest eigenvalue, so the strict inequality
    holds with margin at the returned value.
    """
    n = decomps[0].n_dim
    big_n = len(decomps)
    mirror = spectral.mirror
    m = np.zeros((big_n * n, big_n * n))
    for i in range(big_n):
        for j in range(big_n):
            blk = mirror[i, j] * (decomps[i].t_orth.T @ decomps[j].t_orth)
            m[i * n : (i + 1) * n, j * n : (j + 1) * n] = blk
        v = decomps[i].v_dim
        g_blk = np.zeros(n)
        g_blk[:v] = g_weights[i]
        m[i * n : (i + 1) * n, i * n : (i + 1) * n] += np.diag(g_blk)
    lam_min = min_symmetric_eigenvalue(0.5 * (m + m.T))
    if lam_min <= 0:
        raise SynthesisError(
            "epsilon",
            "joint observability violated or graph not strongly connected "
            f"(lambda_min = {lam_min:.3e})",
        )
    return float(epsilon_fraction * lam_min)


def _beta_feasible(beta: float, sym_u: np.ndarray, a32_gram: np.ndarray) -> bool:
    m = sym_u + a32_gram / beta
    return float(scipy.linalg.eigvalsh(0.5 * (m + m.T))[-1]) < beta


def _min_beta_for_node(decomp: NodeDecomposition) -> float:
    """Minimal beta = gamma*eps - 2*alpha making the unobservable-block
    inequality A_u^T + A_u - beta I + (1/beta) A_32 A_32^T < 0 hold."""
    a_u, a32 = decomp.a_u, decomp.a32
    if a_u.size == 0:
        return 0.0
    sym_u = a_u + a_u.T
    gram = a32 @ a32.T if a32.shape[1] > 0 else np.zeros_like(sym_u)
    lo = BETA_FLOOR
    if _beta_feasible(lo, sym_u, gram):
        return lo
    hi = 1.0
    while not _beta_feasible(hi, sym_u, gram):
        hi *= 2.0
    while (hi - lo) > 1e-6 * hi:
        mid = 0.5 * (lo + hi)
        if _beta_feasible(mid, sym_u, gram):
            hi = mid
        else:
            lo = mid
    return hi


def select_gamma(
    decomps: list[NodeDecomposition],
    epsilon: float,
    alpha: float,
    gamma_safety: float,
) -> float:
    """Near-minimal coupling gain: bisection on beta per node, safety-inflated.

    Enforces gamma > 2*alpha/epsilon (beta > 0) and gamma > 2*alpha (positive
    definite Lyapunov forcing in the later solve).
    """
    beta = max((_min_beta_for_node(d) for d in decomps), default=0.0)
    beta = max(beta, BETA_FLOOR)
    gamma_min = max((beta + 2.0 * alpha) / epsilon, 2.0 * alpha)
    return float(gamma_safety * max(gamma_min, BETA_FLOOR))


def place_injection(a22: np.ndarray, ea12: np.ndarray, alpha: float) -> np.ndarray:
    """Output injection H with spectral abscissa of a22 - H ea12 below -alpha.

    Stabilizes the shifted dual pair through a Riccati solve with target
    margin alpha + 0.5, deepening the shift on failure (at most 5 retries).
    """
    k = a22.shape[0]
    if k == 0:
        return np.zeros((0, ea12.shape[0]))
    if numerical_rank(observability_matrix(ea12, a22)) != k:
        raise ValueError("injection pair is not observable (decomposition bug)")
    a_dual = a22.T
    b_dual = ea12.T
    p = ea12.shape[0]
    for extra in (0.5, 1.0, 2.0, 3.0, 4.0):
        shift = alpha + extra
        x = scipy.linalg.solve_continuous_are(
            a_dual + shift * np.eye(k), b_dual, np.eye(k), np.eye(p)
        )
        h = (b_dual.T @ x).T
        if spectral_abscissa(a22 - h @ ea12) < -alpha:
            return h
    raise ValueError("injection placement failed to reach the target abscissa")


def solve_pie(
    a22: np.ndarray, ea12: np.ndarray, h: np.ndarray, gamma: float, alpha: float
) -> np.ndarray:
    """Positive definite solution of the shifted Lyapunov equation
    (a22 - H ea12 + alpha I)^T P + P (...) + (gamma - 2 alpha) I = 0."""
    k = a22.shape[0]
    if k == 0:
        return np.zeros((0, 0))
    if gamma <= 2.0 * alpha:
        raise ValueError("gamma too small for positive definite Lyapunov forcing")
    closed = a22 - h @ ea12 + alpha * np.eye(k)
    return solve_lyapunov(closed, (gamma - 2.0 * alpha) * np.eye(k))


def assemble_gains(
    decomp: NodeDecomposition,
    frf: FullRankFactorization,
    h: np.ndarray,
    pie: np.ndarray,
    node_special: bool,
) -> NodeGains:
    """Evaluate the closed-form gain formulas for one node.

    node_special selects the v = p route where the middle block is void:
    N = A_u, L = A_31 E^-1 D^+, M = T_s^T and K drops the H rows.
    """
    n, v, p = decomp.n_dim, decomp.v_dim, decomp.p_dim
    e_inv = np.linalg.inv(decomp.e_mat)
    d_dag = np.linalg.pinv(frf.d_factor)
    t_is = decomp.t_s

    if node_special:
        if v != p:
            raise ValueError("special route requires v = p")
        n_gain = decomp.a_u.copy()
        k_mat = np.vstack([e_inv, np.zeros((n - p, p))]) @ d_dag
        l_gain = decomp.a31 @ e_inv @ d_dag
        m_gain = t_is.T.copy()
    else:
        n_gain = np.block(
            [
                [decomp.a22 - h @ decomp.e_mat @ decomp.a12,
                 np.zeros((v - p, n - v))],
                [decomp.a32, decomp.a_u],
            ]
        )
        k_mat = np.vstack([e_inv, h, np.zeros((n - v, p))]) @ d_dag
        l_gain = (
            np.vstack([decomp.a21 - h @ decomp.e_mat @ decomp.a11, decomp.a31])
            @ e_inv
            @ d_dag
            + n_gain @ k_mat[p:, :]
        )
        m_gain = (
            scipy.linalg.block_diag(np.linalg.inv(pie), np.eye(n - v)) @ t_is.T
        )

    return NodeGains(
        n_gain=n_gain,
        l_gain=l_gain,
        m_gain=m_gain,
        p_out=t_is.copy(),
        q_out=decomp.t_orth @ k_mat,
        k_mat=k_mat,
        h_inj=h,
        p_ie=pie,
        t_is=t_is.copy(),
        p_dim=p,
        v_dim=v,
    )


def verify_cancellation(
    gains: NodeGains, decomp: NodeDecomposition, frf: FullRankFactorization
) -> float:
    """Frobenius norm of the state-dependence cancellation identity.

    The identity (S L - S N S^T K) D F T + S N S^T + (K D F T - I) T^T A T
    must vanish for the assembled gains.
    """
    n, p = decomp.n_dim, decomp.p_dim
    s = np.vstack([np.zeros((p, n - p)), np.eye(n - p)])
    dft = frf.d_factor @ frf.f_factor @ decomp.t_orth
    at = decomp.a_transformed
    lhs = (
        (s @ gains.l_gain - s @ gains.n_gain @ s.T @ gains.k_mat) @ dft
        + s @ gains.n_gain @ s.T
        + (gains.k_mat @ dft - np.eye(n)) @ at
    )
    return float(np.linalg.norm(lhs))


def verify_lmi_th1(
    candidates: list[dict],
    decomps: list[NodeDecomposition],
    gamma: float,
    epsilon: float,
    alpha: float,
    g_weights,
) -> tuple[bool, list[float]]:
    """Check the per-node feasibility LMI at a candidate (P_ie, P_iu, W_i).

    Returns (all negative definite, worst eigenvalue per node).  Empty node
    blocks (p = n) report -inf.
    """
    worst = []
    for cand, decomp, g_i in zip(candidates, decomps, g_weights):
        n, v, p = decomp.n_dim, decomp.v_dim, decomp.p_dim
        pie = np.atleast_2d(np.asarray(cand["p_ie"], dtype=float)).reshape(v - p, v - p)
        piu = np.atleast_2d(np.asarray(cand["p_iu"], dtype=float)).reshape(n - v, n - v)
        w = np.asarray(cand["w"], dtype=float).reshape(v - p, p)
        if n - p == 0:
            worst.append(-np.inf)
            continue
        if pie.size and scipy.linalg.eigvalsh(0.5 * (pie + pie.T))[0] <= 0:
            raise ValueError("candidate P_ie is not positive definite")
        if piu.size and scipy.linalg.eigvalsh(0.5 * (piu + piu.T))[0] <= 0:
            raise ValueError("candidate P_iu is not positive definite")
        ea12 = decomp.e_mat @ decomp.a12
        phi = (
            pie @ decomp.a22
            + decomp.a22.T @ pie
            - w @ ea12
            - ea12.T @ w.T
            + 2.0 * alpha * pie
        )
        blk = np.block(
            [
                [phi + gamma * g_i * np.eye(v - p), decomp.a32.T @ piu],
                [piu @ decomp.a32,
                 decomp.a_u.T @ piu + piu @ decomp.a_u + 2.0 * alpha * piu],
            ]
        ) - gamma * epsilon * np.eye(n - p)
        blk = 0.5 * (blk + blk.T)
        worst.append(float(scipy.linalg.eigvalsh(blk)[-1]))
    return all(w < 0 for w in worst), worst


def synthesize(
    plant: Plant,
    graph: NetworkGraph,
    params: SynthesisParameters | None = None,
) -> ObserverRealization:
    """Run the full constructive design and certify the result.

    Raises SynthesisError (with a step tag) when the standing assumptions
    fail: graph not strongly connected, (C, A) not observable, or a node
    with zero output matrix.
    """
    from .error_system import build_error_system, certify_rate, lyapunov_decrease_check

    params = params or SynthesisParameters()
    big_n = plant.node_count
    if graph.node_count != big_n:
        raise SynthesisError("input", "graph node count does not match output partition")
    g_weights = params.g_weights or tuple(1.0 for _ in range(big_n))
    if len(g_weights) != big_n:
        raise SynthesisError("input", "g_weights length does not match node count")

    if not is_strongly_connected(graph):
        raise SynthesisError("graph", "communication graph is not strongly connected")
    spectral = spectral_data(graph)

    if numerical_rank(observability_matrix(plant.c, plant.a), params.rank_tol) != plant.n:
        raise SynthesisError("observability", "(C, A) is not observable")

    frfs, decomps = [], []
    for i in range(big_n):
        try:
            frf = full_rank_factorize(plant.c_block(i), params.rank_tol)
        except ValueError as exc:
            raise SynthesisError("factorization", f"node {i + 1}: {exc}") from exc
        try:
            decomp = observability_decomposition(plant.a, frf.f_factor, params.rank_tol)
        except ValueError as exc:
            raise SynthesisError("decomposition", f"node {i + 1}: {exc}") from exc
        frfs.append(frf)
        decomps.append(decomp)

    epsilon = compute_epsilon(decomps, spectral, g_weights, params.epsilon_fraction)
    gamma = select_gamma(decomps, epsilon, params.alpha, params.gamma_safety)

    nodes = []
    for i, (frf, decomp) in enumerate(zip(frfs, decomps)):
        special = decomp.v_dim == decomp.p_dim
        try:
            if special:
                h = np.zeros((0, decomp.p_dim))
                pie = np.zeros((0, 0))
            else:
                ea12 = decomp.e_mat @ decomp.a12
                h = place_injection(decomp.a22, ea12, params.alpha)
                pie = solve_pie(decomp.a22, ea12, h, gamma, params.alpha)
            nodes.append(assemble_gains(decomp, frf, h, pie, special))
        except ValueError as exc:
            raise SynthesisError("gains", f"node {i + 1}: {exc}") from exc

    cancel_max = max(
        verify_cancellation(g, d, f) for g, d, f in zip(nodes, decomps, frfs)
    )
    candidates = [
        {
            "p_ie": g.p_ie,
            "p_iu": np.eye(d.n_dim - d.v_dim),
            "w": g.p_ie @ g.h_inj if g.p_ie.size else np.zeros((0, d.p_dim)),
        }
        for g, d in zip(nodes, decomps)
    ]
    lmi_pass, lmi_eigs = verify_lmi_th1(
        candidates, decomps, gamma, epsilon, params.alpha, g_weights
    )

    realization = ObserverRealization(
        nodes=tuple(nodes),
        gamma=gamma,
        epsilon=epsilon,
        r_vector=spectral.perron_row.copy(),
        alpha=params.alpha,
    )
    err_sys = build_error_system(realization, spectral)
    rate = certify_rate(err_sys, params.alpha)
    lyap_max = lyapunov_decrease_check(err_sys, realization, params.alpha)

    certificate = {
        "epsilon": epsilon,
        "gamma": gamma,
        "restricted_spectral_abscissa": rate["abscissa"],
        "cancellation_residual_max": cancel_max,
        "lmi_max_eigenvalues": lmi_eigs,
        "lmi_pass": lmi_pass,
        "lyapunov_max_eigenvalue": lyap_max,
        "rate_pass": rate["pass"],
    }
    return ObserverRealization(
        nodes=realization.nodes,
        gamma=gamma,
        epsilon=epsilon,
        r_vector=realization.r_vector,
        alpha=params.alpha,
        certificate=certificate,
    )
