"""Dense linear-algebra kernels: full-rank factorization, observability
decomposition, Lyapunov solves and eigenvalue/definiteness utilities."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

DEFAULT_RANK_TOL = 1e-9


@dataclass(frozen=True)
class FullRankFactorization:
    """C = d_factor @ f_factor with full column / row rank factors."""

    d_factor: np.ndarray
    f_factor: np.ndarray
    rank: int


@dataclass(frozen=True)
class NodeDecomposition:
    """Orthogonal observability decomposition of (F, A) for one node.

    t_orth = [T_p | T_e | T_u] with p, v-p and n-v columns respectively.
    In these coordinates A takes the block form

        [a11  a12  0 ]
        [a21  a22  0 ]
        [a31  a32  a_u]

    and F t_orth = [e_mat 0 0] with e_mat invertible.  v_dim is the dimension
    of the observable subspace of (F, A).
    """

    t_orth: np.ndarray
    a11: np.ndarray
    a12: np.ndarray
    a21: np.ndarray
    a22: np.ndarray
    a31: np.ndarray
    a32: np.ndarray
    a_u: np.ndarray
    e_mat: np.ndarray
    v_dim: int
    p_dim: int

    @property
    def n_dim(self) -> int:
        return self.t_orth.shape[0]

    @property
    def t_p(self) -> np.ndarray:
        """First p columns of T (basis of im F^T)."""
        return self.t_orth[:, : self.p_dim]

    @property
    def t_obs(self) -> np.ndarray:
        """First v columns of T (basis of the observable subspace)."""
        return self.t_orth[:, : self.v_dim]

    @property
    def t_s(self) -> np.ndarray:
        """Last n - p columns of T; the observer lives on their span."""
        return self.t_orth[:, self.p_dim :]

    @property
    def a_transformed(self) -> np.ndarray:
        """Assemble T^T A T from the stored blocks (structural zeros exact)."""
        n, v, p = self.n_dim, self.v_dim, self.p_dim
        out = np.zeros((n, n))
        out[:p, :p] = self.a11
        out[:p, p:v] = self.a12
        out[p:v, :p] = self.a21
        out[p:v, p:v] = self.a22
        out[v:, :p] = self.a31
        out[v:, p:v] = self.a32
        out[v:, v:] = self.a_u
        return out

    @property
    def a_io(self) -> np.ndarray:
        return self.a_transformed[: self.v_dim, : self.v_dim]

    @property
    def f_io(self) -> np.ndarray:
        out = np.zeros((self.p_dim, self.v_dim))
        out[:, : self.p_dim] = self.e_mat
        return out


def numerical_rank(m: np.ndarray, tol: float = DEFAULT_RANK_TOL) -> int:
    """Count of singular values above tol relative to the largest one."""
    s = scipy.linalg.svdvals(m)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.count_nonzero(s > tol * s[0]))


def observability_matrix(f: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Stacked matrix col(F, FA, ..., FA^(n-1))."""
    n = a.shape[0]
    blocks = [np.atleast_2d(f)]
    for _ in range(n - 1):
        blocks.append(blocks[-1] @ a)
    return np.vstack(blocks)


def _fix_column_signs(t: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Make the first nonzero entry of each column positive (reproducibility)."""
    t = t.copy()
    for j in range(t.shape[1]):
        col = t[:, j]
        nz = np.nonzero(np.abs(col) > tol)[0]
        if nz.size and col[nz[0]] < 0:
            t[:, j] = -col
    return t


def full_rank_factorize(
    c_i: np.ndarray, tol: float = DEFAULT_RANK_TOL
) -> FullRankFactorization:
    """Factor C = D F with D full column rank and F full row rank.

    When C already has full row rank the factorization is skipped and D = I,
    F = C.  A zero matrix is rejected: such a node has no effective output.
    """
    c_i = np.atleast_2d(np.asarray(c_i, dtype=float))
    m = c_i.shape[0]
    p = numerical_rank(c_i, tol)
    if p == 0:
        raise ValueError("node has no effective output (zero output matrix)")
    if p == m:
        return FullRankFactorization(d_factor=np.eye(m), f_factor=c_i.copy(), rank=p)
    u, s, vt = scipy.linalg.svd(c_i, full_matrices=False)
    d = u[:, :p] * s[:p]
    f = vt[:p, :]
    # normalize signs through the shared inner dimension for reproducibility
    for k in range(p):
        nz = np.nonzero(np.abs(f[k]) > 1e-12)[0]
        if nz.size and f[k, nz[0]] < 0:
            f[k] = -f[k]
            d[:, k] = -d[:, k]
    return FullRankFactorization(d_factor=d, f_factor=f, rank=p)


def observability_decomposition(
    a: np.ndarray, f_i: np.ndarray, tol: float = DEFAULT_RANK_TOL
) -> NodeDecomposition:
    """Orthogonal staircase decomposition of (F, A) exposing im F^T first.

    Columns of T are built as [basis of im F^T | completion inside the
    observable subspace | basis of the unobservable subspace], each block
    orthonormal, signs fixed for determinism.
    """
    a = np.asarray(a, dtype=float)
    f_i = np.atleast_2d(np.asarray(f_i, dtype=float))
    n = a.shape[0]
    p = f_i.shape[0]
    if numerical_rank(f_i, tol) != p:
        raise ValueError("virtual output matrix is not full row rank")

    obs = observability_matrix(f_i, a)
    u_o, s_o, vt_o = scipy.linalg.svd(obs)
    v = int(np.count_nonzero(s_o > tol * s_o[0])) if s_o.size else 0
    t_u = vt_o[v:, :].T  # orthonormal basis of ker O

    # basis of im F^T
    t_p = scipy.linalg.orth(f_i.T)
    if t_p.shape[1] != p:
        raise ValueError("virtual output matrix is not full row rank")

    # completion inside the observable subspace: project row space of O off t_p
    t_obs_full = vt_o[:v, :].T
    proj = t_obs_full - t_p @ (t_p.T @ t_obs_full)
    if v > p:
        u_e, s_e, _ = scipy.linalg.svd(proj, full_matrices=False)
        t_e = u_e[:, : v - p]
    else:
        t_e = np.zeros((n, 0))

    t = np.hstack([_fix_column_signs(t_p), _fix_column_signs(t_e),
                   _fix_column_signs(t_u)])

    a_norm = np.linalg.norm(a)
    at = t.T @ a @ t
    zero_tol = 1e-10 * max(1.0, a_norm)
    if v < n:
        leak = np.max(np.abs(at[:v, v:]))
        if leak > zero_tol:
            raise ValueError(
                f"observability decomposition failed: structural block leak {leak:.3e}"
            )
        at[:v, v:] = 0.0

    e_mat = f_i @ t[:, :p]
    return NodeDecomposition(
        t_orth=t,
        a11=at[:p, :p],
        a12=at[:p, p:v],
        a21=at[p:v, :p],
        a22=at[p:v, p:v],
        a31=at[v:, :p],
        a32=at[v:, p:v],
        a_u=at[v:, v:],
        e_mat=e_mat,
        v_dim=v,
        p_dim=p,
    )


def spectral_abscissa(m: np.ndarray) -> float:
    """Largest real part over the eigenvalues of m (-inf for empty m)."""
    m = np.asarray(m, dtype=float)
    if m.size == 0:
        return -np.inf
    return float(np.max(scipy.linalg.eigvals(m).real))


def min_symmetric_eigenvalue(m: np.ndarray, tol: float = 1e-10) -> float:
    """Smallest eigenvalue of a symmetric matrix; rejects asymmetric input."""
    m = np.asarray(m, dtype=float)
    if m.size == 0:
        return np.inf
    asym = np.max(np.abs(m - m.T))
    if asym > tol * max(1.0, np.max(np.abs(m))):
        raise ValueError(f"matrix is not symmetric (deviation {asym:.3e})")
    return float(scipy.linalg.eigvalsh(0.5 * (m + m.T))[0])


def is_negative_definite(m: np.ndarray, margin: float = 0.0) -> bool:
    """True iff the largest eigenvalue of sym(m) is <= -margin."""
    m = np.asarray(m, dtype=float)
    if m.size == 0:
        return True
    sym = 0.5 * (m + m.T)
    return bool(scipy.linalg.eigvalsh(sym)[-1] <= -margin)


def solve_lyapunov(a: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Solve A^T P + P A + Q = 0 for Hurwitz A and symmetric Q.

    Uses the real-Schur direct method of the host linear-algebra layer.
    """
    a = np.asarray(a, dtype=float)
    q = np.asarray(q, dtype=float)
    if a.size == 0:
        return np.zeros((0, 0))
    if spectral_abscissa(a) >= 0:
        raise ValueError("unstable coefficient matrix")
    p = scipy.linalg.solve_continuous_lyapunov(a.T, -q)
    return 0.5 * (p + p.T)
