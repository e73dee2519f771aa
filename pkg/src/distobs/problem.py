"""Problem-file parsing and JSON/CSV serialization of results.

Problem JSON schema:
    {"A": [[...]], "C": [[...]], "node_outputs": [m_1, ..., m_N],
     "graph": {"N": int, "edges": [{"from": i, "to": j, "weight": w}, ...]},
     "alpha": float, "overrides": {...}}

An edge {"from": i, "to": j} (1-based) means information flows i -> j and
sets the adjacency weight a_ji.  Floats are serialized via repr, so a write
followed by a read reproduces every matrix bit-exactly.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .graph import NetworkGraph
from .simulate import SimulationTrace
from .synthesis import NodeGains, ObserverRealization, Plant, SynthesisParameters


class ProblemFormatError(ValueError):
    pass


@dataclass(frozen=True)
class ProblemFile:
    plant: Plant
    graph: NetworkGraph
    alpha: float
    overrides: dict

    def parameters(self) -> SynthesisParameters:
        ov = self.overrides
        kwargs = {"alpha": self.alpha}
        if "g_weights" in ov:
            kwargs["g_weights"] = tuple(float(g) for g in ov["g_weights"])
        if "epsilon_fraction" in ov:
            kwargs["epsilon_fraction"] = float(ov["epsilon_fraction"])
        if "gamma_safety" in ov:
            kwargs["gamma_safety"] = float(ov["gamma_safety"])
        if "rank_tol" in ov:
            kwargs["rank_tol"] = float(ov["rank_tol"])
        return SynthesisParameters(**kwargs)


def graph_from_fragment(fragment: dict) -> NetworkGraph:
    """Build a NetworkGraph from the {"N", "edges"} JSON fragment."""
    try:
        n = int(fragment["N"])
        edges = fragment.get("edges", [])
    except (KeyError, TypeError, ValueError) as exc:
        raise ProblemFormatError(f"malformed graph fragment: {exc}") from exc
    if n < 1:
        raise ProblemFormatError("graph needs at least one node")
    weights = np.zeros((n, n))
    for e in edges:
        try:
            src, dst, w = int(e["from"]), int(e["to"]), float(e["weight"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ProblemFormatError(f"malformed edge entry {e!r}") from exc
        if not (1 <= src <= n and 1 <= dst <= n) or src == dst:
            raise ProblemFormatError(f"edge {src}->{dst} out of range or a self-loop")
        if w <= 0:
            raise ProblemFormatError(f"edge {src}->{dst} must have positive weight")
        weights[dst - 1, src - 1] = w  # a_{ji} on the edge (i, j)
    return NetworkGraph(weights=weights)


def load_problem(path) -> ProblemFile:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ProblemFormatError(f"invalid JSON: {exc}") from exc
    return problem_from_dict(doc)


def problem_from_dict(doc: dict) -> ProblemFile:
    try:
        a = np.asarray(doc["A"], dtype=float)
        c = np.atleast_2d(np.asarray(doc["C"], dtype=float))
        node_outputs = [int(m) for m in doc["node_outputs"]]
        graph = graph_from_fragment(doc["graph"])
        alpha = float(doc.get("alpha", 0.0))
    except (KeyError, TypeError, ValueError) as exc:
        raise ProblemFormatError(f"malformed problem file: {exc}") from exc
    if graph.node_count != len(node_outputs):
        raise ProblemFormatError("graph node count does not match node_outputs")
    try:
        plant = Plant(a=a, c=c, node_rows=tuple(node_outputs))
    except ValueError as exc:
        raise ProblemFormatError(str(exc)) from exc
    overrides = doc.get("overrides", {}) or {}
    return ProblemFile(plant=plant, graph=graph, alpha=alpha, overrides=overrides)


def _mat(m: np.ndarray) -> list:
    return np.asarray(m, dtype=float).tolist()


def realization_to_dict(realization: ObserverRealization) -> dict:
    return {
        "nodes": [
            {
                "N": _mat(g.n_gain),
                "L": _mat(g.l_gain),
                "M": _mat(g.m_gain),
                "P": _mat(g.p_out),
                "Q": _mat(g.q_out),
                "K": _mat(g.k_mat),
                "H": _mat(g.h_inj),
                "Pie": _mat(g.p_ie),
                "Tis": _mat(g.t_is),
            }
            for g in realization.nodes
        ],
        "gamma": realization.gamma,
        "epsilon": realization.epsilon,
        "r": list(np.asarray(realization.r_vector, dtype=float)),
        "alpha": realization.alpha,
        "certificate": realization.certificate,
    }


def _as_matrix(data, rows: int, cols: int) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.size == 0:
        return np.zeros((rows, cols))
    return arr.reshape(rows, cols)


def realization_from_dict(doc: dict) -> ObserverRealization:
    try:
        nodes = []
        for nd in doc["nodes"]:
            t_is = np.asarray(nd["Tis"], dtype=float)
            n, order = t_is.shape
            p = n - order
            q = np.asarray(nd["Q"], dtype=float)
            m_i = q.shape[1]
            pie_raw = np.asarray(nd["Pie"], dtype=float)
            k_e = pie_raw.shape[0] if pie_raw.size else 0  # = v - p
            v = p + k_e
            nodes.append(
                NodeGains(
                    n_gain=_as_matrix(nd["N"], order, order),
                    l_gain=_as_matrix(nd["L"], order, m_i),
                    m_gain=_as_matrix(nd["M"], order, n),
                    p_out=_as_matrix(nd["P"], n, order),
                    q_out=q,
                    k_mat=_as_matrix(nd["K"], n, m_i),
                    h_inj=_as_matrix(nd["H"], v - p, p),
                    p_ie=_as_matrix(nd["Pie"], k_e, k_e),
                    t_is=t_is,
                    p_dim=p,
                    v_dim=v,
                )
            )
        return ObserverRealization(
            nodes=tuple(nodes),
            gamma=float(doc["gamma"]),
            epsilon=float(doc["epsilon"]),
            r_vector=np.asarray(doc["r"], dtype=float),
            alpha=float(doc.get("alpha", 0.0)),
            certificate=doc.get("certificate", {}) or {},
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ProblemFormatError(f"malformed gains file: {exc}") from exc


def save_realization(realization: ObserverRealization, path) -> None:
    with open(path, "w") as fh:
        json.dump(realization_to_dict(realization), fh, indent=1)
        fh.write("\n")


def load_realization(path) -> ObserverRealization:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ProblemFormatError(f"invalid JSON: {exc}") from exc
    return realization_from_dict(doc)


def write_trace_csv(trace: SimulationTrace, path) -> None:
    """Columns: t, x_1..x_n, then per node k: z_k_*, xhat_k_*, err_norm_k, inv_res_k."""
    n = trace.x.shape[1]
    header = ["t"] + [f"x_{j + 1}" for j in range(n)]
    for k, z in enumerate(trace.z, start=1):
        header += [f"z_{k}_{j + 1}" for j in range(z.shape[1])]
        header += [f"xhat_{k}_{j + 1}" for j in range(n)]
        header += [f"err_norm_{k}", f"inv_res_{k}"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for s in range(trace.times.size):
            row = [repr(float(trace.times[s]))]
            row += [repr(float(v)) for v in trace.x[s]]
            for k in range(len(trace.z)):
                row += [repr(float(v)) for v in trace.z[k][s]]
                row += [repr(float(v)) for v in trace.xhat[k][s]]
                row.append(repr(float(np.linalg.norm(trace.errors[k][s]))))
                row.append(repr(float(trace.invariance_residuals[s, k])))
            writer.writerow(row)


def trace_summary(trace: SimulationTrace, alpha_hat: float, max_inv: float) -> dict:
    return {
        "alpha_hat": alpha_hat,
        "max_invariance_residual": max_inv,
        "final_error_norms": [
            float(np.linalg.norm(e[-1])) for e in trace.errors
        ],
    }
