"""Command-line front end: synthesize / simulate / verify.

Exit codes: 0 ok, 1 I/O or parse error, 2 infeasible or violated assumptions,
3 simulation divergence, 4 certificate failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .error_system import build_error_system, certify_rate, lyapunov_decrease_check
from .graph import GraphStructureError, spectral_data
from .problem import (
    ProblemFormatError,
    load_problem,
    load_realization,
    save_realization,
    trace_summary,
    write_trace_csv,
)
from .simulate import (
    SimulationConfig,
    SimulationDiverged,
    check_invariance,
    estimate_rate,
    simulate,
    suggested_timestep,
)
from .synthesis import (
    SynthesisError,
    SynthesisParameters,
    full_rank_factorize,
    observability_decomposition,
    synthesize,
    verify_cancellation,
    verify_lmi_th1,
)

EXIT_OK = 0
EXIT_IO = 1
EXIT_INFEASIBLE = 2
EXIT_DIVERGED = 3
EXIT_CERTIFICATE = 4


def _emit_error(step: str, message: str) -> None:
    print(json.dumps({"error": {"step": step, "message": message}}), file=sys.stderr)


def _report_from_realization(realization, plant) -> dict:
    cert = realization.certificate
    return {
        "total_order": realization.total_order,
        "nodes": [{"p": g.p_dim, "v": g.v_dim} for g in realization.nodes],
        "epsilon": realization.epsilon,
        "gamma": realization.gamma,
        "restricted_abscissa": cert.get("restricted_spectral_abscissa"),
        "cancellation_residual": cert.get("cancellation_residual_max"),
        "lmi_pass": cert.get("lmi_pass"),
        "alpha": realization.alpha,
    }


def cmd_synthesize(args) -> int:
    try:
        problem = load_problem(args.input)
    except (OSError, ProblemFormatError) as exc:
        _emit_error("parse", str(exc))
        return EXIT_IO

    params = problem.parameters()
    if args.rank_tol is not None:
        params = SynthesisParameters(
            alpha=params.alpha, g_weights=params.g_weights,
            epsilon_fraction=params.epsilon_fraction,
            gamma_safety=params.gamma_safety, rank_tol=args.rank_tol,
        )
    if args.epsilon_fraction is not None:
        params = SynthesisParameters(
            alpha=params.alpha, g_weights=params.g_weights,
            epsilon_fraction=args.epsilon_fraction,
            gamma_safety=params.gamma_safety, rank_tol=params.rank_tol,
        )
    if args.gamma_safety is not None:
        params = SynthesisParameters(
            alpha=params.alpha, g_weights=params.g_weights,
            epsilon_fraction=params.epsilon_fraction,
            gamma_safety=args.gamma_safety, rank_tol=params.rank_tol,
        )

    try:
        realization = synthesize(problem.plant, problem.graph, params)
    except SynthesisError as exc:
        _emit_error(exc.step, exc.message)
        return EXIT_INFEASIBLE
    except GraphStructureError as exc:
        _emit_error("graph", str(exc))
        return EXIT_INFEASIBLE

    try:
        save_realization(realization, args.output)
    except OSError as exc:
        _emit_error("write", str(exc))
        return EXIT_IO

    report = _report_from_realization(realization, problem.plant)
    if args.json:
        print(json.dumps(report, indent=1))
    else:
        print(f"total observer order : {report['total_order']}")
        for i, nd in enumerate(report["nodes"], start=1):
            print(f"node {i}: p = {nd['p']}, v = {nd['v']}")
        print(f"epsilon              : {report['epsilon']:.6g}")
        print(f"gamma                : {report['gamma']:.6g}")
        print(f"restricted abscissa  : {report['restricted_abscissa']:.6g}")
        print(f"cancellation residual: {report['cancellation_residual']:.3e}")
        print(f"LMI feasibility      : {'pass' if report['lmi_pass'] else 'FAIL'}")
    return EXIT_OK


def _parse_vector(text: str) -> np.ndarray:
    return np.array([float(v) for v in text.split(",") if v.strip() != ""])


def cmd_simulate(args) -> int:
    try:
        problem = load_problem(args.problem)
        realization = load_realization(args.gains)
    except (OSError, ProblemFormatError) as exc:
        _emit_error("parse", str(exc))
        return EXIT_IO

    plant, graph = problem.plant, problem.graph
    n = plant.n
    if len(realization.nodes) != plant.node_count or any(
        g.q_out.shape != (n, m) for g, m in zip(realization.nodes, plant.node_rows)
    ):
        _emit_error("dimensions", "gains file does not match the problem file")
        return EXIT_IO

    try:
        spectral = spectral_data(graph)
    except GraphStructureError as exc:
        _emit_error("graph", str(exc))
        return EXIT_INFEASIBLE
    err_sys = build_error_system(realization, spectral)

    alpha = realization.alpha
    t_final = args.tfinal if args.tfinal else 10.0 / max(alpha, 0.5)
    if args.dt:
        dt = args.dt
    else:
        dt = suggested_timestep(
            realization, plant, spectral.laplacian, err_sys.full_matrix
        )
        # short horizons: keep the default step strictly inside (0, t_final)
        dt = min(dt, t_final / 10.0)
    x0 = _parse_vector(args.x0) if args.x0 else np.ones(n)
    z0 = None
    if args.z0:
        flat = _parse_vector(args.z0)
        orders = [g.n_gain.shape[0] for g in realization.nodes]
        if flat.size != sum(orders):
            _emit_error("dimensions", "--z0 length does not match total observer order")
            return EXIT_IO
        z0, pos = [], 0
        for k in orders:
            z0.append(flat[pos : pos + k])
            pos += k

    try:
        cfg = SimulationConfig(t_final=t_final, dt=dt, x0=x0, z0=z0,
                               record_stride=args.record_stride)
        trace = simulate(realization, plant, graph, cfg)
    except ValueError as exc:
        _emit_error("dimensions", str(exc))
        return EXIT_IO
    except SimulationDiverged as exc:
        _emit_error("simulation", str(exc))
        return EXIT_DIVERGED

    alpha_hat = estimate_rate(trace)
    max_inv = check_invariance(trace)
    summary = trace_summary(trace, alpha_hat, max_inv)
    e_norm = np.linalg.norm(np.hstack(trace.errors), axis=1)
    summary["low_confidence"] = bool(
        not np.isfinite(alpha_hat) or np.count_nonzero(e_norm > 1e-12) < 20
    )

    if args.trace_out:
        try:
            write_trace_csv(trace, args.trace_out)
        except OSError as exc:
            _emit_error("write", str(exc))
            return EXIT_IO
    print(json.dumps(summary, indent=1))

    if e_norm[0] > 0 and e_norm[-1] > e_norm[0]:
        _emit_error("omniscience", "estimation error grew over the horizon")
        return EXIT_DIVERGED
    return EXIT_OK


def cmd_verify(args) -> int:
    try:
        problem = load_problem(args.problem)
        realization = load_realization(args.gains)
    except (OSError, ProblemFormatError) as exc:
        _emit_error("parse", str(exc))
        return EXIT_IO

    plant = problem.plant
    if len(realization.nodes) != plant.node_count:
        _emit_error("dimensions", "gains file does not match the problem file")
        return EXIT_IO

    try:
        spectral = spectral_data(problem.graph)
        params = problem.parameters()
        frfs, decomps = [], []
        for i in range(plant.node_count):
            frf = full_rank_factorize(plant.c_block(i), params.rank_tol)
            frfs.append(frf)
            decomps.append(
                observability_decomposition(plant.a, frf.f_factor, params.rank_tol)
            )
    except (GraphStructureError, ValueError) as exc:
        _emit_error("assumptions", str(exc))
        return EXIT_INFEASIBLE

    alpha = realization.alpha
    g_weights = params.g_weights or tuple(1.0 for _ in range(plant.node_count))
    a_norm = np.linalg.norm(plant.a)

    checks = []
    cancel = max(
        verify_cancellation(g, d, f)
        for g, d, f in zip(realization.nodes, decomps, frfs)
    )
    checks.append(("cancellation", cancel <= 1e-9 * max(a_norm, 1e-300),
                   f"residual {cancel:.3e}"))

    candidates = [
        {"p_ie": g.p_ie, "p_iu": np.eye(d.n_dim - d.v_dim),
         "w": g.p_ie @ g.h_inj if g.p_ie.size else np.zeros((0, d.p_dim))}
        for g, d in zip(realization.nodes, decomps)
    ]
    lmi_ok, lmi_eigs = verify_lmi_th1(
        candidates, decomps, realization.gamma, realization.epsilon, alpha, g_weights
    )
    checks.append(("lmi", lmi_ok, f"worst eigenvalue {max(lmi_eigs):.3e}"))

    err_sys = build_error_system(realization, spectral)
    rate = certify_rate(err_sys, alpha)
    checks.append(("rate", rate["pass"],
                   f"abscissa {rate['abscissa']:.6g} vs -alpha {-alpha:.6g}"))

    inv_resid = float(np.linalg.norm(err_sys.t_p.T @ err_sys.full_matrix @ err_sys.t_s))
    checks.append(("invariance", inv_resid <= 1e-9, f"residual {inv_resid:.3e}"))

    rng = np.random.default_rng(args.seed)
    lyap = lyapunov_decrease_check(err_sys, realization, alpha, samples=16, rng=rng)
    checks.append(("lyapunov", lyap < 0, f"max eigenvalue {lyap:.3e}"))

    if args.json:
        print(json.dumps(
            {name: {"pass": bool(ok), "detail": detail} for name, ok, detail in checks},
            indent=1,
        ))
    else:
        for name, ok, detail in checks:
            print(f"{name:<14}{'pass' if ok else 'FAIL':<6}{detail}")
    for name, ok, _ in checks:
        if not ok:
            _emit_error(name, f"certificate '{name}' failed")
            return EXIT_CERTIFICATE
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="distobs",
        description="Reduced-order distributed observer synthesis and certification",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_syn = sub.add_parser("synthesize", help="design an observer from a problem file")
    p_syn.add_argument("input")
    p_syn.add_argument("output")
    p_syn.add_argument("--rank-tol", type=float, default=None)
    p_syn.add_argument("--epsilon-fraction", type=float, default=None)
    p_syn.add_argument("--gamma-safety", type=float, default=None)
    p_syn.add_argument("--seed", type=int, default=0)
    p_syn.add_argument("--json", action="store_true")
    p_syn.set_defaults(func=cmd_synthesize)

    p_sim = sub.add_parser("simulate", help="integrate plant and observers")
    p_sim.add_argument("gains")
    p_sim.add_argument("problem")
    p_sim.add_argument("--tfinal", type=float, default=None)
    p_sim.add_argument("--dt", type=float, default=None)
    p_sim.add_argument("--x0", type=str, default=None)
    p_sim.add_argument("--z0", type=str, default=None)
    p_sim.add_argument("--trace-out", type=str, default=None)
    p_sim.add_argument("--record-stride", type=int, default=1)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--json", action="store_true")
    p_sim.set_defaults(func=cmd_simulate)

    p_ver = sub.add_parser("verify", help="re-check all certificates of a gains file")
    p_ver.add_argument("gains")
    p_ver.add_argument("problem")
    p_ver.add_argument("--seed", type=int, default=0)
    p_ver.add_argument("--json", action="store_true")
    p_ver.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
