"""Command-line interface for simulation, learning, factorization,
clustering, imputation and evaluation.

Every run is a pure function of (config, input files, seed): outputs are
byte-identical across repeats.  Flags mirror the keys of an optional JSON
config file (``--config``); explicitly passed flags win over the file,
which wins over defaults.  The resolved configuration is echoed into the
JSON report next to the results.  Exit codes: 0 success, 2 solver
non-convergence, 3 input or format error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import io
from .clustering import (
    ClusterLabels,
    connected_components,
    kmeans,
    product_labels,
    smallest_eigpairs,
)
from .factorization import factorize, factorize_rank_constrained
from .imputation import ImputeConfig, impute_fixed_graphs, joint_impute_learn, knn_graph
from .laplacian import LaplacianError, MultiDomainData, kron_sum
from .learning import (
    LearnConfig,
    RankLearnConfig,
    SolverFailure,
    learn_product_graph,
    learn_rank_constrained,
    learn_single_graph,
)
from .metrics import edges_of, f_score, imputation_error, nmi
from .qp import SolverConfig
from .synth import (
    CommunityGraphSpec,
    MaskedData,
    apply_mask,
    generate_smooth_signals,
    planted_labels,
    random_community_graph,
)

EXIT_OK = 0
EXIT_NOT_CONVERGED = 2
EXIT_INPUT_ERROR = 3

OUT_ENV_VAR = "PRODGRAPH_OUT"


def _solver_config(cfg: dict) -> SolverConfig:
    return SolverConfig(
        rho=cfg.get("rho"),
        tol=cfg.get("tol", 1e-6),
        max_iter=int(cfg.get("max_iter", 100_000)),
    )


def _resolve(args: argparse.Namespace, defaults: dict) -> dict:
    """defaults < JSON config < explicitly passed flags."""
    provided = {
        k: v for k, v in vars(args).items()
        if k not in ("func", "config", "subcommand")
    }
    cfg = dict(defaults)
    config_path = getattr(args, "config", None)
    if config_path:
        with open(config_path) as fh:
            from_file = json.load(fh)
        unknown = set(from_file) - set(defaults)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(from_file)
    cfg.update(provided)
    return cfg


def _out_dir(cfg: dict) -> Path:
    out = Path(cfg.get("out") or os.environ.get(OUT_ENV_VAR, "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _config_echo(cfg: dict, defaults: dict) -> dict:
    # the output directory is where the report lives, not semantic config
    return {k: cfg[k] for k in defaults if k != "out"}


def _labels_to_list(labels) -> list[int]:
    return [int(v) for v in labels.labels]


SIMULATE_DEFAULTS = {
    "P": 10, "Q": 15, "T": 1000, "KP": 1, "KQ": 1, "sigma2": 0.0,
    "p_in": 0.7, "p_out": 0.05, "weight_lo": 0.1, "weight_hi": 1.0,
    "seed": 0, "out": None,
}


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _resolve(args, SIMULATE_DEFAULTS)
    out = _out_dir(cfg)
    spec_p = CommunityGraphSpec(
        n=cfg["P"], k=cfg["KP"], p_in=cfg["p_in"],
        p_out=0.0 if cfg["KP"] > 1 else cfg["p_out"],
        weight_lo=cfg["weight_lo"], weight_hi=cfg["weight_hi"], seed=cfg["seed"],
    )
    spec_q = CommunityGraphSpec(
        n=cfg["Q"], k=cfg["KQ"], p_in=cfg["p_in"],
        p_out=0.0 if cfg["KQ"] > 1 else cfg["p_out"],
        weight_lo=cfg["weight_lo"], weight_hi=cfg["weight_hi"], seed=cfg["seed"] + 1,
    )
    L_P = random_community_graph(spec_p)
    L_Q = random_community_graph(spec_q)
    data = generate_smooth_signals(L_P, L_Q, cfg["T"], sigma2=cfg["sigma2"],
                                   seed=cfg["seed"] + 2)
    labels_p = ClusterLabels(labels=planted_labels(cfg["P"], cfg["KP"]), k=cfg["KP"])
    labels_q = ClusterLabels(labels=planted_labels(cfg["Q"], cfg["KQ"]), k=cfg["KQ"])
    io.write_laplacian(out / "factor_P.tsv", L_P)
    io.write_laplacian(out / "factor_Q.tsv", L_Q)
    io.write_laplacian(out / "product.tsv", kron_sum(L_P, L_Q))
    io.write_data_csv(out / "data.csv", data)
    io.write_labels_csv(out / "labels_P.csv", labels_p)
    io.write_labels_csv(out / "labels_Q.csv", labels_q)
    io.write_labels_csv(out / "labels_product.csv",
                        product_labels(labels_p, labels_q, cfg["P"], cfg["Q"]))
    io.write_report(out / "report.json", {
        "command": "simulate",
        "config": _config_echo(cfg, SIMULATE_DEFAULTS),
        "results": {
            "trace_P": L_P.trace(),
            "trace_Q": L_Q.trace(),
            "edges_P": len(edges_of(L_P).pairs),
            "edges_Q": len(edges_of(L_Q).pairs),
        },
    })
    return EXIT_OK


LEARN_DEFAULTS = {
    "mode": "pgl", "data": None, "beta1": 0.2, "beta2": 0.3, "beta": 1.5,
    "rho": None, "tol": 1e-6, "max_iter": 100_000,
    "KP": 1, "KQ": 1, "gamma1": 0.5, "gamma2": 0.7,
    "max_outer": 100, "outer_tol": 1e-6, "out": None,
}


def cmd_learn(args: argparse.Namespace) -> int:
    cfg = _resolve(args, LEARN_DEFAULTS)
    if not cfg["data"]:
        raise ValueError("learn requires --data")
    out = _out_dir(cfg)
    data = io.read_data_csv(cfg["data"])
    solver = _solver_config(cfg)
    report: dict = {"command": "learn", "config": _config_echo(cfg, LEARN_DEFAULTS)}
    exit_code = EXIT_OK

    if cfg["mode"] == "pgl":
        result = learn_product_graph(data, LearnConfig(
            beta1=cfg["beta1"], beta2=cfg["beta2"], solver=solver))
        io.write_laplacian(out / "factor_P.tsv", result.L_P)
        io.write_laplacian(out / "factor_Q.tsv", result.L_Q)
        report["results"] = {
            "converged": result.converged,
            "iterations_P": result.sol_P.iterations,
            "iterations_Q": result.sol_Q.iterations,
            "feas_residual_P": result.sol_P.feas_residual,
            "feas_residual_Q": result.sol_Q.feas_residual,
            "trace_P": result.L_P.trace(),
            "trace_Q": result.L_Q.trace(),
        }
        exit_code = EXIT_OK if result.converged else EXIT_NOT_CONVERGED
    elif cfg["mode"] == "rpgl":
        result = learn_rank_constrained(data, RankLearnConfig(
            k_p=cfg["KP"], k_q=cfg["KQ"], beta1=cfg["beta1"], beta2=cfg["beta2"],
            gamma1=cfg["gamma1"], gamma2=cfg["gamma2"], solver=solver,
            max_outer=cfg["max_outer"], outer_tol=cfg["outer_tol"]))
        io.write_laplacian(out / "factor_P.tsv", result.L_P)
        io.write_laplacian(out / "factor_Q.tsv", result.L_Q)
        io.write_matrix_csv(out / "embedding_P.csv", result.embeddings.V_P)
        io.write_matrix_csv(out / "embedding_Q.csv", result.embeddings.V_Q)
        report["results"] = {
            "converged": result.converged,
            "outer_iterations": result.outer_iterations,
            "components_P": connected_components(result.L_P)[0],
            "components_Q": connected_components(result.L_Q)[0],
        }
        report["traces"] = {
            "error": list(result.error_trace),
            "objective": list(result.objective_trace),
        }
        exit_code = EXIT_OK if result.converged else EXIT_NOT_CONVERGED
    elif cfg["mode"] == "gl":
        x = data.vecs()
        L_N, sol = learn_single_graph(x @ x.T / data.T, beta=cfg["beta"], solver=solver)
        io.write_laplacian(out / "product.tsv", L_N)
        report["results"] = {
            "converged": sol.converged,
            "iterations": sol.iterations,
            "feas_residual": sol.feas_residual,
            "trace": L_N.trace(),
        }
        exit_code = EXIT_OK if sol.converged else EXIT_NOT_CONVERGED
    else:
        raise ValueError(f"unknown learn mode {cfg['mode']!r}")

    io.write_report(out / "report.json", report)
    return exit_code


FACTORIZE_DEFAULTS = {
    "mode": "kron", "laplacian": None, "P": None, "Q": None,
    "rho": None, "tol": 1e-6, "max_iter": 100_000,
    "KP": 1, "KQ": 1, "gamma1": 0.5, "gamma2": 0.7,
    "max_outer": 100, "outer_tol": 1e-6, "out": None,
}


def cmd_factorize(args: argparse.Namespace) -> int:
    cfg = _resolve(args, FACTORIZE_DEFAULTS)
    if not cfg["laplacian"] or cfg["P"] is None or cfg["Q"] is None:
        raise ValueError("factorize requires --laplacian, --P and --Q")
    out = _out_dir(cfg)
    L_N = io.read_laplacian(cfg["laplacian"], validate=False)
    P, Q = int(cfg["P"]), int(cfg["Q"])
    if P * Q != L_N.n:
        raise ValueError(f"P*Q = {P * Q} does not match matrix size {L_N.n}")
    solver = _solver_config(cfg)
    report: dict = {"command": "factorize", "config": _config_echo(cfg, FACTORIZE_DEFAULTS)}

    if cfg["mode"] == "kron":
        result = factorize(L_N.dense, P, Q, solver)
        report["results"] = {
            "converged": result.converged,
            "iterations_P": result.sol_P.iterations,
            "iterations_Q": result.sol_Q.iterations,
        }
    elif cfg["mode"] == "rkron":
        result = factorize_rank_constrained(
            L_N.dense, P, Q, k_p=cfg["KP"], k_q=cfg["KQ"],
            gamma1=cfg["gamma1"], gamma2=cfg["gamma2"], solver=solver,
            max_outer=cfg["max_outer"], outer_tol=cfg["outer_tol"])
        io.write_matrix_csv(out / "embedding_P.csv", result.embeddings.V_P)
        io.write_matrix_csv(out / "embedding_Q.csv", result.embeddings.V_Q)
        report["results"] = {
            "converged": result.converged,
            "outer_iterations": result.outer_iterations,
            "components_P": connected_components(result.L_P)[0],
            "components_Q": connected_components(result.L_Q)[0],
        }
        report["traces"] = {
            "error": list(result.error_trace),
            "objective": list(result.objective_trace),
        }
    else:
        raise ValueError(f"unknown factorize mode {cfg['mode']!r}")

    io.write_laplacian(out / "factor_P.tsv", result.L_P)
    io.write_laplacian(out / "factor_Q.tsv", result.L_Q)
    io.write_report(out / "report.json", report)
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


CLUSTER_DEFAULTS = {
    "factor_p": None, "factor_q": None, "KP": 2, "KQ": 2,
    "restarts": 10, "seed": 0, "out": None,
}


def cmd_cluster(args: argparse.Namespace) -> int:
    cfg = _resolve(args, CLUSTER_DEFAULTS)
    if not cfg["factor_p"] or not cfg["factor_q"]:
        raise ValueError("cluster requires --factor-p and --factor-q")
    out = _out_dir(cfg)
    L_P = io.read_laplacian(cfg["factor_p"])
    L_Q = io.read_laplacian(cfg["factor_q"])
    _, V_P = smallest_eigpairs(L_P, cfg["KP"])
    _, V_Q = smallest_eigpairs(L_Q, cfg["KQ"])
    labels_p = kmeans(V_P, cfg["KP"], seed=cfg["seed"], restarts=cfg["restarts"])
    labels_q = kmeans(V_Q, cfg["KQ"], seed=cfg["seed"] + 1, restarts=cfg["restarts"])
    prod = product_labels(labels_p, labels_q, L_P.n, L_Q.n)
    io.write_matrix_csv(out / "embedding_P.csv", V_P)
    io.write_matrix_csv(out / "embedding_Q.csv", V_Q)
    io.write_labels_csv(out / "labels_P.csv", labels_p)
    io.write_labels_csv(out / "labels_Q.csv", labels_q)
    io.write_labels_csv(out / "labels_product.csv", prod)
    io.write_report(out / "report.json", {
        "command": "cluster",
        "config": _config_echo(cfg, CLUSTER_DEFAULTS),
        "results": {
            "components_P": connected_components(L_P)[0],
            "components_Q": connected_components(L_Q)[0],
            "product_clusters": prod.k,
        },
    })
    return EXIT_OK


IMPUTE_DEFAULTS = {
    "data": None, "train_mask": None, "test_mask": None,
    "alpha1": 5.1e-4, "alpha2": 1e-4, "alpha3": 1e-6,
    "beta1": 5.0, "beta2": 2.0, "rho": None, "tol": 1e-6, "max_iter": 100_000,
    "outer_tol": 1e-3, "max_outer": 50, "baseline_knn": 0, "out": None,
}


def cmd_impute(args: argparse.Namespace) -> int:
    cfg = _resolve(args, IMPUTE_DEFAULTS)
    if not cfg["data"] or not cfg["train_mask"] or not cfg["test_mask"]:
        raise ValueError("impute requires --data, --train-mask and --test-mask")
    out = _out_dir(cfg)
    data = io.read_data_csv(cfg["data"])
    train = io.read_mask_csv(cfg["train_mask"])
    test = io.read_mask_csv(cfg["test_mask"])
    masked = MaskedData(
        observed=MultiDomainData(snapshots=np.where(train, data.snapshots, 0.0)),
        train_mask=train, test_mask=test,
    )
    icfg = ImputeConfig(
        alpha1=cfg["alpha1"], alpha2=cfg["alpha2"], alpha3=cfg["alpha3"],
        pgl=LearnConfig(beta1=cfg["beta1"], beta2=cfg["beta2"],
                        solver=_solver_config(cfg)),
        outer_tol=cfg["outer_tol"], max_outer=cfg["max_outer"],
    )
    result = joint_impute_learn(masked, icfg)
    io.write_data_csv(out / "imputed.csv", result.imputed)
    io.write_laplacian(out / "factor_P.tsv", result.L_P)
    io.write_laplacian(out / "factor_Q.tsv", result.L_Q)
    results = {
        "converged": result.converged,
        "outer_iterations": result.outer_iterations,
        "train_error": imputation_error(data, result.imputed, train),
        "test_error": imputation_error(data, result.imputed, test),
    }
    if cfg["baseline_knn"]:
        k = int(cfg["baseline_knn"])
        zero_filled = masked.observed.snapshots
        feats_p = zero_filled.transpose(1, 0, 2).reshape(data.P, -1)
        feats_q = zero_filled.transpose(2, 0, 1).reshape(data.Q, -1)
        base = impute_fixed_graphs(masked, knn_graph(feats_p, k), knn_graph(feats_q, k), icfg)
        results["baseline_knn_test_error"] = imputation_error(data, base, test)
    io.write_report(out / "report.json", {
        "command": "impute",
        "config": _config_echo(cfg, IMPUTE_DEFAULTS),
        "results": results,
        "traces": {
            "error": list(result.error_trace),
            "objective": list(result.objective_trace),
        },
    })
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


EVAL_DEFAULTS = {
    "truth": None, "est": None, "truth_labels": None, "est_labels": None,
    "edge_tol": 1e-4, "out": None,
}


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = _resolve(args, EVAL_DEFAULTS)
    out = _out_dir(cfg)
    results: dict = {}
    if cfg["truth"] and cfg["est"]:
        truth = io.read_laplacian(cfg["truth"], validate=False)
        est = io.read_laplacian(cfg["est"], validate=False)
        results["f_score"] = f_score(
            edges_of(truth, cfg["edge_tol"]), edges_of(est, cfg["edge_tol"])
        )
    if cfg["truth_labels"] and cfg["est_labels"]:
        results["nmi"] = nmi(
            io.read_labels_csv(cfg["truth_labels"]),
            io.read_labels_csv(cfg["est_labels"]),
        )
    if not results:
        raise ValueError("eval requires --truth/--est or --truth-labels/--est-labels")
    report = {"command": "eval", "config": _config_echo(cfg, EVAL_DEFAULTS),
              "results": results}
    io.write_report(out / "report.json", report)
    print(json.dumps(io.round_floats(results), sort_keys=True))
    return EXIT_OK


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="JSON config file; flags override its keys")
    sub.add_argument("--out", default=argparse.SUPPRESS,
                     help=f"output directory (default: ${OUT_ENV_VAR} or '.')")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="prodgraph",
        description="Learn, factorize, cluster and impute over Cartesian product graphs.",
    )
    subs = parser.add_subparsers(dest="subcommand", required=True)
    S = argparse.SUPPRESS

    p = subs.add_parser("simulate", help="generate planted factors and smooth signals")
    p.add_argument("--P", type=int, default=S)
    p.add_argument("--Q", type=int, default=S)
    p.add_argument("--T", type=int, default=S)
    p.add_argument("--KP", type=int, default=S, help="components of the P factor")
    p.add_argument("--KQ", type=int, default=S, help="components of the Q factor")
    p.add_argument("--sigma2", type=float, default=S, help="observation noise variance")
    p.add_argument("--p-in", dest="p_in", type=float, default=S)
    p.add_argument("--p-out", dest="p_out", type=float, default=S)
    p.add_argument("--weight-lo", dest="weight_lo", type=float, default=S)
    p.add_argument("--weight-hi", dest="weight_hi", type=float, default=S)
    p.add_argument("--seed", type=int, default=S)
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = subs.add_parser("learn", help="learn factor graphs from data")
    p.add_argument("--mode", choices=["pgl", "rpgl", "gl"], default=S)
    p.add_argument("--data", default=S)
    p.add_argument("--beta1", type=float, default=S)
    p.add_argument("--beta2", type=float, default=S)
    p.add_argument("--beta", type=float, default=S, help="penalty for gl mode")
    p.add_argument("--rho", type=float, default=S, help="dual step size (default: auto)")
    p.add_argument("--tol", type=float, default=S)
    p.add_argument("--max-iter", dest="max_iter", type=int, default=S)
    p.add_argument("--KP", type=int, default=S)
    p.add_argument("--KQ", type=int, default=S)
    p.add_argument("--gamma1", type=float, default=S)
    p.add_argument("--gamma2", type=float, default=S)
    p.add_argument("--max-outer", dest="max_outer", type=int, default=S)
    p.add_argument("--outer-tol", dest="outer_tol", type=float, default=S)
    _add_common(p)
    p.set_defaults(func=cmd_learn)

    p = subs.add_parser("factorize", help="nearest Kronecker sum factors of a graph")
    p.add_argument("--mode", choices=["kron", "rkron"], default=S)
    p.add_argument("--laplacian", default=S)
    p.add_argument("--P", type=int, default=S)
    p.add_argument("--Q", type=int, default=S)
    p.add_argument("--rho", type=float, default=S)
    p.add_argument("--tol", type=float, default=S)
    p.add_argument("--max-iter", dest="max_iter", type=int, default=S)
    p.add_argument("--KP", type=int, default=S)
    p.add_argument("--KQ", type=int, default=S)
    p.add_argument("--gamma1", type=float, default=S)
    p.add_argument("--gamma2", type=float, default=S)
    p.add_argument("--max-outer", dest="max_outer", type=int, default=S)
    p.add_argument("--outer-tol", dest="outer_tol", type=float, default=S)
    _add_common(p)
    p.set_defaults(func=cmd_factorize)

    p = subs.add_parser("cluster", help="spectral clustering of factor graphs")
    p.add_argument("--factor-p", dest="factor_p", default=S)
    p.add_argument("--factor-q", dest="factor_q", default=S)
    p.add_argument("--KP", type=int, default=S)
    p.add_argument("--KQ", type=int, default=S)
    p.add_argument("--restarts", type=int, default=S)
    p.add_argument("--seed", type=int, default=S)
    _add_common(p)
    p.set_defaults(func=cmd_cluster)

    p = subs.add_parser("impute", help="joint imputation and graph learning")
    p.add_argument("--data", default=S)
    p.add_argument("--train-mask", dest="train_mask", default=S)
    p.add_argument("--test-mask", dest="test_mask", default=S)
    p.add_argument("--alpha1", type=float, default=S)
    p.add_argument("--alpha2", type=float, default=S)
    p.add_argument("--alpha3", type=float, default=S)
    p.add_argument("--beta1", type=float, default=S)
    p.add_argument("--beta2", type=float, default=S)
    p.add_argument("--rho", type=float, default=S)
    p.add_argument("--tol", type=float, default=S)
    p.add_argument("--max-iter", dest="max_iter", type=int, default=S)
    p.add_argument("--outer-tol", dest="outer_tol", type=float, default=S)
    p.add_argument("--max-outer", dest="max_outer", type=int, default=S)
    p.add_argument("--baseline-knn", dest="baseline_knn", type=int, default=S,
                   help="also impute with fixed k-NN graphs of this k")
    _add_common(p)
    p.set_defaults(func=cmd_impute)

    p = subs.add_parser("eval", help="compare graphs (F-score) or labels (NMI)")
    p.add_argument("--truth", default=S)
    p.add_argument("--est", default=S)
    p.add_argument("--truth-labels", dest="truth_labels", default=S)
    p.add_argument("--est-labels", dest="est_labels", default=S)
    p.add_argument("--edge-tol", dest="edge_tol", type=float, default=S)
    _add_common(p)
    p.set_defaults(func=cmd_eval)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    start = time.perf_counter()
    try:
        code = args.func(args)
    except SolverFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except (ValueError, LaplacianError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    print(f"{args.subcommand}: done in {time.perf_counter() - start:.2f}s", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
