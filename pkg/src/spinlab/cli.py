"""``spinlab`` command line.

Exit codes: 0 success (or Dominated), 2 invalid input, 3 Violated, 4 Inconclusive.
Defaults may come from a ``key=value`` file given by ``--config``; explicit
flags win.  ``SPINLAB_THREADS`` is used when ``--threads`` is absent.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys

import numpy as np

from . import analyzer, exact, gff, mc, sphere
from .errors import InvalidParameter, SpinLabError, WrongN
from .graphs import (
    greens_function,
    greens_rw_oracle,
    load_graph,
    parallel_paths,
    perfect_binary_tree,
    renormalized_green,
    star,
)

EXIT_OK, EXIT_USAGE, EXIT_VIOLATED, EXIT_INCONCLUSIVE = 0, 2, 3, 4
_VERDICT_EXIT = {
    analyzer.DOMINATED: EXIT_OK,
    analyzer.VIOLATED: EXIT_VIOLATED,
    analyzer.INCONCLUSIVE: EXIT_INCONCLUSIVE,
}


class UsageError(SpinLabError):
    pass


def read_config(path: str) -> dict[str, str]:
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    return max(1, int(os.environ.get("SPINLAB_THREADS", "1")))


def _need_seed(args) -> int:
    if args.seed is None:
        raise UsageError("--seed is required for stochastic computations")
    return args.seed


def _chain_config(args, beta: float) -> mc.ChainConfig:
    return mc.ChainConfig(
        sweeps=args.sweeps,
        burn_in=args.burn_in,
        thin=args.thin,
        proposal_width=args.width,
        root_pinned=args.pinned,
        seed=_need_seed(args),
        tune=not args.no_tune,
    )


def _emit(args, payload: dict, rows: list[dict] | None = None) -> None:
    if args.format == "csv" and rows is not None:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(rows[0].keys()), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
        sys.stdout.write(buf.getvalue())
    elif args.format == "csv":
        w = csv.writer(sys.stdout, lineterminator="\n")
        flat = {k: v for k, v in payload.items() if not isinstance(v, (list, dict))}
        w.writerow(flat.keys())
        w.writerow([repr(v) if isinstance(v, float) else v for v in flat.values()])
    else:
        payload = {"schema_version": analyzer.SCHEMA_VERSION, **payload}
        sys.stdout.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def paths_depth_below(beta: float, epsilon: float) -> int:
    """Smallest ``l`` with correlation ``< 1 - epsilon`` on ``parallel_paths(l, l)``."""
    def low(l):
        return exact.parallel_paths_correlation_closed_form(beta, l, l) < 1.0 - epsilon

    hi = 1
    while not low(hi):
        hi *= 2
        if hi > 1 << 62:
            raise InvalidParameter("beta too large for the parallel-paths search")
    lo = hi // 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        lo, hi = (lo, mid) if low(mid) else (mid, hi)
    return hi


# -- subcommands ----------------------------------------------------------------


def cmd_graph(args) -> int:
    g = load_graph(args.graph)
    text = g.to_edge_list()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_greens(args) -> int:
    g = load_graph(args.graph)
    if args.i == args.j:
        raise UsageError("source and sink must differ")
    table = greens_function(g, args.i, args.j)
    payload = {
        "graph_spec": args.graph,
        "source": args.i,
        "sink": args.j,
        "u": [float(x) for x in table.values],
        "u_source": table.at_source,
        "renormalized": table.at_source / g.degree(args.i),
    }
    if args.oracle:
        est = greens_rw_oracle(g, args.i, args.j, args.i, args.trials, _need_seed(args))
        payload["oracle"] = {"mean": est.mean, "stderr": est.stderr, "trials": est.n_samples}
        payload["seed"] = args.seed
    rows = [{"vertex": s, "u": float(table.values[s - 1])} for s in range(1, g.n + 1)]
    _emit(args, payload, rows)
    return EXIT_OK


def cmd_exact(args) -> int:
    g = load_graph(args.graph)
    C = exact.exact_correlation_matrix(g, args.beta)
    payload = {
        "graph_spec": args.graph,
        "beta": args.beta,
        "log_partition_unit": exact.exact_log_partition(g, args.beta),
        "correlations": C.tolist(),
        "k_matrix": exact.exact_k_matrix(g, args.beta).tolist(),
    }
    rows = [{"x": x, "y": y, "correlation": float(C[x - 1, y - 1])}
            for x in range(1, g.n + 1) for y in range(x + 1, g.n + 1)]
    _emit(args, payload, rows)
    return EXIT_OK


def cmd_mc(args) -> int:
    g = load_graph(args.graph)
    cfg = _chain_config(args, args.beta)
    chains = mc.run_replicas(g, args.N, args.beta, cfg, args.replicas, _threads(args))
    pairs = [(args.x, args.y)] if args.x and args.y else [
        (x, y) for x in range(1, g.n + 1) for y in range(x + 1, g.n + 1)]
    rows = []
    for x, y in pairs:
        est = mc.estimate_correlation(chains, x, y)
        dist = mc.estimate_rescaled_distance(chains, args.beta, x, y)
        rows.append({"x": x, "y": y, "correlation": est.mean, "stderr": est.stderr,
                     "rescaled_distance": dist.mean, "rescaled_distance_stderr": dist.stderr})
    payload = {
        "graph_spec": args.graph, "N": args.N, "beta": args.beta, "seed": args.seed,
        "replicas": args.replicas, "samples": sum(len(c) for c in chains),
        "acceptance": [c.acceptance for c in chains], "estimates": rows,
    }
    if args.save:
        mc.save_samples(chains[0], args.save)
    _emit(args, payload, rows)
    return EXIT_OK


def cmd_gd_check(args) -> int:
    g = load_graph(args.graph)
    if args.method == "exact":
        if args.N != 1:
            raise WrongN("exact method requires --N 1")
        report = analyzer.gd_verdict(analyzer.exact_hessian(g, args.beta), graph_spec=args.graph)
        chains = None
    else:
        cfg = _chain_config(args, args.beta)
        chains = mc.run_replicas(g, args.N, args.beta, cfg, args.replicas, _threads(args))
        report = analyzer.gd_verdict(analyzer.mc_hessian(chains, args.beta), graph_spec=args.graph,
                                     N=args.N, seed=args.seed)
    payload = report.to_json()
    if args.audit:
        rows = analyzer.audit_gde(g, args.beta, args.N, report,
                                  "exact" if args.method == "exact" else "chain", chains)
        payload["audit"] = [r.__dict__ for r in rows]
        payload["audit_failures"] = sum(1 for r in rows if r.passed is False)
    _emit(args, payload)
    return _VERDICT_EXIT[report.verdict]


def cmd_counterexample(args) -> int:
    beta = args.beta
    if args.which == "star":
        P, C, Q = sphere.star_integrals(beta, args.N, args.nodes)
        n0 = exact.minimal_star_size(beta, args.N, args.nodes)
        payload = {
            "which": "star", "beta": beta, "N": args.N, "minimal_n0": n0,
            "hessian_at_n0": exact.star_hessian(beta, args.N, n0, args.nodes),
            "hessian_below": exact.star_hessian(beta, args.N, n0 - 1, args.nodes) if n0 > 2 else None,
            "P": P, "C": C, "Q": Q,
        }
        if args.N == 1 and n0 + 1 <= exact.MAX_ENUM_VERTICES:
            g = star(n0)
            v = np.zeros(g.n)
            v[0] = 1.0
            payload["enumeration_second_derivative"] = float(
                exact.directional_second_derivative(g, beta, v))
    elif args.which == "tree":
        k = args.k
        threshold = exact.binary_tree_threshold()
        payload = {
            "which": "tree", "beta": beta, "k": k,
            "hessian": exact.binary_tree_hessian_closed_form(beta, k),
            "threshold_beta0": threshold,
            "ratio_2r2": 2.0 * math.tanh(beta) ** 2,
            "diverges_with_depth": beta > threshold,
        }
        if 2**k - 1 <= exact.MAX_ENUM_VERTICES:
            g = perfect_binary_tree(k)
            v = np.zeros(g.n)
            v[2 ** (k - 1) - 1:] = 1.0
            payload["enumeration_second_derivative"] = float(
                exact.directional_second_derivative(g, beta, v))
    else:
        l, d = args.l, args.d
        g = parallel_paths(l, d)
        corr = exact.parallel_paths_correlation_closed_form(beta, l, d)
        ren = renormalized_green(g, 1, g.n)
        bound = analyzer.gde_lower_bound(g, beta, 1, 1, g.n)
        payload = {
            "which": "paths", "beta": beta, "l": l, "d": d,
            "correlation": corr, "renormalized_green": ren, "green_bound_M": 3.0,
            "epsilon": 0.5, "gde_bound": bound, "bound_violated": corr < bound,
            "depth_below_epsilon": paths_depth_below(beta, 0.5),
        }
    _emit(args, payload)
    return EXIT_OK


def cmd_gff_compare(args) -> int:
    g = load_graph(args.graph)
    seed = _need_seed(args)
    betas = [float(b) for b in args.betas.split(",")]
    rows = gff.wcon_report(g, args.N, betas, args.x, args.y, seed=seed, root=args.root)
    if args.format == "json":
        _emit(args, {"graph_spec": args.graph, "N": args.N, "seed": seed,
                     "rows": [{f: getattr(r, f) for f in gff.CSV_FIELDS} for r in rows]})
    else:
        sys.stdout.write(gff.rows_to_csv(rows))
    return EXIT_OK


# -- parser --------------------------------------------------------------------


def _add_mc_options(p) -> None:
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--sweeps", type=int, default=20_000)
    p.add_argument("--burn-in", type=int, default=2_000)
    p.add_argument("--thin", type=int, default=1)
    p.add_argument("--width", type=float, default=None, help="proposal width (default 1/sqrt(1+beta))")
    p.add_argument("--pinned", action="store_true", help="pin vertex 1 to the north pole")
    p.add_argument("--no-tune", action="store_true", help="keep the proposal width fixed in burn-in")
    p.add_argument("--replicas", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spinlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("graph", help="print or save a graph as an edge list")
    p.add_argument("graph")
    p.add_argument("--out")
    p.set_defaults(func=cmd_graph)

    p = sub.add_parser("greens", help="Green's function of the absorbed walk")
    p.add_argument("graph")
    p.add_argument("i", type=int)
    p.add_argument("j", type=int)
    p.add_argument("--oracle", action="store_true", help="cross-check by random walks")
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_greens)

    p = sub.add_parser("exact", help="Ising enumeration (n <= 24)")
    p.add_argument("graph")
    p.add_argument("--beta", type=float, required=True)
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("mc", help="Monte Carlo correlation estimates")
    p.add_argument("graph")
    p.add_argument("--N", type=int, default=1)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--x", type=int)
    p.add_argument("--y", type=int)
    p.add_argument("--save", help="write recorded samples of replica 0 to this file")
    _add_mc_options(p)
    p.set_defaults(func=cmd_mc)

    p = sub.add_parser("gd-check", help="Gaussian domination verdict")
    p.add_argument("graph")
    p.add_argument("--N", type=int, default=1)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--method", choices=["exact", "mc"], default="exact")
    p.add_argument("--audit", action="store_true", help="check the correlation lower bound on all pairs")
    _add_mc_options(p)
    p.set_defaults(func=cmd_gd_check)

    p = sub.add_parser("counterexample", help="star / tree / paths constructions")
    p.add_argument("which", choices=["star", "tree", "paths"])
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--N", type=int, default=1)
    p.add_argument("--k", type=int, default=6)
    p.add_argument("--l", type=int, default=8)
    p.add_argument("--d", type=int, default=8)
    p.add_argument("--nodes", type=int, default=sphere.DEFAULT_NODES)
    p.set_defaults(func=cmd_counterexample)

    p = sub.add_parser("gff-compare", help="low-temperature free-field comparison")
    p.add_argument("graph")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--betas", default="10,50,200")
    p.add_argument("--x", type=int, required=True)
    p.add_argument("--y", type=int, required=True)
    p.add_argument("--root", type=int, default=1)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_gff_compare)

    for name, sp in sub.choices.items():
        sp.add_argument("--config", help="key=value defaults file")
        sp.add_argument("--format", choices=["json", "csv"],
                        default="csv" if name == "gff-compare" else "json")
        sp.add_argument("--threads", type=int, default=None)
    return parser


def _parse(parser: argparse.ArgumentParser, argv):
    argv = list(sys.argv[1:] if argv is None else argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("command", nargs="?")
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    subparsers = parser._subparsers._group_actions[0].choices
    if known.config and known.command in subparsers:
        defaults = read_config(known.config)
        sp = subparsers[known.command]
        actions = {a.dest: a for a in sp._actions}
        unknown = set(defaults) - set(actions)
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        for key, value in defaults.items():
            action = actions[key]
            action.required = False  # a config value satisfies a required flag
            if action.nargs == 0:
                defaults[key] = value.lower() in ("1", "true", "yes", "on")
        sp.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _parse(parser, argv)
        return args.func(args)
    except SystemExit as exc:  # argparse usage errors
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except (SpinLabError, InvalidParameter, OSError) as exc:
        print(f"spinlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
