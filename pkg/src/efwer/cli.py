"""Command-line interface.

Exit codes: 0 ok, 1 verification mismatch, 2 invalid input, 3 method/graph
mismatch. Node ids on the command line and in files are 1-based.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import graphs
from .core import (
    AdjustedResult,
    CycleError,
    GraphSpec,
    TooLarge,
    ValidationError,
    validate_problem,
)
from .edag import NotILDAG, dag_adjusted, ildag_adjusted
from .efallback import fallback_naive, fallback_reverse, fallback_stack
from .eholm import holm_adjusted, holm_threshold
from .oracle import MAX_ORACLE_N, brute_force_adjusted_e

EXIT_OK, EXIT_MISMATCH, EXIT_INVALID, EXIT_SHAPE = 0, 1, 2, 3

METHODS = ("eholm", "efallback-naive", "efallback-reverse", "efallback-stack", "edag", "ildag", "oracle")
VERIFY_RTOL = 1e-9


class InputError(Exception):
    pass


class ShapeMismatch(Exception):
    pass


def fmt(x: float) -> str:
    return format(float(x), ".17g")


@dataclass
class Problem:
    shape: str | None
    graph: GraphSpec
    e: np.ndarray


def _node_budgets(doc: dict, n: int | None) -> list[float]:
    nodes = doc.get("nodes")
    if nodes is None:
        raise InputError("problem file needs a 'nodes' list")
    ids = [int(node["id"]) for node in nodes]
    if sorted(ids) != list(range(1, len(ids) + 1)):
        raise InputError(f"node ids must be exactly 1..{len(ids)}, got {sorted(ids)}")
    if n is not None and len(ids) != n:
        raise InputError(f"problem has {len(ids)} nodes but {n} e-values were given")
    budgets = [0.0] * len(ids)
    for node in nodes:
        budgets[int(node["id"]) - 1] = float(node["alpha_i"])
    return budgets


def read_evalues(path: str | Path) -> np.ndarray:
    text = Path(path).read_text()
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["id", "e"]:
        raise InputError(f"{path}: expected header 'id,e'")
    pairs = {}
    for row in reader:
        i = int(row["id"])
        if i in pairs:
            raise InputError(f"{path}: duplicate id {i}")
        pairs[i] = float(row["e"])
    if sorted(pairs) != list(range(1, len(pairs) + 1)):
        raise InputError(f"{path}: ids must be exactly 1..{len(pairs)}")
    return np.array([pairs[i] for i in range(1, len(pairs) + 1)])


def parse_problem(doc: dict, e: np.ndarray, alpha: float | None = None) -> Problem:
    """Build a validated problem from a parsed problem document and e-values.

    ``alpha`` overrides the document's level; explicit budgets are rescaled
    proportionally.
    """
    if "alpha" not in doc:
        raise InputError("problem file needs 'alpha'")
    doc_alpha = float(doc["alpha"])
    level = doc_alpha if alpha is None else float(alpha)
    if not 0 < level < 1 or not 0 < doc_alpha < 1:
        raise InputError(f"alpha must lie in (0, 1), got {level}")
    shape = doc.get("shape")
    n = e.size
    if "n" in doc and int(doc["n"]) != n:
        raise InputError(f"problem declares n={doc['n']} but {n} e-values were given")
    scale = level / doc_alpha
    if shape == "holm":
        g = graphs.holm_graph(n, level)
    elif shape == "chain":
        g = graphs.chain_graph([b * scale for b in _node_budgets(doc, n)], level)
    elif shape is None:
        budgets = [b * scale for b in _node_budgets(doc, n)]
        edges = []
        for edge in doc.get("edges", []):
            j, k = int(edge["from"]), int(edge["to"])
            if not (1 <= j <= n and 1 <= k <= n):
                raise InputError(f"edge {j} -> {k} references a node outside 1..{n}")
            edges.append((j - 1, k - 1, float(edge["q"])))
        g = GraphSpec.from_edges(n, edges, budgets, level)
    else:
        raise InputError(f"unknown shape {shape!r}; expected 'holm' or 'chain'")
    prob = validate_problem(e, g)
    return Problem(shape, prob.graph, prob.evalues)


def load_problem(problem_path, evalues_path, alpha=None) -> Problem:
    try:
        doc = json.loads(Path(problem_path).read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{problem_path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise InputError(f"{problem_path}: expected a JSON object")
    return parse_problem(doc, read_evalues(evalues_path), alpha)


def compute(method: str, prob: Problem) -> AdjustedResult:
    g, e = prob.graph, prob.e
    if method == "eholm":
        if prob.shape != "holm":
            raise ShapeMismatch("method eholm expects the complete-uniform graph: use \"shape\": \"holm\"")
        return holm_adjusted(e, g.alpha)
    if method.startswith("efallback-"):
        if prob.shape != "chain":
            raise ShapeMismatch(f"method {method} expects a chain graph: use \"shape\": \"chain\"")
        fn = {"naive": fallback_naive, "reverse": fallback_reverse, "stack": fallback_stack}[method.split("-", 1)[1]]
        return AdjustedResult.from_m(fn(e, g.budgets), g.alpha)
    if method == "edag":
        try:
            return dag_adjusted(e, g)
        except CycleError as exc:
            raise ShapeMismatch(f"method edag expects an acyclic graph ({exc}); try ildag or oracle") from exc
    if method == "ildag":
        try:
            return ildag_adjusted(e, g)
        except NotILDAG as exc:
            raise ShapeMismatch(f"method ildag expects an index-local DAG ({exc}); try oracle") from exc
    if method == "oracle":
        try:
            return brute_force_adjusted_e(e, g)
        except TooLarge as exc:
            raise ShapeMismatch(str(exc)) from exc
    raise InputError(f"unknown method {method!r}")


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_validate(args) -> int:
    prob = load_problem(args.problem, args.evalues, args.alpha)
    g = prob.graph
    doc = {
        "valid": True,
        "n": g.n,
        "alpha": g.alpha,
        "edges": len(g.edges),
        "budget_total": math.fsum(g.budget.budgets),
        "shape": prob.shape or "explicit",
    }
    _emit(json.dumps(doc) + "\n", args.out)
    return EXIT_OK


def cmd_adjust(args) -> int:
    prob = load_problem(args.problem, args.evalues, args.alpha)
    res = compute(args.method, prob)
    lines = ["id,e_star,m"]
    lines += [f"{i + 1},{fmt(a)},{fmt(m)}" for i, (a, m) in enumerate(zip(res.adjusted, res.m))]
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_reject(args) -> int:
    prob = load_problem(args.problem, args.evalues, args.alpha)
    alpha = prob.graph.alpha
    doc: dict = {"method": args.method, "alpha": alpha}
    if args.method == "eholm":
        compute(args.method, prob)  # shape check
        c, threshold = holm_threshold(prob.e, alpha)
        rejected = sorted(int(i) + 1 for i in np.flatnonzero(prob.e >= threshold))
        doc.update(rejected=rejected, C=c, threshold=threshold)
    else:
        res = compute(args.method, prob)
        doc.update(rejected=sorted(i + 1 for i in res.rejected()), threshold=1.0 / alpha)
    _emit(json.dumps(doc, sort_keys=True) + "\n", args.out)
    return EXIT_OK


def _random_graph_for(method: str, rng, n: int, alpha: float):
    if method == "eholm":
        return "holm", graphs.holm_graph(n, alpha)
    if method.startswith("efallback-"):
        q = np.ones(max(n - 1, 0))
        return "chain", graphs.chain_graph(graphs.random_budgets(rng, n, alpha), alpha, q=q)
    if method == "edag":
        return None, graphs.random_dag(rng, n, alpha)
    if method == "ildag":
        if rng.random() < 0.5:
            return None, graphs.random_cyclic_fallback(rng, n, alpha)
        return None, graphs.random_gatekeeper(rng, k=max(1, n // 2), alpha=alpha)
    raise ShapeMismatch(f"verify has no random graph family for method {method!r}")


def rel_error(a, b) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    same = (a == b) | (np.isinf(a) & np.isinf(b) & (np.sign(a) == np.sign(b)))
    scale = np.maximum(np.abs(a), np.abs(b))
    with np.errstate(invalid="ignore", divide="ignore"):
        err = np.where(same, 0.0, np.abs(a - b) / scale)
    return float(np.nan_to_num(err, nan=np.inf).max()) if err.size else 0.0


def cmd_verify(args) -> int:
    rng = np.random.default_rng(args.seed)
    base = load_problem(args.problem, args.evalues, args.alpha) if args.problem else None
    worst, failures, first = 0.0, 0, None
    for trial in range(args.trials):
        if base is not None:
            shape, g = base.shape, base.graph
        else:
            n = int(rng.integers(1, args.max_n + 1))
            shape, g = _random_graph_for(args.method, rng, n, args.alpha or 0.05)
        e = graphs.random_evalues(rng, g.n)
        prob = Problem(shape, g, e)
        got = compute(args.method, prob).adjusted
        want = brute_force_adjusted_e(e, g).adjusted
        err = rel_error(got, want)
        worst = max(worst, err)
        if err > VERIFY_RTOL:
            failures += 1
            if first is None:
                first = {"trial": trial, "e": e.tolist(), "got": got.tolist(), "oracle": want.tolist()}
    report = {"method": args.method, "trials": args.trials, "seed": args.seed, "max_rel_error": worst, "failures": failures}
    if first is not None:
        report["first_failure"] = first
    _emit(json.dumps(report, sort_keys=True) + "\n", args.out)
    return EXIT_MISMATCH if failures else EXIT_OK


def cmd_simulate(args) -> int:
    from . import seqsim

    kw = {"seed": args.seed, "m": args.m, "alpha": args.alpha or 0.05, "max_iter": args.max_iter, "null": args.null}
    if args.mu_alt:
        kw["mu_alts"] = tuple(args.mu_alt)
    if args.experiment == "holm":
        cfg = seqsim.ExperimentConfig(**kw)
        if args.null:
            audit = seqsim.run_holm_fwer_audit(
                args.seed, horizon=args.max_iter, m=args.m, alpha=cfg.alpha, mu_hat=cfg.mu_alts[0]
            )
            rows = [
                {"experiment": "holm-null", "budget": "", "mu_alt": cfg.mu_alts[0], "metric": k, "value": float(audit[k])}
                for k in ("fwer", "bound", "mc_sd")
            ]
        else:
            rows = seqsim.metrics_rows("holm", None, seqsim.run_holm_experiment(cfg))
    else:
        cfg = seqsim.ExperimentConfig(budget=args.budget, **kw)
        rows = seqsim.metrics_rows("dag-null" if args.null else "dag", args.budget, seqsim.run_dag_experiment(cfg))
    _emit(seqsim.metrics_csv(rows), args.out)
    text = seqsim.manifest(cfg, args.experiment) + "\n"
    target = args.manifest or (args.out + ".manifest.json" if args.out else None)
    if target:
        Path(target).write_text(text)
    else:
        sys.stderr.write(text)
    return EXIT_OK


def bench_evalues(pattern: str, n: int, rng) -> np.ndarray:
    if pattern == "random":
        return rng.uniform(0.0, 1.0, size=n)
    if pattern == "increasing":
        return np.arange(1.0, n + 1.0)
    if pattern == "decreasing":
        return np.arange(n, 0.0, -1.0)
    raise InputError(f"unknown pattern {pattern!r}")


def binary_tree(n: int, alpha: float) -> GraphSpec:
    edges = [(j, c, 0.5) for j in range(n) for c in (2 * j + 1, 2 * j + 2) if c < n]
    return GraphSpec.from_edges(n, edges, [alpha / n] * n, alpha)


def cmd_bench(args) -> int:
    rng = np.random.default_rng(args.seed)
    rows = ["target,n,pattern,algorithm,ops,seconds"]
    alpha = args.alpha or 0.05
    for n in args.n:
        e = bench_evalues(args.pattern, n, rng)
        if args.target == "fallback":
            budgets = np.full(n, alpha / n)
            t = time.perf_counter()
            _, steps = fallback_reverse(e, budgets, return_counts=True)
            rows.append(f"fallback,{n},{args.pattern},reverse,{int(steps.sum())},{time.perf_counter() - t:.6f}")
            t = time.perf_counter()
            _, counts = fallback_stack(e, budgets, return_counts=True)
            rows.append(f"fallback,{n},{args.pattern},stack,{counts.pushes + counts.pops},{time.perf_counter() - t:.6f}")
        else:
            g = binary_tree(n, alpha) if args.graph == "tree" else graphs.chain_graph([alpha / n] * n, alpha)
            t = time.perf_counter()
            res = dag_adjusted(e, g)
            rows.append(
                f"edag-{args.graph},{n},{args.pattern},node_visits,{res.stats['node_visits']},{time.perf_counter() - t:.6f}"
            )
    _emit("\n".join(rows) + "\n", args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="efwer", description="FWER control by closed testing with e-values")
    sub = parser.add_subparsers(dest="command", required=True)

    def problem_args(p):
        p.add_argument("problem", help="problem JSON file")
        p.add_argument("evalues", help="CSV of e-values with header 'id,e'")

    def common(p):
        p.add_argument("--alpha", type=float, default=None, help="override the problem's level")
        p.add_argument("--out", default=None, help="write output here instead of stdout")

    p = sub.add_parser("validate", help="check a problem and its e-values")
    problem_args(p)
    common(p)
    p.set_defaults(func=cmd_validate)

    for name, func, helptext in (
        ("adjust", cmd_adjust, "print adjusted e-values as CSV"),
        ("reject", cmd_reject, "print the rejection set as JSON"),
    ):
        p = sub.add_parser(name, help=helptext)
        problem_args(p)
        p.add_argument("--method", choices=METHODS, required=True)
        common(p)
        p.set_defaults(func=func)

    p = sub.add_parser("verify", help="compare a method with the brute-force oracle on random instances")
    p.add_argument("--method", choices=[m for m in METHODS if m != "oracle"], required=True)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--max-n", type=int, default=10)
    p.add_argument("--problem", default=None, help="use this problem's graph instead of random graphs")
    p.add_argument("--evalues", default=None, help="e-value CSV matching --problem (sets n)")
    common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("simulate", help="run a sequential-testing experiment")
    p.add_argument("experiment", choices=("holm", "dag"))
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--mu-alt", type=float, nargs="+", default=None)
    p.add_argument("--m", type=int, default=200)
    p.add_argument("--max-iter", type=int, default=2000)
    p.add_argument("--budget", choices=("primary", "equal"), default="primary")
    p.add_argument("--null", action="store_true", help="run under the null (FWER audit)")
    p.add_argument("--manifest", default=None, help="path for the JSON run manifest")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bench", help="operation counts and wall time")
    p.add_argument("target", choices=("fallback", "edag"))
    p.add_argument("--n", type=int, nargs="+", required=True)
    p.add_argument("--pattern", choices=("random", "increasing", "decreasing"), default="random")
    p.add_argument("--graph", choices=("tree", "chain"), default="tree")
    p.add_argument("--seed", type=int, default=0)
    common(p)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "verify" and args.problem and not args.evalues:
        print("error: --problem needs --evalues", file=sys.stderr)
        return EXIT_INVALID
    try:
        return args.func(args)
    except ShapeMismatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SHAPE
    except (InputError, ValidationError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
