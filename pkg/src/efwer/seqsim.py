"""Sequential-testing simulations comparing e- and p-graphical procedures.

Test martingales are Gaussian SPRT likelihood ratios
``S_t = prod_s exp(mu_hat_s * Y_s - mu_hat_s**2 / 2)`` kept in log space.
Each procedure stops at the first time it rejects (any hypothesis for Holm,
the designated interaction for the factorial design); e-procedures use
``S_t``, the "ep" procedures use ``1/S_t`` and the "p" procedures use the
always-valid ``1/max_{s<=t} S_s``.
"""

from __future__ import annotations

import csv
import io
import json
import math
import platform
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .core import GraphSpec
from .edag import TargetEvaluator
from .eholm import holm_reject_any
from .graphs import FACTORIAL_NODES, factorial_graph
from .pgraph import sequential_rejection

GENERATOR = "numpy PCG64 seeded by SeedSequence(seed, spawn_key=stream key)"
GAUSSIAN = "numpy Generator.standard_normal (ziggurat)"
BLOCK = 64


class IncompleteBlock(ValueError):
    pass


def sprt_update(s: float, y: float, mu_hat: float) -> float:
    """One SPRT step: ``s * exp(mu_hat * y - mu_hat**2 / 2)``."""
    return s * math.exp(mu_hat * y - 0.5 * mu_hat * mu_hat)


def rng_stream(master_seed: int, *key: int) -> np.random.Generator:
    """Independent, reproducible generator for one replication.

    ``key`` identifies the stream (e.g. experiment, grid point, replication);
    distinct keys give statistically independent substreams.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(master_seed, spawn_key=tuple(key))))


def grid_key(mu_alt: float) -> int:
    """Stream key for a grid point, tied to its value so results do not depend on the rest of the grid."""
    return int(round(mu_alt * 1_000_000))


class MartingalePanel:
    """Log-space SPRT martingales for several hypotheses with running maxima."""

    def __init__(self, n: int):
        self.log_s = np.zeros(n)
        self.log_max = np.zeros(n)
        self.t = 0

    def update(self, y, mu_hat) -> None:
        y = np.asarray(y, dtype=float)
        mu_hat = np.asarray(mu_hat, dtype=float)
        self.log_s = self.log_s + mu_hat * y - 0.5 * mu_hat**2
        self.log_max = np.maximum(self.log_max, self.log_s)
        self.t += 1

    @property
    def values(self) -> np.ndarray:
        return np.exp(self.log_s)

    @property
    def maxima(self) -> np.ndarray:
        return np.exp(self.log_max)


def _target_bits(target) -> tuple[int, ...]:
    if isinstance(target, str):
        target = tuple(int(c) for c in target)
    target = tuple(sorted(int(k) for k in target))
    if not target or any(k not in (1, 2, 3) for k in target) or len(set(target)) != len(target):
        raise ValueError(f"target must be a nonempty subset of factors 1..3, got {target!r}")
    return target


def contrast_coefficients(target) -> tuple[np.ndarray, float]:
    """Signed weights over the 8 cells isolating one coefficient, and the variance.

    Cells are indexed by the binary number ``x1 x2 x3``. The weights are the
    inclusion-exclusion signs over the cells whose active factors lie inside
    ``target``; with unit noise the variance is the number of cells used.
    """
    t = set(_target_bits(target))
    coef = np.zeros(8)
    for cell in range(8):
        active = {k for k in (1, 2, 3) if cell >> (3 - k) & 1}
        if active <= t:
            coef[cell] = (-1) ** (len(t) - len(active))
    return coef, float(2 ** len(t))


def _block_array(block) -> np.ndarray:
    if isinstance(block, Mapping):
        out = np.full(8, np.nan)
        for key, value in block.items():
            key = key if isinstance(key, str) else "".join(str(int(b)) for b in key)
            if len(key) != 3 or set(key) - {"0", "1"}:
                raise IncompleteBlock(f"bad cell label {key!r}")
            out[int(key, 2)] = value
    else:
        out = np.asarray(block, dtype=float).reshape(-1)
        if out.size != 8:
            raise IncompleteBlock(f"expected 8 cells, got {out.size}")
    if np.isnan(out).any():
        missing = [format(c, "03b") for c in np.flatnonzero(np.isnan(out))]
        raise IncompleteBlock(f"missing cells {missing}")
    return out


def factorial_contrast(block, target) -> tuple[float, float]:
    """Contrast estimating one factorial coefficient from a full 2^3 block.

    ``block`` is a mapping from cell labels like ``"101"`` to observations or
    a length-8 array indexed by ``int("x1x2x3", 2)``. Returns
    ``(value, variance)``.
    """
    y = _block_array(block)
    coef, var = contrast_coefficients(target)
    return float(coef @ y), var


@dataclass
class ExperimentConfig:
    seed: int
    n: int = 20
    n_alt: int = 5
    mu_alts: tuple[float, ...] = (0.5, 1.0, 1.5, 2.0)
    m: int = 200
    max_iter: int = 2000
    alpha: float = 0.05
    budget: str = "primary"
    beta_known: float = 0.5
    null: bool = False

    def __post_init__(self):
        self.mu_alts = tuple(float(x) for x in self.mu_alts)
        if self.m < 1 or self.max_iter < 1:
            raise ValueError("m and max_iter must be >= 1")
        if any(mu <= 0 for mu in self.mu_alts):
            raise ValueError("mu_alt values must be > 0")
        if not 0 <= self.n_alt <= self.n:
            raise ValueError("n_alt must lie in 0..n")
        if self.budget not in ("primary", "equal"):
            raise ValueError("budget must be 'primary' or 'equal'")


@dataclass
class StoppingTimes:
    """Per-replication stopping times; capped runs carry ``max_iter``."""

    t_e: np.ndarray
    t_p: np.ndarray
    t_ep: np.ndarray
    capped_e: np.ndarray
    capped_p: np.ndarray
    capped_ep: np.ndarray

    @classmethod
    def collect(cls, rows: Sequence[tuple], cap: int) -> "StoppingTimes":
        arr = np.array([[cap if t is None else t for t in r] for r in rows], dtype=int).reshape(-1, 3)
        none = np.array([[t is None for t in r] for r in rows], dtype=bool).reshape(-1, 3)
        return cls(arr[:, 0], arr[:, 1], arr[:, 2], none[:, 0], none[:, 1], none[:, 2])


def _cond_ratio(a: np.ndarray, b: np.ndarray) -> float:
    differ = a != b
    if not differ.any():
        return float("nan")
    return float(np.mean(a[differ] / b[differ]))


def _first(hits: np.ndarray, offset: int) -> int | None:
    idx = np.flatnonzero(hits)
    return offset + int(idx[0]) + 1 if idx.size else None


def holm_replication(rng: np.random.Generator, mu: np.ndarray, mu_hat: float, alpha: float, max_iter: int):
    """Stopping times ``(T_e, T_p, T_ep)`` of one e-Holm / p-Holm run.

    e-Holm rejects something iff ``max_i S_i >= 1/alpha + C``; p-Holm (on
    either kind of p-value) makes its first rejection iff the smallest
    p-value is at most ``alpha/n``. ``None`` marks a time past the cap.
    """
    n = mu.size
    log_s = np.zeros(n)
    log_max = np.zeros(n)
    t_e = t_p = t_ep = None
    t0 = 0
    drift = 0.5 * mu_hat * mu_hat
    while t0 < max_iter and (t_e is None or t_p is None or t_ep is None):
        size = min(BLOCK, max_iter - t0)
        y = rng.standard_normal((size, n)) + mu
        ls = log_s + np.cumsum(mu_hat * y - drift, axis=0)
        lm = np.maximum(log_max, np.maximum.accumulate(ls, axis=0))
        with np.errstate(over="ignore"):
            s, smax = np.exp(ls), np.exp(lm)
        if t_e is None:
            t_e = _first(holm_reject_any(s, alpha), t0)
        if t_ep is None:
            t_ep = _first(np.minimum(1.0 / s, 1.0).min(axis=1) <= alpha / n, t0)
        if t_p is None:
            t_p = _first(np.minimum(1.0 / smax, 1.0).min(axis=1) <= alpha / n, t0)
        log_s, log_max = ls[-1], lm[-1]
        t0 += size
    return t_e, t_p, t_ep


def run_holm_experiment(cfg: ExperimentConfig) -> dict:
    """e-Holm vs p-Holm stopping times over the ``mu_alt`` grid.

    The first ``n_alt`` hypotheses have mean ``mu_alt``, the rest zero; every
    martingale uses the known alternative ``mu_alt``. All procedures see the
    same data within a replication.
    """
    results = {}
    for mu_alt in cfg.mu_alts:
        mu = np.zeros(cfg.n)
        if not cfg.null:
            mu[: cfg.n_alt] = mu_alt
        rows = [
            holm_replication(rng_stream(cfg.seed, 1, grid_key(mu_alt), r), mu, mu_alt, cfg.alpha, cfg.max_iter)
            for r in range(cfg.m)
        ]
        st = StoppingTimes.collect(rows, cfg.max_iter)
        results[mu_alt] = {
            "times": st,
            "metrics": {
                "P(T_e<T_p)": float(np.mean(st.t_e < st.t_p)),
                "E[T_e/T_p|T_e!=T_p]": _cond_ratio(st.t_e, st.t_p),
                "P(T_e<T_ep)": float(np.mean(st.t_e < st.t_ep)),
                "E[T_e/T_ep|T_e!=T_ep]": _cond_ratio(st.t_e, st.t_ep),
                "capped_e": int(st.capped_e.sum()),
                "capped_p": int(st.capped_p.sum()),
            },
            "checks": {
                "T_e<=T_p": bool(np.all(st.t_e <= st.t_p)),
                "T_p==T_ep": bool(np.all(st.t_p == st.t_ep)),
            },
        }
    return results


def run_holm_fwer_audit(
    seed: int, *, n: int = 20, horizon: int = 500, m: int = 2000, alpha: float = 0.05, mu_hat: float = 1.0
) -> dict:
    """Empirical FWER of e-Holm run to ``horizon`` under the global null."""
    mu = np.zeros(n)
    events = 0
    for r in range(m):
        t_e, _, _ = holm_replication(rng_stream(seed, 2, r), mu, mu_hat, alpha, horizon)
        events += t_e is not None
    fwer = events / m
    sd = math.sqrt(alpha * (1 - alpha) / m)
    return {"fwer": fwer, "events": events, "m": m, "bound": alpha + 3 * sd, "mc_sd": sd}


@dataclass
class FactorialDesign:
    """Coefficient hypotheses, their graph and the designated target."""

    graph: GraphSpec
    nodes: tuple[tuple[int, ...], ...] = FACTORIAL_NODES
    target: tuple[int, ...] = (1, 3)
    coef: np.ndarray = field(init=False)
    sd: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.graph.n != len(self.nodes):
            raise ValueError("graph size does not match the node list")
        cols = [contrast_coefficients(t) for t in self.nodes]
        self.coef = np.column_stack([c for c, _ in cols])
        self.sd = np.sqrt([v for _, v in cols])

    @property
    def target_index(self) -> int:
        return self.nodes.index(tuple(self.target))


def cell_means(betas: Mapping[tuple[int, ...], float]) -> np.ndarray:
    """Expected response of each cell ``x1 x2 x3`` under the factorial model."""
    out = np.zeros(8)
    for cell in range(8):
        active = {k for k in (1, 2, 3) if cell >> (3 - k) & 1}
        out[cell] = sum(b for t, b in betas.items() if set(t) <= active)
    return out


def dag_replication(
    rng: np.random.Generator,
    design: FactorialDesign,
    means: np.ndarray,
    known: np.ndarray,
    alpha: float,
    max_iter: int,
    evaluator: TargetEvaluator | None = None,
):
    """Stopping times ``(T_e, T_p, T_ep)`` for rejecting the target hypothesis.

    ``known`` holds standardized alternatives; NaN marks the target's unknown
    alternative, estimated by the running mean of its past standardized
    contrasts (zero before any data).
    """
    g = design.graph
    tgt = design.target_index
    evaluator = evaluator or TargetEvaluator(g, tgt)
    unknown = np.isnan(known)
    k = g.n
    log_s = np.zeros(k)
    log_max = np.zeros(k)
    z_sum = np.zeros(k)
    t_e = t_p = t_ep = None
    t0 = 0
    while t0 < max_iter and (t_e is None or t_p is None or t_ep is None):
        size = min(BLOCK, max_iter - t0)
        y = rng.standard_normal((size, 8)) + means
        z = (y @ design.coef) / design.sd
        # Predictable plug-in: mean of standardized contrasts strictly before t.
        csum = z_sum + np.cumsum(z, axis=0) - z
        steps = (t0 + np.arange(size))[:, None]
        with np.errstate(invalid="ignore", divide="ignore"):
            est = np.where(steps > 0, csum / np.maximum(steps, 1), 0.0)
        mu_hat = np.where(unknown, est, known)
        ls = log_s + np.cumsum(mu_hat * z - 0.5 * mu_hat**2, axis=0)
        lm = np.maximum(log_max, np.maximum.accumulate(ls, axis=0))
        with np.errstate(over="ignore", divide="ignore"):
            s_all, smax_all = np.exp(ls), np.exp(lm)
            p_ep_all = np.minimum(1.0 / s_all, 1.0)
            p_p_all = np.minimum(1.0 / smax_all, 1.0)
        for r in range(size):
            t = t0 + r + 1
            if t_e is None and evaluator(s_all[r]) >= 1.0 / alpha:
                t_e = t
            if t_ep is None and tgt in sequential_rejection(p_ep_all[r], g, alpha):
                t_ep = t
            if t_p is None and tgt in sequential_rejection(p_p_all[r], g, alpha):
                t_p = t
            if t_e is not None and t_p is not None and t_ep is not None:
                break
        log_s, log_max = ls[-1], lm[-1]
        z_sum = z_sum + z.sum(axis=0)
        t0 += size
    return t_e, t_p, t_ep


def _dag_setup(cfg: ExperimentConfig, mu_alt: float, design: FactorialDesign | None):
    design = design or FactorialDesign(factorial_graph(cfg.alpha, cfg.budget))
    betas = {(1,): cfg.beta_known, (3,): cfg.beta_known}
    betas[tuple(design.target)] = 0.0 if cfg.null else mu_alt
    means = cell_means(betas)
    known = np.array(
        [np.nan if t == tuple(design.target) else cfg.beta_known for t in design.nodes]
    ) / design.sd
    return design, means, known


def run_dag_experiment(cfg: ExperimentConfig, design: FactorialDesign | None = None) -> dict:
    """e-DAG vs p-DAG / ep-DAG stopping times for rejecting ``H_13``.

    ``beta_1 = beta_3 = cfg.beta_known`` with known alternatives;
    ``beta_13 = mu_alt`` (zero when ``cfg.null``) with an estimated
    alternative. All other coefficients are zero and their martingales use
    ``beta_known`` as the alternative.
    """
    results = {}
    for mu_alt in cfg.mu_alts:
        d, means, known = _dag_setup(cfg, mu_alt, design)
        evaluator = TargetEvaluator(d.graph, d.target_index)
        rows = [
            dag_replication(rng_stream(cfg.seed, 3, grid_key(mu_alt), r), d, means, known, cfg.alpha, cfg.max_iter, evaluator)
            for r in range(cfg.m)
        ]
        st = StoppingTimes.collect(rows, cfg.max_iter)
        sd = math.sqrt(cfg.alpha * (1 - cfg.alpha) / cfg.m)
        results[mu_alt] = {
            "times": st,
            "metrics": {
                "P(T_e<T_p)": float(np.mean(st.t_e < st.t_p)),
                "P(T_e>T_p)": float(np.mean(st.t_e > st.t_p)),
                "P(T_e<T_ep)": float(np.mean(st.t_e < st.t_ep)),
                "E[T_e/T_p|T_e!=T_p]": _cond_ratio(st.t_e, st.t_p),
                "E[T_e/T_ep|T_e!=T_ep]": _cond_ratio(st.t_e, st.t_ep),
                "reject_rate_e": float(np.mean(~st.capped_e)),
                "capped_e": int(st.capped_e.sum()),
                "capped_p": int(st.capped_p.sum()),
                "capped_ep": int(st.capped_ep.sum()),
            },
            "checks": {
                "T_e<=T_ep": bool(np.all(st.t_e <= st.t_ep)),
                "fwer_bound": cfg.alpha + 3 * sd,
            },
        }
    return results


def metrics_rows(experiment: str, budget: str | None, results: dict) -> list[dict]:
    rows = []
    for mu_alt, res in results.items():
        for name, value in res["metrics"].items():
            rows.append({"experiment": experiment, "budget": budget or "", "mu_alt": mu_alt, "metric": name, "value": value})
    return rows


def metrics_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=["experiment", "budget", "mu_alt", "metric", "value"], lineterminator="\n")
    writer.writeheader()
    for row in rows:
        row = dict(row)
        row["value"] = format(row["value"], ".17g") if isinstance(row["value"], float) else row["value"]
        writer.writerow(row)
    return buf.getvalue()


def manifest(cfg: ExperimentConfig, experiment: str) -> str:
    from . import __version__

    doc = {
        "experiment": experiment,
        "seed": cfg.seed,
        "config": asdict(cfg),
        "generator": GENERATOR,
        "gaussian": GAUSSIAN,
        "versions": {"efwer": __version__, "numpy": np.__version__, "python": platform.python_version()},
    }
    return json.dumps(doc, indent=2, sort_keys=True)
