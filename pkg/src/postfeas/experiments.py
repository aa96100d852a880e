"""Benchmark simulation and panel-selection pipelines.

The benchmark draws synthetic resource-allocation instances, fits the
capacity posterior from each instance's history, and compares five ways
of turning the posterior into right-hand sides:

    PM   plug-in posterior-predictive mean
    CR   per-row predictive quantile at alpha/m (union bound)
    PS   componentwise minimum of posterior-predictive scenario draws
    FPQ  frequentist OLS t prediction quantile at alpha/m
    RB   mean - z_{1-alpha/m} * sd normal-theory heuristic

Each optimized decision is certified twice: against fresh draws from
the generating truth (v_true) and against the posterior predictive
(v_post, with an exact upper confidence bound).
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import posterior as po
from . import scenario as sc
from . import stats
from .certify import Certificate, certify, clopper_pearson_upper
from .errors import DimensionMismatch, DomainError, PanelInfeasible
from .lp import LpProblem, solve_lp
from .robustify import rb_heuristic_tighten, rhs_quantile_tighten

__all__ = [
    "METHODS",
    "SimConfig",
    "SimInstance",
    "TrialRecord",
    "PanelConfig",
    "ClusterSummary",
    "PanelResult",
    "gen_instance",
    "run_method",
    "run_benchmark",
    "summarize_by_alpha",
    "summarize_overall",
    "panel_select",
    "panel_certify_detail",
    "write_trials_csv",
    "write_by_alpha_csv",
    "write_overall_csv",
    "write_panel_csv",
    "write_panel_clusters_csv",
]

METHODS = ("CR", "FPQ", "PM", "PS", "RB")

_LOG = logging.getLogger("postfeas.experiments")

_CERT_BETA = 0.05  # confidence level of per-trial posterior certificates
_CHUNK = 1024  # posterior-draw chunk size in the panel certifier


@dataclass(frozen=True)
class SimConfig:
    """Benchmark dimensions and instance-generating distributions."""

    n: int = 18
    m: int = 7
    d_ctx: int = 6
    n_obs: int = 90
    n_scen: int = 300
    m_true: int = 5000
    m_cert: int = 5000
    trials_per_alpha: int = 60
    alphas: tuple[float, ...] = (0.01, 0.05, 0.10)
    x_max: float = 50.0
    master_seed: int = 42
    a_range: tuple[float, float] = (0.5, 1.5)
    p_range: tuple[float, float] = (1.0, 5.0)
    intercept_range: tuple[float, float] = (40.0, 80.0)
    slope_range: tuple[float, float] = (-2.0, 2.0)
    sigma_range: tuple[float, float] = (3.0, 9.0)

    def to_json(self) -> str:
        doc = {
            "n": self.n, "m": self.m, "d_ctx": self.d_ctx,
            "n_obs": self.n_obs, "n_scen": self.n_scen,
            "m_true": self.m_true, "m_cert": self.m_cert,
            "trials_per_alpha": self.trials_per_alpha,
            "alphas": list(self.alphas), "x_max": self.x_max,
            "master_seed": self.master_seed,
            "a_range": list(self.a_range), "p_range": list(self.p_range),
            "intercept_range": list(self.intercept_range),
            "slope_range": list(self.slope_range),
            "sigma_range": list(self.sigma_range),
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "SimConfig":
        try:
            doc = json.loads(text)
        except ValueError as exc:
            raise DomainError(f"SimConfig document is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise DomainError("SimConfig document must be a JSON object")
        kwargs = {}
        for key, value in doc.items():
            if key not in cls.__dataclass_fields__:
                raise DomainError(f"unknown SimConfig key {key!r}")
            if isinstance(value, list):
                value = tuple(value)
            kwargs[key] = value
        return cls(**kwargs)


@dataclass(frozen=True)
class SimInstance:
    """One synthetic allocation instance plus its capacity history."""

    resource_rows: np.ndarray  # (m, n)
    profit: np.ndarray  # (n,)
    beta_true: np.ndarray  # (m, d_ctx)
    sigma_true: np.ndarray  # (m,)
    x_ctx: np.ndarray  # (d_ctx,)
    design: np.ndarray  # (n_obs, d_ctx)
    observations: np.ndarray  # (n_obs, m)


def _unif(rng: stats.Rng, lo: float, hi: float, size) -> np.ndarray:
    return lo + (hi - lo) * stats.uniform_array(rng, size)


def gen_instance(cfg: SimConfig, rng: stats.Rng) -> SimInstance:
    """Draw one instance; identical streams give bit-identical instances.

    Consumption rows A and profits p are uniform and positive; the true
    capacity of row j is x'beta_j + sigma_j eps at any context x with an
    intercept-plus-uniform context law.  Historical observations carry
    their own i.i.d. context draws so the regression is identifiable;
    the decision context is one further draw of the same law.
    """
    rows = _unif(rng, *cfg.a_range, (cfg.m, cfg.n))
    profit = _unif(rng, *cfg.p_range, (cfg.n,))
    intercepts = _unif(rng, *cfg.intercept_range, (cfg.m,))
    slopes = _unif(rng, *cfg.slope_range, (cfg.m, cfg.d_ctx - 1))
    beta_true = np.column_stack([intercepts, slopes])
    sigma_true = _unif(rng, *cfg.sigma_range, (cfg.m,))
    x_ctx = np.concatenate([[1.0], stats.uniform_array(rng, (cfg.d_ctx - 1,))])
    design = np.column_stack([
        np.ones(cfg.n_obs), stats.uniform_array(rng, (cfg.n_obs, cfg.d_ctx - 1))
    ])
    noise = stats.normal_array(rng, (cfg.n_obs, cfg.m))
    observations = design @ beta_true.T + sigma_true[np.newaxis, :] * noise
    return SimInstance(
        resource_rows=rows, profit=profit, beta_true=beta_true,
        sigma_true=sigma_true, x_ctx=x_ctx, design=design,
        observations=observations,
    )


@dataclass(frozen=True)
class TrialRecord:
    alpha: float
    method: str
    trial: int
    status: str
    profit: float
    v_true: float
    v_post: float
    v_post_ub95: float
    clamped: bool
    master_seed: int


def _tightened_rhs(method: str, instance: SimInstance, alpha: float,
                   cfg: SimConfig, rng: stats.Rng) -> np.ndarray:
    prior = po.NigPrior.default(cfg.d_ctx)
    posts = [
        po.fit_nig(instance.design, instance.observations[:, j], prior)
        for j in range(cfg.m)
    ]
    preds = [po.predictive(p, instance.x_ctx) for p in posts]
    if method == "PM":
        return np.array([p.loc for p in preds])
    if method == "CR":
        return rhs_quantile_tighten(preds, alpha)
    if method == "PS":
        scen_rng = stats.Rng.for_purpose(rng.seed, rng.stream_id, "scenario")
        draws = np.column_stack([
            po.predictive_array(p, scen_rng, (cfg.n_scen,)) for p in preds
        ])
        return sc.rhs_scenario_min(draws)
    if method == "FPQ":
        fits = [
            po.fit_ols(instance.design, instance.observations[:, j])
            for j in range(cfg.m)
        ]
        return np.array([
            po.ols_predictive_quantile(f, instance.x_ctx, alpha / cfg.m)
            for f in fits
        ])
    if method == "RB":
        means = np.array([p.loc for p in preds])
        sds = np.array([
            p.scale * np.sqrt(p.dof / (p.dof - 2.0)) for p in preds
        ])
        return rb_heuristic_tighten(means, sds, alpha, cfg.m)
    raise DomainError(f"unknown method {method!r}")


def run_method(method: str, instance: SimInstance, alpha: float,
               cfg: SimConfig, rng: stats.Rng, trial: int = 0) -> TrialRecord:
    """Optimize with one hedging method and certify the decision.

    The true-model and posterior certification draws come from purpose
    tagged child streams of rng, so all methods within a trial see
    identical certification draws.
    """
    b_hat = _tightened_rhs(method, instance, alpha, cfg, rng)
    clamped = bool(np.any(b_hat < 0.0))
    b_hat = np.maximum(b_hat, 0.0)
    problem = LpProblem(
        instance.profit,
        [(instance.resource_rows[j], "<=", float(b_hat[j])) for j in range(cfg.m)],
        [(0.0, cfg.x_max)] * cfg.n,
    )
    sol = solve_lp(problem)
    if sol.status != "Optimal":
        return TrialRecord(alpha, method, trial, sol.status, float("nan"),
                           float("nan"), float("nan"), float("nan"),
                           clamped, rng.seed)
    x_hat = sol.x
    ax = instance.resource_rows @ x_hat
    true_rng = stats.Rng.for_purpose(rng.seed, rng.stream_id, "true")
    b_true = (
        instance.x_ctx @ instance.beta_true.T
        + instance.sigma_true[np.newaxis, :]
        * stats.normal_array(true_rng, (cfg.m_true, cfg.m))
    )
    v_true = float((b_true < ax[np.newaxis, :]).any(axis=1).mean())

    prior = po.NigPrior.default(cfg.d_ctx)
    preds = [
        po.predictive(
            po.fit_nig(instance.design, instance.observations[:, j], prior),
            instance.x_ctx,
        )
        for j in range(cfg.m)
    ]

    def sampler(r: stats.Rng, count: int):
        return np.column_stack([
            po.predictive_array(p, r, (count,)) for p in preds
        ])

    def oracle(x: np.ndarray, batch: np.ndarray):
        lhs = instance.resource_rows @ x
        flags = batch < lhs[np.newaxis, :]
        return flags.any(axis=1), flags

    cert_rng = stats.Rng.for_purpose(rng.seed, rng.stream_id, "certify")
    cert = certify(x_hat, oracle, sampler, cfg.m_cert, _CERT_BETA, cert_rng)
    return TrialRecord(alpha, method, trial, "Optimal",
                       float(sol.objective_value), v_true,
                       cert.v_hat, cert.upper_bound, clamped, rng.seed)


def _error_record(alpha: float, method: str, trial: int, seed: int) -> TrialRecord:
    nan = float("nan")
    return TrialRecord(alpha, method, trial, "Error", nan, nan, nan, nan,
                       False, seed)


def _trial_block(cfg: SimConfig, alpha_index: int, trial: int) -> list[TrialRecord]:
    alpha = cfg.alphas[alpha_index]
    global_trial = alpha_index * cfg.trials_per_alpha + trial
    inst_rng = stats.Rng.for_purpose(cfg.master_seed, "instance", global_trial)
    try:
        instance = gen_instance(cfg, inst_rng)
    except Exception:
        _LOG.exception("instance generation failed (alpha=%s trial=%d)",
                       alpha, trial)
        return [_error_record(alpha, m, trial, cfg.master_seed) for m in METHODS]
    trial_rng = stats.Rng.for_purpose(cfg.master_seed, "trial", global_trial)
    out = []
    for method in METHODS:
        try:
            out.append(run_method(method, instance, alpha, cfg, trial_rng, trial))
        except Exception:
            _LOG.exception("trial failed (alpha=%s trial=%d method=%s)",
                           alpha, trial, method)
            out.append(_error_record(alpha, method, trial, cfg.master_seed))
    return out


def run_benchmark(cfg: SimConfig, jobs: int = 1) -> list[TrialRecord]:
    """All (alpha, trial, method) records, deterministically ordered.

    jobs > 1 distributes trials over processes; per-trial streams make
    the result independent of scheduling.
    """
    tasks = [
        (ai, t)
        for ai in range(len(cfg.alphas))
        for t in range(cfg.trials_per_alpha)
    ]
    records: list[TrialRecord] = []
    if jobs <= 1:
        for ai, t in tasks:
            records.extend(_trial_block(cfg, ai, t))
        return records
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        for block in pool.map(_trial_block, [cfg] * len(tasks),
                              [a for a, _ in tasks], [t for _, t in tasks]):
            records.extend(block)
    return records


def _aggregate(records: list[TrialRecord]):
    ok = [r for r in records if r.status == "Optimal"]
    profit = np.array([r.profit for r in ok])
    vtrue = np.array([r.v_true for r in ok])
    vpost = np.array([r.v_post for r in ok])
    vub = np.array([r.v_post_ub95 for r in ok])
    n = len(ok)
    sd = lambda a: float(np.std(a, ddof=1)) if n > 1 else 0.0  # noqa: E731
    return {
        "n": n,
        "profit_mean": float(profit.mean()) if n else float("nan"),
        "profit_sd": sd(profit) if n else float("nan"),
        "vtrue_mean": float(vtrue.mean()) if n else float("nan"),
        "vtrue_sd": sd(vtrue) if n else float("nan"),
        "vpost_mean": float(vpost.mean()) if n else float("nan"),
        "vpost_ub95_mean": float(vub.mean()) if n else float("nan"),
    }


def summarize_by_alpha(cfg: SimConfig, records: list[TrialRecord]) -> list[dict]:
    rows = []
    for alpha in cfg.alphas:
        for method in METHODS:
            sel = [r for r in records if r.alpha == alpha and r.method == method]
            agg = _aggregate(sel)
            rows.append({"alpha": alpha, "method": method, **agg})
    return rows


def summarize_overall(cfg: SimConfig, records: list[TrialRecord]) -> list[dict]:
    rows = []
    for method in METHODS:
        sel = [r for r in records if r.method == method]
        agg = _aggregate(sel)
        agg.pop("vtrue_sd")
        rows.append({"method": method, **agg})
    return rows


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_csv(path, header: list[str], rows: list[list]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_trials_csv(path, records: list[TrialRecord]) -> None:
    header = ["alpha", "method", "trial", "status", "profit", "v_true",
              "v_post", "v_post_ub95", "clamped", "master_seed"]
    rows = [
        [r.alpha, r.method, r.trial, r.status, r.profit, r.v_true,
         r.v_post, r.v_post_ub95, int(r.clamped), r.master_seed]
        for r in records
    ]
    _write_csv(path, header, rows)


def write_by_alpha_csv(path, by_alpha: list[dict]) -> None:
    header = ["alpha", "method", "n", "profit_mean", "profit_sd",
              "vtrue_mean", "vtrue_sd", "vpost_mean", "vpost_ub95_mean"]
    _write_csv(path, header, [[row[h] for h in header] for row in by_alpha])


def write_overall_csv(path, overall: list[dict]) -> None:
    header = ["method", "n", "profit_mean", "profit_sd", "vtrue_mean",
              "vpost_mean", "vpost_ub95_mean"]
    _write_csv(path, header, [[row[h] for h in header] for row in overall])


# ---------------------------------------------------------------------------
# Panel selection
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PanelConfig:
    budget: int = 30
    threshold: float = 8.0
    n_scen: int = 300
    m_cert: int = 4000
    beta: float = 0.05
    alpha_intent: float = 0.05

    def to_json(self) -> str:
        return json.dumps({
            "budget": self.budget, "threshold": self.threshold,
            "n_scen": self.n_scen, "m_cert": self.m_cert,
            "beta": self.beta, "alpha_intent": self.alpha_intent,
        })

    @classmethod
    def from_json(cls, text: str) -> "PanelConfig":
        try:
            doc = json.loads(text)
        except ValueError as exc:
            raise DomainError(f"PanelConfig document is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise DomainError("PanelConfig document must be a JSON object")
        unknown = set(doc) - set(cls.__dataclass_fields__)
        if unknown:
            raise DomainError(f"unknown PanelConfig keys {sorted(unknown)}")
        return cls(**doc)


@dataclass(frozen=True)
class ClusterSummary:
    cluster: str
    mean: float
    q05: float
    median: float
    q95: float
    violation_rate: float


@dataclass(frozen=True)
class PanelResult:
    relaxed_x: np.ndarray
    panel: tuple[str, ...]
    certificate: Certificate
    cluster_summaries: tuple[ClusterSummary, ...]


def _default_ids(count: int, prefix: str) -> tuple[str, ...]:
    width = max(4, len(str(count - 1)))
    return tuple(f"{prefix}{i:0{width}d}" for i in range(count))


def panel_certify_detail(
    x_sel: np.ndarray,
    post: po.BetaPosteriorMatrix,
    cfg: PanelConfig,
    rng: stats.Rng,
    cluster_ids=None,
) -> tuple[Certificate, tuple[ClusterSummary, ...]]:
    """Certificate plus per-cluster coverage detail on shared draws.

    One stream of m_cert posterior detection matrices feeds both the
    global violation count and the per-cluster coverage summaries, so
    max_j rate_j <= v_hat <= sum_j rate_j holds exactly.
    """
    x_sel = np.asarray(x_sel, dtype=float)
    j_clusters, k_genes = post.a.shape
    if x_sel.shape != (k_genes,):
        raise DimensionMismatch(
            f"selection vector has shape {x_sel.shape}, expected ({k_genes},)"
        )
    if cluster_ids is None:
        cluster_ids = _default_ids(j_clusters, "c")
    coverage = np.empty((cfg.m_cert, j_clusters))
    done = 0
    while done < cfg.m_cert:
        take = min(_CHUNK, cfg.m_cert - done)
        draws = po.q_matrix_draws(post, rng, take)
        coverage[done:done + take] = draws @ x_sel
        done += take
    flags = coverage < cfg.threshold  # strict: a draw exactly at L is fine
    violated = flags.any(axis=1)
    s = int(violated.sum())
    cert = Certificate(
        M=cfg.m_cert,
        s=s,
        v_hat=s / cfg.m_cert,
        upper_bound=clopper_pearson_upper(s, cfg.m_cert, cfg.beta),
        beta=cfg.beta,
        per_constraint_rates=tuple(
            float(f) / cfg.m_cert for f in flags.sum(axis=0)
        ),
    )
    summaries = tuple(
        ClusterSummary(
            cluster=str(cluster_ids[j]),
            mean=float(coverage[:, j].mean()),
            q05=float(np.quantile(coverage[:, j], 0.05)),
            median=float(np.quantile(coverage[:, j], 0.5)),
            q95=float(np.quantile(coverage[:, j], 0.95)),
            violation_rate=float(flags[:, j].mean()),
        )
        for j in range(j_clusters)
    )
    return cert, summaries


def panel_select(
    weights: np.ndarray,
    post: po.BetaPosteriorMatrix,
    cfg: PanelConfig,
    rng: stats.Rng,
    gene_ids=None,
    cluster_ids=None,
) -> PanelResult:
    """Scenario-robust panel of cfg.budget genes maximizing total weight.

    The relaxed problem maximizes w'x over x in [0, 1]^K with sum x <=
    budget and q^(s)_j' x >= threshold for every posterior scenario s
    and cluster j.  The hard panel keeps the budget highest relaxed
    scores (ties: larger weight, then lexicographic gene id) and is
    certified on fresh draws.
    """
    w = np.asarray(weights, dtype=float)
    j_clusters, k_genes = post.a.shape
    if w.shape != (k_genes,):
        raise DimensionMismatch(
            f"weights have shape {w.shape}, expected ({k_genes},)"
        )
    if cfg.budget < 1 or cfg.budget > k_genes:
        raise DomainError(
            f"budget must be in [1, {k_genes}], got {cfg.budget}"
        )
    if gene_ids is None:
        gene_ids = _default_ids(k_genes, "g")
    if cluster_ids is None:
        cluster_ids = _default_ids(j_clusters, "c")
    gene_ids = tuple(str(g) for g in gene_ids)
    cluster_ids = tuple(str(c) for c in cluster_ids)

    scen_rng = stats.Rng.for_purpose(rng.seed, rng.stream_id, "scenario")
    q_draws = po.q_matrix_draws(post, scen_rng, cfg.n_scen)  # (S, J, K)

    # necessary condition per cluster: even the best budget-sized set
    # must reach the threshold in every scenario
    if cfg.budget >= k_genes:
        top_b = q_draws.sum(axis=2)
    else:
        part = np.partition(q_draws, k_genes - cfg.budget, axis=2)
        top_b = part[:, :, k_genes - cfg.budget:].sum(axis=2)
    margins = top_b.min(axis=0) - cfg.threshold  # (J,)
    worst = int(np.argmin(margins))
    if margins[worst] < 0.0:
        raise PanelInfeasible(cluster_ids[worst])

    scen = sc.ScenarioSet(
        coeff=q_draws,
        senses=(">=",) * j_clusters,
        rhs=np.full((cfg.n_scen, j_clusters), cfg.threshold),
        source_stream=(scen_rng.seed, scen_rng.stream_id),
    )
    base = LpProblem(
        w,
        [(np.ones(k_genes), "<=", float(cfg.budget))],
        [(0.0, 1.0)] * k_genes,
    )
    problem = sc.build_scenario_lp(base, scen, prefilter=True)
    sol = solve_lp(problem)
    if sol.status != "Optimal":
        raise PanelInfeasible(
            cluster_ids[worst],
            f"relaxed panel program is {sol.status} "
            f"(tightest cluster {cluster_ids[worst]})",
        )
    relaxed_x = sol.x

    order = sorted(
        range(k_genes), key=lambda k: (-relaxed_x[k], -w[k], gene_ids[k])
    )
    chosen = sorted(order[: cfg.budget])
    x_bin = np.zeros(k_genes)
    x_bin[chosen] = 1.0

    cert_rng = stats.Rng.for_purpose(rng.seed, rng.stream_id, "certify")
    cert, summaries = panel_certify_detail(
        x_bin, post, cfg, cert_rng, cluster_ids=cluster_ids
    )
    return PanelResult(
        relaxed_x=relaxed_x,
        panel=tuple(gene_ids[k] for k in chosen),
        certificate=cert,
        cluster_summaries=summaries,
    )


def write_panel_csv(path, result: PanelResult, weights, gene_ids) -> None:
    """panel.csv: selected genes by rank with relaxed scores and weights."""
    gene_ids = tuple(str(g) for g in gene_ids)
    weights = np.asarray(weights, dtype=float)
    index = {g: k for k, g in enumerate(gene_ids)}
    ranked = sorted(
        result.panel,
        key=lambda g: (-result.relaxed_x[index[g]], -weights[index[g]], g),
    )
    rows = [
        [rank + 1, g, float(result.relaxed_x[index[g]]), float(weights[index[g]])]
        for rank, g in enumerate(ranked)
    ]
    _write_csv(path, ["rank", "gene", "x_relaxed", "weight"], rows)


def write_panel_clusters_csv(path, result: PanelResult) -> None:
    rows = [
        [s.cluster, s.mean, s.q05, s.median, s.q95, s.violation_rate]
        for s in result.cluster_summaries
    ]
    _write_csv(
        path,
        ["cluster", "mean", "q05", "median", "q95", "violation_rate"],
        rows,
    )
