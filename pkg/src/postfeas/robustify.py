"""Credible-set robustification of uncertain constraint rows.

An uncertain row is the stacked vector u = (a, b) of coefficients and
right-hand side; the constraint a'x <= b is u'z(x) <= 0 with
z(x) = (x, -1).  Robustification replaces each row's uncertainty with an
ellipsoidal credible set and enforces the worst case over it, which is a
second-order-cone constraint:

    center'z + kappa * ||factor'z||_2 <= 0.

With kappa the square root of a chi-square quantile at level alpha/m per
row, simultaneous coverage follows from the Bonferroni union bound.  A
cutting-plane loop reduces the robust program to plain LPs, since the
support function of an ellipsoid has a closed-form maximizer.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from . import stats
from .errors import (
    DimensionMismatch,
    DomainError,
    MaxRoundsExceeded,
    NotPositiveDefinite,
)
from .lp import LpProblem, LpSolution, SolverTolerances, solve_lp

__all__ = [
    "Ellipsoid",
    "RobustRow",
    "RobustLp",
    "CutLog",
    "SupportResult",
    "soc_support",
    "bonferroni_kappa",
    "robustify_rows",
    "robustify_rows_joint",
    "solve_robust_cutting_planes",
    "rhs_quantile_tighten",
    "rb_heuristic_tighten",
    "robust_lp_to_json",
    "robust_lp_from_json",
]


def _psd_factor(cov: np.ndarray) -> np.ndarray:
    """Square root F with F F' = cov.

    Cholesky when positive definite (lower triangular, positive
    diagonal); a symmetric eigendecomposition root when the matrix is
    merely positive semidefinite, so degenerate directions (zero
    variance) are allowed.  Indefinite input raises.
    """
    sym = 0.5 * (cov + cov.T)
    try:
        return np.linalg.cholesky(sym)
    except np.linalg.LinAlgError:
        pass
    vals, vecs = np.linalg.eigh(sym)
    scale = max(float(vals.max(initial=0.0)), 1.0)
    if vals.min(initial=0.0) < -1e-10 * scale:
        raise NotPositiveDefinite("covariance has a negative eigenvalue")
    vals = np.clip(vals, 0.0, None)
    return vecs * np.sqrt(vals)[np.newaxis, :]


@dataclass(frozen=True)
class Ellipsoid:
    """{center + radius * factor w : ||w||_2 <= 1} with factor factor' = cov."""

    center: np.ndarray
    cov: np.ndarray
    factor: np.ndarray
    radius: float

    @classmethod
    def from_cov(cls, center, cov, radius: float) -> "Ellipsoid":
        center = np.asarray(center, dtype=float)
        cov = np.asarray(cov, dtype=float)
        if center.ndim != 1:
            raise DimensionMismatch("center must be a vector")
        p = center.size
        if cov.shape != (p, p):
            raise DimensionMismatch(f"cov has shape {cov.shape}, expected ({p}, {p})")
        radius = float(radius)
        if radius < 0.0:
            raise DomainError(f"radius must be >= 0, got {radius!r}")
        return cls(center=center, cov=cov, factor=_psd_factor(cov), radius=radius)

    @property
    def dim(self) -> int:
        return self.center.size


class SupportResult(NamedTuple):
    value: float
    maximizer: np.ndarray


def soc_support(ell: Ellipsoid, z: np.ndarray) -> SupportResult:
    """Support function max{u'z : u in ell} and its maximizer.

    value = center'z + radius * ||factor'z||_2,
    u*    = center + radius * factor (factor'z) / ||factor'z||_2,
    with u* = center when factor'z = 0.
    """
    z = np.asarray(z, dtype=float)
    if z.shape != (ell.dim,):
        raise DimensionMismatch(f"z has shape {z.shape}, expected ({ell.dim},)")
    fz = ell.factor.T @ z
    norm = float(np.linalg.norm(fz))
    value = float(ell.center @ z) + ell.radius * norm
    if norm == 0.0:
        return SupportResult(value, ell.center.copy())
    u_star = ell.center + (ell.radius / norm) * (ell.factor @ fz)
    return SupportResult(value, u_star)


def bonferroni_kappa(alpha: float, m: int, dim: int) -> float:
    """Radius sqrt(chi2_quantile(1 - alpha/m, dim)) for m simultaneous rows."""
    alpha = float(alpha)
    if not (0.0 < alpha < 1.0):
        raise DomainError(f"alpha must be in (0, 1), got {alpha!r}")
    if m < 1:
        raise DomainError(f"m must be >= 1, got {m}")
    if dim < 1:
        raise DomainError(f"dim must be >= 1, got {dim}")
    return math.sqrt(stats.chi2_quantile(1.0 - alpha / m, dim))


@dataclass(frozen=True)
class RobustRow:
    """One robustified row: sup over the ellipsoid of u'z(x) <= 0."""

    ellipsoid: Ellipsoid
    kappa: float


@dataclass(frozen=True)
class RobustLp:
    """Deterministic base problem plus robustified uncertain rows."""

    base: LpProblem
    robust_rows: tuple[RobustRow, ...]


def _check_row_dim(base: LpProblem, dim: int):
    if dim != base.n + 1:
        raise DimensionMismatch(
            f"uncertain rows live in R^(n+1) = R^{base.n + 1}, got dim {dim}"
        )


def robustify_rows(
    base: LpProblem,
    rows: Sequence[tuple[np.ndarray, np.ndarray]],
    alpha: float,
) -> RobustLp:
    """Per-row credible ellipsoids at level 1 - alpha/m (Bonferroni).

    rows: (center, cov) pairs in R^(n+1), stacking coefficients and rhs.
    """
    rows = list(rows)
    if not rows:
        raise DimensionMismatch("need at least one uncertain row")
    m = len(rows)
    kappa = bonferroni_kappa(alpha, m, base.n + 1)
    robust = []
    for center, cov in rows:
        center = np.asarray(center, dtype=float)
        _check_row_dim(base, center.size)
        robust.append(RobustRow(Ellipsoid.from_cov(center, cov, kappa), kappa))
    return RobustLp(base=base, robust_rows=tuple(robust))


def robustify_rows_joint(
    base: LpProblem,
    center: np.ndarray,
    cov: np.ndarray,
    alpha: float,
) -> RobustLp:
    """Joint-ellipsoid variant: one credible set over all rows at once.

    center concatenates the m row vectors (each n+1 long); kappa is the
    chi-square radius in dimension m(n+1); each row keeps the marginal
    block of the joint covariance, which is the exact projection of the
    joint ellipsoid.
    """
    center = np.asarray(center, dtype=float)
    cov = np.asarray(cov, dtype=float)
    p = base.n + 1
    if center.ndim != 1 or center.size % p != 0:
        raise DimensionMismatch(
            f"joint center length must be a multiple of n+1 = {p}"
        )
    m = center.size // p
    if m < 1:
        raise DimensionMismatch("need at least one uncertain row")
    if cov.shape != (center.size, center.size):
        raise DimensionMismatch("joint covariance shape mismatch")
    kappa = math.sqrt(stats.chi2_quantile(1.0 - alpha, center.size))
    robust = []
    for i in range(m):
        sl = slice(i * p, (i + 1) * p)
        robust.append(
            RobustRow(Ellipsoid.from_cov(center[sl], cov[sl, sl], kappa), kappa)
        )
    return RobustLp(base=base, robust_rows=tuple(robust))


@dataclass
class CutLog:
    rounds: int
    cuts_per_round: list[int]
    final_max_support: float

    @property
    def total_cuts(self) -> int:
        return sum(self.cuts_per_round)


def solve_robust_cutting_planes(
    rlp: RobustLp,
    tol_cut: float = 1e-7,
    max_rounds: int = 500,
    tolerances: SolverTolerances | None = None,
) -> tuple[LpSolution, CutLog]:
    """Exact cutting-plane solve of the robustified program.

    Each round solves the LP relaxation, evaluates every robust row's
    support at the incumbent, and adds the maximizing row u* as a linear
    cut wherever the support exceeds tol_cut.  Cuts accumulate across
    rounds.  Terminates when no row separates; raises MaxRoundsExceeded
    after max_rounds.  A non-optimal relaxation status is returned as is.
    """
    if max_rounds < 1:
        raise DomainError(f"max_rounds must be >= 1, got {max_rounds}")
    base = rlp.base
    constraints = base.constraints()
    bounds = base.bounds()
    cuts_per_round: list[int] = []
    last_max = math.inf
    for _ in range(max_rounds):
        problem = LpProblem(base.objective, constraints, bounds)
        sol = solve_lp(problem, tolerances)
        if sol.status != "Optimal":
            return sol, CutLog(len(cuts_per_round) + 1, cuts_per_round, last_max)
        z = np.concatenate([sol.x, [-1.0]])
        added = 0
        last_max = 0.0
        for row in rlp.robust_rows:
            support = soc_support(row.ellipsoid, z)
            last_max = max(last_max, support.value)
            if support.value > tol_cut:
                u = support.maximizer
                constraints.append((u[:-1], "<=", float(u[-1])))
                added += 1
        cuts_per_round.append(added)
        if added == 0:
            return sol, CutLog(len(cuts_per_round), cuts_per_round, last_max)
    raise MaxRoundsExceeded(
        f"cutting planes did not converge in {max_rounds} rounds "
        f"(max support {last_max:.3e})"
    )


def rhs_quantile_tighten(predictives: Sequence, alpha: float) -> np.ndarray:
    """Tightened right-hand sides at the alpha/m predictive quantile.

    Takes the lower alpha/m quantile of each row's Student-t predictive;
    with m rows, the union bound gives simultaneous level alpha.
    """
    from .posterior import predictive_quantile

    preds = list(predictives)
    if not preds:
        raise DimensionMismatch("need at least one predictive")
    alpha = float(alpha)
    m = len(preds)
    if not (0.0 < alpha / m < 1.0):
        raise DomainError(f"alpha/m must be in (0, 1), got {alpha / m!r}")
    return np.array([predictive_quantile(p, alpha / m) for p in preds])


def rb_heuristic_tighten(means, sds, alpha: float, m: int) -> np.ndarray:
    """Normal-theory heuristic: mean - z_{1-alpha/m} * sd per row."""
    mu = np.asarray(means, dtype=float)
    sd = np.asarray(sds, dtype=float)
    if mu.shape != sd.shape or mu.ndim != 1:
        raise DimensionMismatch("means and sds must be equal-length vectors")
    if np.any(sd < 0.0):
        raise DomainError("sds must be nonnegative")
    alpha = float(alpha)
    if m < 1:
        raise DomainError(f"m must be >= 1, got {m}")
    if not (0.0 < alpha / m < 1.0):
        raise DomainError(f"alpha/m must be in (0, 1), got {alpha / m!r}")
    z = stats.normal_quantile(1.0 - alpha / m)
    return mu - z * sd


def robust_lp_to_json(rlp: RobustLp) -> str:
    from .lp import problem_to_json

    base_doc = json.loads(problem_to_json(rlp.base))
    base_doc["robust_rows"] = [
        {
            "center": row.ellipsoid.center.tolist(),
            "cov": row.ellipsoid.cov.tolist(),
            "kappa": row.kappa,
        }
        for row in rlp.robust_rows
    ]
    return json.dumps(base_doc)


def robust_lp_from_json(text: str) -> RobustLp:
    from .lp import problem_from_json

    try:
        doc = json.loads(text)
    except ValueError as exc:
        raise DomainError(f"robust LP document is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise DomainError("robust LP document must be a JSON object")
    rows_doc = doc.pop("robust_rows", [])
    base = problem_from_json(json.dumps(doc))
    robust = []
    try:
        for rd in rows_doc:
            kappa = float(rd["kappa"])
            robust.append(
                RobustRow(Ellipsoid.from_cov(rd["center"], rd["cov"], kappa), kappa)
            )
    except (KeyError, TypeError) as exc:
        raise DomainError(f"malformed robust row: {exc}") from exc
    return RobustLp(base=base, robust_rows=tuple(robust))
