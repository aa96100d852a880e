"""Monte Carlo feasibility certificates.

A candidate decision is replayed against M posterior draws; a draw
counts as a violation when ANY constraint is strictly violated, with no
tolerance (the raw sign of the residual decides).  The binomial count s
then gives an exact one-sided Clopper-Pearson upper confidence bound on
the posterior violation probability.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import stats
from .errors import CountOutOfRange, DomainError

__all__ = [
    "Certificate",
    "clopper_pearson_upper",
    "estimate_violation",
    "certify",
    "certificate_to_json",
    "certificate_from_json",
]

# Batch sampling protocol: sampler(rng, count) returns an opaque batch of
# count posterior draws; oracle(x, batch) returns either a (count,) bool
# array, or a tuple (violated, per_constraint) with per_constraint of
# shape (count, n_constraints).  Draw j of the batch must depend only on
# the stream position, so chunked and whole-batch evaluation agree.
Sampler = Callable[[stats.Rng, int], object]
Oracle = Callable[[np.ndarray, object], object]


def clopper_pearson_upper(s: int, m_draws: int, beta: float) -> float:
    """One-sided upper confidence bound for a binomial proportion.

    Level 1 - beta; equals BetaInv(1 - beta; s + 1, M - s) for s < M and
    exactly 1 for s = M.  At s = 0 it reduces to 1 - beta^(1/M).
    """
    s = int(s)
    m_draws = int(m_draws)
    if m_draws < 1:
        raise CountOutOfRange(f"M must be >= 1, got {m_draws}")
    if s < 0 or s > m_draws:
        raise CountOutOfRange(f"s must be in [0, M], got s={s}, M={m_draws}")
    beta = float(beta)
    if not (0.0 < beta < 1.0):
        raise DomainError(f"beta must be in (0, 1), got {beta!r}")
    if s == m_draws:
        return 1.0
    return stats.beta_quantile(1.0 - beta, s + 1.0, float(m_draws - s))


def estimate_violation(
    x: np.ndarray,
    violation_oracle: Oracle,
    sampler: Sampler,
    m_draws: int,
    rng: stats.Rng,
) -> tuple[int, np.ndarray | None]:
    """Count violating posterior draws at the candidate x.

    Returns (s, per_constraint_counts); the second entry is None when
    the oracle reports only the aggregate.  Strict raw-sign semantics
    are the oracle's contract: a draw violates when any constraint
    residual is strictly positive, tolerance zero.
    """
    if m_draws < 1:
        raise CountOutOfRange(f"M must be >= 1, got {m_draws}")
    x = np.asarray(x, dtype=float)
    batch = sampler(rng, m_draws)
    result = violation_oracle(x, batch)
    if isinstance(result, tuple):
        violated, per_constraint = result
    else:
        violated, per_constraint = result, None
    violated = np.asarray(violated, dtype=bool)
    if violated.shape != (m_draws,):
        raise DomainError(
            f"oracle returned shape {violated.shape}, expected ({m_draws},)"
        )
    s = int(violated.sum())
    counts = None
    if per_constraint is not None:
        per_constraint = np.asarray(per_constraint, dtype=bool)
        if per_constraint.ndim != 2 or per_constraint.shape[0] != m_draws:
            raise DomainError("per-constraint flags must be (M, n_constraints)")
        counts = per_constraint.sum(axis=0).astype(int)
    return s, counts


@dataclass(frozen=True)
class Certificate:
    """Monte Carlo feasibility certificate for one decision."""

    M: int
    s: int
    v_hat: float
    upper_bound: float
    beta: float
    per_constraint_rates: tuple[float, ...] | None = None


def certify(
    x: np.ndarray,
    violation_oracle: Oracle,
    sampler: Sampler,
    m_draws: int,
    beta: float,
    rng: stats.Rng,
) -> Certificate:
    """Estimate the violation rate and wrap it with its exact upper bound."""
    s, counts = estimate_violation(x, violation_oracle, sampler, m_draws, rng)
    rates = None if counts is None else tuple(float(c) / m_draws for c in counts)
    return Certificate(
        M=m_draws,
        s=s,
        v_hat=s / m_draws,
        upper_bound=clopper_pearson_upper(s, m_draws, beta),
        beta=float(beta),
        per_constraint_rates=rates,
    )


def certificate_to_json(cert: Certificate) -> str:
    doc = {
        "M": cert.M,
        "s": cert.s,
        "v_hat": cert.v_hat,
        "upper_bound": cert.upper_bound,
        "beta": cert.beta,
        "per_constraint": None
        if cert.per_constraint_rates is None
        else list(cert.per_constraint_rates),
    }
    return json.dumps(doc)


def certificate_from_json(text: str) -> Certificate:
    try:
        doc = json.loads(text)
    except ValueError as exc:
        raise DomainError(f"certificate document is not valid JSON: {exc}") from exc
    try:
        rates = doc.get("per_constraint")
        return Certificate(
            M=int(doc["M"]),
            s=int(doc["s"]),
            v_hat=float(doc["v_hat"]),
            upper_bound=float(doc["upper_bound"]),
            beta=float(doc["beta"]),
            per_constraint_rates=None if rates is None else tuple(rates),
        )
    except (KeyError, TypeError, AttributeError, ValueError) as exc:
        raise DomainError(f"malformed certificate document: {exc}") from exc
