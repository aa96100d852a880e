"""Conjugate posteriors for capacities and detection probabilities.

Capacity rows follow a Normal-Inverse-Gamma linear regression whose
one-step-ahead predictive is Student-t.  Detection probabilities follow
independent Beta-Binomial cells.  A small ordinary-least-squares fit is
included as the frequentist comparator.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import stats
from .errors import (
    CountOutOfRange,
    DimensionMismatch,
    DomainError,
    EmptyInput,
    RankDeficient,
    SingularPrecision,
)

__all__ = [
    "NigPrior",
    "NigPosterior",
    "PredictiveT",
    "OlsFit",
    "BetaPosteriorMatrix",
    "PanelData",
    "fit_nig",
    "predictive",
    "predictive_quantile",
    "sample_predictive",
    "predictive_array",
    "fit_ols",
    "ols_predictive_quantile",
    "fit_beta_binomial",
    "sample_q_matrix",
    "q_matrix_draws",
    "load_panel_data",
]


def _chol_with_jitter(mat: np.ndarray) -> np.ndarray:
    """Cholesky factor of a symmetric matrix, escalating jitter on failure.

    Jitter starts at 1e-10 * mean diagonal and grows tenfold, three extra
    attempts, before giving up with SingularPrecision.
    """
    sym = 0.5 * (mat + mat.T)
    try:
        return np.linalg.cholesky(sym)
    except np.linalg.LinAlgError:
        pass
    base = 1e-10 * max(float(np.trace(sym)) / max(sym.shape[0], 1), 1e-300)
    jitter = base
    for _ in range(3):
        try:
            return np.linalg.cholesky(sym + jitter * np.eye(sym.shape[0]))
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise SingularPrecision("precision matrix is not positive definite")


def _chol_solve(chol: np.ndarray, b: np.ndarray) -> np.ndarray:
    y = np.linalg.solve(chol, b)
    return np.linalg.solve(chol.T, y)


@dataclass(frozen=True)
class NigPrior:
    """Normal-Inverse-Gamma prior (mean, precision, shape, rate)."""

    mean: np.ndarray
    precision: np.ndarray
    shape: float
    rate: float

    @classmethod
    def default(cls, dim: int) -> "NigPrior":
        """Weak default: zero mean, 1e-2 I precision, shape 2, rate 2."""
        return cls(
            mean=np.zeros(dim),
            precision=1e-2 * np.eye(dim),
            shape=2.0,
            rate=2.0,
        )


@dataclass(frozen=True)
class NigPosterior:
    mean: np.ndarray
    precision: np.ndarray
    shape: float
    rate: float
    n_obs: int


@dataclass(frozen=True)
class PredictiveT:
    """Location-scale Student-t law of the next observation."""

    dof: float
    loc: float
    scale: float


@dataclass(frozen=True)
class OlsFit:
    coef: np.ndarray
    s2: float
    xtx_inv: np.ndarray
    dof_resid: int


def fit_nig(design: np.ndarray, y: np.ndarray, prior: NigPrior) -> NigPosterior:
    """Conjugate update of a Normal-Inverse-Gamma regression prior.

    precision_n = precision_0 + X'X
    mean_n      = precision_n^{-1} (precision_0 mean_0 + X'y)
    shape_n     = shape_0 + n/2
    rate_n      = rate_0 + ((y - X mean_n)'y + (mean_0 - mean_n)'precision_0 mean_0) / 2

    The rate uses the residual form, algebraically equal to the textbook
    rate_0 + (y'y + mean_0' precision_0 mean_0 - mean_n' precision_n mean_n)/2
    but without the large-term cancellation.
    """
    X = np.asarray(design, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2:
        raise DimensionMismatch("design must be a 2-d array")
    n, d = X.shape
    if y.shape != (n,):
        raise DimensionMismatch(f"y has shape {y.shape}, expected ({n},)")
    m0 = np.asarray(prior.mean, dtype=float)
    lam0 = np.asarray(prior.precision, dtype=float)
    if m0.shape != (d,) or lam0.shape != (d, d):
        raise DimensionMismatch("prior dimensions do not match the design")
    if prior.shape <= 0.0 or prior.rate <= 0.0:
        raise DomainError("prior shape and rate must be positive")
    lam_n = lam0 + X.T @ X
    chol = _chol_with_jitter(lam_n)
    m_n = _chol_solve(chol, lam0 @ m0 + X.T @ y)
    shape_n = prior.shape + 0.5 * n
    rate_n = prior.rate + 0.5 * (
        float((y - X @ m_n) @ y) + float((m0 - m_n) @ (lam0 @ m0))
    )
    return NigPosterior(
        mean=m_n, precision=lam_n, shape=shape_n, rate=rate_n, n_obs=n
    )


def predictive(post: NigPosterior, x_ctx: np.ndarray) -> PredictiveT:
    """Student-t one-step predictive at context x_ctx.

    dof = 2 shape_n, loc = x'mean_n,
    scale = sqrt(rate_n/shape_n * (1 + x' precision_n^{-1} x)).
    """
    x = np.asarray(x_ctx, dtype=float)
    if x.shape != post.mean.shape:
        raise DimensionMismatch(
            f"context has shape {x.shape}, expected {post.mean.shape}"
        )
    chol = _chol_with_jitter(post.precision)
    h = float(x @ _chol_solve(chol, x))
    scale2 = (post.rate / post.shape) * (1.0 + h)
    if scale2 <= 0.0:
        raise DomainError("nonpositive predictive variance")
    return PredictiveT(dof=2.0 * post.shape, loc=float(x @ post.mean),
                       scale=float(np.sqrt(scale2)))


def predictive_quantile(pred: PredictiveT, p: float) -> float:
    """p-quantile of the Student-t predictive."""
    return pred.loc + pred.scale * stats.student_t_quantile(p, pred.dof)


def sample_predictive(pred: PredictiveT, rng: stats.Rng) -> float:
    """One draw from the Student-t predictive."""
    return pred.loc + pred.scale * stats.sample_student_t(rng, pred.dof)


def predictive_array(pred: PredictiveT, rng: stats.Rng, size) -> np.ndarray:
    """Array of predictive draws."""
    return pred.loc + pred.scale * stats.student_t_array(rng, pred.dof, size)


def fit_ols(design: np.ndarray, y: np.ndarray) -> OlsFit:
    """Ordinary least squares with the classical variance estimate.

    Requires n > d and a full-column-rank design; raises RankDeficient
    otherwise.
    """
    X = np.asarray(design, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2:
        raise DimensionMismatch("design must be a 2-d array")
    n, d = X.shape
    if y.shape != (n,):
        raise DimensionMismatch(f"y has shape {y.shape}, expected ({n},)")
    if n <= d:
        raise RankDeficient(f"need more observations than regressors: n={n}, d={d}")
    gram = X.T @ X
    try:
        chol = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError as exc:
        raise RankDeficient("design matrix is rank deficient") from exc
    coef = _chol_solve(chol, X.T @ y)
    resid = y - X @ coef
    dof = n - d
    s2 = float(resid @ resid) / dof
    xtx_inv = _chol_solve(chol, np.eye(d))
    return OlsFit(coef=coef, s2=s2, xtx_inv=xtx_inv, dof_resid=dof)


def ols_predictive_quantile(fit: OlsFit, x_ctx: np.ndarray, p: float) -> float:
    """Frequentist t prediction quantile at context x_ctx."""
    x = np.asarray(x_ctx, dtype=float)
    if x.shape != fit.coef.shape:
        raise DimensionMismatch(
            f"context has shape {x.shape}, expected {fit.coef.shape}"
        )
    loc = float(x @ fit.coef)
    se = float(np.sqrt(fit.s2 * (1.0 + x @ fit.xtx_inv @ x)))
    if se == 0.0:
        return loc
    return loc + se * stats.student_t_quantile(p, fit.dof_resid)


# ---------------------------------------------------------------------------
# Beta-Binomial detection matrix
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BetaPosteriorMatrix:
    """Independent Beta posteriors per (cluster, gene) cell."""

    a: np.ndarray  # (J, K)
    b: np.ndarray  # (J, K)
    cluster_sizes: np.ndarray  # (J,)
    detection_counts: np.ndarray  # (J, K)


def fit_beta_binomial(
    detected: np.ndarray,
    cluster_sizes: np.ndarray,
    a0: float = 1.0,
    b0: float = 1.0,
) -> BetaPosteriorMatrix:
    """Beta posterior per cell: a = a0 + s, b = b0 + n - s.

    detected is (J, K) counts; cluster_sizes is (J,) cells per cluster.
    The uniform prior a0 = b0 = 1 is the default.  A zero-cell cluster is
    a vacuous update: its posterior row equals the prior.
    """
    s = np.asarray(detected, dtype=float)
    n = np.asarray(cluster_sizes, dtype=float)
    if s.ndim != 2:
        raise DimensionMismatch("detected must be a 2-d array")
    if n.shape != (s.shape[0],):
        raise DimensionMismatch(
            f"cluster_sizes has shape {n.shape}, expected ({s.shape[0]},)"
        )
    if a0 <= 0.0 or b0 <= 0.0:
        raise DomainError("prior pseudo-counts must be positive")
    if np.any(n < 0):
        raise CountOutOfRange("cluster sizes must be nonnegative")
    if np.any(s < 0) or np.any(s > n[:, None]):
        raise CountOutOfRange("detected counts must lie in [0, n_cells]")
    a = a0 + s
    b = b0 + n[:, None] - s
    return BetaPosteriorMatrix(a=a, b=b, cluster_sizes=n, detection_counts=s)


def sample_q_matrix(post: BetaPosteriorMatrix, rng: stats.Rng) -> np.ndarray:
    """One (J, K) draw of detection probabilities."""
    return stats.beta_array(rng, post.a, post.b)


def q_matrix_draws(post: BetaPosteriorMatrix, rng: stats.Rng, count: int) -> np.ndarray:
    """Stack of count (J, K) detection-probability draws."""
    if count < 1:
        raise CountOutOfRange(f"count must be >= 1, got {count}")
    j, k = post.a.shape
    a = np.broadcast_to(post.a, (count, j, k))
    b = np.broadcast_to(post.b, (count, j, k))
    return stats.beta_array(rng, a, b, (count, j, k))


# ---------------------------------------------------------------------------
# CSV ingestion for the panel pipeline
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PanelData:
    """Aligned panel inputs: genes ordered as in the weights file,
    clusters sorted by identifier."""

    genes: tuple[str, ...]
    clusters: tuple[str, ...]
    weights: np.ndarray  # (K,)
    detected: np.ndarray  # (J, K)
    cluster_sizes: np.ndarray  # (J,)


def _read_csv_rows(path, expected_header):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EmptyInput(f"{path}: empty file")
        if [h.strip() for h in header] != list(expected_header):
            raise DomainError(
                f"{path}: expected header {','.join(expected_header)}, "
                f"got {','.join(header)}"
            )
        rows = [row for row in reader if row and any(cell.strip() for cell in row)]
        for row in rows:
            if len(row) != len(expected_header):
                raise DomainError(
                    f"{path}: row {row!r} has {len(row)} fields, "
                    f"expected {len(expected_header)}"
                )
        return rows



def _parse_number(cell: str, kind, path, what: str):
    try:
        return kind(cell)
    except ValueError as exc:
        raise DomainError(f"{path}: {what} {cell!r} is not numeric") from exc

def load_panel_data(detections_path, clusters_path, weights_path) -> PanelData:
    """Read detections.csv, clusters.csv, and weights.csv.

    weights.csv fixes the candidate gene pool and its order; clusters are
    sorted by name.  (cluster, gene) pairs absent from detections.csv are
    zero detections.  Unknown genes or clusters in detections.csv are
    errors.
    """
    weight_rows = _read_csv_rows(weights_path, ("gene", "weight"))
    genes: list[str] = []
    weights: list[float] = []
    seen = set()
    for row in weight_rows:
        gene = row[0].strip()
        if gene in seen:
            raise DomainError(f"duplicate gene {gene!r} in weights file")
        seen.add(gene)
        genes.append(gene)
        weights.append(_parse_number(row[1], float, weights_path, "weight"))
    if not genes:
        raise EmptyInput("weights file lists no genes")

    cluster_rows = _read_csv_rows(clusters_path, ("cluster", "n_cells"))
    sizes: dict[str, int] = {}
    for row in cluster_rows:
        name = row[0].strip()
        if name in sizes:
            raise DomainError(f"duplicate cluster {name!r} in clusters file")
        n_cells = _parse_number(row[1], int, clusters_path, "n_cells")
        if n_cells < 1:
            raise CountOutOfRange(f"cluster {name!r} has n_cells < 1")
        sizes[name] = n_cells
    if not sizes:
        raise EmptyInput("clusters file lists no clusters")
    clusters = tuple(sorted(sizes))
    cluster_index = {name: j for j, name in enumerate(clusters)}
    gene_index = {g: k for k, g in enumerate(genes)}

    detected = np.zeros((len(clusters), len(genes)))
    det_rows = _read_csv_rows(detections_path, ("cluster", "gene", "detected_count"))
    for row in det_rows:
        cname, gname = row[0].strip(), row[1].strip()
        if cname not in cluster_index:
            raise DomainError(f"detections reference unknown cluster {cname!r}")
        if gname not in gene_index:
            raise DomainError(f"detections reference unknown gene {gname!r}")
        count = _parse_number(row[2], int, detections_path, "detected_count")
        j, k = cluster_index[cname], gene_index[gname]
        if count < 0 or count > sizes[cname]:
            raise CountOutOfRange(
                f"detected_count {count} outside [0, {sizes[cname]}] "
                f"for ({cname}, {gname})"
            )
        detected[j, k] = count
    return PanelData(
        genes=tuple(genes),
        clusters=clusters,
        weights=np.asarray(weights, dtype=float),
        detected=detected,
        cluster_sizes=np.asarray([sizes[c] for c in clusters], dtype=float),
    )
