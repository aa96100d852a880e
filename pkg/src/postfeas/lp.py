"""Dense linear programming core.

Problems are stated as: maximize c'x subject to row constraints with
senses <=, >=, = and box bounds on x (either side may be infinite).
The solver is a two-phase revised simplex on the equality standard form
with bounded variables, Dantzig pricing, and Bland's rule as the
anti-cycling fallback.  A vertex-enumeration brute force serves as an
independent oracle for small instances.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    DomainError,
    NumericalBreakdown,
    SizeLimitExceeded,
)

__all__ = [
    "SENSES",
    "SolverTolerances",
    "LpProblem",
    "LpSolution",
    "StandardFormLp",
    "standardize",
    "solve_lp",
    "brute_force_lp",
    "max_violation",
    "problem_to_json",
    "problem_from_json",
    "solution_to_json",
    "solution_from_json",
]

SENSES = ("<=", ">=", "=")

_AT_LOWER = 0
_AT_UPPER = 1
_BASIC = 2

# Consecutive degenerate pivots before switching to Bland's rule.
_K_DEGENERATE = 50


@dataclass(frozen=True)
class SolverTolerances:
    """Numerical tolerances for the simplex solver."""

    feas: float = 1e-8
    obj: float = 1e-7
    pivot: float = 1e-10


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


class LpProblem:
    """Immutable LP: maximize objective'x under row constraints and bounds.

    constraints: iterable of (row, sense, rhs) with sense in {"<=", ">=", "="}.
    bounds: one (lo, hi) pair per variable; None means unbounded on that side.
    """

    __slots__ = ("objective", "rows", "senses", "rhs", "lower", "upper")

    def __init__(self, objective, constraints, bounds):
        c = np.asarray(objective, dtype=float)
        if c.ndim != 1 or c.size == 0:
            raise DimensionMismatch("objective must be a nonempty vector")
        n = c.size
        rows_list, senses, rhs_list = [], [], []
        for item in constraints:
            row, sense, rhs = item
            row = np.asarray(row, dtype=float)
            if row.shape != (n,):
                raise DimensionMismatch(
                    f"constraint row has shape {row.shape}, expected ({n},)"
                )
            if sense not in SENSES:
                raise DomainError(f"sense must be one of {SENSES}, got {sense!r}")
            rows_list.append(row)
            senses.append(sense)
            rhs_list.append(float(rhs))
        rows = np.array(rows_list, dtype=float) if rows_list else np.zeros((0, n))
        rhs = np.asarray(rhs_list, dtype=float)
        bounds = list(bounds)
        if len(bounds) != n:
            raise DimensionMismatch(f"expected {n} bound pairs, got {len(bounds)}")
        lower = np.empty(n)
        upper = np.empty(n)
        for j, (lo, hi) in enumerate(bounds):
            lower[j] = -math.inf if lo is None else float(lo)
            upper[j] = math.inf if hi is None else float(hi)
        if np.isnan(c).any() or np.isnan(rows).any() or np.isnan(rhs).any():
            raise DomainError("objective, rows, and rhs must be free of NaN")
        if np.isinf(c).any() or np.isinf(rows).any() or np.isinf(rhs).any():
            raise DomainError("objective, rows, and rhs must be finite")
        if np.isnan(lower).any() or np.isnan(upper).any():
            raise DomainError("bounds must not be NaN")
        if np.any(lower > upper):
            raise DomainError("each lower bound must be <= its upper bound")
        self.objective = _readonly(c)
        self.rows = _readonly(rows)
        self.senses = tuple(senses)
        self.rhs = _readonly(rhs)
        self.lower = _readonly(lower)
        self.upper = _readonly(upper)

    @property
    def n(self) -> int:
        return self.objective.size

    @property
    def m(self) -> int:
        return self.rhs.size

    def constraints(self):
        """Constraint triples (row, sense, rhs) as a list."""
        return [
            (self.rows[i].copy(), self.senses[i], float(self.rhs[i]))
            for i in range(self.m)
        ]

    def bounds(self):
        return [(float(self.lower[j]), float(self.upper[j])) for j in range(self.n)]


@dataclass(frozen=True)
class LpSolution:
    status: str  # "Optimal" | "Infeasible" | "Unbounded"
    x: np.ndarray | None
    objective_value: float | None
    iterations: int


def max_violation(problem: LpProblem, x) -> float:
    """Largest constraint or bound violation of x (0 when feasible)."""
    x = np.asarray(x, dtype=float)
    if x.shape != (problem.n,):
        raise DimensionMismatch(f"x has shape {x.shape}, expected ({problem.n},)")
    worst = 0.0
    if problem.m:
        ax = problem.rows @ x
        for i, sense in enumerate(problem.senses):
            r = ax[i] - problem.rhs[i]
            if sense == "<=":
                v = r
            elif sense == ">=":
                v = -r
            else:
                v = abs(r)
            worst = max(worst, v)
    lo_v = problem.lower - x
    hi_v = x - problem.upper
    finite_lo = np.isfinite(problem.lower)
    finite_hi = np.isfinite(problem.upper)
    if finite_lo.any():
        worst = max(worst, float(lo_v[finite_lo].max()))
    if finite_hi.any():
        worst = max(worst, float(hi_v[finite_hi].max()))
    return max(worst, 0.0)


# ---------------------------------------------------------------------------
# JSON round trip
# ---------------------------------------------------------------------------


def _bound_to_json(v: float):
    return None if math.isinf(v) else v


def problem_to_json(problem: LpProblem) -> str:
    doc = {
        "maximize": problem.objective.tolist(),
        "constraints": [
            {"row": problem.rows[i].tolist(), "sense": problem.senses[i],
             "rhs": float(problem.rhs[i])}
            for i in range(problem.m)
        ],
        "bounds": [
            [_bound_to_json(float(problem.lower[j])), _bound_to_json(float(problem.upper[j]))]
            for j in range(problem.n)
        ],
    }
    return json.dumps(doc)


def _loads(text: str, what: str):
    try:
        return json.loads(text)
    except ValueError as exc:
        raise DomainError(f"{what} is not valid JSON: {exc}") from exc


def problem_from_json(text: str) -> LpProblem:
    doc = _loads(text, "LP document")
    try:
        objective = doc["maximize"]
        constraints = [(c["row"], c["sense"], c["rhs"]) for c in doc["constraints"]]
        bounds = [(b[0], b[1]) for b in doc["bounds"]]
    except (KeyError, TypeError, IndexError) as exc:
        raise DomainError(f"malformed LP document: {exc}") from exc
    return LpProblem(objective, constraints, bounds)


def solution_to_json(sol: LpSolution) -> str:
    doc = {
        "status": sol.status,
        "x": None if sol.x is None else np.asarray(sol.x).tolist(),
        "objective_value": sol.objective_value,
        "iterations": sol.iterations,
    }
    return json.dumps(doc)


def solution_from_json(text: str) -> LpSolution:
    doc = _loads(text, "solution document")
    try:
        x = doc.get("x")
        return LpSolution(
            status=doc["status"],
            x=None if x is None else np.asarray(x, dtype=float),
            objective_value=doc.get("objective_value"),
            iterations=int(doc.get("iterations", 0)),
        )
    except (KeyError, TypeError, AttributeError, ValueError) as exc:
        raise DomainError(f"malformed solution document: {exc}") from exc


# ---------------------------------------------------------------------------
# Standard form
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StandardFormLp:
    """Equality form: maximize c'z + obj_offset s.t. A z = b with z >= 0
    (columns flagged free excepted) and finite or infinite uppers.

    The first n_structural columns correspond 1:1 to original variables
    through x_orig[j] = col_offset[j] + col_sign[j] * z[j].
    """

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    upper: np.ndarray
    free_mask: np.ndarray
    n_structural: int
    col_offset: np.ndarray
    col_sign: np.ndarray
    obj_offset: float

    def map_back(self, z: np.ndarray) -> np.ndarray:
        """Recover the original-space x from a standard-form point."""
        zs = z[: self.n_structural]
        return self.col_offset + self.col_sign * zs


def standardize(problem: LpProblem) -> StandardFormLp:
    """Convert to equality form with slacks and shifted bounds.

    Finite lower bounds are shifted to zero; variables with only a finite
    upper bound are negated so the upper bound becomes the shifted zero
    lower bound; doubly unbounded variables stay free.  Each inequality
    gains one slack in [0, inf).
    """
    n, m = problem.n, problem.m
    offset = np.zeros(n)
    sign = np.ones(n)
    upper_std = np.full(n, math.inf)
    free = np.zeros(n, dtype=bool)
    for j in range(n):
        lo, hi = problem.lower[j], problem.upper[j]
        if math.isfinite(lo):
            offset[j] = lo
            upper_std[j] = hi - lo if math.isfinite(hi) else math.inf
        elif math.isfinite(hi):
            offset[j] = hi
            sign[j] = -1.0
        else:
            free[j] = True
    n_slack = sum(1 for s in problem.senses if s != "=")
    A = np.zeros((m, n + n_slack))
    A[:, :n] = problem.rows * sign[np.newaxis, :]
    b = problem.rhs - problem.rows @ offset
    c = np.zeros(n + n_slack)
    c[:n] = problem.objective * sign
    upper = np.concatenate([upper_std, np.full(n_slack, math.inf)])
    free_mask = np.concatenate([free, np.zeros(n_slack, dtype=bool)])
    k = n
    for i, sense in enumerate(problem.senses):
        if sense == "<=":
            A[i, k] = 1.0
            k += 1
        elif sense == ">=":
            A[i, k] = -1.0
            k += 1
    return StandardFormLp(
        A=_readonly(A),
        b=_readonly(b),
        c=_readonly(c),
        upper=_readonly(upper),
        free_mask=free_mask,
        n_structural=n,
        col_offset=_readonly(offset),
        col_sign=_readonly(sign),
        obj_offset=float(problem.objective @ offset),
    )


# ---------------------------------------------------------------------------
# Bounded-variable revised simplex
# ---------------------------------------------------------------------------


class _BoundedSimplex:
    """Equality-form simplex over variables with lower bound 0 (or free)
    and optional finite uppers.  Maximizes.  Mutable workspace; one
    instance per solve."""

    def __init__(self, A, b, upper, free_mask, tol: SolverTolerances):
        self.m, n_real = A.shape
        self.n_real = n_real
        self.tol = tol
        m = self.m
        # artificial columns: identity signed to make the start basic
        # point nonnegative
        art_sign = np.where(b >= 0.0, 1.0, -1.0)
        self.A = np.hstack([A, np.diag(art_sign)])
        self.n_total = n_real + m
        self.upper = np.concatenate([upper, np.full(m, math.inf)])
        self.free = np.concatenate([free_mask, np.zeros(m, dtype=bool)])
        self.basis = np.arange(n_real, n_real + m)
        self.status = np.full(self.n_total, _AT_LOWER, dtype=np.int8)
        self.status[self.basis] = _BASIC
        self.binv = np.diag(art_sign).copy()
        self.xb = np.abs(b.copy())
        self.b = b
        self.iterations = 0
        self.pivots_since_refactor = 0
        self.max_iterations = 2000 + 200 * (m + self.n_total)

    # -- linear algebra upkeep -------------------------------------------

    def _nonbasic_rhs(self) -> np.ndarray:
        """b minus the contribution of nonbasic-at-upper columns."""
        au = np.flatnonzero(self.status == _AT_UPPER)
        if au.size == 0:
            return self.b.copy()
        return self.b - self.A[:, au] @ self.upper[au]

    def _refactor(self):
        basis_mat = self.A[:, self.basis]
        try:
            self.binv = np.linalg.inv(basis_mat)
        except np.linalg.LinAlgError as exc:
            raise NumericalBreakdown("basis matrix is singular") from exc
        self.xb = self.binv @ self._nonbasic_rhs()
        self.pivots_since_refactor = 0

    # -- one phase --------------------------------------------------------

    def run_phase(self, c: np.ndarray) -> str:
        """Iterate to optimality for the cost vector c.

        Returns "Optimal" or "Unbounded".  Raises NumericalBreakdown on
        irrecoverable pivots or iteration explosion.
        """
        tol = self.tol
        price_tol = 1e-9 * max(1.0, float(np.abs(c).max(initial=0.0)))
        bland = False
        degenerate_streak = 0
        span = self.upper.copy()  # lower bound is 0 (free vars never flip)
        while True:
            self.iterations += 1
            if self.iterations > self.max_iterations:
                raise NumericalBreakdown("simplex iteration limit exceeded")
            y = self.binv.T @ c[self.basis]
            d = c - y @ self.A
            nonbasic = self.status != _BASIC
            movable = nonbasic & (self.free | (span > 0.0))
            up_ok = movable & ((self.status == _AT_LOWER) | self.free) & (d > price_tol)
            dn_ok = movable & ((self.status == _AT_UPPER) | self.free) & (d < -price_tol)
            if not (up_ok.any() or dn_ok.any()):
                return "Optimal"
            if bland:
                cand = np.flatnonzero(up_ok | dn_ok)
                j = int(cand[0])
                direction = 1.0 if up_ok[j] else -1.0
            else:
                gain = np.where(up_ok, d, 0.0) + np.where(dn_ok, -d, 0.0)
                j = int(np.argmax(gain))
                direction = 1.0 if up_ok[j] else -1.0
            w = self.binv @ self.A[:, j]
            g = direction * w
            lower_b = np.where(self.free[self.basis], -math.inf, 0.0)
            upper_b = self.upper[self.basis]
            cand_step = np.full(self.m, math.inf)
            pos = g > tol.pivot
            neg = g < -tol.pivot
            with np.errstate(divide="ignore", invalid="ignore"):
                if pos.any():
                    cand_step[pos] = (self.xb[pos] - lower_b[pos]) / g[pos]
                if neg.any():
                    cand_step[neg] = (upper_b[neg] - self.xb[neg]) / (-g[neg])
            cand_step = np.maximum(cand_step, 0.0)
            flip_step = span[j] if not self.free[j] else math.inf
            basic_step = float(cand_step.min()) if self.m else math.inf
            step = min(basic_step, flip_step)
            if not math.isfinite(step):
                return "Unbounded"
            if step <= 1e-11:
                degenerate_streak += 1
                if degenerate_streak >= _K_DEGENERATE:
                    bland = True
            else:
                degenerate_streak = 0
                if bland and step > 1e-9:
                    bland = False
            if flip_step <= basic_step:
                # the entering variable runs to its opposite bound
                self.xb -= direction * step * w
                self.status[j] = _AT_UPPER if self.status[j] == _AT_LOWER else _AT_LOWER
                continue
            ties = np.flatnonzero(cand_step <= step + 1e-12)
            if bland:
                r = int(ties[np.argmin(self.basis[ties])])
            else:
                r = int(ties[np.argmax(np.abs(w[ties]))])
            pivot = w[r]
            if abs(pivot) < tol.pivot:
                if self.pivots_since_refactor > 0:
                    self._refactor()
                    continue
                raise NumericalBreakdown(
                    f"pivot magnitude {abs(pivot):.3e} below tolerance"
                )
            leaving = int(self.basis[r])
            enter_from = self.upper[j] if self.status[j] == _AT_UPPER else 0.0
            self.xb -= direction * step * w
            self.xb[r] = enter_from + direction * step
            self.status[leaving] = _AT_UPPER if g[r] < 0 else _AT_LOWER
            if self.free[leaving]:
                self.status[leaving] = _AT_LOWER  # free leaves exactly at 0
            self.status[j] = _BASIC
            self.basis[r] = j
            # product-form update of the basis inverse
            self.binv[r, :] /= pivot
            others = np.arange(self.m) != r
            self.binv[others, :] -= np.outer(w[others], self.binv[r, :])
            self.pivots_since_refactor += 1
            if self.pivots_since_refactor >= 128:
                self._refactor()

    # -- phase transitions -------------------------------------------------

    def phase_one(self) -> bool:
        """Minimize the artificial sum.  True when a feasible basis exists."""
        c1 = np.zeros(self.n_total)
        c1[self.n_real:] = -1.0
        outcome = self.run_phase(c1)
        if outcome != "Optimal":  # pragma: no cover - mathematically impossible
            raise NumericalBreakdown("phase one terminated abnormally")
        art_basic = self.basis >= self.n_real
        art_sum = float(self.xb[art_basic].sum()) if art_basic.any() else 0.0
        scale = max(1.0, float(np.abs(self.b).max(initial=0.0)))
        if art_sum > 1e-7 * scale:
            return False
        # pivot remaining artificials out of the basis where possible
        for r in np.flatnonzero(art_basic):
            row = self.binv[r] @ self.A[:, : self.n_real]
            candidates = np.flatnonzero(
                (self.status[: self.n_real] != _BASIC) & (np.abs(row) > self.tol.pivot)
            )
            if candidates.size:
                j = int(candidates[np.argmax(np.abs(row[candidates]))])
                w = self.binv @ self.A[:, j]
                pivot = w[r]
                leaving = int(self.basis[r])
                enter_from = self.upper[j] if self.status[j] == _AT_UPPER else 0.0
                self.xb[r] = enter_from
                self.status[leaving] = _AT_LOWER
                self.status[j] = _BASIC
                self.basis[r] = j
                self.binv[r, :] /= pivot
                others = np.arange(self.m) != r
                self.binv[others, :] -= np.outer(w[others], self.binv[r, :])
                self.pivots_since_refactor += 1
            else:
                self.xb[r] = 0.0  # dependent row: freeze its artificial at 0
        # artificials may never re-enter
        self.upper[self.n_real:] = 0.0
        self._refactor()
        return True

    def phase_two(self, c_real: np.ndarray) -> str:
        c2 = np.zeros(self.n_total)
        c2[: self.n_real] = c_real
        return self.run_phase(c2)

    def extract(self) -> np.ndarray:
        self._refactor()
        z = np.where(self.status[: self.n_real] == _AT_UPPER,
                     self.upper[: self.n_real], 0.0)
        own = self.basis < self.n_real
        z[self.basis[own]] = self.xb[own]
        return z


def solve_lp(problem: LpProblem, tolerances: SolverTolerances | None = None) -> LpSolution:
    """Solve the LP with the two-phase bounded-variable simplex.

    Deterministic: identical problems produce identical solutions,
    pivot for pivot.  Raises NumericalBreakdown when pivoting degrades
    beyond recovery.
    """
    tol = tolerances or SolverTolerances()
    std = standardize(problem)
    if np.any(std.upper < 0.0):
        # a shifted upper below zero means lower > upper; constructor blocks this
        raise DomainError("inconsistent bounds")
    solver = _BoundedSimplex(std.A.copy(), std.b.copy(), std.upper.copy(),
                             std.free_mask.copy(), tol)
    if not solver.phase_one():
        return LpSolution("Infeasible", None, None, solver.iterations)
    outcome = solver.phase_two(std.c.copy())
    if outcome == "Unbounded":
        return LpSolution("Unbounded", None, None, solver.iterations)
    z = solver.extract()
    x = std.map_back(z)
    # clean tiny drift against the original box
    x = np.minimum(np.maximum(x, problem.lower), problem.upper)
    resid = max_violation(problem, x)
    scale = max(1.0, float(np.abs(problem.rhs).max(initial=0.0)))
    if resid > 10.0 * tol.feas * scale:
        raise NumericalBreakdown(
            f"solution residual {resid:.3e} exceeds feasibility tolerance"
        )
    value = float(problem.objective @ x)
    x = _readonly(x)
    return LpSolution("Optimal", x, value, solver.iterations)


# ---------------------------------------------------------------------------
# Brute-force oracle
# ---------------------------------------------------------------------------

_BF_MAX_N = 6
_BF_MAX_ROWS = 24
_BF_BOX = 1e7


def _enumerate_best(hyperplanes, feas_rows, n, objective, tol_feas):
    """Max of objective over feasible intersections of n hyperplanes.

    hyperplanes: list of (coef, rhs) candidate active rows.
    feas_rows: list of (coef, sense, rhs) that any point must satisfy.
    Returns (best_value, best_x, n_solved) with best_x None when no
    feasible vertex exists.
    """
    best_val = -math.inf
    best_x = None
    solved = 0
    coefs = [h[0] for h in hyperplanes]
    rhss = [h[1] for h in hyperplanes]
    for combo in itertools.combinations(range(len(hyperplanes)), n):
        mat = np.array([coefs[i] for i in combo])
        vec = np.array([rhss[i] for i in combo])
        try:
            x = np.linalg.solve(mat, vec)
        except np.linalg.LinAlgError:
            continue
        solved += 1
        if not np.all(np.isfinite(x)):
            continue
        if np.max(np.abs(mat @ x - vec)) > 1e-6 * max(1.0, np.max(np.abs(vec))):
            continue  # nearly singular system, solution unreliable
        ok = True
        for coef, sense, rhs in feas_rows:
            r = float(coef @ x) - rhs
            allow = tol_feas * max(1.0, abs(rhs), float(np.abs(coef @ x)))
            if sense == "<=" and r > allow:
                ok = False
                break
            if sense == ">=" and r < -allow:
                ok = False
                break
            if sense == "=" and abs(r) > allow:
                ok = False
                break
        if not ok:
            continue
        val = float(objective @ x)
        if val > best_val + 1e-12:
            best_val = val
            best_x = x
    return best_val, best_x, solved


def brute_force_lp(problem: LpProblem, tol_feas: float = 1e-9) -> LpSolution:
    """Reference solve by enumerating candidate vertices.

    Guard limits: n <= 6 and rows + finite bounds <= 24.  A large box is
    added on any side a variable lacks, so that the enumerated region is
    a polytope; unboundedness is then decided by enumerating the
    recession directions on the unit box.
    """
    n, m = problem.n, problem.m
    n_finite = int(np.isfinite(problem.lower).sum() + np.isfinite(problem.upper).sum())
    if n > _BF_MAX_N:
        raise SizeLimitExceeded(f"brute force requires n <= {_BF_MAX_N}, got {n}")
    if m + n_finite > _BF_MAX_ROWS:
        raise SizeLimitExceeded(
            f"brute force requires rows + finite bounds <= {_BF_MAX_ROWS}, "
            f"got {m + n_finite}"
        )
    eye = np.eye(n)
    hyper = [(problem.rows[i], float(problem.rhs[i])) for i in range(m)]
    feas = [(problem.rows[i], problem.senses[i], float(problem.rhs[i])) for i in range(m)]
    for j in range(n):
        lo, hi = problem.lower[j], problem.upper[j]
        if math.isfinite(lo):
            hyper.append((eye[j], float(lo)))
            feas.append((eye[j], ">=", float(lo)))
        else:
            hyper.append((eye[j], -_BF_BOX))
        if math.isfinite(hi):
            hyper.append((eye[j], float(hi)))
            feas.append((eye[j], "<=", float(hi)))
        else:
            hyper.append((eye[j], _BF_BOX))
    best_val, best_x, solved = _enumerate_best(hyper, feas, n, problem.objective, tol_feas)
    if best_x is None:
        return LpSolution("Infeasible", None, None, solved)
    # recession check on the unit box: any improving ray means unbounded
    rec_hyper = []
    rec_feas = []
    for i in range(m):
        rec_hyper.append((problem.rows[i], 0.0))
        rec_feas.append((problem.rows[i], problem.senses[i], 0.0))
    for j in range(n):
        if math.isfinite(problem.lower[j]):
            rec_feas.append((eye[j], ">=", 0.0))
            rec_hyper.append((eye[j], 0.0))
        if math.isfinite(problem.upper[j]):
            rec_feas.append((eye[j], "<=", 0.0))
            if not math.isfinite(problem.lower[j]):
                rec_hyper.append((eye[j], 0.0))
        rec_hyper.append((eye[j], -1.0))
        rec_hyper.append((eye[j], 1.0))
        rec_feas.append((eye[j], ">=", -1.0))
        rec_feas.append((eye[j], "<=", 1.0))
    rec_val, rec_x, solved2 = _enumerate_best(
        rec_hyper, rec_feas, n, problem.objective, tol_feas
    )
    if rec_x is not None and rec_val > 1e-9 * max(1.0, float(np.abs(problem.objective).max())):
        return LpSolution("Unbounded", None, None, solved + solved2)
    return LpSolution("Optimal", _readonly(best_x), best_val, solved + solved2)
