"""Small dense linear-programming kernel.

Solves ``min/max c.x  s.t.  A x = b, x >= 0`` with a two-phase tableau
simplex using Bland's anti-cycling rule. Every witness is re-verified by
direct substitution before it is returned. Instances in this package have
at most a few dozen variables, so robustness beats speed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ValidationError

__all__ = ["LpProblem", "LpSolution", "lp_solve"]

_PIVOT_TOL = 1e-9
_FEAS_TOL = 1e-9
_WITNESS_TOL = 1e-12


@dataclass(frozen=True)
class LpProblem:
    """Equality-constrained problem over the nonnegative orthant."""

    a: np.ndarray
    b: np.ndarray
    c: Optional[np.ndarray] = None
    maximize: bool = False

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.a, dtype=np.float64))
        b = np.atleast_1d(np.asarray(self.b, dtype=np.float64))
        if a.shape[0] != b.size:
            raise ValidationError(f"A has {a.shape[0]} rows but b has {b.size}")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ValidationError("LP data must be finite")
        c = self.c
        if c is not None:
            c = np.atleast_1d(np.asarray(c, dtype=np.float64))
            if c.size != a.shape[1]:
                raise ValidationError(f"c has {c.size} entries, expected {a.shape[1]}")
            if not np.all(np.isfinite(c)):
                raise ValidationError("LP objective must be finite")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)


@dataclass(frozen=True)
class LpSolution:
    """Outcome of :func:`lp_solve`."""

    status: str  # "feasible" | "infeasible" | "unbounded"
    witness: Optional[np.ndarray] = None
    value: Optional[float] = None

    @property
    def feasible(self) -> bool:
        return self.status == "feasible"


def _pivot(tab: np.ndarray, basis: list[int], row: int, col: int) -> None:
    tab[row] /= tab[row, col]
    for r in range(tab.shape[0]):
        if r != row and tab[r, col] != 0.0:
            tab[r] -= tab[r, col] * tab[row]
    basis[row] = col


def _bland_step(tab: np.ndarray, basis: list[int], n_cols: int) -> str:
    """One simplex step on a tableau whose last row holds reduced costs.

    Returns "optimal", "unbounded" or "pivoted".
    """
    m = tab.shape[0] - 1
    enter = -1
    for j in range(n_cols):
        if tab[m, j] < -_PIVOT_TOL:
            enter = j
            break
    if enter < 0:
        return "optimal"
    leave, best = -1, np.inf
    for i in range(m):
        if tab[i, enter] > _PIVOT_TOL:
            ratio = tab[i, -1] / tab[i, enter]
            # Bland: strict improvement, ties broken by smallest basis index
            if ratio < best - _PIVOT_TOL or (
                abs(ratio - best) <= _PIVOT_TOL
                and (leave < 0 or basis[i] < basis[leave])
            ):
                leave, best = i, ratio
    if leave < 0:
        return "unbounded"
    _pivot(tab, basis, leave, enter)
    return "pivoted"


def _run_simplex(tab: np.ndarray, basis: list[int], n_cols: int, max_pivots: int) -> str:
    for _ in range(max_pivots):
        state = _bland_step(tab, basis, n_cols)
        if state != "pivoted":
            return state
    raise RuntimeError("simplex exceeded its pivot budget")


def lp_solve(prob: LpProblem) -> LpSolution:
    """Feasibility / optimization over ``{x >= 0 : A x = b}``.

    Without an objective the returned witness is any basic feasible point.
    An unbounded objective is reported through ``status``, not an error.
    """
    a, b = prob.a.copy(), prob.b.copy()
    m, n = a.shape
    flip = b < 0
    a[flip] *= -1.0
    b[flip] *= -1.0
    max_pivots = 2000 + 200 * (m + n)

    # phase 1: artificial variables form the starting basis
    tab = np.zeros((m + 1, n + m + 1))
    tab[:m, :n] = a
    tab[:m, n : n + m] = np.eye(m)
    tab[:m, -1] = b
    basis = list(range(n, n + m))
    tab[m, n : n + m] = 1.0
    for i in range(m):  # price out the artificial basis
        tab[m] -= tab[i]
    if _run_simplex(tab, basis, n + m, max_pivots) == "unbounded":
        raise RuntimeError("phase-1 objective cannot be unbounded")
    scale = max(1.0, float(np.abs(b).max(initial=0.0)))
    if -tab[m, -1] > _FEAS_TOL * scale:
        return LpSolution(status="infeasible")

    # drive remaining artificials out of the basis; a row with no usable
    # original column is a redundant constraint and is neutralized
    drop_rows = []
    for i in range(m):
        if basis[i] >= n:
            piv = -1
            for j in range(n):
                if abs(tab[i, j]) > _PIVOT_TOL:
                    piv = j
                    break
            if piv >= 0:
                _pivot(tab, basis, i, piv)
            else:
                drop_rows.append(i)
    for i in drop_rows:
        tab[i, :] = 0.0
        tab[i, basis[i]] = 1.0  # keep the artificial pinned at zero

    def extract() -> np.ndarray:
        x = np.zeros(n)
        for i, j in enumerate(basis):
            if j < n:
                x[j] = tab[i, -1]
        return x

    def verified(x: np.ndarray, value: Optional[float]) -> LpSolution:
        # degenerate pivots can leave basic values a hair below zero;
        # clamp within the feasibility tolerance, then re-verify
        x = np.where((x < 0) & (x > -_FEAS_TOL), 0.0, x)
        resid = float(np.abs(prob.a @ x - prob.b).max(initial=0.0))
        if resid > _FEAS_TOL or np.any(x < -_WITNESS_TOL):
            raise RuntimeError(f"simplex witness failed re-verification (resid={resid})")
        return LpSolution(status="feasible", witness=x, value=value)

    if prob.c is None:
        return verified(extract(), None)

    # phase 2 on the same tableau (artificial columns barred by cost +inf
    # is unnecessary: they are nonbasic or pinned, so just never re-enter)
    sign = -1.0 if prob.maximize else 1.0
    tab[m, :] = 0.0
    tab[m, :n] = sign * prob.c
    for i in range(m):
        j = basis[i]
        if j < n and tab[m, j] != 0.0:
            tab[m] -= tab[m, j] * tab[i]
    state = _run_simplex(tab, basis, n, max_pivots)
    if state == "unbounded":
        return LpSolution(status="unbounded")
    x = extract()
    return verified(x, float(prob.c @ x))
