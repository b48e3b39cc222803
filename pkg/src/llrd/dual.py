"""Single-parameter dual form of R(D) and classical-problem translations.

For distortion measures admitting an exponential tilt with an x-only
normalizer mu(x, lam) and a compatible output marginal, R(D) collapses to
a one-dimensional concave maximization over the feasible slope set. The
same tilt turns any such classical problem into a log-likelihood problem
whose distortion axis is an affine image of the original one. A small
closed-form catalog covers the binary/Hamming and Gaussian/MSE families.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import lp
from .core import Channel, LogBase, Pmf, convert, entropy
from .errors import InapplicableError, InfeasibleError, ValidationError
from .loglik import DistortionMatrix, distortion_range

__all__ = [
    "MuStatus",
    "MuSolution",
    "TiltSolution",
    "AffineMap",
    "Family",
    "ClosedForm",
    "DualResult",
    "Translation",
    "tilt_matrix",
    "solve_mu",
    "coupling_feasible",
    "lambda_feasible_set",
    "default_lambda_grid",
    "dual_rdf",
    "translate_to_loglik",
    "closed_form_eval",
    "closed_form_range",
]

_MU_RESID_TOL = 1e-9
_MU_SIGN_TOL = 1e-12


class MuStatus(enum.Enum):
    UNIQUE = "unique"
    NON_UNIQUE = "non_unique"
    INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class MuSolution:
    """Solution of the normalizer system sum_x mu(x) exp(-lam d(x,y)) = 1."""

    status: MuStatus
    mu: Optional[np.ndarray] = None
    residual: float = math.inf

    @property
    def feasible(self) -> bool:
        return self.status is not MuStatus.INFEASIBLE


@dataclass(frozen=True)
class TiltSolution:
    """Joint verdict for one slope: normalizer plus coupling witness."""

    lam: float
    feasible: bool
    mu: Optional[np.ndarray] = None
    q_y: Optional[Pmf] = None
    residuals: Optional[dict] = None


@dataclass(frozen=True)
class AffineMap:
    """Distortion translation D~ = lam0 * D + offset (strictly increasing)."""

    lam0: float
    offset: float

    def __post_init__(self):
        if self.lam0 <= 0:
            raise ValidationError("affine translation needs lam0 > 0")

    def forward(self, d: float) -> float:
        return self.lam0 * d + self.offset

    def inverse(self, d_tilde: float) -> float:
        return (d_tilde - self.offset) / self.lam0


@dataclass(frozen=True)
class DualResult:
    """Maximum of the dual objective g(lam) = H(X) + E[log mu] - lam D."""

    rate: float  # nats
    lam_star: float
    mu: np.ndarray
    tilt: TiltSolution


@dataclass(frozen=True)
class Translation:
    """A classical problem recast as a log-likelihood problem."""

    channel: Channel  # P(x|u), input alphabet = reconstruction symbols
    affine: AffineMap


# ---------------------------------------------------------------------------
# tilt normalizer and coupling feasibility
# ---------------------------------------------------------------------------

def tilt_matrix(d: DistortionMatrix, lam: float) -> np.ndarray:
    """Entrywise exp(-lam * d); +inf entries become exact zeros."""
    if lam <= 0:
        raise ValidationError(f"tilt slope {lam} must be > 0")
    with np.errstate(over="ignore"):
        out = np.where(np.isfinite(d.entries), np.exp(-lam * d.entries), 0.0)
    return out


def solve_mu(d: DistortionMatrix, lam: float) -> MuSolution:
    """Solve V^T mu = 1 for the x-only tilt normalizer.

    A full-rank system is solved by least squares and accepted when the
    residual is below 1e-9 with mu >= -1e-12 componentwise. When the
    solution set is affine (rank-deficient V), feasibility is decided by
    an LP over that set intersected with the nonnegative orthant, not by
    pseudo-inverse sign.
    """
    v = tilt_matrix(d, lam)
    n_x = v.shape[0]
    ones = np.ones(v.shape[1])
    s = np.linalg.svd(v.T, compute_uv=False)
    rank = int(np.sum(s > max(s[0], 1.0) * 1e-12)) if s.size else 0
    if rank < n_x:
        sol = lp.lp_solve(lp.LpProblem(v.T, ones))
        if not sol.feasible:
            return MuSolution(status=MuStatus.INFEASIBLE)
        mu = sol.witness
        resid = float(np.abs(v.T @ mu - ones).max())
        return MuSolution(status=MuStatus.NON_UNIQUE, mu=mu, residual=resid)
    mu, *_ = np.linalg.lstsq(v.T, ones, rcond=None)
    resid = float(np.abs(v.T @ mu - ones).max())
    if resid > _MU_RESID_TOL or np.any(mu < -_MU_SIGN_TOL):
        return MuSolution(status=MuStatus.INFEASIBLE, mu=mu, residual=resid)
    return MuSolution(status=MuStatus.UNIQUE, mu=np.maximum(mu, 0.0), residual=resid)


def coupling_feasible(
    p: Pmf, d: DistortionMatrix, lam: float, mu: np.ndarray
) -> TiltSolution:
    """Existence of an output marginal matching the tilt to the source.

    Decides feasibility of {q >= 0 : sum_y q(y) mu(x) exp(-lam d(x,y)) =
    p(x) for all x, sum_y q(y) = 1} by LP and stores the witness.
    """
    if p.alphabet != d.source_alphabet:
        raise ValidationError("pmf alphabet does not match distortion source")
    v = tilt_matrix(d, lam)
    mu = np.asarray(mu, dtype=np.float64)
    probs = p.probs
    if np.any((mu <= 0) & (probs > 0)):
        return TiltSolution(lam=lam, feasible=False, mu=mu)
    rows, rhs = [], []
    for i in range(len(probs)):
        if mu[i] <= 0:  # p(x) = 0 too: constraint is vacuous
            continue
        rows.append(mu[i] * v[i, :])
        rhs.append(probs[i])
    rows.append(np.ones(v.shape[1]))
    rhs.append(1.0)
    sol = lp.lp_solve(lp.LpProblem(np.array(rows), np.array(rhs)))
    if not sol.feasible:
        return TiltSolution(lam=lam, feasible=False, mu=mu)
    q = np.maximum(sol.witness, 0.0)
    q = q / q.sum()
    norm_resid = float(np.abs(v.T @ mu - 1.0).max())
    active = (probs > 0) & (mu > 0)
    coup_resid = float(
        np.abs((v @ q)[active] - probs[active] / mu[active]).max(initial=0.0)
    )
    return TiltSolution(
        lam=lam,
        feasible=True,
        mu=mu,
        q_y=Pmf(d.recon_alphabet, q),
        residuals={"normalizer": norm_resid, "coupling": coup_resid},
    )


def _tilt_at(p: Pmf, d: DistortionMatrix, lam: float) -> TiltSolution:
    ms = solve_mu(d, lam)
    if not ms.feasible:
        return TiltSolution(lam=lam, feasible=False)
    return coupling_feasible(p, d, lam, ms.mu)


def lambda_feasible_set(
    p: Pmf, d: DistortionMatrix, lam_grid: Sequence[float]
) -> list[TiltSolution]:
    """Raw per-point membership verdicts for the slope feasibility set."""
    if len(lam_grid) == 0:
        raise ValidationError("lambda grid is empty")
    if any(l <= 0 for l in lam_grid):
        raise ValidationError("lambda grid entries must be > 0")
    return [_tilt_at(p, d, float(l)) for l in lam_grid]


def default_lambda_grid(d: DistortionMatrix, n: int = 60) -> tuple[float, ...]:
    """Log-spaced slopes spanning [1e-2, 1e2] scaled by the distortion size."""
    fin = d.entries[np.isfinite(d.entries)]
    scale = float(fin.max()) if fin.size and fin.max() > 0 else 1.0
    return tuple(float(x) for x in np.geomspace(1e-2 / scale, 1e2 / scale, n))


# ---------------------------------------------------------------------------
# single-parameter dual
# ---------------------------------------------------------------------------

def _dual_objective(p: Pmf, tilt: TiltSolution, dist: float) -> float:
    probs = p.probs
    mu = tilt.mu
    active = probs > 0
    if np.any(mu[active] <= 0):
        return -math.inf
    e_log_mu = float(np.sum(probs[active] * np.log(mu[active])))
    return entropy(p) + e_log_mu - tilt.lam * dist


def _bisect_boundary(
    p: Pmf, d: DistortionMatrix, lam_bad: float, lam_good: float
) -> float:
    """Feasibility boundary between an infeasible and a feasible slope."""
    for _ in range(80):
        mid = 0.5 * (lam_bad + lam_good)
        if _tilt_at(p, d, mid).feasible:
            lam_good = mid
        else:
            lam_bad = mid
        if abs(lam_good - lam_bad) <= 1e-12 * max(1.0, lam_good):
            break
    return lam_good


def dual_rdf(
    p: Pmf,
    d: DistortionMatrix,
    dist: float,
    lam_grid: Optional[Sequence[float]] = None,
    refine: bool = True,
) -> DualResult:
    """Evaluate R(D) as max over feasible slopes of H(X) + E[log mu] - lam D.

    Scans the grid for feasibility, then refines around the best grid
    point by golden section (after pinning any feasibility boundary by
    bisection so the refinement bracket is entirely feasible).

    Raises:
        InapplicableError: the feasibility set is empty on the grid.
        InfeasibleError: D outside the feasible distortion range.
    """
    fr = distortion_range(p, d)
    if not (fr.d_min - 1e-9 <= dist <= fr.d_max + 1e-9):
        raise InfeasibleError(
            f"distortion {dist} outside feasible range [{fr.d_min}, {fr.d_max}]"
        )
    grid = sorted(lam_grid) if lam_grid is not None else list(default_lambda_grid(d))
    verdicts = lambda_feasible_set(p, d, grid)
    feas = [t for t in verdicts if t.feasible]
    if not feas:
        raise InapplicableError(
            "single-parameter dual form inapplicable: no feasible slope in the grid"
        )
    values = [(t, _dual_objective(p, t, dist)) for t in feas]
    best, best_val = max(values, key=lambda tv: tv[1])

    # extend upward while the top grid point keeps winning
    while best.lam == grid[-1] and len(grid) < 200:
        lam_next = grid[-1] * 2.0
        t = _tilt_at(p, d, lam_next)
        grid.append(lam_next)
        verdicts.append(t)
        if not t.feasible:
            break
        val = _dual_objective(p, t, dist)
        if val <= best_val:
            break
        best, best_val = t, val

    if not refine:
        return DualResult(rate=max(best_val, 0.0), lam_star=best.lam, mu=best.mu, tilt=best)

    idx = grid.index(best.lam)
    lo = grid[idx - 1] if idx > 0 else best.lam
    hi = grid[idx + 1] if idx + 1 < len(grid) else best.lam
    if idx > 0 and not verdicts[idx - 1].feasible:
        lo = _bisect_boundary(p, d, grid[idx - 1], best.lam)
    if idx + 1 < len(grid) and not verdicts[idx + 1].feasible:
        hi = _bisect_boundary(p, d, grid[idx + 1], best.lam)

    cache: dict[float, tuple[TiltSolution, float]] = {
        best.lam: (best, best_val)
    }

    def g(lam: float) -> float:
        if lam not in cache:
            t = _tilt_at(p, d, lam)
            cache[lam] = (t, _dual_objective(p, t, dist) if t.feasible else -math.inf)
        return cache[lam][1]

    phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    x1 = b - phi * (b - a)
    x2 = a + phi * (b - a)
    f1, f2 = g(x1), g(x2)
    while b - a > 1e-8 * max(1.0, b):
        if f1 >= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - phi * (b - a)
            f1 = g(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + phi * (b - a)
            f2 = g(x2)
    candidates = [(t, val) for (t, val) in cache.values() if val > -math.inf]
    tilt, val = max(candidates, key=lambda tv: tv[1])
    return DualResult(rate=max(val, 0.0), lam_star=tilt.lam, mu=tilt.mu, tilt=tilt)


# ---------------------------------------------------------------------------
# translation into a log-likelihood problem
# ---------------------------------------------------------------------------

def translate_to_loglik(p: Pmf, d: DistortionMatrix, lam0: float) -> Translation:
    """Recast (p, d) at slope lam0 as a log-likelihood problem.

    The tilt P(x|y) = mu(x) exp(-lam0 d(x,y)) becomes the conditional
    channel, and distortions translate through D~ = lam0 D - E[log mu].
    """
    tilt = _tilt_at(p, d, lam0)
    if not tilt.feasible:
        raise InfeasibleError(f"slope {lam0} is not in the feasibility set")
    v = tilt_matrix(d, lam0)
    mat = tilt.mu[:, None] * v  # (x, y): columns sum to 1 up to solver residual
    mat = mat / mat.sum(axis=0, keepdims=True)
    channel = Channel(d.recon_alphabet, d.source_alphabet, mat)
    probs = p.probs
    active = probs > 0
    offset = -float(np.sum(probs[active] * np.log(tilt.mu[active])))
    return Translation(channel=channel, affine=AffineMap(lam0=lam0, offset=offset))


# ---------------------------------------------------------------------------
# closed-form catalog
# ---------------------------------------------------------------------------

class Family(enum.Enum):
    BINARY_HAMMING = "binary_hamming"
    GAUSSIAN_MSE = "gaussian_mse"


@dataclass(frozen=True)
class ClosedForm:
    """A catalog entry: classical family, optionally tilted by lam0.

    With ``lam0`` set, the object evaluates the translated log-likelihood
    curve on the affine distortion axis; without it, the classical curve.
    """

    family: Family
    param: float  # p for binary_hamming, sigma^2 for gaussian_mse
    lam0: Optional[float] = None

    def __post_init__(self):
        if self.family is Family.BINARY_HAMMING:
            if not 0.0 < self.param <= 0.5:
                raise ValidationError(f"binary source bias {self.param} outside (0, 1/2]")
            if self.lam0 is not None and self.lam0 < math.log((1 - self.param) / self.param) - 1e-12:
                raise ValidationError(
                    "lam0 below the feasibility boundary log((1-p)/p)"
                )
        else:
            if self.param <= 0:
                raise ValidationError(f"variance {self.param} must be > 0")
            if self.lam0 is not None and self.lam0 <= 1.0 / (2.0 * self.param):
                raise ValidationError("lam0 must exceed 1/(2 sigma^2)")


def _h_binary(x: float) -> float:
    if x < 0 or x > 1:
        raise ValidationError(f"binary entropy argument {x} outside [0, 1]")
    if x in (0.0, 1.0):
        return 0.0
    return -x * math.log(x) - (1 - x) * math.log(1 - x)


def closed_form_range(cf: ClosedForm) -> tuple[float, float]:
    """Feasible distortion interval of the catalog curve (nats-scale axis)."""
    if cf.family is Family.BINARY_HAMMING:
        lo, hi = 0.0, cf.param
    else:
        lo, hi = 0.0, cf.param
    if cf.lam0 is None:
        return lo, hi
    offset = _translation_offset(cf)
    return cf.lam0 * lo + offset, cf.lam0 * hi + offset


def _translation_offset(cf: ClosedForm) -> float:
    if cf.family is Family.BINARY_HAMMING:
        return math.log(1.0 + math.exp(-cf.lam0))
    return math.log(math.sqrt(math.pi / cf.lam0))


def closed_form_eval(cf: ClosedForm, dist: float, base: LogBase = LogBase.NATURAL) -> float:
    """Evaluate the catalog rate at a distortion on the curve's own axis."""
    lo, hi = closed_form_range(cf)
    if not (lo - 1e-12 <= dist <= hi + 1e-12):
        raise InfeasibleError(
            f"distortion {dist} outside the valid interval [{lo}, {hi}]"
        )
    dist = min(max(dist, lo), hi)
    d_classical = dist if cf.lam0 is None else AffineMap(cf.lam0, _translation_offset(cf)).inverse(dist)
    if cf.family is Family.BINARY_HAMMING:
        d_classical = min(max(d_classical, 0.0), cf.param)
        rate = _h_binary(cf.param) - _h_binary(d_classical)
    else:
        if d_classical <= 0:
            return math.inf
        rate = 0.5 * math.log(cf.param / d_classical)
    return convert(max(rate, 0.0), base)
