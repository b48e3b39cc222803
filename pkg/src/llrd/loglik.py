"""Structure of the log-likelihood distortion problem.

Covers the distortion construction -log P(x|u), the feasible distortion
range, the maximum-likelihood reconstruction sets and the rate at the
lower distortion endpoint, the consistency polytope with its special
operating points, the log-loss lower-bound line, and the cross-entropy
decomposition identity used as a runtime check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from . import lp
from .core import (
    Channel,
    LogBase,
    Pmf,
    conditional_entropy,
    entropy,
    joint_from,
    kl_divergence,
)
from .errors import AlphabetMismatchError, ConvergenceError, ValidationError

__all__ = [
    "DistortionMatrix",
    "FeasibleRange",
    "MlSets",
    "ConsistencyReport",
    "RateAtDmin",
    "DecompositionCheck",
    "loglik_distortion",
    "feasible_range",
    "distortion_range",
    "ml_sets",
    "rate_at_dmin",
    "consistency_polytope",
    "logloss_rdf",
    "decomposition_check",
]


@dataclass(frozen=True)
class DistortionMatrix:
    """Nonnegative distortion entries d(x, y); +inf marks forbidden pairs.

    Every source symbol must have at least one finite entry, otherwise no
    reconstruction is ever admissible and the problem is vacuous.
    """

    source_alphabet: tuple[str, ...]
    recon_alphabet: tuple[str, ...]
    entries: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "source_alphabet", tuple(self.source_alphabet))
        object.__setattr__(self, "recon_alphabet", tuple(self.recon_alphabet))
        ent = np.asarray(self.entries, dtype=np.float64).copy()
        shape = (len(self.source_alphabet), len(self.recon_alphabet))
        if ent.shape != shape:
            raise ValidationError(f"distortion has shape {ent.shape}, expected {shape}")
        if np.any(np.isnan(ent)) or np.any(ent < 0):
            raise ValidationError("distortion entries must be in [0, +inf]")
        no_finite = ~np.isfinite(ent).any(axis=1)
        if np.any(no_finite):
            bad = self.source_alphabet[int(np.argmax(no_finite))]
            raise ValidationError(
                f"source symbol {bad!r} has no finite distortion entry"
            )
        ent.setflags(write=False)
        object.__setattr__(self, "entries", ent)

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape


@dataclass(frozen=True)
class FeasibleRange:
    """Distortion interval [d_min, d_max] on which the RDF is defined."""

    d_min: float
    d_max: float
    units: LogBase = LogBase.NATURAL

    def __post_init__(self):
        if not (0.0 <= self.d_min <= self.d_max):
            raise ValidationError(
                f"invalid range [{self.d_min}, {self.d_max}]"
            )

    def to(self, base: LogBase) -> "FeasibleRange":
        if base is self.units:
            return self
        if self.units is not LogBase.NATURAL:
            raise ValidationError("can only convert from nats")
        return FeasibleRange(
            self.d_min * base.factor, self.d_max * base.factor, base
        )


@dataclass(frozen=True)
class MlSets:
    """Per-source-symbol sets of maximum-likelihood reconstruction symbols."""

    source_alphabet: tuple[str, ...]
    recon_alphabet: tuple[str, ...]
    members: tuple[tuple[str, ...], ...]

    def indicator(self) -> np.ndarray:
        """Boolean membership matrix, shape (n_source, n_recon)."""
        out = np.zeros((len(self.source_alphabet), len(self.recon_alphabet)), dtype=bool)
        for i, row in enumerate(self.members):
            for lbl in row:
                out[i, self.recon_alphabet.index(lbl)] = True
        return out


@dataclass(frozen=True)
class ConsistencyReport:
    """Feasibility of the prior polytope {q >= 0 : ch q = p} and its H(X|U) span.

    ``d_star_min``/``d_star_max`` bound the special operating points: the
    values H(X|U) attained by consistent priors (nats). The interval
    collapses to a point when the consistent prior is unique.
    """

    feasible: bool
    witness_prior: Optional[Pmf] = None
    d_star_min: Optional[float] = None
    d_star_max: Optional[float] = None
    witness_min: Optional[Pmf] = None
    witness_max: Optional[Pmf] = None
    units: LogBase = LogBase.NATURAL


class DecompositionCheck(NamedTuple):
    lhs: float
    rhs: float
    gap: float


@dataclass(frozen=True)
class RateAtDmin:
    """Converged value and witnesses of the minimum-distortion rate."""

    rate: float  # nats
    q: Pmf  # optimal reconstruction marginal
    randomization: Channel  # per-source-symbol tie randomization
    iterations: int
    converged: bool


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def loglik_distortion(ch: Channel) -> DistortionMatrix:
    """Distortion d(x, u) = -log P(x|u) induced by a conditional channel.

    Zero channel entries map to +inf; a source symbol with zero probability
    under every conditioning symbol is rejected.
    """
    with np.errstate(divide="ignore"):
        ent = np.where(ch.matrix > 0, -np.log(np.where(ch.matrix > 0, ch.matrix, 1.0)), np.inf)
    ent = np.maximum(ent, 0.0)  # clamp -0.0 from entries equal to 1
    return DistortionMatrix(ch.output_alphabet, ch.input_alphabet, ent)


def distortion_range(p: Pmf, d: DistortionMatrix) -> FeasibleRange:
    """Feasible distortion interval for a generic distortion matrix.

    d_min = E_X[min_y d(X, y)] is the per-symbol best case; d_max is the
    best achievable by a single constant reconstruction, min_y E_X[d(X, y)].
    Expectation terms with zero probability contribute 0 even against +inf.
    """
    if p.alphabet != d.source_alphabet:
        raise AlphabetMismatchError(
            f"pmf alphabet {p.alphabet} does not match distortion source "
            f"{d.source_alphabet}"
        )
    probs = p.probs
    row_min = d.entries.min(axis=1)
    d_min = float(np.sum(probs[probs > 0] * row_min[probs > 0]))
    col_exp = np.full(len(d.recon_alphabet), np.inf)
    for j in range(len(d.recon_alphabet)):
        col = d.entries[:, j]
        active = probs > 0
        if np.all(np.isfinite(col[active])):
            col_exp[j] = float(np.sum(probs[active] * col[active]))
    d_max = float(col_exp.min())
    return FeasibleRange(d_min, d_max)


def feasible_range(p: Pmf, ch: Channel) -> FeasibleRange:
    """Feasible distortion interval of the log-likelihood problem (p, ch)."""
    _check_problem(p, ch)
    return distortion_range(p, loglik_distortion(ch))


def _check_problem(p: Pmf, ch: Channel) -> None:
    if p.alphabet != ch.output_alphabet:
        raise AlphabetMismatchError(
            f"source alphabet {p.alphabet} does not match channel output "
            f"{ch.output_alphabet}"
        )


def ml_sets(ch: Channel, tie_tol: float = 1e-9) -> MlSets:
    """Maximum-likelihood sets T(x) = argmax_u P(x|u), with relative ties.

    A symbol u belongs to T(x) iff P(x|u) >= (1 - tie_tol) * max_u' P(x|u'),
    which keeps the discontinuous argmax reproducible across floating-point
    orderings.
    """
    mat = ch.matrix  # (x, u)
    row_max = mat.max(axis=1)
    members = []
    for i in range(mat.shape[0]):
        thresh = (1.0 - tie_tol) * row_max[i]
        members.append(
            tuple(
                ch.input_alphabet[j]
                for j in range(mat.shape[1])
                if mat[i, j] >= thresh
            )
        )
    return MlSets(ch.output_alphabet, ch.input_alphabet, tuple(members))


def rate_at_dmin(
    p: Pmf,
    ch: Channel,
    tie_tol: float = 1e-9,
    tol: float = 1e-11,
    max_iters: int = 10**5,
) -> RateAtDmin:
    """Rate at the minimum feasible distortion via randomized ML decoding.

    Minimizes E_X[-log Q(T(X))] over reconstruction marginals Q by
    alternating the I-projection onto distributions supported on T(x),
    W(y|x) = Q(y) 1[y in T(x)] / Q(T(x)), with the marginal update.
    The objective is convex and the alternation is a descent method, so
    the stopping rule is on successive objective values.
    """
    _check_problem(p, ch)
    sets = ml_sets(ch, tie_tol)
    mask = sets.indicator().astype(np.float64)  # (x, u)
    n_x, n_u = mask.shape
    probs = p.probs
    q = np.full(n_u, 1.0 / n_u)
    prev_obj = math.inf
    obj = math.inf
    converged = False
    iters = 0
    w = mask / mask.sum(axis=1, keepdims=True)
    for iters in range(1, max_iters + 1):
        qt = mask @ q  # Q(T(x))
        active = probs > 0
        obj = float(-np.sum(probs[active] * np.log(qt[active])))
        if abs(prev_obj - obj) < tol:
            converged = True
            break
        prev_obj = obj
        with np.errstate(invalid="ignore", divide="ignore"):
            w = np.where(qt[:, None] > 0, mask * q[None, :] / qt[:, None], 0.0)
        q = probs @ w
    if not converged:
        raise ConvergenceError(
            f"rate_at_dmin: no convergence after {max_iters} iterations "
            f"(last objective gap {abs(prev_obj - obj):.3e} nats)"
        )
    q = q / q.sum() if q.sum() > 0 else q
    return RateAtDmin(
        rate=obj,
        q=Pmf(ch.input_alphabet, q),
        randomization=Channel(ch.output_alphabet, ch.input_alphabet, w.T),
        iterations=iters,
        converged=converged,
    )


def consistency_polytope(p: Pmf, ch: Channel) -> ConsistencyReport:
    """Consistent priors of (p, ch) and the span of their H(X|U) values.

    Feasibility of {q >= 0 : ch q = p, sum q = 1} is decided by LP. Since
    H(X|U) = sum_u q(u) H(ch(.|u)) is linear in the prior, the endpoints
    of the special-operating-point interval come from two more LPs on that
    objective rather than from sampling.
    """
    _check_problem(p, ch)
    a = np.vstack([ch.matrix, np.ones((1, ch.n_inputs))])
    b = np.concatenate([p.probs, [1.0]])
    base = lp.lp_solve(lp.LpProblem(a, b))
    if not base.feasible:
        return ConsistencyReport(feasible=False)
    cond_ent = np.array(
        [entropy(Pmf(ch.output_alphabet, ch.matrix[:, j])) for j in range(ch.n_inputs)]
    )
    lo = lp.lp_solve(lp.LpProblem(a, b, c=cond_ent, maximize=False))
    hi = lp.lp_solve(lp.LpProblem(a, b, c=cond_ent, maximize=True))
    if not (lo.feasible and hi.feasible):  # pragma: no cover - base was feasible
        raise RuntimeError("consistency endpoint LPs disagree with feasibility LP")

    def as_prior(x: np.ndarray) -> Pmf:
        x = np.maximum(x, 0.0)
        return Pmf(ch.input_alphabet, x / x.sum())

    return ConsistencyReport(
        feasible=True,
        witness_prior=as_prior(base.witness),
        d_star_min=float(lo.value),
        d_star_max=float(hi.value),
        witness_min=as_prior(lo.witness),
        witness_max=as_prior(hi.witness),
    )


def logloss_rdf(p: Pmf, d: float, base: LogBase = LogBase.NATURAL) -> float:
    """Log-loss rate-distortion line max(H(X) - D, 0); D given in ``base``."""
    if d < 0:
        raise ValidationError(f"distortion {d} must be nonnegative")
    h = entropy(p, base)
    return max(h - d, 0.0)


def decomposition_check(p: Pmf, ch_xu: Channel, test: Channel) -> DecompositionCheck:
    """Cross-entropy decomposition of the expected log-likelihood distortion.

    For any test channel W(y|x), E[d(X,Y)] with d(x,y) = -log P(x|y)
    equals H(X|Y) + E_Y[KL(W(.|Y) || P(.|Y))]. Returns both sides and
    their absolute gap (0 when both sides are +inf).
    """
    _check_problem(p, ch_xu)
    if test.input_alphabet != p.alphabet:
        raise AlphabetMismatchError("test channel input must be the source alphabet")
    if test.output_alphabet != ch_xu.input_alphabet:
        raise AlphabetMismatchError(
            "test channel output must be the reconstruction alphabet"
        )
    d = loglik_distortion(ch_xu).entries  # (x, y)
    j = joint_from(p, test)  # rows = Y, cols = X
    jm = j.matrix.T  # (x, y)
    mask = jm > 0
    lhs = math.inf if np.any(mask & np.isinf(d)) else float(np.sum(jm[mask] * d[mask]))

    h_x_given_y = conditional_entropy(j.transposed())
    q_y = j.matrix.sum(axis=1)
    exp_kl = 0.0
    for k in range(len(q_y)):
        if q_y[k] <= 0:
            continue
        posterior = Pmf(p.alphabet, j.matrix[k, :] / q_y[k])
        kl = kl_divergence(posterior, ch_xu.column(ch_xu.input_alphabet[k]))
        if math.isinf(kl):
            exp_kl = math.inf
            break
        exp_kl += q_y[k] * kl
    rhs = h_x_given_y + exp_kl
    if math.isinf(lhs) and math.isinf(rhs):
        return DecompositionCheck(lhs, rhs, 0.0)
    return DecompositionCheck(lhs, rhs, abs(lhs - rhs))
