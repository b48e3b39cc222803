"""Finite-probability primitives: distributions, channels, information measures.

Conventions used throughout the package:

* every information quantity is computed internally in nats; the ``base``
  argument converts only the returned value,
* ``0 * log 0 == 0`` and ``log 0 == -inf`` with saturating arithmetic
  (no exceptions from information measures),
* zero-probability symbols stay in their alphabets so indices remain
  stable across operations,
* all value objects are immutable after construction and safe to share
  between threads.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import AlphabetMismatchError, ValidationError

__all__ = [
    "LogBase",
    "Pmf",
    "Channel",
    "Joint",
    "bernoulli",
    "bsc",
    "convert",
    "entropy",
    "kl_divergence",
    "cross_entropy",
    "joint_from",
    "marginal_row",
    "marginal_col",
    "bayes_reverse",
    "mutual_information",
    "conditional_entropy",
]

_SUM_TOL = 1e-12


class LogBase(enum.Enum):
    """Unit for reported information quantities (internals are always nats)."""

    NATURAL = "nats"
    BITS = "bits"

    @property
    def factor(self) -> float:
        """Multiplier taking a value in nats to this unit."""
        return 1.0 if self is LogBase.NATURAL else 1.0 / math.log(2.0)


def convert(value_nats: float, base: LogBase) -> float:
    """Convert a scalar from nats to the requested unit (inf passes through)."""
    if math.isinf(value_nats):
        return value_nats
    return value_nats * base.factor


def _as_locked_array(values, shape_name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{shape_name} contains non-finite entries")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


def _check_labels(labels, what: str) -> tuple[str, ...]:
    labels = tuple(str(x) for x in labels)
    if len(set(labels)) != len(labels):
        raise ValidationError(f"{what} labels are not unique: {labels}")
    if not labels:
        raise ValidationError(f"{what} is empty")
    return labels


@dataclass(frozen=True)
class Pmf:
    """A probability vector over a named finite alphabet."""

    alphabet: tuple[str, ...]
    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "alphabet", _check_labels(self.alphabet, "alphabet"))
        probs = _as_locked_array(self.probs, "probs")
        if probs.ndim != 1 or probs.size != len(self.alphabet):
            raise ValidationError(
                f"probs has shape {probs.shape}, expected ({len(self.alphabet)},)"
            )
        if np.any(probs < 0):
            raise ValidationError("probs has negative entries")
        if abs(float(probs.sum()) - 1.0) > _SUM_TOL:
            raise ValidationError(f"probs sum to {probs.sum()!r}, not 1")
        object.__setattr__(self, "probs", probs)

    @property
    def size(self) -> int:
        return len(self.alphabet)

    def index(self, label: str) -> int:
        return self.alphabet.index(label)

    def prob(self, label: str) -> float:
        return float(self.probs[self.index(label)])


def bernoulli(p1: float, labels: tuple[str, str] = ("0", "1")) -> Pmf:
    """Two-symbol pmf with probability ``p1`` on the second label."""
    return Pmf(labels, np.array([1.0 - p1, p1]))


@dataclass(frozen=True)
class Channel:
    """A conditional distribution as a column-stochastic matrix.

    ``matrix[out, in] = P(out | in)``: column ``in`` is the distribution of
    the output symbol given the input symbol.
    """

    input_alphabet: tuple[str, ...]
    output_alphabet: tuple[str, ...]
    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "input_alphabet", _check_labels(self.input_alphabet, "input alphabet")
        )
        object.__setattr__(
            self,
            "output_alphabet",
            _check_labels(self.output_alphabet, "output alphabet"),
        )
        mat = _as_locked_array(self.matrix, "channel matrix")
        shape = (len(self.output_alphabet), len(self.input_alphabet))
        if mat.shape != shape:
            raise ValidationError(f"channel matrix has shape {mat.shape}, expected {shape}")
        if np.any(mat < 0):
            raise ValidationError("channel matrix has negative entries")
        colsums = mat.sum(axis=0)
        bad = np.where(np.abs(colsums - 1.0) > _SUM_TOL)[0]
        if bad.size:
            raise ValidationError(
                f"channel column {bad[0]} ({self.input_alphabet[bad[0]]!r}) "
                f"sums to {colsums[bad[0]]!r}, not 1"
            )
        object.__setattr__(self, "matrix", mat)

    @property
    def n_inputs(self) -> int:
        return len(self.input_alphabet)

    @property
    def n_outputs(self) -> int:
        return len(self.output_alphabet)

    def column(self, label: str) -> Pmf:
        """Output distribution for one input symbol."""
        j = self.input_alphabet.index(label)
        return Pmf(self.output_alphabet, self.matrix[:, j])


def bsc(crossover: float, labels: tuple[str, str] = ("0", "1")) -> Channel:
    """Binary symmetric channel with the given crossover probability."""
    e = float(crossover)
    if not 0.0 <= e <= 1.0:
        raise ValidationError(f"crossover {e} outside [0, 1]")
    return Channel(labels, labels, np.array([[1.0 - e, e], [e, 1.0 - e]]))


@dataclass(frozen=True)
class Joint:
    """A joint distribution over a pair of named alphabets."""

    row_alphabet: tuple[str, ...]
    col_alphabet: tuple[str, ...]
    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "row_alphabet", _check_labels(self.row_alphabet, "row alphabet")
        )
        object.__setattr__(
            self, "col_alphabet", _check_labels(self.col_alphabet, "col alphabet")
        )
        mat = _as_locked_array(self.matrix, "joint matrix")
        shape = (len(self.row_alphabet), len(self.col_alphabet))
        if mat.shape != shape:
            raise ValidationError(f"joint matrix has shape {mat.shape}, expected {shape}")
        if np.any(mat < 0):
            raise ValidationError("joint matrix has negative entries")
        if abs(float(mat.sum()) - 1.0) > _SUM_TOL:
            raise ValidationError(f"joint matrix sums to {mat.sum()!r}, not 1")
        object.__setattr__(self, "matrix", mat)

    def transposed(self) -> "Joint":
        return Joint(self.col_alphabet, self.row_alphabet, self.matrix.T)


# ---------------------------------------------------------------------------
# information measures
# ---------------------------------------------------------------------------

def _xlogx(p: np.ndarray) -> np.ndarray:
    """Elementwise p*log(p) with the 0*log(0)=0 convention."""
    out = np.zeros_like(p)
    mask = p > 0
    out[mask] = p[mask] * np.log(p[mask])
    return out


def entropy(p: Pmf, base: LogBase = LogBase.NATURAL) -> float:
    """Shannon entropy of ``p``."""
    return convert(float(-_xlogx(p.probs).sum()), base)


def _require_same_alphabet(p: Pmf, q: Pmf) -> None:
    if p.alphabet != q.alphabet:
        raise AlphabetMismatchError(
            f"alphabets differ: {p.alphabet} vs {q.alphabet}"
        )


def kl_divergence(p: Pmf, q: Pmf, base: LogBase = LogBase.NATURAL) -> float:
    """Relative entropy D(p || q); +inf when p is not absolutely continuous w.r.t. q."""
    _require_same_alphabet(p, q)
    pp, qq = p.probs, q.probs
    support = pp > 0
    if np.any(qq[support] == 0):
        return math.inf
    val = float(np.sum(pp[support] * (np.log(pp[support]) - np.log(qq[support]))))
    return convert(max(val, 0.0), base)


def cross_entropy(p: Pmf, q: Pmf, base: LogBase = LogBase.NATURAL) -> float:
    """Cross-entropy of q under p: entropy(p) + KL(p || q)."""
    _require_same_alphabet(p, q)
    kl = kl_divergence(p, q)
    if math.isinf(kl):
        return math.inf
    return convert(entropy(p) + kl, base)


# ---------------------------------------------------------------------------
# joints, marginals, Bayes reversal
# ---------------------------------------------------------------------------

def joint_from(p_in: Pmf, ch: Channel) -> Joint:
    """Joint distribution of (output, input) when ``p_in`` feeds ``ch``."""
    if p_in.alphabet != ch.input_alphabet:
        raise AlphabetMismatchError(
            f"pmf alphabet {p_in.alphabet} does not match channel input "
            f"{ch.input_alphabet}"
        )
    return Joint(ch.output_alphabet, ch.input_alphabet, ch.matrix * p_in.probs[None, :])


def marginal_row(j: Joint) -> Pmf:
    total = j.matrix.sum(axis=1)
    return Pmf(j.row_alphabet, total / total.sum())


def marginal_col(j: Joint) -> Pmf:
    total = j.matrix.sum(axis=0)
    return Pmf(j.col_alphabet, total / total.sum())


def bayes_reverse(j: Joint) -> Channel:
    """Conditional of the column symbol given the row symbol.

    Row symbols with zero marginal carry no conditional; they are dropped
    from the reversed channel's input alphabet with a warning.
    """
    row_marg = j.matrix.sum(axis=1)
    keep = row_marg > 0
    if not np.all(keep):
        dropped = [lbl for lbl, k in zip(j.row_alphabet, keep) if not k]
        warnings.warn(
            f"bayes_reverse: dropping zero-probability row symbols {dropped}",
            stacklevel=2,
        )
    if not np.any(keep):
        raise ValidationError("bayes_reverse: all row marginals are zero")
    mat = (j.matrix[keep, :] / row_marg[keep, None]).T  # (col, kept rows)
    kept_labels = tuple(lbl for lbl, k in zip(j.row_alphabet, keep) if k)
    return Channel(kept_labels, j.col_alphabet, mat)


def mutual_information(j: Joint, base: LogBase = LogBase.NATURAL) -> float:
    """Mutual information between the row and column symbols of ``j``."""
    pr = j.matrix.sum(axis=1)
    pc = j.matrix.sum(axis=0)
    prod = np.outer(pr, pc)
    mask = j.matrix > 0
    val = float(np.sum(j.matrix[mask] * (np.log(j.matrix[mask]) - np.log(prod[mask]))))
    return convert(max(val, 0.0), base)


def conditional_entropy(j: Joint, base: LogBase = LogBase.NATURAL) -> float:
    """Entropy of the row symbol given the column symbol, H(row | col)."""
    pc = j.matrix.sum(axis=0)
    val = float(-_xlogx(j.matrix).sum() + _xlogx(pc).sum())
    return convert(max(val, 0.0), base)
