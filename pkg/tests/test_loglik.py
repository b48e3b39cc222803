import math

import numpy as np
import pytest

from conftest import LN2, hb_nats, random_channel, random_pmf
from llrd.core import Channel, LogBase, Pmf, bernoulli, entropy
from llrd.errors import AlphabetMismatchError, ValidationError
from llrd.loglik import (
    DistortionMatrix,
    consistency_polytope,
    decomposition_check,
    distortion_range,
    feasible_range,
    loglik_distortion,
    logloss_rdf,
    ml_sets,
    rate_at_dmin,
)

BITS = LogBase.BITS


class TestDistortionConstruction:
    def test_bsc_entries(self, fig2):
        _, ch = fig2
        d = loglik_distortion(ch)
        assert d.entries[0, 0] == pytest.approx(-math.log(0.9))
        assert d.entries[0, 1] == pytest.approx(-math.log(0.1))
        assert d.entries[0, 0] / LN2 == pytest.approx(0.152, abs=5e-4)
        assert d.entries[0, 1] / LN2 == pytest.approx(3.3219, abs=5e-5)

    def test_identity_channel(self):
        ch = Channel(("a", "b"), ("a", "b"), np.eye(2))
        d = loglik_distortion(ch)
        assert d.entries[0, 0] == 0.0
        assert d.entries[0, 1] == math.inf

    def test_fig3_rows(self, fig3):
        _, ch = fig3
        d = loglik_distortion(ch)
        assert d.entries[0] == pytest.approx(-np.log([0.8, 0.4, 0.2]))

    def test_rejects_all_zero_row(self):
        ch = Channel(("u0", "u1"), ("x", "y"), np.array([[0.0, 0.0], [1.0, 1.0]]))
        with pytest.raises(ValidationError, match="no finite"):
            loglik_distortion(ch)

    def test_distortion_matrix_rejects_negative(self):
        with pytest.raises(ValidationError):
            DistortionMatrix(("a",), ("b",), np.array([[-0.1]]))


class TestFeasibleRange:
    def test_fig2(self, fig2):
        p, ch = fig2
        fr = feasible_range(p, ch).to(BITS)
        assert fr.d_min == pytest.approx(0.152, abs=1e-3)
        assert fr.d_max == pytest.approx(0.945, abs=1e-3)

    def test_fig3(self, fig3):
        p, ch = fig3
        fr = feasible_range(p, ch).to(BITS)
        assert fr.d_min == pytest.approx(0.322, abs=5e-4)
        assert fr.d_max == pytest.approx(1.022, abs=5e-4)

    def test_identity_channel_floor_zero(self):
        p = bernoulli(0.3)
        ch = Channel(p.alphabet, p.alphabet, np.eye(2))
        fr = feasible_range(p, ch)
        assert fr.d_min == 0.0
        assert math.isinf(fr.d_max)  # every constant decoder misses a symbol

    def test_ordering_on_random_instances(self):
        rng = np.random.default_rng(11)
        for _ in range(1000):
            n_u = rng.integers(2, 5)
            n_x = rng.integers(2, 5)
            p = random_pmf(rng, tuple(f"x{i}" for i in range(n_x)))
            ch = random_channel(rng, tuple(f"u{i}" for i in range(n_u)), p.alphabet)
            fr = feasible_range(p, ch)
            assert fr.d_min <= fr.d_max + 1e-12


class TestMlSets:
    def test_bsc_singletons(self, fig2):
        _, ch = fig2
        assert ml_sets(ch).members == (("u0",), ("u1",))

    def test_fig3_singletons(self, fig3):
        _, ch = fig3
        assert ml_sets(ch).members == (("u1",), ("u3",))

    def test_full_tie(self):
        ch = Channel(("u0", "u1"), ("x", "y"), np.array([[0.3, 0.3], [0.7, 0.7]]))
        assert ml_sets(ch).members == (("u0", "u1"), ("u0", "u1"))


def _grid_oracle_rate(p: Pmf, mask: np.ndarray, resolution: float = 1e-4) -> float:
    """Brute-force Eq-objective minimum over a two-symbol reconstruction simplex."""
    assert mask.shape[1] == 2
    qs = np.arange(0.0, 1.0 + resolution, resolution)
    best = math.inf
    for q0 in qs:
        q = np.array([q0, 1.0 - q0])
        qt = mask @ q
        if np.any((p.probs > 0) & (qt <= 0)):
            continue
        active = p.probs > 0
        val = float(-np.sum(p.probs[active] * np.log(qt[active])))
        best = min(best, val)
    return best


class TestRateAtDmin:
    def test_fig2_equals_source_entropy(self, fig2):
        p, ch = fig2
        res = rate_at_dmin(p, ch)
        assert res.rate == pytest.approx(entropy(p), abs=1e-9)
        assert res.converged
        # distinct singleton sets: grid oracle agrees
        oracle = _grid_oracle_rate(p, ml_sets(ch).indicator())
        assert res.rate <= oracle + 1e-9

    def test_full_alphabet_sets_give_zero(self):
        ch = Channel(("u0", "u1"), ("x", "y"), np.array([[0.4, 0.4], [0.6, 0.6]]))
        res = rate_at_dmin(bernoulli(0.3, ("x", "y")), ch)
        assert res.rate == pytest.approx(0.0, abs=1e-12)

    def test_genuine_overlap_against_oracle(self):
        # overlapping sets {a, b} and {b}: needs a third source symbol,
        # since column-stochastic 2x2 channels force ties in both rows
        mat = np.array([[0.4, 0.4], [0.2, 0.5], [0.4, 0.1]])
        ch = Channel(("a", "b"), ("x", "y", "z"), mat)
        sets = ml_sets(ch)
        assert sets.members == (("a", "b"), ("b",), ("a",))
        p = Pmf(("x", "y", "z"), np.array([0.5, 0.3, 0.2]))
        res = rate_at_dmin(p, ch)
        oracle = _grid_oracle_rate(p, sets.indicator())
        assert res.rate == pytest.approx(oracle, abs=1e-5)
        assert res.rate <= oracle + 1e-9

    def test_rate_bounded_by_source_entropy(self):
        rng = np.random.default_rng(23)
        for _ in range(50):
            p = random_pmf(rng, ("x0", "x1", "x2"))
            ch = random_channel(rng, ("u0", "u1", "u2", "u3"), p.alphabet)
            res = rate_at_dmin(p, ch)
            assert -1e-12 <= res.rate <= entropy(p) + 1e-9


def _independent_interval_oracle(p: Pmf, ch: Channel) -> tuple[float, float]:
    """Endpoints of H(X|U) over consistent priors, via nullspace sweep.

    Only valid when the consistent set is one-dimensional. Entirely
    independent of the LP kernel.
    """
    a = np.vstack([ch.matrix, np.ones(ch.n_inputs)])
    b = np.concatenate([p.probs, [1.0]])
    q0, *_ = np.linalg.lstsq(a, b, rcond=None)
    _, s, vt = np.linalg.svd(a)
    null = vt[s < s[0] * 1e-10]
    assert null.shape[0] == 1, "oracle needs a one-dimensional consistent set"
    direction = null[0]
    cond = np.array([hb_nats(ch.matrix[1, j]) for j in range(ch.n_inputs)])
    ts = np.linspace(-5.0, 5.0, 2_000_001)
    qs = q0[None, :] + ts[:, None] * direction[None, :]
    ok = qs.min(axis=1) >= -1e-12
    vals = qs[ok] @ cond
    return float(vals.min()), float(vals.max())


class TestConsistency:
    def test_fig2_unique_witness(self, fig2):
        p, ch = fig2
        rep = consistency_polytope(p, ch)
        assert rep.feasible
        assert rep.witness_prior.probs == pytest.approx([0.8125, 0.1875], abs=1e-9)
        assert rep.d_star_min == pytest.approx(hb_nats(0.1), abs=1e-9)
        assert rep.d_star_max == pytest.approx(hb_nats(0.1), abs=1e-9)
        assert rep.d_star_min / LN2 == pytest.approx(0.469, abs=5e-4)

    def test_fig3_interval_against_nullspace_oracle(self, fig3):
        p, ch = fig3
        rep = consistency_polytope(p, ch)
        assert rep.feasible
        lo, hi = _independent_interval_oracle(p, ch)
        assert rep.d_star_min == pytest.approx(lo, abs=1e-5)
        assert rep.d_star_max == pytest.approx(hi, abs=1e-5)
        # closed-form endpoints of the same sweep
        assert rep.d_star_min == pytest.approx(hb_nats(0.2), abs=1e-9)
        assert rep.d_star_min / LN2 == pytest.approx(0.718, abs=0.01)
        assert rep.d_star_max / LN2 == pytest.approx(0.816, abs=0.01)

    def test_witnesses_reproduce_source(self, fig3):
        p, ch = fig3
        rep = consistency_polytope(p, ch)
        for w in (rep.witness_prior, rep.witness_min, rep.witness_max):
            assert np.abs(ch.matrix @ w.probs - p.probs).max() <= 1e-9

    def test_infeasible_source(self):
        p = Pmf(("x", "y"), np.array([1.0, 0.0]))
        ch = Channel(("u0", "u1"), ("x", "y"), np.array([[0.9, 0.2], [0.1, 0.8]]))
        rep = consistency_polytope(p, ch)
        assert not rep.feasible
        assert rep.d_star_min is None


class TestLoglossLine:
    def test_zero_distortion(self):
        assert logloss_rdf(bernoulli(0.25), 0.0, BITS) == pytest.approx(0.8113, abs=5e-5)

    def test_at_entropy(self):
        p = bernoulli(0.35)
        assert logloss_rdf(p, entropy(p, BITS), BITS) == 0.0

    def test_fig3_value(self):
        got = logloss_rdf(bernoulli(0.35), 0.469, BITS)
        assert got == pytest.approx(0.9341 - 0.4690, abs=1e-4)

    def test_rejects_negative(self):
        with pytest.raises(ValidationError):
            logloss_rdf(bernoulli(0.5), -0.1)


class TestDecomposition:
    def test_posterior_of_consistent_pair(self, fig2):
        p, ch = fig2
        # posterior P(U|X) of the consistent prior, used as the test channel
        prior = np.array([0.8125, 0.1875])
        joint = ch.matrix * prior[None, :]  # (x, u)
        post = (joint / joint.sum(axis=1, keepdims=True)).T  # (u, x)
        test = Channel(p.alphabet, ch.input_alphabet, post)
        chk = decomposition_check(p, ch, test)
        assert chk.gap <= 1e-12
        assert chk.lhs == pytest.approx(hb_nats(0.1), abs=1e-12)

    def test_constant_channel(self, fig2):
        p, ch = fig2
        test = Channel(p.alphabet, ch.input_alphabet, np.array([[1.0, 1.0], [0.0, 0.0]]))
        chk = decomposition_check(p, ch, test)
        expect = -(0.75 * math.log(0.9) + 0.25 * math.log(0.1))
        assert chk.lhs == pytest.approx(expect, abs=1e-12)
        assert chk.gap <= 1e-12

    def test_identity_on_random_instances(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            n_x = rng.integers(2, 9)
            n_u = rng.integers(2, 9)
            p = random_pmf(rng, tuple(f"x{i}" for i in range(n_x)))
            ch = random_channel(rng, tuple(f"u{i}" for i in range(n_u)), p.alphabet)
            test = random_channel(rng, p.alphabet, ch.input_alphabet)
            chk = decomposition_check(p, ch, test)
            assert chk.gap <= 1e-9

    def test_alphabet_mismatch(self, fig2):
        p, ch = fig2
        bad = Channel(("w", "z"), ch.input_alphabet, np.array([[0.5, 0.5], [0.5, 0.5]]))
        with pytest.raises(AlphabetMismatchError):
            decomposition_check(p, ch, bad)


def test_distortion_range_zero_mass_against_inf():
    # a zero-probability source row may carry +inf entries without effect
    p = Pmf(("x", "y", "z"), np.array([0.5, 0.5, 0.0]))
    d = DistortionMatrix(
        ("x", "y", "z"),
        ("a", "b"),
        np.array([[0.0, 1.0], [1.0, 0.0], [math.inf, 2.0]]),
    )
    fr = distortion_range(p, d)
    assert fr.d_min == 0.0
    assert fr.d_max == pytest.approx(0.5)
