import numpy as np
import pytest

from attnbench import core
from attnbench.core import (
    ALL_PATTERNS,
    AttentionInputs,
    AttentionPattern,
    ProjectionWeights,
    causality_probe,
    check_support,
    project,
    vanilla_attention,
)
from attnbench.errors import ShapeError, UnknownMechanismError, UnsupportedPatternError
from attnbench.mechanisms import MechanismConfig
from oracles import matmul_loops, vanilla

NS, CS, NC, CC = ALL_PATTERNS


class TestPattern:
    @pytest.mark.parametrize("text,expected", [("ns", NS), ("CS", CS), ("noncausal_cross", NC), (CC, CC)])
    def test_parse(self, text, expected):
        assert AttentionPattern.parse(text) is expected

    def test_parse_rejects_garbage(self):
        with pytest.raises(ValueError):
            AttentionPattern.parse("sideways")

    def test_flags(self):
        assert [p.causal for p in ALL_PATTERNS] == [False, True, False, True]
        assert [p.cross for p in ALL_PATTERNS] == [False, False, True, True]


class TestInputs:
    def test_self_requires_equal_lengths(self, rng):
        with pytest.raises(ShapeError):
            AttentionInputs(rng.standard_normal((3, 4)), rng.standard_normal((5, 4)), rng.standard_normal((5, 4)), NS)

    def test_cross_allows_different_lengths(self, rng):
        x = AttentionInputs(rng.standard_normal((3, 4)), rng.standard_normal((5, 4)), rng.standard_normal((5, 4)), NC)
        assert (x.n, x.m, x.d) == (3, 5, 4)

    def test_heads_must_divide_d(self, rng):
        a = rng.standard_normal((3, 6))
        with pytest.raises(ShapeError):
            AttentionInputs(a, a, a, NS, heads=4)

    def test_dims_must_agree(self, rng):
        with pytest.raises(ShapeError):
            AttentionInputs(rng.standard_normal((3, 4)), rng.standard_normal((3, 5)), rng.standard_normal((3, 5)))
        with pytest.raises(ShapeError):
            AttentionInputs(rng.standard_normal((3, 4)), rng.standard_normal((3, 4)), rng.standard_normal((2, 4)), NC)


class TestProject:
    def test_identity_weights(self, rng):
        x = rng.standard_normal((5, 4))
        w = ProjectionWeights(np.eye(4), np.eye(4), np.eye(4))
        out = project(x, x, w, NS, 1)
        for a in (out.q, out.k, out.v):
            np.testing.assert_array_equal(a, x)

    def test_zero_weights(self, rng):
        x = rng.standard_normal((5, 4))
        z = np.zeros((4, 4))
        out = project(x, x, ProjectionWeights(z, z, z), NS, 2)
        assert not (out.q.any() or out.k.any() or out.v.any())

    def test_matches_loops(self, rng):
        x, y = rng.standard_normal((3, 4)), rng.standard_normal((2, 4))
        w = ProjectionWeights.random(np.random.default_rng(0), 4)
        out = project(x, y, w, NC, 2)
        np.testing.assert_allclose(out.q, matmul_loops(y, w.w_q), atol=1e-14)
        np.testing.assert_allclose(out.k, matmul_loops(x, w.w_k), atol=1e-14)
        np.testing.assert_allclose(out.v, matmul_loops(x, w.w_v), atol=1e-14)

    def test_self_pattern_needs_same_source(self, rng):
        w = ProjectionWeights.random(np.random.default_rng(0), 4)
        with pytest.raises(ShapeError):
            project(rng.standard_normal((3, 4)), rng.standard_normal((5, 4)), w, CS, 1)

    def test_weights_must_be_square(self):
        with pytest.raises(ShapeError):
            ProjectionWeights(np.ones((2, 3)), np.ones((2, 3)), np.ones((2, 3)))


class TestVanilla:
    def test_single_key(self, rng):
        q, k, v = (rng.standard_normal((1, 4)) for _ in range(3))
        np.testing.assert_allclose(vanilla_attention(AttentionInputs(q, k, v)), v, atol=1e-15)

    def test_constant_values(self, rng):
        c = rng.standard_normal(6)
        x = AttentionInputs(rng.standard_normal((5, 6)), rng.standard_normal((5, 6)), np.tile(c, (5, 1)), CS, 3)
        np.testing.assert_allclose(vanilla_attention(x), np.tile(c, (5, 1)), atol=1e-14)

    def test_causal_matches_masked_oracle(self, rng):
        q, k, v = (rng.standard_normal((8, 4)) for _ in range(3))
        out = vanilla_attention(AttentionInputs(q, k, v, CS))
        np.testing.assert_allclose(out, vanilla(q, k, v, causal=True), atol=1e-12)

    @pytest.mark.parametrize("pattern", [NS, NC, CC])
    def test_noncausal_patterns_unmasked(self, rng, pattern):
        m = 8 if pattern is NS else 5
        q, k, v = rng.standard_normal((8, 8)), rng.standard_normal((m, 8)), rng.standard_normal((m, 8))
        out = vanilla_attention(AttentionInputs(q, k, v, pattern, 2))
        np.testing.assert_allclose(out, vanilla(q, k, v, heads=2), atol=1e-12)


class TestSupport:
    def test_examples(self):
        assert not check_support("performer", CS)
        assert check_support("abc", CC)
        assert check_support("Nystromformer", NS)

    def test_unknown(self):
        with pytest.raises(UnknownMechanismError):
            check_support("reformer", NS)

    def test_csv_export(self):
        lines = core.support_table_csv().splitlines()
        assert lines[0] == "mechanism,NS,CS,NC,CC"
        assert "performer,1,0,1,1" in lines
        assert len(lines) == 11


class TestCausalityProbe:
    def test_vanilla_causal_is_zero(self, rng):
        q, k, v = (rng.standard_normal((6, 4)) for _ in range(3))
        x = AttentionInputs(q, k, v, CS)
        for i in range(6):
            assert causality_probe("vanilla", None, x, i, rng) <= 1e-12

    def test_local_causal_is_zero(self, rng):
        q, k, v = (rng.standard_normal((20, 4)) for _ in range(3))
        x = AttentionInputs(q, k, v, CS)
        assert causality_probe("local", MechanismConfig(window=6), x, 7, rng) <= 1e-12

    def test_negative_control(self, rng):
        """A noncausal computation leaks the future into row 0."""
        q, k, v = (rng.standard_normal((4, 4)) for _ in range(3))
        base = vanilla_attention(AttentionInputs(q, k, v, NS))
        k2, v2 = k.copy(), v.copy()
        k2[1:], v2[1:] = rng.standard_normal((3, 4)), rng.standard_normal((3, 4))
        moved = vanilla_attention(AttentionInputs(q, k2, v2, NS))
        assert np.abs(base[0] - moved[0]).max() > 0

    def test_requires_causal_pattern(self, rng):
        a = rng.standard_normal((4, 4))
        with pytest.raises(UnsupportedPatternError):
            causality_probe("vanilla", None, AttentionInputs(a, a, a, NS), 0)

    def test_unsupported_pair(self, rng):
        a = rng.standard_normal((4, 4))
        with pytest.raises(UnsupportedPatternError):
            causality_probe("performer", None, AttentionInputs(a, a, a, CS), 0)

    def test_position_range(self, rng):
        a = rng.standard_normal((4, 4))
        with pytest.raises(ValueError):
            causality_probe("vanilla", None, AttentionInputs(a, a, a, CS), 4)
