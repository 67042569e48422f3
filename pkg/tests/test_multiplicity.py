import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from releig.multiplicity import bonferroni, correct, holm

pvals = st.lists(st.floats(0.0, 1.0), min_size=1, max_size=8)


class TestBonferroni:
    def test_examples(self):
        assert bonferroni([0.01, 0.2], 0.05).reject_flags.tolist() == [True, False]
        assert bonferroni([0.03, 0.03], 0.05).reject_flags.tolist() == [False, False]
        assert bonferroni([0.04], 0.05).reject_flags.tolist() == [True]

    def test_validation(self):
        with pytest.raises(ValueError):
            bonferroni([], 0.05)
        with pytest.raises(ValueError):
            bonferroni([1.2], 0.05)
        with pytest.raises(ValueError):
            bonferroni([0.1], 0.0)


class TestHolm:
    def test_examples(self):
        assert holm([0.01, 0.03], 0.05).reject_flags.tolist() == [True, True]
        assert holm([0.03, 0.04], 0.05).reject_flags.tolist() == [False, False]

    def test_strict_boundary(self):
        assert holm([0.025, 0.5], 0.05).reject_flags.tolist() == [False, False]

    def test_global_reject(self):
        assert holm([0.001, 0.9], 0.05).global_reject
        assert not holm([0.5, 0.9], 0.05).global_reject

    @settings(max_examples=300, deadline=None)
    @given(pvals, st.sampled_from([0.01, 0.05, 0.1]))
    def test_dominates_bonferroni(self, p, alpha):
        b, h = bonferroni(p, alpha), holm(p, alpha)
        assert np.all(h.reject_flags >= b.reject_flags)

    @settings(max_examples=200, deadline=None)
    @given(pvals, st.randoms(use_true_random=False))
    def test_permutation_equivariant(self, p, rnd):
        perm = list(range(len(p)))
        rnd.shuffle(perm)
        a = holm(p, 0.05).reject_flags
        b = holm([p[i] for i in perm], 0.05).reject_flags
        assert np.array_equal(a[perm], b)


def test_correct_dispatch():
    assert correct([0.01], 0.05, "holm").method == "holm"
    with pytest.raises(ValueError):
        correct([0.01], 0.05, "sidak")
