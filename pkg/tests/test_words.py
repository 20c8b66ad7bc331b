import itertools

import numpy as np
import pytest

from jsrcert import words
from jsrcert.errors import BudgetExceededError, DimensionError, InvalidMatrixError, WordError
from jsrcert.words import MatrixSet

import oracles


def _set(seed=0, K=3, d=2):
    rng = np.random.default_rng(seed)
    return MatrixSet(tuple(rng.uniform(-2, 2, (d, d)) for _ in range(K)))


def test_matrix_set_validation_and_access():
    m = MatrixSet.of(np.eye(2), 2 * np.eye(2))
    assert m.K == 2 and m.dim == 2 and m.names == ("A1", "A2")
    assert m[2][0, 0] == 2.0
    with pytest.raises(ValueError):
        m.members[0][0, 0] = 5.0
    with pytest.raises(DimensionError):
        MatrixSet.of(np.eye(2), np.eye(3))
    with pytest.raises(InvalidMatrixError):
        MatrixSet(())
    with pytest.raises(InvalidMatrixError):
        MatrixSet.of(np.eye(2), names=("x", "y"))


def test_permuted_and_scaled():
    m = _set()
    p = m.permuted([2, 0, 1])
    assert np.array_equal(p[1], m[3]) and p.names[0] == "A3"
    assert np.allclose(m.scaled(3.0)[2], 3.0 * m[2])


def test_word_parsing_and_checking():
    assert words.parse_word("2,1") == (2, 1)
    assert words.format_word((1, 2, 3)) == "1,2,3"
    for bad in ("", "a,1", "0,1"):
        with pytest.raises(WordError):
            words.parse_word(bad)
    with pytest.raises(WordError):
        words.check_word((1, 4), 3)
    with pytest.raises(WordError):
        words.check_word((), 3)


def test_evaluate_is_left_to_right_product():
    m = _set(1)
    w = (2, 1, 3, 3)
    assert np.allclose(words.evaluate(m, w), m[2] @ m[1] @ m[3] @ m[3])


def test_evaluate_scaled_survives_overflow():
    m = MatrixSet.of(np.array([[1e60, 0.0], [0.0, 1.0]]))
    w = (1,) * 20
    prod, exp = words.evaluate_scaled(m, w)
    assert np.isfinite(prod).all() and exp > 0
    with pytest.raises(OverflowError):
        words.evaluate(m, w)
    assert words.root_spectral_radius(m, w) == pytest.approx(1e60, rel=1e-12)


@pytest.mark.parametrize("K,n", [(k, n) for k in (1, 2, 3, 4) for n in range(1, 13) if k**n <= 300_000])
def test_lyndon_counts_match_mobius(K, n):
    assert len(words.lyndon_words(K, n)) == oracles.lyndon_count(K, n) == words.necklace_count(K, n)


@pytest.mark.parametrize("K,n", [(2, 6), (3, 4), (4, 3)])
def test_lyndon_words_match_brute_force(K, n):
    assert words.lyndon_words(K, n) == oracles.brute_lyndon(K, n)


def test_lyndon_small_listing():
    assert words.lyndon_words(2, 4) == [(1, 1, 1, 2), (1, 1, 2, 2), (1, 2, 2, 2)]
    assert all(words.is_lyndon(w) for w in words.lyndon_words(3, 5))


def test_rotate_min():
    assert words.rotate_min((2, 1, 2)) == (1, 2, 2)
    assert words.rotate_min((1,)) == (1,)


def test_budget_enforced():
    with pytest.raises(BudgetExceededError):
        list(words.all_words(3, 10, budget=1000))
    assert len(list(words.all_words(2, 5))) == 32


def test_word_at_matches_lexicographic_order():
    for i, w in enumerate(itertools.product(range(1, 4), repeat=4)):
        assert words.word_at(i, 3, 4) == w


@pytest.mark.parametrize("first", [None, 1, 3])
def test_level_blocks_match_brute_force(first):
    m = _set(2)
    n = 5
    got = {}
    for start, stack in words.level_blocks(m, n, first=first, block_size=8):
        for i, p in enumerate(stack):
            got[start + i] = p
    expected = [w for w in itertools.product(range(1, 4), repeat=n) if first is None or w[0] == first]
    assert len(got) == len(expected)
    for w in expected:
        idx = sum((k - 1) * 3 ** (n - 1 - j) for j, k in enumerate(w))
        assert np.allclose(got[idx], oracles.product(m.members, w))


def test_batch_evaluate():
    m = _set(4)
    ws = [(1, 2, 3), (3, 3, 1)]
    out = words.batch_evaluate(m, ws)
    for w, p in zip(ws, out):
        assert np.allclose(p, oracles.product(m.members, w))
