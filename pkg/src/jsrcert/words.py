"""Words over the alphabet {1, ..., K} and the matrix products they name.

A word is a tuple of 1-based letters; ``(k1, ..., kn)`` evaluates to the
left-to-right product ``A[k1] @ ... @ A[kn]``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from . import smallmat
from .errors import BudgetExceededError, DimensionError, InvalidMatrixError, WordError

Word = tuple[int, ...]

DEFAULT_BUDGET = 10**7
BLOCK_SIZE = 1 << 14
_RENORM_AT = 1e100


@dataclass(frozen=True)
class MatrixSet:
    """Ordered finite family of real d x d matrices sharing one dimension."""

    members: tuple[np.ndarray, ...]
    names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if len(self.members) < 1:
            raise InvalidMatrixError("a matrix set needs at least one member")
        mats = tuple(smallmat.as_matrix(m) for m in self.members)
        dims = {m.shape[0] for m in mats}
        if len(dims) != 1:
            raise DimensionError(f"members have mixed dimensions {sorted(dims)}")
        for m in mats:
            m.setflags(write=False)
        object.__setattr__(self, "members", mats)
        names = tuple(self.names) or tuple(f"A{k}" for k in range(1, len(mats) + 1))
        if len(names) != len(mats):
            raise InvalidMatrixError("names and members differ in length")
        object.__setattr__(self, "names", names)

    @classmethod
    def of(cls, *mats, names: Sequence[str] = ()) -> "MatrixSet":
        return cls(tuple(mats), tuple(names))

    @property
    def K(self) -> int:
        return len(self.members)

    @property
    def dim(self) -> int:
        return self.members[0].shape[0]

    @property
    def stack(self) -> np.ndarray:
        return np.stack(self.members)

    def __len__(self) -> int:
        return len(self.members)

    def __getitem__(self, letter: int) -> np.ndarray:
        """1-based access, matching word letters."""
        return self.members[letter - 1]

    def scaled(self, c: float) -> "MatrixSet":
        return MatrixSet(tuple(c * m for m in self.members), self.names)

    def normalised(self) -> tuple["MatrixSet", int]:
        """Exact power-of-two rescaling to peak entry in (0.5, 1].

        Returns the rescaled set and the exponent ``e`` with
        ``self == 2**e * result``.
        """
        peak = max(float(np.max(np.abs(m))) for m in self.members)
        if peak == 0.0:
            return self, 0
        mant, e = math.frexp(peak)
        if mant == 0.5:
            e -= 1
        if e == 0:
            return self, 0
        return MatrixSet(tuple(np.ldexp(m, -e) for m in self.members), self.names), e

    def permuted(self, order: Sequence[int]) -> "MatrixSet":
        """Reorder members; ``order`` lists old 0-based positions."""
        return MatrixSet(tuple(self.members[i] for i in order),
                         tuple(self.names[i] for i in order))


def check_word(w: Sequence[int], K: int) -> Word:
    w = tuple(int(k) for k in w)
    if not w:
        raise WordError("empty word")
    bad = [k for k in w if not 1 <= k <= K]
    if bad:
        raise WordError(f"letter {bad[0]} outside alphabet 1..{K}")
    return w


def format_word(w: Sequence[int]) -> str:
    return ",".join(str(k) for k in w)


def parse_word(text: str) -> Word:
    try:
        w = tuple(int(tok) for tok in text.split(","))
    except ValueError:
        raise WordError(f"cannot parse word {text!r}") from None
    if not w or any(k < 1 for k in w):
        raise WordError(f"cannot parse word {text!r}")
    return w


def evaluate_scaled(mset: MatrixSet, w: Sequence[int]) -> tuple[np.ndarray, int]:
    """Product of ``w`` as ``(M, e)`` with the true product equal to ``M * 2**e``.

    The product is renormalised by a power of two whenever an entry exceeds
    1e100, so arbitrarily long words stay finite.
    """
    w = check_word(w, mset.K)
    prod = np.array(mset[w[0]], copy=True)
    exp = 0
    for k in w[1:]:
        prod = prod @ mset[k]
        big = float(np.max(np.abs(prod)))
        if big > _RENORM_AT:
            shift = math.frexp(big)[1]
            prod = np.ldexp(prod, -shift)
            exp += shift
    return prod, exp


def evaluate(mset: MatrixSet, w: Sequence[int]) -> np.ndarray:
    prod, exp = evaluate_scaled(mset, w)
    with np.errstate(over="ignore"):
        out = np.ldexp(prod, exp) if exp else prod
    if not np.all(np.isfinite(out)):
        raise OverflowError("product overflows binary64; use evaluate_scaled")
    return out


def root_spectral_radius(mset: MatrixSet, w: Sequence[int]) -> float:
    """``rho(A(w)) ** (1/|w|)``, safe against overflow for long words."""
    prod, exp = evaluate_scaled(mset, w)
    r = smallmat.spectral_radius(prod)
    if r == 0.0:
        return 0.0
    return math.exp((math.log(r) + exp * math.log(2.0)) / len(w))


def lyndon_words(K: int, n: int) -> list[Word]:
    """All Lyndon words of length exactly ``n`` over ``{1..K}``, sorted.

    Uses Duval's generation of Lyndon words in lexicographic order.
    """
    if K < 1 or n < 1:
        raise ValueError("K and n must be positive")
    out: list[Word] = []
    w = [-1]
    while w:
        w[-1] += 1
        m = len(w)
        if m == n:
            out.append(tuple(k + 1 for k in w))
        while len(w) < n:
            w.append(w[len(w) - m])
        while w and w[-1] == K - 1:
            w.pop()
    return out


def necklace_count(K: int, n: int) -> int:
    """Number of aperiodic necklaces (Möbius formula)."""
    total = 0
    for e in range(1, n + 1):
        if n % e == 0:
            total += _mobius(e) * K ** (n // e)
    return total // n


def _mobius(n: int) -> int:
    result = 1
    p = 2
    while p * p <= n:
        if n % p == 0:
            n //= p
            if n % p == 0:
                return 0
            result = -result
        p += 1
    if n > 1:
        result = -result
    return result


def check_budget(K: int, n: int, budget: int, what: str = "enumeration") -> int:
    count = K**n
    if count > budget:
        raise BudgetExceededError(count, budget, what)
    return count


def all_words(K: int, n: int, budget: int = DEFAULT_BUDGET) -> Iterator[Word]:
    """All ``K**n`` words of length ``n`` in lexicographic order."""
    if K < 1 or n < 1:
        raise ValueError("K and n must be positive")
    check_budget(K, n, budget)
    return itertools.product(range(1, K + 1), repeat=n)


def word_at(index: int, K: int, n: int) -> Word:
    """The word at position ``index`` of the lexicographic order of K**n words."""
    letters = []
    for _ in range(n):
        index, r = divmod(index, K)
        letters.append(r + 1)
    return tuple(reversed(letters))


def rotate_min(w: Sequence[int]) -> Word:
    """Lexicographically least rotation."""
    w = tuple(w)
    if not w:
        raise WordError("empty word")
    return min(w[i:] + w[:i] for i in range(len(w)))


def is_lyndon(w: Sequence[int]) -> bool:
    w = tuple(w)
    return all(w < w[i:] + w[:i] for i in range(1, len(w)))


def batch_evaluate(mset: MatrixSet, words: Sequence[Sequence[int]]) -> np.ndarray:
    """Products of many equal-length words as a ``(N, d, d)`` stack."""
    if len(words) == 0:
        return np.zeros((0, mset.dim, mset.dim))
    idx = np.asarray(words, dtype=np.intp) - 1
    mats = mset.stack
    prod = mats[idx[:, 0]].copy()
    for j in range(1, idx.shape[1]):
        prod = prod @ mats[idx[:, j]]
    return prod


def _suffix_stack(mats: np.ndarray, s: int) -> np.ndarray:
    d = mats.shape[1]
    out = np.eye(d)[None]
    for _ in range(s):
        out = (out[:, None] @ mats[None]).reshape(-1, d, d)
    return out


def level_blocks(mset: MatrixSet, n: int, first: int | None = None,
                 block_size: int = BLOCK_SIZE) -> Iterator[tuple[int, np.ndarray]]:
    """Products of all length-``n`` words in lexicographic order, in blocks.

    Yields ``(start, stack)`` where ``stack[i]`` is the product of
    ``word_at(start + i, K, n)``.  Prefixes are walked depth-first with their
    partial products kept on a stack; each prefix is extended by a cached
    block of all suffix products.  With ``first`` set, only words starting
    with that letter are produced (``start`` stays a global index).
    """
    K = mset.K
    mats = mset.stack
    free = n - 1 if first is not None else n
    s = 0
    while s < free and K ** (s + 1) <= block_size:
        s += 1
    suffix = _suffix_stack(mats, s)
    plen = free - s
    offset = 0 if first is None else (first - 1) * K ** (n - 1)
    width = K**s
    base = np.eye(mset.dim) if first is None else mats[first - 1]

    if plen == 0:
        yield offset, base @ suffix
        return
    # depth-first walk over prefixes of length plen
    stack = [base]
    letters: list[int] = []
    pindex = 0
    def descend():
        while len(letters) < plen:
            letters.append(0)
            stack.append(stack[-1] @ mats[0])
    descend()
    while True:
        yield offset + pindex * width, stack[-1] @ suffix
        pindex += 1
        while letters and letters[-1] == K - 1:
            letters.pop()
            stack.pop()
        if not letters:
            return
        letters[-1] += 1
        stack.pop()
        stack.append(stack[-1] @ mats[letters[-1]])
        descend()
