"""Two-sided bounds on the joint spectral radius.

Lower bounds come from ``rho(A(w)) ** (1/n)`` over Lyndon words (spectral
radius is invariant under rotation, so one word per necklace suffices).  Upper
bounds come from ``max_w ||A(w)|| ** (1/n)`` over *all* words of a completed
depth, minimised over depths.  :func:`refine` adds a Gripenberg-style search
tree that only keeps products whose normalised norm still exceeds the best
lower bound plus ``tol``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from . import smallmat
from .errors import BudgetExceededError
from .words import (
    DEFAULT_BUDGET,
    MatrixSet,
    Word,
    batch_evaluate,
    level_blocks,
    lyndon_words,
    word_at,
)

TIE_REL = 1e-12
LYNDON_CHUNK = 2048


class LowerBound(NamedTuple):
    value: float
    word: Word
    depth: int
    complete: bool


class UpperBound(NamedTuple):
    value: float
    depth: int
    completed_depth: int
    complete: bool
    per_depth: list[tuple[int, float]]


@dataclass
class DepthRow:
    n: int
    lower: float
    lower_word: Word
    upper: float
    running_upper: float


@dataclass
class TreeRow:
    level: int
    survivors: int
    lower: float
    upper: float


@dataclass
class BoundsReport:
    lower: float
    lower_witness: Word
    lower_depth: int
    upper: float
    upper_depth: int
    per_depth: list[DepthRow] = field(default_factory=list)
    tree: list[TreeRow] = field(default_factory=list)
    complete: bool = False
    tol: float = 0.0
    budget: int = 0
    products: int = 0
    upper_source: str = "norm"

    @property
    def gap(self) -> float:
        return self.upper - self.lower


_RADIUS_CHUNK = 256


def _root(x: np.ndarray | float, n: int):
    return np.power(x, 1.0 / n)


def _better(value: float, best: float) -> bool:
    return value > best * (1.0 + TIE_REL) if best > 0 else value > best


def _tied(value: float, best: float) -> bool:
    return abs(value - best) <= TIE_REL * max(abs(best), abs(value))


# ---------------------------------------------------------------------------
# per-depth scans


def _lyndon_chunk(mset: MatrixSet, words: Sequence[Word], n: int) -> tuple[float, Word | None]:
    prods = batch_evaluate(mset, words)
    norms = _root(smallmat.gram_norms(prods), n)
    best, best_word = 0.0, None
    # visit in decreasing norm so the skip threshold rises quickly
    order = np.lexsort((np.arange(len(words)), -norms))
    for i in order:
        if best_word is not None and norms[i] < best * (1.0 - TIE_REL):
            break
        r = smallmat.spectral_radius(prods[i]) ** (1.0 / n)
        w = tuple(words[i])
        if best_word is None or _better(r, best) or (_tied(r, best) and w < best_word):
            best, best_word = r, w
    return best, best_word


def _merge_max(results) -> tuple[float, Word | None]:
    best, best_word = 0.0, None
    for value, w in results:
        if w is None:
            continue
        if best_word is None or _better(value, best) or (_tied(value, best) and w < best_word):
            best, best_word = value, w
    return best, best_word


def _map(fn, items, threads: int):
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def lyndon_level(mset: MatrixSet, n: int, threads: int = 1) -> tuple[float, Word]:
    """Best ``rho(A(w))**(1/n)`` over Lyndon words of length ``n``."""
    words = lyndon_words(mset.K, n)
    if not words:
        # K == 1 and n > 1: the only necklace is periodic
        words = [(1,) * n]
    chunks = [words[i:i + LYNDON_CHUNK] for i in range(0, len(words), LYNDON_CHUNK)]
    return _merge_max(_map(lambda ch: _lyndon_chunk(mset, ch, n), chunks, threads))


def _norm_partition(mset: MatrixSet, n: int, first: int | None,
                    collect_rel: float | None) -> tuple[float, int, list[tuple[int, float]]]:
    best, best_idx = -1.0, -1
    hits: list[tuple[int, float]] = []
    for start, blk in level_blocks(mset, n, first):
        norms = smallmat.gram_norms(blk)
        m = float(norms.max())
        if m > best:
            if best_idx < 0 or _better(m, best):
                # earliest index within the tie band of the block maximum
                best_idx = start + int(np.argmax(norms >= m * (1.0 - TIE_REL)))
            best = m
        if collect_rel is not None:
            keep = np.nonzero(norms >= m * (1.0 - collect_rel))[0]
            hits.extend((start + int(k), float(norms[k])) for k in keep)
    return best, best_idx, hits


def norm_level(mset: MatrixSet, n: int, threads: int = 1,
               collect_rel: float | None = None) -> tuple[float, Word, list[Word]]:
    """Maximum operator norm over all words of length ``n``.

    Returns ``(max_norm, first_argmax_word, tied_words)``; ``tied_words`` is
    filled only when ``collect_rel`` is given and lists every word within that
    relative distance of the maximum, in lexicographic order.
    """
    K = mset.K
    parts = [None] if K == 1 or n == 1 else list(range(1, K + 1))
    results = _map(lambda f: _norm_partition(mset, n, f, collect_rel), parts, threads)
    best, best_idx = -1.0, -1
    hits: list[tuple[int, float]] = []
    for value, idx, part_hits in results:
        if best_idx < 0 or _better(value, best):
            best_idx = idx
        best = max(best, value)
        hits.extend(part_hits)
    tied = []
    if collect_rel is not None:
        tied = [word_at(i, K, n) for i, v in sorted(hits) if v >= best * (1.0 - collect_rel)]
    return best, word_at(best_idx, K, n), tied


# ---------------------------------------------------------------------------


def lower_bound(mset: MatrixSet, max_depth: int, budget: int = DEFAULT_BUDGET,
                threads: int = 1) -> LowerBound:
    """Max of ``rho(A(w))**(1/n)`` over Lyndon words with ``n <= max_depth``.

    If the Lyndon enumeration of a depth would exceed ``budget`` words in
    total, the scan stops and the result is flagged incomplete.
    """
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    best, best_word, depth = 0.0, None, 0
    used = 0
    complete = True
    for n in range(1, max_depth + 1):
        cost = max(1, mset.K**n // n)
        if used + cost > budget:
            complete = False
            break
        used += cost
        value, w = lyndon_level(mset, n, threads)
        if best_word is None or _better(value, best):
            best, best_word, depth = value, w, n
    if best_word is None:
        raise BudgetExceededError(mset.K, budget, "lower bound at depth 1")
    return LowerBound(best, best_word, depth, complete)


def upper_bound(mset: MatrixSet, max_depth: int, budget: int = DEFAULT_BUDGET,
                threads: int = 1) -> UpperBound:
    """Running minimum over completed depths of ``max_w ||A(w)||**(1/n)``."""
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    best, best_n, done = math.inf, 0, 0
    rows: list[tuple[int, float]] = []
    used = 0
    for n in range(1, max_depth + 1):
        cost = mset.K**n
        if used + cost > budget:
            break
        used += cost
        value = _root(norm_level(mset, n, threads)[0], n)
        rows.append((n, float(value)))
        done = n
        if value < best:
            best, best_n = float(value), n
    if done == 0:
        raise BudgetExceededError(mset.K, budget, "upper bound at depth 1")
    return UpperBound(best, best_n, done, done == max_depth, rows)


def optimal_word(mset: MatrixSet, n: int, budget: int = DEFAULT_BUDGET,
                 threads: int = 1) -> tuple[Word, float]:
    """Length-``n`` word of largest operator norm (lexicographically least on ties)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if mset.K**n > budget:
        raise BudgetExceededError(mset.K**n, budget, f"optimal word at n={n}")
    value, w, _ = norm_level(mset, n, threads)
    return w, value


def optimal_words(mset: MatrixSet, n: int, rel: float = TIE_REL,
                  budget: int = DEFAULT_BUDGET, threads: int = 1) -> tuple[list[Word], float]:
    """Every length-``n`` word whose norm ties the maximum within ``rel``."""
    if mset.K**n > budget:
        raise BudgetExceededError(mset.K**n, budget, f"optimal words at n={n}")
    value, _, tied = norm_level(mset, n, threads, collect_rel=rel)
    return tied, value


# ---------------------------------------------------------------------------


def refine(mset: MatrixSet, tol: float = 1e-9, budget: int = 200_000,
           max_depth: int = 8, max_level: int = 64, threads: int = 1) -> BoundsReport:
    """Tighten lower and upper bounds until ``upper - lower <= tol``.

    First every depth up to ``max_depth`` is enumerated in full (Lyndon words
    for the lower bound, all words for the norm bound), stopping early once
    the gap closes.  Then a search tree is grown level by level: a product P
    of length m is discarded once ``||P||**(1/m) <= lower + tol``.  Every
    infinite product splits into discarded pieces and surviving length-m
    pieces, so ``max(lower + tol, max_survivors ||P||**(1/m))`` is an upper
    bound at each level; the tree stops when it dies out, the gap closes,
    ``max_level`` is reached or ``budget`` products have been formed.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    K = mset.K
    rep = BoundsReport(lower=0.0, lower_witness=(1,), lower_depth=1, upper=math.inf,
                       upper_depth=0, tol=tol, budget=budget)
    have_lower = False

    def offer_lower(value: float, w: Word):
        nonlocal have_lower
        if not have_lower or _better(value, rep.lower) or (
                _tied(value, rep.lower) and (len(w), w) < (len(rep.lower_witness), rep.lower_witness)):
            rep.lower, rep.lower_witness, rep.lower_depth = value, w, len(w)
            have_lower = True

    for n in range(1, max_depth + 1):
        n_lyn = max(1, len(lyndon_words(K, n)))
        cost = K**n + n_lyn
        if rep.products + cost > budget:
            break
        rep.products += cost
        lo, lo_w = lyndon_level(mset, n, threads)
        up = float(_root(norm_level(mset, n, threads)[0], n))
        offer_lower(lo, lo_w)
        if up < rep.upper:
            rep.upper, rep.upper_depth, rep.upper_source = up, n, "norm"
        rep.per_depth.append(DepthRow(n, lo, lo_w, up, rep.upper))
        if rep.upper - rep.lower <= tol:
            rep.complete = True
            return rep

    _grow_tree(mset, rep, offer_lower, tol, budget, max_level)
    if not have_lower:
        offer_lower(0.0, (1,))
    rep.complete = rep.upper - rep.lower <= tol
    return rep


def _grow_tree(mset: MatrixSet, rep: BoundsReport, offer_lower, tol: float,
               budget: int, max_level: int) -> None:
    K, d = mset.K, mset.dim
    mats = mset.stack
    # survivors are stored normalised: product = mat * exp(logscale)
    mat = np.eye(d)[None]
    logscale = np.zeros(1)
    letters = np.zeros((1, 0), dtype=np.int16)
    for m in range(1, max_level + 1):
        n_child = mat.shape[0] * K
        if rep.products + n_child > budget:
            return
        rep.products += n_child
        child = (mat[:, None] @ mats[None]).reshape(-1, d, d)
        clog = np.repeat(logscale, K)
        cletters = np.concatenate(
            [np.repeat(letters, K, axis=0), np.tile(np.arange(1, K + 1, dtype=np.int16), mat.shape[0])[:, None]],
            axis=1)
        norms = smallmat.gram_norms(child)
        with np.errstate(divide="ignore"):
            lognorm = np.log(norms) + clog
        growth = np.exp(lognorm / m)
        # lower bound: only products whose norm can beat the current lower
        cand = np.nonzero(growth > rep.lower * (1.0 + TIE_REL))[0]
        cand = cand[np.lexsort((cand, -growth[cand]))]
        if d > 2 and len(cand):
            # rho(P) <= ||P^8||_F^(1/8): a vectorised screen ahead of the scalar QR
            p8 = child[cand]
            for _ in range(3):
                p8 = p8 @ p8
            with np.errstate(divide="ignore", over="ignore"):
                screen = np.exp((np.log(np.sqrt(np.einsum("bij,bij->b", p8, p8))) / 8.0 + clog[cand]) / m)
            cand = cand[~(screen < rep.lower * (1.0 - TIE_REL))]
        # radii are vectorised only for d <= 2; otherwise grow chunks from small
        # so an early break wastes little work
        size = _RADIUS_CHUNK if d <= 2 else 4
        start = 0
        while start < len(cand):
            chunk = cand[start:start + size]
            start += size
            size = min(2 * size, _RADIUS_CHUNK)
            if growth[chunk[0]] <= rep.lower * (1.0 + TIE_REL):
                break
            radii = smallmat.spectral_radii(child[chunk])
            with np.errstate(divide="ignore"):
                values = np.exp((np.log(radii) + clog[chunk]) / m)
            for i, r, v in zip(chunk, radii, values):
                if growth[i] <= rep.lower * (1.0 + TIE_REL):
                    break
                # the lower bound only rises, so values below it can never be offered usefully
                if r > 0.0 and v >= rep.lower * (1.0 - TIE_REL):
                    offer_lower(float(v), tuple(int(k) for k in cletters[i]))
        keep = growth > rep.lower + tol
        level_upper = max(rep.lower + tol, float(growth[keep].max()) if np.any(keep) else 0.0)
        if level_upper < rep.upper:
            rep.upper, rep.upper_depth, rep.upper_source = level_upper, m, "tree"
        rep.tree.append(TreeRow(m, int(keep.sum()), rep.lower, level_upper))
        if not np.any(keep) or rep.upper - rep.lower <= tol:
            return
        sel = np.nonzero(keep)[0]
        scale = norms[sel]
        mat = child[sel] / scale[:, None, None]
        logscale = lognorm[sel]
        letters = cletters[sel]
