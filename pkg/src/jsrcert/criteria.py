"""Spectral-finiteness detectors and certificate construction.

Every detector returns a :class:`Certificate` when its hypotheses hold and
``None`` otherwise.  ``None`` only means "this criterion does not apply"; it
is never evidence against finiteness.
"""

from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import smallmat
from .bounds import BoundsReport, optimal_words, refine
from .errors import BudgetExceededError, CrossValidationError
from .smallmat import EQ_TOL, MEMBERSHIP_TOL, SYM_TOL
from .words import DEFAULT_BUDGET, MatrixSet, Word, evaluate, level_blocks, root_spectral_radius, word_at

log = logging.getLogger(__name__)

CRITERIA = ("Thm1", "ThmA", "ThmB", "ThmC", "ThmD", "ThmE", "ThmF", "ThmG", "ThmH",
            "Cor3", "Cor4", "Prop5", "Kozyakin")

WORD_TOL = 1e-9
CROSSVAL_TOL = 1e-6
RANK_TOL = 1e-10
_SWAP = np.array([[0.0, 1.0], [1.0, 0.0]])


@dataclass
class Certificate:
    """A finiteness claim: ``value`` is the joint spectral radius and, when
    present, ``word`` realises it as ``rho(A(word)) ** (1/len(word))``."""

    criterion: str
    value: float
    word: Word | None
    optimal_word: Word | None = None
    witness: dict[str, np.ndarray] = field(default_factory=dict)
    tolerances: dict[str, float] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.criterion not in CRITERIA:
            raise ValueError(f"unknown criterion {self.criterion!r}")
        if not self.value >= 0:
            raise ValueError("certificate value must be non-negative")
        self.tolerances.setdefault("word", WORD_TOL)


@dataclass
class StabilityVerdict:
    stable: bool | None
    reason: str
    spectral_radii: list[float]
    margin: float | None = None
    witness: int | None = None


@dataclass
class CertifyConfig:
    eq_tol: float = EQ_TOL
    membership_tol: float = MEMBERSHIP_TOL
    sym_tol: float = SYM_TOL
    n_max: int = 4
    budget: int = DEFAULT_BUDGET
    threads: int = 1
    refine_tol: float = 1e-9
    refine_depth: int = 8
    refine_budget: int = 200_000
    refine_max_level: int = 64
    crossval_tol: float = CROSSVAL_TOL
    cor3_roles: dict | None = None
    kozyakin: object | None = None  # kozyakin.KozyakinConfig
    run_kozyakin: bool = True


def _letter_of_max(values: Sequence[float]) -> tuple[float, int]:
    """Maximum value and the 1-based letter of its first occurrence (ties 1e-12)."""
    best = max(values)
    for k, v in enumerate(values, start=1):
        if v >= best * (1.0 - 1e-12):
            return best, k
    raise AssertionError("unreachable")


def _radii(mset: MatrixSet) -> list[float]:
    return [smallmat.spectral_radius(m) for m in mset.members]


def _max_radius_cert(mset: MatrixSet, criterion: str, **kw) -> Certificate:
    value, k = _letter_of_max(_radii(mset))
    return Certificate(criterion, value, (k,), **kw)


def _scale(mset: MatrixSet) -> float:
    return max(1.0, max(float(np.max(np.abs(m))) for m in mset.members))


def _scale_free(check):
    """Run ``check`` on the set rescaled to unit peak entry.

    Every criterion is homogeneous in the set, while the structural tests
    compare entries against tolerances floored at 1.  Rescaling first (by a
    power of two, so exactly) makes those tolerances relative.  The value is
    scaled back; witness matrices stay in rescaled units and
    ``details["scale_exponent"]`` records ``e`` in ``set = 2**e * rescaled``.
    """
    @functools.wraps(check)
    def wrapper(mset: MatrixSet, *args, **kwargs):
        unit, e = mset.normalised()
        if e == 0:
            return check(mset, *args, **kwargs)
        cert = check(unit, *args, **kwargs)
        if cert is not None:
            cert.value = math.ldexp(cert.value, e)
            cert.details["scale_exponent"] = e
            if cert.witness:
                cert.notes.append("witness matrices refer to the set divided by 2**scale_exponent")
        return cert
    return wrapper


# ---------------------------------------------------------------------------
# Gram-membership criterion


def find_member(mset: MatrixSet, n: int, target: np.ndarray, tol: float = MEMBERSHIP_TOL,
                budget: int = DEFAULT_BUDGET) -> Word | None:
    """Lexicographically first length-``n`` word whose product equals ``target``.

    Equality is relative, ``max|P - target| <= tol * max(||P||, ||target||)``,
    with no absolute floor: near-nilpotent sets have tiny Gram products that an
    absolute test would match with anything small.
    """
    K = mset.K
    if K**n > budget:
        raise BudgetExceededError(K**n, budget, f"membership search at length {n}")
    tnorm = smallmat.operator_norm(target)
    for start, blk in level_blocks(mset, n):
        diff = np.max(np.abs(blk - target), axis=(1, 2))
        fro = np.sqrt(np.einsum("bij,bij->b", blk, blk))
        # Frobenius bounds the operator norm, so this prefilter never drops a match
        cand = np.nonzero(diff <= tol * np.maximum(tnorm, fro))[0]
        for i in cand:
            scale = max(tnorm, smallmat.operator_norm(blk[i]))
            if diff[i] <= tol * scale:
                return word_at(start + int(i), K, n)
    return None


def check_theorem1(mset: MatrixSet, n: int, tol: float = MEMBERSHIP_TOL,
                   budget: int = DEFAULT_BUDGET, threads: int = 1) -> Certificate | None:
    """Look for an (A, n)-optimal word whose Gram product is itself a product.

    All norm-maximising words of length ``n`` (ties within 1e-12) are tried,
    each with ``PᵀP`` first and then ``PPᵀ``; the first member word of length
    ``2n`` found is recorded.  Raises :class:`BudgetExceededError` when the
    search space exceeds ``budget``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if mset.K ** (2 * n) > budget:
        raise BudgetExceededError(mset.K ** (2 * n), budget, f"Gram membership at n={n}")
    tied, norm = optimal_words(mset, n, budget=budget, threads=threads)
    # membership is scale-equivariant; search at unit scale so the tolerance is relative
    unit, _ = mset.normalised()
    for w in tied:
        prod = evaluate(mset, w)
        uprod = evaluate(unit, w)
        for order, gram, ugram in (("PtP", prod.T @ prod, uprod.T @ uprod),
                                   ("PPt", prod @ prod.T, uprod @ uprod.T)):
            member = find_member(unit, 2 * n, ugram, tol, budget)
            if member is not None:
                return Certificate(
                    "Thm1", norm ** (1.0 / n), member, optimal_word=w,
                    witness={"product": prod, "gram": gram},
                    tolerances={"membership": tol, "tie": 1e-12},
                    details={"n": n, "gram_order": order, "optimal_norm": norm},
                )
    return None


# ---------------------------------------------------------------------------
# classical catalogue


@_scale_free
def check_symmetric(mset: MatrixSet, tol: float = SYM_TOL) -> Certificate | None:
    if not all(smallmat.is_symmetric(m, tol) for m in mset.members):
        return None
    return _max_radius_cert(mset, "ThmA", tolerances={"symmetry": tol})


@_scale_free
def check_normal(mset: MatrixSet, tol: float = EQ_TOL) -> Certificate | None:
    for m in mset.members:
        if not smallmat.approx_equal(m.T @ m, m @ m.T, tol):
            return None
    return _max_radius_cert(
        mset, "ThmB", tolerances={"normality": tol},
        notes=["value max_k rho(A_k) derived from ||M|| = rho(M) for normal M; "
               "depth-1 lower and upper bounds coincide"])


@_scale_free
def check_transpose_closed(mset: MatrixSet, tol: float = EQ_TOL,
                           membership_tol: float = MEMBERSHIP_TOL) -> Certificate | None:
    for m in mset.members:
        if not any(smallmat.approx_equal(m.T, other, tol) for other in mset.members):
            return None
    cert = check_theorem1(mset, 1, membership_tol)
    if cert is None:  # pragma: no cover - guaranteed by closure under transpose
        raise AssertionError("transpose-closed set failed Gram membership at n=1")
    cert.criterion = "ThmC"
    cert.tolerances["transpose"] = tol
    return cert


def _is_sign_matrix(m: np.ndarray) -> bool:
    return bool(np.all(np.isin(m, (-1.0, 0.0, 1.0))))


def _computed_cert(mset: MatrixSet, criterion: str, config: CertifyConfig,
                   note: str) -> Certificate:
    rep = refine(mset, config.refine_tol, config.refine_budget, config.refine_depth,
                 config.refine_max_level, config.threads)
    notes = [note, f"value computed by bound refinement (gap {rep.gap:.3e})"]
    if not rep.complete:
        notes.append("refinement did not close the gap; value is the best lower bound")
    return Certificate(criterion, rep.lower, rep.lower_witness,
                       tolerances={"refine": config.refine_tol},
                       notes=notes,
                       details={"gap": rep.gap, "upper": rep.upper, "complete": rep.complete})


@_scale_free
def check_sign_pair(mset: MatrixSet, config: CertifyConfig | None = None) -> Certificate | None:
    if mset.K != 2 or mset.dim != 2 or not all(_is_sign_matrix(m) for m in mset.members):
        return None
    return _computed_cert(mset, "ThmD", config or CertifyConfig(),
                          "finiteness guaranteed for 2x2 sign-matrix pairs; no closed-form value")


def _pair_cert(mset: MatrixSet, criterion: str, candidates: list[tuple[float, Word]],
               **kw) -> Certificate:
    best = max(v for v, _ in candidates)
    for v, w in candidates:
        if v >= best * (1.0 - 1e-12):
            return Certificate(criterion, v, w, **kw)
    raise AssertionError("unreachable")


def check_negative_determinants(mset: MatrixSet) -> Certificate | None:
    if mset.K != 2 or mset.dim != 2:
        return None
    a, b = mset.members
    if not (np.linalg.det(a) < 0 and np.linalg.det(b) < 0):
        return None
    return _pair_cert(mset, "ThmE", [
        (smallmat.spectral_radius(a), (1,)),
        (smallmat.spectral_radius(b), (2,)),
        (math.sqrt(smallmat.spectral_radius(a @ b)), (1, 2)),
    ])


@_scale_free
def check_swap_conjugate(mset: MatrixSet, tol: float = EQ_TOL) -> Certificate | None:
    if mset.K != 2 or mset.dim != 2:
        return None
    left, right = mset.members
    if not smallmat.approx_equal(left, _SWAP @ right @ _SWAP, tol):
        return None
    return _pair_cert(mset, "ThmF", [
        (smallmat.spectral_radius(left), (1,)),
        (math.sqrt(smallmat.spectral_radius(left @ right)), (1, 2)),
    ], tolerances={"swap": tol})


@_scale_free
def check_offdiag_flip(mset: MatrixSet, tol: float = EQ_TOL) -> Certificate | None:
    if mset.K != 2 or mset.dim != 2:
        return None
    a, b = mset.members
    flipped = a * np.array([[1.0, -1.0], [-1.0, 1.0]])
    if not smallmat.approx_equal(b, flipped, tol):
        return None
    bc = a[0, 1] * a[1, 0]
    if bc >= 0:
        return Certificate("ThmG", smallmat.spectral_radius(a), (1,),
                           tolerances={"flip": tol}, details={"bc": bc})
    return Certificate("ThmG", math.sqrt(smallmat.spectral_radius(a @ b)), (1, 2),
                       tolerances={"flip": tol}, details={"bc": bc})


def is_rank_one(m: np.ndarray, tol: float = RANK_TOL) -> bool:
    sv = smallmat.singular_values(m)
    return len(sv) >= 2 and sv[0] > 0 and sv[1] < tol * sv[0]


@_scale_free
def check_rank_one(mset: MatrixSet, config: CertifyConfig | None = None) -> Certificate | None:
    if mset.K != 2 or mset.dim < 2 or not any(is_rank_one(m) for m in mset.members):
        return None
    return _computed_cert(mset, "ThmH", config or CertifyConfig(),
                          "finiteness guaranteed when one member has rank one; no closed-form value")


# ---------------------------------------------------------------------------
# shared off-diagonal ray families


def _collinear(u: np.ndarray, v: np.ndarray, tol: float) -> bool:
    cross = abs(u[0] * v[1] - u[1] * v[0])
    return cross <= tol * max(1.0, float(np.hypot(*u))) * max(1.0, float(np.hypot(*v)))


def _offdiag(m: np.ndarray) -> np.ndarray:
    return np.array([m[0, 1], m[1, 0]])


def detect_cor3_roles(mset: MatrixSet, tol: float = EQ_TOL,
                      roles: dict | None = None) -> tuple[int, list[int], int | None, list[str]] | None:
    """Assign members to the ``A0``, ``A_i`` and ``B`` roles.

    Returns ``(a0, a_members, b_member, notes)`` with 1-based letters, or
    ``None`` when some member fits neither template.  ``roles`` may fix the
    assignment as ``{"A0": letter, "B": letter_or_None}``.
    """
    if mset.dim != 2 or mset.K < 2:
        return None
    notes: list[str] = []
    mats = mset.members
    scale = _scale(mset)
    if roles is not None:
        a0 = int(roles["A0"])
        b_member = roles.get("B")
        b_member = None if b_member is None else int(b_member)
    else:
        a0 = next((k for k, m in enumerate(mats, 1)
                   if np.max(np.abs(_offdiag(m))) > tol * scale), 1)
        b_member = None
    ray = _offdiag(mats[a0 - 1])
    root_ray = np.sqrt(np.abs(ray))
    a_members = [a0]
    for k, m in enumerate(mats, 1):
        if k == a0:
            continue
        od = _offdiag(m)
        fits_a = _collinear(od, ray, tol) if np.any(ray) else bool(np.max(np.abs(od)) <= tol * scale)
        fits_b = _collinear(od, root_ray, tol) if np.any(root_ray) else bool(np.max(np.abs(od)) <= tol * scale)
        if roles is not None:
            if k == b_member:
                if not fits_b:
                    return None
            elif not fits_a:
                return None
            else:
                a_members.append(k)
            continue
        if fits_a:
            if fits_b:
                notes.append(f"member {k} fits both roles; assigned to the A-role")
            a_members.append(k)
        elif fits_b and b_member is None:
            b_member = k
        else:
            return None
    return a0, a_members, b_member, notes


@_scale_free
def check_corollary3(mset: MatrixSet, tol: float = EQ_TOL,
                     roles: dict | None = None) -> Certificate | None:
    """Shared off-diagonal ray family plus one small ``B`` member."""
    found = detect_cor3_roles(mset, tol, roles)
    if found is None:
        return None
    a0, a_members, b_member, notes = found
    b, c = _offdiag(mset[a0])
    scale = _scale(mset)
    bc = b * c
    if bc < -tol * scale * scale:
        return None
    radii = [smallmat.spectral_radius(mset[k]) for k in a_members]
    top = max(radii)
    details = {"A0": a0, "A_members": a_members, "B": b_member, "bc": bc}
    if b_member is not None:
        bnorm = smallmat.operator_norm(mset[b_member])
        if bnorm > top * (1.0 + tol) + tol:
            return None
        details["B_norm"] = bnorm
    value, i = _letter_of_max(radii)
    return Certificate("Cor3", value, (a_members[i - 1],), tolerances={"shape": tol},
                       notes=notes, details=details)


@_scale_free
def check_corollary4(mset: MatrixSet, tol: float = EQ_TOL) -> Certificate | None:
    """Diagonal member paired with a 2x2 member whose off-diagonal product is >= 0."""
    if mset.K != 2 or mset.dim != 2:
        return None
    scale = _scale(mset)
    for diag_k in (1, 2):
        d_mat, other = mset[diag_k], mset[3 - diag_k]
        if np.max(np.abs(_offdiag(d_mat))) > tol * scale:
            continue
        if other[0, 1] * other[1, 0] < -tol * scale * scale:
            continue
        return _max_radius_cert(mset, "Cor4", tolerances={"shape": tol},
                                details={"diagonal": diag_k})
    return None


def _is_diagonal(m: np.ndarray, tol: float) -> bool:
    return bool(np.max(np.abs(m - np.diag(np.diag(m)))) <= tol)


def _is_antidiagonal(m: np.ndarray, tol: float) -> bool:
    flipped = m[:, ::-1]
    return _is_diagonal(flipped, tol)


@_scale_free
def check_prop5(mset: MatrixSet, tol: float = EQ_TOL) -> Certificate | None:
    """Diagonal member paired with an anti-diagonal member, any dimension."""
    if mset.K != 2:
        return None
    thr = tol * _scale(mset)
    a, b = mset.members
    if (_is_diagonal(a, thr) and _is_antidiagonal(b, thr)) or (
            _is_diagonal(b, thr) and _is_antidiagonal(a, thr)):
        return _max_radius_cert(mset, "Prop5", tolerances={"shape": tol})
    return None


def antidiag_radius(values: Sequence[float]) -> float:
    """Closed-form spectral radius of an anti-diagonal matrix (test oracle)."""
    d = len(values)
    pairs = [math.sqrt(abs(values[i] * values[d - 1 - i])) for i in range(d // 2)]
    if d % 2:
        pairs.append(abs(values[d // 2]))
    return max(pairs) if pairs else 0.0


def decide_stability(mset: MatrixSet, tol: float = EQ_TOL,
                     roles: dict | None = None) -> StabilityVerdict:
    """Absolute stability for sets passing the shared-ray gates.

    Under those gates the joint spectral radius is ``max rho(A_k)`` over the
    A-members, so the set is absolutely stable iff that maximum is below one.
    """
    found = detect_cor3_roles(mset, tol, roles)
    cert = check_corollary3(mset, tol, roles)
    radii = _radii(mset)
    if cert is None or found is None:
        return StabilityVerdict(None, "undecidable: shared-ray gates (Cor3) do not hold", radii)
    a_radii = [radii[k - 1] for k in found[1]]
    top = max(a_radii)
    witness = cert.word[0]
    stable = top < 1.0 - tol
    reason = "Cor3 gates hold; max rho(A_k) " + ("< 1" if stable else ">= 1")
    return StabilityVerdict(stable, reason, radii, margin=1.0 - top,
                            witness=None if stable else witness)


# ---------------------------------------------------------------------------


def cross_validate(mset: MatrixSet, cert: Certificate, bounds: BoundsReport,
                   tol: float = CROSSVAL_TOL) -> None:
    """Raise :class:`CrossValidationError` if ``cert`` contradicts ``bounds``."""
    slack = tol * (1.0 + cert.value)
    if cert.word is not None:
        again = root_spectral_radius(mset, cert.word)
        if abs(again - cert.value) > WORD_TOL * (1.0 + cert.value):
            raise CrossValidationError(cert.criterion, cert.value, bounds.lower, bounds.upper,
                                       f"word {cert.word} gives {again!r}")
    if cert.value < bounds.lower - slack or cert.value > bounds.upper + slack:
        raise CrossValidationError(cert.criterion, cert.value, bounds.lower, bounds.upper)


def catalogue(mset: MatrixSet, config: CertifyConfig) -> list[Certificate]:
    """Run the fixed-order detector catalogue (everything except Gram search)."""
    checks = [
        lambda: check_symmetric(mset, config.sym_tol),
        lambda: check_normal(mset, config.eq_tol),
        lambda: check_transpose_closed(mset, config.eq_tol, config.membership_tol),
        lambda: check_sign_pair(mset, config),
        lambda: check_negative_determinants(mset),
        lambda: check_swap_conjugate(mset, config.eq_tol),
        lambda: check_offdiag_flip(mset, config.eq_tol),
        lambda: check_rank_one(mset, config),
        lambda: check_corollary3(mset, config.eq_tol, config.cor3_roles),
        lambda: check_corollary4(mset, config.eq_tol),
        lambda: check_prop5(mset, config.eq_tol),
    ]
    return [c for c in (check() for check in checks) if c is not None]


def certify(mset: MatrixSet, config: CertifyConfig | None = None,
            bounds: BoundsReport | None = None) -> list[Certificate]:
    """Run every detector, the Gram criterion for n = 1..n_max and, for
    Kozyakin-shaped pairs, the switching-frequency decision.  Each certificate
    is cross-validated against ``bounds`` (computed by :func:`refine` if not
    supplied); any disagreement raises :class:`CrossValidationError`.
    """
    config = config or CertifyConfig()
    if bounds is None:
        bounds = refine(mset, config.refine_tol, config.refine_budget, config.refine_depth,
                        config.refine_max_level, config.threads)
    certs = catalogue(mset, config)
    for n in range(1, config.n_max + 1):
        try:
            cert = check_theorem1(mset, n, config.membership_tol, config.budget, config.threads)
        except BudgetExceededError as exc:
            log.warning("Gram membership search stopped at n=%d: %s", n, exc)
            break
        if cert is not None:
            certs.append(cert)
            break
    from . import kozyakin

    model = kozyakin.model_from_set(mset) if config.run_kozyakin else None
    if model is not None:
        outcome = kozyakin.theorem8_decide(model, config.kozyakin)
        if isinstance(outcome, Certificate):
            certs.append(outcome)
    # the conjugation route of the B0/B1 ladder is not covered by the catalogue
    if kozyakin.is_example9_shape(mset) and kozyakin.example9_case(*mset.members) == 5:
        routed = kozyakin.example9_dispatch(*mset.members, config=config)
        if routed.certificate is not None:
            routed.certificate.details["example9_case"] = 5
            certs.append(routed.certificate)
    for cert in certs:
        cross_validate(mset, cert, bounds, config.crossval_tol)
    return certs
