"""Kozyakin's two-matrix model and its switching frequency.

The model is ``A0 = alpha * [[a, b], [0, 1]]`` and ``A1 = beta * [[1, 0], [c, d]]``
under condition (K): ``alpha, beta > 0`` and ``b*c >= 1 >= a > 0, d > 0``.

An extremal (Barabanov) norm is approximated on a uniform grid of directions
of the projective line by iterating the Bellman-type operator
``(Tv)(theta) = max_i v(dir(A_i x_theta)) * |A_i x_theta|``.  Greedy
trajectories under the approximate norm give the switching frequency; a
rational frequency ``p/q`` is turned into a certificate by scanning binary
necklaces of length ``q`` with ``p`` ones and checking the best one against a
rigorous upper bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations

import numpy as np

from . import smallmat
from .bounds import upper_bound
from .criteria import (
    Certificate,
    CertifyConfig,
    check_corollary4,
    check_negative_determinants,
    check_rank_one,
    check_swap_conjugate,
    certify,
)
from .errors import BudgetExceededError, ConditionKError, InvalidMatrixError
from .words import MatrixSet, Word, root_spectral_radius, rotate_min


@dataclass(frozen=True)
class KozyakinModel:
    a: float
    b: float
    c: float
    d: float
    alpha: float = 1.0
    beta: float = 1.0

    @property
    def A0(self) -> np.ndarray:
        return self.alpha * np.array([[self.a, self.b], [0.0, 1.0]])

    @property
    def A1(self) -> np.ndarray:
        return self.beta * np.array([[1.0, 0.0], [self.c, self.d]])

    @property
    def matrix_set(self) -> MatrixSet:
        return MatrixSet((self.A0, self.A1), ("A0", "A1"))

    def params(self) -> dict[str, float]:
        return {"a": self.a, "b": self.b, "c": self.c, "d": self.d,
                "alpha": self.alpha, "beta": self.beta}


@dataclass
class KozyakinConfig:
    grid: int = 4096
    tol: float = 1e-10
    max_sweeps: int = 20_000
    burn_in: int = 1_000
    horizon: int = 100_000
    q_max: int = 64
    rational_tol: float = 1e-3
    value_tol: float = 1e-6
    necklace_budget: int = 100_000
    grid_escalation: int = 8
    bw_depth: int = 12
    bw_budget: int = 100_000
    x0_angle: float = 0.3


@dataclass
class BarabanovApprox:
    grid_size: int
    angles: np.ndarray
    values: np.ndarray
    rho_hat: float
    iterations: int
    residual: float
    converged: bool
    lo: float
    hi: float
    history: list[tuple[float, float]] = field(default_factory=list, repr=False)
    matrices: tuple[np.ndarray, ...] = field(default=(), repr=False)

    def norm(self, x: np.ndarray) -> float:
        """Approximate extremal norm of a vector (linear interpolation in angle)."""
        r = math.hypot(x[0], x[1])
        if r == 0.0:
            return 0.0
        return r * _interp(self.values, math.atan2(x[1], x[0]))


@dataclass
class FrequencyEstimate:
    sigma: float
    horizon: int
    burn_in: int
    p: int
    q: int
    approx_error: float


@dataclass
class Undecided:
    """Frequency estimation could not produce a certificate (not a disproof)."""

    estimate: FrequencyEstimate | None
    reason: str
    candidate_value: float | None = None
    candidate_word: Word | None = None
    upper: float | None = None


@dataclass
class KozyakinAnalysis:
    model: KozyakinModel
    approx: BarabanovApprox | None
    estimate: FrequencyEstimate | None
    outcome: Certificate | Undecided
    upper: float | None = None
    upper_source: str | None = None
    trajectory: list[int] = field(default_factory=list, repr=False)


def check_condition_k(a: float, b: float, c: float, d: float, alpha: float, beta: float) -> None:
    for ok, text in ((alpha > 0, "alpha > 0"), (beta > 0, "beta > 0"),
                     (b * c >= 1, "b*c >= 1"), (a <= 1, "a <= 1"),
                     (a > 0, "a > 0"), (d > 0, "d > 0")):
        if not ok:
            raise ConditionKError(text)


def build_model(a: float, b: float, c: float, d: float, alpha: float = 1.0,
                beta: float = 1.0) -> KozyakinModel:
    vals = [float(v) for v in (a, b, c, d, alpha, beta)]
    if not all(math.isfinite(v) for v in vals):
        raise ConditionKError("finite parameters")
    check_condition_k(*vals)
    return KozyakinModel(*vals)


def model_from_set(mset: MatrixSet, tol: float = 1e-12) -> KozyakinModel | None:
    """Recognise a two-member set of Kozyakin shape satisfying (K)."""
    if mset.K != 2 or mset.dim != 2:
        return None
    m0, m1 = mset.members
    scale = max(1.0, float(np.max(np.abs(mset.stack))))
    if abs(m0[1, 0]) > tol * scale or abs(m1[0, 1]) > tol * scale:
        return None
    alpha, beta = float(m0[1, 1]), float(m1[0, 0])
    if alpha <= 0 or beta <= 0:
        return None
    try:
        return build_model(m0[0, 0] / alpha, m0[0, 1] / alpha, m1[1, 0] / beta,
                           m1[1, 1] / beta, alpha, beta)
    except ConditionKError:
        return None


# ---------------------------------------------------------------------------
# extremal norm on the projective line


def _interp(values: np.ndarray, angle: float) -> float:
    n = len(values)
    u = (angle % math.pi) / (math.pi / n)
    i = int(u)
    f = u - i
    i %= n
    return values[i] * (1.0 - f) + values[(i + 1) % n] * f


def _transfer(mats, n: int):
    """Per matrix: gains |A x_j| and interpolation stencils for dir(A x_j)."""
    theta = np.arange(n) * (math.pi / n)
    x = np.stack([np.cos(theta), np.sin(theta)])
    out = []
    for m in mats:
        y = m @ x
        gain = np.hypot(y[0], y[1])
        phi = np.mod(np.arctan2(y[1], y[0]), math.pi)
        u = phi / (math.pi / n)
        idx = np.floor(u).astype(np.intp)
        frac = u - idx
        idx %= n
        out.append((gain, idx, (idx + 1) % n, frac))
    return theta, out


def _bellman(v: np.ndarray, stencils) -> np.ndarray:
    tv = None
    for gain, i0, i1, f in stencils:
        cand = gain * (v[i0] * (1.0 - f) + v[i1] * f)
        tv = cand if tv is None else np.maximum(tv, cand)
    return tv


def iterate_norm(mats, n: int = 4096, tol: float = 1e-10,
                 max_sweeps: int = 20_000) -> BarabanovApprox:
    """Fixed-point iteration of the Bellman operator for an arbitrary 2x2 family."""
    if n < 64:
        raise ValueError("grid size must be at least 64")
    if tol <= 0:
        raise ValueError("tol must be positive")
    mats = tuple(np.asarray(m, dtype=float) for m in mats)
    theta, stencils = _transfer(mats, n)
    v = np.ones(n)
    history: list[tuple[float, float]] = []
    lo = hi = math.nan
    converged = False
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        tv = _bellman(v, stencils)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = tv / v
        lo, hi = float(ratio.min()), float(ratio.max())
        history.append((lo, hi))
        if not (lo > 0.0 and math.isfinite(hi)):
            # the iterate lost positivity (reducible family): no norm on this grid
            break
        # averaging with the previous iterate damps period-2 oscillations
        # without moving the fixed point
        v = tv / math.sqrt(lo * hi) + v
        v /= v.max()
        if hi / lo - 1.0 <= tol:
            converged = True
            break
    positive = lo > 0.0 and math.isfinite(hi)
    residual = hi / lo - 1.0 if positive else math.inf
    rho_hat = math.sqrt(hi * lo) if positive else hi
    return BarabanovApprox(n, theta, v, rho_hat, sweeps, residual,
                           converged, lo, hi, history, mats)


def barabanov_iterate(model: KozyakinModel, n: int = 4096, tol: float = 1e-10,
                      max_sweeps: int = 20_000, active: tuple[int, ...] = (0, 1)) -> BarabanovApprox:
    """Approximate the extremal norm of ``model``; ``active`` can disable a member."""
    mats = [(model.A0, model.A1)[i] for i in active]
    return iterate_norm(mats, n, tol, max_sweeps)


def _hull(points: np.ndarray) -> np.ndarray:
    """Counter-clockwise convex hull (monotone chain)."""
    pts = sorted(map(tuple, points))

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


def polygon_upper(approx: BarabanovApprox, mats=None) -> float:
    """Upper bound ``max_i ||A_i||_P`` for the polygon norm P built from ``approx``.

    The unit ball of P is the convex hull of ``±x_theta / v(theta)``; any norm
    gives ``rho_bar <= max_i ||A_i||``, and for a polygon the induced norm is
    attained at a vertex.
    """
    mats = approx.matrices if mats is None else mats
    dirs = np.stack([np.cos(approx.angles), np.sin(approx.angles)], axis=1)
    pts = dirs / approx.values[:, None]
    hull = _hull(np.concatenate([pts, -pts]))
    ang = np.arctan2(hull[:, 1], hull[:, 0])
    order = np.argsort(ang)
    hull, ang = hull[order], ang[order]
    nxt = np.roll(hull, -1, axis=0)
    height = hull[:, 0] * nxt[:, 1] - hull[:, 1] * nxt[:, 0]
    normal = np.stack([nxt[:, 1] - hull[:, 1], hull[:, 0] - nxt[:, 0]], axis=1)
    best = 0.0
    for m in mats:
        y = hull @ np.asarray(m).T
        phi = np.arctan2(y[:, 1], y[:, 0])
        k = (np.searchsorted(ang, phi, side="right") - 1) % len(hull)
        gauge = np.einsum("ij,ij->i", normal[k], y) / height[k]
        best = max(best, float(gauge.max()))
    return best


# ---------------------------------------------------------------------------
# switching


def extremal_switching(model: KozyakinModel | None, approx: BarabanovApprox,
                       x0, steps: int, *, require_converged: bool = True) -> list[int]:
    """Greedy switching law: at each step apply the member that maximises the
    approximate extremal norm of the next state (ties go to index 0).

    ``x0`` is a starting vector or an angle.  With ``model`` given its two
    members are used, otherwise the matrices stored on ``approx``.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if require_converged and not approx.converged:
        raise ValueError(f"norm approximation not converged (residual {approx.residual:.3e})")
    mats = (model.A0, model.A1) if model is not None else approx.matrices
    coeffs = [tuple(float(v) for v in m.ravel()) for m in mats]
    if np.ndim(x0) == 0:
        x, y = math.cos(float(x0)), math.sin(float(x0))
    else:
        x, y = float(x0[0]), float(x0[1])
    values = approx.values
    n = len(values)
    step = math.pi / n
    out = []
    for _ in range(steps):
        best = -1.0
        choice = 0
        bx = by = 0.0
        for i, (m00, m01, m10, m11) in enumerate(coeffs):
            nx = m00 * x + m01 * y
            ny = m10 * x + m11 * y
            r = math.hypot(nx, ny)
            u = (math.atan2(ny, nx) % math.pi) / step
            j = int(u)
            f = u - j
            j %= n
            val = r * (values[j] * (1.0 - f) + values[(j + 1) % n] * f)
            if val > best:
                best, choice, bx, by = val, i, nx / r, ny / r
        out.append(choice)
        x, y = bx, by
    return out


def best_rational(sigma: float, q_max: int) -> tuple[int, int, float]:
    frac = Fraction(sigma).limit_denominator(q_max)
    return frac.numerator, frac.denominator, abs(sigma - frac.numerator / frac.denominator)


def switching_frequency(model: KozyakinModel, config: KozyakinConfig | None = None,
                        approx: BarabanovApprox | None = None,
                        x0=None) -> FrequencyEstimate:
    """Mean switching index along a greedy extremal trajectory after burn-in."""
    config = config or KozyakinConfig()
    if approx is None:
        approx = barabanov_iterate(model, config.grid, config.tol, config.max_sweeps)
    x0 = config.x0_angle if x0 is None else x0
    seq = extremal_switching(model, approx, x0, config.burn_in + config.horizon)
    sigma = sum(seq[config.burn_in:]) / config.horizon
    p, q, err = best_rational(sigma, config.q_max)
    return FrequencyEstimate(sigma, config.horizon, config.burn_in, p, q, err)


def christoffel_word(p: int, q: int) -> tuple[int, ...]:
    """Lower Christoffel word of slope p/q over {0, 1}."""
    return tuple((k + 1) * p // q - k * p // q for k in range(q))


def candidate_necklaces(p: int, q: int, budget: int = 100_000,
                        observed: tuple[int, ...] = ()) -> list[tuple[int, ...]]:
    """Binary necklaces of length ``q`` with ``p`` ones (canonical rotations).

    When the count exceeds ``budget`` only the balanced (Christoffel) necklace
    and the observed window are returned.
    """
    if math.comb(q, p) <= budget:
        out = set()
        for ones in combinations(range(q), p):
            w = [0] * q
            for i in ones:
                w[i] = 1
            w = tuple(w)
            if w == rotate_min(w):
                out.add(w)
        return sorted(out)
    cands = {rotate_min(christoffel_word(p, q)), rotate_min(christoffel_word(p, q)[::-1])}
    if observed and len(observed) == q and sum(observed) == p:
        cands.add(rotate_min(observed))
        cands.add(rotate_min(observed[::-1]))
    return sorted(cands)


def _rigorous_upper(model: KozyakinModel, approx: BarabanovApprox | None,
                    config: KozyakinConfig) -> tuple[float, str]:
    best, source = math.inf, "none"
    try:
        ub = upper_bound(model.matrix_set, config.bw_depth, config.bw_budget)
        best, source = ub.value, f"norm depth {ub.depth}"
    except BudgetExceededError:
        pass
    if approx is not None and approx.converged:
        pu = polygon_upper(approx, (model.A0, model.A1))
        if pu < best:
            best, source = pu, "polygon norm"
    return best, source


def analyze(model: KozyakinModel, config: KozyakinConfig | None = None) -> KozyakinAnalysis:
    """Frequency estimate plus the finiteness decision for ``model``."""
    config = config or KozyakinConfig()
    mset = model.matrix_set
    approx = barabanov_iterate(model, config.grid, config.tol, config.max_sweeps)
    upper, source = _rigorous_upper(model, approx, config)
    if not approx.converged:
        return KozyakinAnalysis(model, approx, None, Undecided(
            None, f"norm iteration did not converge (residual {approx.residual:.3e})",
            upper=upper), upper, source)
    seq = extremal_switching(model, approx, config.x0_angle, config.burn_in + config.horizon)
    sigma = sum(seq[config.burn_in:]) / config.horizon
    p, q, err = best_rational(sigma, config.q_max)
    est = FrequencyEstimate(sigma, config.horizon, config.burn_in, p, q, err)
    if err > config.rational_tol:
        return KozyakinAnalysis(model, approx, est, Undecided(
            est, f"no p/q with q <= {config.q_max} within {config.rational_tol}", upper=upper),
            upper, source, seq)
    # the periodic law i1..iq applies A_{iq}...A_{i1}: reverse the window
    observed = tuple(reversed(seq[-q:]))
    best_val, best_word = -1.0, None
    for neck in candidate_necklaces(p, q, config.necklace_budget, observed):
        w = tuple(i + 1 for i in neck)
        val = root_spectral_radius(mset, w)
        if val > best_val * (1.0 + 1e-12):
            best_val, best_word = val, w
    word = _primitive_root(best_word)

    def short(u: float) -> bool:
        return best_val < u - config.value_tol * (1.0 + u)

    # the polygon bound tightens as the grid grows; escalate before giving up
    n = config.grid
    while short(upper) and n * 2 <= config.grid * config.grid_escalation:
        n *= 2
        finer = barabanov_iterate(model, n, config.tol, config.max_sweeps)
        if finer.converged:
            pu = polygon_upper(finer, (model.A0, model.A1))
            if pu < upper:
                upper, source = pu, f"polygon norm (grid {n})"
    if not short(upper):
        cert = Certificate(
            "Kozyakin", best_val, word,
            tolerances={"rational": config.rational_tol, "value": config.value_tol},
            notes=[f"switching frequency ~ {sigma:.6f} ~ {p}/{q}",
                   f"upper bound {upper!r} from {source}"],
            details={"sigma": sigma, "p": p, "q": q, "upper": upper, "upper_source": source},
        )
        return KozyakinAnalysis(model, approx, est, cert, upper, source, seq)
    return KozyakinAnalysis(model, approx, est, Undecided(
        est, "best periodic candidate does not meet the upper bound",
        candidate_value=best_val, candidate_word=word, upper=upper), upper, source, seq)


def _primitive_root(w: Word) -> Word:
    n = len(w)
    for period in range(1, n + 1):
        if n % period == 0 and w == w[:period] * (n // period):
            return w[:period]
    return w


def theorem8_decide(model: KozyakinModel,
                    config: KozyakinConfig | None = None) -> Certificate | Undecided:
    """Certificate when the switching frequency is (numerically) rational and
    the matching periodic word attains the upper bound; otherwise Undecided."""
    return analyze(model, config).outcome


# ---------------------------------------------------------------------------


@dataclass
class DispatchResult:
    case: int | None
    route: str
    certificate: Certificate | None
    outcome: object = None


def _example9_params(b0, b1, tol: float) -> tuple[float, float, float, float, float]:
    b0 = smallmat.as_matrix(b0)
    b1 = smallmat.as_matrix(b1)
    if b0.shape != (2, 2) or b1.shape != (2, 2):
        raise InvalidMatrixError("Example-9 dispatch needs 2x2 matrices")
    scale = max(1.0, float(np.max(np.abs(b0))), float(np.max(np.abs(b1))))
    thr = tol * scale
    if (abs(b0[1, 0]) > thr or abs(b0[1, 1] - 1) > thr
            or abs(b1[0, 0] - 1) > thr or abs(b1[0, 1]) > thr):
        raise InvalidMatrixError("expected B0 = [[a, b], [0, 1]] and B1 = [[1, 0], [c, d]]")
    return float(b0[0, 0]), float(b0[0, 1]), float(b1[1, 0]), float(b1[1, 1]), thr


def example9_case(b0, b1, tol: float = 1e-12) -> int | None:
    """First matching case (1-6) of the ladder, or None.

    1 ``ad = 0``, 2 ``bc = 0``, 3 ``a, d < 0``, 4 ``a = d, b = c``,
    5 ``a != 1`` with ``[(1-a)(1-d) - bc] * bc >= 0``, 6 ``a = d = 1, bc >= 1``.
    """
    a, b, c, d, thr = _example9_params(b0, b1, tol)
    if abs(a * d) <= thr:
        return 1
    if abs(b * c) <= thr:
        return 2
    if a < 0 and d < 0:
        return 3
    if abs(a - d) <= thr and abs(b - c) <= thr:
        return 4
    if abs(a - 1) > thr and ((1 - a) * (1 - d) - b * c) * b * c >= 0:
        return 5
    if abs(a - 1) <= thr and abs(d - 1) <= thr and b * c >= 1:
        return 6
    return None


def is_example9_shape(mset: MatrixSet, tol: float = 1e-12) -> bool:
    if mset.K != 2 or mset.dim != 2:
        return False
    try:
        _example9_params(*mset.members, tol)
    except InvalidMatrixError:
        return False
    return True


def example9_dispatch(b0: np.ndarray, b1: np.ndarray, config: CertifyConfig | None = None,
                      kconfig: KozyakinConfig | None = None,
                      tol: float = 1e-12) -> DispatchResult:
    """Route ``B0 = [[a, b], [0, 1]]``, ``B1 = [[1, 0], [c, d]]`` through the case
    ladder of :func:`example9_case`; unmatched pairs go to :func:`certify`."""
    case = example9_case(b0, b1, tol)
    a, b, c, d, _ = _example9_params(b0, b1, tol)
    config = config or CertifyConfig()
    mset = MatrixSet((b0, b1), ("B0", "B1"))
    if case == 1:
        return DispatchResult(1, "rank-one (ThmH)", check_rank_one(mset, config))
    if case == 2:
        return DispatchResult(2, "diagonal pair (Cor4)", check_corollary4(mset, config.eq_tol))
    if case == 3:
        return DispatchResult(3, "negative determinants (ThmE)", check_negative_determinants(mset))
    if case == 4:
        return DispatchResult(4, "swap conjugate (ThmF)", check_swap_conjugate(mset, config.eq_tol))
    if case == 5:
        q = np.array([[(a - 1) / b, 1.0], [0.0, 1.0]])
        conj = MatrixSet((smallmat.similarity(q, mset[1]), smallmat.similarity(q, mset[2])))
        cert = check_corollary4(conj, max(config.eq_tol, 1e-9))
        if cert is not None:
            cert.notes.append("applied after conjugation by Q = [[(a-1)/b, 1], [0, 1]]")
            cert.witness = {"Q": q, "QB0Qinv": conj.members[0], "QB1Qinv": conj.members[1]}
        return DispatchResult(5, "conjugated diagonal pair (Cor4)", cert)
    if case == 6:
        outcome = theorem8_decide(build_model(1.0, b, c, 1.0), kconfig)
        cert = outcome if isinstance(outcome, Certificate) else None
        return DispatchResult(6, "switching frequency (Kozyakin)", cert, outcome)
    certs = certify(mset, config)
    return DispatchResult(None, "generic certify", certs[0] if certs else None, certs)
