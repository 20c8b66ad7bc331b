"""Dense linear algebra for small real square matrices.

Matrices are plain ``numpy.ndarray`` objects of shape ``(d, d)`` and dtype
float64.  Products, transposes and inverses go through numpy; the eigenvalue
routines are written out here:

* :func:`eigenvalues` balances the matrix, reduces it to upper Hessenberg form
  and runs Francis double-shift QR, reading eigenvalues off the 1x1 and 2x2
  diagonal blocks of the real Schur form.
* :func:`symmetric_eigenvalues` runs cyclic Jacobi rotations.  The Jacobi
  kernel is vectorised over a leading batch axis so that whole stacks of Gram
  matrices (one per word) can be diagonalised at once.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .errors import (
    AsymmetricMatrixError,
    ConvergenceError,
    DimensionError,
    InvalidMatrixError,
    SingularMatrixError,
)

MAX_DIM = 32
EQ_TOL = 1e-9
MEMBERSHIP_TOL = 1e-8
SYM_TOL = 1e-12

_EPS = np.finfo(float).eps


def as_matrix(x, *, max_dim: int = MAX_DIM) -> np.ndarray:
    """Validate ``x`` as a finite real square matrix and return a float64 copy."""
    a = np.array(x, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidMatrixError(f"expected a square matrix, got shape {a.shape}")
    if a.shape[0] < 1:
        raise InvalidMatrixError("matrix dimension must be at least 1")
    if a.shape[0] > max_dim:
        raise InvalidMatrixError(f"dimension {a.shape[0]} exceeds cap {max_dim}")
    if not np.all(np.isfinite(a)):
        raise InvalidMatrixError("matrix has non-finite entries")
    return a


def multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape != b.shape:
        raise DimensionError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def transpose(a: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(a.T)


def antidiag(values: Sequence[float]) -> np.ndarray:
    """Matrix with ``values`` on the anti-diagonal, top-right first."""
    d = len(values)
    out = np.zeros((d, d))
    for i, v in enumerate(values):
        out[i, d - 1 - i] = v
    return out


def rotation(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, s], [-s, c]])


# ---------------------------------------------------------------------------
# general (non-symmetric) eigenvalues


def _balance(a: list[list[float]]) -> None:
    # Parlett-Reinsch balancing with radix 2, in place.
    n = len(a)
    radix, sqrdx = 2.0, 4.0
    done = False
    while not done:
        done = True
        for i in range(n):
            r = c = 0.0
            for j in range(n):
                if j != i:
                    c += abs(a[j][i])
                    r += abs(a[i][j])
            if c != 0.0 and r != 0.0:
                g = r / radix
                f = 1.0
                s = c + r
                while c < g:
                    f *= radix
                    c *= sqrdx
                g = r * radix
                while c > g:
                    f /= radix
                    c /= sqrdx
                if (c + r) / f < 0.95 * s:
                    done = False
                    g = 1.0 / f
                    for j in range(n):
                        a[i][j] *= g
                    for j in range(n):
                        a[j][i] *= f


def _hessenberg(a: list[list[float]]) -> None:
    # Gaussian elimination with pivoting, in place; zeroes the multipliers.
    n = len(a)
    for m in range(1, n - 1):
        x = 0.0
        i = m
        for j in range(m, n):
            if abs(a[j][m - 1]) > abs(x):
                x = a[j][m - 1]
                i = j
        if i != m:
            for j in range(m - 1, n):
                a[i][j], a[m][j] = a[m][j], a[i][j]
            for j in range(n):
                a[j][i], a[j][m] = a[j][m], a[j][i]
        if x != 0.0:
            for i in range(m + 1, n):
                y = a[i][m - 1]
                if y != 0.0:
                    y /= x
                    a[i][m - 1] = y
                    for j in range(m, n):
                        a[i][j] -= y * a[m][j]
                    for j in range(n):
                        a[j][m] += y * a[j][i]
    for i in range(2, n):
        for j in range(i - 1):
            a[i][j] = 0.0


def _sign(x: float, y: float) -> float:
    return abs(x) if y >= 0.0 else -abs(x)


def _hqr(a: list[list[float]], max_iter: int) -> list[complex]:
    # Francis double-shift QR on an upper Hessenberg matrix (destroys ``a``).
    n = len(a)
    wr = [0.0] * n
    wi = [0.0] * n
    anorm = 0.0
    for i in range(n):
        for j in range(max(i - 1, 0), n):
            anorm += abs(a[i][j])
    nn = n - 1
    t = 0.0
    total = 0
    p = q = r = x = y = z = w = s = 0.0
    while nn >= 0:
        its = 0
        while True:
            l = nn
            while l > 0:
                s = abs(a[l - 1][l - 1]) + abs(a[l][l])
                if s == 0.0:
                    s = anorm
                if abs(a[l][l - 1]) <= _EPS * s:
                    a[l][l - 1] = 0.0
                    break
                l -= 1
            x = a[nn][nn]
            if l == nn:
                wr[nn] = x + t
                wi[nn] = 0.0
                nn -= 1
            else:
                y = a[nn - 1][nn - 1]
                w = a[nn][nn - 1] * a[nn - 1][nn]
                if l == nn - 1:
                    p = 0.5 * (y - x)
                    q = p * p + w
                    z = math.sqrt(abs(q))
                    x += t
                    if q >= 0.0:
                        z = p + _sign(z, p)
                        wr[nn - 1] = wr[nn] = x + z
                        if z != 0.0:
                            wr[nn] = x - w / z
                        wi[nn - 1] = wi[nn] = 0.0
                    else:
                        wr[nn - 1] = wr[nn] = x + p
                        wi[nn - 1] = z
                        wi[nn] = -z
                    nn -= 2
                else:
                    if total >= max_iter:
                        raise ConvergenceError(
                            f"QR iteration did not converge within {max_iter} iterations")
                    if its > 0 and its % 10 == 0:
                        # exceptional shift
                        t += x
                        for i in range(nn + 1):
                            a[i][i] -= x
                        s = abs(a[nn][nn - 1]) + abs(a[nn - 1][nn - 2])
                        y = x = 0.75 * s
                        w = -0.4375 * s * s
                    its += 1
                    total += 1
                    m = nn - 2
                    while m >= l:
                        z = a[m][m]
                        r = x - z
                        s = y - z
                        p = (r * s - w) / a[m + 1][m] + a[m][m + 1]
                        q = a[m + 1][m + 1] - z - r - s
                        r = a[m + 2][m + 1]
                        s = abs(p) + abs(q) + abs(r)
                        p /= s
                        q /= s
                        r /= s
                        if m == l:
                            break
                        u = abs(a[m][m - 1]) * (abs(q) + abs(r))
                        v = abs(p) * (abs(a[m - 1][m - 1]) + abs(z) + abs(a[m + 1][m + 1]))
                        if u <= _EPS * v:
                            break
                        m -= 1
                    for i in range(m, nn - 1):
                        a[i + 2][i] = 0.0
                        if i != m:
                            a[i + 2][i - 1] = 0.0
                    for k in range(m, nn):
                        if k != m:
                            p = a[k][k - 1]
                            q = a[k + 1][k - 1]
                            r = 0.0
                            if k + 1 != nn:
                                r = a[k + 2][k - 1]
                            x = abs(p) + abs(q) + abs(r)
                            if x != 0.0:
                                p /= x
                                q /= x
                                r /= x
                        s = _sign(math.sqrt(p * p + q * q + r * r), p)
                        if s != 0.0:
                            if k == m:
                                if l != m:
                                    a[k][k - 1] = -a[k][k - 1]
                            else:
                                a[k][k - 1] = -s * x
                            p += s
                            x = p / s
                            y = q / s
                            z = r / s
                            q /= p
                            r /= p
                            for j in range(k, nn + 1):
                                p = a[k][j] + q * a[k + 1][j]
                                if k + 1 != nn:
                                    p += r * a[k + 2][j]
                                    a[k + 2][j] -= p * z
                                a[k + 1][j] -= p * y
                                a[k][j] -= p * x
                            mmin = nn if nn < k + 3 else k + 3
                            for i in range(l, mmin + 1):
                                p = x * a[i][k] + y * a[i][k + 1]
                                if k + 1 != nn:
                                    p += z * a[i][k + 2]
                                    a[i][k + 2] -= p * r
                                a[i][k + 1] -= p * q
                                a[i][k] -= p
            if l >= nn - 1:
                break
    return [complex(wr[i], wi[i]) for i in range(n)]


def eigenvalues(a: np.ndarray, max_iter: int | None = None) -> list[complex]:
    """All eigenvalues of ``a`` (with multiplicity) as Python complex numbers.

    Raises :class:`ConvergenceError` when the QR sweep count exceeds
    ``max_iter`` (default ``100 * d**2``).
    """
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    if a.ndim != 2 or a.shape[1] != n:
        raise InvalidMatrixError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidMatrixError("matrix has non-finite entries")
    if n == 1:
        return [complex(a[0, 0], 0.0)]
    if max_iter is None:
        max_iter = 100 * n * n
    peak = float(np.max(np.abs(a)))
    if peak == 0.0:
        return [0j] * n
    # exact power-of-two rescaling: HQR's deflation tests misbehave near underflow
    e = math.frexp(peak)[1]
    work = np.ldexp(a, -e).tolist()
    _balance(work)
    _hessenberg(work)
    return [complex(math.ldexp(z.real, e), math.ldexp(z.imag, e)) for z in _hqr(work, max_iter)]


def _radii_small(stack: np.ndarray) -> np.ndarray:
    """Closed-form radii for 1x1 and 2x2 stacks."""
    if stack.shape[-1] == 1:
        return np.abs(stack[:, 0, 0])
    scale = np.abs(stack).max(axis=(1, 2))
    s = np.where(scale > 0.0, scale, 1.0)
    a, b = stack[:, 0, 0] / s, stack[:, 0, 1] / s
    c, d = stack[:, 1, 0] / s, stack[:, 1, 1] / s
    half = 0.5 * (a + d)
    # discriminant written without the tr^2/4 - det cancellation
    disc = (0.5 * (a - d)) ** 2 + b * c
    real = np.abs(half) + np.sqrt(np.maximum(disc, 0.0))
    det = np.maximum(a * d - b * c, 0.0)
    return np.where(disc >= 0.0, real, np.sqrt(det)) * scale


def spectral_radius(a: np.ndarray) -> float:
    a = np.asarray(a, dtype=float)
    if a.shape[0] <= 2:
        return float(_radii_small(a[None])[0])
    return max(abs(lam) for lam in eigenvalues(a))


def spectral_radii(stack: np.ndarray) -> np.ndarray:
    """Spectral radius of every matrix in a ``(N, d, d)`` stack."""
    stack = np.asarray(stack, dtype=float)
    if stack.shape[-1] <= 2:
        return _radii_small(stack)
    return np.array([spectral_radius(m) for m in stack], dtype=float)


# ---------------------------------------------------------------------------
# symmetric eigenvalues (cyclic Jacobi, batched)


def _jacobi_batch(g: np.ndarray, max_sweeps: int = 60) -> np.ndarray:
    """Diagonalise a stack of symmetric matrices; returns the diagonals."""
    g = np.array(g, dtype=float, copy=True)
    n = g.shape[-1]
    if n == 1:
        return g[:, :, 0].copy()
    fro = np.sqrt(np.einsum("bij,bij->b", g, g))
    target = 1e-14 * fro
    iu = np.triu_indices(n, 1)
    for _ in range(max_sweeps):
        off = np.sqrt(2.0 * np.sum(g[:, iu[0], iu[1]] ** 2, axis=1))
        if np.all(off <= target):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = g[:, p, q]
                nz = apq != 0.0
                if not np.any(nz):
                    continue
                app = g[:, p, p]
                aqq = g[:, q, q]
                safe = np.where(nz, apq, 1.0)
                # theta may overflow for negligible apq; t then rounds to 0
                with np.errstate(over="ignore"):
                    theta = (aqq - app) / (2.0 * safe)
                    t = np.where(theta >= 0.0, 1.0, -1.0) / (np.abs(theta) + np.hypot(1.0, theta))
                t = np.where(nz, t, 0.0)
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                gp = g[:, p, :].copy()
                gq = g[:, q, :].copy()
                g[:, p, :] = c[:, None] * gp - s[:, None] * gq
                g[:, q, :] = s[:, None] * gp + c[:, None] * gq
                gp = g[:, :, p].copy()
                gq = g[:, :, q].copy()
                g[:, :, p] = c[:, None] * gp - s[:, None] * gq
                g[:, :, q] = s[:, None] * gp + c[:, None] * gq
                g[:, p, q] = np.where(nz, 0.0, g[:, p, q])
                g[:, q, p] = np.where(nz, 0.0, g[:, q, p])
    else:
        off = np.sqrt(2.0 * np.sum(g[:, iu[0], iu[1]] ** 2, axis=1))
        if not np.all(off <= 1e-13 * np.maximum(fro, np.finfo(float).tiny)):
            raise ConvergenceError(f"Jacobi did not converge in {max_sweeps} sweeps")
    return np.diagonal(g, axis1=1, axis2=2).copy()


def is_symmetric(a: np.ndarray, tol: float = SYM_TOL) -> bool:
    scale = max(1.0, float(np.max(np.abs(a))))
    return bool(np.max(np.abs(a - a.T)) <= tol * scale)


def symmetric_eigenvalues(a: np.ndarray, tol: float = SYM_TOL) -> list[float]:
    """Eigenvalues of a symmetric matrix, sorted in descending order."""
    a = np.asarray(a, dtype=float)
    if not is_symmetric(a, tol):
        raise AsymmetricMatrixError("matrix is not symmetric within tolerance")
    sym = 0.5 * (a + a.T)
    diag = _jacobi_batch(sym[None])[0]
    return sorted(diag.tolist(), reverse=True)


def gram_norms(stack: np.ndarray) -> np.ndarray:
    """Operator 2-norms of a ``(N, d, d)`` stack via the Gram matrices MᵀM."""
    stack = np.asarray(stack, dtype=float)
    if stack.shape[0] == 0:
        return np.zeros(0)
    # per-matrix scaling keeps the Gram entries clear of underflow and overflow
    peak = np.abs(stack).max(axis=(1, 2))
    s = np.where(peak > 0.0, peak, 1.0)
    unit = stack / s[:, None, None]
    g = np.einsum("bki,bkj->bij", unit, unit)
    if g.shape[-1] == 1:
        lam = g[:, 0, 0]
    elif g.shape[-1] == 2:
        # largest eigenvalue of a 2x2 PSD matrix; both terms are non-negative
        lam = 0.5 * (g[:, 0, 0] + g[:, 1, 1]) + np.hypot(0.5 * (g[:, 0, 0] - g[:, 1, 1]), g[:, 0, 1])
    else:
        lam = _jacobi_batch(g).max(axis=1)
    return np.sqrt(np.maximum(lam, 0.0)) * peak


def operator_norm(a: np.ndarray) -> float:
    """Euclidean operator norm, ``sqrt(lambda_max(aᵀa))``."""
    a = np.asarray(a, dtype=float)
    return float(gram_norms(a[None])[0])


def singular_values(a: np.ndarray, max_sweeps: int = 60) -> list[float]:
    """Singular values (descending) by one-sided Jacobi on the columns.

    Unlike square roots of the Gram eigenvalues this resolves small singular
    values to relative accuracy, which rank tests need.
    """
    u = np.array(a, dtype=float, copy=True)
    peak = float(np.max(np.abs(u))) if u.size else 0.0
    if peak == 0.0:
        return [0.0] * u.shape[1]
    # singular values are homogeneous; unit scale keeps the dot products normal
    u /= peak
    n = u.shape[1]
    for _ in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                # column norms via hypot: squared norms underflow for tiny columns
                norm_p = float(np.hypot.reduce(u[:, p]))
                norm_q = float(np.hypot.reduce(u[:, q]))
                gamma = float(u[:, p] @ u[:, q])
                if gamma == 0.0 or abs(gamma) <= 1e-15 * norm_p * norm_q:
                    continue
                with np.errstate(over="ignore"):
                    zeta = (norm_q - norm_p) * (norm_q + norm_p) / (2.0 * gamma)
                t = _sign(1.0, zeta) / (abs(zeta) + math.hypot(1.0, zeta))
                if t == 0.0:
                    continue
                rotated = True
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = c * t
                up = u[:, p].copy()
                u[:, p] = c * up - s * u[:, q]
                u[:, q] = s * up + c * u[:, q]
        if not rotated:
            break
    else:
        raise ConvergenceError("one-sided Jacobi did not converge")
    cols = [peak * float(np.hypot.reduce(u[:, j])) for j in range(n)]
    return sorted(cols, reverse=True)


# ---------------------------------------------------------------------------


def similarity(q: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Return ``q @ a @ inv(q)``."""
    if q.shape != a.shape:
        raise DimensionError(f"cannot conjugate {a.shape} by {q.shape}")
    scale = max(float(np.max(np.abs(q))), np.finfo(float).tiny)
    if abs(np.linalg.det(q / scale)) <= 1e-12:
        raise SingularMatrixError("conjugating matrix is singular")
    return q @ a @ np.linalg.inv(q)


def approx_equal(a: np.ndarray, b: np.ndarray, tol: float = EQ_TOL) -> bool:
    """``max|a-b| <= tol * max(1, ||a||, ||b||)`` with operator norms."""
    if a.shape != b.shape:
        raise DimensionError(f"cannot compare {a.shape} with {b.shape}")
    scale = max(1.0, operator_norm(a), operator_norm(b))
    return bool(np.max(np.abs(a - b)) <= tol * scale)
