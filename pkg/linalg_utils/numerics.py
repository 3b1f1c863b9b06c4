import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

logger = logging.getLogger(__name__)

HERMITIAN_RTOL = 1e-12
RESIDUAL_RTOL = 1e-10
TIE_RTOL = 1e-12


class NotPositiveDefinite(ValueError):
    """Raised when a matrix handed to the Cholesky factorization is not Hermitian PD."""


class ConvergenceFailure(RuntimeError):
    """Raised when the Hermitian eigensolver does not reach residual tolerance."""


@dataclass(frozen=True)
class EigenPair:
    value: float
    vector: np.ndarray


def as_complex_matrix(x):
    """
    Coerces input to a 2-D complex128 array.
    1-D input is treated as a column vector.
    """
    m = np.asarray(x, dtype=np.complex128)
    if m.ndim == 1:
        m = m.reshape(-1, 1)
    if m.ndim != 2:
        raise ValueError(f"Expected a matrix, got array with shape {m.shape}")
    return m


def hermitian(x):
    return np.conj(np.transpose(x))


def frobenius_norm(x):
    return float(np.linalg.norm(x, ord="fro")) if np.size(x) else 0.0


def check_hermitian(c, name="matrix"):
    """
    Verifies c is square and Hermitian within HERMITIAN_RTOL relative to its Frobenius norm.
    Raises ValueError otherwise.
    """
    if c.shape[0] != c.shape[1]:
        raise ValueError(f"{name} must be square, got shape {c.shape}")
    scale = max(frobenius_norm(c), 1.0)
    skew = frobenius_norm(c - hermitian(c))
    if skew > HERMITIAN_RTOL * scale:
        raise ValueError(f"{name} is not Hermitian (skew {skew:.3e})")


def normalize_phase(v):
    """
    Rotates v so that its largest-magnitude entry is real and positive.
    The first index wins among equal magnitudes.
    """
    idx = int(np.argmax(np.abs(v)))
    pivot = v[idx]
    if pivot == 0:
        return v
    return v * (np.abs(pivot) / pivot)


def _tie_key(v):
    nz = np.flatnonzero(np.abs(v) > 1e-12)
    if nz.size == 0:
        return ()
    return tuple((round(float(z.real), 12), round(float(z.imag), 12)) for z in v[nz[0]:])


def _order_pairs(values, vectors):
    """
    Sorts (value, column) pairs by descending value.
    Within a group of tied values the vectors are ordered by descending
    lexicographic comparison of their entries from the first nonzero one on.
    """
    order = np.argsort(-values, kind="stable")
    values = values[order]
    vectors = vectors[:, order]

    pairs = []
    i = 0
    n = len(values)
    while i < n:
        j = i + 1
        while j < n and abs(values[i] - values[j]) <= TIE_RTOL * max(1.0, abs(values[i])):
            j += 1
        group = [EigenPair(float(values[c]), vectors[:, c]) for c in range(i, j)]
        if len(group) > 1:
            group.sort(key=lambda p: _tie_key(p.vector), reverse=True)
        pairs.extend(group)
        i = j
    return pairs


def cholesky(b):
    """
    Lower-triangular Cholesky factor L with L·Lᴴ = B.
    Raises NotPositiveDefinite when any pivot is not strictly positive; the caller
    is expected to fix the model (e.g. noise_var > 0) rather than regularize.
    """
    b = as_complex_matrix(b)
    try:
        check_hermitian(b, "Cholesky input")
    except ValueError as e:
        logger.error(f"Cholesky rejected input: {e}")
        raise NotPositiveDefinite(str(e)) from e
    try:
        factor = np.linalg.cholesky(b)
    except np.linalg.LinAlgError as e:
        logger.error(f"Cholesky factorization failed on {b.shape[0]}x{b.shape[0]} matrix: {e}")
        raise NotPositiveDefinite("matrix is not positive definite") from e
    if np.any(np.real(np.diag(factor)) <= 0):
        raise NotPositiveDefinite("non-positive pivot in Cholesky factor")
    return factor


def hermitian_eig(c):
    """
    Eigen-decomposition of a Hermitian matrix.
    Returns EigenPairs with values sorted descending, unit-norm vectors with the
    phase convention applied, and the tie-break rule for equal values.
    """
    c = as_complex_matrix(c)
    check_hermitian(c, "Eigenproblem input")
    c = 0.5 * (c + hermitian(c))
    n = c.shape[0]
    try:
        values, vectors = np.linalg.eigh(c)
    except np.linalg.LinAlgError as e:
        logger.error(f"Hermitian eigensolver did not converge: {e}")
        raise ConvergenceFailure(str(e)) from e

    for col in range(n):
        v = vectors[:, col]
        vectors[:, col] = normalize_phase(v / np.linalg.norm(v))

    # residual ‖Cv − λv‖ against ‖C‖_F + |λ|·‖I‖_F
    residuals = np.linalg.norm(c @ vectors - vectors * values, axis=0)
    bounds = RESIDUAL_RTOL * (frobenius_norm(c) + np.abs(values) * np.sqrt(n))
    if np.any(residuals > bounds):
        worst = float(np.max(residuals - bounds))
        logger.error(f"Eigenpair residual exceeds tolerance by {worst:.3e}")
        raise ConvergenceFailure("eigenpair residual exceeds tolerance")

    return _order_pairs(values, vectors)


def generalized_eig_top(a, b, k):
    """
    Leading k pairs of the Hermitian-definite pencil (A, B), i.e. A v = λ B v.

    1. L = cholesky(B)
    2. C = L⁻¹ A L⁻ᴴ, solved with triangular solves
    3. standard Hermitian eigenproblem on C
    4. v = L⁻ᴴ y, renormalized to unit Euclidean norm

    λ is unaffected by the renormalization. Vectors follow the phase convention
    and equal values follow the tie-break rule.
    """
    a = as_complex_matrix(a)
    b = as_complex_matrix(b)
    n = a.shape[0]
    if a.shape != (n, n) or b.shape != (n, n):
        raise ValueError(f"Matrix pair shapes differ or are not square: {a.shape}, {b.shape}")
    if not 1 <= k <= n:
        raise ValueError(f"Requested {k} eigenpairs from a {n}x{n} pencil")

    factor = cholesky(b)
    left = solve_triangular(factor, a, lower=True)
    reduced = solve_triangular(factor, hermitian(left), lower=True)
    reduced = 0.5 * (reduced + hermitian(reduced))

    standard = hermitian_eig(reduced)
    ys = np.column_stack([p.vector for p in standard])
    values = np.array([p.value for p in standard])
    vs = solve_triangular(hermitian(factor), ys, lower=False)
    for col in range(n):
        v = vs[:, col]
        vs[:, col] = normalize_phase(v / np.linalg.norm(v))

    return _order_pairs(values, vs)[:k]


def rank_one_generalized_top(g, b):
    """
    Leading pair of the pencil (gᴴg, B) for a single row g, in closed form:
    v ∝ B⁻¹gᴴ and λ = g B⁻¹ gᴴ. With L = cholesky(B) and y = L⁻¹gᴴ this is
    λ = ‖y‖², v = L⁻ᴴy. A zero row has no leading direction and falls back
    to the full solver.
    """
    row = as_complex_matrix(g).reshape(1, -1)
    b = as_complex_matrix(b)
    if row.shape[1] != b.shape[0]:
        raise ValueError(f"Row of length {row.shape[1]} does not match {b.shape[0]}x{b.shape[1]} matrix")
    if frobenius_norm(row) == 0.0:
        return generalized_eig_top(hermitian(row) @ row, b, 1)[0]

    factor = cholesky(b)
    y = solve_triangular(factor, hermitian(row), lower=True)
    value = float(np.real(np.vdot(y, y)))
    v = solve_triangular(hermitian(factor), y, lower=False).reshape(-1)
    return EigenPair(value, normalize_phase(v / np.linalg.norm(v)))


def rayleigh_quotient(a, b, v):
    """(vᴴAv)/(vᴴBv) for a column vector v."""
    v = np.asarray(v, dtype=np.complex128).reshape(-1)
    num = np.vdot(v, a @ v).real
    den = np.vdot(v, b @ v).real
    return float(num / den)
