"""Dense and banded linear kernels used by the Newton solvers.

Factorizations are LU with partial pivoting (LAPACK ``getrf``/``gbtrf``), and
rank-one updated systems ``(A + u w^T) x = b`` are solved with the
Sherman-Morrison formula so that deflation never requires refactorizing.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

DEFAULT_PIVOT_TOL = 1e-14
DEFAULT_DENOM_TOL = 1e-14


class SingularMatrix(Exception):
    """A solve was requested on a factorization flagged as singular."""


class SingularUpdate(Exception):
    """The Sherman-Morrison denominator 1 + w^T A^-1 u is numerically zero."""


@dataclass
class BandedMatrix:
    """Square banded matrix with ``hbw`` sub- and superdiagonals.

    Storage follows ``scipy.linalg.solve_banded``: ``data[hbw + i - j, j]``
    holds entry ``(i, j)`` for ``|i - j| <= hbw``.  Instances are treated as
    immutable once assembled; arithmetic returns new matrices.
    """

    n: int
    hbw: int
    data: np.ndarray

    @classmethod
    def zeros(cls, n: int, hbw: int) -> "BandedMatrix":
        return cls(n, hbw, np.zeros((2 * hbw + 1, n)))

    def copy(self) -> "BandedMatrix":
        return BandedMatrix(self.n, self.hbw, self.data.copy())

    def matvec(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        n, hbw = self.n, self.hbw
        out = np.zeros(n)
        for off in range(-hbw, hbw + 1):
            # off = j - i: superdiagonals have off > 0
            if off >= 0:
                out[: n - off] += self.data[hbw - off, off:] * v[off:]
            else:
                e = -off
                out[e:] += self.data[hbw + e, : n - e] * v[: n - e]
        return out

    def to_dense(self) -> np.ndarray:
        n, hbw = self.n, self.hbw
        dense = np.zeros((n, n))
        for off in range(-hbw, hbw + 1):
            if off >= 0:
                idx = np.arange(n - off)
                dense[idx, idx + off] = self.data[hbw - off, off:]
            else:
                e = -off
                idx = np.arange(n - e)
                dense[idx + e, idx] = self.data[hbw + e, : n - e]
        return dense

    def infinity_norm(self) -> float:
        n, hbw = self.n, self.hbw
        rows = np.zeros(n)
        for off in range(-hbw, hbw + 1):
            if off >= 0:
                rows[: n - off] += np.abs(self.data[hbw - off, off:])
            else:
                e = -off
                rows[e:] += np.abs(self.data[hbw + e, : n - e])
        return float(rows.max()) if n else 0.0

    def is_symmetric(self, tol: float = 1e-12) -> bool:
        scale = float(np.abs(self.data).max()) or 1.0
        for off in range(1, self.hbw + 1):
            upper = self.data[self.hbw - off, off:]
            lower = self.data[self.hbw + off, : self.n - off]
            if np.abs(upper - lower).max(initial=0.0) > tol * scale:
                return False
        return True

    def __add__(self, other: "BandedMatrix") -> "BandedMatrix":
        if not isinstance(other, BandedMatrix) or other.hbw != self.hbw:
            return NotImplemented
        return BandedMatrix(self.n, self.hbw, self.data + other.data)

    def __sub__(self, other: "BandedMatrix") -> "BandedMatrix":
        if not isinstance(other, BandedMatrix) or other.hbw != self.hbw:
            return NotImplemented
        return BandedMatrix(self.n, self.hbw, self.data - other.data)

    def __mul__(self, scalar: float) -> "BandedMatrix":
        return BandedMatrix(self.n, self.hbw, self.data * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "BandedMatrix":
        return BandedMatrix(self.n, self.hbw, -self.data)


@dataclass
class LuFactorization:
    """LU factors with partial pivoting plus a singularity flag.

    ``singular`` is set when any pivot magnitude falls below
    ``pivot_tol * max|A|``; solves on a singular factorization raise
    :class:`SingularMatrix`.  A factorization is read-only after
    construction and may be shared across threads for solves.
    """

    n: int
    factors: np.ndarray
    pivots: np.ndarray
    singular: bool
    banded: bool = False
    hbw: int = 0

    def solve(self, b: np.ndarray) -> np.ndarray:
        if self.singular:
            raise SingularMatrix("factorization is singular; cannot solve")
        b = np.asarray(b, dtype=float)
        if self.banded:
            x, info = lapack.dgbtrs(self.factors, self.hbw, self.hbw, b, self.pivots)
            if info != 0:
                raise SingularMatrix(f"banded back-substitution failed (info={info})")
            return x
        return sla.lu_solve((self.factors, self.pivots), b, check_finite=False)


def lu_factor(matrix, pivot_tol: float = DEFAULT_PIVOT_TOL) -> LuFactorization:
    """Factor a square dense or banded matrix with partial pivoting.

    Args:
        matrix: square ``np.ndarray`` or :class:`BandedMatrix`.
        pivot_tol: relative pivot threshold below which the factorization is
            flagged singular (relative to ``max|A|``).

    Returns:
        An :class:`LuFactorization`; check ``.singular`` before solving.
    """
    if isinstance(matrix, BandedMatrix):
        return _lu_factor_banded(matrix, pivot_tol)
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise ValueError("matrix entries must be finite")
    scale = float(np.abs(a).max()) if a.size else 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # scipy warns on exact zero pivots
        lu, piv = sla.lu_factor(a, check_finite=False)
    diag = np.abs(np.diag(lu))
    singular = scale == 0.0 or bool((diag < pivot_tol * scale).any())
    return LuFactorization(a.shape[0], lu, piv, singular)


def _lu_factor_banded(matrix: BandedMatrix, pivot_tol: float) -> LuFactorization:
    n, hbw = matrix.n, matrix.hbw
    if not np.isfinite(matrix.data).all():
        raise ValueError("matrix entries must be finite")
    # gbtrf wants hbw extra rows on top for pivoting fill-in
    ab = np.zeros((3 * hbw + 1, n))
    ab[hbw:, :] = matrix.data
    lu, ipiv, info = lapack.dgbtrf(ab, kl=hbw, ku=hbw)
    if info < 0:
        raise ValueError(f"gbtrf failed on argument {-info}")
    scale = float(np.abs(matrix.data).max()) if n else 0.0
    diag = np.abs(lu[2 * hbw, :])
    singular = info > 0 or scale == 0.0 or bool((diag < pivot_tol * scale).any())
    return LuFactorization(n, lu, ipiv, singular, banded=True, hbw=hbw)


def solve_rank_one_update(
    fac: LuFactorization,
    u: np.ndarray,
    w: np.ndarray,
    b: np.ndarray,
    denom_tol: float = DEFAULT_DENOM_TOL,
) -> np.ndarray:
    """Solve ``(A + u w^T) x = b`` given a factorization of ``A``.

    Uses the Sherman-Morrison identity with two solves against ``fac``.
    Raises :class:`SingularUpdate` when ``|1 + w^T A^-1 u|`` is below
    ``denom_tol``, i.e. the updated matrix is numerically singular.
    """
    x = fac.solve(b)
    if u is None:
        return x
    s = fac.solve(u)
    denom = 1.0 + float(w @ s)
    if abs(denom) < denom_tol:
        raise SingularUpdate(f"update denominator {denom:.3e} below {denom_tol:.1e}")
    return x - s * (float(w @ x) / denom)
