"""Dense complex matrix kernels.

Matrices are plain ``numpy`` arrays of dtype ``complex128``. Every kernel
accepts leading batch axes (``(..., m, n)``) so that a stack of channel
realizations can be processed in one call; a single matrix is simply the
case of an empty batch shape.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import TextIO

import numpy as np

__all__ = [
    "MatrixError",
    "RankError",
    "Svd2x2",
    "as_matrix",
    "matmul",
    "conj_transpose",
    "qr_decompose",
    "svd_full",
    "svd_2x2_upper",
    "parse_matrix",
    "format_matrix",
    "read_matrix",
    "write_matrix",
]

RANK_TOL = 1e-12


class MatrixError(ValueError):
    """Raised on malformed input (shape, non-finite entries, bad text)."""


class RankError(MatrixError):
    """Raised when a matrix is numerically rank deficient."""


def as_matrix(a, *, name: str = "matrix") -> np.ndarray:
    """Convert `a` to a complex128 array with at least two dimensions.

    Raises
    ------
    MatrixError
        If the result is not at least 2-D or contains NaN/Inf.
    """
    arr = np.asarray(a, dtype=np.complex128)
    if arr.ndim < 2:
        raise MatrixError(f"{name} must be at least 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise MatrixError(f"{name} contains non-finite entries")
    return arr


def matmul(a, b) -> np.ndarray:
    """Matrix product ``a @ b`` with a dimension check."""
    a = as_matrix(a, name="a")
    b = as_matrix(b, name="b")
    if a.shape[-1] != b.shape[-2]:
        raise MatrixError(
            f"dimension mismatch: a has {a.shape[-1]} columns, b has {b.shape[-2]} rows"
        )
    return a @ b


def conj_transpose(a) -> np.ndarray:
    """Conjugate transpose over the last two axes."""
    return np.conj(np.swapaxes(np.asarray(a, dtype=np.complex128), -1, -2))


def _frobenius(a: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(np.abs(a) ** 2, axis=(-2, -1)))


def qr_decompose(a) -> tuple[np.ndarray, np.ndarray]:
    """Thin QR factorization with a real, strictly positive diagonal in R.

    Parameters
    ----------
    a : (..., m, n) array_like
        Tall (``m >= n``) matrix of full column rank.

    Returns
    -------
    q : (..., m, n) ndarray
        Matrix with orthonormal columns.
    r : (..., n, n) ndarray
        Upper-triangular factor whose diagonal is real and positive.

    Raises
    ------
    RankError
        If some ``|r_kk| < 1e-12 * ||a||_F``.
    """
    a = as_matrix(a)
    m, n = a.shape[-2:]
    if m < n:
        raise MatrixError(f"qr_decompose needs rows >= cols, got {m}x{n}")
    q, r = np.linalg.qr(a, mode="reduced")
    d = np.diagonal(r, axis1=-2, axis2=-1)
    mag = np.abs(d)
    scale = _frobenius(a)[..., None]
    if np.any(mag < RANK_TOL * scale):
        raise RankError("matrix is numerically rank deficient")
    phase = d / mag
    q = q * phase[..., None, :]
    r = r * np.conj(phase)[..., :, None]
    # diagonal is real by construction; drop the rounding residue
    idx = np.arange(n)
    r[..., idx, idx] = mag
    r = np.triu(r)
    return q, r


def svd_full(a) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Thin SVD ``a = u @ diag(sigma) @ v^H`` with `sigma` descending.

    Unlike ``numpy.linalg.svd`` this returns ``v`` itself, not ``v^H``.
    """
    a = as_matrix(a)
    u, sigma, vh = np.linalg.svd(a, full_matrices=False)
    return u, sigma, conj_transpose(vh)


@dataclass(frozen=True)
class Svd2x2:
    """SVD of a (stack of) 2x2 matrices: ``u @ diag(sigma1, sigma2) @ v^H``."""

    u: np.ndarray
    sigma1: np.ndarray
    sigma2: np.ndarray
    v: np.ndarray

    def reconstruct(self) -> np.ndarray:
        sig = np.zeros(self.u.shape, dtype=np.float64)
        sig[..., 0, 0] = self.sigma1
        sig[..., 1, 1] = self.sigma2
        return self.u @ sig @ conj_transpose(self.v)


def _rot(c: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Stack of ``[[c, -s], [s, c]]``."""
    out = np.empty(np.shape(c) + (2, 2), dtype=np.float64)
    out[..., 0, 0] = c
    out[..., 0, 1] = -s
    out[..., 1, 0] = s
    out[..., 1, 1] = c
    return out


def _real_upper_svd(f, g, h):
    """SVD of real upper-triangular ``[[f, g], [0, h]]`` with f, h > 0.

    A rotation first symmetrizes the block, a Jacobi rotation then
    diagonalizes it. Returns orthogonal ``u``, ``v`` and singular values
    sorted descending.
    """
    # B = rot(alpha) @ M is symmetric when tan(alpha) = g / (f + h)
    alpha = np.arctan2(g, f + h)
    ca, sa = np.cos(alpha), np.sin(alpha)
    p = ca * f
    q = ca * g - sa * h
    r = sa * g + ca * h
    # symmetric [[p, q], [q, r]]; the (2,1) entry sa*f equals q up to rounding
    theta = 0.5 * np.arctan2(2.0 * q, p - r)
    ct, st = np.cos(theta), np.sin(theta)
    lam1 = ct * ct * p + 2.0 * ct * st * q + st * st * r
    lam2 = st * st * p - 2.0 * ct * st * q + ct * ct * r
    jac = _rot(ct, st)
    u = _rot(ca, -sa) @ jac
    v = jac.copy()
    # det(B) = f*h > 0 so lam1, lam2 share a sign
    neg = lam1 < 0
    u[neg] = -u[neg]
    s1, s2 = np.abs(lam1), np.abs(lam2)
    swap = s2 > s1
    if np.any(swap):
        u[swap] = u[swap][..., ::-1]
        v[swap] = v[swap][..., ::-1]
        s1 = np.where(swap, s2, s1)
    # the small eigenvalue cancels badly; the determinant does not.
    # For nearly equal values the quotient can round one ulp above s1.
    s2 = np.minimum((f * h) / s1, s1)
    return u, s1, s2, v


def svd_2x2_upper(r) -> Svd2x2:
    """Closed-form SVD of a 2x2 upper-triangular block.

    The block must have a zero (2,1) entry and a real, strictly positive
    diagonal; the (1,2) entry may be complex. Its phase is moved into a
    diagonal unitary ``D = diag(1, exp(-1j*phi))`` so that
    ``r = D @ M @ D^H`` with ``M`` real; the real SVD of ``M`` is then
    lifted back as ``u = D @ u_M`` and ``v = D @ v_M``.

    Accepts a stack of blocks with shape ``(..., 2, 2)``.
    """
    r = np.asarray(r, dtype=np.complex128)
    if r.shape[-2:] != (2, 2):
        raise MatrixError(f"expected a 2x2 block, got shape {r.shape}")
    a = r[..., 0, 0]
    b = r[..., 0, 1]
    d = r[..., 1, 1]
    scale = np.abs(a) + np.abs(b) + np.abs(d)
    if np.any(np.abs(r[..., 1, 0]) > 0):
        raise MatrixError("block is not upper-triangular")
    if np.any(np.abs(a.imag) > 1e-12 * scale) or np.any(np.abs(d.imag) > 1e-12 * scale):
        raise MatrixError("diagonal of the block must be real")
    a, d = a.real, d.real
    if np.any(a <= 0) or np.any(d <= 0):
        raise MatrixError("diagonal of the block must be strictly positive")

    mag = np.abs(b)
    # b / |b| overflows inside complex division when |b| is subnormal
    phase = np.exp(1j * np.angle(b))
    u_r, s1, s2, v_r = _real_upper_svd(a, mag, d)
    # D = diag(1, conj(phase)) scales the second row
    u = u_r.astype(np.complex128)
    v = v_r.astype(np.complex128)
    u[..., 1, :] *= np.conj(phase)[..., None]
    v[..., 1, :] *= np.conj(phase)[..., None]
    return Svd2x2(u=u, sigma1=s1, sigma2=s2, v=v)


# -- plain-text matrix format ------------------------------------------------

_NUM = r"[0-9]*\.?[0-9]+(?:[eE][+-]?[0-9]+)?|[0-9]+\.(?:[eE][+-]?[0-9]+)?"
_ENTRY = re.compile(rf"^([+-]?(?:{_NUM}))([+-](?:{_NUM}))i$")


def _parse_entry(tok: str, lineno: int) -> complex:
    m = _ENTRY.match(tok)
    if m is None:
        raise MatrixError(f"line {lineno}: cannot parse entry {tok!r}")
    return complex(float(m.group(1)), float(m.group(2)))


def parse_matrix(text: str) -> np.ndarray:
    """Parse the ``rows cols`` + ``RE{+|-}IMi`` text format.

    Error messages name the offending (1-based) line.
    """
    lines = [ln for ln in text.splitlines()]
    # tolerate trailing blank lines only
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise MatrixError("line 1: empty matrix file")
    header = lines[0].split()
    if len(header) != 2 or not all(t.isdigit() for t in header):
        raise MatrixError(f"line 1: expected 'rows cols', got {lines[0]!r}")
    rows, cols = int(header[0]), int(header[1])
    if rows < 1 or cols < 1:
        raise MatrixError("line 1: rows and cols must be positive")
    if len(lines) - 1 != rows:
        raise MatrixError(
            f"line {len(lines) + 1 if len(lines) - 1 < rows else rows + 2}: "
            f"expected {rows} matrix rows, found {len(lines) - 1}"
        )
    out = np.empty((rows, cols), dtype=np.complex128)
    for i, line in enumerate(lines[1:]):
        toks = line.split()
        if len(toks) != cols:
            raise MatrixError(f"line {i + 2}: expected {cols} entries, found {len(toks)}")
        for j, tok in enumerate(toks):
            out[i, j] = _parse_entry(tok, i + 2)
    return out


def format_matrix(a) -> str:
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2:
        raise MatrixError("format_matrix needs a single 2-D matrix")
    rows = [f"{a.shape[0]} {a.shape[1]}"]
    for row in a:
        rows.append(" ".join(f"{z.real:.17g}{z.imag:+.17g}i" for z in row))
    return "\n".join(rows) + "\n"


def read_matrix(fp: TextIO | str) -> np.ndarray:
    if isinstance(fp, str):
        with open(fp, encoding="utf-8") as fh:
            return parse_matrix(fh.read())
    return parse_matrix(fp.read())


def write_matrix(path: str, a) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_matrix(a))
