"""Starting decompositions ``h = q @ r @ s^H`` for the iteration."""

from __future__ import annotations

import enum

import numpy as np

from .matcore import RankError, as_matrix, qr_decompose, svd_full
from .triple import DecompositionTriple

__all__ = ["InitKind", "init_decompose", "interleave_permutation", "vblast_order"]


class InitKind(enum.Enum):
    SVD = "svd"
    INTERLEAVED_SVD = "intrlv-svd"
    QR = "qr"
    VBLAST_QR = "vbqr"

    @classmethod
    def parse(cls, name: "str | InitKind") -> "InitKind":
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower()
        try:
            return cls(key)
        except ValueError:
            pass
        try:
            return cls[key.upper().replace("-", "_")]
        except KeyError:
            choices = ", ".join(m.value for m in cls)
            raise ValueError(f"unknown init kind {name!r} (choose from {choices})") from None


def interleave_permutation(k: int) -> list[int]:
    """1-based order ``1, k, 2, k-1, 3, ...`` pairing large with small.

    >>> interleave_permutation(7)
    [1, 7, 2, 6, 3, 5, 4]
    """
    if k < 1:
        raise ValueError("k must be positive")
    lo, hi = 1, k
    out = []
    while lo <= hi:
        out.append(lo)
        if lo != hi:
            out.append(hi)
        lo += 1
        hi -= 1
    return out


def vblast_order(h) -> np.ndarray:
    """V-BLAST column ordering (0-based), batched over leading axes.

    Positions are filled from the last to the first. At each step the
    remaining column whose row of the pseudo-inverse of the remaining
    submatrix has the smallest norm (the strongest stream after nulling)
    takes the last free position. Ties go to the lowest column index.
    The QR factorization of ``h[..., :, order]`` then has ``|r_KK|``
    maximal, ``|r_{K-1,K-1}|`` maximal given that choice, and so on.
    """
    h = as_matrix(h)
    batch = h.shape[:-2]
    n = h.shape[-1]
    hb = h.reshape((-1,) + h.shape[-2:])
    nb = hb.shape[0]
    remaining = np.tile(np.arange(n), (nb, 1))
    order = np.empty((nb, n), dtype=np.int64)
    rows = np.arange(nb)
    for pos in range(n - 1, -1, -1):
        sub = np.take_along_axis(hb, remaining[:, None, :], axis=2)
        pinv = np.linalg.pinv(sub)
        sv = np.linalg.svd(sub, compute_uv=False)
        if np.any(sv[:, -1] <= 1e-12 * sv[:, 0]):
            raise RankError("singular channel")
        norms = np.sum(np.abs(pinv) ** 2, axis=2)
        pick = np.argmin(norms, axis=1)
        order[:, pos] = remaining[rows, pick]
        keep = np.ones(remaining.shape, dtype=bool)
        keep[rows, pick] = False
        remaining = remaining[keep].reshape(nb, pos)
    return order.reshape(batch + (n,))


def _permutation_matrix(order: np.ndarray) -> np.ndarray:
    """``P`` with ``P[order[j], j] = 1`` so that ``h @ P == h[..., order]``."""
    n = order.shape[-1]
    p = np.zeros(order.shape + (n,), dtype=np.complex128)
    np.put_along_axis(p, order[..., :, None], 1.0, axis=-1)
    return np.swapaxes(p, -1, -2)


def init_decompose(h, kind: "InitKind | str" = InitKind.SVD) -> DecompositionTriple:
    """Initial triple for one of the four strategies.

    Raises
    ------
    RankError
        ``"singular channel"`` if `h` is numerically rank deficient.
    """
    kind = InitKind.parse(kind)
    h = as_matrix(h, name="h")
    m, n = h.shape[-2:]
    if m != n:
        raise ValueError(f"init_decompose needs a square matrix, got {m}x{n}")

    if kind in (InitKind.SVD, InitKind.INTERLEAVED_SVD):
        u, sigma, v = svd_full(h)
        if np.any(sigma[..., -1] <= 1e-12 * sigma[..., 0]):
            raise RankError("singular channel")
        if kind is InitKind.INTERLEAVED_SVD:
            perm = np.array(interleave_permutation(n)) - 1
            u, sigma, v = u[..., perm], sigma[..., perm], v[..., perm]
        r = np.zeros(h.shape, dtype=np.complex128)
        idx = np.arange(n)
        r[..., idx, idx] = sigma
        return DecompositionTriple(u, r, v)

    try:
        if kind is InitKind.QR:
            q, r = qr_decompose(h)
            s = np.broadcast_to(np.eye(n, dtype=np.complex128), h.shape).copy()
            return DecompositionTriple(q, r, s)
        order = vblast_order(h)
        q, r = qr_decompose(np.take_along_axis(h, order[..., None, :], axis=-1))
    except RankError:
        raise RankError("singular channel") from None
    return DecompositionTriple(q, r, _permutation_matrix(order))
