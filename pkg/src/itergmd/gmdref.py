"""Exact (one-pass) geometric mean decomposition.

Reference construction used as the "true GMD" baseline. Starting from the
SVD, position ``k`` is filled by pairing the largest and the smallest of
the remaining diagonal values and rotating the pair so the leading entry
becomes exactly the geometric mean. The trailing block stays diagonal
throughout, so the symmetric permutations never break triangularity.
"""

from __future__ import annotations

import numpy as np

from .igmd import _apply_stage, geometric_mean_target
from .init import init_decompose
from .triple import DecompositionTriple

__all__ = ["exact_gmd"]


def _swap(q: np.ndarray, r: np.ndarray, s: np.ndarray, a: np.ndarray, b: int) -> None:
    """Symmetric swap of index ``a[i]`` with ``b`` for every batch item ``i``."""
    rows = np.arange(r.shape[0])
    for m in (q, s):
        col_a = m[rows, :, a].copy()
        m[rows, :, a] = m[:, :, b]
        m[:, :, b] = col_a
    col_a = r[rows, :, a].copy()
    r[rows, :, a] = r[:, :, b]
    r[:, :, b] = col_a
    row_a = r[rows, a, :].copy()
    r[rows, a, :] = r[:, b, :]
    r[:, b, :] = row_a


def exact_gmd(h) -> DecompositionTriple:
    """GMD with every diagonal entry of ``r`` equal to the geometric mean.

    Accepts a single square matrix or a stack.
    """
    start = init_decompose(h, "svd")
    sigma_bar = geometric_mean_target(h)
    batch = start.r.shape[:-2]
    n = start.k
    q = start.q.reshape((-1,) + start.q.shape[-2:]).copy()
    r = start.r.reshape((-1, n, n)).copy()
    s = start.s.reshape((-1,) + start.s.shape[-2:]).copy()
    target = np.reshape(sigma_bar, (-1,))

    for j in range(n - 1):
        d = np.diagonal(r, axis1=-2, axis2=-1).real
        # trailing block r[j:, j:] is diagonal here
        hi = j + np.argmax(d[:, j:], axis=1)
        _swap(q, r, s, hi, j)
        d = np.diagonal(r, axis1=-2, axis2=-1).real
        lo = j + 1 + np.argmin(d[:, j + 1 :], axis=1)
        _swap(q, r, s, lo, j + 1)
        _apply_stage(q, r, s, j, target)

    return DecompositionTriple(
        q.reshape(start.q.shape), r.reshape(start.r.shape), s.reshape(start.s.shape)
    )
