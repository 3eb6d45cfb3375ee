from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .matcore import conj_transpose

__all__ = ["DecompositionTriple"]


@dataclass(frozen=True)
class DecompositionTriple:
    """``h = q @ r @ s^H`` with semi-unitary `q`, `s` and upper-triangular `r`.

    The arrays may carry leading batch axes; all three share them.
    Instances are treated as immutable: operations return new triples.
    """

    q: np.ndarray
    r: np.ndarray
    s: np.ndarray

    @property
    def k(self) -> int:
        return self.r.shape[-1]

    @property
    def diag(self) -> np.ndarray:
        """Real diagonal of `r`, shape ``(..., K)``."""
        return np.diagonal(self.r, axis1=-2, axis2=-1).real.copy()

    def reconstruct(self) -> np.ndarray:
        return self.q @ self.r @ conj_transpose(self.s)

    def copy(self) -> "DecompositionTriple":
        return DecompositionTriple(self.q.copy(), self.r.copy(), self.s.copy())

    def select(self, index) -> "DecompositionTriple":
        """Pick one (or a sub-stack) of a batched triple."""
        return DecompositionTriple(self.q[index], self.r[index], self.s[index])

    def errors(self, h) -> dict[str, np.ndarray]:
        """Invariant deviations against the originating matrix `h`.

        Keys: ``reconstruction`` (relative Frobenius), ``q_unitarity`` and
        ``s_unitarity`` (max entry of ``X^H X - I``), ``lower`` (max
        magnitude strictly below the diagonal of `r`), ``diag_imag`` (max
        imaginary magnitude on the diagonal) and ``diag_min`` (smallest real
        diagonal entry). Each value has the batch shape.
        """
        h = np.asarray(h, dtype=np.complex128)
        k = self.k
        eye = np.eye(k)
        d = np.diagonal(self.r, axis1=-2, axis2=-1)
        lower = np.tril(self.r, -1)
        axes = (-2, -1)
        return {
            "reconstruction": np.linalg.norm(self.reconstruct() - h, axis=axes)
            / np.linalg.norm(h, axis=axes),
            "q_unitarity": np.abs(conj_transpose(self.q) @ self.q - eye).max(axis=axes),
            "s_unitarity": np.abs(conj_transpose(self.s) @ self.s - eye).max(axis=axes),
            "lower": np.abs(lower).max(axis=axes),
            "diag_imag": np.abs(d.imag).max(axis=-1),
            "diag_min": d.real.min(axis=-1),
        }
