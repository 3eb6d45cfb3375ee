"""Iterative geometric mean decomposition.

Each sweep walks the diagonal of ``R`` pairwise. For the pair ``(k, k+1)``
the 2x2 block is diagonalized, then two planar rotations turn
``diag(sigma1, sigma2)`` back into an upper-triangular block whose leading
diagonal entry is ``omega(r_kk, r_{k+1,k+1})``. The product of the
diagonal is conserved, and for any mapping obeying
``omega + z1*z2/omega <= z1 + z2`` the diagonal sum shrinks every sweep
until all entries coincide at the geometric mean of the singular values.
The geometric mean itself is never computed by the iteration.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .matcore import MatrixError, RankError, conj_transpose, svd_2x2_upper, svd_full
from .triple import DecompositionTriple

__all__ = [
    "OmegaKind",
    "RotationPair",
    "SweepTrace",
    "MajorizationError",
    "omega",
    "rotation_pair",
    "stage_update",
    "sweep",
    "igmd",
    "geometric_mean_target",
    "mse_diag",
]

DEGENERATE_TOL = 1e-12
# slack allowed on sigma2 <= omega <= sigma1 before it counts as a violation
MAJORIZATION_SLACK = 1e-9


class MajorizationError(MatrixError):
    """The requested diagonal is not reachable by planar rotations."""


class OmegaKind(enum.Enum):
    AM = "am"
    GM = "gm"
    HM = "hm"

    @classmethod
    def parse(cls, name: "str | OmegaKind") -> "OmegaKind":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).strip().lower())
        except ValueError:
            choices = ", ".join(m.value for m in cls)
            raise ValueError(f"unknown omega kind {name!r} (choose from {choices})") from None


def omega(z1, z2, kind: OmegaKind | str):
    """Arithmetic, geometric or harmonic mean of two positive numbers.

    Works elementwise on arrays.

    Examples
    --------
    >>> float(omega(4.0, 1.0, "gm")), float(omega(4.0, 1.0, "am")), float(omega(4.0, 1.0, "hm"))
    (2.0, 2.5, 1.6)
    """
    kind = OmegaKind.parse(kind)
    z1 = np.asarray(z1, dtype=np.float64)
    z2 = np.asarray(z2, dtype=np.float64)
    if np.any(~(z1 > 0)) or np.any(~(z2 > 0)):
        raise ValueError("omega needs strictly positive arguments")
    if kind is OmegaKind.AM:
        out = 0.5 * (z1 + z2)
    elif kind is OmegaKind.GM:
        out = np.sqrt(z1) * np.sqrt(z2)
    else:
        out = 2.0 * z1 * z2 / (z1 + z2)
    # rounding can push the mean a hair outside [min, max]
    return np.clip(out, np.minimum(z1, z2), np.maximum(z1, z2))


@dataclass(frozen=True)
class RotationPair:
    """Left/right planar rotations taking ``diag(sigma1, sigma2)`` to
    ``[[omega, *], [0, sigma1*sigma2/omega]]`` via ``phi_l @ Sigma @ phi_r``."""

    phi_l: np.ndarray
    phi_r: np.ndarray
    omega_value: np.ndarray


def rotation_pair(sigma1, sigma2, omega_value) -> RotationPair:
    """Build the rotation pair for a target leading diagonal entry.

    Requires ``sigma2 <= omega_value <= sigma1``. With
    ``c = sqrt((omega^2 - sigma2^2) / (sigma1^2 - sigma2^2))`` and
    ``s = sqrt(1 - c^2)``::

        phi_l = [[c*sigma1, s*sigma2], [-s*sigma2, c*sigma1]] / omega
        phi_r = [[c, -s], [s, c]]

    The rows of `phi_l` are normalized by their computed length, which
    equals `omega` in exact arithmetic; this keeps `phi_l` orthogonal to
    working precision. When ``sigma1`` and ``sigma2`` agree to 1e-12
    relative both rotations are the identity.

    Raises
    ------
    MajorizationError
        If `omega_value` lies outside ``[sigma2, sigma1]``.
    """
    s1 = np.asarray(sigma1, dtype=np.float64)
    s2 = np.asarray(sigma2, dtype=np.float64)
    om = np.asarray(omega_value, dtype=np.float64)
    if np.any(s2 < 0) or np.any(s1 < s2) or np.any(~(om > 0)):
        raise ValueError("rotation_pair needs sigma1 >= sigma2 >= 0 and omega > 0")
    slack = MAJORIZATION_SLACK * s1
    if np.any(om > s1 + slack) or np.any(om < s2 - slack):
        raise MajorizationError("majorization violated: omega outside [sigma2, sigma1]")
    om_c = np.clip(om, s2, s1)

    degenerate = (s1 - s2) <= DEGENERATE_TOL * s1
    # factored radicand, square roots taken separately to avoid underflow
    num = np.sqrt(om_c - s2) * np.sqrt(om_c + s2)
    den = np.where(degenerate, 1.0, np.sqrt(s1 - s2) * np.sqrt(s1 + s2))
    c = np.where(degenerate, 1.0, np.clip(num / den, 0.0, 1.0))
    s = np.sqrt((1.0 - c) * (1.0 + c))

    a = c * s1
    b = s * s2
    norm = np.hypot(a, b)
    a, b = a / norm, b / norm
    shape = np.shape(c) + (2, 2)
    phi_l = np.empty(shape)
    phi_l[..., 0, 0] = a
    phi_l[..., 0, 1] = b
    phi_l[..., 1, 0] = -b
    phi_l[..., 1, 1] = a
    phi_r = np.empty(shape)
    phi_r[..., 0, 0] = c
    phi_r[..., 0, 1] = -s
    phi_r[..., 1, 0] = s
    phi_r[..., 1, 1] = c
    return RotationPair(phi_l=phi_l, phi_r=phi_r, omega_value=om)


def _apply_stage(q: np.ndarray, r: np.ndarray, s: np.ndarray, j: int, target) -> None:
    """Rotate rows/columns ``j, j+1`` in place so that ``r[j, j] = target``.

    Only the 2x2 blocks of the embedding matrices are applied; the
    remaining rows and columns are untouched. ``q`` absorbs ``Theta_L^H``,
    the conjugate transpose of the left factor, so that ``q r s^H`` is
    unchanged.
    """
    blk = r[..., j : j + 2, j : j + 2]
    dec = svd_2x2_upper(blk)
    rp = rotation_pair(dec.sigma1, dec.sigma2, target)
    theta_l = rp.phi_l @ conj_transpose(dec.u)
    theta_r = dec.v @ rp.phi_r

    r[..., j : j + 2, j:] = theta_l @ r[..., j : j + 2, j:]
    r[..., : j + 2, j : j + 2] = r[..., : j + 2, j : j + 2] @ theta_r
    q[..., :, j : j + 2] = q[..., :, j : j + 2] @ conj_transpose(theta_l)
    s[..., :, j : j + 2] = s[..., :, j : j + 2] @ theta_r
    r[..., j + 1, j] = 0.0

    # exact arithmetic leaves the two diagonal entries real and positive;
    # move any rounding phase into q so the type invariant holds exactly
    for i in (j, j + 1):
        d = r[..., i, i]
        mag = np.abs(d)
        ph = d / mag
        r[..., i, i:] *= np.conj(ph)[..., None]
        q[..., :, i] *= ph[..., None]
        r[..., i, i] = mag


def _check_stage(k: int, size: int) -> int:
    if not 1 <= k <= size - 1:
        raise ValueError(f"stage index must lie in 1..{size - 1}, got {k}")
    return k - 1


def stage_update(state: DecompositionTriple, k: int, kind: OmegaKind | str) -> DecompositionTriple:
    """Apply stage `k` (1-based, ``1 <= k <= K-1``) and return a new triple."""
    kind = OmegaKind.parse(kind)
    j = _check_stage(k, state.k)
    out = state.copy()
    d = np.diagonal(out.r, axis1=-2, axis2=-1).real
    _apply_stage(out.q, out.r, out.s, j, omega(d[..., j], d[..., j + 1], kind))
    return out


def _sweep_inplace(q, r, s, kind: OmegaKind) -> None:
    for j in range(r.shape[-1] - 1):
        d = np.diagonal(r, axis1=-2, axis2=-1).real
        _apply_stage(q, r, s, j, omega(d[..., j], d[..., j + 1], kind))


def sweep(state: DecompositionTriple, kind: OmegaKind | str) -> DecompositionTriple:
    """One iteration: stages ``1, ..., K-1`` in order."""
    kind = OmegaKind.parse(kind)
    out = state.copy()
    _sweep_inplace(out.q, out.r, out.s, kind)
    return out


@dataclass
class SweepTrace:
    """Diagonal of ``R`` and its sum after every sweep.

    Entry 0 is the initial decomposition, entry ``l`` the state after
    ``l`` sweeps, so both histories hold ``iteration_index + 1`` items.
    """

    diag_history: list[np.ndarray] = field(default_factory=list)
    f_history: list[np.ndarray] = field(default_factory=list)

    @property
    def iteration_index(self) -> int:
        return len(self.diag_history) - 1

    def record(self, diag: np.ndarray) -> None:
        diag = np.array(diag, dtype=np.float64)
        self.diag_history.append(diag)
        self.f_history.append(diag.sum(axis=-1))

    def diags(self) -> np.ndarray:
        """History stacked as an array of shape ``(L + 1, ..., K)``."""
        return np.stack(self.diag_history)


def igmd(
    h,
    init="svd",
    kind: OmegaKind | str = OmegaKind.GM,
    iterations: int = 10,
    *,
    spread_tol: float | None = None,
) -> tuple[DecompositionTriple, SweepTrace]:
    """Iterative GMD of a square full-rank matrix (or a stack of them).

    Parameters
    ----------
    h : (..., K, K) array_like
    init : InitKind or str
        Starting decomposition, see :func:`itergmd.init.init_decompose`.
    kind : OmegaKind or str
    iterations : int
        Number of sweeps to run.
    spread_tol : float, optional
        Stop early once ``max(diag) / min(diag) - 1 <= spread_tol`` for
        every matrix in the batch. Off by default.
    """
    from .init import init_decompose

    if iterations < 0:
        raise ValueError("iterations must be nonnegative")
    kind = OmegaKind.parse(kind)
    state = init_decompose(h, init).copy()
    trace = SweepTrace()
    trace.record(state.diag)
    for _ in range(iterations):
        if spread_tol is not None:
            d = trace.diag_history[-1]
            if np.all(d.max(axis=-1) / d.min(axis=-1) - 1.0 <= spread_tol):
                break
        _sweep_inplace(state.q, state.r, state.s, kind)
        trace.record(state.diag)
    return state, trace


def geometric_mean_target(h) -> np.ndarray:
    """Geometric mean of the singular values, via a log-sum.

    Intended for oracles and metrics only; the iteration never calls it.
    """
    _, sigma, _ = svd_full(h)
    if np.any(sigma[..., -1] <= 1e-12 * sigma[..., 0]) or np.any(sigma[..., 0] <= 0):
        raise RankError("zero singular value")
    return np.exp(np.mean(np.log(sigma), axis=-1))


def mse_diag(trace: SweepTrace, sigma_bar) -> np.ndarray:
    """Per-iteration ``mean_k (r_kk - sigma_bar)^2``.

    Returns shape ``(L + 1,)`` for a single matrix, ``(L + 1, ...)`` for a
    batch (`sigma_bar` then has the batch shape).
    """
    diags = trace.diags()
    sb = np.asarray(sigma_bar, dtype=np.float64)[..., None]
    return np.mean((diags - sb) ** 2, axis=-1)
