"""Monte Carlo MIMO harness: Rayleigh channels, 16-QAM, GMD-based ZF-THP.

Randomness is drawn from per-trial streams derived from the master seed,
so results do not depend on how trials are split into work chunks or on
the number of worker processes. Trials are processed in fixed-size chunks
and reduced in trial order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from joblib import Parallel, delayed

from .gmdref import exact_gmd
from .igmd import OmegaKind, _sweep_inplace, geometric_mean_target
from .init import InitKind, init_decompose
from .matcore import MatrixError, conj_transpose
from .triple import DecompositionTriple

__all__ = [
    "ChannelConfig",
    "BerPoint",
    "MseCurve",
    "BerErrors",
    "QAM_DELTA",
    "trial_rng",
    "gen_rayleigh",
    "awgn",
    "qam16_map",
    "qam16_demap",
    "modulo",
    "thp_precode",
    "zfthp_link",
    "mse_samples",
    "run_mse_experiment",
    "ber_errors",
    "run_ber_experiment",
]

CHUNK = 250
EXACT_LABEL = "exact-gmd"

_SCALE = 1.0 / math.sqrt(10.0)
# modulo period of the 16-QAM lattice, levels {+-1, +-3} / sqrt(10)
QAM_DELTA = 8.0 * _SCALE
# 2-bit Gray label (b_hi, b_lo) -> level before scaling
_GRAY_LEVEL = {(0, 0): -3.0, (0, 1): -1.0, (1, 1): 1.0, (1, 0): 3.0}
# sorted levels -3, -1, 1, 3 -> Gray bits
_LEVEL_BITS = np.array([[0, 0], [0, 1], [1, 1], [1, 0]], dtype=np.uint8)
_BITS_TO_LEVEL = np.array([-3.0, -1.0, 3.0, 1.0])  # index b_hi*2 + b_lo

_CHANNEL_STREAM = 0
_LINK_STREAM = 1


@dataclass(frozen=True)
class ChannelConfig:
    k: int = 7
    trials: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("k must be at least 2")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")


@dataclass(frozen=True)
class BerPoint:
    snr_db: float
    bit_errors: int
    bits_sent: int
    ber: float = field(init=False)
    # standard error of `ber`, estimated across channel realizations
    ber_stderr: float = 0.0

    def __post_init__(self):
        if self.bits_sent <= 0:
            raise ValueError("bits_sent must be positive")
        if not 0 <= self.bit_errors <= self.bits_sent:
            raise ValueError("bit_errors must lie in [0, bits_sent]")
        object.__setattr__(self, "ber", self.bit_errors / self.bits_sent)


@dataclass(frozen=True)
class MseCurve:
    init: InitKind
    kind: OmegaKind
    mse_per_iteration: np.ndarray
    # standard error of each mean, across channel realizations
    mse_stderr: np.ndarray


def trial_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for ``(seed, *key)``, e.g. ``(seed, trial, point)``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


def gen_rayleigh(k: int, rng: np.random.Generator, size: tuple[int, ...] = ()) -> np.ndarray:
    """i.i.d. CN(0, 1) entries: real and imaginary parts ~ N(0, 1/2)."""
    shape = tuple(size) + (k, k)
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * math.sqrt(0.5)


def awgn(rng: np.random.Generator, shape: tuple[int, ...], snr_db: float) -> np.ndarray:
    """CN(0, N0) noise with ``snr_db = 10 log10(1 / N0)`` for unit-energy symbols."""
    n0 = 10.0 ** (-snr_db / 10.0)
    return math.sqrt(n0 / 2.0) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def qam16_map(bits) -> np.ndarray:
    """Gray-coded unit-energy 16-QAM.

    `bits` has shape ``(..., 4)`` ordered ``b3 b2 b1 b0``; ``b3 b2`` pick
    the in-phase level and ``b1 b0`` the quadrature level.
    """
    bits = np.asarray(bits)
    if bits.shape[-1:] != (4,):
        raise ValueError("qam16_map needs groups of exactly 4 bits")
    if np.any((bits != 0) & (bits != 1)):
        raise ValueError("bits must be 0 or 1")
    b = bits.astype(np.intp)
    re = _BITS_TO_LEVEL[2 * b[..., 0] + b[..., 1]]
    im = _BITS_TO_LEVEL[2 * b[..., 2] + b[..., 3]]
    return (re + 1j * im) * _SCALE


def _slice_axis(x: np.ndarray) -> np.ndarray:
    idx = np.rint((x / _SCALE + 3.0) / 2.0)
    return np.clip(idx, 0, 3).astype(np.intp)


def qam16_demap(y) -> np.ndarray:
    """Minimum-distance slicing back to 4 bits, shape ``(..., 4)``."""
    y = np.asarray(y, dtype=np.complex128)
    hi = _LEVEL_BITS[_slice_axis(y.real)]
    lo = _LEVEL_BITS[_slice_axis(y.imag)]
    return np.concatenate([hi, lo], axis=-1)


def modulo(x, delta: float = QAM_DELTA) -> np.ndarray:
    """Fold real and imaginary parts into ``[-delta/2, delta/2)``."""
    x = np.asarray(x, dtype=np.complex128)

    def fold(v):
        return v - delta * np.floor(v / delta + 0.5)

    return fold(x.real) + 1j * fold(x.imag)


def thp_precode(r, symbols) -> np.ndarray:
    """Successive pre-cancellation with the unit-diagonal feedback
    ``diag(r)^-1 r``, from the last stream to the first.

    `r` is ``(..., K, K)``; `symbols` is ``(..., K)`` or ``(..., V, K)`` for
    `V` symbol vectors sharing one channel.
    """
    r = np.asarray(r, dtype=np.complex128)
    sym = np.asarray(symbols, dtype=np.complex128)
    single = sym.ndim == r.ndim - 1
    if single:
        sym = sym[..., None, :]
    k = r.shape[-1]
    if sym.shape[-1] != k:
        raise MatrixError(f"expected {k} symbols per vector, got {sym.shape[-1]}")
    fb = r / np.diagonal(r, axis1=-2, axis2=-1)[..., :, None]
    x = np.zeros(np.broadcast_shapes(sym.shape, fb.shape[:-2] + (1, k)), dtype=np.complex128)
    for i in range(k - 1, -1, -1):
        interf = np.einsum("...j,...vj->...v", fb[..., i, i + 1 :], x[..., i + 1 :])
        x[..., i] = modulo(sym[..., i] - interf)
    return x[..., 0, :] if single else x


def zfthp_link(
    triple: DecompositionTriple, symbols, noise, channel=None
) -> np.ndarray:
    """Decision-point signals of a ZF-THP link built on ``h = q r s^H``.

    Transmitter: THP on the unit-diagonal feedback from `r`, then precode
    with `s`. Channel: ``channel @ (s x) + noise`` (``channel`` defaults to
    the triple's reconstruction). Receiver: ``q^H``, divide stream ``k``
    by ``r_kk`` and fold with the modulo. Noise-free, the output equals
    `symbols` up to rounding.

    Shapes: `symbols` and `noise` are ``(..., K)`` or ``(..., V, K)``
    against a triple with batch shape ``...``.
    """
    q, r, s = triple.q, triple.r, triple.s
    sym = np.asarray(symbols, dtype=np.complex128)
    nse = np.asarray(noise, dtype=np.complex128)
    if sym.shape != nse.shape:
        raise MatrixError(f"symbols {sym.shape} and noise {nse.shape} differ in shape")
    if sym.shape[-1] != r.shape[-1]:
        raise MatrixError(f"expected {r.shape[-1]} symbols per vector, got {sym.shape[-1]}")
    h = triple.reconstruct() if channel is None else np.asarray(channel, dtype=np.complex128)
    single = sym.ndim == r.ndim - 1
    if single:
        sym, nse = sym[..., None, :], nse[..., None, :]

    x = thp_precode(r, sym)
    tx = x @ np.swapaxes(s, -1, -2)
    y = tx @ np.swapaxes(h, -1, -2) + nse
    z = y @ np.conj(q)
    z = z / np.diagonal(r, axis1=-2, axis2=-1).real[..., None, :]
    out = modulo(z)
    return out[..., 0, :] if single else out


# -- experiment drivers -------------------------------------------------------


def _chunks(trials: int) -> list[range]:
    return [range(a, min(a + CHUNK, trials)) for a in range(0, trials, CHUNK)]


def _channels(cfg: ChannelConfig, trials: range) -> np.ndarray:
    return np.stack([gen_rayleigh(cfg.k, trial_rng(cfg.seed, _CHANNEL_STREAM, t)) for t in trials])


def _run_chunks(worker, cfg: ChannelConfig, n_jobs: int, *args):
    chunks = _chunks(cfg.trials)
    if n_jobs == 1 or len(chunks) == 1:
        return [worker(cfg, c, *args) for c in chunks]
    return Parallel(n_jobs=n_jobs)(delayed(worker)(cfg, c, *args) for c in chunks)


def _mse_chunk(cfg, trials, inits, kinds, iterations):
    h = _channels(cfg, trials)
    sigma_bar = geometric_mean_target(h)[:, None]
    out = {}
    for init in inits:
        start = init_decompose(h, init)
        for kind in kinds:
            state = start.copy()
            rows = [state.diag]
            for _ in range(iterations):
                _sweep_inplace(state.q, state.r, state.s, kind)
                rows.append(state.diag)
            d = np.stack(rows, axis=1)  # (trials, L + 1, K)
            out[(init, kind)] = np.mean((d - sigma_bar[..., None]) ** 2, axis=-1)
    return out


def mse_samples(
    cfg: ChannelConfig,
    inits: Sequence[InitKind | str],
    kinds: Sequence[OmegaKind | str],
    iterations: int,
    n_jobs: int = 1,
) -> dict[tuple[InitKind, OmegaKind], np.ndarray]:
    """Per-trial diagonal MSE, ``(trials, iterations + 1)`` per combination.

    Every combination sees the same channel realizations.
    """
    if iterations < 0:
        raise ValueError("iterations must be nonnegative")
    inits = [InitKind.parse(i) for i in inits]
    kinds = [OmegaKind.parse(k) for k in kinds]
    parts = _run_chunks(_mse_chunk, cfg, n_jobs, inits, kinds, iterations)
    return {key: np.concatenate([p[key] for p in parts]) for key in parts[0]}


def run_mse_experiment(
    cfg: ChannelConfig,
    inits: Sequence[InitKind | str],
    kinds: Sequence[OmegaKind | str],
    iterations: int,
    n_jobs: int = 1,
) -> list[MseCurve]:
    samples = mse_samples(cfg, inits, kinds, iterations, n_jobs)
    curves = []
    for (init, kind), arr in samples.items():
        n = arr.shape[0]
        stderr = arr.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros(arr.shape[1])
        curves.append(MseCurve(init, kind, arr.mean(axis=0), stderr))
    return curves


@dataclass(frozen=True)
class BerErrors:
    """Raw per-trial bit-error counts of a BER run.

    ``counts[i, p, t]`` holds the errors of decomposition ``labels[i]`` at
    SNR point ``p`` on channel realization ``t``; every trial sends
    ``bits_per_trial`` bits at every point.
    """

    labels: list
    snr_db: list[float]
    counts: np.ndarray
    bits_per_trial: int

    def points(self, label) -> list[BerPoint]:
        i = self.labels.index(label)
        c = self.counts[i]
        n = c.shape[1]
        out = []
        for p, snr in enumerate(self.snr_db):
            per_trial = c[p] / self.bits_per_trial
            se = float(per_trial.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
            out.append(BerPoint(float(snr), int(c[p].sum()), self.bits_per_trial * n, ber_stderr=se))
        return out


def _ber_chunk(cfg, trials, init, kind, iterations_list, snr_db, vectors):
    h = _channels(cfg, trials)
    triples = {}
    state = init_decompose(h, init).copy()
    done = 0
    for it in sorted(iterations_list):
        while done < it:
            _sweep_inplace(state.q, state.r, state.s, kind)
            done += 1
        triples[it] = state.copy()
    triples[EXACT_LABEL] = exact_gmd(h)
    labels = list(iterations_list) + [EXACT_LABEL]

    k = cfg.k
    counts = np.zeros((len(labels), len(snr_db), len(trials)), dtype=np.int64)
    for p, snr in enumerate(snr_db):
        bits = np.empty((len(trials), vectors, k, 4), dtype=np.uint8)
        noise = np.empty((len(trials), vectors, k), dtype=np.complex128)
        for i, t in enumerate(trials):
            rng = trial_rng(cfg.seed, _LINK_STREAM, t, p)
            bits[i] = rng.integers(0, 2, size=(vectors, k, 4), dtype=np.uint8)
            noise[i] = awgn(rng, (vectors, k), snr)
        sym = qam16_map(bits)
        for li, label in enumerate(labels):
            z = zfthp_link(triples[label], sym, noise, channel=h)
            err = qam16_demap(z) != bits
            counts[li, p] = err.reshape(len(trials), -1).sum(axis=1)
    return counts


def ber_errors(
    cfg: ChannelConfig,
    init: InitKind | str,
    kind: OmegaKind | str,
    iterations_list: Sequence[int],
    snr_grid_db: Sequence[float],
    bits_per_point: int,
    n_jobs: int = 1,
) -> BerErrors:
    """Bit-error counts for IGMD at each iteration count plus exact GMD.

    Each channel realization carries ``ceil(bits_per_point / (4 K trials))``
    symbol vectors per SNR point, so at least `bits_per_point` bits are
    sent. Channels depend only on ``(seed, trial)`` and symbols/noise on
    ``(seed, trial, point)``: runs that differ only in `init` or `kind`
    are paired on identical data.
    """
    init = InitKind.parse(init)
    kind = OmegaKind.parse(kind)
    its = [int(i) for i in iterations_list]
    if any(i < 0 for i in its):
        raise ValueError("iteration counts must be nonnegative")
    if len(set(its)) != len(its):
        raise ValueError("duplicate iteration counts")
    snr = [float(x) for x in snr_grid_db]
    if not snr:
        raise ValueError("snr grid is empty")
    if bits_per_point < 1:
        raise ValueError("bits_per_point must be positive")
    vectors = max(1, math.ceil(bits_per_point / (4 * cfg.k * cfg.trials)))
    parts = _run_chunks(_ber_chunk, cfg, n_jobs, init, kind, its, snr, vectors)
    return BerErrors(
        labels=its + [EXACT_LABEL],
        snr_db=snr,
        counts=np.concatenate(parts, axis=2),
        bits_per_trial=vectors * 4 * cfg.k,
    )


def run_ber_experiment(
    cfg: ChannelConfig,
    init: InitKind | str,
    kind: OmegaKind | str,
    iterations_list: Sequence[int],
    snr_grid_db: Sequence[float],
    bits_per_point: int,
    n_jobs: int = 1,
) -> dict[int | str, list[BerPoint]]:
    """BER curves keyed by iteration count, plus ``"exact-gmd"``."""
    errs = ber_errors(cfg, init, kind, iterations_list, snr_grid_db, bits_per_point, n_jobs)
    return {label: errs.points(label) for label in errs.labels}
