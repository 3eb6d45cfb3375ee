"""Command-line driver: ``itergmd decompose | mse | ber | replay``.

Exit codes: 0 success, 1 runtime/numeric error, 2 usage or parse error.
Every result file gets a ``<name>.manifest.json`` sidecar recording the
command, its full parameter set, the seed, the code version and the wall
time; ``itergmd replay`` re-runs a manifest.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from typing import Sequence

import numpy as np

from . import __version__
from .igmd import OmegaKind, geometric_mean_target, igmd, mse_diag
from .init import InitKind
from .matcore import MatrixError, RankError, read_matrix, write_matrix
from .mimosim import ChannelConfig, ber_errors, run_mse_experiment

log = logging.getLogger("itergmd")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _init_kind(text: str) -> InitKind:
    try:
        return InitKind.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _omega_kind(text: str) -> OmegaKind:
    try:
        return OmegaKind.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _csv_list(conv):
    def parse(text: str):
        items = [t.strip() for t in text.split(",") if t.strip()]
        try:
            return [conv(t) for t in items]
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None

    return parse


def _nonneg_int(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be nonnegative")
    return v


def _pos_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _write_manifest(path: str, command: str, params: dict, seed, duration: float) -> str:
    manifest = {
        "command": command,
        "params": params,
        "seed": seed,
        "version": __version__,
        "duration_s": duration,
    }
    mpath = path + ".manifest.json"
    with open(mpath, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return mpath


def _fmt(x: float) -> str:
    return repr(float(x))


# -- subcommands ---------------------------------------------------------------


def cmd_decompose(matrix_file: str, init: InitKind, kind: OmegaKind, iterations: int, out_dir: str) -> dict:
    try:
        h = read_matrix(matrix_file)
    except OSError as exc:
        raise UsageError(f"cannot read {matrix_file}: {exc}") from None
    except MatrixError as exc:
        raise UsageError(f"{matrix_file}: {exc}") from None
    if h.shape[0] != h.shape[1]:
        raise MatrixError(f"matrix must be square, got {h.shape[0]}x{h.shape[1]}")
    triple, trace = igmd(h, init, kind, iterations)
    sigma_bar = geometric_mean_target(h)
    mse = mse_diag(trace, sigma_bar)

    os.makedirs(out_dir, exist_ok=True)
    write_matrix(os.path.join(out_dir, "q.txt"), triple.q)
    write_matrix(os.path.join(out_dir, "r.txt"), triple.r)
    write_matrix(os.path.join(out_dir, "s.txt"), triple.s)
    k = triple.k
    path = os.path.join(out_dir, "trace.csv")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration"] + [f"r_{i}{i}" if k < 10 else f"r_{i}_{i}" for i in range(1, k + 1)] + ["F", "mse"])
        for ell, (d, f) in enumerate(zip(trace.diag_history, trace.f_history)):
            w.writerow([ell] + [_fmt(x) for x in d] + [_fmt(f), _fmt(mse[ell])])
    return {"trace": path}


def cmd_mse(k, trials, iterations, seed, inits, kinds, out_csv, jobs=1) -> dict:
    cfg = ChannelConfig(k=k, trials=trials, seed=seed)
    curves = run_mse_experiment(cfg, inits, kinds, iterations, n_jobs=jobs)
    with open(out_csv, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["init", "kind", "iteration", "mean_mse"])
        for c in curves:
            for ell, v in enumerate(c.mse_per_iteration):
                w.writerow([c.init.value, c.kind.value, ell, _fmt(v)])
    return {"csv": out_csv}


def cmd_ber(k, init, kind, iterations_list, snr_list, bits, seed, out_csv, trials=10_000, jobs=1) -> dict:
    if not snr_list:
        raise UsageError("--snr-list must name at least one SNR point")
    cfg = ChannelConfig(k=k, trials=trials, seed=seed)
    errs = ber_errors(cfg, init, kind, iterations_list, snr_list, bits, n_jobs=jobs)
    with open(out_csv, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["init", "kind", "iterations", "snr_db", "bits", "bit_errors", "ber"])
        for label in errs.labels:
            for p in errs.points(label):
                w.writerow([init.value, kind.value, label, _fmt(p.snr_db), p.bits_sent, p.bit_errors, _fmt(p.ber)])
    return {"csv": out_csv}


# -- argument parsing ------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="itergmd", description="Iterative geometric mean decomposition tools.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("decompose", help="decompose one matrix from a text file")
    d.add_argument("--matrix-file", required=True)
    d.add_argument("--init", type=_init_kind, default=InitKind.SVD)
    d.add_argument("--kind", type=_omega_kind, default=OmegaKind.GM)
    d.add_argument("--iterations", type=_nonneg_int, default=10)
    d.add_argument("--out-dir", default=".")

    m = sub.add_parser("mse", help="diagonal MSE versus iteration (Monte Carlo)")
    m.add_argument("--k", type=_pos_int, default=7)
    m.add_argument("--trials", type=_pos_int, default=10_000)
    m.add_argument("--iterations", type=_nonneg_int, default=10)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--inits", type=_csv_list(_init_kind), default=list(InitKind))
    m.add_argument("--kinds", type=_csv_list(_omega_kind), default=list(OmegaKind))
    m.add_argument("--out-csv", required=True)
    m.add_argument("--jobs", type=_pos_int, default=1)

    b = sub.add_parser("ber", help="ZF-THP bit error rate versus SNR (Monte Carlo)")
    b.add_argument("--k", type=_pos_int, default=7)
    b.add_argument("--init", type=_init_kind, default=InitKind.VBLAST_QR)
    b.add_argument("--kind", type=_omega_kind, default=OmegaKind.GM)
    b.add_argument("--iterations-list", type=_csv_list(_nonneg_int), default=[1, 2, 3, 4])
    b.add_argument("--snr-list", type=_csv_list(float), required=True)
    b.add_argument("--bits", type=_pos_int, default=1_000_000)
    b.add_argument("--trials", type=_pos_int, default=10_000)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out-csv", required=True)
    b.add_argument("--jobs", type=_pos_int, default=1)

    r = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    r.add_argument("manifest")
    r.add_argument("--out", help="override the output path (csv file or directory)")
    r.add_argument("--jobs", type=_pos_int, default=None)
    return p


def _params(args: argparse.Namespace) -> dict:
    """JSON-ready parameter set of a parsed command."""
    out = {}
    for key, val in vars(args).items():
        if key in ("command", "verbose"):
            continue
        if isinstance(val, (InitKind, OmegaKind)):
            val = val.value
        elif isinstance(val, list):
            val = [v.value if isinstance(v, (InitKind, OmegaKind)) else v for v in val]
        out[key] = val
    return out


def _dispatch(command: str, params: dict) -> tuple[str, dict]:
    """Run `command`; returns the path the manifest is attached to."""
    if command == "decompose":
        cmd_decompose(
            params["matrix_file"],
            InitKind.parse(params["init"]),
            OmegaKind.parse(params["kind"]),
            params["iterations"],
            params["out_dir"],
        )
        return os.path.join(params["out_dir"], "trace.csv"), params
    if command == "mse":
        cmd_mse(
            params["k"],
            params["trials"],
            params["iterations"],
            params["seed"],
            [InitKind.parse(x) for x in params["inits"]],
            [OmegaKind.parse(x) for x in params["kinds"]],
            params["out_csv"],
            params.get("jobs", 1),
        )
        return params["out_csv"], params
    if command == "ber":
        cmd_ber(
            params["k"],
            InitKind.parse(params["init"]),
            OmegaKind.parse(params["kind"]),
            params["iterations_list"],
            params["snr_list"],
            params["bits"],
            params["seed"],
            params["out_csv"],
            params.get("trials", 10_000),
            params.get("jobs", 1),
        )
        return params["out_csv"], params
    raise UsageError(f"unknown command {command!r}")


def _replay(args) -> tuple[str, str, dict]:
    try:
        with open(args.manifest, encoding="utf-8") as fh:
            manifest = json.load(fh)
        command, params = manifest["command"], dict(manifest["params"])
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot load manifest {args.manifest}: {exc}") from None
    if args.out:
        params["out_dir" if command == "decompose" else "out_csv"] = args.out
    if args.jobs is not None and command != "decompose":
        params["jobs"] = args.jobs
    return command, *_dispatch(command, params)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    t0 = time.perf_counter()
    try:
        if args.command == "replay":
            command, path, params = _replay(args)
        else:
            command = args.command
            path, params = _dispatch(command, _params(args))
    except UsageError as exc:
        print(f"itergmd: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (MatrixError, RankError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"itergmd: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    duration = time.perf_counter() - t0
    mpath = _write_manifest(path, command, params, params.get("seed"), duration)
    log.info("wrote %s (%.2fs), manifest %s", path, duration, mpath)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
