"""Command-line front end: ``python -m treeconf <subcommand> ...``.

Exit status is 0 on success, 1 on a data error (unreadable input, failed
inference) and 2 on a usage error. Warnings go to stderr; JSON reports also
carry them in a ``warnings`` list.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import warnings
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .core import CoordinateFrame, PhyloTree, Split, TaxonSet, TreeError
from .frechet import MeanConfig, frechet_mean
from .geodesic import distance
from .inference import (
    InferenceError,
    confidence_member,
    pca,
    split_support_test,
    summarize,
)
from .logmap import log_map_matrix
from .newick import NewickError, read_newick_file, write_newick
from .simulate import GeneratorError, GeneratorSpec, coverage_experiment, write_coverage_csv

SCHEMA = "1"


class DataError(Exception):
    """Input data that the pipeline cannot use."""


def _alpha(text: str) -> float:
    try:
        a = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid alpha {text!r}") from None
    if not 0.0 < a < 1.0:
        raise argparse.ArgumentTypeError(f"alpha must lie in (0, 1), got {text}")
    return a


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid number {text!r}") from None
    if not v > 0.0 or math.isinf(v):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def _nonneg_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid number {text!r}") from None
    if not v >= 0.0 or math.isinf(v):
        raise argparse.ArgumentTypeError(f"expected a non-negative number, got {text}")
    return v


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _add_mean_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="seed of the mean iteration (default 0)")
    p.add_argument("--tolerance", type=_positive_float, default=1e-8, help="convergence tolerance (default 1e-8)")
    p.add_argument("--max-iters", type=_positive_int, default=200_000, help="cap on proximal steps")


def _add_output(p: argparse.ArgumentParser) -> None:
    p.add_argument("-o", "--output", help="write the result here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="treeconf",
        description="Frechet means, log maps and confidence sets for samples of phylogenetic trees.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command", required=True)

    p = sub.add_parser("dist", help="geodesic distance between trees")
    p.add_argument("first", help="Newick file")
    p.add_argument("second", nargs="?", help="second Newick file (default: all pairs within the first)")
    p.add_argument("--pendant", action="store_true", help="include pendant edge lengths")
    _add_output(p)

    p = sub.add_parser("mean", help="Frechet mean tree of a sample")
    p.add_argument("trees", help="Newick file with the sample")
    p.add_argument("--pendant", action="store_true", help="report the Frechet value with pendant lengths")
    _add_mean_flags(p)
    _add_output(p)

    p = sub.add_parser("logmap", help="log-map coordinates of every tree as CSV")
    p.add_argument("trees", help="Newick file with the sample")
    p.add_argument("--base", help="Newick file with the base tree (default: the Frechet mean)")
    _add_mean_flags(p)
    _add_output(p)

    p = sub.add_parser("confset", help="confidence-set membership of a candidate tree (JSON)")
    p.add_argument("trees", help="Newick file with the sample")
    p.add_argument("--candidate", required=True, help="Newick file with one candidate tree")
    p.add_argument("--alpha", type=_alpha, action="append", help="level; repeatable (default 0.05)")
    _add_mean_flags(p)
    _add_output(p)

    p = sub.add_parser("test", help="split-support tests (JSON)")
    p.add_argument("trees", help="Newick file with the sample")
    p.add_argument(
        "--split",
        action="append",
        help="split to test, written as one side ('a,b') or both ('a,b|c,d,e'); repeatable "
        "(default: every split of the mean tree)",
    )
    p.add_argument("--mode", choices=("marginal", "joint"), default="marginal")
    p.add_argument("--bonferroni", action="store_true", help="multiply p-values by the frame dimension")
    _add_mean_flags(p)
    _add_output(p)

    p = sub.add_parser("pca", help="eigen-decomposition of the sample covariance (CSV)")
    p.add_argument("trees", help="Newick file with the sample")
    _add_mean_flags(p)
    _add_output(p)

    p = sub.add_parser("simulate", help="coverage experiment around a base tree (CSV)")
    p.add_argument("--base", required=True, help="Newick file with a binary base tree")
    scale = p.add_mutually_exclusive_group(required=True)
    scale.add_argument("--sd", type=_nonneg_float, help="isotropic standard deviation of the generator")
    scale.add_argument("--sigma", help="CSV file with the m x m generator covariance")
    p.add_argument("-n", "--sample-size", type=_positive_int, required=True, dest="n")
    p.add_argument("--replicates", type=_positive_int, default=1000)
    p.add_argument("--alpha", type=_alpha, action="append", help="level; repeatable (default 0.10 0.05 0.01)")
    p.add_argument("--workers", type=_positive_int, default=1)
    _add_mean_flags(p)
    _add_output(p)
    return parser


def _read(path: str, taxa: Optional[TaxonSet] = None) -> list:
    try:
        trees = read_newick_file(path, taxa)
    except NewickError:
        raise
    except TreeError as exc:
        raise DataError(f"{path}: {exc}") from None
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror or exc}") from None
    if not trees:
        raise DataError(f"{path}: no trees found")
    return trees


def _read_one(path: str, taxa: TaxonSet, what: str) -> PhyloTree:
    trees = _read(path, taxa)
    if len(trees) != 1:
        raise DataError(f"{path}: expected one {what} tree, found {len(trees)}")
    return trees[0]


def _mean_config(args) -> MeanConfig:
    return MeanConfig(max_iterations=args.max_iters, tolerance=args.tolerance, seed=args.seed)


def _num(x: float):
    x = float(x)
    return x if math.isfinite(x) else None


def _csv_text(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerows(rows)
    return buf.getvalue()


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def _summary(args):
    trees = _read(args.trees)
    return summarize(trees, _mean_config(args))


def _cmd_dist(args, notes) -> str:
    first = _read(args.first)
    if args.second is None:
        if len(first) < 2:
            raise DataError(f"{args.first}: need at least two trees for pairwise distances")
        pairs = [(i, j, first[i], first[j]) for i in range(len(first)) for j in range(i + 1, len(first))]
    else:
        second = _read(args.second, first[0].taxa)
        if len(first) == 1 and len(second) == 1:
            return repr(distance(first[0], second[0], args.pendant)) + "\n"
        pairs = [(i, j, a, b) for i, a in enumerate(first) for j, b in enumerate(second)]
    rows = [["first", "second", "distance"]]
    rows += [[i, j, repr(distance(a, b, args.pendant))] for i, j, a, b in pairs]
    return _csv_text(rows)


def _cmd_mean(args, notes) -> str:
    trees = _read(args.trees)
    cfg = MeanConfig(
        max_iterations=args.max_iters, tolerance=args.tolerance, seed=args.seed, pendant=args.pendant
    )
    result = frechet_mean(trees, cfg)
    if not result.converged:
        warnings.warn(f"mean iteration stopped after {result.iterations_used} steps without converging")
    if result.boundary_flag:
        warnings.warn("mean tree is not binary; it lies on an orthant boundary")
    return write_newick(result.mean) + "\n"


def _cmd_logmap(args, notes) -> str:
    trees = _read(args.trees)
    if args.base is not None:
        base = _read_one(args.base, trees[0].taxa, "base")
    else:
        result = frechet_mean(trees, _mean_config(args))
        if not result.converged:
            warnings.warn(f"mean iteration stopped after {result.iterations_used} steps without converging")
        base = result.mean
    try:
        frame = CoordinateFrame(base)
    except TreeError:
        frame = CoordinateFrame.reduced(base)
        warnings.warn(f"base tree is not binary; frame reduced to {frame.dim} splits")
    X = log_map_matrix(frame, trees)
    rows = [["tree"] + frame.labels()]
    rows += [[i] + [repr(float(v)) for v in row] for i, row in enumerate(X)]
    return _csv_text(rows)


def _header(s) -> dict:
    return {
        "schema": SCHEMA,
        "n": s.n,
        "m": len(s.retained),
        "retained_splits": s.retained_splits,
    }


def _cmd_confset(args, notes) -> str:
    trees = _read(args.trees)
    candidate = _read_one(args.candidate, trees[0].taxa, "candidate")
    s = summarize(trees, _mean_config(args))
    alphas = args.alpha or [0.05]
    reports = [confidence_member(s, candidate, a) for a in alphas]
    for flag in reports[0].flags:
        warnings.warn(flag)
    out = _header(s)
    single = len(alphas) == 1
    out["statistic"] = _num(reports[0].statistic)
    out["threshold"] = _num(reports[0].threshold) if single else [_num(r.threshold) for r in reports]
    out["alpha"] = alphas[0] if single else list(alphas)
    out["member"] = reports[0].member if single else [r.member for r in reports]
    out["p_value"] = _num(reports[0].p_value)
    out["warnings"] = notes
    return out


def _parse_split(text: str, taxa: TaxonSet) -> Split:
    side = text.split("|")[0]
    labels = [lab.strip() for lab in side.split(",") if lab.strip()]
    try:
        split = Split.from_labels(taxa, labels)
    except (TreeError, KeyError) as exc:
        raise DataError(f"bad split {text!r}: {exc}") from None
    if "|" in text:
        other = [lab.strip() for lab in text.split("|", 1)[1].split(",") if lab.strip()]
        if sorted(labels + other) != sorted(taxa.labels):
            raise DataError(f"bad split {text!r}: sides must partition the taxa")
    return split


def _cmd_test(args, notes) -> str:
    trees = _read(args.trees)
    s = summarize(trees, _mean_config(args))
    taxa = trees[0].taxa
    if args.split:
        splits = [_parse_split(t, taxa) for t in args.split]
        for sp, text in zip(splits, args.split):
            if s.frame is None or sp not in s.frame:
                raise DataError(f"split {text!r} is not a coordinate of the mean tree's frame")
    else:
        splits = list(s.frame.order)
    results = []
    for sp in splits:
        r = split_support_test(s, sp, mode=args.mode, bonferroni=args.bonferroni)
        for flag in r.flags:
            warnings.warn(f"{sp.format(taxa)}: {flag}")
        results.append(
            {
                "split": sp.format(taxa),
                "statistic": _num(r.statistic),
                "p_value": _num(r.p_value),
                "raw_p_value": _num(r.raw_p_value),
                "degenerate": r.degenerate,
            }
        )
    out = _header(s)
    out["mode"] = args.mode
    out["bonferroni"] = args.bonferroni
    out["tests"] = results
    out["warnings"] = notes
    return out


def _cmd_pca(args, notes) -> str:
    s = _summary(args)
    w, V = pca(s)
    rows = [["component", "eigenvalue"] + s.split_labels()]
    for c in range(len(w)):
        rows.append([c + 1, repr(float(w[c]))] + [repr(float(v)) for v in V[:, c]])
    return _csv_text(rows)


def _read_sigma(path: str) -> np.ndarray:
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = [r for r in csv.reader(fh) if r]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror or exc}") from None
    try:
        return np.array([[float(x) for x in r] for r in rows])
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None


def _cmd_simulate(args, notes) -> str:
    trees = _read(args.base)
    if len(trees) != 1:
        raise DataError(f"{args.base}: expected one base tree, found {len(trees)}")
    try:
        frame = CoordinateFrame(trees[0])
        sigma = args.sd ** 2 * np.eye(frame.dim) if args.sd is not None else _read_sigma(args.sigma)
        spec = GeneratorSpec(frame, sigma, args.seed)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    alphas = args.alpha or [0.10, 0.05, 0.01]
    result = coverage_experiment(
        spec, args.n, args.replicates, alphas, _mean_config(args), workers=args.workers
    )
    if result.rejections:
        warnings.warn(f"generator rejected {result.rejections} incompatible draws")
    if result.reduced:
        warnings.warn(f"{result.reduced} replicates used a rank-reduced frame")
    return write_coverage_csv(result)


_COMMANDS = {
    "dist": _cmd_dist,
    "mean": _cmd_mean,
    "logmap": _cmd_logmap,
    "confset": _cmd_confset,
    "test": _cmd_test,
    "pca": _cmd_pca,
    "simulate": _cmd_simulate,
}


def _emit(text: str, path: Optional[str], stdout) -> None:
    if path is None or path == "-":
        stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc.strerror or exc}") from None


def run(argv: Optional[Sequence[str]] = None, stdout=None, stderr=None) -> int:
    """Run the command line ``argv`` and return the exit status."""
    stdout = stdout if stdout is not None else sys.stdout
    stderr = stderr if stderr is not None else sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    notes: list = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            out = _COMMANDS[args.command](args, notes)
            notes.extend(str(w.message) for w in caught)
            notes[:] = list(dict.fromkeys(notes))
            if isinstance(out, dict):
                out = _json_text(out)
            _emit(out, args.output, stdout)
            status = 0
        except (DataError, TreeError, InferenceError, GeneratorError) as exc:
            notes.extend(str(w.message) for w in caught)
            stderr.write(f"treeconf {args.command}: error: {exc}\n")
            status = 1
    for note in dict.fromkeys(notes):
        stderr.write(f"treeconf {args.command}: warning: {note}\n")
    return status


def main() -> None:
    sys.exit(run())
