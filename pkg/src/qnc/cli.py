"""Command-line entry point: ``qnc <subcommand> ...``.

JSON outputs are written with sorted keys and embed the full configuration
(including the seed), so identical invocations give byte-identical files.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .angles import compile_angles
from .circuit import build_optimized_loader, build_parallel_loader, compile_matrix_angles
from .classifier import agreement, fit, predict_classical, predict_quantum
from .data import (Dataset, SyntheticSpec, generate_synthetic, load_csv, load_idx,
                   nonnegativity_shift, pca_dataset, sample_per_class, shift_for, write_csv)
from .distance import (build_distance_circuit, distance_estimate_from_probability,
                       estimate_overlap_probability)
from .errors import (DatasetFormatError, InfeasibleSpecError, MitigationStarvationError,
                     QncError)
from .noise import RAW_E0, RAW_FIRST_QUBIT, OverlapPair, estimate_fidelity, simulate_overlap_pairs
from .rng import stream
from .simulator import NoiseSpec

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_NOT_FOUND = 3
EXIT_BAD_DATASET = 4
EXIT_INFEASIBLE = 5
EXIT_ESTIMATION = 6


# --------------------------------------------------------------------- helpers

def _noise(text: str) -> NoiseSpec:
    try:
        return NoiseSpec.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _read_vector(path: str) -> np.ndarray:
    """A JSON array, or numbers separated by commas and/or whitespace."""
    text = Path(path).read_text()
    try:
        values = json.loads(text)
    except json.JSONDecodeError:
        values = text.replace(",", " ").split()
    try:
        return np.asarray(values, dtype=float).ravel()
    except (TypeError, ValueError):
        raise DatasetFormatError(f"{path}: not a list of numbers") from None


def _config(args: argparse.Namespace) -> dict:
    # Output destinations do not affect results, so they stay out of the record.
    skip = {"func", "out", "meta", "emit_shots", "emit_angles", "emit_circuit"}
    out = {}
    for key, value in sorted(vars(args).items()):
        if key in skip:
            continue
        if isinstance(value, NoiseSpec):
            value = {"gamma": value.gamma, "fidelity": value.fidelity,
                     "systematic": value.systematic}
        out[key] = value
    return out


def _dump_json(payload: dict, path: str | None) -> None:
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _write_dataset(ds: Dataset, path: str | None, label_column: str = "label") -> None:
    if path is None or path == "-":
        write_csv(ds, sys.stdout, label_column)
    else:
        write_csv(ds, path, label_column)


def _with_systematic(args) -> NoiseSpec:
    noise = args.noise
    if getattr(args, "systematic", False):
        noise = NoiseSpec(noise.gamma, noise.fidelity, True)
    return noise


def _add_shot_flags(p: argparse.ArgumentParser, exact: bool = True) -> None:
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--shots", type=_positive_int, help="shots per distance estimate")
    if exact:
        group.add_argument("--exact", action="store_true",
                           help="exact noiseless overlap probabilities instead of shots")
    mit = p.add_mutually_exclusive_group()
    mit.add_argument("--mitigated", dest="mitigated", action="store_true", default=True,
                     help="full readout with post-selection (default)")
    mit.add_argument("--unmitigated", dest="mitigated", action="store_false",
                     help="read only the first qubit")
    p.add_argument("--noise", type=_noise, default=NoiseSpec(),
                   help="'gamma,fidelity', e.g. 0.03,0.96 (default 0,1)")
    p.add_argument("--systematic", action="store_true",
                   help="draw the angle noise once per gate instead of per shot")
    p.add_argument("--seed", type=int, default=0)


# ------------------------------------------------------------------ commands

def cmd_loader_compile(args) -> int:
    x = _read_vector(args.x)
    if args.optimized:
        circuit = build_optimized_loader(compile_matrix_angles(x))
        tree = None
    else:
        tree = compile_angles(x)
        circuit = build_parallel_loader(tree)
    if args.emit_angles:
        if tree is None:
            raise QncError("--emit-angles is not available with --optimized")
        _dump_json(tree.to_dict(), args.emit_angles)
    if args.emit_circuit:
        _dump_json(circuit.to_dict(), args.emit_circuit)
    if not (args.emit_angles or args.emit_circuit):
        _dump_json({"config": _config(args), "metadata": circuit.metadata()}, None)
    return EXIT_OK


def cmd_distance(args) -> int:
    x, y = _read_vector(args.x), _read_vector(args.y)
    if args.exact and args.emit_shots:
        raise QncError("--emit-shots needs --shots")
    tx, ty = compile_angles(x), compile_angles(y)
    noise = _with_systematic(args)
    shots = None if args.exact else args.shots
    rng = stream(args.seed)
    p_hat, record = estimate_overlap_probability(tx, ty, shots, noise, args.mitigated, rng)
    est = distance_estimate_from_probability(tx, ty, p_hat, shots, args.mitigated)
    circuit = build_distance_circuit(tx, ty)
    payload = {"config": _config(args), "seed": args.seed, "estimate": est.to_dict(),
               "circuit": circuit.metadata()}
    if args.emit_shots:
        _dump_json(record.to_dict(), args.emit_shots)
    _dump_json(payload, args.out)
    return EXIT_OK


def _finite(value):
    return None if isinstance(value, float) and np.isnan(value) else value


def cmd_classify(args) -> int:
    train = load_csv(args.train, label_column=args.label_column)
    test = load_csv(args.test, label_column=args.label_column) if args.test else train
    if train.dimension != test.dimension:
        raise DatasetFormatError(
            f"train has dimension {train.dimension}, test has {test.dimension}")
    if args.shift:
        shift = shift_for(train, test)
        train, test = nonnegativity_shift(train, shift), nonnegativity_shift(test, shift)
    model = fit(train.points, train.labels)
    classical = predict_classical(model, test.points)
    noise = _with_systematic(args)
    shots = None if args.exact else args.shots
    quantum = predict_quantum(model, test.points, shots, noise, args.mitigated,
                              seed=args.seed, workers=args.workers)
    truth = list(test.labels)
    quantum_out = quantum.to_dict(truth, "truth")
    quantum_out["truth"]["accuracy"] = _finite(quantum_out["truth"]["accuracy"])
    quantum_out["agreement_with_classical"] = _finite(agreement(quantum, classical))
    classical_out = classical.to_dict(truth, "truth")
    payload = {
        "config": _config(args),
        "seed": args.seed,
        "data": {"n_train": len(train), "n_test": len(test), "dimension": train.dimension,
                 "train_provenance": train.provenance, "test_provenance": test.provenance},
        "classical": classical_out,
        "quantum": quantum_out,
    }
    _dump_json(payload, args.out)
    return EXIT_OK


def cmd_synth_gen(args) -> int:
    spec = SyntheticSpec(k=args.k, d=args.d, n_per=args.n_per, min_sep=args.min_sep,
                         variance=args.variance, radius=args.radius, seed=args.seed,
                         variance_is_std=args.std, ball_for_points=args.ball)
    ds = generate_synthetic(spec)
    _write_dataset(ds, args.out)
    if args.meta:
        _dump_json({"config": _config(args), "seed": args.seed, "provenance": ds.provenance},
                   args.meta)
    return EXIT_OK


def cmd_pca(args) -> int:
    ds = load_csv(args.input, label_column=args.label_column, pad=False)
    projected, model = pca_dataset(ds, args.q)
    _write_dataset(projected, args.out, args.label_column)
    if args.meta:
        _dump_json({"config": _config(args), "kept": model.q,
                    "variances": model.variances.tolist(),
                    "mean": model.mean.tolist(), "axes": model.axes.tolist()}, args.meta)
    return EXIT_OK


def cmd_ingest(args) -> int:
    if args.images:
        if not args.labels:
            raise QncError("--images needs --labels")
        ds = load_idx(args.images, args.labels)
    else:
        ds = load_csv(args.csv, label_column=args.label_column, pad=False)
    if args.per_class:
        ds = sample_per_class(ds, args.per_class, args.seed)
    _write_dataset(ds, args.out, args.label_column)
    return EXIT_OK


def _read_pairs(path: str) -> list[OverlapPair]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"c_sim", "c_exp"} - set(reader.fieldnames or [])
        if missing:
            raise DatasetFormatError(f"{path}: missing columns {sorted(missing)}")
        pairs = []
        for line, row in enumerate(reader, start=2):
            try:
                pairs.append(OverlapPair(float(row["c_sim"]), float(row["c_exp"]),
                                         int(row.get("n") or 0), int(row.get("m") or 0),
                                         row.get("mitigated", "").lower() == "true"))
            except ValueError:
                raise DatasetFormatError(f"{path}: row {line} is not numeric") from None
    return pairs


def cmd_noise_fit(args) -> int:
    pairs = _read_pairs(args.pairs)
    if any(p.mitigated for p in pairs):
        raise QncError("fidelity fits need unmitigated overlaps")
    if args.m is None:
        fit_result = estimate_fidelity(pairs)
    else:
        # Pairs without an m column take the one given on the command line.
        pairs = [p if p.m else OverlapPair(p.c_sim, p.c_exp, p.n, args.m, p.mitigated)
                 for p in pairs]
        fit_result = estimate_fidelity(pairs, args.m)
    payload = {"config": _config(args), **fit_result.to_dict(), "pairs": len(pairs)}
    payload["fidelity"] = _finite(payload["fidelity"])
    _dump_json(payload, args.out)
    return EXIT_OK


def cmd_report(args) -> int:
    noise = _with_systematic(args)
    mitigated = args.estimator == "mitigated"
    raw = RAW_FIRST_QUBIT if args.estimator == RAW_FIRST_QUBIT else RAW_E0
    pairs = simulate_overlap_pairs(args.d, args.count, args.shots, noise, args.seed,
                                   mitigated=mitigated, raw=raw)
    own = args.out not in (None, "-")
    fh = open(args.out, "w", newline="") if own else sys.stdout
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["c_sim", "c_exp", "n", "m", "mitigated"])
        for p in pairs:
            writer.writerow([repr(p.c_sim), repr(p.c_exp), p.n, p.m, str(p.mitigated).lower()])
    finally:
        if own:
            fh.close()
    return EXIT_OK


# -------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qnc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"qnc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    loader = sub.add_parser("loader", help="loader circuits")
    loader_sub = loader.add_subparsers(dest="loader_command", required=True)
    p = loader_sub.add_parser("compile", help="compile a vector into a loader circuit")
    p.add_argument("--x", required=True, help="vector file (JSON array or numbers)")
    p.add_argument("--optimized", action="store_true",
                   help="sqrt(d) x sqrt(d) two-register loader instead of the parallel one")
    p.add_argument("--emit-angles", metavar="PATH", help="write the angle tree JSON ('-' = stdout)")
    p.add_argument("--emit-circuit", metavar="PATH", help="write the circuit JSON ('-' = stdout)")
    p.set_defaults(func=cmd_loader_compile)

    p = sub.add_parser("distance", help="estimate |x - y| on the distance circuit")
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    _add_shot_flags(p)
    p.add_argument("--emit-shots", metavar="PATH", help="write the shot record JSON")
    p.add_argument("--out", metavar="PATH", help="report path (default stdout)")
    p.set_defaults(func=cmd_distance)

    p = sub.add_parser("classify", help="classical and quantum Nearest Centroid on CSV data")
    p.add_argument("--train", required=True)
    p.add_argument("--test", help="defaults to the training file")
    p.add_argument("--label-column", default="label")
    _add_shot_flags(p)
    p.add_argument("--shift", action=argparse.BooleanOptionalAction, default=True,
                   help="translate both sets so all coordinates are nonnegative (default on)")
    p.add_argument("--workers", type=_positive_int,
                   help="parallel workers (default: $QNC_WORKERS or 1)")
    p.add_argument("--out", metavar="PATH", help="report path (default stdout)")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("synth-gen", help="synthetic well-separated clusters as CSV")
    p.add_argument("--k", type=_positive_int, required=True)
    p.add_argument("--d", type=_positive_int, required=True)
    p.add_argument("--n-per", type=_positive_int, default=10)
    p.add_argument("--min-sep", type=float, default=0.3)
    p.add_argument("--variance", type=float, default=0.05)
    p.add_argument("--std", action="store_true", help="read --variance as a standard deviation")
    p.add_argument("--radius", type=float, default=1.0)
    p.add_argument("--ball", action=argparse.BooleanOptionalAction, default=True,
                   help="redraw points that fall outside the ball (default on)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", metavar="PATH", help="CSV path (default stdout)")
    p.add_argument("--meta", metavar="PATH", help="write provenance JSON (centroids, params)")
    p.set_defaults(func=cmd_synth_gen)

    p = sub.add_parser("pca", help="project a CSV dataset onto its top q principal axes")
    p.add_argument("--input", required=True)
    p.add_argument("--q", type=_positive_int, required=True)
    p.add_argument("--label-column", default="label")
    p.add_argument("--out", metavar="PATH")
    p.add_argument("--meta", metavar="PATH", help="write the fitted PCA model as JSON")
    p.set_defaults(func=cmd_pca)

    p = sub.add_parser("ingest", help="convert IDX or CSV input to CSV, optionally subsampled")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--images", help="IDX image file (optionally gzipped)")
    src.add_argument("--csv", help="CSV file")
    p.add_argument("--labels", help="IDX label file, required with --images")
    p.add_argument("--label-column", default="label")
    p.add_argument("--per-class", type=_positive_int, help="stratified sample size per class")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", metavar="PATH")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("noise-fit", help="fit gate fidelity from unmitigated overlap pairs")
    p.add_argument("--pairs", required=True, help="CSV with c_sim, c_exp and optionally m")
    p.add_argument("--m", type=_positive_int, help="native TQG count, if the CSV has no m column")
    p.add_argument("--out", metavar="PATH")
    p.set_defaults(func=cmd_noise_fit)

    p = sub.add_parser("report", help="simulated c_exp vs c_sim scatter as CSV")
    p.add_argument("--d", type=_positive_int, default=8)
    p.add_argument("--count", type=_positive_int, default=40)
    p.add_argument("--shots", type=_positive_int, default=1000)
    p.add_argument("--noise", type=_noise, default=NoiseSpec(0.0, 0.96))
    p.add_argument("--systematic", action="store_true")
    p.add_argument("--estimator", choices=[RAW_E0, RAW_FIRST_QUBIT, "mitigated"], default=RAW_E0,
                   help="e0: unfiltered e_0 frequency; first-qubit; mitigated: post-selected")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", metavar="PATH")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        code, msg = EXIT_NOT_FOUND, f"file not found: {exc.filename}"
    except DatasetFormatError as exc:
        code, msg = EXIT_BAD_DATASET, f"malformed dataset: {exc}"
    except InfeasibleSpecError as exc:
        code, msg = EXIT_INFEASIBLE, f"infeasible spec: {exc}"
    except MitigationStarvationError as exc:
        code, msg = EXIT_ESTIMATION, f"estimation failed: {exc}"
    except (QncError, ValueError) as exc:
        code, msg = EXIT_ERROR, f"error: {exc}"
    print(f"qnc: {msg}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
