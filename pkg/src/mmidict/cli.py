"""Command-line front end: train, select, encode, classify, summarize, eval, gen.

Exit codes: 0 success, 2 usage or validation error, 1 internal error.  Every
run serializes its configuration to ``<out-base>.run.json`` so results can be
reproduced byte-for-byte (step timings in trace files aside).
"""

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass

import numpy as np

from . import accel, synth
from .data import flatten, read_feature_csv, write_feature_csv
from .errors import MmidictError, ValidationError
from .gp import DEFAULT_JITTER, DEFAULT_TAU, kernel_from_codes, write_kernel_csv
from .labeldist import atom_class_dist
from .pursuit import (
    Dictionary,
    ksvd_train,
    omp_encode,
    read_codes_csv,
    read_dictionary_csv,
    write_codes_csv,
    write_dictionary_csv,
)
from .recognize import (
    classify_sequences,
    compactness_histogram,
    encode_sequences,
    leave_one_group_out,
    purity_histogram,
    write_histogram_csv,
    write_predictions_csv,
)
from .select import (
    atom_prior_from_codes,
    estimate_lambda,
    select_kmeans,
    select_me,
    select_mmi1,
    select_mmi2,
    select_mmi3,
    subset_dictionary,
    write_trace_csv,
)
from .summarize import summarize_sequence, write_summary_csv

THREADS_ENV = "MMIDICT_THREADS"


@dataclass
class RunConfig:
    """Everything a run needs for bit-reproducibility, written next to its outputs."""

    command: str
    seed: int = 0
    sparsity: int | None = None
    atoms: int | None = None
    k: int | None = None
    iters: int | None = None
    lam: float | None = None
    lam_mode: str | None = None  # "fixed" | "estimated"
    tau: float | None = None
    jitter: float | None = None
    agg: str | None = None
    prior: str | None = None
    method: str | None = None
    scheme: str | None = None
    knn: int | None = None
    dtw_abs: bool | None = None
    kind: str | None = None
    threads: int | None = None
    backend: str | None = None

    def write(self, out_path: str) -> None:
        base = out_path[: -len(".csv")] if out_path.endswith(".csv") else out_path
        payload = {k: v for k, v in asdict(self).items() if v is not None}
        with open(base + ".run.json", "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _base(path: str) -> str:
    return path[: -len(".csv")] if path.endswith(".csv") else path


def _resolve_threads(args) -> int | None:
    threads = getattr(args, "threads", None)
    if threads is None:
        env = os.environ.get(THREADS_ENV, "").strip()
        if env:
            try:
                threads = int(env)
            except ValueError:
                raise ValidationError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
    if threads is not None:
        if threads < 1:
            raise ValidationError("--threads must be >= 1")
        accel.set_threads(threads)
    return threads


def _load_labeled_codes(args, need_labels: bool):
    dataset = read_feature_csv(args.features)
    _, labels, frame_index = flatten(dataset)
    if need_labels and not dataset.labeled():
        raise ValidationError("this operation requires a fully labeled feature table")
    dictionary = read_dictionary_csv(args.dictionary)
    codes = read_codes_csv(args.codes, frame_index, dictionary.n_atoms)
    return dataset, dictionary, codes, labels


def cmd_train(args) -> int:
    dataset = read_feature_csv(args.features)
    Y, labels, frame_index = flatten(dataset)
    dictionary, codes, history = ksvd_train(
        Y, n_atoms=args.atoms, sparsity=args.sparsity, iters=args.iters, seed=args.seed,
        rmse_tol=args.rmse_tol,
    )
    if dataset.labeled():
        dists = atom_class_dist(codes, labels, dataset.n_classes, agg=args.agg)
        dictionary = Dictionary(atoms=dictionary.atoms, class_dist=dists)
    write_dictionary_csv(args.out, dictionary)
    base = _base(args.out)
    write_codes_csv(base + ".codes.csv", codes, frame_index)
    with open(base + ".history.csv", "w", encoding="utf-8") as fh:
        fh.write("iter,rmse\n")
        for i, r in enumerate(history):
            fh.write(f"{i},{r!r}\n")
    RunConfig(
        command="train", seed=args.seed, sparsity=args.sparsity, atoms=args.atoms,
        iters=args.iters, agg=args.agg, threads=args.resolved_threads,
        backend=accel.current_backend(),
    ).write(args.out)
    print(f"trained {dictionary.n_atoms} atoms; final rmse {history[-1]:.6g} ({len(history)} iterations)")
    return 0


def cmd_select(args) -> int:
    if args.method == "kmeans":
        dictionary = read_dictionary_csv(args.dictionary)
        out_dict = select_kmeans(dictionary, args.k, seed=args.seed)
        trace_rows = None
        lam = None
    else:
        if args.features is None or args.codes is None:
            raise ValidationError(f"method {args.method} requires --features and --codes")
        need_labels = args.method in ("mmi2", "mmi3")
        dataset, dictionary, codes, labels = _load_labeled_codes(args, need_labels)
        dists = None
        if dataset.labeled():
            dists = atom_class_dist(codes, labels, dataset.n_classes, agg=args.agg)
        lam = None
        if args.method in ("me", "mmi1", "mmi2"):
            kern = kernel_from_codes(codes, tau=args.tau, jitter=args.jitter)
            if args.dump_kernel:
                write_kernel_csv(args.dump_kernel, kern)
            sparse = not args.dense
            if args.method == "me":
                trace = select_me(kern, args.k)
            elif args.method == "mmi1":
                trace = select_mmi1(kern, args.k, sparse=sparse)
            else:
                lam = args.lam
                if lam is None:
                    lam = estimate_lambda(kern, dists, sparse=sparse)
                trace = select_mmi2(kern, dists, args.k, lam=lam, sparse=sparse)
            out_dict = subset_dictionary(dictionary, trace.chosen)
            if dists is not None:
                out_dict = Dictionary(
                    atoms=out_dict.atoms,
                    class_dist=dists[np.asarray(trace.chosen)],
                    atom_prior=out_dict.atom_prior,
                )
            trace_rows = trace
        else:  # mmi3
            priors = atom_prior_from_codes(codes, mode=args.prior)
            out_dict, merge_log = select_mmi3(dictionary, dists, priors, args.k)
            trace_rows = merge_log
    write_dictionary_csv(args.out, out_dict)
    if trace_rows is not None:
        write_trace_csv(_base(args.out) + ".trace.csv", trace_rows)
    RunConfig(
        command="select", seed=args.seed, k=args.k, method=args.method,
        lam=lam, lam_mode=None if args.method != "mmi2" else ("fixed" if args.lam is not None else "estimated"),
        tau=getattr(args, "tau", None), jitter=getattr(args, "jitter", None),
        agg=args.agg, prior=args.prior, threads=args.resolved_threads,
        backend=accel.current_backend(),
    ).write(args.out)
    print(f"selected {out_dict.n_atoms} atoms with {args.method}")
    return 0


def cmd_encode(args) -> int:
    dataset = read_feature_csv(args.features)
    dictionary = read_dictionary_csv(args.dictionary)
    Y, _, frame_index = flatten(dataset)
    codes = omp_encode(dictionary, Y, args.sparsity)
    write_codes_csv(args.out, codes, frame_index)
    RunConfig(
        command="encode", sparsity=args.sparsity, threads=args.resolved_threads,
        backend=accel.current_backend(),
    ).write(args.out)
    print(f"encoded {codes.n_signals} frames over {codes.n_atoms} atoms")
    return 0


def cmd_classify(args) -> int:
    dictionary = read_dictionary_csv(args.dictionary)
    rows = []
    correct = 0
    total = 0
    if args.logo:
        if args.data is None:
            raise ValidationError("--leave-one-group-out requires --data")
        dataset = read_feature_csv(args.data)
        if not dataset.labeled():
            raise ValidationError("classification data must be labeled")
        sequences = encode_sequences(dictionary, dataset, args.sparsity)
        for _, train, test in leave_one_group_out(sequences):
            preds, dists = classify_sequences(
                train, test, scheme=args.scheme, k_nn=args.knn, use_abs=args.dtw_abs
            )
            for s, p, d in zip(test, preds, dists):
                rows.append((s.seq_id, s.label, p, d))
                correct += int(p == s.label)
                total += 1
    else:
        if args.train is None or args.test is None:
            raise ValidationError("need --train and --test (or --data with --leave-one-group-out)")
        train_ds = read_feature_csv(args.train)
        test_ds = read_feature_csv(args.test)
        if not train_ds.labeled():
            raise ValidationError("training data must be labeled")
        train = encode_sequences(dictionary, train_ds, args.sparsity)
        test = encode_sequences(dictionary, test_ds, args.sparsity)
        preds, dists = classify_sequences(
            train, test, scheme=args.scheme, k_nn=args.knn, use_abs=args.dtw_abs
        )
        for s, p, d in zip(test, preds, dists):
            rows.append((s.seq_id, s.label, p, d))
            if s.label is not None:
                correct += int(p == s.label)
                total += 1
    write_predictions_csv(args.out, rows)
    accuracy = correct / total if total else float("nan")
    with open(_base(args.out) + ".summary.json", "w", encoding="utf-8") as fh:
        json.dump({"accuracy": accuracy, "n_test": total}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    RunConfig(
        command="classify", sparsity=args.sparsity, scheme=args.scheme, knn=args.knn,
        dtw_abs=args.dtw_abs, threads=args.resolved_threads, backend=accel.current_backend(),
    ).write(args.out)
    print(f"accuracy {accuracy:.4f} over {total} sequences")
    return 0


def cmd_summarize(args) -> int:
    dataset = read_feature_csv(args.features)
    summaries = []
    for s in dataset.sequences:
        if args.k >= s.n_frames:
            raise ValidationError(
                f"sequence {s.seq_id!r} has {s.n_frames} frames; k must be < that"
            )
        summaries.append(summarize_sequence(s.frames.T, args.k, sequence_id=s.seq_id))
    write_summary_csv(args.out, summaries)
    RunConfig(command="summarize", k=args.k, threads=args.resolved_threads,
              backend=accel.current_backend()).write(args.out)
    print(f"summarized {len(summaries)} sequences with k={args.k}")
    return 0


def cmd_eval(args) -> int:
    dataset, dictionary, codes, labels = _load_labeled_codes(args, need_labels=True)
    dists = atom_class_dist(codes, labels, dataset.n_classes, agg=args.agg)
    freq_p, edges_p = purity_histogram(dists)
    freq_c, edges_c = compactness_histogram(dictionary)
    write_histogram_csv(args.out_prefix + ".purity.csv", freq_p, edges_p)
    write_histogram_csv(args.out_prefix + ".compactness.csv", freq_c, edges_c)
    RunConfig(command="eval", agg=args.agg, threads=args.resolved_threads,
              backend=accel.current_backend()).write(args.out_prefix)
    print(f"purity mass in top bin {freq_p[-1]:.3f}; compactness mass in top bin {freq_c[-1]:.3f}")
    return 0


def cmd_gen(args) -> int:
    kw = {}
    if args.kind == "sequences":
        kw = dict(n_classes=args.classes, n_actors=args.actors, dim=args.dim, noise=args.noise)
    elif args.kind == "mixture":
        kw = dict(n_classes=args.classes, dim=args.dim, per_class=args.per_class, noise=args.noise)
    elif args.kind == "clusters":
        kw = dict(n_clusters=args.clusters, per_cluster=args.per_cluster, dim=args.dim,
                  noise_frac=args.noise)
    dataset = synth.generate(args.kind, args.seed, **kw)
    write_feature_csv(args.out, dataset)
    RunConfig(command="gen", seed=args.seed, kind=args.kind,
              threads=args.resolved_threads).write(args.out)
    print(f"wrote {len(dataset.sequences)} sequences ({dataset.n_signals} frames) to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mmidict",
        description="Compact, discriminative sparse dictionaries for sequence "
        "classification and summarization.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--threads", type=int, default=None,
                       help=f"cap worker threads (default: {THREADS_ENV} or all cores)")

    p = sub.add_parser("train", help="learn an over-complete dictionary with K-SVD")
    p.add_argument("features", help="feature table CSV")
    p.add_argument("--atoms", type=int, required=True, help="initial dictionary size K")
    p.add_argument("--sparsity", type=int, required=True, help="per-signal atom budget T")
    p.add_argument("--iters", type=int, default=20)
    p.add_argument("--rmse-tol", type=float, default=1e-6, help="early-stop improvement threshold")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--agg", choices=("abs", "signed", "count"), default="abs")
    p.add_argument("--out", required=True, help="dictionary CSV path")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("select", help="compress a dictionary to k atoms")
    p.add_argument("dictionary", help="dictionary CSV")
    p.add_argument("--codes", help="sparse codes CSV over the dictionary")
    p.add_argument("--features", help="feature table CSV (signal order and labels)")
    p.add_argument("--method", choices=("me", "mmi1", "mmi2", "mmi3", "kmeans"), required=True)
    p.add_argument("--k", type=int, required=True, help="target dictionary size")
    p.add_argument("--lambda", dest="lam", type=float, default=None,
                   help="label-term weight for mmi2 (default: estimated)")
    p.add_argument("--tau", type=float, default=DEFAULT_TAU, help="compact-support threshold")
    p.add_argument("--jitter", type=float, default=DEFAULT_JITTER)
    p.add_argument("--agg", choices=("abs", "signed", "count"), default="abs")
    p.add_argument("--prior", choices=("mass", "uniform"), default="mass")
    p.add_argument("--dense", action="store_true", help="exact dense evaluation (no compact support)")
    p.add_argument("--dump-kernel", default=None, help="write the kernel entries >= tau to CSV")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("encode", help="sparse-code a feature table over a dictionary")
    p.add_argument("dictionary")
    p.add_argument("features")
    p.add_argument("--sparsity", type=int, required=True)
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("classify", help="k-NN sequence classification (DTW or histogram)")
    p.add_argument("dictionary")
    p.add_argument("--train", help="labeled training feature table")
    p.add_argument("--test", help="test feature table")
    p.add_argument("--data", help="single labeled table for --leave-one-group-out")
    p.add_argument("--leave-one-group-out", dest="logo", action="store_true",
                   help="split --data by its group column")
    p.add_argument("--scheme", choices=("dtw", "hist"), default="dtw")
    p.add_argument("--knn", type=int, default=1)
    p.add_argument("--sparsity", type=int, default=10)
    p.add_argument("--dtw-abs", action="store_true", help="align absolute sparse codes")
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("summarize", help="pick k representative frames per sequence")
    p.add_argument("features")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("eval", help="purity and compactness histograms of a dictionary")
    p.add_argument("dictionary")
    p.add_argument("--codes", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--agg", choices=("abs", "signed", "count"), default="abs")
    p.add_argument("--out-prefix", required=True)
    common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gen", help="generate synthetic feature tables")
    p.add_argument("--kind", choices=("sequences", "mixture", "clusters"), default="sequences")
    p.add_argument("--classes", type=int, default=3)
    p.add_argument("--actors", type=int, default=9)
    p.add_argument("--clusters", type=int, default=10)
    p.add_argument("--per-cluster", type=int, default=10)
    p.add_argument("--per-class", type=int, default=150)
    p.add_argument("--dim", type=int, default=20)
    p.add_argument("--noise", type=float, default=None,
                   help="noise scale (kind-specific default)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_gen)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "noise", None) is None and getattr(args, "kind", None) is not None:
        args.noise = {"sequences": 0.03, "mixture": 0.02, "clusters": 0.05}[args.kind]
    try:
        args.resolved_threads = _resolve_threads(args)
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except MmidictError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
