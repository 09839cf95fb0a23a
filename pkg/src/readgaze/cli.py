"""Command-line entry point orchestrating the full pipeline.

One executable covers the whole workflow: ingest raw logs into a data
directory, detect fixation events, compute window features, generate
synthetic corpora, train and evaluate classifiers, run the statistical
battery, report inter-rater reliability, render scanplots, and serve
the annotation API.

Exit codes: 0 success, 1 usage error, 2 data error, 3 assertion
failure.  With ``--json``, errors are emitted as a single JSON object
on stderr instead of prose.
"""

from __future__ import annotations

import argparse
import dataclasses
import itertools
import json
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from .core import TRAINED_LABELS, BehaviorLabel
from .errors import ReadgazeError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_ASSERT = 3

#: Label values accepted anywhere a behavior name is expected.
LABEL_VALUES = tuple(label.value for label in BehaviorLabel)


def _formatter(prog: str) -> argparse.HelpFormatter:
    # Fixed wrap width keeps --help output identical across terminals.
    return argparse.HelpFormatter(prog, width=79)


#: The argv currently being parsed; lets usage errors honor --json even
#: though parsing never got far enough to read the flag.
_current_argv: "list[str]" = []


class _Parser(argparse.ArgumentParser):
    """Argument parser that exits 1 on usage errors (argparse exits 2)."""

    def error(self, message: str) -> "None":  # type: ignore[override]
        if "--json" in (_current_argv or sys.argv):
            sys.stderr.write(json.dumps({"error": "usage", "detail": message}) + "\n")
        else:
            self.print_usage(sys.stderr)
            sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _fail(args: argparse.Namespace, exc: BaseException) -> None:
    if getattr(args, "json", False):
        payload = {"error": type(exc).__name__, "detail": str(exc)}
        sys.stderr.write(json.dumps(payload, sort_keys=True) + "\n")
    else:
        sys.stderr.write(f"error: {exc}\n")


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _session_from_dir(session_dir: str):
    """Load one session directory (raw triple + optional segments)."""
    from .ingest import Condition, load_bundle
    from .core import Segment
    from .synth import SyntheticSession

    d = Path(session_dir)
    if not d.is_dir():
        raise FileNotFoundError(f"not a session directory: {d}")
    participant, condition = d.name, Condition.INSTRUCTED
    record_path = d / "record.json"
    if record_path.is_file():
        with open(record_path, encoding="utf-8") as f:
            record = json.load(f)
        participant = record.get("participant_id", participant)
        condition = Condition(record.get("condition", condition.value))
    bundle = load_bundle(
        d / "gaze.jsonl",
        d / "viewport.jsonl",
        d / "layout.json",
        session_id=d.name,
        participant_id=participant,
        condition=condition,
    )
    segments: tuple = ()
    seg_path = d / "segments.json"
    if seg_path.is_file():
        with open(seg_path, encoding="utf-8") as f:
            raw = json.load(f)
        rows = raw["segments"] if isinstance(raw, dict) else raw
        segments = tuple(
            sorted((Segment.from_dict(r) for r in rows), key=lambda s: s.start_ms)
        )
    return SyntheticSession(bundle=bundle, segments=segments)


def _analyzed_corpus(corpus_dir: str):
    from .evaluate import analyze_corpus
    from .synth import read_corpus

    return analyze_corpus(read_corpus(corpus_dir))


def _analyzed_session(session_dir: str):
    from .evaluate import analyze_corpus

    return analyze_corpus([_session_from_dir(session_dir)])[0]


# ---------------------------------------------------------------------------
# Subcommand handlers
# ---------------------------------------------------------------------------


def cmd_ingest(args: argparse.Namespace) -> int:
    from .store import SessionStore

    store = SessionStore(Path(args.out))
    try:
        record = store.create_session(
            Path(args.gaze).read_bytes(),
            Path(args.viewport).read_bytes(),
            Path(args.layout).read_bytes(),
            session_id=args.session_id,
            participant_id=args.participant,
            condition=args.condition,
        )
        store.wait_ready(record.session_id)
        record = store.record(record.session_id)
    finally:
        store.close()
    sys.stdout.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")
    return EXIT_OK


def cmd_fixations(args: argparse.Namespace) -> int:
    from .ingest import project_stream
    from .oculomotor import FilterConfig, derive_saccades, detect_fixations

    session = _session_from_dir(args.session)
    cfg = FilterConfig(
        dispersion_threshold=args.dispersion, min_duration_ms=args.min_dur
    )
    fixations = detect_fixations(project_stream(session.bundle), cfg)
    saccades = derive_saccades(fixations, session.bundle.layout)
    out_dir = Path(args.out_dir or args.session)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "fixations.jsonl", "w", encoding="utf-8") as f:
        for fx in fixations:
            f.write(json.dumps(fx.to_dict(), sort_keys=True) + "\n")
    with open(out_dir / "saccades.jsonl", "w", encoding="utf-8") as f:
        for sc in saccades:
            f.write(json.dumps(sc.to_dict(), sort_keys=True) + "\n")
    sys.stdout.write(
        f"{len(fixations)} fixations, {len(saccades)} saccades -> {out_dir}\n"
    )
    return EXIT_OK


def cmd_features(args: argparse.Namespace) -> int:
    from .metrics import FEATURE_NAMES, window_features
    from .windows import slide_time_windows

    session = _analyzed_session(args.session)
    windows = slide_time_windows(
        session.segments, session.duration_ms, args.window, args.stride
    )
    lines = ["\t".join(("t0_ms", "t1_ms", "label") + FEATURE_NAMES)]
    for w in windows:
        vec = window_features(
            session.fixations, session.saccades, session.layout, w.t0_ms, w.t1_ms
        )
        label = w.label.value if w.label is not None else ""
        cells = [f"{w.t0_ms:.0f}", f"{w.t1_ms:.0f}", label]
        cells += [f"{v:.6g}" for v in vec.to_array()]
        lines.append("\t".join(cells))
    _emit("\n".join(lines), args.out)
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    from .synth import generate_corpus, write_corpus

    corpus = generate_corpus(args.participants, seed=args.seed)
    write_corpus(corpus, args.out)
    sys.stdout.write(f"{len(corpus)} sessions -> {args.out}\n")
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    if args.model == "rules":
        from .baseline import RegionRules

        out = args.out or "rules.json"
        _emit(json.dumps(RegionRules().to_dict(), sort_keys=True), out)
        sys.stdout.write(f"rules (fixed thresholds, nothing fitted) -> {out}\n")
        return EXIT_OK

    sessions = _analyzed_corpus(args.corpus)
    if args.model == "softmax":
        import numpy as np

        from .baseline import train_softmax
        from .evaluate import session_time_features

        mats, labels = [], []
        for s in sessions:
            x, y = session_time_features(s, t_s=args.window).training_rows()
            if len(y):
                mats.append(x)
                labels.extend(y)
        if not labels:
            raise ValueError("no labeled training windows in the corpus")
        model, history = train_softmax(np.vstack(mats), labels)
        out = args.out or "softmax.json"
        model.save(out)
        sys.stdout.write(f"{len(labels)} windows, {len(history)} epochs -> {out}\n")
        return EXIT_OK

    from .cnn import TrainConfig, history_table, save_checkpoint, train, train_1d
    from .evaluate import balance_examples, training_windows

    examples = balance_examples(
        [w for s in sessions for w in training_windows(s)]
    )
    cfg = TrainConfig(seed=args.seed)
    fit = train if args.model == "cnn2d" else train_1d
    params, history = fit(examples, cfg, args.val)
    out = args.out or f"{args.model}.rgzc"
    save_checkpoint(params, out)
    Path(out).with_suffix(".history.tsv").write_text(
        history_table(history), encoding="utf-8"
    )
    sys.stdout.write(
        f"{len(examples)} windows, {len(history)} epochs,"
        f" best val loss {min(h['val_loss'] for h in history):.4f} -> {out}\n"
    )
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    from .evaluate import MODEL_ROWS, model_comparison

    sessions = _analyzed_corpus(args.corpus)
    models = tuple(args.models) if args.models else MODEL_ROWS
    report = model_comparison(
        sessions, seed=args.seed, n_jobs=args.threads, models=models
    )
    if args.out:
        Path(args.out).write_text(
            json.dumps(report.to_dict(), sort_keys=True), encoding="utf-8"
        )
    sys.stdout.write(report.format_table() + "\n")
    if not args.assert_ordering:
        return EXIT_OK
    needed = ("cnn2d", "softmax_t15", "majority")
    missing = [m for m in needed if m not in report.rows]
    if missing:
        raise ValueError(f"--assert needs model rows {needed}; missing {missing}")
    scores = {m: report.rows[m].macro_f1 for m in needed}
    ok = scores["cnn2d"] > scores["softmax_t15"] >= scores["majority"]
    verdict = "holds" if ok else "violated"
    sys.stdout.write(
        f"ordering cnn2d > softmax_t15 >= majority {verdict}:"
        f" {scores['cnn2d']:.3f} vs {scores['softmax_t15']:.3f}"
        f" vs {scores['majority']:.3f}\n"
    )
    return EXIT_OK if ok else EXIT_ASSERT


def _label_groups(sessions, wanted: "Optional[set]" = None) -> dict:
    import numpy as np

    from .metrics import segment_features

    rows: dict = {}
    for s in sessions:
        for seg in s.segments:
            if seg.label_final is None:
                continue
            name = seg.label_final.value
            if wanted is not None and name not in wanted:
                continue
            vec, _ = segment_features(seg, s.fixations, s.saccades, s.layout)
            rows.setdefault(name, []).append(vec.to_array())
    return {name: np.vstack(mat) for name, mat in rows.items()}


def _parse_pairs(spec: str) -> "list[tuple[str, str]]":
    pairs = []
    for chunk in spec.split(","):
        a, sep, b = chunk.partition(":")
        if not sep or not a or not b:
            raise ValueError(f"bad label pair {chunk!r}; expected LABEL:LABEL")
        for name in (a, b):
            if name not in LABEL_VALUES:
                raise ValueError(f"unknown label {name!r}; one of {LABEL_VALUES}")
        pairs.append((a, b))
    return pairs


def cmd_stats(args: argparse.Namespace) -> int:
    from dataclasses import replace

    from .metrics import FEATURE_NAMES
    from .stats import (
        bonferroni,
        format_pairwise_matrix,
        hotelling_t2,
        mann_whitney_u,
        pairwise_hotelling,
        t_test_ind,
    )

    sessions = _analyzed_corpus(args.corpus)
    pairs = _parse_pairs(args.by) if args.by else None
    wanted = {name for pair in pairs for name in pair} if pairs else None
    groups = _label_groups(sessions, wanted)
    if pairs is None:
        present = [v for v in LABEL_VALUES if v in groups]
        pairs = list(itertools.combinations(present, 2))
    for a, b in pairs:
        for name in (a, b):
            if name not in groups:
                raise ValueError(f"no finally-labeled segments for {name!r}")

    if args.test == "hotelling" and args.by is None:
        matrix = pairwise_hotelling({name: groups[name] for name in present})
        _emit(format_pairwise_matrix(matrix), args.out)
        return EXIT_OK

    column = FEATURE_NAMES.index(args.feature)
    lines = ["\t".join(("pair", "n1", "n2", "statistic", "p_value", "p_adjusted"))]
    for a, b in pairs:
        if args.test == "hotelling":
            res = hotelling_t2(groups[a], groups[b])
        elif args.test == "ttest":
            res = t_test_ind(groups[a][:, column], groups[b][:, column])
        else:
            res = mann_whitney_u(groups[a][:, column], groups[b][:, column])
        res = replace(res, p_adjusted=bonferroni(res.p_value, len(pairs)))
        lines.append(
            f"{a} vs {b}\t{res.n1}\t{res.n2}\t{res.statistic:.6g}"
            f"\t{res.p_value:.4g}\t{res.p_adjusted:.4g}"
        )
    _emit("\n".join(lines), args.out)
    return EXIT_OK


def cmd_irr(args: argparse.Namespace) -> int:
    from .stats import cohens_kappa

    session = _session_from_dir(args.session)
    dual = [
        seg
        for seg in session.segments
        if seg.label_r1 is not None and seg.label_r2 is not None
    ]
    if not dual:
        raise ValueError("no segments carry both reviewer labels")
    kappa = cohens_kappa(
        [seg.label_r1.value for seg in dual], [seg.label_r2.value for seg in dual]
    )
    lines = [f"kappa {kappa:.4f} over {len(dual)} dual-labeled segments"]
    for seg in dual:
        if seg.label_r1 != seg.label_r2:
            lines.append(
                f"disagreement [{seg.start_ms:.0f}, {seg.end_ms:.0f}):"
                f" r1={seg.label_r1.value} r2={seg.label_r2.value}"
            )
    _emit("\n".join(lines), args.out)
    return EXIT_OK


def cmd_render(args: argparse.Namespace) -> int:
    from .render import RenderConfig, encode_png, render_session

    session = _analyzed_session(args.session)
    t0 = args.t_from if args.t_from is not None else 0.0
    t1 = args.t_to if args.t_to is not None else session.duration_ms
    keep = [f for f in session.fixations if t0 <= f.mid_ms < t1]
    config = RenderConfig(
        width_px=args.width, height_px=args.height, draw_word_boxes=args.boxes
    )
    image = render_session(keep, session.layout, config, session.session_id)
    Path(args.out).write_bytes(encode_png(image.pixels))
    sys.stdout.write(
        f"{len(keep)} fixations -> {args.out} ({args.width}x{args.height})\n"
    )
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app
    from .store import SessionStore

    store = SessionStore(Path(args.data))
    try:
        uvicorn.run(
            create_app(store), host=args.host, port=args.port, log_level="warning"
        )
    finally:
        store.close()
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> _Parser:
    common = _Parser(add_help=False)
    common.add_argument(
        "--seed", type=int, default=0, help="seed for all randomness (default 0)"
    )
    common.add_argument(
        "--threads",
        type=int,
        default=None,
        metavar="N",
        help="cap worker pools at N threads (default: all logical cores)",
    )
    common.add_argument(
        "--json",
        action="store_true",
        help="emit errors as a JSON object on stderr",
    )

    parser = _Parser(
        prog="readgaze",
        description="Reading-behavior analytics over page-anchored gaze logs.",
        formatter_class=_formatter,
    )
    sub = parser.add_subparsers(
        dest="command", required=True, metavar="COMMAND", parser_class=_Parser
    )

    def command(name: str, handler, help_text: str) -> _Parser:
        p = sub.add_parser(
            name,
            parents=[common],
            help=help_text,
            description=help_text,
            formatter_class=_formatter,
        )
        p.set_defaults(func=handler)
        return p

    p = command("ingest", cmd_ingest, "store one raw session in a data directory")
    p.add_argument("--gaze", required=True, metavar="F", help="gaze sample log")
    p.add_argument("--viewport", required=True, metavar="F", help="viewport rect log")
    p.add_argument("--layout", required=True, metavar="F", help="word layout JSON")
    p.add_argument("--out", required=True, metavar="DIR", help="data directory")
    p.add_argument("--session-id", default=None, help="session id (default: next free)")
    p.add_argument("--participant", default=None, help="participant id")
    p.add_argument(
        "--condition",
        default="instructed",
        choices=("instructed", "in-the-wild"),
        help="recording condition",
    )

    p = command("fixations", cmd_fixations, "detect fixation and saccade events")
    p.add_argument("session", metavar="SESSION", help="session directory")
    p.add_argument(
        "--dispersion",
        type=float,
        default=0.01,
        help="dispersion threshold in page units (default 0.01)",
    )
    p.add_argument(
        "--min-dur",
        type=float,
        default=80.0,
        help="minimum fixation duration in ms (default 80)",
    )
    p.add_argument(
        "--out-dir", default=None, metavar="DIR", help="where to write event files"
    )

    p = command("features", cmd_features, "compute sliding-window feature table")
    p.add_argument("session", metavar="SESSION", help="session directory")
    p.add_argument(
        "--window", type=float, default=15.0, help="window length in s (default 15)"
    )
    p.add_argument(
        "--stride", type=float, default=1.0, help="window stride in s (default 1)"
    )
    p.add_argument("--out", default=None, metavar="F", help="output file (default stdout)")

    p = command("synth", cmd_synth, "generate a labeled synthetic corpus")
    p.add_argument(
        "--participants", type=int, default=27, help="participant count (default 27)"
    )
    p.add_argument("--out", required=True, metavar="DIR", help="corpus directory")

    p = command("train", cmd_train, "fit a classifier and write its checkpoint")
    p.add_argument(
        "--model",
        required=True,
        choices=("rules", "softmax", "cnn1d", "cnn2d"),
        help="classifier to fit",
    )
    p.add_argument("--corpus", metavar="DIR", help="corpus directory")
    p.add_argument("--out", default=None, metavar="F", help="checkpoint path")
    p.add_argument(
        "--window",
        type=float,
        default=15.0,
        help="softmax time-window length in s (default 15)",
    )
    p.add_argument(
        "--val",
        default=None,
        metavar="PID",
        help="held-out validation participant (default: last)",
    )

    p = command("eval", cmd_eval, "leave-one-participant-out model comparison")
    p.add_argument("--corpus", required=True, metavar="DIR", help="corpus directory")
    p.add_argument(
        "--models",
        nargs="+",
        default=None,
        choices=("random", "majority", "softmax_t15", "cnn1d", "cnn2d"),
        metavar="M",
        help="model rows to evaluate (default: all)",
    )
    p.add_argument(
        "--assert",
        dest="assert_ordering",
        action="store_true",
        help="exit 3 unless cnn2d > softmax_t15 >= majority on macro F1",
    )
    p.add_argument("--out", default=None, metavar="F", help="also write JSON report")

    p = command("stats", cmd_stats, "behavior-pair statistical tests")
    p.add_argument("--corpus", required=True, metavar="DIR", help="corpus directory")
    p.add_argument(
        "--test",
        required=True,
        choices=("mwu", "ttest", "hotelling"),
        help="test family",
    )
    p.add_argument(
        "--by",
        default=None,
        metavar="PAIRS",
        help="comma-separated LABEL:LABEL pairs (default: all pairs)",
    )
    p.add_argument(
        "--feature",
        default="fbsr",
        help="feature column for mwu/ttest (default fbsr)",
    )
    p.add_argument("--out", default=None, metavar="F", help="output file (default stdout)")

    p = command("irr", cmd_irr, "inter-rater agreement for one session")
    p.add_argument("session", metavar="SESSION", help="session directory")
    p.add_argument("--out", default=None, metavar="F", help="output file (default stdout)")

    p = command("render", cmd_render, "rasterize a session scanplot to PNG")
    p.add_argument("session", metavar="SESSION", help="session directory")
    p.add_argument(
        "--from",
        dest="t_from",
        type=float,
        default=None,
        metavar="MS",
        help="start of time slice (default: session start)",
    )
    p.add_argument(
        "--to",
        dest="t_to",
        type=float,
        default=None,
        metavar="MS",
        help="end of time slice (default: session end)",
    )
    p.add_argument("--out", required=True, metavar="F", help="PNG path")
    p.add_argument("--width", type=int, default=480, help="raster width px (default 480)")
    p.add_argument(
        "--height", type=int, default=640, help="raster height px (default 640)"
    )
    p.add_argument(
        "--boxes", action="store_true", help="draw word boxes behind the trail"
    )

    p = command("serve", cmd_serve, "serve the annotation HTTP API")
    p.add_argument("--port", type=int, default=8000, help="TCP port (default 8000)")
    p.add_argument("--host", default="127.0.0.1", help="bind address (default 127.0.0.1)")
    p.add_argument("--data", required=True, metavar="DIR", help="data directory")

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    _current_argv[:] = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parser.parse_args(argv)
        if args.command == "train" and args.model != "rules" and not args.corpus:
            parser.error("--corpus is required unless --model rules")
    except SystemExit as exc:
        return int(exc.code or 0)
    threads = args.threads or os.cpu_count() or 1
    args.threads = threads
    try:
        import threadpoolctl

        with threadpoolctl.threadpool_limits(limits=threads):
            return int(args.func(args))
    except (ReadgazeError, OSError, ValueError, KeyError) as exc:
        _fail(args, exc)
        return EXIT_DATA


if __name__ == "__main__":
    raise SystemExit(main())
