"""``lara`` command-line interface.

Every subcommand exits 0 on success, 2 on usage errors and 1 on pipeline
errors, printing ``ErrorName: message`` to stderr. Settings come from an
optional ``--config`` file; explicit flags win.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import dataset, fusion, gradcam, ingest, metrics, rubric, svg, synth
from ._io import atomic_write_text
from .config import RunConfig, load_config
from .errors import InsufficientSignal, LaraError, RecordRejected, ShapeError
from .nn import build_model, load_weights, predict, save_weights, train
from .timeseries import SAMPLES_PER_MINUTE, window_at

log = logging.getLogger("lara")


def _ints(text):
    return tuple(int(p) for p in text.split(",") if p.strip())


def _run_config(args):
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    over = {}
    for key in (
        "epochs", "learning_rate", "batch_size", "micro_batch", "seed",
        "stage_blocks", "stage_channels", "stem_channels",
        "test_ratio", "gap_threshold_min", "max_loss",
    ):
        over[key] = getattr(args, key, None)
    return cfg.with_overrides(**over)


def load_record(path, cfg=None):
    """Canonical records are read as-is; raw ``timestamp_ms,fhr_bpm`` files are preprocessed."""
    cfg = cfg or RunConfig()
    text = Path(path).read_text(encoding="utf-8")
    first = next((ln for ln in text.splitlines() if ln.strip()), "")
    if first.startswith("#") or first.strip() == ingest.CANONICAL_HEADER:
        return ingest.loads_record(text)
    raw = ingest.parse_csv(text)
    record, gate = ingest.preprocess(raw, Path(path).stem, cfg.gap_threshold_min, cfg.max_loss)
    if not gate:
        raise RecordRejected(f"{path}: {gate.reason}")
    return record


def _write_csv(path, lines):
    text = "\n".join(lines) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        atomic_write_text(path, text)


# subcommands

def cmd_synth(args):
    out = Path(args.output)
    if args.cohort:
        n_norm, n_abn = _ints(args.cohort)
        out.mkdir(parents=True, exist_ok=True)
        cohort = synth.generate_cohort(n_norm, n_abn, args.seed, args.minutes)
        for r in cohort:
            synth.write_raw_csv(out / f"{r.record_id}.csv", r.record)
            synth.write_truth_csv(out / f"{r.record_id}.truth.csv", r.truth)
        print(f"wrote {len(cohort)} records to {out}")
        return 0
    spec = synth.cohort_spec(args.abnormal, args.seed, args.minutes, out.stem)
    record, truth = synth.generate(spec)
    synth.write_raw_csv(out, record)
    synth.write_truth_csv(out.with_suffix(".truth.csv"), truth)
    print(f"wrote {record.n_minutes} min record to {out}; expected scores {list(truth.expected_scores)}")
    return 0


def cmd_ingest(args):
    cfg = _run_config(args)
    raw = ingest.read_raw_csv(args.input)
    record, gate = ingest.preprocess(raw, args.source_id or Path(args.input).stem, cfg.gap_threshold_min, cfg.max_loss)
    if not gate:
        raise RecordRejected(gate.reason)
    ingest.write_record(args.output, record)
    removed = sum(n for _, n in record.splices)
    print(f"{record.n_minutes} min, {len(record.splices)} splices ({removed} samples removed) -> {args.output}")
    return 0


def cmd_score_rubric(args):
    record = load_record(args.input, _run_config(args))
    lines = ["segment_index,baseline,variability,n_accel,n_decel,deductions,score,label"]
    for seg in dataset.segment_record(record):
        sc = rubric.score_segment(seg)
        lines.append(
            f"{seg.index},{sc.baseline_bpm:.2f},{sc.variability_bpm:.2f},{len(sc.accelerations)},"
            f"{len(sc.decelerations)},{rubric.format_deductions(sc.deductions)},{sc.score},{sc.binary_label}"
        )
    _write_csv(args.output, lines)
    return 0


def cmd_make_dataset(args):
    cfg = _run_config(args)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    records = {}
    for path in args.inputs:
        rec = load_record(path, cfg)
        rid = rec.source_id or Path(path).stem
        pairs = []
        for seg in dataset.segment_record(rec):
            try:
                pairs.append((seg, rubric.score_segment(seg).label))
            except InsufficientSignal:
                log.warning("%s segment %d skipped: insufficient signal", rid, seg.index)
        records[rid] = pairs
    plan = dataset.stratified_split(
        [(rid, any(lbl for _, lbl in pairs)) for rid, pairs in sorted(records.items())],
        cfg.test_ratio,
        cfg.train.seed,
    )
    tr = [p for rid in sorted(plan.train_ids) for p in records[rid]]
    te = [p for rid in sorted(plan.test_ids) for p in records[rid]]
    train_frags = dataset.resample_fragments(tr)
    test_frags = dataset.test_fragments(te)
    dataset.write_fragments(out / "train", train_frags)
    dataset.write_fragments(out / "test", test_frags)
    split = ["record_id,set"] + [f"{rid},{'test' if rid in plan.test_ids else 'train'}" for rid in sorted(records)]
    atomic_write_text(out / "split.csv", "\n".join(split) + "\n")
    print(
        f"{len(plan.train_ids)} train / {len(plan.test_ids)} test records; "
        f"{len(train_frags)} train / {len(test_frags)} test fragments -> {out}"
    )
    return 0


def _fragment_stem(path):
    p = Path(path)
    return p.with_suffix("") if p.suffix in (".csv", ".bin") else p


def cmd_train(args):
    cfg = _run_config(args)
    frags = dataset.read_fragments(_fragment_stem(args.input))
    model = build_model(cfg.model, seed=cfg.train.seed)

    def progress(epoch, loss):
        print(f"epoch {epoch + 1}/{cfg.train.epochs} loss {loss:.6f}", flush=True)

    model, history = train(model, frags, cfg.train, progress)
    out = Path(args.output)
    save_weights(model, out)
    hist = ["epoch,loss"] + [f"{i + 1},{v!r}" for i, v in enumerate(history)]
    hist_path = out.with_suffix(".history.csv")
    atomic_write_text(hist_path, "\n".join(hist) + "\n")
    if args.plot:
        svg.write_svg(args.plot, svg.line_plot([("loss", np.arange(1, len(history) + 1), history)], "training loss", "epoch", "BCE"))
    print(f"weights -> {out}; history -> {hist_path}")
    return 0


def cmd_analyze(args):
    cfg = _run_config(args)
    record = load_record(args.input, cfg)
    model = load_weights(args.weights)
    wp = fusion.scan(model, record)
    profiles = fusion.risk_profiles(wp)
    fusion.write_rdm(args.output, profiles)
    if args.plot:
        t = np.arange(wp.n_minutes)
        series = [(f"{op} (RI {profiles[op].ri:.3f})", t, profiles[op].mri) for op in fusion.OPERATORS]
        svg.write_svg(args.plot, svg.line_plot(series, "risk distribution map", "minute", "mRI", (0.0, 1.0)))
    ri = " ".join(f"RI_{op}={profiles[op].ri:.6f}" for op in fusion.OPERATORS)
    print(f"{wp.n_minutes} minutes, {wp.p.size} windows; {ri}")
    return 0


def _scores_and_labels(args):
    p = Path(args.input)
    if args.weights:
        frags = dataset.read_fragments(_fragment_stem(p))
        x, y = dataset.fragments_as_arrays(frags)
        scores, _ = predict(load_weights(args.weights), x)
        return scores, y.astype(int)
    rows = [ln for ln in p.read_text(encoding="utf-8").splitlines() if ln.strip() and not ln.startswith("#")]
    if not rows or rows[0].replace(" ", "") != "score,label":
        raise ShapeError(f"{p}: expected a score,label CSV (or pass --weights with a fragment store)")
    s, y = zip(*(r.split(",") for r in rows[1:]))
    return np.array(s, dtype=float), np.array(y, dtype=int)


def cmd_eval(args):
    scores, labels = _scores_and_labels(args)
    if args.threshold is None:
        report = metrics.evaluate(scores, labels)
    else:
        report = metrics.confusion_metrics(scores, labels, args.threshold)
    print(report.format())
    if args.roc:
        metrics.write_roc_csv(args.roc, scores, labels)
    return 0


def cmd_gradcam(args):
    record = load_record(args.input, _run_config(args))
    model = load_weights(args.weights)
    w = window_at(record, args.start_minute)
    cm = gradcam.cam(model, w)
    base = args.start_minute * SAMPLES_PER_MINUTE
    lines = ["sample_index,fhr_bpm,cam"]
    lines += [f"{base + i},{v!r},{c!r}" for i, (v, c) in enumerate(zip(w.samples.tolist(), cm.values.tolist()))]
    _write_csv(args.output, lines)
    if args.plot:
        svg.write_svg(args.plot, svg.cam_trace_plot(w.samples, cm.values, f"Grad-CAM, window at minute {args.start_minute}"))
    return 0


def cmd_features(args):
    model = load_weights(args.weights)
    p = Path(args.input)
    if _is_fragment_index(_fragment_stem(p).with_suffix(".csv")):
        frags = dataset.read_fragments(_fragment_stem(p))
        x, _ = dataset.fragments_as_arrays(frags)
        ids = [f"{f.record_id},{f.segment_index},{f.start_offset},{f.label}" for f in frags]
        head = "record_id,segment_index,start_offset,label"
    else:
        record = load_record(p, _run_config(args))
        starts = range(record.n_minutes - 9)
        x = np.stack([window_at(record, s).samples for s in starts])
        ids = [f"{record.source_id},{s}" for s in starts]
        head = "record_id,start_minute"
    _, feats = predict(model, x)
    lines = [head + "," + ",".join(f"f{i}" for i in range(feats.shape[1]))]
    lines += [i + "," + ",".join(f"{v:.8g}" for v in row) for i, row in zip(ids, feats)]
    _write_csv(args.output, lines)
    return 0


def _is_fragment_index(p):
    if not p.is_file():
        return False
    with open(p, encoding="utf-8") as fh:
        return fh.readline().strip() == dataset.FRAGMENT_HEADER


# parser

def _common(p, model=False, training=False):
    p.add_argument("--config", help="key = value settings file")
    p.add_argument("--gap-threshold-min", type=float, help="excise invalid runs longer than this (minutes)")
    p.add_argument("--max-loss", type=float, help="reject records losing more than this fraction")
    if model:
        p.add_argument("--stage-blocks", type=_ints)
        p.add_argument("--stage-channels", type=_ints)
        p.add_argument("--stem-channels", type=int)
    if training:
        p.add_argument("--epochs", type=int)
        p.add_argument("--learning-rate", type=float)
        p.add_argument("--batch-size", type=int)
        p.add_argument("--micro-batch", type=int)


def build_parser():
    ap = argparse.ArgumentParser(prog="lara", description="Long-term antepartum FHR risk analysis.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("synth", help="generate synthetic records")
    p.add_argument("output", help="record CSV, or a directory with --cohort")
    p.add_argument("--minutes", type=float, default=60.0)
    p.add_argument("--abnormal", action="store_true")
    p.add_argument("--cohort", help="N_NORMAL,N_ABNORMAL records into a directory")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="raw CSV to canonical record")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--source-id")
    _common(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("score-rubric", help="score 20-minute segments")
    p.add_argument("input")
    p.add_argument("-o", "--output")
    _common(p)
    p.set_defaults(func=cmd_score_rubric)

    p = sub.add_parser("make-dataset", help="segment, label, split and resample records")
    p.add_argument("inputs", nargs="+")
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.add_argument("--test-ratio", type=float)
    p.add_argument("--seed", type=int)
    _common(p)
    p.set_defaults(func=cmd_make_dataset)

    p = sub.add_parser("train", help="train the network on a fragment store")
    p.add_argument("input", help="fragment store stem (e.g. data/train)")
    p.add_argument("-o", "--output", required=True, help="weight file")
    p.add_argument("--seed", type=int)
    p.add_argument("--plot", help="loss curve SVG")
    _common(p, model=True, training=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("analyze", help="scan a long record and write its RDM")
    p.add_argument("input")
    p.add_argument("--weights", required=True)
    p.add_argument("-o", "--output", required=True, help="RDM CSV")
    p.add_argument("--plot", help="RDM SVG")
    _common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("eval", help="ROC AUC and confusion metrics")
    p.add_argument("input", help="score,label CSV, or a fragment store with --weights")
    p.add_argument("--weights")
    p.add_argument("--threshold", type=float, help="fixed threshold instead of Youden-optimal")
    p.add_argument("--roc", help="write ROC points CSV")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcam", help="cam map for one window")
    p.add_argument("input")
    p.add_argument("--weights", required=True)
    p.add_argument("--start-minute", type=int, default=0)
    p.add_argument("-o", "--output")
    p.add_argument("--plot", help="cam-colored trace SVG")
    _common(p)
    p.set_defaults(func=cmd_gradcam)

    p = sub.add_parser("features", help="1024-d deep features as CSV")
    p.add_argument("input", help="fragment store or record")
    p.add_argument("--weights", required=True)
    p.add_argument("-o", "--output")
    _common(p)
    p.set_defaults(func=cmd_features)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (LaraError, OSError) as err:
        print(f"{type(err).__name__}: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
