"""Command-line entry point and reproducible experiment manifests.

Manifests are flat ``key = value`` text files (``#`` starts a comment).  Every
manifest key is also a ``train`` flag (``bptt_extent`` -> ``--bptt-extent``)
and flags win over the file.  All randomness derives from the single
``seed`` key: ``numpy.random.SeedSequence(seed).spawn(3)`` yields, in order,
the weight-initialization, data-generation and gap-shortening streams.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import baseline, checkpoint, data, explore, metrics
from .netcore import NetworkConfig, forward_step, init_network
from .train import NumericalError, TrainingSchedule, train_series

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class ManifestError(data.DataError):
    pass


# -- manifests ------------------------------------------------------------------


@dataclass
class ExperimentManifest:
    # network
    n_inputs: int = 1
    n_visible: int = 2
    n_hidden_layers: int = 1
    hidden_width: int = 8
    n_outputs: int = 1
    bptt_extent: int = 1
    activation: str = "tanh"
    output_activation: str = ""
    weight_mode: str = "shared"
    init_halfwidth: float = 0.5
    # schedule
    eta: float = 0.05
    horizon_q: int = 1
    epochs: int = 1
    freeze_after: int = -1
    convergence_tol: float = 1e-4
    recompute: bool = True
    clip_norm: float = 0.0
    # data: sine | mackey | series | synthetic_eeg | recording
    source: str = "sine"
    n: int = 8192
    period: float = 32.0
    amplitude: float = 0.5
    noise_sigma: float = 0.0
    series: str = ""
    scale: float = 1.0
    offset: float = 0.0
    recording: str = ""
    annotations: str = ""
    sample_rate: float = 200.0
    n_seizures: int = 5
    gap_len: int = 14400
    seizure_len: int = 800
    mean_keep: int = 0
    keep_sd: float = 1.0
    window_len: int = 1
    train_seizures: int = 3
    train_margin: int = 0
    threshold: float = 0.0
    # run
    seed: int = 0
    output_dir: str = "run"

    def network_config(self) -> NetworkConfig:
        return NetworkConfig(
            n_inputs=self.n_inputs, n_visible=self.n_visible,
            n_hidden_layers=self.n_hidden_layers, hidden_width=self.hidden_width,
            n_outputs=self.n_outputs, bptt_extent=self.bptt_extent,
            activation=self.activation, output_activation=self.output_activation or None,
            weight_mode=self.weight_mode)

    def schedule(self, freeze_after: int | None = None) -> TrainingSchedule:
        if freeze_after is None and self.freeze_after >= 0:
            freeze_after = self.freeze_after
        return TrainingSchedule(
            eta=self.eta, horizon_q=self.horizon_q, epochs=self.epochs,
            freeze_after=freeze_after, convergence_tol=self.convergence_tol,
            recompute=self.recompute, clip_norm=self.clip_norm or None)

    def seeds(self) -> dict[str, int]:
        streams = np.random.SeedSequence(self.seed).spawn(3)
        names = ("init", "data", "gaps")
        return {name: int(s.generate_state(1)[0]) for name, s in zip(names, streams)}

    def dumps(self) -> str:
        return "".join(f"{f.name} = {_format_value(getattr(self, f.name))}\n"
                       for f in fields(self))


MANIFEST_FIELDS = {f.name: f for f in fields(ExperimentManifest)}


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    return repr(value) if isinstance(value, float) else str(value)


def _coerce(key: str, text: str):
    kind = MANIFEST_FIELDS[key].type
    text = text.strip()
    try:
        if kind == "bool":
            if text.lower() in ("1", "true", "yes", "on"):
                return True
            if text.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
    except ValueError:
        raise ManifestError(f"{key}: cannot read {text!r} as {kind}") from None
    return text


def parse_manifest(text: str, origin: str = "<manifest>") -> dict:
    values = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep:
            raise ManifestError(f"{origin}:{line_no}: expected 'key = value'")
        if key not in MANIFEST_FIELDS:
            raise ManifestError(f"{origin}:{line_no}: unknown key {key!r}")
        values[key] = _coerce(key, value)
    return values


def load_manifest(path, overrides: dict | None = None) -> ExperimentManifest:
    values = parse_manifest(Path(path).read_text(), str(path)) if path else {}
    values.update(overrides or {})
    return ExperimentManifest(**values)


# -- experiments ------------------------------------------------------------------


@dataclass
class DetectionResult:
    counts: metrics.ConfusionCounts
    scores: metrics.DetectionScores
    report: object
    test_start: int


def detection_inputs(rec: data.LabeledRecording, window_len: int, horizon: int,
                     train_seizures: int, margin: int = 0):
    """Standardize on the training range and build the supervised series.

    Returns (series, freeze_after): updates use only labels that fall inside
    the training range.
    """
    (_, train_end), _ = data.split_by_seizures(rec, train_seizures, margin)
    rec, _, _ = data.standardize(rec, (0, train_end))
    series = data.make_supervised(rec, window_len=window_len, horizon=horizon)
    freeze_after = max(0, train_end - (window_len - 1) - horizon)
    return series, freeze_after


def run_detection(rec: data.LabeledRecording, config: NetworkConfig, schedule: TrainingSchedule,
                  window_len: int = 1, train_seizures: int = 3, init_seed: int = 0,
                  init_halfwidth: float = 0.5, threshold: float = 0.0, margin: int = 0,
                  state=None) -> DetectionResult:
    """Train online through the first ``train_seizures`` seizures, then
    predict the rest with frozen weights and score it."""
    q = schedule.horizon_q
    series, freeze_after = detection_inputs(rec, window_len, q, train_seizures, margin)
    if state is None:
        state = init_network(config, init_seed, init_halfwidth)
    labels = series.label_sequence()
    for _ in range(schedule.epochs - 1):
        train_series(state, series.inputs[:freeze_after], labels[:freeze_after + q],
                     replace(schedule, epochs=1, freeze_after=None))
    report = train_series(state, series.inputs, labels,
                          replace(schedule, epochs=1, freeze_after=freeze_after))
    pred, lab = report.scored(freeze_after)
    counts = metrics.confusion(pred, lab, threshold)
    return DetectionResult(counts, metrics.scores(counts), report, freeze_after)


def manifest_series(m: ExperimentManifest) -> np.ndarray:
    seeds = m.seeds()
    if m.source == "sine":
        x = data.gen_sine(m.n + m.horizon_q, m.period, m.amplitude)
    elif m.source == "mackey":
        x = data.gen_mackey_glass(m.n + m.horizon_q)
    elif m.source == "series":
        if not m.series:
            raise ManifestError("source = series needs 'series = <path>'")
        x = data.read_series(m.series)
    else:
        raise ManifestError(f"unknown series source {m.source!r}")
    x = data.add_gaussian_noise(x, m.noise_sigma, seeds["data"])
    return (x - m.offset) * m.scale


def manifest_recording(m: ExperimentManifest) -> data.LabeledRecording:
    seeds = m.seeds()
    if m.source == "synthetic_eeg":
        rec = data.gen_synthetic_eeg(n_seizures=m.n_seizures, gap_len=m.gap_len,
                                     seizure_len=m.seizure_len, n_channels=m.n_inputs,
                                     sample_rate=m.sample_rate, seed=seeds["data"])
    elif m.source == "recording":
        if not (m.recording and m.annotations):
            raise ManifestError("source = recording needs 'recording' and 'annotations' paths")
        rec = data.load_recording(m.recording, m.annotations, m.sample_rate)
    else:
        raise ManifestError(f"unknown recording source {m.source!r}")
    if m.mean_keep > 0:
        rec = data.shorten_gaps(rec, m.mean_keep, m.keep_sd, seeds["gaps"])
    return rec


def run_manifest(m: ExperimentManifest) -> dict:
    """Run one experiment and write its artifacts into ``m.output_dir``."""
    out = Path(m.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    config = m.network_config()
    seeds = m.seeds()
    state = init_network(config, seeds["init"], m.init_halfwidth)
    summary = {}
    if m.source in ("synthetic_eeg", "recording"):
        rec = manifest_recording(m)
        if rec.n_channels * m.window_len != m.n_inputs:
            raise ManifestError(f"n_inputs = {m.n_inputs} but the recording gives "
                                f"{rec.n_channels} channels x window {m.window_len}")
        result = run_detection(rec, config, m.schedule(), m.window_len, m.train_seizures,
                               threshold=m.threshold, margin=m.train_margin, state=state)
        report = result.report
        metrics.write_report([(rec.source_id, result.counts)], out / "metrics.csv")
        summary.update(sen=float(result.scores.sen), spc=float(result.scores.spc),
                       adr=float(result.scores.adr))
    else:
        x = manifest_series(m)
        n = min(m.n, x.shape[0])
        labels = [np.array([v]) for v in x[:n + m.horizon_q]]
        report = train_series(state, x[:n, None], labels, m.schedule())
        start = m.freeze_after if m.freeze_after >= 0 else 0
        summary["mse"] = report.mse(start)
    checkpoint.save(state, out / "checkpoint.drnn")
    report.to_csv(out / "report.csv")
    (out / "manifest.cfg").write_text(m.dumps())
    return summary


# -- argument parsing -------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _add_manifest_flags(p: argparse.ArgumentParser) -> None:
    group = p.add_argument_group("manifest overrides (same names as manifest keys)")
    for name, f in MANIFEST_FIELDS.items():
        flag = "--" + name.replace("_", "-")
        group.add_argument(flag, dest=f"set_{name}", metavar=f.type.upper(), default=None,
                           help=f"override '{name}' (default {_format_value(f.default)})")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="drnn", description="Deep recurrent network training and evaluation.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    gen = sub.add_parser("generate", help="write a synthetic series as index,value CSV")
    gsub = gen.add_subparsers(dest="kind", required=True, parser_class=_Parser)
    sine = gsub.add_parser("sine", help="amplitude * sin(2 pi k / period + phase)")
    sine.add_argument("--n", type=int, required=True, help="number of samples")
    sine.add_argument("--period", type=float, required=True, help="period in samples (>= 2)")
    sine.add_argument("--amplitude", type=float, default=1.0, help="peak amplitude")
    sine.add_argument("--phase", type=float, default=0.0, help="phase in radians")
    mg = gsub.add_parser("mackey", help="Euler-integrated Mackey-Glass delay equation")
    mg.add_argument("--n", type=int, required=True, help="number of samples")
    mg.add_argument("--tau", type=float, default=17.0, help="delay")
    mg.add_argument("--beta", type=float, default=0.2, help="production rate")
    mg.add_argument("--gamma", type=float, default=0.1, help="decay rate")
    mg.add_argument("--exponent", type=float, default=10.0, help="nonlinearity exponent")
    mg.add_argument("--dt", type=float, default=1.0, help="Euler step")
    mg.add_argument("--x0", type=float, default=1.2, help="initial value and history")
    mg.add_argument("--subsample", type=int, default=1, help="keep every n-th Euler step")
    noise = gsub.add_parser("noise", help="add Gaussian noise to a series (or to zeros)")
    noise.add_argument("--sigma", type=float, required=True, help="noise standard deviation")
    noise.add_argument("--input", help="series CSV to corrupt (default: zeros)")
    noise.add_argument("--n", type=int, help="length when no input is given")
    noise.add_argument("--seed", type=int, default=0, help="noise seed")
    for p in (sine, mg, noise):
        p.add_argument("--out", required=True, help="output CSV path")

    train = sub.add_parser("train", help="run an experiment manifest")
    train.add_argument("--manifest", help="flat key = value manifest file")
    train.add_argument("--print-manifest", action="store_true",
                       help="print the resolved manifest and exit")
    _add_manifest_flags(train)

    pred = sub.add_parser("predict", help="run a checkpoint over a series without training")
    pred.add_argument("--checkpoint", required=True, help="checkpoint file")
    pred.add_argument("--series", required=True, help="input series CSV (index,value)")
    pred.add_argument("--scale", type=float, default=1.0, help="input scale, applied after offset")
    pred.add_argument("--offset", type=float, default=0.0, help="input offset")
    pred.add_argument("--out", required=True, help="output CSV (instant,prediction)")

    ev = sub.add_parser("evaluate", help="sensitivity, specificity and ADR")
    src = ev.add_mutually_exclusive_group(required=True)
    src.add_argument("--counts", help="CSV with experiment,Y+,N-,N+,Y- columns")
    src.add_argument("--predictions", help="training report CSV with prediction,label columns")
    ev.add_argument("--threshold", type=float, default=0.0, help="positive iff value >= threshold")
    ev.add_argument("--start", type=int, default=0, help="first report instant to score")
    ev.add_argument("--report", help="also write a metrics CSV here")

    ex = sub.add_parser("explore", help="error surface of the 7-weight network over a grid")
    ex.add_argument("--target", help="target series CSV (default: built-in sine)")
    ex.add_argument("--period", type=float, default=32.0, help="period of the built-in sine")
    ex.add_argument("--amplitude", type=float, default=0.5, help="amplitude of the built-in sine")
    ex.add_argument("--eval-length", type=int, default=1024, help="instants per grid point")
    ex.add_argument("--visible", type=int, default=2, help="values per visible weight")
    ex.add_argument("--hidden", type=int, default=4, help="values per hidden weight")
    ex.add_argument("--output", type=int, default=32, help="values per output weight")
    ex.add_argument("--low", type=float, default=-2.0, help="lower end of the value range")
    ex.add_argument("--high", type=float, default=2.0, help="upper end (excluded)")
    ex.add_argument("--workers", type=int, default=1, help="worker processes")
    ex.add_argument("--out-dir", required=True, help="directory for the CSV exports")

    bl = sub.add_parser("baseline", help="closed-form and feature baselines")
    bsub = bl.add_subparsers(dest="kind", required=True, parser_class=_Parser)
    ridge = bsub.add_parser("ridge", help="solve (U^T U + lambda I) w = U^T z")
    ridge.add_argument("--design", required=True, help="CSV matrix U, one row per sample")
    ridge.add_argument("--target", required=True, help="series CSV z")
    ridge.add_argument("--lam", type=float, default=0.0, help="ridge penalty lambda >= 0")
    ridge.add_argument("--out", required=True, help="weights CSV (index,value)")
    feats = bsub.add_parser("features", help="energy, RMS, coastline, Hjorth variance per window")
    feats.add_argument("--series", required=True, help="series CSV")
    feats.add_argument("--window", type=int, required=True, help="window length")
    feats.add_argument("--stride", type=int, help="window stride (default: window)")
    feats.add_argument("--out", required=True, help="features CSV")
    return parser


# -- subcommands --------------------------------------------------------------------------


def _cmd_generate(args) -> int:
    if args.kind == "sine":
        x = data.gen_sine(args.n, args.period, args.amplitude, args.phase)
    elif args.kind == "mackey":
        x = data.gen_mackey_glass(args.n, args.tau, args.beta, args.gamma, args.exponent,
                                  args.dt, args.x0, args.subsample)
    else:
        if args.input:
            base = data.read_series(args.input)
        elif args.n is not None:
            base = np.zeros(args.n)
        else:
            raise UsageError("generate noise: give --input or --n")
        x = data.add_gaussian_noise(base, args.sigma, args.seed)
    data.write_series(args.out, x)
    return EXIT_OK


def _cmd_train(args) -> int:
    overrides = {name: _coerce(name, getattr(args, f"set_{name}"))
                 for name in MANIFEST_FIELDS if getattr(args, f"set_{name}") is not None}
    m = load_manifest(args.manifest, overrides)
    if args.print_manifest:
        sys.stdout.write(m.dumps())
        return EXIT_OK
    summary = run_manifest(m)
    for key, value in summary.items():
        print(f"{key} = {value:.6f}")
    return EXIT_OK


def _cmd_predict(args) -> int:
    state = checkpoint.load(args.checkpoint)
    if state.config.n_inputs != 1:
        raise data.DataError("predict reads a univariate series; checkpoint expects "
                             f"{state.config.n_inputs} inputs")
    x = (data.read_series(args.series) - args.offset) * args.scale
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["instant", "prediction"])
        for k, v in enumerate(x):
            y = forward_step(state, [v])
            writer.writerow([k, ";".join(repr(float(c)) for c in y)])
    return EXIT_OK


def _read_report(path, start: int):
    pred, lab = [], []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if not {"prediction", "label"} <= set(reader.fieldnames or []):
            raise data.DataError(f"{path}: needs prediction and label columns")
        for line_no, row in enumerate(reader, start=2):
            if not row["label"] or int(row.get("instant", line_no - 2)) < start:
                continue
            try:
                pred.append(float(row["prediction"]))
                lab.append(float(row["label"]))
            except ValueError:
                raise data.DataError(f"{path}:{line_no}: non-numeric value") from None
    return np.array(pred), np.array(lab)


def _cmd_evaluate(args) -> int:
    if args.counts:
        try:
            rows = metrics.read_counts(args.counts)
        except ValueError as exc:
            raise data.DataError(str(exc)) from exc
    else:
        pred, lab = _read_report(args.predictions, args.start)
        rows = [(Path(args.predictions).stem, metrics.confusion(pred, lab, args.threshold))]
    for name, counts in rows:
        s = metrics.scores(counts)
        print(f"{name}: SEN={float(s.sen):.6f} SPC={float(s.spc):.6f} ADR={float(s.adr):.6f}")
    if args.report:
        metrics.write_report(rows, args.report)
    return EXIT_OK


def _cmd_explore(args) -> int:
    if args.target:
        target = data.read_series(args.target)
    else:
        target = data.gen_sine(args.eval_length + 1, args.period, args.amplitude)

    def values(count):
        return np.linspace(args.low, args.high, count, endpoint=False)

    spec = explore.GridSpec.from_groups(values(args.visible), values(args.hidden),
                                        values(args.output), eval_length=args.eval_length,
                                        value_range=(args.low, args.high))
    tensor = explore.explore_error_surface(spec, target, workers=args.workers)
    tensor.to_csv(args.out_dir)
    best = dict(zip(explore.WEIGHT_NAMES, (spec.axes[a][i] for a, i in enumerate(tensor.best_index))))
    print(f"points = {tensor.visited}")
    print(f"min mse = {float(tensor.mse.min()):.6g} at " +
          " ".join(f"{k}={v:g}" for k, v in best.items()))
    return EXIT_OK


def _read_matrix(path) -> np.ndarray:
    rows = []
    with open(path, newline="") as fh:
        for line_no, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                if line_no == 1:
                    continue
                raise data.DataError(f"{path}:{line_no}: non-numeric field") from None
    if not rows or len({len(r) for r in rows}) != 1:
        raise data.DataError(f"{path}: empty or ragged matrix")
    return np.array(rows)


def _cmd_baseline(args) -> int:
    if args.kind == "ridge":
        U = _read_matrix(args.design)
        z = data.read_series(args.target)
        if z.shape[0] != U.shape[0]:
            raise data.DataError(f"design has {U.shape[0]} rows, target {z.shape[0]} values")
        data.write_series(args.out, baseline.ridge_fit(U, z, args.lam))
    else:
        x = data.read_series(args.series)
        F = baseline.feature_matrix(x, args.window, args.stride)
        with open(args.out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["window", "energy", "rms_amplitude", "coastline", "hjorth_variance"])
            for i, row in enumerate(F):
                writer.writerow([i] + [repr(float(v)) for v in row])
    return EXIT_OK


COMMANDS = {"generate": _cmd_generate, "train": _cmd_train, "predict": _cmd_predict,
            "evaluate": _cmd_evaluate, "explore": _cmd_explore, "baseline": _cmd_baseline}


def run_command(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (baseline.SingularSystemError, NumericalError, FloatingPointError,
            metrics.UndefinedScoreError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (data.DataError, checkpoint.CheckpointError, OSError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
