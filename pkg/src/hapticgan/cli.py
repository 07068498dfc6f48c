"""Command-line interface.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from dataclasses import replace
from pathlib import Path

from hapticgan import __version__

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2

STUDY_NAMES = {
    "semisup": "semisup_grid",
    "supervised": "supervised_grid",
    "loo": "loo",
    "duration": "duration_sweep",
    "unlabeled": "unlabeled_scaling",
}


class UsageError(Exception):
    """Bad flag values or combinations (exit code 2)."""


# -- argument parsing helpers ------------------------------------------------------------------


def _csv_floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _csv_ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _window(text: str) -> tuple[float, float]:
    try:
        a, b = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected START:END in seconds, got {text!r}")
    if not b > a:
        raise argparse.ArgumentTypeError("window END must exceed START")
    return a, b


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=0, help="master random seed (default: 0)")
    g.add_argument("--threads", type=int, default=1,
                   help="worker threads for independent jobs (default: 1)")
    g.add_argument("--config", metavar="FILE",
                   help="JSON file of option values keyed by option name; "
                        "flags given on the command line take precedence")
    g.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    parser = argparse.ArgumentParser(
        prog="hapticgan",
        description="Semi-supervised material recognition from haptic signals.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic dataset store",
                       description="Generate a synthetic dataset store with known classes.")
    p.add_argument("--out", required=True, help="output store directory")
    p.add_argument("--objects-per-material", type=int, default=2,
                   help="objects per material class (default: 2)")
    p.add_argument("--interactions", type=int, default=50,
                   help="interactions per object (default: 50)")
    p.add_argument("--params", metavar="FILE", help="JSON file overriding synthesis parameters")

    p = sub.add_parser("import", parents=[common], help="import raw recordings into a store",
                       description="Import a raw recording tree through a JSON mapping file.")
    p.add_argument("--src", required=True, help="raw data root directory")
    p.add_argument("--mapping", required=True, metavar="FILE", help="JSON import mapping")
    p.add_argument("--out", required=True, help="output store directory")

    p = sub.add_parser("featurize", parents=[common], help="export feature vectors",
                       description="Featurize every record of a store into a binary32 matrix "
                                   "with a JSON sidecar.")
    p.add_argument("--store", required=True, help="dataset store directory")
    p.add_argument("--out", required=True, help="output matrix file (sidecar: OUT.json)")
    p.add_argument("--modalities", default="force,temperature,mic",
                   help="comma-separated modalities (default: force,temperature,mic)")
    p.add_argument("--ft-window", type=_window, default=(-0.1, 4.0), metavar="START:END",
                   help="force/temperature window around contact in seconds "
                        "(default: -0.1:4.0; write --ft-window=-0.1:4.0 for negative starts)")
    p.add_argument("--mic-window", type=_window, default=(-0.1, 0.1), metavar="START:END",
                   help="contact-mic window around contact in seconds (default: -0.1:0.1)")

    p = sub.add_parser("run", parents=[common], help="run an evaluation study",
                       description="Run a cross-validated study and write a JSON report plus "
                                   "a text table.")
    p.add_argument("--store", required=True, help="dataset store directory")
    p.add_argument("--study", required=True, choices=sorted(STUDY_NAMES),
                   help="semisup | supervised | loo | duration | unlabeled")
    p.add_argument("--model", default="gan", choices=["gan", "mlp", "svm"],
                   help="classifier (default: gan)")
    p.add_argument("--modalities", action="append", metavar="CSV",
                   help="comma-separated modality set; repeat for several table rows "
                        "(default: force,temperature)")
    p.add_argument("--fractions", type=_csv_floats, metavar="CSV",
                   help="labeled percentages for semisup/supervised/loo "
                        "(default: 1,2,4,8,16,50,100; loo: 1,4,16,50,100)")
    p.add_argument("--durations", type=_csv_floats, metavar="CSV",
                   help="contact durations in seconds for the duration study "
                        "(default: 4,3,2,1,0.5,0.2,0.1; mic alone: 1,0.7,0.5,0.3,0.2,0.1,0.05)")
    p.add_argument("--unlabeled", type=_csv_ints, metavar="CSV",
                   help="unlabeled examples per class for the unlabeled study "
                        "(default: 0,40,80,160,320,640,960)")
    p.add_argument("--labeled-per-class", type=int, default=40,
                   help="labeled examples per class for the unlabeled study (default: 40)")
    p.add_argument("--folds", type=int, default=6, help="cross-validation folds (default: 6)")
    p.add_argument("--epochs", type=int, default=100, help="training epochs (default: 100)")
    p.add_argument("--batch", type=int, default=100, help="minibatch size (default: 100)")
    p.add_argument("--lr", type=float, default=0.0006, help="Adam learning rate (default: 0.0006)")
    p.add_argument("--noise-std", type=float, default=0.5,
                   help="discriminator hidden-layer noise std (default: 0.5)")
    p.add_argument("--net-size", choices=["full", "desk"], default="full",
                   help="network widths: full (gen 500,500; disc 1000,500,250,250,250) or "
                        "desk (gen 256,256; disc 256,128,64,64,64) (default: full)")
    p.add_argument("--mic-window", type=_window, metavar="START:END",
                   help="contact-mic window for non-duration studies (default: -0.1:0.1)")
    p.add_argument("--svm-c", type=float, default=1.0, help="SVM box constraint C (default: 1)")
    p.add_argument("--svm-gamma", type=float,
                   help="RBF gamma (default: 1 / (n_features * variance of training features))")
    p.add_argument("--out", required=True, help="report JSON path (table written to OUT.txt)")
    p.add_argument("--csv", metavar="FILE", help="also write one CSV row per cell per fold")
    p.add_argument("--heavy", action="store_true",
                   help="allow hours-scale runs (leave-one-object-out on many objects)")

    p = sub.add_parser("spectrogram", parents=[common], help="export a Mel spectrogram",
                       description="Export the Mel spectrogram of one interaction's contact-mic "
                                   "stream as PGM (8-bit image) or CSV.")
    p.add_argument("--store", required=True, help="dataset store directory")
    p.add_argument("--interaction", required=True, help="interaction id")
    p.add_argument("--out", required=True, help="output file ending in .pgm or .csv")
    p.add_argument("--window", type=_window, default=(-0.1, 0.1), metavar="START:END",
                   help="window around contact in seconds (default: -0.1:0.1; "
                        "write --window=-0.1:0.1 for negative starts)")
    p.add_argument("--raw-power", action="store_true",
                   help="export Mel power without log compression")

    p = sub.add_parser("gradcheck", parents=[common], help="finite-difference gradient check",
                       description="Compare every analytic gradient with central finite "
                                   "differences in double precision.")
    p.add_argument("--inject-fault", metavar="COMPONENT",
                   help="corrupt one component's analytic gradient (self-test of the checker)")
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    # read --config before the full parse so the file can supply required options
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    subparsers = next(a for a in parser._subparsers._group_actions).choices
    command = next((a for a in argv if not a.startswith("-")), None)
    if not known.config or command not in subparsers or "-h" in argv or "--help" in argv:
        return parser.parse_args(argv)
    try:
        values = json.loads(Path(known.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {known.config}: {exc}")
    if not isinstance(values, dict):
        raise UsageError("config file must hold a JSON object")
    sub = subparsers[command]
    known = {a.dest: a for a in sub._actions if a.dest != "help"}
    defaults = {}
    for key, value in values.items():
        dest = key.replace("-", "_")
        if dest not in known or dest == "config":
            raise UsageError(f"config key {key!r} is not an option of '{command}'")
        action = known[dest]
        if isinstance(value, str) and action.type is not None:
            value = action.type(value)
        if action.dest == "modalities" and isinstance(value, str):
            value = [value]
        defaults[dest] = value
    sub.set_defaults(**defaults)
    # required options satisfied by the file are no longer required on the command line
    for dest in defaults:
        known[dest].required = False
    return parser.parse_args(argv)


# -- subcommands -------------------------------------------------------------------------------


def cmd_synth(args) -> int:
    from hapticgan.synth import SynthParams, generate_store

    if args.objects_per_material < 1 or args.interactions < 1:
        raise UsageError("--objects-per-material and --interactions must be >= 1")
    params = SynthParams.from_file(args.params) if args.params else SynthParams()
    man = generate_store(args.objects_per_material, args.interactions, params, args.seed,
                         args.out)
    counts = man.class_counts()
    print(f"wrote {len(man.records)} records ({len(man.objects)} objects) to {args.out}")
    print("per class: " + ", ".join(f"{k}={v}" for k, v in counts.items()))
    return EXIT_OK


def cmd_import(args) -> int:
    from hapticgan.data import ImportConfig, import_raw, save_store

    mapping = ImportConfig.from_file(args.mapping)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        man = import_raw(args.src, mapping)
    save_store(man, args.out)
    print(f"imported {len(man.records)} records to {args.out}")
    for rec in man.records:
        print(f"  {rec.interaction_id}: contact at {rec.contact_time_s:.4f} s")
    if man.excluded:
        print(f"warning: {len(man.excluded)} records excluded (no detectable contact): "
              + ", ".join(man.excluded), file=sys.stderr)
    for w in caught:
        logging.getLogger("hapticgan").info("%s", w.message)
    return EXIT_OK


def cmd_featurize(args) -> int:
    from hapticgan.data import load_store
    from hapticgan.experiments import parse_modalities
    from hapticgan.features import FeatureConfig, export_features, featurize_many

    cfg = FeatureConfig(modalities=parse_modalities(args.modalities),
                        ft_window_s=args.ft_window, mic_window_s=args.mic_window)
    man = load_store(args.store)
    X, vecs = featurize_many(man.records, cfg)
    export_features(args.out, X, vecs, cfg)
    print(f"wrote {X.shape[0]} x {X.shape[1]} features to {args.out}")
    return EXIT_OK


def _run_spec(args):
    from hapticgan.experiments import DEFAULT_UNLABELED, ExperimentSpec, SvmConfig, parse_modalities
    from hapticgan.features import FeatureConfig
    from hapticgan.ssgan import TrainConfig

    study = STUDY_NAMES[args.study]
    stray = {"--fractions": args.fractions is not None and study in ("duration_sweep",
                                                                      "unlabeled_scaling"),
             "--durations": args.durations is not None and study != "duration_sweep",
             "--unlabeled": args.unlabeled is not None and study != "unlabeled_scaling"}
    bad = [flag for flag, hit in stray.items() if hit]
    if bad:
        raise UsageError(f"{', '.join(bad)} cannot be used with --study {args.study}")
    sets = [parse_modalities(m) for m in (args.modalities or ["force,temperature"])]
    train_kw = dict(epochs=args.epochs, batch_size=args.batch, lr=args.lr,
                    noise_std=args.noise_std)
    train_cfg = TrainConfig.desk(**train_kw) if args.net_size == "desk" else TrainConfig(**train_kw)
    feature = FeatureConfig()
    if args.mic_window is not None:
        feature = replace(feature, mic_window_s=args.mic_window)
    return ExperimentSpec(
        study=study, model=args.model, store=args.store, modality_sets=sets,
        fractions=args.fractions, durations=args.durations,
        unlabeled_counts=args.unlabeled if args.unlabeled is not None else DEFAULT_UNLABELED,
        labeled_per_class=args.labeled_per_class, feature=feature, train=train_cfg,
        svm=SvmConfig(C=args.svm_c, gamma=args.svm_gamma), folds=args.folds, seed=args.seed,
        threads=args.threads, heavy=args.heavy)


def cmd_run(args) -> int:
    from hapticgan.data import load_store
    from hapticgan.experiments import run_experiment

    spec = _run_spec(args)
    if not Path(args.store, "manifest.json").exists():
        raise UsageError(f"no dataset store at {args.store}")
    report = run_experiment(spec, load_store(args.store))
    report.save(args.out)
    table = report.render_table()
    Path(str(args.out) + ".txt").write_text(table + "\n")
    if args.csv:
        Path(args.csv).write_text(report.to_csv())
    print(table)
    return EXIT_OK


def cmd_spectrogram(args) -> int:
    from hapticgan.data import StoreError, load_store
    from hapticgan.features import (
        FeatureConfig,
        extract_window,
        mel_spectrogram,
        resample_linear,
        write_csv_matrix,
        write_pgm,
    )

    out = Path(args.out)
    if out.suffix.lower() not in (".pgm", ".csv"):
        raise UsageError("--out must end in .pgm or .csv")
    man = load_store(args.store, ids=[args.interaction])
    if not man.records:
        raise StoreError(f"no interaction {args.interaction!r} in {args.store}")
    rec = man.records[0]
    cfg = FeatureConfig(mic_window_s=args.window, log_compress=not args.raw_power)
    win = extract_window(rec.mic, rec.contact_time_s, cfg.mic_window_s)
    dur = cfg.mic_window_s[1] - cfg.mic_window_s[0]
    audio = resample_linear(win.samples[:, 0], rec.mic.rate_hz, cfg.mic_rate_hz, dur,
                            win.offset_s)
    spec = mel_spectrogram(audio, cfg)
    if out.suffix.lower() == ".pgm":
        write_pgm(out, spec)
    else:
        write_csv_matrix(out, spec)
    print(f"wrote {spec.shape[0]} x {spec.shape[1]} Mel spectrogram to {out}"
          + ("" if win.coverage == 1.0 else f" (window coverage {win.coverage:.3f}, padded)"))
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    from hapticgan.gradcheck import CHECKS, format_report, run_gradcheck

    if args.inject_fault is not None and args.inject_fault not in CHECKS:
        raise UsageError(f"unknown component {args.inject_fault!r}; choose from "
                         + ", ".join(CHECKS))
    results = run_gradcheck(args.seed, args.inject_fault)
    print(format_report(results))
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAILURE


COMMANDS = {
    "synth": cmd_synth,
    "import": cmd_import,
    "featurize": cmd_featurize,
    "run": cmd_run,
    "spectrogram": cmd_spectrogram,
    "gradcheck": cmd_gradcheck,
}


def main(argv: list[str] | None = None) -> int:
    from hapticgan.data import ImportConfigError, StoreError
    from hapticgan.experiments import SpecError

    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    try:
        args = _apply_config(parser, argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (UsageError, argparse.ArgumentTypeError) as exc:
        print(f"hapticgan: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("hapticgan: error: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except (UsageError, SpecError, ImportConfigError) as exc:
        print(f"hapticgan {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (StoreError, OSError, ValueError, RuntimeError) as exc:
        print(f"hapticgan {args.command}: failed: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
