#!/usr/bin/env python
# -*- encoding: utf-8 -*-
"""Command-line interface

Usage: ``casasid <command> [options]``; run ``casasid <command> --help``
for the options of each command.  Exit codes: 0 success, 2 I/O error,
3 configuration or usage error, 4 data or precondition error, 5 internal
error.
"""

import argparse
import json
import logging
import os
import sys

import numpy as np

from .cascade import (
    MODES,
    SystemConfig,
    ablate,
    identify,
    load_system,
    save_system,
    train_system,
)
from .casa import segregate
from .core import read_wav, write_wav
from .evaluation import write_trials
from .exceptions import (
    CasaSidError,
    ConfigError,
    CorruptModelError,
    DivergenceError,
    FormatError,
    IoError,
    ParamError,
    VersionError,
)
from .mfcc import mfcc_features, write_features
from .mixing import NOISE_TYPES, make_synthetic_corpus
from .version import version

__all__ = ["main", "build_arg_parser", "EXIT_CODES"]

logger = logging.getLogger(__name__)

EXIT_CODES = dict(ok=0, io=2, config=3, data=4, internal=5)


class _ArgumentParser(argparse.ArgumentParser):
    """Usage errors exit with the configuration error code"""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CODES["config"], "{}: error: {}\n".format(self.prog, message))


def _exit_code(exc):
    if isinstance(exc, (ConfigError, VersionError)):
        return EXIT_CODES["config"]
    if isinstance(exc, (IoError, FormatError, CorruptModelError, OSError)):
        return EXIT_CODES["io"]
    if isinstance(exc, (ParamError, DivergenceError)):
        return EXIT_CODES["data"]
    return EXIT_CODES["internal"]


def _load_config(args):
    config = SystemConfig.load(args.config) if args.config else SystemConfig()
    overrides = {}
    if getattr(args, "jobs", None) is not None:
        overrides["n_jobs"] = args.jobs
    if getattr(args, "no_casa", False):
        overrides.update(casa_train=False, casa_test=False)
    return config.replace(**overrides) if overrides else config


def _write_json(data, path):
    with open(path, "w", encoding="utf-8") as fdesc:
        json.dump(data, fdesc, sort_keys=True, indent=2)


def dump_diagnostics(diagnostics, directory):
    """Write the masks, pitch track and band energies of a segregation run.

    ``ibm.bin`` holds the binary mask as one byte per cell (frames x bins,
    row-major) described by ``ibm.json``.
    """

    os.makedirs(directory, exist_ok=True)
    bits = diagnostics.ibm.bits
    with open(os.path.join(directory, "ibm.bin"), "wb") as fdesc:
        fdesc.write(bits.astype(np.uint8).tobytes())
    _write_json(
        dict(rows=bits.shape[0], cols=bits.shape[1], dtype="u1"),
        os.path.join(directory, "ibm.json"),
    )
    fmask = diagnostics.fmask.to_dict()
    fmask["passthrough"] = diagnostics.passthrough
    _write_json(fmask, os.path.join(directory, "fmask.json"))
    _write_json(diagnostics.pitch.to_dict(), os.path.join(directory, "pitch.json"))
    _write_json(diagnostics.energies.to_dict(), os.path.join(directory, "energies.json"))
    _write_json(diagnostics.onsets.to_dict(), os.path.join(directory, "onsets.json"))


def cmd_segregate(args):
    config = _load_config(args)
    clip = read_wav(args.input)
    out, diagnostics = segregate(clip, config.casa)
    write_wav(out, args.output)
    if args.dump_diagnostics:
        dump_diagnostics(diagnostics, args.dump_diagnostics)
    logger.info("Segregated %s -> %s", args.input, args.output)


def cmd_features(args):
    config = _load_config(args)
    features = mfcc_features(read_wav(args.input), config.mfcc)
    write_features(features, args.output, fmt=args.format)
    logger.info("Wrote %d x %d features to %s", features.n_frames, features.n_features, args.output)


def cmd_train(args):
    config = _load_config(args)
    model = train_system(args.manifest, config, seed=args.seed)
    save_system(model, args.model_dir)


def cmd_identify(args):
    model = load_system(args.model_dir)
    use_casa = False if args.no_casa else None
    result = identify(read_wav(args.input), model, use_casa=use_casa, mode=args.mode)
    print(json.dumps(result.to_dict(diagnostics=args.verbose_output), sort_keys=True))


def cmd_evaluate(args):
    model = load_system(args.model_dir)
    config = _load_config(args) if args.config else model.config
    modes = [m.strip() for m in args.modes.split(",") if m.strip()]
    if args.no_casa:
        config = config.replace(casa_train=False, casa_test=False)
        model = None

    report = ablate(
        args.manifest,
        config,
        modes=modes,
        noise=args.noise,
        ratio=args.ratio,
        seed=args.seed,
        alpha=args.alpha,
        model=model,
    )

    if args.trials:
        for mode, trials in report.trials.items():
            root, ext = os.path.splitext(args.trials)
            write_trials(trials, "{}.{}{}".format(root, mode, ext or ".jsonl"))

    if args.output:
        _write_json(report.to_dict(), args.output)
        print(report.to_text())
    else:
        print(json.dumps(report.to_dict(), sort_keys=True))


def cmd_synth(args):
    make_synthetic_corpus(
        args.output_dir,
        n_speakers=args.speakers,
        n_emotions=args.emotions,
        n_utterances=args.utterances,
        sample_rate=args.sample_rate,
        seed=args.seed,
        n_train=args.train_utterances,
    )


def cmd_config(args):
    config = _load_config(args) if args.config and not args.print_defaults else SystemConfig()
    print(json.dumps(config.to_dict(), sort_keys=True, indent=2))


def build_arg_parser():
    parser = _ArgumentParser(
        prog="casasid",
        description="CASA front end, MFCC features and a GMM -> CNN cascade "
        "for speaker identification under interference",
    )
    parser.add_argument("--version", action="version", version="%(prog)s " + version)
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="Log debug messages")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="Only log warnings and errors")

    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    def add_config(p):
        p.add_argument("--config", default=None, help="JSON configuration file")

    p = sub.add_parser("segregate", help="Suppress interference in a WAV file")
    p.add_argument("input", help="Input WAV (16-bit PCM)")
    p.add_argument("output", help="Output WAV")
    add_config(p)
    p.add_argument(
        "--dump-diagnostics",
        metavar="DIR",
        default=None,
        help="Write masks, pitch track and band energies to DIR",
    )
    p.set_defaults(func=cmd_segregate)

    p = sub.add_parser("features", help="Compute MFCC + delta features of a WAV file")
    p.add_argument("input", help="Input WAV")
    p.add_argument("output", help="Output feature file")
    add_config(p)
    p.add_argument(
        "--format",
        choices=["bin", "jsonl"],
        default="bin",
        help="bin: float64 rows with a JSON sidecar; jsonl: text rows after a JSON header",
    )
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("train", help="Train a system from a manifest")
    p.add_argument("manifest", help="JSON-lines manifest")
    p.add_argument("model_dir", help="Output bundle directory")
    add_config(p)
    p.add_argument("--seed", type=int, default=None, help="Overrides the GMM and CNN seeds")
    p.add_argument("--jobs", type=int, default=None, help="Parallel workers")
    p.add_argument("--no-casa", action="store_true", help="Disable CASA at training and test time")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("identify", help="Identify the speaker of a WAV file")
    p.add_argument("input", help="Input WAV")
    p.add_argument("model_dir", help="Bundle directory")
    p.add_argument("--no-casa", action="store_true", help="Skip CASA segregation")
    p.add_argument("--mode", choices=["gmm_cnn", "cnn_only", "gmm_only"], default="gmm_cnn")
    p.add_argument(
        "--diagnostics",
        dest="verbose_output",
        action="store_true",
        help="Include likelihoods and probabilities in the output",
    )
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("evaluate", help="Evaluate decision modes on the test split")
    p.add_argument("manifest", help="JSON-lines manifest")
    p.add_argument("model_dir", help="Bundle directory")
    add_config(p)
    p.add_argument(
        "--modes",
        default="gmm_only,gmm_cnn",
        help="Comma-separated subset of {}".format(",".join(MODES)),
    )
    p.add_argument("--noise", choices=NOISE_TYPES + ["speech"], default=None)
    p.add_argument("--ratio", type=float, default=2.0, help="Target-to-interference energy ratio")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--alpha", type=float, default=0.10)
    p.add_argument("--no-casa", action="store_true", help="Disable CASA at training and test time")
    p.add_argument("--output", default=None, help="Write the JSON report here")
    p.add_argument("--trials", default=None, help="Write per-mode trial logs (JSON-lines)")
    p.add_argument("--jobs", type=int, default=None, help="Parallel workers")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("synth", help="Write a synthetic corpus and its manifest")
    p.add_argument("output_dir")
    p.add_argument("--speakers", type=int, default=4)
    p.add_argument("--emotions", type=int, default=2)
    p.add_argument("--utterances", type=int, default=6)
    p.add_argument("--train-utterances", type=int, default=None)
    p.add_argument("--sample-rate", type=int, default=8000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("config", help="Print a configuration document")
    add_config(p)
    p.add_argument("--print-defaults", action="store_true", help="Print the built-in defaults")
    p.set_defaults(func=cmd_config)

    return parser


def main(argv=None):
    parser = build_arg_parser()
    args = parser.parse_args(argv)

    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(
        level=level, stream=sys.stderr, format="%(asctime)s %(name)s %(levelname)s: %(message)s"
    )

    try:
        args.func(args)
    except (CasaSidError, OSError) as exc:
        logger.debug("Command failed", exc_info=True)
        print("casasid: error: {}".format(exc), file=sys.stderr)
        return _exit_code(exc)
    except Exception as exc:
        logger.exception("Internal error")
        print("casasid: internal error: {}".format(exc), file=sys.stderr)
        return EXIT_CODES["internal"]
    return EXIT_CODES["ok"]


if __name__ == "__main__":
    sys.exit(main())
