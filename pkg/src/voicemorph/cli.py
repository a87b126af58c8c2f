"""Command-line interface: synth -> morph -> evaluate.

Each stage reads and writes plain files (WAVs, CSV manifests, trial tables),
so stages are independently re-runnable. Exit codes: 0 success, 1 runtime or
I/O failure, 2 configuration error. stdout carries machine-readable artifact
paths; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .backends import parse_backend_config, set_subprocess_limit
from .corpus import SynthConfig, load_manifest, parse_synth_config, save_manifest, synth_corpus, validate_manifest
from .errors import (
    ConfigError,
    DuplicateKeyError,
    InsufficientDataError,
    MissingFileError,
    ParseError,
    VoicemorphError,
)
from .evaluation import ProbeMode
from .morphing import MorphFactor, MorphMode, PairingPolicy, batch_morph, generate_pairings, load_morph_manifest
from .pipeline import evaluate_pipeline

log = logging.getLogger(__name__)

_CONFIG_ERRORS = (ConfigError, ParseError, DuplicateKeyError, InsufficientDataError, ValueError)


def _default_jobs() -> int:
    return min(8, os.cpu_count() or 1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="voicemorph",
        description="Time-domain voice morphing and verification vulnerability evaluation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a deterministic synthetic corpus")
    p_synth.add_argument("--speakers", type=int, required=True)
    p_synth.add_argument("--sentences", default="S1,S2,S3", help="comma-separated sentence ids")
    p_synth.add_argument("--seed", type=int, default=42)
    p_synth.add_argument("--out", type=Path, default=Path("corpus"))
    p_synth.add_argument("--config", type=Path, help="key=value synthesis config file")
    p_synth.add_argument("--device", default="synth")
    p_synth.add_argument("--language", default="synthetic")

    p_morph = sub.add_parser("morph", help="generate morphs for all contributor pairings")
    p_morph.add_argument("--manifest", type=Path, required=True)
    p_morph.add_argument("--gender-mode", choices=["ff", "mm", "combined"], default="combined")
    p_morph.add_argument("--factors", default="m25,m50,m75,m100")
    p_morph.add_argument("--mode", choices=["portion", "literal"], default="portion")
    p_morph.add_argument("--out", type=Path, default=Path("morphs"))
    p_morph.add_argument("--jobs", type=int, default=_default_jobs())

    p_eval = sub.add_parser("evaluate", help="baseline + vulnerability run + reports")
    p_eval.add_argument("--corpus", type=Path, required=True)
    p_eval.add_argument("--morphs", type=Path, required=True)
    p_eval.add_argument("--backends", type=Path, required=True)
    p_eval.add_argument("--mode", choices=["td", "ti"], default="td")
    p_eval.add_argument("--attempts", type=int, default=3)
    p_eval.add_argument("--bins", type=int, default=30)
    p_eval.add_argument("--out", type=Path, default=Path("eval"))
    p_eval.add_argument("--jobs", type=int, default=_default_jobs())

    return parser


def cmd_synth(args: argparse.Namespace) -> int:
    if args.speakers < 2:
        raise ConfigError("--speakers must be >= 2 (single-speaker corpora are unpairable)")
    sentences = [s.strip() for s in args.sentences.split(",") if s.strip()]
    if not sentences:
        raise ConfigError("--sentences must name at least one sentence id")
    config = parse_synth_config(args.config) if args.config else SynthConfig()
    manifest = synth_corpus(
        n_speakers=args.speakers,
        sentences=sentences,
        config=config,
        seed=args.seed,
        out_dir=args.out,
        device=args.device,
        language=args.language,
    )
    path = save_manifest(manifest, args.out / "manifest.csv", relative_to=args.out)
    print(f"manifest\t{path}")
    return 0


def cmd_morph(args: argparse.Namespace) -> int:
    factors = tuple(MorphFactor.parse(tok) for tok in args.factors.split(",") if tok.strip())
    if not factors:
        raise ConfigError("--factors must name at least one morph factor")
    manifest = load_manifest(_require_file(args.manifest, "--manifest"))
    report = validate_manifest(manifest)
    if report.empty:
        raise ConfigError(f"{args.manifest}: manifest is empty")
    for line in report.rate_mismatches:
        log.warning("sample-rate mismatch %s", line)
    for missing in report.missing_files:
        log.warning("missing file %s", missing)
    policy = PairingPolicy(
        gender_mode={"ff": "FF", "mm": "MM", "combined": "Combined"}[args.gender_mode],
        factors=factors,
        mode=MorphMode.parse(args.mode),
    )
    specs = generate_pairings(manifest, policy)
    log.info("generating %d morphs into %s", len(specs), args.out)
    result = batch_morph(specs, args.out, jobs=max(1, args.jobs))
    print(f"morph_manifest\t{result.manifest_path}")
    if result.failures:
        for morph_id, reason in result.failures:
            print(f"morph failed: {morph_id}: {reason}", file=sys.stderr)
        return 1
    return 0


def _require_file(path: Path, flag: str) -> Path:
    if not path.is_file():
        raise ConfigError(f"{flag}: no such file: {path}")
    return path


def cmd_evaluate(args: argparse.Namespace) -> int:
    corpus = load_manifest(_require_file(args.corpus, "--corpus"))
    morphs = load_morph_manifest(_require_file(args.morphs, "--morphs"))
    backends = tuple(parse_backend_config(_require_file(args.backends, "--backends")))
    jobs = max(1, args.jobs)
    set_subprocess_limit(min(4, jobs))  # child extractors stay capped at 4
    artifacts = evaluate_pipeline(
        corpus=corpus,
        morphs=morphs,
        backends=backends,
        mode=ProbeMode.parse(args.mode),
        attempts=args.attempts,
        bins=args.bins,
        out_dir=args.out,
        jobs=jobs,
    )
    for name in sorted(artifacts):
        print(f"{name}\t{artifacts[name]}")
    return 0


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(name)s: %(message)s"
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = {"synth": cmd_synth, "morph": cmd_morph, "evaluate": cmd_evaluate}[args.command]
    try:
        return handler(args)
    except _CONFIG_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (MissingFileError, VoicemorphError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
