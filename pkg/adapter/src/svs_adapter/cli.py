"""Adapter CLI: one WAV path in, exactly one embedding JSON document out.

Protocol: stdout carries only the JSON document
{"id": <wav stem>, "dim": <int>, "values": [floats]}; all diagnostics go to
stderr. Exit codes: 0 success, 2 configuration, 3 audio, 4 model. With
--warm, newline-delimited WAV paths are read from stdin and one JSON line is
emitted per path (error objects for per-file failures), amortizing model
load over a batch.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .audio import AudioError, load_wav
from .models import DEFAULT_MODEL, MODELS, AdapterConfig, ModelError, build, extract

EXIT_CONFIG = 2
EXIT_AUDIO = 3
EXIT_MODEL = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="svs-adapter",
        description="Extract a speaker embedding from a WAV file as JSON on stdout",
    )
    parser.add_argument("wav_path", nargs="?", help="input WAV (omit with --warm)")
    parser.add_argument("--model", default=DEFAULT_MODEL, help=f"one of: {', '.join(sorted(MODELS))}")
    parser.add_argument("--device", choices=["cpu", "accelerator"], default="cpu")
    parser.add_argument(
        "--warm", action="store_true",
        help="batch mode: read newline-delimited WAV paths from stdin",
    )
    return parser


def _embedding_doc(model, wav_path: Path, dim: int) -> dict:
    samples, rate = load_wav(wav_path)
    values = extract(model, samples, rate)
    if len(values) != dim:
        raise ModelError(f"model emitted {len(values)} values, declared dim {dim}")
    return {"id": wav_path.stem, "dim": dim, "values": values}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.warm == (args.wav_path is not None):
        print("error: provide exactly one of <wav_path> or --warm", file=sys.stderr)
        return EXIT_CONFIG
    if args.model not in MODELS:
        print(
            f"error: unknown model {args.model!r}; available: {', '.join(sorted(MODELS))}",
            file=sys.stderr,
        )
        return EXIT_CONFIG
    device = args.device
    if device == "accelerator":
        import torch

        if not torch.cuda.is_available():
            print("note: no accelerator available, using cpu", file=sys.stderr)
            device = "cpu"
    config = AdapterConfig(model_name=args.model, device=device, expected_dim=MODELS[args.model][1])
    try:
        model = build(config)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ModelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MODEL

    if not args.warm:
        try:
            doc = _embedding_doc(model, Path(args.wav_path), config.expected_dim)
        except AudioError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_AUDIO
        except ModelError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_MODEL
        json.dump(doc, sys.stdout)
        sys.stdout.write("\n")
        return 0

    worst = 0
    for line in sys.stdin:
        path = line.strip()
        if not path:
            continue
        try:
            doc = _embedding_doc(model, Path(path), config.expected_dim)
        except AudioError as exc:
            print(f"error: {exc}", file=sys.stderr)
            doc = {"id": Path(path).stem, "error": str(exc)}
            worst = max(worst, EXIT_AUDIO)
        except ModelError as exc:
            print(f"error: {exc}", file=sys.stderr)
            doc = {"id": Path(path).stem, "error": str(exc)}
            worst = max(worst, EXIT_MODEL)
        json.dump(doc, sys.stdout)
        sys.stdout.write("\n")
        sys.stdout.flush()
    return worst


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
