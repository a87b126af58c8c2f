"""End-to-end evaluation: baseline, thresholds, vulnerability run, reports.

Every artifact written here is deterministic for identical inputs: rows are
canonically sorted, floats use fixed formats, and figures carry no
timestamps. Worker count must never change output bytes.
"""

from __future__ import annotations

import csv
import logging
from pathlib import Path

from .backends import VerifierDescriptor
from .corpus import Manifest
from .errors import ConfigError
from .evaluation import (
    BaselineGroup,
    ProbeMode,
    ProtocolConfig,
    histogram_data,
    pool_scores,
    resolve_thresholds,
    run_baseline,
    run_vulnerability,
)
from .figures import render_histogram_png
from .metrics import GmapConfig, GmapCapacity, fmmpmr, gmap, map_matrix, mmpmr, save_trials
from .morphing import MorphRow
from .report import (
    GENDER_PAIR_ORDER,
    build_gmap_grid,
    full_gmap_by_device,
    histogram_csv,
    render_grid,
    render_histogram_svg,
    render_map_matrix_csv,
    summarize_full_gmap,
)

log = logging.getLogger(__name__)


def evaluate_pipeline(
    corpus: Manifest,
    morphs: list[MorphRow],
    backends: tuple[VerifierDescriptor, ...],
    mode: ProbeMode = ProbeMode.TEXT_DEPENDENT,
    attempts: int = 3,
    bins: int = 30,
    out_dir: str | Path = "eval",
    jobs: int = 1,
) -> dict[str, Path]:
    """Run the full protocol and write the report tree; returns artifact paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if mode is ProbeMode.TEXT_INDEPENDENT:
        sentences = {r.sentence_id for r in corpus.records}
        if len(sentences) < 2:
            raise ConfigError(
                "text-independent probing needs at least two distinct sentences"
            )

    baselines = {b.name: run_baseline(corpus, b, jobs=jobs) for b in backends}
    thresholds = resolve_thresholds(backends, baselines)
    cfg = ProtocolConfig(backends=backends, mode=mode, attempts=attempts)
    run = run_vulnerability(morphs, corpus, cfg, jobs=jobs)
    trials = run.table

    artifacts: dict[str, Path] = {}

    artifacts["trials"] = save_trials(trials, out_dir / "trials.csv")

    exclusions_path = out_dir / "exclusions.log"
    with open(exclusions_path, "w", encoding="utf-8") as fh:
        for morph_id, reason in run.exclusions:
            fh.write(f"{morph_id}\t{reason}\n")
    artifacts["exclusions"] = exclusions_path

    artifacts["baseline"] = _write_baseline_csv(baselines, out_dir / "baseline.csv")
    artifacts["baseline_md"] = _write_baseline_md(baselines, out_dir / "baseline.md")
    artifacts["thresholds"] = _write_thresholds(backends, thresholds, out_dir / "thresholds.csv")

    if trials.rows:
        artifacts["metrics"] = _write_metrics_csv(trials, thresholds, out_dir / "metrics.csv")
        for backend in backends:
            grid = build_gmap_grid(trials.filter(backend=backend.name), thresholds, backend.name)
            base = out_dir / f"gmap_multiprobe_{backend.name}"
            base.with_suffix(".csv").write_text(render_grid(grid, "csv"), encoding="utf-8")
            base.with_suffix(".md").write_text(render_grid(grid, "markdown"), encoding="utf-8")
            artifacts[f"gmap_multiprobe_{backend.name}"] = base.with_suffix(".csv")
        grid = build_gmap_grid(trials, thresholds, backend=None)
        (out_dir / "gmap_multisvs.csv").write_text(render_grid(grid, "csv"), encoding="utf-8")
        (out_dir / "gmap_multisvs.md").write_text(render_grid(grid, "markdown"), encoding="utf-8")
        artifacts["gmap_multisvs"] = out_dir / "gmap_multisvs.csv"

        for device in sorted({r.device for r in trials.rows}):
            m = map_matrix(trials.filter(device=device), thresholds)
            path = out_dir / f"map_matrix_{device}.csv"
            path.write_text(
                render_map_matrix_csv(m.values, m.attempts, m.backends), encoding="utf-8"
            )
            artifacts[f"map_matrix_{device}"] = path

        per_device = full_gmap_by_device(trials, thresholds)
        (out_dir / "gmap.csv").write_text(summarize_full_gmap(per_device, "csv"), encoding="utf-8")
        (out_dir / "gmap.md").write_text(
            summarize_full_gmap(per_device, "markdown"), encoding="utf-8"
        )
        artifacts["gmap"] = out_dir / "gmap.csv"

        pooled = pool_scores([g for groups in baselines.values() for g in groups])
        hist = histogram_data(pooled, trials, bins=bins)
        (out_dir / "histogram.csv").write_text(histogram_csv(hist), encoding="utf-8")
        render_histogram_svg(hist, out_dir / "histogram.svg")
        render_histogram_png(hist, out_dir / "histogram.png")
        artifacts["histogram"] = out_dir / "histogram.svg"
    else:
        log.warning("no trials were produced; metric reports skipped")

    return artifacts


def _write_baseline_csv(baselines: dict[str, list[BaselineGroup]], path: Path) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["backend", "device", "language", "eer_pct", "eer_threshold",
             "fmr001_threshold", "n_genuine", "n_impostor"]
        )
        for name in sorted(baselines):
            for g in baselines[name]:
                keys = dict(zip(g.key_names, g.key))
                writer.writerow(
                    [
                        name,
                        keys.get("device", ""),
                        keys.get("language", ""),
                        f"{100.0 * g.eer:.4f}",
                        f"{g.eer_threshold:.10f}",
                        f"{g.fmr_threshold:.10f}",
                        g.scores.genuine.size,
                        g.scores.impostor.size,
                    ]
                )
    return path


def _write_baseline_md(baselines: dict[str, list[BaselineGroup]], path: Path) -> Path:
    """EER (%) grid: one row per (backend, device), one column per language."""
    languages = sorted(
        {dict(zip(g.key_names, g.key)).get("language", "") for gs in baselines.values() for g in gs}
    )
    lines = [
        "| backend | device | " + " | ".join(languages) + " |",
        "|---|---|" + "|".join(["---"] * len(languages)) + "|",
    ]
    for name in sorted(baselines):
        by_key: dict[tuple[str, str], float] = {}
        for g in baselines[name]:
            keys = dict(zip(g.key_names, g.key))
            by_key[(keys.get("device", ""), keys.get("language", ""))] = 100.0 * g.eer
        for device in sorted({d for d, _ in by_key}):
            cells = [
                f"{by_key[(device, lang)]:.2f}" if (device, lang) in by_key else "—"
                for lang in languages
            ]
            lines.append(f"| {name} | {device} | " + " | ".join(cells) + " |")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def _write_thresholds(
    backends: tuple[VerifierDescriptor, ...], thresholds: dict[str, float], path: Path
) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["backend", "threshold", "source"])
        for b in sorted(backends, key=lambda b: b.name):
            source = "fixed" if b.threshold is not None else f"fmr={b.fmr_target:g}"
            writer.writerow([b.name, f"{thresholds[b.name]:.10f}", source])
    return path


def _write_metrics_csv(trials, thresholds: dict[str, float], path: Path) -> Path:
    """Per-cell MMPMR/FMMPMR/G-MAP for every populated grouping."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["backend", "device", "language", "gender_pair", "factor",
             "n_morphs", "mmpmr", "fmmpmr", "gmap_multiprobe"]
        )
        for backend in trials.backends():
            for device in sorted({r.device for r in trials.rows}):
                for language in sorted({r.language for r in trials.rows}):
                    for pair in GENDER_PAIR_ORDER:
                        gender = ("FF", "MM") if pair == "Combined" else pair
                        for factor in trials.attack_types():
                            sub = trials.filter(
                                attack_type=factor,
                                backend=backend,
                                device=device,
                                language=language,
                                gender_pair=gender,
                            )
                            if not sub.rows:
                                continue
                            writer.writerow(
                                [
                                    backend,
                                    device,
                                    language,
                                    pair,
                                    factor.name,
                                    len(sub.morph_ids()),
                                    f"{mmpmr(sub, thresholds):.4f}",
                                    f"{fmmpmr(sub, thresholds):.4f}",
                                    f"{gmap(sub, GmapConfig(thresholds, GmapCapacity.MULTI_PROBE)):.4f}",
                                ]
                            )
    return path
