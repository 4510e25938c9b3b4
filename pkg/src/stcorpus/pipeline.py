"""Stage runners wiring the library modules to files on disk.

Each ``cmd_*`` takes a validated :class:`Config`, writes its outputs and
returns a JSON-serializable report.  ``input`` may be passed explicitly to
chain text stages.
"""

from __future__ import annotations

import logging
import statistics
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional

from . import plots
from .activation import energy_activation, read_trace, read_wav
from .align import (
    align_viterbi,
    alignment_quality,
    filter_bottom_fraction,
    tokenize_pair,
    train_model1,
)
from .config import STAGES, Config, ConfigError
from .formats import (
    iter_jsonl,
    manifest_rows,
    read_jsonl,
    read_text_lines,
    write_jsonl,
    write_manifest,
    write_scores,
)
from .lmselect import NGramModel, moore_lewis_score, select, tokenize
from .segmenter import FrameTrace, merge_segments, segment_audio
from .textclean import (
    BitextRecord,
    RejectionReport,
    clean,
    deduplicate,
    language_filter,
    train_langid,
)

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_PARTIAL, EXIT_CONFIG = 0, 1, 2


def _ensure_parent(path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def load_activation(path: Path, config: Config) -> FrameTrace:
    if path.suffix.lower() == ".wav":
        return energy_activation(read_wav(path), config.energy_params())
    return read_trace(path)


def _segment_one(path_str: str, config: Config):
    trace = load_activation(config.resolve(path_str), config)
    spans = segment_audio(trace, config.segmenter_params())
    if config["segment"]["merge"]:
        spans = merge_segments(spans, config.merge_params())
    return trace, spans


def cmd_segment(config: Config) -> dict:
    """Activation, segmentation and merging per input; one manifest for all."""
    s = config["segment"]
    inputs: List[str] = list(s["inputs"])
    stems = [Path(p).stem for p in inputs]
    dupes = sorted({x for x in stems if stems.count(x) > 1})
    if dupes:
        raise ConfigError(f"segment.inputs: duplicate file stems would clash in utterance ids: {dupes}")

    def work(p):
        try:
            return _segment_one(p, config), None
        except (OSError, ValueError) as exc:
            return None, str(exc)

    workers = config["workers"]
    if workers > 1 and len(inputs) > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(work, inputs))
    else:
        results = [work(p) for p in inputs]

    manifest_path = _ensure_parent(config.output_path("segment", "manifest"))
    rows, failed = [], []
    for p, stem, (ok, err) in zip(inputs, stems, results):
        if err is not None:
            logger.error("segment: %s: %s", p, err)
            failed.append({"path": p, "error": err})
            continue
        trace, spans = ok
        rows.extend(manifest_rows(stem, p, spans))
        if config["figures"]:
            plots.plot_trace_segments(
                trace, spans, manifest_path.with_name(f"{manifest_path.stem}.{stem}.png"),
                p_on=s["p_on"], p_off=s["p_off"], title=f"{stem}: {len(spans)} segments",
            )
    write_manifest(manifest_path, rows)

    durations = [r.end_s - r.start_s for r in rows]
    total_s = sum(durations)
    if config["figures"]:
        plots.plot_histogram(
            durations, manifest_path.with_name(f"{manifest_path.stem}.durations.png"),
            "segment duration (s)", f"{len(rows)} segments, {total_s / 3600:.3f} h",
            marker=s["t_dur_s"],
        )
    return {
        "files": len(inputs),
        "failed": failed,
        "segments": len(rows),
        "total_hours": total_s / 3600.0,
        "max_duration_s": max(durations) if durations else 0.0,
        "mean_duration_s": statistics.fmean(durations) if durations else 0.0,
        "manifest": str(manifest_path),
    }


def _input(config: Config, stage: str, given: Optional[Path]) -> Path:
    if config[stage]["input"]:
        return config.resolve(config[stage]["input"])
    if given is None:
        raise ConfigError(f"{stage}.input is required")
    return given


def cmd_clean(config: Config, input: Optional[Path] = None) -> dict:
    src = _input(config, "clean", input)
    out = _ensure_parent(config.output_path("clean", "output"))
    report = RejectionReport()
    write_jsonl(out, clean(iter_jsonl(src, strict=False), config.clean_rules(), report))
    return {**report.as_dict(), "output": str(out)}


def cmd_dedup(config: Config, input: Optional[Path] = None) -> dict:
    src = _input(config, "dedup", input)
    out = _ensure_parent(config.output_path("dedup", "output"))
    report = RejectionReport()
    write_jsonl(out, deduplicate(iter_jsonl(src), report=report))
    return {**report.as_dict(), "output": str(out)}


def cmd_langid(config: Config, input: Optional[Path] = None) -> dict:
    s = config["langid"]
    src = _input(config, "langid", input)
    out = _ensure_parent(config.output_path("langid", "output"))
    classifier = train_langid({lang: read_text_lines(config.resolve(p)) for lang, p in sorted(s["seeds"].items())})
    report = RejectionReport()
    try:
        write_jsonl(out, language_filter(iter_jsonl(src), s["expected_lang"], classifier, report))
    except ValueError as exc:
        raise ConfigError(f"langid: {exc}") from None
    return {**report.as_dict(), "output": str(out)}


def cmd_align_filter(config: Config, input: Optional[Path] = None) -> dict:
    s = config["align_filter"]
    src = _input(config, "align_filter", input)
    records = read_jsonl(src)
    if not all(isinstance(r, BitextRecord) for r in records):
        raise ConfigError(f"align_filter: {src} must contain bitext records")
    pairs = [tokenize_pair(r) for r in records]
    usable = [p for p in pairs if p[1]]
    if not usable:
        raise ConfigError(f"align_filter: no bitext pairs in {src}")
    table = train_model1(usable, s["iterations"], s["diagonal_lambda"], workers=config["workers"])
    if s["table"]:
        table.write(_ensure_parent(config.resolve(s["table"])))
    qualities = [
        alignment_quality(align_viterbi(table, p), s["posterior_floor"]) if p[1] else 0.0
        for p in pairs
    ]
    kept = filter_bottom_fraction(qualities, s["fraction"])
    kept_set = set(kept)
    out = _ensure_parent(config.output_path("align_filter", "output"))
    write_jsonl(out, (records[i] for i in kept))
    qpath = _ensure_parent(config.output_path("align_filter", "qualities"))
    write_scores(
        qpath,
        ((r.id, q, int(i in kept_set)) for i, (r, q) in enumerate(zip(records, qualities))),
        ("id", "quality", "kept"),
    )
    if config["figures"]:
        plots.plot_histogram(
            qualities, qpath.with_suffix(".png"), "alignment quality",
            f"{len(records) - len(kept)} of {len(records)} removed", bins=20,
        )
    return {
        "input": len(records),
        "kept": len(kept),
        "rejected": len(records) - len(kept),
        "reasons": {"low-alignment-quality": len(records) - len(kept)},
        "log_likelihoods": table.log_likelihoods,
        "mean_quality": statistics.fmean(qualities) if qualities else 0.0,
        "output": str(out),
        "qualities": str(qpath),
    }


def _record_side(record, side: str):
    if isinstance(record, BitextRecord):
        return (record.tgt_text, record.tgt_lang) if side == "tgt" else (record.src_text, record.src_lang)
    return record.text, record.lang


def cmd_select(config: Config, input: Optional[Path] = None) -> dict:
    s = config["select"]
    src = _input(config, "select", input)
    records = read_jsonl(src)
    lang = s["lang"] or (_record_side(records[0], s["side"])[1] if records else "en")

    def lm(path):
        sents = [tokenize(t, lang) for t in read_text_lines(config.resolve(path))]
        if not sents:
            raise ConfigError(f"select: seed corpus {path} is empty")
        return NGramModel.train(sents, s["order"], s["include_eos"])

    in_lm, out_lm = lm(s["in_domain"]), lm(s["out_domain"])
    scores = [moore_lewis_score(in_lm, out_lm, tokenize(*_record_side(r, s["side"]))) for r in records]
    if s["policy"] == "top-k":
        chosen = select(scores, k=s["k"])
    else:
        chosen = select(scores, threshold=float(s["threshold"]))
    chosen_set = set(chosen.indices)
    out = _ensure_parent(config.output_path("select", "output"))
    write_jsonl(out, (records[i] for i in chosen.indices))
    spath = _ensure_parent(config.output_path("select", "scores"))
    write_scores(
        spath,
        ((r.id, sc, int(i in chosen_set)) for i, (r, sc) in enumerate(zip(records, scores))),
        ("id", "score", "selected"),
    )
    if config["figures"]:
        plots.plot_histogram(
            scores, spath.with_suffix(".png"), "cross-entropy difference (bits/token)",
            f"{len(chosen.indices)} of {len(records)} selected",
            marker=float(s["threshold"]) if s["policy"] == "threshold" else None,
        )
    return {
        "input": len(records),
        "kept": len(chosen.indices),
        "rejected": len(records) - len(chosen.indices),
        "reasons": {"out-of-domain": len(records) - len(chosen.indices)},
        "warnings": chosen.warnings,
        "output": str(out),
        "scores": str(spath),
    }


COMMANDS = {
    "segment": cmd_segment,
    "clean": cmd_clean,
    "dedup": cmd_dedup,
    "langid": cmd_langid,
    "align_filter": cmd_align_filter,
    "select": cmd_select,
}


def enabled_stages(config: Config) -> List[str]:
    return [st for st in STAGES if config[st]["enabled"]]


def cmd_run(config: Config) -> dict:
    """Run every enabled stage in order, chaining text stage outputs.

    Everything is validated before any stage starts.
    """
    stages = enabled_stages(config)
    config.validate(stages)
    report: Dict[str, dict] = {}
    previous: Optional[Path] = None
    for stage in stages:
        if stage == "segment":
            report[stage] = cmd_segment(config)
            continue
        report[stage] = COMMANDS[stage](config, previous)
        previous = Path(report[stage]["output"])
    return report


def exit_status(report: dict) -> int:
    seg = report.get("segment")
    if seg and seg["failed"]:
        return EXIT_PARTIAL
    return EXIT_OK
