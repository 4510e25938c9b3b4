"""On-disk formats: JSON-lines records, segment manifests, score tables."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Iterator, List, Optional, Sequence, Tuple

from .segmenter import TimeSpan
from .textclean import BitextRecord, Record, SentenceRecord


class RecordFormatError(ValueError):
    pass


def record_from_obj(obj) -> Optional[Record]:
    """Build a record from a decoded JSON object; None when it is malformed."""
    if not isinstance(obj, dict):
        return None
    try:
        if "src" in obj or "tgt" in obj:
            fields = (obj["id"], obj["src_lang"], obj["src"], obj["tgt_lang"], obj["tgt"])
            if all(isinstance(x, str) for x in fields):
                return BitextRecord(*fields)
        else:
            fields = (obj["id"], obj["lang"], obj["text"])
            if all(isinstance(x, str) for x in fields):
                return SentenceRecord(*fields)
    except KeyError:
        pass
    return None


def record_to_obj(record: Record) -> dict:
    if isinstance(record, BitextRecord):
        return {
            "id": record.id,
            "src_lang": record.src_lang,
            "src": record.src_text,
            "tgt_lang": record.tgt_lang,
            "tgt": record.tgt_text,
        }
    return {"id": record.id, "lang": record.lang, "text": record.text}


def iter_jsonl(path, strict: bool = True) -> Iterator:
    """Yield records from a JSON-lines file.

    With ``strict=False`` malformed lines are yielded as ``None`` instead of
    raising, so a cleaning pass can count them.
    """
    with open(path, encoding="utf-8", newline="") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            try:
                record = record_from_obj(json.loads(line))
            except json.JSONDecodeError:
                record = None
            if record is None and strict:
                raise RecordFormatError(f"{path}:{lineno}: malformed record")
            yield record


def read_jsonl(path, strict: bool = True) -> List:
    return list(iter_jsonl(path, strict))


def write_jsonl(path, records: Iterable[Record]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for record in records:
            f.write(json.dumps(record_to_obj(record), ensure_ascii=False) + "\n")
            n += 1
    return n


def read_text_lines(path) -> List[str]:
    """Plain one-sentence-per-line text, or the text side of a JSON-lines file."""
    if str(path).endswith(".jsonl"):
        out = []
        for r in iter_jsonl(path):
            out.append(r.tgt_text if isinstance(r, BitextRecord) else r.text)
        return out
    with open(path, encoding="utf-8") as f:
        return [line.strip() for line in f if line.strip()]


@dataclass(frozen=True)
class ManifestRow:
    utt_id: str
    path: str
    start_s: float
    end_s: float


def manifest_rows(utt_prefix: str, audio_path: str, spans: Sequence[TimeSpan]) -> List[ManifestRow]:
    """Rows with times rounded to the millisecond, as they are written to disk."""
    return [
        ManifestRow(f"{utt_prefix}_{i:04d}", audio_path, round(s.start_s, 3), round(s.end_s, 3))
        for i, s in enumerate(spans)
    ]


def write_manifest(path, rows: Iterable[ManifestRow]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for r in rows:
            f.write(f"{r.utt_id}\t{r.path}\t{r.start_s:.3f}\t{r.end_s:.3f}\n")


def read_manifest(path) -> List[ManifestRow]:
    rows = []
    seen = set()
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 4:
                raise RecordFormatError(f"{path}:{lineno}: expected 4 tab-separated fields")
            utt, audio, start, end = parts
            row = ManifestRow(utt, audio, float(start), float(end))
            if not row.end_s > row.start_s:
                raise RecordFormatError(f"{path}:{lineno}: end must exceed start")
            if utt in seen:
                raise RecordFormatError(f"{path}:{lineno}: duplicate utterance id {utt}")
            seen.add(utt)
            rows.append(row)
    return rows


def write_scores(path, rows: Iterable[Tuple], header: Sequence[str]) -> None:
    """TSV with a header line; floats are written with 6 decimals."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\t".join(header) + "\n")
        for row in rows:
            f.write("\t".join(f"{v:.6f}" if isinstance(v, float) else str(v) for v in row) + "\n")
