"""Rule-based sentence cleaning, exact deduplication and language filtering."""

from __future__ import annotations

import math
import re
import threading
import unicodedata
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Protocol, Tuple, Union

LANGS = ("en", "de", "ja", "zh", "other")

NONPRINTING_CATEGORIES = frozenset({"Cc", "Cf", "Co", "Cn"})
URL_RE = re.compile(r"https?://")
MARKUP_RE = re.compile(r"<[^<>]*>")
_WS_RE = re.compile(r"\s+")

# rejection reasons, in the order the checks run
INVALID = "invalid"
EMPTY = "empty"
NONPRINTING = "nonprinting"
URL = "url"
MARKUP = "markup"
TOKEN_LENGTH = "token-length"
WRONG_LANGUAGE = "wrong-language"


@dataclass(frozen=True)
class SentenceRecord:
    id: str
    lang: str
    text: str


@dataclass(frozen=True)
class BitextRecord:
    id: str
    src_lang: str
    src_text: str
    tgt_lang: str
    tgt_text: str


Record = Union[SentenceRecord, BitextRecord]


@dataclass(frozen=True)
class CleanRules:
    max_token_chars: Mapping[str, int] = field(
        default_factory=lambda: {"ja": 150, "zh": 150}
    )
    default_max_token_chars: int = 50
    reject_nonprinting: bool = True
    reject_urls: bool = True

    def __post_init__(self):
        limits = [self.default_max_token_chars, *self.max_token_chars.values()]
        if any(not isinstance(n, int) or n <= 0 for n in limits):
            raise ValueError(f"token length limits must be positive integers: {limits}")

    def limit_for(self, lang: str) -> int:
        return self.max_token_chars.get(lang, self.default_max_token_chars)


class RejectionReport(Counter):
    """Rejection counts keyed by reason, plus the number of records kept."""

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.kept = 0

    @property
    def rejected(self) -> int:
        return sum(self.values())

    def as_dict(self) -> dict:
        return {
            "input": self.kept + self.rejected,
            "kept": self.kept,
            "rejected": self.rejected,
            "reasons": dict(sorted(self.items())),
        }


def normalize_whitespace(text: str) -> str:
    return _WS_RE.sub(" ", text.replace("\t", " ")).strip()


def text_problem(text, lang: str, rules: CleanRules) -> Tuple[Optional[str], str]:
    """Check one side of a record; return ``(reason or None, normalized text)``."""
    if not isinstance(text, str) or not isinstance(lang, str):
        return INVALID, ""
    text = text.replace("\t", " ")
    if rules.reject_nonprinting and any(
        unicodedata.category(ch) in NONPRINTING_CATEGORIES for ch in text
    ):
        return NONPRINTING, text
    text = normalize_whitespace(text)
    if not text:
        return EMPTY, text
    if rules.reject_urls:
        if URL_RE.search(text):
            return URL, text
        if MARKUP_RE.search(text):
            return MARKUP, text
    limit = rules.limit_for(lang)
    # len() of a str counts code points
    if any(len(tok) > limit for tok in text.split(" ")):
        return TOKEN_LENGTH, text
    return None, text


def clean_one(record, rules: CleanRules) -> Tuple[Optional[str], Optional[Record]]:
    if isinstance(record, SentenceRecord):
        reason, text = text_problem(record.text, record.lang, rules)
        return reason, (None if reason else replace(record, text=text))
    if isinstance(record, BitextRecord):
        reason, src = text_problem(record.src_text, record.src_lang, rules)
        if reason:
            return reason, None
        reason, tgt = text_problem(record.tgt_text, record.tgt_lang, rules)
        if reason:
            return reason, None
        return None, replace(record, src_text=src, tgt_text=tgt)
    return INVALID, None


def clean(records: Iterable, rules: CleanRules = CleanRules(), report: Optional[RejectionReport] = None) -> Iterator[Record]:
    """Yield the records that pass every rule, whitespace-normalized.

    Rejections are tallied into ``report`` by reason.  A bitext pair is
    rejected when either side fails; the first failing side names the reason.
    Anything that is not a record (or has non-string fields) counts as
    ``invalid``.
    """
    if report is None:
        report = RejectionReport()
    for record in records:
        reason, kept = clean_one(record, rules)
        if reason:
            report[reason] += 1
        else:
            report.kept += 1
            yield kept


def dedup_key(record: Record):
    if isinstance(record, BitextRecord):
        return normalize_whitespace(record.src_text), normalize_whitespace(record.tgt_text)
    return normalize_whitespace(record.text)


class SeenKeys:
    """Thread-safe first-writer-wins key set."""

    def __init__(self):
        self._keys = set()
        self._lock = threading.Lock()

    def add(self, key) -> bool:
        """Insert ``key``; True if it was not present before."""
        with self._lock:
            if key in self._keys:
                return False
            self._keys.add(key)
            return True

    def __len__(self):
        return len(self._keys)


def deduplicate(records: Iterable[Record], seen: Optional[SeenKeys] = None, report: Optional[RejectionReport] = None) -> Iterator[Record]:
    """Keep the first record for each whitespace-normalized text (case kept)."""
    seen = SeenKeys() if seen is None else seen
    for record in records:
        if seen.add(dedup_key(record)):
            if report is not None:
                report.kept += 1
            yield record
        elif report is not None:
            report["duplicate"] += 1


class LanguageClassifier(Protocol):
    languages: Tuple[str, ...]

    def predict(self, text: str) -> str: ...


def char_ngrams(text: str, max_n: int = 3) -> Counter:
    text = text.casefold()
    grams: Counter = Counter()
    for n in range(1, max_n + 1):
        for i in range(len(text) - n + 1):
            grams[text[i : i + n]] += 1
    return grams


class CharNGramClassifier:
    """Multinomial naive Bayes over character 1..3-grams with add-one smoothing.

    No class prior is used.  Ties go to the lexicographically smallest tag.
    """

    def __init__(self, counts: Dict[str, Counter], max_n: int = 3):
        if not counts:
            raise ValueError("need at least one language")
        self.max_n = max_n
        self.languages = tuple(sorted(counts))
        vocab = set()
        for c in counts.values():
            vocab.update(c)
        v = len(vocab) + 1  # +1 for the unseen-gram bucket
        self._logp: Dict[str, Dict[str, float]] = {}
        self._log_unseen: Dict[str, float] = {}
        for lang in self.languages:
            c = counts[lang]
            denom = sum(c.values()) + v
            self._logp[lang] = {g: math.log((k + 1) / denom) for g, k in c.items()}
            self._log_unseen[lang] = math.log(1 / denom)

    def log_likelihood(self, text: str, lang: str) -> float:
        logp = self._logp[lang]
        unseen = self._log_unseen[lang]
        return sum(k * logp.get(g, unseen) for g, k in char_ngrams(text, self.max_n).items())

    def scores(self, text: str) -> Dict[str, float]:
        return {lang: self.log_likelihood(text, lang) for lang in self.languages}

    def predict(self, text: str) -> str:
        scores = self.scores(text)
        # languages are sorted, so max() keeps the smallest tag among ties
        return max(self.languages, key=lambda lang: scores[lang])


def train_langid(seeds: Mapping[str, Iterable[str]], max_n: int = 3) -> CharNGramClassifier:
    counts = {}
    for lang, texts in seeds.items():
        c: Counter = Counter()
        for text in texts:
            c.update(char_ngrams(normalize_whitespace(text), max_n))
        if not c:
            raise ValueError(f"seed corpus for {lang!r} is empty")
        counts[lang] = c
    return CharNGramClassifier(counts, max_n)


def language_filter(
    records: Iterable[Record],
    expected_lang: Optional[str],
    classifier: LanguageClassifier,
    report: Optional[RejectionReport] = None,
    rejected: Optional[List] = None,
) -> Iterator[Record]:
    """Keep records whose predicted language matches the expected one.

    For monolingual records ``expected_lang`` (or, when None, the record's
    own tag) is the expected language.  Bitext pairs are checked on both
    sides against their own tags.  Rejected records are appended to
    ``rejected`` as ``(record, reason)`` when a list is given.
    """
    if expected_lang is not None and expected_lang not in classifier.languages:
        raise ValueError(
            f"unknown expected language {expected_lang!r}; classifier knows {classifier.languages}"
        )
    if report is None:
        report = RejectionReport()
    for record in records:
        if isinstance(record, BitextRecord):
            sides = [(record.src_text, record.src_lang), (record.tgt_text, record.tgt_lang)]
        else:
            sides = [(record.text, expected_lang or record.lang)]
        reason = None
        for text, lang in sides:
            if lang not in classifier.languages:
                raise ValueError(f"record {record.id}: no classifier model for {lang!r}")
            if not normalize_whitespace(text):
                reason = EMPTY
            elif classifier.predict(text) != lang:
                reason = WRONG_LANGUAGE
            if reason:
                break
        if reason:
            report[reason] += 1
            if rejected is not None:
                rejected.append((record, reason))
        else:
            report.kept += 1
            yield record
