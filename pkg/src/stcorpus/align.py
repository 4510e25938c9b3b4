"""IBM Model 1 lexical alignment and alignment-quality filtering of bitext.

Training is plain EM with a NULL source token.  An optional diagonal prior
``exp(-lam * |i/I - j/J|)`` (NULL weighted 1) reweights the link posteriors
the way fast_align does, with ``lam`` held fixed.
"""

from __future__ import annotations

import math
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .lmselect import tokenize
from .textclean import BitextRecord

NULL = "<null>"
FLOOR = 1e-12
SHARD_SIZE = 256
TABLE_FORMAT = "#stcorpus-ttable"
TABLE_VERSION = 1

Pair = Tuple[Sequence[str], Sequence[str]]


@dataclass
class TranslationTable:
    """``probs[e][f]`` holds t(f | e); missing entries read as ``FLOOR``."""

    probs: Dict[str, Dict[str, float]]
    diagonal_lambda: Optional[float] = None
    log_likelihoods: List[float] = field(default_factory=list)

    def t(self, f: str, e: str) -> float:
        row = self.probs.get(e)
        if row is None:
            return FLOOR
        return row.get(f, FLOOR)

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as out:
            out.write(f"{TABLE_FORMAT}\t{TABLE_VERSION}\n")
            out.write(f"#lambda\t{'' if self.diagonal_lambda is None else repr(self.diagonal_lambda)}\n")
            for e in sorted(self.probs):
                row = self.probs[e]
                for f in sorted(row):
                    out.write(f"{e}\t{f}\t{row[f]!r}\n")

    @classmethod
    def read(cls, path) -> "TranslationTable":
        with open(path, encoding="utf-8") as src:
            if src.readline().rstrip("\n") != f"{TABLE_FORMAT}\t{TABLE_VERSION}":
                raise ValueError(f"{path}: not a translation table (v{TABLE_VERSION})")
            key, lam = src.readline().rstrip("\n").split("\t")
            if key != "#lambda":
                raise ValueError(f"{path}: missing #lambda line")
            probs: Dict[str, Dict[str, float]] = defaultdict(dict)
            for line in src:
                e, f, p = line.rstrip("\n").split("\t")
                probs[e][f] = float(p)
        return cls(dict(probs), float(lam) if lam else None)


def link_weights(n_src: int, j: int, n_tgt: int, lam: Optional[float]) -> List[float]:
    """Normalized prior over source positions ``0..n_src`` (0 is NULL) for
    target position ``j`` (1-based)."""
    if not lam or n_src == 0:
        return [1.0 / (n_src + 1)] * (n_src + 1)
    w = [1.0] + [math.exp(-lam * abs(i / n_src - j / n_tgt)) for i in range(1, n_src + 1)]
    z = sum(w)
    return [x / z for x in w]


def _estep(shard: Sequence[Pair], table: Optional[TranslationTable], uniform: float, lam):
    counts: Dict[str, Dict[str, float]] = defaultdict(lambda: defaultdict(float))
    ll = 0.0
    for src, tgt in shard:
        src = [NULL, *src]
        n_tgt = len(tgt)
        for j, f in enumerate(tgt, start=1):
            prior = link_weights(len(src) - 1, j, n_tgt, lam)
            if table is None:
                scores = [a * uniform for a in prior]
            else:
                scores = [a * table.t(f, e) for a, e in zip(prior, src)]
            z = sum(scores)
            ll += math.log(z)
            for e, s in zip(src, scores):
                counts[e][f] += s / z
    return counts, ll


def _shards(pairs: Sequence[Pair], size: int) -> List[Sequence[Pair]]:
    return [pairs[i : i + size] for i in range(0, len(pairs), size)]


def _run_estep(pairs, table, uniform, lam, shard_size, workers):
    shards = _shards(pairs, shard_size)
    if workers > 1 and len(shards) > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(lambda s: _estep(s, table, uniform, lam), shards))
    else:
        results = [_estep(s, table, uniform, lam) for s in shards]
    # reduce in shard order so the sums do not depend on the worker count
    total: Dict[str, Dict[str, float]] = defaultdict(lambda: defaultdict(float))
    ll = 0.0
    for counts, shard_ll in results:
        ll += shard_ll
        for e, row in counts.items():
            acc = total[e]
            for f, c in row.items():
                acc[f] += c
    return total, ll


def train_model1(
    pairs: Iterable[Pair],
    iterations: int = 5,
    diagonal_lambda: Optional[float] = None,
    shard_size: int = SHARD_SIZE,
    workers: int = 1,
) -> TranslationTable:
    """EM training of t(f | e) on tokenized ``(source, target)`` pairs.

    ``log_likelihoods[k]`` is the corpus log-likelihood after ``k``
    iterations (index 0 is the uniform start).  Results are bit-identical
    for any ``workers``; changing ``shard_size`` changes the floating-point
    summation order, so tables then agree only to about 1e-12.
    """
    if iterations < 1:
        raise ValueError(f"iterations must be >= 1, got {iterations}")
    if diagonal_lambda is not None and diagonal_lambda < 0:
        raise ValueError(f"diagonal lambda must be >= 0, got {diagonal_lambda}")
    pairs = [(list(s), list(t)) for s, t in pairs]
    pairs = [p for p in pairs if p[1]]
    if not pairs:
        raise ValueError("cannot train on an empty bitext")
    target_vocab = {f for _, tgt in pairs for f in tgt}
    uniform = 1.0 / len(target_vocab)

    table = None
    history = []
    for _ in range(iterations):
        counts, ll = _run_estep(pairs, table, uniform, diagonal_lambda, shard_size, workers)
        history.append(ll)
        probs = {}
        for e, row in counts.items():
            z = sum(row.values())
            probs[e] = {f: c / z for f, c in row.items()}
        table = TranslationTable(probs, diagonal_lambda)
    _, ll = _run_estep(pairs, table, uniform, diagonal_lambda, shard_size, workers)
    history.append(ll)
    table.log_likelihoods = history
    return table


def tokenize_pair(record: BitextRecord) -> Pair:
    return tokenize(record.src_text, record.src_lang), tokenize(record.tgt_text, record.tgt_lang)


@dataclass(frozen=True)
class Link:
    target: int
    source: Optional[int]  # 0-based source position, None for NULL
    posterior: float


@dataclass
class AlignmentResult:
    links: List[Link]

    @property
    def quality(self) -> float:
        return alignment_quality(self)


def align_viterbi(table: TranslationTable, pair: Pair) -> AlignmentResult:
    """Best source position per target token under the model's link posterior.

    Ties go to the smallest source position; NULL wins only outright.
    """
    src, tgt = pair
    if not tgt:
        raise ValueError("cannot align an empty target sentence")
    links = []
    for j, f in enumerate(tgt, start=1):
        prior = link_weights(len(src), j, len(tgt), table.diagonal_lambda)
        null_score = prior[0] * table.t(f, NULL)
        scores = [a * table.t(f, e) for a, e in zip(prior[1:], src)]
        z = null_score + sum(scores)
        best = None
        if scores:
            best = max(range(len(scores)), key=lambda i: (scores[i], -i))
        if best is None or null_score > scores[best]:
            links.append(Link(j - 1, None, null_score / z))
        else:
            links.append(Link(j - 1, best, scores[best] / z))
    return AlignmentResult(links)


def alignment_quality(result: AlignmentResult, posterior_floor: float = 0.5) -> float:
    """Share of target tokens with a non-NULL link of posterior >= ``posterior_floor``."""
    if not result.links:
        raise ValueError("alignment has no links")
    good = sum(1 for l in result.links if l.source is not None and l.posterior >= posterior_floor)
    return good / len(result.links)


def filter_bottom_fraction(qualities: Sequence[float], fraction: float = 0.2) -> List[int]:
    """Indices kept after dropping the ``floor(fraction * N)`` lowest-quality items.

    Among equal qualities the earlier item is dropped first.  Kept indices
    come back in input order.
    """
    if not 0.0 <= fraction < 1.0:
        raise ValueError(f"fraction must be in [0, 1), got {fraction}")
    n = len(qualities)
    # the epsilon keeps e.g. 0.29 * 100 from flooring to 28
    k = math.floor(fraction * n + 1e-9)
    ranked = sorted(range(n), key=lambda i: (qualities[i], i))
    removed = set(ranked[:k])
    return [i for i in range(n) if i not in removed]
