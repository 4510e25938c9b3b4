"""Witten-Bell n-gram language models and cross-entropy-difference selection."""

from __future__ import annotations

import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"
RESERVED = frozenset({BOS, EOS, UNK})

MODEL_FORMAT = "stcorpus-ngram-wb"
MODEL_VERSION = 1

logger = logging.getLogger(__name__)


def tokenize(text: str, lang: str = "en") -> List[str]:
    """Whitespace tokens; ja/zh text is split into single non-space characters."""
    if lang in ("ja", "zh"):
        return [ch for ch in text if not ch.isspace()]
    return text.split()


class NGramCounts:
    """Raw n-gram counts for orders 1..``order``.

    ``counts[k]`` maps a ``k``-gram tuple ``(*context, word)`` to its count.
    Instances merge by addition, so shards can be counted independently.
    """

    def __init__(self, order: int = 3, include_eos: bool = True):
        if order < 1:
            raise ValueError(f"order must be >= 1, got {order}")
        self.order = order
        self.include_eos = include_eos
        self.counts: List[Counter] = [Counter() for _ in range(order + 1)]
        self.sentences = 0

    def add_sentence(self, tokens: Sequence[str]) -> None:
        seq = [BOS] * (self.order - 1) + list(tokens)
        if self.include_eos:
            seq.append(EOS)
        start = self.order - 1
        for pos in range(start, len(seq)):
            for k in range(1, self.order + 1):
                self.counts[k][tuple(seq[pos - k + 1 : pos + 1])] += 1
        self.sentences += 1

    def update(self, corpus: Iterable[Sequence[str]]) -> "NGramCounts":
        for tokens in corpus:
            self.add_sentence(tokens)
        return self

    def merge(self, other: "NGramCounts") -> "NGramCounts":
        if (other.order, other.include_eos) != (self.order, self.include_eos):
            raise ValueError("cannot merge counts with different order or EOS convention")
        for mine, theirs in zip(self.counts, other.counts):
            mine.update(theirs)
        self.sentences += other.sentences
        return self


class NGramModel:
    """Interpolated Witten-Bell language model.

    For a context ``h`` seen in training with ``N(h)`` tokens and ``T(h)``
    distinct continuations,
    ``p(w | h) = (c(h, w) + T(h) * p_lower(w)) / (N(h) + T(h))``; unseen
    contexts fall through to the lower order.  At the unigram level the
    reserved mass ``T / (N + T)`` goes entirely to ``<unk>``, so
    ``p(w) = c(w) / (N + T)`` for every seen word.
    """

    def __init__(self, counts: NGramCounts):
        if counts.sentences == 0 or not counts.counts[1]:
            raise ValueError("cannot train a language model on an empty corpus")
        self.order = counts.order
        self.include_eos = counts.include_eos
        self._counts = counts
        self.vocab = frozenset(g[0] for g in counts.counts[1])
        # context -> (N(h), T(h)); the unigram "context" is the empty tuple
        self._ctx: List[Dict[Tuple[str, ...], Tuple[int, int]]] = [dict() for _ in range(self.order + 1)]
        for k in range(1, self.order + 1):
            totals: Dict[Tuple[str, ...], List[int]] = defaultdict(lambda: [0, 0])
            for gram, c in counts.counts[k].items():
                t = totals[gram[:-1]]
                t[0] += c
                t[1] += 1
            self._ctx[k] = {h: (n, t) for h, (n, t) in totals.items()}

    @classmethod
    def train(cls, corpus: Iterable[Sequence[str]], order: int = 3, include_eos: bool = True) -> "NGramModel":
        return cls(NGramCounts(order, include_eos).update(corpus))

    @property
    def counts(self) -> NGramCounts:
        return self._counts

    def prob(self, word: str, context: Sequence[str] = ()) -> float:
        """Probability of ``word`` after ``context`` (most recent token last)."""
        if word not in self.vocab and word != UNK:
            word = UNK
        context = tuple(context)[-(self.order - 1):] if self.order > 1 else ()
        if len(context) < self.order - 1:
            context = (BOS,) * (self.order - 1 - len(context)) + context
        n, t = self._ctx[1][()]
        p = t / (n + t) if word == UNK else self._counts.counts[1][(word,)] / (n + t)
        for k in range(2, self.order + 1):
            h = context[len(context) - (k - 1):]
            stats = self._ctx[k].get(h)
            if stats is None:
                continue
            n, t = stats
            p = (self._counts.counts[k].get(h + (word,), 0) + t * p) / (n + t)
        return p

    def predictable(self) -> List[str]:
        """Every token with nonzero probability, ``<unk>`` included."""
        return sorted(self.vocab) + [UNK]

    def contexts(self, k: int) -> List[Tuple[str, ...]]:
        """Contexts of length ``k - 1`` observed in training."""
        return list(self._ctx[k])

    def token_logprobs(self, tokens: Sequence[str]) -> List[float]:
        """log2 probability of each scored position (tokens, then EOS if enabled)."""
        seq = list(tokens)
        targets = seq + [EOS] if (self.include_eos or not seq) else seq
        hist = [BOS] * (self.order - 1)
        out = []
        for word in targets:
            if word not in self.vocab and word != EOS:
                word = UNK
            out.append(math.log2(self.prob(word, hist)))
            hist.append(word)
        return out

    def cross_entropy(self, tokens: Sequence[str]) -> float:
        """Mean negative log2 probability per scored token (bits/token).

        An empty sentence is scored by its EOS alone, whatever the EOS flag.
        """
        lp = self.token_logprobs(tokens)
        return -sum(lp) / len(lp)

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(f"{MODEL_FORMAT} {MODEL_VERSION}\n")
            f.write(f"order\t{self.order}\n")
            f.write(f"include_eos\t{int(self.include_eos)}\n")
            f.write(f"sentences\t{self._counts.sentences}\n")
            for k in range(1, self.order + 1):
                for gram in sorted(self._counts.counts[k]):
                    f.write(f"{k}\t{' '.join(gram)}\t{self._counts.counts[k][gram]}\n")

    @classmethod
    def read(cls, path) -> "NGramModel":
        with open(path, encoding="utf-8") as f:
            head = f.readline().split()
            if head != [MODEL_FORMAT, str(MODEL_VERSION)]:
                raise ValueError(f"{path}: not a {MODEL_FORMAT} v{MODEL_VERSION} file")
            meta = {}
            for _ in range(3):
                key, value = f.readline().rstrip("\n").split("\t")
                meta[key] = int(value)
            counts = NGramCounts(meta["order"], bool(meta["include_eos"]))
            counts.sentences = meta["sentences"]
            for line in f:
                k, gram, c = line.rstrip("\n").split("\t")
                counts.counts[int(k)][tuple(gram.split(" "))] = int(c)
        return cls(counts)


def train_lm(corpus: Iterable[Sequence[str]], order: int = 3, include_eos: bool = True) -> NGramModel:
    return NGramModel.train(corpus, order, include_eos)


def cross_entropy(model: NGramModel, tokens: Sequence[str]) -> float:
    return model.cross_entropy(tokens)


def moore_lewis_score(in_lm: NGramModel, out_lm: NGramModel, tokens: Sequence[str]) -> float:
    """In-domain minus out-of-domain cross-entropy; lower means more in-domain."""
    if in_lm.order != out_lm.order:
        raise ValueError(f"order mismatch: in-domain {in_lm.order} vs out-of-domain {out_lm.order}")
    if in_lm.include_eos != out_lm.include_eos:
        raise ValueError("in-domain and out-of-domain models use different EOS conventions")
    return in_lm.cross_entropy(tokens) - out_lm.cross_entropy(tokens)


@dataclass
class Selection:
    indices: List[int]
    warnings: List[str]


def select_top_k(scores: Sequence[float], k: int) -> Selection:
    """The ``k`` lowest scores (earlier index wins ties), returned in input order.

    ``k`` outside ``[0, N]`` is clamped into that range, with a warning.
    """
    n = len(scores)
    warnings = []
    if k > n:
        warnings.append(f"budget k={k} exceeds pool size {n}; selecting all")
        k = n
    elif k <= 0:
        warnings.append(f"budget k={k} is not positive; selecting nothing")
        k = 0
    for w in warnings:
        logger.warning(w)
    ranked = sorted(range(n), key=lambda i: (scores[i], i))
    return Selection(sorted(ranked[:k]), warnings)


def select_threshold(scores: Sequence[float], threshold: float = 0.0) -> Selection:
    """Every record scoring strictly below ``threshold``."""
    return Selection([i for i, s in enumerate(scores) if s < threshold], [])


def select(scores: Sequence[float], k: Optional[int] = None, threshold: Optional[float] = None) -> Selection:
    if (k is None) == (threshold is None):
        raise ValueError("give exactly one of k or threshold")
    return select_top_k(scores, k) if k is not None else select_threshold(scores, threshold)
