import math
import random
from collections import Counter

import pytest
from hypothesis import given
from hypothesis import strategies as st

from stcorpus.textclean import (
    BitextRecord,
    CleanRules,
    RejectionReport,
    SeenKeys,
    SentenceRecord,
    clean,
    dedup_key,
    deduplicate,
    language_filter,
    train_langid,
)

EN_SEEDS = [
    "the cat sat on the mat",
    "this is a sentence in english",
    "where is the train station",
    "the weather is nice today and we walk",
    "she reads a book every evening",
]
DE_SEEDS = [
    "die katze sitzt auf der matte",
    "das ist ein satz auf deutsch",
    "wo ist der bahnhof bitte",
    "das wetter ist heute schön und wir gehen",
    "sie liest jeden abend ein buch",
    "der hund läuft über die straße",
]


def rec(text, lang="en", id="r"):
    return SentenceRecord(id, lang, text)


def run_clean(records, rules=CleanRules()):
    report = RejectionReport()
    kept = list(clean(records, rules, report))
    return kept, report


class TestClean:
    def test_token_length_en(self):
        kept, report = run_clean([rec("a" * 51), rec("b" * 50)])
        assert [r.text for r in kept] == ["b" * 50]
        assert report == {"token-length": 1}

    def test_token_length_ja(self):
        kept, report = run_clean([rec("あ" * 151, "ja"), rec("い" * 150, "ja"), rec("中" * 151, "zh")])
        assert [r.text for r in kept] == ["い" * 150]
        assert report["token-length"] == 2

    def test_url(self):
        kept, report = run_clean([rec("see https://example.com now"), rec("go to http://x.org")])
        assert kept == [] and report == {"url": 2}

    def test_markup(self):
        kept, report = run_clean([rec("some <b>bold</b> text")])
        assert kept == [] and report == {"markup": 1}

    def test_clean_sentence_unchanged(self):
        kept, report = run_clean([rec("Hello world.")])
        assert kept == [rec("Hello world.")] and report.rejected == 0

    def test_nonprinting(self):
        for ch in ["\x00", "​", "", "\x07", "\n"]:
            kept, report = run_clean([rec(f"bad{ch}text")])
            assert kept == [] and report == {"nonprinting": 1}, repr(ch)

    def test_tab_and_whitespace_normalized(self):
        kept, _ = run_clean([rec("  a\t\tb   c ")])
        assert kept[0].text == "a b c"

    def test_invalid_and_empty(self):
        kept, report = run_clean([None, {"id": 1}, SentenceRecord("x", "en", 5), rec("   ")])
        assert kept == []
        assert report == {"invalid": 3, "empty": 1}

    def test_bitext_either_side(self):
        pairs = [
            BitextRecord("1", "en", "fine", "de", "gut"),
            BitextRecord("2", "en", "fine", "de", "x" * 51),
            BitextRecord("3", "en", "http://a", "de", "gut"),
        ]
        kept, report = run_clean(pairs)
        assert [p.id for p in kept] == ["1"]
        assert report == {"token-length": 1, "url": 1}

    @given(st.lists(st.text(max_size=80), max_size=30))
    def test_idempotent_and_conserving(self, texts):
        records = [rec(t, ("en", "ja")[i % 2], str(i)) for i, t in enumerate(texts)]
        kept, report = run_clean(records)
        assert report.kept == len(kept)
        assert sum(report.values()) == len(records) - len(kept)
        again, report2 = run_clean(kept)
        assert again == kept and report2.rejected == 0


class TestDedup:
    def test_whitespace_duplicates(self):
        out = list(deduplicate([rec("a b", id="1"), rec("a  b", id="2"), rec("c", id="3")]))
        assert [r.id for r in out] == ["1", "3"]

    def test_case_preserved(self):
        assert len(list(deduplicate([rec("A"), rec("a")]))) == 2

    def test_unique_identity(self):
        records = [rec(str(i), id=str(i)) for i in range(50)]
        assert list(deduplicate(records)) == records

    def test_planted_duplicates_large(self):
        rng = random.Random(5)
        n_unique = 900_000
        texts = [f"sentence {i}" for i in range(n_unique)]
        planted = [texts[rng.randrange(n_unique)] for _ in range(100_000)]
        stream = texts + planted
        rng.shuffle(stream)
        # shuffling moves some planted copies ahead of their originals; only the count matters
        report = RejectionReport()
        out = sum(1 for _ in deduplicate((rec(t) for t in stream), report=report))
        assert out == n_unique
        assert report["duplicate"] == 100_000

    def test_shared_key_set_first_writer_wins(self):
        seen = SeenKeys()
        a = list(deduplicate([rec("x", id="a1"), rec("y", id="a2")], seen))
        b = list(deduplicate([rec("x", id="b1"), rec("z", id="b2")], seen))
        assert [r.id for r in a] == ["a1", "a2"] and [r.id for r in b] == ["b2"]

    @given(st.lists(st.sampled_from(["a", "a ", " a", "b", "b  c", "b c", "C"]), max_size=40))
    def test_properties(self, texts):
        records = [rec(t, id=str(i)) for i, t in enumerate(texts)]
        out = list(deduplicate(records))
        keys = [dedup_key(r) for r in out]
        assert len(keys) == len(set(keys))
        assert len(out) <= len(records)
        ids = [int(r.id) for r in out]
        assert ids == sorted(ids)


def brute_log_likelihood(text, seeds_by_lang, lang):
    """Independent recomputation of the add-one character n-gram score."""
    def grams(s):
        s = s.casefold()
        return [s[i : i + n] for n in (1, 2, 3) for i in range(len(s) - n + 1)]

    counts = {l: Counter(g for t in ts for g in grams(t)) for l, ts in seeds_by_lang.items()}
    vocab = set().union(*counts.values())
    denom = sum(counts[lang].values()) + len(vocab) + 1
    return sum(math.log((counts[lang][g] + 1) / denom) for g in grams(text))


class TestLangid:
    seeds = {"en": EN_SEEDS, "de": DE_SEEDS}

    def test_german_rejected_from_english_stream(self):
        clf = train_langid(self.seeds)
        text = "der hund läuft schnell"
        ll_en = brute_log_likelihood(text, self.seeds, "en")
        ll_de = brute_log_likelihood(text, self.seeds, "de")
        assert ll_de > ll_en
        assert clf.log_likelihood(text, "en") == pytest.approx(ll_en, rel=1e-12)
        assert clf.log_likelihood(text, "de") == pytest.approx(ll_de, rel=1e-12)
        report = RejectionReport()
        kept = list(language_filter([rec(text), rec("the dog runs fast")], "en", clf, report))
        assert [r.text for r in kept] == ["the dog runs fast"]
        assert report == {"wrong-language": 1}

    def test_single_language_always_kept(self):
        clf = train_langid({"en": EN_SEEDS})
        records = [rec(t) for t in ["der hund", "xyz", "猫"]]
        assert list(language_filter(records, "en", clf)) == records

    def test_empty_rejected(self):
        clf = train_langid(self.seeds)
        report = RejectionReport()
        assert list(language_filter([rec("")], "en", clf, report)) == []
        assert report == {"empty": 1}

    def test_unknown_expected_lang(self):
        clf = train_langid(self.seeds)
        with pytest.raises(ValueError):
            list(language_filter([rec("hi")], "fr", clf))

    def test_tie_goes_to_smallest_tag(self):
        clf = train_langid({"zz": ["ab"], "aa": ["ab"]})
        assert clf.predict("ab") == "aa"

    def test_bitext_checks_both_sides(self):
        clf = train_langid(self.seeds)
        good = BitextRecord("1", "en", "the cat is on the mat", "de", "die katze ist auf der matte")
        swapped = BitextRecord("2", "en", "die katze ist auf der matte", "de", "the cat is on the mat")
        assert [r.id for r in language_filter([good, swapped], None, clf)] == ["1"]

    def test_empty_seed_is_error(self):
        with pytest.raises(ValueError):
            train_langid({"en": [""]})
