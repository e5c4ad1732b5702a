import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from pairsieve.corpus import Provenance, Sentence, SentencePair, tokenize
from pairsieve.errors import ScoreDomainError, ScoringError
from pairsieve.lexical_tm import ExternalScoreTable
from pairsieve.scoring import (
    SCORE_HEADER,
    TableScorer,
    adequacy,
    combined_score,
    domain_score,
    dual_score,
    make_record,
    parse_record,
    read_score_file,
    score_corpus,
    score_corpus_to_file,
    write_score_file,
)

finite_h = st.floats(min_value=0.0, max_value=50.0, allow_nan=False)


def oracle_scores(h_fwd, h_rev, h_in, h_out, trusted):
    """Straight-line re-implementation of the score algebra, kept independent
    of the module under test."""
    dual = abs(h_fwd - h_rev) + (h_fwd + h_rev) / 2
    adq = 1.0 if trusted else math.exp(-dual)
    dom_prime = math.exp(-(h_in - h_out))
    dom = dom_prime if dom_prime < 1.0 else 1.0
    return adq, dom, adq * dom


def test_dual_score_hand_values():
    assert dual_score(0.0, 0.0) == 0.0
    assert dual_score(1.0, 1.0) == pytest.approx(1.0, abs=1e-12)
    assert dual_score(1.0, 3.0) == pytest.approx(4.0, abs=1e-12)


def test_adequacy_hand_values():
    assert adequacy(0.0, 0.0) == 1.0
    assert adequacy(1.0, 1.0) == pytest.approx(math.exp(-1), abs=1e-9)
    assert adequacy(1.0, 3.0) == pytest.approx(math.exp(-4), abs=1e-9)


def test_domain_score_hand_values():
    assert domain_score(1.0, 1.0) == 1.0
    assert domain_score(2.0, 1.0) == pytest.approx(math.exp(-1), abs=1e-9)
    assert domain_score(0.5, 2.0) == 1.0  # clip branch


def test_combined_score_hand_values():
    assert combined_score(0.4, 0.75, trusted=True) == 0.75
    assert combined_score(0.5, 0.5) == 0.25
    assert combined_score(1.0, 1.0) == 1.0


@pytest.mark.parametrize("bad", [-0.1, float("inf"), float("nan")])
def test_entropy_inputs_are_validated(bad):
    with pytest.raises(ScoreDomainError):
        dual_score(bad, 1.0)
    with pytest.raises(ScoreDomainError):
        domain_score(1.0, bad)


@pytest.mark.parametrize("bad", [0.0, -0.5, 1.5])
def test_partial_score_inputs_are_validated(bad):
    with pytest.raises(ScoreDomainError):
        combined_score(bad, 0.5)


@settings(max_examples=200)
@given(a=finite_h, b=finite_h)
def test_adequacy_is_symmetric(a, b):
    assert adequacy(a, b) == adequacy(b, a)


@settings(max_examples=200)
@given(a=finite_h, b=finite_h)
def test_adequacy_range_and_extremum(a, b):
    adq = adequacy(a, b)
    assert 0.0 < adq <= 1.0
    if a == 0.0 and b == 0.0:
        assert adq == 1.0
    elif a + b > 1e-12:  # beyond exp() rounding noise
        assert adq < 1.0


@settings(max_examples=100)
@given(total=st.floats(min_value=0.1, max_value=20.0), split=st.floats(min_value=0.0, max_value=0.5))
def test_balanced_pairs_maximize_adequacy_at_fixed_sum(total, split):
    balanced = adequacy(total / 2, total / 2)
    skewed = adequacy(total * split, total * (1 - split))
    assert skewed <= balanced + 1e-15
    assert balanced == pytest.approx(math.exp(-total / 2), rel=1e-12)


@settings(max_examples=100)
@given(h_in=finite_h, h_out=finite_h)
def test_domain_clips_exactly_when_in_domain_wins(h_in, h_out):
    dom = domain_score(h_in, h_out)
    assert 0.0 < dom <= 1.0
    if h_in <= h_out:
        assert dom == 1.0
    elif h_in - h_out > 1e-12:  # beyond exp() rounding noise
        assert dom < 1.0


def make_pair(i, trusted=False):
    return SentencePair(
        id=i,
        src=tokenize(f"src {i}"),
        tgt=tokenize(f"tgt {i}"),
        provenance=Provenance.TRUSTED if trusted else Provenance.CANDIDATE,
    )


def test_score_corpus_matches_oracle_on_random_inputs():
    rng = random.Random(99)
    n = 1000
    h = [[rng.uniform(0, 30) for _ in range(n)] for _ in range(4)]
    trusted = [rng.random() < 0.2 for _ in range(n)]
    pairs = [make_pair(i, trusted[i]) for i in range(n)]
    scorers = [TableScorer(ExternalScoreTable(h[j])) for j in range(4)]
    records = list(score_corpus(pairs, *scorers))
    assert [r.pair_id for r in records] == list(range(n))
    for i, record in enumerate(records):
        adq, dom, combined = oracle_scores(h[0][i], h[1][i], h[2][i], h[3][i], trusted[i])
        assert record.adq == pytest.approx(adq, abs=1e-12)
        assert record.dom == pytest.approx(dom, abs=1e-12)
        assert record.combined == pytest.approx(combined, abs=1e-12)
        assert record.trusted == trusted[i]


def test_record_composition_example():
    record = make_record(0, 1.0, 1.0, 1.0, 1.0)
    assert record.adq == pytest.approx(math.exp(-1), abs=1e-12)
    assert record.dom == 1.0
    assert record.combined == pytest.approx(math.exp(-1), abs=1e-12)


def test_trusted_pair_keeps_only_its_domain_multiplier():
    record = make_record(7, 9.9, 0.3, 2.0, 1.0, trusted=True)
    assert record.adq == 1.0
    assert record.combined == pytest.approx(math.exp(-1), abs=1e-9)


def test_blank_target_scores_zero_with_flag():
    pairs = [
        SentencePair(id=0, src=tokenize("a"), tgt=tokenize("b")),
        SentencePair(id=1, src=tokenize("a"), tgt=tokenize("")),
    ]
    table = ExternalScoreTable([1.0, 1.0])
    records = list(score_corpus(pairs, *(TableScorer(table),) * 4))
    assert records[1].combined == 0.0
    assert records[1].flags == ("blank_tgt",)
    assert records[0].flags == ()


def test_overlength_side_scores_zero_with_flag():
    long_src = Sentence(tokens=["w"] * 9, raw="w " * 9)
    pairs = [SentencePair(id=0, src=long_src, tgt=tokenize("ok"))]
    table = ExternalScoreTable([1.0])
    (record,) = list(score_corpus(pairs, *(TableScorer(table),) * 4, max_tokens=8))
    assert record.combined == 0.0
    assert record.flags == ("overlength_src",)


def test_scorer_failure_names_the_pair():
    pairs = [make_pair(0), make_pair(1)]
    table = ExternalScoreTable([1.0])  # too short: pair 1 is off the table
    with pytest.raises(ScoringError, match="pair 1"):
        list(score_corpus(pairs, *(TableScorer(table),) * 4))


@settings(max_examples=50)
@given(
    scores=st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=2, max_size=30),
    scale=st.floats(min_value=0.1, max_value=5.0),
)
def test_sort_order_survives_increasing_transforms(scores, scale):
    def transform(x):
        return math.expm1(scale * x)  # strictly increasing

    base = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    mapped = sorted(range(len(scores)), key=lambda i: (-transform(scores[i]), i))
    assert base == mapped


def test_score_file_round_trip(tmp_path):
    records = [
        make_record(0, 1.0, 2.0, 0.5, 0.25),
        make_record(1, 0.0, 0.0, 1.0, 1.0, trusted=True),
    ]
    path = tmp_path / "scores.tsv"
    assert write_score_file(records, path) == 2
    text = path.read_text(encoding="utf-8")
    assert text.splitlines()[0] == "\t".join(SCORE_HEADER)
    loaded = list(read_score_file(path))
    assert [r.pair_id for r in loaded] == [0, 1]
    assert loaded[1].trusted is True
    assert loaded[0].combined == pytest.approx(records[0].combined, rel=1e-5)


def test_parse_record_rejects_bad_flags():
    line = "0\t1\t1\t1\t1\t0.5\t0.5\t0.25\tbogus"
    with pytest.raises(Exception, match="unknown flags"):
        parse_record(line, "x.tsv", 2)


def _write_corpus(tmp_path, n):
    src = tmp_path / "c.src"
    tgt = tmp_path / "c.tgt"
    rng = random.Random(1)
    with open(src, "w") as fs, open(tgt, "w") as ft:
        for i in range(n):
            words = [f"w{rng.randrange(20)}" for _ in range(rng.randint(1, 6))]
            fs.write(" ".join(words) + "\n")
            ft.write(" ".join(reversed(words)) + "\n")
    return src, tgt


def test_file_scoring_identical_across_worker_counts(tmp_path):
    n = 300
    src, tgt = _write_corpus(tmp_path, n)
    rng = random.Random(2)
    tables = [
        ExternalScoreTable([rng.uniform(0, 5) for _ in range(n)]) for _ in range(4)
    ]
    scorers = [TableScorer(t) for t in tables]
    outputs = []
    for workers in (1, 2, 4):
        out = tmp_path / f"scores.w{workers}.tsv"
        written = score_corpus_to_file(
            out, *scorers, src_path=src, tgt_path=tgt, workers=workers, shard_lines=64
        )
        assert written == n
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1] == outputs[2]
