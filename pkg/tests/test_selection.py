import random

import pytest
from hypothesis import given, settings, strategies as st

from pairsieve.corpus import Sentence, SentencePair
from pairsieve.errors import StructuralError
from pairsieve.scoring import ScoreRecord, make_record
from pairsieve.selection import (
    check_weight_alignment,
    emit_weights,
    extract_selected,
    read_weights,
    select_by_threshold,
    select_top_n,
)


def rec(pair_id, combined):
    return ScoreRecord(
        pair_id=pair_id,
        h_fwd=1.0,
        h_rev=1.0,
        h_in=1.0,
        h_out=1.0,
        adq=1.0,
        dom=1.0,
        combined=combined,
    )


def test_top_n_hand_sort():
    result = select_top_n([rec(0, 0.9), rec(1, 0.1), rec(2, 0.5)], 2)
    assert result.selected_ids == [0, 2]
    assert result.cutoff_score == 0.5
    assert result.n_returned == 2


def test_top_n_ties_break_by_ascending_id():
    result = select_top_n([rec(0, 0.5), rec(1, 0.5), rec(2, 0.5)], 2)
    assert result.selected_ids == [0, 1]


def test_top_n_larger_than_corpus():
    result = select_top_n([rec(i, 0.1 * i) for i in range(3)], 10)
    assert result.n_returned == 3
    assert result.selected_ids == [0, 1, 2]
    assert result.n_requested == 10


def test_threshold_selection():
    records = [rec(0, 0.9), rec(1, 0.1), rec(2, 0.5)]
    assert select_by_threshold(records, 0.5).selected_ids == [0, 2]
    assert select_by_threshold(records, 0.0).selected_ids == [0, 1, 2]
    assert select_by_threshold([rec(0, 1.0), rec(1, 0.99)], 1.0).selected_ids == [0]


@settings(max_examples=60)
@given(
    scores=st.lists(
        st.floats(min_value=0.0, max_value=1.0, allow_nan=False), max_size=60
    ),
    n=st.integers(min_value=0, max_value=70),
)
def test_partition_property(scores, n):
    records = [rec(i, s) for i, s in enumerate(scores)]
    result = select_top_n(records, n)
    selected = set(result.selected_ids)
    rejected = [r for r in records if r.pair_id not in selected]
    assert len(selected) == min(n, len(records))
    assert sorted(result.selected_ids) == result.selected_ids
    if selected and rejected:
        assert min(scores[i] for i in selected) >= max(r.combined for r in rejected)


def test_external_sort_path_matches_in_memory_path():
    rng = random.Random(4)
    records = [rec(i, rng.random()) for i in range(5000)]
    in_memory = select_top_n(records, 700)
    spilled = select_top_n(records, 700, max_in_memory=256)
    assert in_memory.selected_ids == spilled.selected_ids
    assert in_memory.cutoff_score == spilled.cutoff_score


@settings(max_examples=40)
@given(
    scores=st.lists(
        st.floats(min_value=0.0, max_value=1.0, allow_nan=False),
        min_size=1,
        max_size=50,
    ),
    n=st.integers(min_value=0, max_value=25),
)
def test_selection_invariant_under_increasing_transform(scores, n):
    records = [rec(i, s) for i, s in enumerate(scores)]
    transformed = [rec(i, s / (1.0 + s)) for i, s in enumerate(scores)]
    assert (
        select_top_n(records, n).selected_ids
        == select_top_n(transformed, n).selected_ids
    )


def test_selection_is_idempotent():
    rng = random.Random(8)
    records = [rec(i, rng.random()) for i in range(100)]
    first = select_top_n(records, 40)
    kept = [r for r in records if r.pair_id in set(first.selected_ids)]
    second = select_top_n(kept, 40)
    assert second.selected_ids == first.selected_ids


def test_emit_weights_formats_integers_bare(tmp_path):
    path = tmp_path / "w.txt"
    emit_weights([rec(0, 1.0), rec(1, 0.25)], 2, path)
    assert path.read_text(encoding="utf-8") == "1\n0.25\n"


def test_emit_weights_gap_names_missing_id(tmp_path):
    with pytest.raises(StructuralError, match="missing id 1"):
        emit_weights([rec(0, 1.0), rec(2, 0.5)], 3, tmp_path / "w.txt")


def test_emit_weights_duplicate_id(tmp_path):
    with pytest.raises(StructuralError, match="duplicate"):
        emit_weights([rec(0, 1.0), rec(0, 0.5)], 2, tmp_path / "w.txt")


def test_emit_weights_short_record_stream(tmp_path):
    with pytest.raises(StructuralError, match="missing id 2"):
        emit_weights([rec(0, 1.0), rec(1, 0.5)], 3, tmp_path / "w.txt")


def test_weight_alignment_check(tmp_path):
    path = tmp_path / "w.txt"
    emit_weights([rec(i, 0.5) for i in range(4)], 4, path)
    assert check_weight_alignment(path, 4) == 4
    with pytest.raises(StructuralError):
        check_weight_alignment(path, 5)


def test_read_weights_round_trip(tmp_path):
    path = tmp_path / "w.txt"
    emit_weights([rec(0, 1.0), rec(1, 0.367879)], 2, path)
    assert read_weights(path) == [1.0, 0.367879]


def corpus_pairs(n):
    return [
        SentencePair(
            id=i,
            src=Sentence(tokens=[f"s{i}"], raw=f"s{i}"),
            tgt=Sentence(tokens=[f"t{i}"], raw=f"t{i}"),
        )
        for i in range(n)
    ]


def test_extract_selected_preserves_order(tmp_path):
    selection = select_top_n([rec(0, 0.9), rec(1, 0.1), rec(2, 0.5)], 2)
    n = extract_selected(
        corpus_pairs(3),
        selection,
        src_path=tmp_path / "o.src",
        tgt_path=tmp_path / "o.tgt",
    )
    assert n == 2
    assert (tmp_path / "o.src").read_text(encoding="utf-8") == "s0\ns2\n"
    assert (tmp_path / "o.tgt").read_text(encoding="utf-8") == "t0\nt2\n"


def test_extract_empty_selection(tmp_path):
    selection = select_top_n([], 5)
    n = extract_selected(
        corpus_pairs(3),
        selection,
        src_path=tmp_path / "o.src",
        tgt_path=tmp_path / "o.tgt",
    )
    assert n == 0
    assert (tmp_path / "o.src").read_text(encoding="utf-8") == ""


def test_extract_id_beyond_corpus_end(tmp_path):
    from pairsieve.selection import SelectionResult

    selection = SelectionResult(
        selected_ids=[5], cutoff_score=1.0, n_requested=1, n_returned=1
    )
    with pytest.raises(StructuralError, match="5"):
        extract_selected(
            corpus_pairs(3),
            selection,
            src_path=tmp_path / "o.src",
            tgt_path=tmp_path / "o.tgt",
        )


def test_extract_to_tsv(tmp_path):
    selection = select_top_n([rec(0, 0.9), rec(1, 0.95)], 1)
    extract_selected(corpus_pairs(2), selection, tsv_path=tmp_path / "o.tsv")
    assert (tmp_path / "o.tsv").read_text(encoding="utf-8") == "s1\tt1\n"
