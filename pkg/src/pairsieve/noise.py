"""Synthetic corruption of clean bitext and intrinsic filter evaluation.

The corruption taxonomy mirrors what web-crawled bitext actually contains:
misaligned segments, untranslated source copies, scrambled or truncated
targets, and wrong-language text. Corruption assignment is a pure function
of (seed, pair id), so a corrupted corpus is reproducible regardless of how
it is iterated or sharded.
"""

from __future__ import annotations

import math
import random
from collections.abc import Iterable
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .corpus import Sentence, SentencePair
from .errors import ConfigError, StructuralError
from .scoring import ScoreRecord

DEFAULT_NOISE_RATE = 0.2


class NoiseKind(Enum):
    MISALIGN = "misalign"
    COPY_SOURCE = "copy_source"
    SHUFFLE = "shuffle"
    TRUNCATE = "truncate"
    WRONG_LANGUAGE = "wrong_language"


def uniform_mix() -> dict[NoiseKind, float]:
    return {kind: 1.0 / len(NoiseKind) for kind in NoiseKind}


@dataclass
class NoiseSpec:
    """How much to corrupt and with what blend of corruption kinds."""

    rate: float = DEFAULT_NOISE_RATE
    mix: dict[NoiseKind, float] = field(default_factory=uniform_mix)
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.rate <= 1.0:
            raise ConfigError(f"noise rate must be in [0, 1], got {self.rate!r}")
        if any(p < 0 for p in self.mix.values()):
            raise ConfigError("mix proportions must be >= 0")
        total = math.fsum(self.mix.values())
        if abs(total - 1.0) > 1e-9:
            raise ConfigError(f"mix proportions must sum to 1, got {total!r}")


@dataclass
class LabeledPair:
    pair: SentencePair
    clean: bool
    kind: NoiseKind | None = None


def _made_sentence(tokens: list[str]) -> Sentence:
    return Sentence(tokens=tokens, raw=" ".join(tokens))


def _pair_rng(seed: int, pair_id: int, purpose: str) -> random.Random:
    # String seeding hashes with sha512, so this is stable across processes.
    return random.Random(f"{seed}:{pair_id}:{purpose}")


def inject_noise(
    clean: Iterable[SentencePair],
    spec: NoiseSpec,
    third_language: list[Sentence] | None = None,
) -> list[LabeledPair]:
    """Corrupt exactly round(rate * n) pairs, kinds drawn per the mix.

    Misaligned pairs take their target from a different pair (never their
    own, rotation over the misaligned set guarantees it). Truncation keeps a
    random non-empty prefix of at most half the target tokens, so one-token
    targets pass through unchanged. Deterministic for a fixed spec and seed.
    """
    pairs = list(clean)
    n = len(pairs)
    if n < 10:
        raise ConfigError(f"need at least 10 clean pairs to corrupt, got {n}")
    k = round(spec.rate * n)
    if spec.rate > 0 and k < 1:
        raise ConfigError(f"rate {spec.rate} yields no corrupted pairs at n={n}")

    kinds = sorted(spec.mix, key=lambda kind: kind.value)
    weights = [spec.mix[kind] for kind in kinds]
    if (
        k > 0
        and spec.mix.get(NoiseKind.WRONG_LANGUAGE, 0.0) > 0
        and not third_language
    ):
        raise ConfigError(
            "wrong-language corruption requested but no third-language "
            "sentences were supplied"
        )

    by_id = sorted(pairs, key=lambda p: p.id)
    ids = [p.id for p in by_id]
    if len(set(ids)) != n:
        raise StructuralError("pair ids must be unique")

    master = random.Random(f"{spec.seed}:assignment")
    corrupted_ids = sorted(master.sample(ids, k))
    kind_of = {
        pair_id: _pair_rng(spec.seed, pair_id, "kind").choices(kinds, weights)[0]
        for pair_id in corrupted_ids
    }

    # Rotate targets within the misaligned set; a singleton borrows from its
    # successor in the full corpus instead.
    misaligned = [pid for pid in corrupted_ids if kind_of[pid] is NoiseKind.MISALIGN]
    pair_by_id = {p.id: p for p in by_id}
    donor_of: dict[int, int] = {}
    if len(misaligned) >= 2:
        for j, pid in enumerate(misaligned):
            donor_of[pid] = misaligned[(j + 1) % len(misaligned)]
    elif len(misaligned) == 1:
        pid = misaligned[0]
        pos = ids.index(pid)
        donor_of[pid] = ids[(pos + 1) % n]

    out: list[LabeledPair] = []
    for pair in by_id:
        if pair.id not in kind_of:
            out.append(LabeledPair(pair=pair, clean=True))
            continue
        kind = kind_of[pair.id]
        rng = _pair_rng(spec.seed, pair.id, "corrupt")
        src, tgt = pair.src, pair.tgt
        if kind is NoiseKind.MISALIGN:
            new_tgt = pair_by_id[donor_of[pair.id]].tgt
        elif kind is NoiseKind.COPY_SOURCE:
            new_tgt = _made_sentence(list(src.tokens))
        elif kind is NoiseKind.SHUFFLE:
            tokens = list(tgt.tokens)
            if len(set(tokens)) > 1:
                while tokens == tgt.tokens:
                    rng.shuffle(tokens)
            new_tgt = _made_sentence(tokens)
        elif kind is NoiseKind.TRUNCATE:
            keep = rng.randint(1, max(1, len(tgt.tokens) // 2))
            new_tgt = _made_sentence(list(tgt.tokens[:keep]))
        else:
            new_tgt = rng.choice(third_language)
        corrupted = SentencePair(
            id=pair.id, src=src, tgt=new_tgt, provenance=pair.provenance
        )
        out.append(LabeledPair(pair=corrupted, clean=False, kind=kind))
    return out


@dataclass
class PairLabel:
    pair_id: int
    clean: bool
    kind: NoiseKind | None = None


def labels_of(labeled: Iterable[LabeledPair]) -> list[PairLabel]:
    return [
        PairLabel(pair_id=lp.pair.id, clean=lp.clean, kind=lp.kind) for lp in labeled
    ]


def write_labels(labels: Iterable[PairLabel], path: str | Path) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for label in labels:
            status = "clean" if label.clean else "corrupted"
            kind = label.kind.value if label.kind is not None else "-"
            fh.write(f"{label.pair_id}\t{status}\t{kind}\n")
            n += 1
    return n


def read_labels(path: str | Path) -> list[PairLabel]:
    labels = []
    kinds = {kind.value: kind for kind in NoiseKind}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 3 or parts[1] not in ("clean", "corrupted"):
                raise StructuralError(
                    f"{path}: line {line_no}: expected 'id\\tclean|corrupted\\tkind'"
                )
            try:
                pair_id = int(parts[0])
            except ValueError:
                raise StructuralError(
                    f"{path}: line {line_no}: non-integer id {parts[0]!r}"
                ) from None
            kind = None
            if parts[2] != "-":
                if parts[2] not in kinds:
                    raise StructuralError(
                        f"{path}: line {line_no}: unknown corruption kind {parts[2]!r}"
                    )
                kind = kinds[parts[2]]
            labels.append(PairLabel(pair_id=pair_id, clean=parts[1] == "clean", kind=kind))
    return labels


@dataclass
class FilterReport:
    """Rank-based measures of how well a score separates clean from corrupted."""

    n: int
    n_clean: int
    n_corrupted: int
    auc: float
    precision_at_clean: float
    recall_at_clean: float
    mean_combined_clean: float
    mean_combined_by_kind: dict[str, float]


def ranking_auc(scored: list[tuple[float, bool]]) -> float:
    """Probability a random clean item outranks a random corrupted one.

    Computed from average ranks so tied scores contribute one half, the
    Mann-Whitney convention; identical floored scores do occur in practice.
    """
    n_clean = sum(1 for _, clean in scored if clean)
    n_corrupted = len(scored) - n_clean
    if n_clean == 0 or n_corrupted == 0:
        raise StructuralError("AUC needs at least one clean and one corrupted item")
    by_score = sorted(scored, key=lambda sc: sc[0])
    clean_rank_sum = 0.0
    i = 0
    while i < len(by_score):
        j = i
        while j < len(by_score) and by_score[j][0] == by_score[i][0]:
            j += 1
        avg_rank = (i + 1 + j) / 2  # ranks are 1-based: mean of i+1 .. j
        clean_rank_sum += avg_rank * sum(1 for s, c in by_score[i:j] if c)
        i = j
    u = clean_rank_sum - n_clean * (n_clean + 1) / 2
    return u / (n_clean * n_corrupted)


def evaluate_filter(
    records: Iterable[ScoreRecord], labels: Iterable[PairLabel]
) -> FilterReport:
    """Score the filter against ground truth: AUC, precision/recall at the
    clean count, and mean combined score per corruption kind."""
    records = list(records)
    labels = list(labels)
    rec_ids = [r.pair_id for r in records]
    lab_ids = [l.pair_id for l in labels]
    if sorted(rec_ids) != sorted(lab_ids):
        extra = set(rec_ids) ^ set(lab_ids)
        raise StructuralError(
            f"score/label id mismatch; first differing ids: {sorted(extra)[:5]}"
        )
    label_by_id = {l.pair_id: l for l in labels}

    scored = [(r.combined, label_by_id[r.pair_id].clean) for r in records]
    n_clean = sum(1 for _, clean in scored if clean)
    n_corrupted = len(scored) - n_clean
    auc = ranking_auc(scored)

    k = n_clean
    ranked = sorted(records, key=lambda r: (-r.combined, r.pair_id))
    clean_in_top = sum(1 for r in ranked[:k] if label_by_id[r.pair_id].clean)
    precision = clean_in_top / k if k else 0.0
    recall = clean_in_top / n_clean if n_clean else 0.0

    sums: dict[str, float] = {}
    counts: dict[str, int] = {}
    for r in records:
        label = label_by_id[r.pair_id]
        key = "clean" if label.clean else label.kind.value
        sums[key] = sums.get(key, 0.0) + r.combined
        counts[key] = counts.get(key, 0) + 1
    means = {key: sums[key] / counts[key] for key in sums}

    return FilterReport(
        n=len(records),
        n_clean=n_clean,
        n_corrupted=n_corrupted,
        auc=auc,
        precision_at_clean=precision,
        recall_at_clean=recall,
        mean_combined_clean=means.get("clean", 0.0),
        mean_combined_by_kind={
            kind.value: means[kind.value] for kind in NoiseKind if kind.value in means
        },
    )


def write_report(report: FilterReport, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"n\t{report.n}\n")
        fh.write(f"n_clean\t{report.n_clean}\n")
        fh.write(f"n_corrupted\t{report.n_corrupted}\n")
        fh.write(f"auc\t{report.auc:.6g}\n")
        fh.write(f"precision_at_clean\t{report.precision_at_clean:.6g}\n")
        fh.write(f"recall_at_clean\t{report.recall_at_clean:.6g}\n")
        fh.write(f"mean_combined_clean\t{report.mean_combined_clean:.6g}\n")
        for kind, mean in sorted(report.mean_combined_by_kind.items()):
            fh.write(f"mean_combined_{kind}\t{mean:.6g}\n")
