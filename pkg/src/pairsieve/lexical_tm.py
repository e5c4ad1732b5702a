"""EM-trained word-translation tables and conditional cross-entropy scoring.

The model is the classic bag-of-words lexical translation model: a table
t(generated-word | conditioning-word) trained by expectation maximization,
one model per direction. It is the simplest model with a genuine conditional
P(y|x), which is all the downstream score algebra needs; externally computed
conditional cross-entropies can be substituted via :func:`load_external_scores`.

Scoring uses the same conventions as the language models: nats per token,
normalized by the token count of the generated side.
"""

from __future__ import annotations

import math
from collections.abc import Iterable
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .corpus import Sentence, SentencePair
from .errors import (
    EmptySentenceError,
    EmptySourceError,
    ExternalScoreError,
    IncompatibleModelError,
    ModelFormatError,
    TrainingError,
)

# The empty string can never collide with a real token (tokens are maximal
# non-whitespace runs), so it doubles as the NULL word key.
NULL = ""

PROB_FLOOR = 1e-9

_MAGIC = "lexical-tm"
_VERSION = 1

DEFAULT_ITERATIONS = 5
DEFAULT_MIN_GAIN = 1e-6  # nats per pair; early-stop cutoff

EmTrace = list[float]


class Direction(Enum):
    """Which corpus side conditions the model: fwd = P(tgt|src), rev = P(src|tgt)."""

    FORWARD = "fwd"
    REVERSE = "rev"


@dataclass
class LexicalTranslationModel:
    """t(generated | conditioning) probability table.

    Every row sums to 1; trained tables are treated as immutable, so
    concurrent read-only queries are safe.
    """

    table: dict[str, dict[str, float]]
    use_null: bool
    direction: Direction

    def prob(self, gen_word: str, cond_word: str) -> float:
        row = self.table.get(cond_word)
        if row is None:
            return 0.0
        return row.get(gen_word, 0.0)


def _oriented(pair: SentencePair, direction: Direction) -> tuple[Sentence, Sentence]:
    """Return (conditioning, generated) sentences for the given direction."""
    if direction is Direction.FORWARD:
        return pair.src, pair.tgt
    return pair.tgt, pair.src


def train_model1(
    parallel: Iterable[SentencePair],
    iterations: int = DEFAULT_ITERATIONS,
    use_null: bool = True,
    direction: Direction = Direction.FORWARD,
    min_gain: float | None = DEFAULT_MIN_GAIN,
) -> tuple[LexicalTranslationModel, EmTrace]:
    """Train a lexical translation table by EM from uniform initialization.

    The returned trace holds the corpus log-likelihood under the parameters
    at the start of each iteration (it falls out of the E-step normalizers),
    so EM guarantees it is non-decreasing. When ``min_gain`` is set, training
    stops once the per-pair likelihood gain drops below it; pass ``None`` to
    always run the full iteration count.

    Pairs with a blank side are skipped; if nothing usable remains, training
    fails.
    """
    if iterations < 1:
        raise TrainingError("iterations must be >= 1")

    oriented: list[tuple[list[str], list[str]]] = []
    for pair in parallel:
        cond, gen = _oriented(pair, direction)
        if cond.is_blank or gen.is_blank:
            continue
        cond_tokens = [NULL] + cond.tokens if use_null else list(cond.tokens)
        oriented.append((cond_tokens, list(gen.tokens)))
    if not oriented:
        raise TrainingError("no usable pairs: every pair had a blank side")

    # Uniform initialization over co-occurring generated words.
    cooc: dict[str, set[str]] = {}
    for cond_tokens, gen_tokens in oriented:
        for c in cond_tokens:
            targets = cooc.setdefault(c, set())
            targets.update(gen_tokens)
    table: dict[str, dict[str, float]] = {}
    for cond_tokens, gen_tokens in oriented:
        for c in cond_tokens:
            row = table.setdefault(c, {})
            init = 1.0 / len(cooc[c])
            for g in gen_tokens:
                if g not in row:
                    row[g] = init

    trace: EmTrace = []
    n_pairs = len(oriented)
    for _ in range(iterations):
        counts: dict[str, dict[str, float]] = {c: {} for c in table}
        totals: dict[str, float] = {c: 0.0 for c in table}
        log_likelihood = 0.0
        for cond_tokens, gen_tokens in oriented:
            len_norm = math.log(len(cond_tokens))
            for g in gen_tokens:
                z = 0.0
                for c in cond_tokens:
                    z += table[c][g]
                log_likelihood += math.log(z) - len_norm
                for c in cond_tokens:
                    share = table[c][g] / z
                    row = counts[c]
                    row[g] = row.get(g, 0.0) + share
                    totals[c] += share
        trace.append(log_likelihood)
        for c, row in counts.items():
            total = totals[c]
            table[c] = {g: v / total for g, v in row.items()}
        if min_gain is not None and len(trace) >= 2:
            if trace[-1] - trace[-2] < min_gain * n_pairs:
                break

    model = LexicalTranslationModel(table=table, use_null=use_null, direction=direction)
    return model, trace


_EMPTY_ROW: dict[str, float] = {}


def cond_cross_entropy(
    tm: LexicalTranslationModel, x: Sentence, y: Sentence
) -> float:
    """Word-normalized -log P(y|x)/|y| in nats under the bag-of-words model.

    Each token probability is (1/(|x|+null)) * sum over source words of
    t(y_t|x_s), floored at 1e-9 before the log so unseen words yield large
    but finite scores and the downstream sort stays total. fsum keeps the
    result exactly invariant under permutations of either side.
    """
    if not y.tokens:
        raise EmptySentenceError("cannot score an empty generated sentence")
    if not x.tokens and not tm.use_null:
        raise EmptySourceError(
            "empty conditioning sentence and the model has no NULL word"
        )
    cond_tokens = [NULL] + x.tokens if tm.use_null else x.tokens
    table = tm.table
    norm = len(cond_tokens)
    log_probs = []
    for g in y.tokens:
        mass = math.fsum(table.get(c, _EMPTY_ROW).get(g, 0.0) for c in cond_tokens)
        log_probs.append(math.log(max(mass / norm, PROB_FLOOR)))
    return -math.fsum(log_probs) / len(y.tokens)


def save_tm(tm: LexicalTranslationModel, path: str | Path) -> None:
    """Write the table as versioned TSV rows (cond, gen, probability).

    Rows are sorted so output is byte-identical across runs; probabilities
    are written with repr and therefore reload exactly.
    """
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{_MAGIC}\t{_VERSION}\n")
        fh.write(f"direction\t{tm.direction.value}\n")
        fh.write(f"null\t{int(tm.use_null)}\n")
        n_rows = sum(len(row) for row in tm.table.values())
        fh.write(f"rows\t{n_rows}\n")
        for cond in sorted(tm.table):
            row = tm.table[cond]
            for gen in sorted(row):
                fh.write(f"{cond}\t{gen}\t{row[gen]!r}\n")


def load_tm(path: str | Path) -> LexicalTranslationModel:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()

    def fail(line_no: int, why: str) -> ModelFormatError:
        return ModelFormatError(f"{path}: line {line_no}: {why}")

    if not lines:
        raise fail(1, "empty model file")
    magic = lines[0].split("\t")
    if len(magic) != 2 or magic[0] != _MAGIC or magic[1] != str(_VERSION):
        raise IncompatibleModelError(
            f"{path}: line 1: expected header '{_MAGIC}\\t{_VERSION}', "
            f"got {lines[0]!r}"
        )
    if len(lines) < 4:
        raise fail(len(lines) + 1, "truncated header")
    try:
        direction = Direction(lines[1].split("\t")[1])
    except (IndexError, ValueError):
        raise fail(2, f"bad direction header: {lines[1]!r}") from None
    null_parts = lines[2].split("\t")
    if len(null_parts) != 2 or null_parts[0] != "null" or null_parts[1] not in ("0", "1"):
        raise fail(3, f"bad null header: {lines[2]!r}")
    use_null = null_parts[1] == "1"
    rows_parts = lines[3].split("\t")
    if len(rows_parts) != 2 or rows_parts[0] != "rows":
        raise fail(4, f"bad rows header: {lines[3]!r}")
    try:
        n_rows = int(rows_parts[1])
    except ValueError:
        raise fail(4, f"non-integer row count: {rows_parts[1]!r}") from None

    if 4 + n_rows > len(lines):
        raise fail(len(lines) + 1, "truncated row section")
    table: dict[str, dict[str, float]] = {}
    for idx in range(4, 4 + n_rows):
        parts = lines[idx].split("\t")
        if len(parts) != 3:
            raise fail(idx + 1, f"expected 'cond\\tgen\\tprob', got {lines[idx]!r}")
        cond, gen, prob_text = parts
        try:
            prob = float(prob_text)
        except ValueError:
            raise fail(idx + 1, f"non-numeric probability: {prob_text!r}") from None
        table.setdefault(cond, {})[gen] = prob
    if 4 + n_rows < len(lines):
        raise fail(4 + n_rows + 1, "trailing content after row section")

    return LexicalTranslationModel(table=table, use_null=use_null, direction=direction)


class ExternalScoreTable:
    """Precomputed per-pair cross-entropies, queried by pair id.

    The bridge for scores produced outside the toolkit (for example by neural
    translation models). Scores must use the shared convention: nats per
    token of the generated side, end event included.
    """

    def __init__(self, scores: list[float]):
        self._scores = scores

    def __len__(self) -> int:
        return len(self._scores)

    def lookup(self, pair_id: int) -> float:
        if 0 <= pair_id < len(self._scores):
            return self._scores[pair_id]
        raise ExternalScoreError(
            f"pair id {pair_id} not covered by the external score table "
            f"(ids 0..{len(self._scores) - 1})"
        )


def load_external_scores(path: str | Path) -> ExternalScoreTable:
    """Load a headerless TSV of (pair id, cross-entropy) with ids dense from 0."""
    entries: dict[int, float] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ExternalScoreError(
                    f"{path}: line {line_no}: expected 'id\\tscore', got {line!r}"
                )
            try:
                pair_id = int(parts[0])
            except ValueError:
                raise ExternalScoreError(
                    f"{path}: line {line_no}: non-integer id {parts[0]!r}"
                ) from None
            try:
                value = float(parts[1])
            except ValueError:
                raise ExternalScoreError(
                    f"{path}: line {line_no}: non-numeric score {parts[1]!r}"
                ) from None
            if not math.isfinite(value):
                raise ExternalScoreError(
                    f"{path}: line {line_no}: non-finite score {parts[1]!r}"
                )
            if pair_id in entries:
                raise ExternalScoreError(
                    f"{path}: line {line_no}: duplicate id {pair_id}"
                )
            entries[pair_id] = value
    if not entries:
        raise ExternalScoreError(f"{path}: empty score table")
    missing = next((i for i in range(len(entries)) if i not in entries), None)
    if missing is not None:
        raise ExternalScoreError(
            f"{path}: ids are not dense from 0: id {missing} is missing"
        )
    return ExternalScoreTable([entries[i] for i in range(len(entries))])
