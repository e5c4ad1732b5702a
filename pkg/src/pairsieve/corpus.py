"""Streaming ingestion, tokenization, sampling, and emission of text corpora.

Corpora are UTF-8, LF-terminated, one sentence per line, either as twin files
(``corpus.src`` + ``corpus.tgt``) or as 2-column TSV. Streams make a single
forward pass; memory use is independent of corpus length.
"""

from __future__ import annotations

import random
from collections.abc import Iterable, Iterator
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .errors import CorpusFormatError

DEFAULT_MAX_TOKENS = 250


class Provenance(Enum):
    TRUSTED = "trusted"
    CANDIDATE = "candidate"


@dataclass
class Sentence:
    """One line of text: whitespace tokens plus the verbatim raw line."""

    tokens: list[str]
    raw: str

    @property
    def is_blank(self) -> bool:
        return not self.tokens


@dataclass
class SentencePair:
    """An aligned (source, target) sentence with stable line-index identity."""

    id: int
    src: Sentence
    tgt: Sentence
    provenance: Provenance = Provenance.CANDIDATE


def tokenize(line: str, lowercase: bool = False) -> Sentence:
    """Split a line into maximal non-whitespace runs.

    Tokens are lowercased when asked; ``raw`` always keeps the original line.
    """
    text = line.lower() if lowercase else line
    return Sentence(tokens=text.split(), raw=line)


def _decode_line(data: bytes, path: str, line_no: int) -> str:
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise CorpusFormatError(
            f"{path}: line {line_no}: invalid UTF-8 at byte offset {exc.start}"
        ) from exc


def _iter_lines(path: str | Path) -> Iterator[str]:
    # Binary read so decode errors can name a byte offset within the line.
    with open(path, "rb") as fh:
        for line_no, data in enumerate(fh, start=1):
            yield _decode_line(data.rstrip(b"\n"), str(path), line_no)


def count_lines(path: str | Path) -> int:
    n = 0
    with open(path, "rb") as fh:
        for _ in fh:
            n += 1
    return n


class CorpusStream:
    """Single-consumer iterator of SentencePair with a running count.

    Not thread-safe; downstream parallelism shards id ranges instead.
    """

    def __init__(self, pairs: Iterator[SentencePair]):
        self._pairs = pairs
        self.count = 0

    def __iter__(self) -> CorpusStream:
        return self

    def __next__(self) -> SentencePair:
        pair = next(self._pairs)
        self.count += 1
        return pair


def read_parallel(
    src_path: str | Path,
    tgt_path: str | Path,
    lowercase: bool = False,
    provenance: Provenance = Provenance.CANDIDATE,
    eager_check: bool = True,
) -> CorpusStream:
    """Stream sentence pairs from twin one-sentence-per-line files.

    Line counts are compared up front (both sides are seekable files); the
    exhaustion check below stays as a backstop against concurrent appends.
    """
    if eager_check:
        n_src, n_tgt = count_lines(src_path), count_lines(tgt_path)
        if n_src != n_tgt:
            longer = src_path if n_src > n_tgt else tgt_path
            raise CorpusFormatError(
                f"line-count mismatch: {src_path} has {n_src} lines, "
                f"{tgt_path} has {n_tgt}; first unmatched line is "
                f"{min(n_src, n_tgt) + 1} of {longer}"
            )

    def gen() -> Iterator[SentencePair]:
        src_iter, tgt_iter = _iter_lines(src_path), _iter_lines(tgt_path)
        pair_id = 0
        while True:
            src_line = next(src_iter, None)
            tgt_line = next(tgt_iter, None)
            if src_line is None and tgt_line is None:
                return
            if src_line is None or tgt_line is None:
                longer = tgt_path if src_line is None else src_path
                raise CorpusFormatError(
                    f"line-count mismatch: {longer} continues past line "
                    f"{pair_id} of the shorter file; "
                    f"first unmatched line is {pair_id + 1}"
                )
            yield SentencePair(
                id=pair_id,
                src=tokenize(src_line, lowercase),
                tgt=tokenize(tgt_line, lowercase),
                provenance=provenance,
            )
            pair_id += 1

    return CorpusStream(gen())


def read_tsv(
    path: str | Path,
    lowercase: bool = False,
    provenance: Provenance = Provenance.CANDIDATE,
) -> CorpusStream:
    """Stream sentence pairs from a 2-column TSV file."""

    def gen() -> Iterator[SentencePair]:
        for pair_id, line in enumerate(_iter_lines(path)):
            columns = line.split("\t")
            if len(columns) != 2:
                raise CorpusFormatError(
                    f"{path}: line {pair_id + 1}: expected 2 tab-separated "
                    f"columns, found {len(columns)}"
                )
            yield SentencePair(
                id=pair_id,
                src=tokenize(columns[0], lowercase),
                tgt=tokenize(columns[1], lowercase),
                provenance=provenance,
            )

    return CorpusStream(gen())


def open_corpus(
    path: str | Path | None = None,
    src_path: str | Path | None = None,
    tgt_path: str | Path | None = None,
    lowercase: bool = False,
    provenance: Provenance = Provenance.CANDIDATE,
) -> CorpusStream:
    """Open either a TSV corpus or a twin-file corpus, whichever was given."""
    if path is not None:
        if src_path is not None or tgt_path is not None:
            raise CorpusFormatError("give either a TSV path or twin paths, not both")
        return read_tsv(path, lowercase, provenance)
    if src_path is None or tgt_path is None:
        raise CorpusFormatError("twin-file corpus needs both source and target paths")
    return read_parallel(src_path, tgt_path, lowercase, provenance)


def read_mono(path: str | Path, lowercase: bool = False) -> list[Sentence]:
    """Read a monolingual file into memory, one Sentence per line."""
    return [tokenize(line, lowercase) for line in _iter_lines(path)]


def target_sentences(pairs: Iterable[SentencePair]) -> Iterator[Sentence]:
    for pair in pairs:
        yield pair.tgt


def write_parallel(
    pairs: Iterable[SentencePair], src_path: str | Path, tgt_path: str | Path
) -> int:
    """Write raw lines back to twin files; returns the number of pairs written."""
    n = 0
    with open(src_path, "w", encoding="utf-8") as src_fh, open(
        tgt_path, "w", encoding="utf-8"
    ) as tgt_fh:
        for pair in pairs:
            src_fh.write(pair.src.raw + "\n")
            tgt_fh.write(pair.tgt.raw + "\n")
            n += 1
    return n


def write_tsv(pairs: Iterable[SentencePair], path: str | Path) -> int:
    """Write pairs as 2-column TSV; raw lines containing tabs cannot survive."""
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for pair in pairs:
            if "\t" in pair.src.raw or "\t" in pair.tgt.raw:
                raise CorpusFormatError(
                    f"pair {pair.id}: raw text contains a tab; "
                    "write twin files instead of TSV"
                )
            fh.write(f"{pair.src.raw}\t{pair.tgt.raw}\n")
            n += 1
    return n


def sample(
    stream: Iterable[SentencePair], n: int, seed: int
) -> list[SentencePair]:
    """Uniform reservoir sample of min(n, corpus size) pairs, id-ascending.

    Single pass, deterministic for a fixed seed.
    """
    if n < 0:
        raise ValueError("sample size must be >= 0")
    rng = random.Random(seed)
    reservoir: list[SentencePair] = []
    for seen, pair in enumerate(stream):
        if seen < n:
            reservoir.append(pair)
            continue
        slot = rng.randrange(seen + 1)
        if slot < n:
            reservoir[slot] = pair
    reservoir.sort(key=lambda p: p.id)
    return reservoir
