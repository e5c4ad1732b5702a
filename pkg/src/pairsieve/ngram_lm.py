"""Add-k smoothed n-gram language models and word-normalized cross-entropy.

Conventions shared with every other scorer in the toolkit:

* natural log everywhere (scores are nats per token);
* the end-of-sentence event is part of both the log-prob sum and the
  normalizing length, so a sentence of ``m`` tokens is scored over ``m + 1``
  events — this makes the model a proper distribution over variable-length
  sentences and external score files must follow the same convention;
* out-of-vocabulary tokens are scored as ``<unk>``.
"""

from __future__ import annotations

import math
from collections import Counter
from collections.abc import Iterable
from pathlib import Path

from .corpus import Sentence
from .errors import EmptySentenceError, IncompatibleModelError, ModelFormatError, TrainingError

BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"

_MAGIC = "ngram-lm"
_VERSION = 1

DEFAULT_ORDER = 3
DEFAULT_ADD_K = 0.1
DEFAULT_MIN_COUNT = 2


class NgramLanguageModel:
    """Order-n conditional word distribution with add-k smoothing.

    The distribution is closed over ``vocab``: for any history the smoothed
    conditionals sum to exactly 1. Built by :func:`train_ngram`; immutable
    afterwards, so concurrent read-only queries are safe.
    """

    def __init__(
        self,
        order: int,
        k: float,
        vocab: set[str],
        ngram_counts: dict[tuple[str, ...], int],
    ):
        if order < 1:
            raise ValueError("order must be >= 1")
        if k <= 0:
            raise ValueError("add-k constant must be > 0")
        self.order = order
        self.k = k
        self.vocab = vocab
        self.ngram_counts = ngram_counts
        # A context's count is the sum of its continuations, so it never
        # needs to be serialized.
        context_counts: Counter[tuple[str, ...]] = Counter()
        for ngram, count in ngram_counts.items():
            context_counts[ngram[:-1]] += count
        self.context_counts = dict(context_counts)

    @property
    def vocab_size(self) -> int:
        return len(self.vocab)

    def map_token(self, token: str) -> str:
        return token if token in self.vocab else UNK

    def prob(self, word: str, history: tuple[str, ...]) -> float:
        """Smoothed p(word | history); unseen histories fall back to 1/V."""
        word = self.map_token(word)
        history = tuple(self.map_token(t) for t in history)
        if len(history) > self.order - 1:
            history = history[len(history) - (self.order - 1):]
        numer = self.ngram_counts.get(history + (word,), 0) + self.k
        denom = self.context_counts.get(history, 0) + self.k * self.vocab_size
        return numer / denom

    def _event_log_probs(self, tokens: list[str]) -> list[float]:
        mapped = [t if t in self.vocab else UNK for t in tokens]
        padded = [BOS] * (self.order - 1) + mapped + [EOS]
        n_hist = self.order - 1
        counts = self.ngram_counts
        contexts = self.context_counts
        kv = self.k * self.vocab_size
        out = []
        for i in range(n_hist, len(padded)):
            history = tuple(padded[i - n_hist:i])
            numer = counts.get(history + (padded[i],), 0) + self.k
            denom = contexts.get(history, 0) + kv
            out.append(math.log(numer / denom))
        return out


def train_ngram(
    mono: Iterable[Sentence],
    order: int = DEFAULT_ORDER,
    k: float = DEFAULT_ADD_K,
    vocab_min_count: int = DEFAULT_MIN_COUNT,
) -> NgramLanguageModel:
    """Train an add-k n-gram model on a monolingual sentence stream.

    Words seen fewer than ``vocab_min_count`` times map to ``<unk>``; every
    sentence is padded with ``order - 1`` start symbols and one end symbol.
    Blank sentences contribute nothing. Training is deterministic: the same
    corpus always yields a bit-identical model.
    """
    if order < 1:
        raise TrainingError("order must be >= 1")
    if k <= 0:
        raise TrainingError("add-k constant must be > 0")
    if iter(mono) is mono:
        mono = [s for s in mono]  # two passes needed: vocab, then counts

    word_counts: Counter[str] = Counter()
    n_sentences = 0
    for sentence in mono:
        n_sentences += 1
        word_counts.update(sentence.tokens)
    if n_sentences == 0:
        raise TrainingError("cannot train a language model on an empty stream")

    vocab = {w for w, c in word_counts.items() if c >= vocab_min_count}
    vocab.add(EOS)
    vocab.add(UNK)
    if order > 1:
        vocab.add(BOS)  # start padding is a real token type for n > 1

    ngram_counts: dict[tuple[str, ...], int] = {}
    for sentence in mono:
        if not sentence.tokens:
            continue
        mapped = [t if t in vocab else UNK for t in sentence.tokens]
        padded = [BOS] * (order - 1) + mapped + [EOS]
        for i in range(order - 1, len(padded)):
            ngram = tuple(padded[i - order + 1:i + 1])
            ngram_counts[ngram] = ngram_counts.get(ngram, 0) + 1
    if not ngram_counts:
        raise TrainingError("training stream contained only blank sentences")

    return NgramLanguageModel(order=order, k=k, vocab=vocab, ngram_counts=ngram_counts)


def cross_entropy(lm: NgramLanguageModel, sentence: Sentence) -> float:
    """Word-normalized cross-entropy in nats per token, end event included."""
    if not sentence.tokens:
        raise EmptySentenceError("cannot score an empty sentence")
    log_probs = lm._event_log_probs(sentence.tokens)
    return -math.fsum(log_probs) / len(log_probs)


def perplexity(lm: NgramLanguageModel, sentence: Sentence) -> float:
    return math.exp(cross_entropy(lm, sentence))


def save_lm(lm: NgramLanguageModel, path: str | Path) -> None:
    """Write the model as versioned plain text: header, vocab, n-gram counts.

    Counts are integers and ``k`` round-trips through repr, so a saved model
    reloads bit-exactly.
    """
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{_MAGIC}\t{_VERSION}\n")
        fh.write(f"order\t{lm.order}\n")
        fh.write(f"k\t{lm.k!r}\n")
        fh.write(f"vocab\t{lm.vocab_size}\n")
        for word in sorted(lm.vocab):
            fh.write(word + "\n")
        fh.write(f"ngrams\t{len(lm.ngram_counts)}\n")
        for ngram in sorted(lm.ngram_counts):
            fh.write(f"{' '.join(ngram)}\t{lm.ngram_counts[ngram]}\n")


def load_lm(path: str | Path) -> NgramLanguageModel:
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

    def header_int(idx: int, key: str) -> int:
        if idx >= len(lines):
            raise fail(idx + 1, f"missing '{key}' header")
        parts = lines[idx].split("\t")
        if len(parts) != 2 or parts[0] != key:
            raise fail(idx + 1, f"expected '{key}' header, got {lines[idx]!r}")
        try:
            return int(parts[1])
        except ValueError:
            raise fail(idx + 1, f"non-integer {key}: {parts[1]!r}") from None

    order = header_int(1, "order")
    if 2 >= len(lines) or not lines[2].startswith("k\t"):
        raise fail(3, "missing 'k' header")
    try:
        k = float(lines[2].split("\t", 1)[1])
    except ValueError:
        raise fail(3, f"non-numeric k: {lines[2]!r}") from None
    vocab_size = header_int(3, "vocab")

    vocab_start = 4
    vocab_end = vocab_start + vocab_size
    if vocab_end > len(lines):
        raise fail(len(lines) + 1, "truncated vocab section")
    vocab = set(lines[vocab_start:vocab_end])
    if len(vocab) != vocab_size:
        raise fail(vocab_end, "duplicate entries in vocab section")

    n_ngrams = header_int(vocab_end, "ngrams")
    ngram_start = vocab_end + 1
    ngram_end = ngram_start + n_ngrams
    if ngram_end > len(lines):
        raise fail(len(lines) + 1, "truncated n-gram section")
    ngram_counts: dict[tuple[str, ...], int] = {}
    for idx in range(ngram_start, ngram_end):
        parts = lines[idx].split("\t")
        if len(parts) != 2:
            raise fail(idx + 1, f"expected 'ngram\\tcount', got {lines[idx]!r}")
        ngram = tuple(parts[0].split(" "))
        if len(ngram) != order:
            raise fail(idx + 1, f"n-gram arity {len(ngram)} != order {order}")
        try:
            count = int(parts[1])
        except ValueError:
            raise fail(idx + 1, f"non-integer count: {parts[1]!r}") from None
        if ngram in ngram_counts:
            raise fail(idx + 1, f"duplicate n-gram {parts[0]!r}")
        ngram_counts[ngram] = count
    if ngram_end < len(lines):
        raise fail(ngram_end + 1, "trailing content after n-gram section")

    return NgramLanguageModel(order=order, k=k, vocab=vocab, ngram_counts=ngram_counts)
