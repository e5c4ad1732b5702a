#!/usr/bin/env python3
"""Throughput and memory benchmark: score and select a large synthetic corpus.

Writes the corpus to a scratch directory, scores every pair with real models,
selects the top quarter (forcing the external-sort path), and prints wall
times plus peak memory.

Example:
    python scripts/scale_smoke.py --pairs 1000000 --workers 4
"""

import argparse
import os
import resource
import sys
import tempfile
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from pairsieve.corpus import write_parallel
from pairsieve.lexical_tm import Direction, train_model1
from pairsieve.ngram_lm import train_ngram
from pairsieve.scoring import LmScorer, Model1Scorer, read_score_file, score_corpus_to_file
from pairsieve.selection import check_weight_alignment, emit_weights, select_top_n
from pairsieve.synthetic import make_cipher_corpus


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--pairs", type=int, default=1_000_000)
    parser.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    parser.add_argument("--keep", type=int, default=None,
                        help="selection size (default: pairs // 4)")
    parser.add_argument("--scratch", default=None,
                        help="work directory (default: a temp dir, removed after)")
    args = parser.parse_args()
    keep = args.keep if args.keep is not None else args.pairs // 4

    with tempfile.TemporaryDirectory(prefix="pairsieve-scale-") as tmp:
        work = Path(args.scratch) if args.scratch else Path(tmp)
        work.mkdir(parents=True, exist_ok=True)

        t0 = time.perf_counter()
        corpus = make_cipher_corpus(args.pairs, seed=701, min_len=3, max_len=8)
        src, tgt = work / "big.src", work / "big.tgt"
        write_parallel(corpus, src, tgt)
        del corpus
        print(f"generate\t{time.perf_counter() - t0:.1f}s")

        train = make_cipher_corpus(2000, seed=702, min_len=3, max_len=8)
        fwd, _ = train_model1(train, iterations=3, direction=Direction.FORWARD)
        rev, _ = train_model1(train, iterations=3, direction=Direction.REVERSE)
        in_lm = train_ngram([p.tgt for p in train], order=2)
        out_lm = train_ngram([p.src for p in train], order=2)

        t1 = time.perf_counter()
        scores = work / "scores.tsv"
        n = score_corpus_to_file(
            scores,
            Model1Scorer(fwd), Model1Scorer(rev), LmScorer(in_lm), LmScorer(out_lm),
            src_path=src, tgt_path=tgt, workers=args.workers,
        )
        dt = time.perf_counter() - t1
        print(f"score\t{dt:.1f}s\t({n / dt:.0f} pairs/s, {args.workers} workers)")

        t2 = time.perf_counter()
        selection = select_top_n(
            read_score_file(scores), keep, max_in_memory=max(100_000, keep // 2)
        )
        print(
            f"select\t{time.perf_counter() - t2:.1f}s\t"
            f"(top {selection.n_returned}, cutoff {selection.cutoff_score:.6g})"
        )

        t3 = time.perf_counter()
        weights = work / "weights.txt"
        emit_weights(read_score_file(scores), n, weights)
        check_weight_alignment(weights, n)
        print(f"weights\t{time.perf_counter() - t3:.1f}s")

        peak_gib = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / (1024**2)
        print(f"total\t{time.perf_counter() - t0:.1f}s")
        print(f"peak_rss\t{peak_gib:.2f} GiB")
    return 0


if __name__ == "__main__":
    sys.exit(main())
