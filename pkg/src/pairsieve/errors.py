"""Exception types shared across the toolkit.

The CLI maps PairsieveError (and subclasses) to exit code 1; argparse usage
errors exit 2 on their own.
"""


class PairsieveError(Exception):
    """Base class for all data and model errors raised by pairsieve."""


class CorpusFormatError(PairsieveError):
    """Malformed corpus input: bad UTF-8, wrong TSV arity, line-count mismatch."""


class EmptySentenceError(PairsieveError):
    """A scorer was asked to score a sentence with no tokens."""


class EmptySourceError(PairsieveError):
    """Conditional scoring against an empty source without a NULL word."""


class TrainingError(PairsieveError):
    """Training input was empty or entirely unusable."""


class ModelFormatError(PairsieveError):
    """A model file failed to parse."""


class IncompatibleModelError(ModelFormatError):
    """A model file carries an unknown magic or version header."""


class ExternalScoreError(PairsieveError):
    """An external score table is malformed or queried outside its id range."""


class ScoreDomainError(PairsieveError):
    """A score-algebra input was negative, non-finite, or outside (0, 1]."""


class ScoringError(PairsieveError):
    """A scorer failed on a concrete pair; message names the pair id."""


class StructuralError(PairsieveError):
    """Ids are missing, duplicated, or out of range for the structure at hand."""


class ConfigError(PairsieveError):
    """A run configuration is incomplete or self-contradictory."""
