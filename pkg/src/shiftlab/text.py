"""Question tokenization and the fixed 20-dim low-level syntactic featurizer.

The 20-feature list and the closed-class word lists below are frozen
toolkit constants (bump WORDLIST_VERSION on any change); counts are
computed against these lists only, no external tagger.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .kernels import FeatureMatrix

WORDLIST_VERSION = 1

PUNCT_CHARS = set('?.,!\';:"')

WH_WORDS = frozenset("what which who whom whose when where why how".split())
CONJUNCTIONS = frozenset(
    "and or but nor so yet because although though while whereas unless since if".split()
)
PRONOUNS = frozenset(
    "i you he she it we they me him her us them mine yours his hers ours theirs "
    "myself yourself himself herself itself ourselves themselves this that these those "
    "someone anyone everyone something anything everything nothing nobody".split()
)
PREPOSITIONS = frozenset(
    "of in on at by with from to into onto over under above below between among "
    "through during before after behind beside near against across around within "
    "without upon off".split()
)
DETERMINERS = frozenset("a an the this that these those each every some any no another".split())
AUXILIARIES = frozenset(
    "is are was were am be been being do does did have has had "
    "will would can could shall should may might must".split()
)
NEGATIONS = frozenset("not no never none nothing nobody nowhere neither nor".split())
STOPWORDS = frozenset(
    "a an the is are was were be been am do does did of in on at to for with and or "
    "but it its this that these those there here he she they we you i not no yes "
    "what which who when where why how".split()
)

FEATURE_NAMES = (
    "token_count",
    "char_count",
    "mean_token_length",
    "wh_word_count",
    "conjunction_count",
    "pronoun_count",
    "preposition_count",
    "determiner_count",
    "auxiliary_count",
    "negation_count",
    "digit_token_count",
    "punctuation_token_count",
    "comma_count",
    "unique_token_ratio",
    "capitalized_word_count",
    "question_mark_flag",
    "er_est_suffix_count",
    "ing_suffix_count",
    "max_token_length",
    "stopword_ratio",
)


def tokenize(raw: str) -> list[str]:
    """Lowercase, split on whitespace, peel leading/trailing punctuation
    marks into their own tokens. Total and deterministic."""
    out: list[str] = []
    for chunk in raw.lower().split():
        lead: list[str] = []
        trail: list[str] = []
        while chunk and chunk[0] in PUNCT_CHARS:
            lead.append(chunk[0])
            chunk = chunk[1:]
        while chunk and chunk[-1] in PUNCT_CHARS:
            trail.append(chunk[-1])
            chunk = chunk[:-1]
        out.extend(lead)
        if chunk:
            out.append(chunk)
        out.extend(reversed(trail))
    return out


@dataclass(frozen=True)
class QuestionRecord:
    """A raw question string plus its derived token sequence."""

    raw: str
    tokens: tuple[str, ...]

    @classmethod
    def from_raw(cls, raw: str) -> "QuestionRecord":
        return cls(raw=raw, tokens=tuple(tokenize(raw)))


@dataclass(frozen=True)
class SyntaxFeatureSet:
    values: np.ndarray  # (20,) float64
    feature_names: tuple[str, ...] = FEATURE_NAMES

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (20,):
            raise ValueError(f"expected 20 features, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("features must be finite")
        object.__setattr__(self, "values", v)


def _is_er_est(tok: str) -> bool:
    return (len(tok) >= 3 and tok.endswith("er")) or (len(tok) >= 4 and tok.endswith("est"))


def syntax_features(q: QuestionRecord | str) -> SyntaxFeatureSet:
    """The fixed 20 features; empty input yields all zeros."""
    if isinstance(q, str):
        q = QuestionRecord.from_raw(q)
    toks = q.tokens
    n = len(toks)
    lens = [len(t) for t in toks]
    vals = np.zeros(20)
    vals[0] = n
    vals[1] = len(q.raw)
    vals[2] = sum(lens) / n if n else 0.0
    vals[3] = sum(t in WH_WORDS for t in toks)
    vals[4] = sum(t in CONJUNCTIONS for t in toks)
    vals[5] = sum(t in PRONOUNS for t in toks)
    vals[6] = sum(t in PREPOSITIONS for t in toks)
    vals[7] = sum(t in DETERMINERS for t in toks)
    vals[8] = sum(t in AUXILIARIES for t in toks)
    vals[9] = sum(t in NEGATIONS for t in toks)
    vals[10] = sum(t.isdigit() for t in toks)
    vals[11] = sum(all(c in PUNCT_CHARS for c in t) for t in toks)
    vals[12] = sum(t == "," for t in toks)
    vals[13] = len(set(toks)) / n if n else 0.0
    vals[14] = sum(w[0].isupper() for w in q.raw.split())
    vals[15] = 1.0 if "?" in q.raw else 0.0
    vals[16] = sum(_is_er_est(t) for t in toks)
    vals[17] = sum(len(t) >= 4 and t.endswith("ing") for t in toks)
    vals[18] = max(lens) if n else 0.0
    vals[19] = sum(t in STOPWORDS for t in toks) / n if n else 0.0
    return SyntaxFeatureSet(values=vals)


def corpus_syntax_matrix(questions) -> FeatureMatrix:
    """n x 20 syntax-feature matrix tagged question_syntax."""
    questions = list(questions)
    if not questions:
        raise ValueError("empty corpus")
    rows = np.stack([syntax_features(q).values for q in questions])
    return FeatureMatrix(rows, modality="question_syntax", provenance="syntax-v%d" % WORDLIST_VERSION)


def load_questions_jsonl(path):
    """Read one-object-per-line records with "q" (string) and optional "a".

    Returns (records, answers); answers entries are None where absent.
    """
    records: list[QuestionRecord] = []
    answers: list[str | None] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if "q" not in obj or not isinstance(obj["q"], str):
                raise ValueError(f"{path}:{line_no}: record needs a string 'q' field")
            records.append(QuestionRecord.from_raw(obj["q"]))
            answers.append(obj.get("a"))
    return records, answers
