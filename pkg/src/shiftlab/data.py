"""Synthetic multimodal benchmark generation, splits, and bit-exact file I/O.

Feature files (.fmat) and dataset bundles are little-endian on disk;
feature payloads are 32-bit floats, so generated datasets keep float32
feature arrays and round-trip bitwise.
"""
from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import BadMagicError, FormatError, TruncatedPayloadError, VersionMismatchError
from .kernels import MODALITIES, FeatureMatrix
from .text import tokenize

FMAT_MAGIC = b"FMAT"
FMAT_VERSION = 1

ANSWER_NAMES = (
    "red", "blue", "green", "yellow", "purple", "orange", "black", "white",
    "gray", "brown", "pink", "cyan", "olive", "teal", "navy", "maroon",
)

DEFAULT_TEMPLATES = (
    "what color is the object ?",
    "which color do you see ?",
    "what is the color of the item ?",
    "is there an object in the image ?",
)
# "attr" entries answer with the sample's latent attribute name; anything
# else is a constant answer readable from the question type alone (the
# language-prior probe).
DEFAULT_ANSWER_RULE = ("attr", "attr", "attr", "yes")

DEFAULT_SEED = 0


@dataclass(frozen=True)
class ToyDataset:
    """Image-feature/question/answer triplets with a domain tag."""

    name: str
    domain_tag: str
    features: np.ndarray  # (n, d) float32
    questions: tuple[tuple[str, ...], ...]
    answers: tuple[str, ...] | None
    token_vocab: tuple[str, ...]

    def __post_init__(self):
        f = np.asarray(self.features)
        if f.ndim != 2:
            raise ValueError(f"features must be (n, d), got shape {f.shape}")
        if not np.all(np.isfinite(f)):
            raise ValueError("features must be finite")
        if len(self.questions) != f.shape[0]:
            raise ValueError(
                f"feature/question row mismatch: {f.shape[0]} vs {len(self.questions)}"
            )
        if self.answers is not None and len(self.answers) != f.shape[0]:
            raise ValueError("answers must cover every sample or be absent")
        vocab = set(self.token_vocab)
        for toks in self.questions:
            missing = set(toks) - vocab
            if missing:
                raise ValueError(f"tokens outside vocab: {sorted(missing)[:5]}")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def labeled(self) -> bool:
        return self.answers is not None

    def unlabeled(self) -> "ToyDataset":
        """Answer-free view; unsupervised trainers take this first."""
        return replace(self, answers=None)

    def subset(self, indices, name: str | None = None) -> "ToyDataset":
        idx = np.asarray(indices, dtype=np.int64)
        return replace(
            self,
            name=name if name is not None else self.name,
            features=self.features[idx],
            questions=tuple(self.questions[i] for i in idx),
            answers=None if self.answers is None else tuple(self.answers[i] for i in idx),
        )


def token_vocab_of(questions) -> tuple[str, ...]:
    return tuple(sorted({t for toks in questions for t in toks}))


@dataclass(frozen=True)
class BenchmarkSpec:
    """Generator parameters for one source/target benchmark pair."""

    n_train: int = 2000
    n_eval: int = 500
    image_dim: int = 32
    classes: int = 8
    question_templates: tuple[str, ...] = DEFAULT_TEMPLATES
    answer_rule: tuple[str, ...] = DEFAULT_ANSWER_RULE
    shift: "ShiftSpec | None" = None  # None = identical target distribution
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if self.n_train <= 0 or self.n_eval <= 0:
            raise ValueError("n_train and n_eval must be positive")
        if self.image_dim <= 0 or self.classes <= 0:
            raise ValueError("image_dim and classes must be positive")
        if not self.question_templates:
            raise ValueError("need at least one question template")
        if len(self.answer_rule) != len(self.question_templates):
            raise ValueError("answer_rule must align with question_templates")
        if self.classes > len(ANSWER_NAMES):
            raise ValueError(f"at most {len(ANSWER_NAMES)} latent classes supported")


_MEAN_SCALE = 2.0


def _draw_domain(spec: BenchmarkSpec, means: np.ndarray, seed_key: int, tag: str) -> ToyDataset:
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, seed_key]))
    n = spec.n_train + spec.n_eval
    labels = rng.integers(0, spec.classes, size=n)
    feats = (means[labels] + rng.normal(0.0, 1.0, size=(n, spec.image_dim))).astype(np.float32)
    qtypes = rng.integers(0, len(spec.question_templates), size=n)
    questions = tuple(tuple(tokenize(spec.question_templates[t])) for t in qtypes)
    answers = tuple(
        ANSWER_NAMES[labels[i]] if spec.answer_rule[qtypes[i]] == "attr" else spec.answer_rule[qtypes[i]]
        for i in range(n)
    )
    return ToyDataset(
        name=f"toy-{tag}",
        domain_tag=tag,
        features=feats,
        questions=questions,
        answers=answers,
        token_vocab=token_vocab_of(questions),
    )


def generate_benchmark(spec: BenchmarkSpec):
    """Source and shifted-target datasets, each n_train + n_eval samples.

    The first n_train rows of each dataset are the training split, the
    rest the evaluation split (see train_eval_split). The target is an
    independent redraw from the same generator under a split seed, then
    passed through the spec's shift; its answers are retained and it is
    up to unsupervised trainers to take the unlabeled view.
    """
    from .shift import make_shifted_dataset  # deferred: shift imports ToyDataset

    means_rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 0]))
    means = means_rng.normal(0.0, 1.0, size=(spec.classes, spec.image_dim)) * _MEAN_SCALE
    source = _draw_domain(spec, means, seed_key=1, tag="source")
    target = _draw_domain(spec, means, seed_key=2, tag="target")
    if spec.shift is not None:
        target = make_shifted_dataset(target, spec.shift)
    return source, target


def train_eval_split(ds: ToyDataset, n_train: int):
    """(train, eval) views by construction order: the first n_train rows
    of a generated dataset are its training split."""
    if not 0 < n_train < ds.n:
        raise ValueError(f"n_train must lie in (0, {ds.n}), got {n_train}")
    return ds.subset(np.arange(n_train)), ds.subset(np.arange(n_train, ds.n))


def split_dataset(ds: ToyDataset, fractions, seed: int):
    """Disjoint seeded partitions of floor(fraction * n) samples each."""
    fractions = list(fractions)
    if not fractions or any(f <= 0 for f in fractions) or sum(fractions) > 1.0 + 1e-12:
        raise ValueError(f"fractions must be positive and sum to <= 1, got {fractions}")
    perm = np.random.default_rng(seed).permutation(ds.n)
    parts = []
    start = 0
    for f in fractions:
        size = int(np.floor(f * ds.n))
        parts.append(ds.subset(perm[start : start + size]))
        start += size
    return parts


def save_features(path, fm: FeatureMatrix) -> None:
    """Binary layout: "FMAT", version u32, n u64, d u64, modality u8,
    then n*d little-endian float32 values, row-major."""
    values = np.ascontiguousarray(np.asarray(fm.values, dtype="<f4"))
    header = FMAT_MAGIC + struct.pack(
        "<IQQB", FMAT_VERSION, fm.n, fm.d, MODALITIES.index(fm.modality)
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(values.tobytes())


def load_features(path) -> FeatureMatrix:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != FMAT_MAGIC:
        raise BadMagicError(f"{path}: bad magic {blob[:4]!r}")
    head_size = 4 + struct.calcsize("<IQQB")
    if len(blob) < head_size:
        raise TruncatedPayloadError(f"{path}: header truncated")
    version, n, d, modality_id = struct.unpack("<IQQB", blob[4:head_size])
    if version != FMAT_VERSION:
        raise VersionMismatchError(f"{path}: version {version}, expected {FMAT_VERSION}")
    if modality_id >= len(MODALITIES):
        raise FormatError(f"{path}: unknown modality id {modality_id}")
    payload = blob[head_size:]
    if len(payload) != n * d * 4:
        raise TruncatedPayloadError(
            f"{path}: payload holds {len(payload)} bytes, expected {n * d * 4}"
        )
    values = np.frombuffer(payload, dtype="<f4").reshape(n, d).copy()
    return FeatureMatrix(values, modality=MODALITIES[modality_id], provenance=str(path))


def save_bundle(dirpath, ds: ToyDataset) -> None:
    """Bundle = features.fmat + questions.jsonl + meta.json in one directory."""
    os.makedirs(dirpath, exist_ok=True)
    save_features(os.path.join(dirpath, "features.fmat"), FeatureMatrix(ds.features, modality="image_high"))
    with open(os.path.join(dirpath, "questions.jsonl"), "w", encoding="utf-8") as fh:
        for i, toks in enumerate(ds.questions):
            rec = {"q": " ".join(toks)}
            if ds.answers is not None:
                rec["a"] = ds.answers[i]
            fh.write(json.dumps(rec) + "\n")
    meta = {"name": ds.name, "domain_tag": ds.domain_tag, "token_vocab": list(ds.token_vocab)}
    with open(os.path.join(dirpath, "meta.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=1)


def load_bundle(dirpath) -> ToyDataset:
    from .text import load_questions_jsonl

    for name in ("features.fmat", "questions.jsonl", "meta.json"):
        if not os.path.exists(os.path.join(dirpath, name)):
            raise FormatError(f"{dirpath}: missing component file {name}")
    fm = load_features(os.path.join(dirpath, "features.fmat"))
    records, answers = load_questions_jsonl(os.path.join(dirpath, "questions.jsonl"))
    if len(records) != fm.n:
        raise FormatError(
            f"{dirpath}: row-count mismatch, {fm.n} feature rows vs {len(records)} questions"
        )
    with open(os.path.join(dirpath, "meta.json"), "r", encoding="utf-8") as fh:
        meta = json.load(fh)
    has_answers = [a is not None for a in answers]
    if any(has_answers) and not all(has_answers):
        raise FormatError(f"{dirpath}: answers must be present for all samples or none")
    questions = tuple(r.tokens for r in records)
    return ToyDataset(
        name=meta["name"],
        domain_tag=meta["domain_tag"],
        features=fm.values,
        questions=questions,
        answers=tuple(answers) if all(has_answers) and answers else None,
        token_vocab=tuple(meta["token_vocab"]),
    )
