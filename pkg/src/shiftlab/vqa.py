"""Desk-scale two-stream VQA surrogate.

Image encoder + mean-pooled question embedding + fusion softmax head
over a shared top-K answer vocabulary, with the transfer-evaluation
protocol (top-1 accuracy, normalized transfer ratio).
"""
from __future__ import annotations

import json
import os
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .data import ToyDataset, load_features, save_features
from .kernels import FeatureMatrix


def normalize_answer(answer: str) -> str:
    return answer.strip().lower()


@dataclass(frozen=True)
class AnswerVocabulary:
    """Ordered unique answers; ids beyond the list collapse to unknown."""

    answers: tuple[str, ...]
    index: dict = field(repr=False)

    def __init__(self, answers):
        answers = tuple(answers)
        if not answers:
            raise ValueError("vocabulary needs at least one answer")
        if len(set(answers)) != len(answers):
            raise ValueError("duplicate answers in vocabulary")
        object.__setattr__(self, "answers", answers)
        object.__setattr__(self, "index", {a: i for i, a in enumerate(answers)})

    @property
    def size(self) -> int:
        return len(self.answers)

    @property
    def unknown_id(self) -> int:
        # one past the classifier range: never predictable, always incorrect
        return len(self.answers)

    def answer_id(self, answer: str) -> int:
        return self.index.get(normalize_answer(answer), self.unknown_id)


def build_shared_vocab(datasets, k: int) -> AnswerVocabulary:
    """Top-k pooled answers, ties broken lexicographically."""
    if k < 1:
        raise ValueError("k must be at least 1")
    counts: Counter = Counter()
    for ds in datasets:
        if ds.answers is not None:
            counts.update(normalize_answer(a) for a in ds.answers)
    if not counts:
        raise ValueError("no answers present in any dataset")
    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    return AnswerVocabulary([a for a, _ in ranked[:k]])


@dataclass(frozen=True)
class ArchConfig:
    """Shape hyperparameters of the surrogate model."""

    enc_hidden: int = 64
    enc_out: int = 32
    embed_dim: int = 16
    fusion_hidden: int = 64
    vocab_k: int = 1000


@dataclass
class VqaModel:
    image_encoder: nn.MlpModel
    question_embedding: np.ndarray  # (token vocab, embed_dim)
    fusion_head: nn.MlpModel  # softmax over the answer vocabulary
    token_index: dict
    vocab: AnswerVocabulary

    def __post_init__(self):
        fused = self.image_encoder.out_dim + self.question_embedding.shape[1]
        if self.fusion_head.in_dim != fused:
            raise ValueError("encoder output + embedding dim must equal fusion input")
        if self.fusion_head.out_dim != self.vocab.size:
            raise ValueError("fusion output must match vocabulary size")

    def copy(self) -> "VqaModel":
        return VqaModel(
            self.image_encoder.copy(),
            self.question_embedding.copy(),
            self.fusion_head.copy(),
            dict(self.token_index),
            self.vocab,
        )


def build_vqa_model(image_dim: int, token_vocab, vocab: AnswerVocabulary,
                    arch: ArchConfig, rng: np.random.Generator) -> VqaModel:
    encoder = nn.init_mlp([image_dim, arch.enc_hidden, arch.enc_out], "relu", rng)
    token_vocab = tuple(token_vocab)
    bound = np.sqrt(6.0 / (len(token_vocab) + arch.embed_dim))
    embedding = rng.uniform(-bound, bound, size=(max(len(token_vocab), 1), arch.embed_dim))
    fusion = nn.init_mlp(
        [arch.enc_out + arch.embed_dim, arch.fusion_hidden, vocab.size], "softmax_out", rng
    )
    return VqaModel(encoder, embedding, fusion, {t: i for i, t in enumerate(token_vocab)}, vocab)


def encode_tokens(model: VqaModel, tokens) -> list[int]:
    """Token strings to ids; out-of-vocabulary tokens are dropped."""
    idx = model.token_index
    return [idx[t] for t in tokens if t in idx]


def question_vector(model: VqaModel, token_ids) -> np.ndarray:
    """Mean-pooled token embeddings; the empty sequence pools to zeros."""
    if len(token_ids) == 0:
        return np.zeros(model.question_embedding.shape[1])
    ids = np.asarray(token_ids, dtype=np.int64)
    if np.any(ids < 0) or np.any(ids >= model.question_embedding.shape[0]):
        raise ValueError("unknown token id")
    return model.question_embedding[ids].mean(axis=0)


@dataclass
class VqaTape:
    """Batch forward state needed to backpropagate through both streams."""

    enc_rec: nn.ForwardRecord
    fusion_rec: nn.ForwardRecord
    id_seqs: list
    enc_out_dim: int


def vqa_forward(model: VqaModel, feats, id_seqs):
    """Batch predictions plus the tape for vqa_backward."""
    enc_rec = nn.forward(model.image_encoder, feats)
    qvecs = np.stack([question_vector(model, ids) for ids in id_seqs])
    fused = np.concatenate([enc_rec.post[-1], qvecs], axis=1)
    fusion_rec = nn.forward(model.fusion_head, fused)
    return fusion_rec.post[-1], VqaTape(enc_rec, fusion_rec, list(id_seqs), model.image_encoder.out_dim)


@dataclass
class VqaGrads:
    encoder: list
    embedding: np.ndarray
    fusion: list


def vqa_backward(model: VqaModel, tape: VqaTape, dprobs,
                 extra_enc_out_grad=None) -> VqaGrads:
    """Gradients for every parameter group from dL/d(answer distribution).

    extra_enc_out_grad, when given, is added to the gradient at the
    encoder output (feature-distance losses attach there).
    """
    fusion_grads, dfused = nn.backward(model.fusion_head, tape.fusion_rec, dprobs)
    d_enc = dfused[:, : tape.enc_out_dim]
    d_q = dfused[:, tape.enc_out_dim :]
    if extra_enc_out_grad is not None:
        d_enc = d_enc + extra_enc_out_grad
    enc_grads, _ = nn.backward(model.image_encoder, tape.enc_rec, d_enc)
    demb = np.zeros_like(model.question_embedding)
    for i, ids in enumerate(tape.id_seqs):
        if len(ids):
            np.add.at(demb, np.asarray(ids, dtype=np.int64), d_q[i] / len(ids))
    return VqaGrads(enc_grads, demb, fusion_grads)


def predict(model: VqaModel, image_feat, token_ids) -> np.ndarray:
    """Answer distribution for one image-feature vector and token-id sequence."""
    feat = np.asarray(image_feat, dtype=np.float64).reshape(1, -1)
    probs, _ = vqa_forward(model, feat, [list(token_ids)])
    return probs[0]


def predict_batch(model: VqaModel, ds: ToyDataset) -> np.ndarray:
    probs, _ = vqa_forward(
        model, ds.features, [encode_tokens(model, toks) for toks in ds.questions]
    )
    return probs


def evaluate_accuracy(model: VqaModel, ds: ToyDataset) -> float:
    """Top-1 accuracy; ties break to the lowest id, out-of-vocabulary
    ground truth is always counted incorrect."""
    if ds.answers is None:
        raise ValueError("dataset has no answers to evaluate against")
    probs = predict_batch(model, ds)
    pred = probs.argmax(axis=1)
    truth = np.array([model.vocab.answer_id(a) for a in ds.answers])
    return float((pred == truth).mean())


def normalized_transfer(transfer_acc: float, target_trained_acc: float) -> float:
    """Transfer accuracy divided by the target-trained upper bound."""
    if target_trained_acc <= 0:
        raise ValueError("target-trained accuracy must be positive")
    return transfer_acc / target_trained_acc


_RESULT_FIELDS = (
    "source_acc",
    "target_direct",
    "target_dann1",
    "target_mm",
    "target_dann2",
    "target_sup10_scratch",
    "target_sup10_finetune",
    "target_full",
)


@dataclass
class TransferResult:
    """Accuracy record for one source/target pair across regimes."""

    source_acc: float | None = None
    target_direct: float | None = None
    target_dann1: float | None = None
    target_mm: float | None = None
    target_dann2: float | None = None
    target_sup10_scratch: float | None = None
    target_sup10_finetune: float | None = None
    target_full: float | None = None

    def __post_init__(self):
        for name in _RESULT_FIELDS:
            val = getattr(self, name)
            if val is not None and not 0.0 <= val <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {val}")

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in _RESULT_FIELDS}


def save_vqa_model(dirpath, model: VqaModel) -> None:
    """Directory checkpoint: two SLMDL files, an FMAT embedding, meta.json."""
    os.makedirs(dirpath, exist_ok=True)
    nn.save_model(os.path.join(dirpath, "encoder.slmdl"), model.image_encoder)
    nn.save_model(os.path.join(dirpath, "fusion.slmdl"), model.fusion_head)
    save_features(
        os.path.join(dirpath, "embedding.fmat"),
        FeatureMatrix(model.question_embedding.astype(np.float32), modality="generic"),
    )
    tokens = sorted(model.token_index, key=model.token_index.get)
    meta = {"token_vocab": tokens, "answers": list(model.vocab.answers)}
    with open(os.path.join(dirpath, "meta.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=1)


def load_vqa_model(dirpath) -> VqaModel:
    encoder = nn.load_model(os.path.join(dirpath, "encoder.slmdl"))
    fusion = nn.load_model(os.path.join(dirpath, "fusion.slmdl"))
    embedding = load_features(os.path.join(dirpath, "embedding.fmat")).values.astype(np.float64)
    with open(os.path.join(dirpath, "meta.json"), "r", encoding="utf-8") as fh:
        meta = json.load(fh)
    return VqaModel(
        encoder,
        embedding,
        fusion,
        {t: i for i, t in enumerate(meta["token_vocab"])},
        AnswerVocabulary(meta["answers"]),
    )
