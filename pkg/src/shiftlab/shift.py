"""Synthetic one-modality shift constructors.

AdaIN-statistic shifts with strength alpha on feature vectors,
BT.601 luminance-preserving chroma copy on raw RGB images, and
deterministic rule-based question perturbation.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .data import ToyDataset, token_vocab_of

_STD_FLOOR = 1e-6

# BT.601 luma weights; U/V scaled per the classic analog definition.
_KR, _KG, _KB = 0.299, 0.587, 0.114
_U_SCALE, _V_SCALE = 0.492, 0.877


@dataclass(frozen=True)
class AdainParams:
    """Style statistics plus transfer strength alpha in [0, 1]."""

    style_mean: np.ndarray
    style_std: np.ndarray
    alpha: float

    def __post_init__(self):
        mean = np.asarray(self.style_mean, dtype=np.float64)
        std = np.asarray(self.style_std, dtype=np.float64)
        if mean.ndim != 1 or std.shape != mean.shape:
            raise ValueError("style_mean and style_std must be same-length vectors")
        if not np.all(std > 0):
            raise ValueError("style_std must be strictly positive")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        object.__setattr__(self, "style_mean", mean)
        object.__setattr__(self, "style_std", std)


@dataclass(frozen=True)
class PerturbParams:
    """Token substitutions plus seeded adjacent-swap probability."""

    substitutions: dict
    swap_adjacent_prob: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for k, v in self.substitutions.items():
            if not (isinstance(k, str) and isinstance(v, str) and k and v):
                raise ValueError("substitutions must map nonempty tokens to nonempty tokens")
        if not 0.0 <= self.swap_adjacent_prob <= 1.0:
            raise ValueError("swap_adjacent_prob must be in [0, 1]")


@dataclass(frozen=True)
class ShiftSpec:
    image_shift: AdainParams | None = None
    question_shift: PerturbParams | None = None

    def __post_init__(self):
        if self.image_shift is None and self.question_shift is None:
            raise ValueError("a ShiftSpec needs an image shift, a question shift, or both")

    def describe(self) -> str:
        parts = []
        if self.image_shift is not None:
            parts.append(f"adain{self.image_shift.alpha:g}")
        if self.question_shift is not None:
            parts.append("qperturb")
        return "+".join(parts)


@dataclass(frozen=True)
class RgbImage:
    """Interleaved 8-bit RGB pixels, shape (height, width, 3)."""

    pixels: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.pixels)
        if p.ndim != 3 or p.shape[2] != 3 or p.shape[0] < 1 or p.shape[1] < 1:
            raise ValueError(f"pixels must be (h, w, 3), got shape {p.shape}")
        if p.dtype != np.uint8:
            if np.any(p < 0) or np.any(p > 255):
                raise ValueError("channel values must lie in [0, 255]")
            p = p.astype(np.uint8)
        object.__setattr__(self, "pixels", p)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


def rgb_to_yuv(img: RgbImage):
    """Real-valued BT.601 planes: Y = .299R+.587G+.114B, U = .492(B-Y), V = .877(R-Y)."""
    p = img.pixels.astype(np.float64)
    r, g, b = p[..., 0], p[..., 1], p[..., 2]
    y = _KR * r + _KG * g + _KB * b
    u = _U_SCALE * (b - y)
    v = _V_SCALE * (r - y)
    return y, u, v


def yuv_to_rgb(y: np.ndarray, u: np.ndarray, v: np.ndarray) -> RgbImage:
    """Inverse of rgb_to_yuv, clamped to [0, 255] and rounded to nearest."""
    r = y + v / _V_SCALE
    b = y + u / _U_SCALE
    g = (y - _KR * r - _KB * b) / _KG
    rgb = np.stack([r, g, b], axis=-1)
    return RgbImage(np.clip(np.rint(rgb), 0, 255).astype(np.uint8))


def luminance_merge_planes(stylized: RgbImage, original: RgbImage):
    """(Y from stylized, U and V from original) — the real-valued planes
    the merged image is built from."""
    if stylized.pixels.shape != original.pixels.shape:
        raise ValueError(
            f"dimension mismatch: {stylized.pixels.shape} vs {original.pixels.shape}"
        )
    y_s, _, _ = rgb_to_yuv(stylized)
    _, u_o, v_o = rgb_to_yuv(original)
    return y_s, u_o, v_o


def luminance_merge(stylized: RgbImage, original: RgbImage) -> RgbImage:
    """Brightness of the stylized image, chroma of the original."""
    return yuv_to_rgb(*luminance_merge_planes(stylized, original))


def adain_shift(x, p: AdainParams) -> np.ndarray:
    """Blend x with its AdaIN restyling: (1-a) x + a (s_std (x-m)/std + s_mean).

    Mean/std are scalars over the coordinates of x (instance-norm
    semantics), with the std floored at 1e-6.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != p.style_mean.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {p.style_mean.shape}")
    if p.alpha == 0.0:
        return x.copy()
    std = max(float(x.std()), _STD_FLOOR)
    t = p.style_std * (x - x.mean()) / std + p.style_mean
    return (1.0 - p.alpha) * x + p.alpha * t


def _adain_shift_rows(feats: np.ndarray, p: AdainParams) -> np.ndarray:
    # vectorized row-wise adain_shift
    x = feats.astype(np.float64)
    mu = x.mean(axis=1, keepdims=True)
    sd = np.maximum(x.std(axis=1, keepdims=True), _STD_FLOOR)
    t = p.style_std[None, :] * (x - mu) / sd + p.style_mean[None, :]
    return (1.0 - p.alpha) * x + p.alpha * t


def _sample_seed(base_seed: int, index: int) -> int:
    return int(np.random.SeedSequence([base_seed, index]).generate_state(1)[0])


def perturb_question(tokens, p: PerturbParams) -> list[str]:
    """Token-wise substitutions, then seeded adjacent swaps."""
    out = [p.substitutions.get(t, t) for t in tokens]
    if p.swap_adjacent_prob > 0.0 and len(out) > 1:
        rng = np.random.default_rng(p.seed)
        for i in range(len(out) - 1):
            if rng.random() < p.swap_adjacent_prob:
                out[i], out[i + 1] = out[i + 1], out[i]
    return out


def make_shifted_dataset(ds: ToyDataset, spec: ShiftSpec) -> ToyDataset:
    """Shifted copy of ds: images and/or questions transformed, answers
    copied verbatim, domain tag suffixed with the shift description."""
    if spec is None:
        raise ValueError("shift spec is required")
    features = ds.features
    if spec.image_shift is not None and spec.image_shift.alpha > 0.0:
        features = _adain_shift_rows(ds.features, spec.image_shift).astype(ds.features.dtype)
    questions = ds.questions
    vocab = ds.token_vocab
    if spec.question_shift is not None:
        qp = spec.question_shift
        questions = tuple(
            tuple(perturb_question(toks, replace(qp, seed=_sample_seed(qp.seed, i))))
            for i, toks in enumerate(ds.questions)
        )
        vocab = token_vocab_of(questions)
    return ToyDataset(
        name=ds.name,
        domain_tag=f"{ds.domain_tag}+{spec.describe()}",
        features=features,
        questions=questions,
        answers=ds.answers,
        token_vocab=vocab,
    )


def write_ppm(path, img: RgbImage) -> None:
    """Binary PPM (P6), maxval 255."""
    with open(path, "wb") as fh:
        fh.write(b"P6\n%d %d\n255\n" % (img.width, img.height))
        fh.write(img.pixels.tobytes())


def read_ppm(path) -> RgbImage:
    from .errors import BadMagicError, TruncatedPayloadError

    with open(path, "rb") as fh:
        blob = fh.read()
    if not blob.startswith(b"P6"):
        raise BadMagicError(f"{path}: not a binary PPM (P6)")
    fields: list[bytes] = []
    pos = 2
    while len(fields) < 3:
        while pos < len(blob) and blob[pos : pos + 1].isspace():
            pos += 1
        if pos < len(blob) and blob[pos : pos + 1] == b"#":  # comment line
            while pos < len(blob) and blob[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise TruncatedPayloadError(f"{path}: header truncated")
        fields.append(blob[start:pos])
    pos += 1  # single whitespace after maxval
    width, height, maxval = (int(f) for f in fields)
    if maxval != 255:
        raise ValueError(f"{path}: only maxval 255 supported, got {maxval}")
    payload = blob[pos : pos + width * height * 3]
    if len(payload) != width * height * 3:
        raise TruncatedPayloadError(f"{path}: pixel payload truncated")
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, 3).copy()
    return RgbImage(pixels)
