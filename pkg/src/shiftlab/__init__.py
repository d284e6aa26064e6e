"""shiftlab: domain-gap measurement and unsupervised domain adaptation
on a desk-scale two-stream VQA-style benchmark."""

__version__ = "0.1.0"

from .adapt import (
    AdaptOutcome,
    apply_extractor,
    identity_extractor,
    train_extractor,
    train_one_stage_dann,
    train_one_stage_mm,
    train_source_only,
    train_supervised_target,
    train_two_stage_dann,
)
from .backend import BACKEND
from .data import (
    BenchmarkSpec,
    ToyDataset,
    generate_benchmark,
    load_bundle,
    load_features,
    save_bundle,
    save_features,
    split_dataset,
    train_eval_split,
)
from .kernels import (
    FeatureMatrix,
    KernelConfig,
    median_bandwidth,
    mmd_squared_biased,
    mmd_squared_unbiased,
    moment_distance,
    rbf_kernel,
    zscore,
)
from .nn import GrlNode, Layer, MlpModel, TrainConfig, grad_check
from .shift import (
    AdainParams,
    PerturbParams,
    RgbImage,
    ShiftSpec,
    adain_shift,
    luminance_merge,
    make_shifted_dataset,
    perturb_question,
    rgb_to_yuv,
    yuv_to_rgb,
)
from .text import QuestionRecord, corpus_syntax_matrix, syntax_features, tokenize
from .vqa import (
    AnswerVocabulary,
    ArchConfig,
    TransferResult,
    VqaModel,
    build_shared_vocab,
    build_vqa_model,
    evaluate_accuracy,
    normalized_transfer,
    predict,
)
