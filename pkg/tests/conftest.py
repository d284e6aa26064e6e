import time

import numpy as np
import pytest

from shiftlab import nn
from shiftlab.adapt import (
    train_one_stage_dann,
    train_source_only,
    train_supervised_target,
    train_two_stage_dann,
)
from shiftlab.cli import REGIMES, default_benchmark_spec, run_matrix
from shiftlab.data import generate_benchmark, train_eval_split


def default_bench(seed: int):
    """Default benchmark (alpha=1 image shift, default sizes) split four ways."""
    spec = default_benchmark_spec(alpha=1.0, seed=seed)
    source, target = generate_benchmark(spec)
    src_train, src_eval = train_eval_split(source, spec.n_train)
    tgt_train, tgt_eval = train_eval_split(target, spec.n_train)
    return src_train, src_eval, tgt_train, tgt_eval


@pytest.fixture(scope="session")
def default_matrix():
    """Timed single-threaded full-regime matrix on the default benchmark, seed 0."""
    src_train, src_eval, tgt_train, tgt_eval = default_bench(0)
    start = time.perf_counter()
    rows, outcomes = run_matrix(
        src_train, src_eval, tgt_train, tgt_eval, nn.TrainConfig(seed=0),
        regimes=REGIMES, jobs=1,
    )
    elapsed = time.perf_counter() - start
    return {
        "rows": {r["regime"]: r for r in rows},
        "outcomes": outcomes,
        "elapsed": elapsed,
        "eval_sets": (src_eval, tgt_eval),
    }


@pytest.fixture(scope="session")
def default_seed_runs(default_matrix):
    """Per-seed regime accuracies on the default benchmark, seeds 0..4.

    Seed 0 reuses the matrix outcomes; seeds 1..4 train fresh."""
    runs = {0: {name: row["target_acc"] for name, row in default_matrix["rows"].items()}}
    runs[0]["histories"] = {k: v.history for k, v in default_matrix["outcomes"].items()}
    for seed in range(1, 5):
        src_train, src_eval, tgt_train, tgt_eval = default_bench(seed)
        cfg = nn.TrainConfig(seed=seed)
        direct = train_source_only(src_train, cfg, src_eval=src_eval, tgt_eval=tgt_eval)
        dann1 = train_one_stage_dann(src_train, tgt_train, cfg, tgt_eval=tgt_eval)
        dann2 = train_two_stage_dann(src_train, tgt_train, cfg, tgt_eval=tgt_eval)
        full = train_supervised_target(tgt_train, 1.0, "scratch", cfg, tgt_eval=tgt_eval)
        scratch = train_supervised_target(
            tgt_train, 0.1, "scratch", cfg, tgt_eval=tgt_eval, result_field="target_sup10_scratch"
        )
        finetune = train_supervised_target(
            tgt_train, 0.1, "from_source_model", cfg, source_model=direct.model,
            tgt_eval=tgt_eval, result_field="target_sup10_finetune",
        )
        runs[seed] = {
            "direct": direct.result.target_direct,
            "dann1": dann1.result.target_dann1,
            "dann2": dann2.result.target_dann2,
            "full": full.result.target_full,
            "sup10_scratch": scratch.result.target_sup10_scratch,
            "sup10_finetune": finetune.result.target_sup10_finetune,
            "histories": {"dann1": dann1.history},
        }
    return runs


@pytest.fixture(scope="session")
def small_bench():
    """Fast reduced benchmark for training-property tests (not calibrated
    for accuracy, only for bitwise/structural checks)."""
    spec = default_benchmark_spec(alpha=1.0, seed=11, n_train=400, n_eval=120, image_dim=16, classes=4)
    source, target = generate_benchmark(spec)
    src_train, src_eval = train_eval_split(source, spec.n_train)
    tgt_train, tgt_eval = train_eval_split(target, spec.n_train)
    return {
        "spec": spec,
        "src_train": src_train,
        "src_eval": src_eval,
        "tgt_train": tgt_train,
        "tgt_eval": tgt_eval,
    }


@pytest.fixture(scope="session")
def small_cfg():
    return nn.TrainConfig(epochs=4, batch_size=32, learning_rate=0.01, seed=11, lambda_fd=0.3)


def params_of(model):
    """Flat list of parameter arrays of a VqaModel, for bitwise comparison."""
    arrays = []
    for mlp in (model.image_encoder, model.fusion_head):
        for layer in mlp.layers:
            arrays.append(layer.weights)
            arrays.append(layer.bias)
    arrays.append(model.question_embedding)
    return arrays


def models_bitwise_equal(a, b) -> bool:
    pa, pb = params_of(a), params_of(b)
    return len(pa) == len(pb) and all(np.array_equal(x, y) for x, y in zip(pa, pb))
