"""adapt_train: regime contracts — reductions, no-peeking, freeze, histories."""
from dataclasses import replace

import numpy as np
import pytest

from conftest import models_bitwise_equal, params_of
from shiftlab import nn
from shiftlab.adapt import (
    apply_extractor,
    identity_extractor,
    moment_distance_with_grad,
    train_extractor,
    train_one_stage_dann,
    train_one_stage_mm,
    train_source_only,
    train_supervised_target,
    train_two_stage_dann,
)
from shiftlab.errors import TrainingCollapseError
from shiftlab.kernels import moment_distance


class TestSourceOnly:
    def test_zero_epochs_is_init(self, small_bench, small_cfg):
        cfg = replace(small_cfg, epochs=0)
        a = train_source_only(small_bench["src_train"], cfg)
        b = train_source_only(small_bench["src_train"], cfg)
        assert models_bitwise_equal(a.model, b.model)
        assert a.history == []

    def test_same_seed_bitwise(self, small_bench, small_cfg):
        a = train_source_only(small_bench["src_train"], small_cfg)
        b = train_source_only(small_bench["src_train"], small_cfg)
        assert models_bitwise_equal(a.model, b.model)

    def test_history_schema(self, small_bench, small_cfg):
        out = train_source_only(small_bench["src_train"], small_cfg)
        assert len(out.history) == small_cfg.epochs
        for row in out.history:
            assert set(row) == {"epoch", "l_ce", "l_fd", "lambda", "l_total", "domain_acc", "src_acc"}

    def test_unlabeled_rejected(self, small_bench, small_cfg):
        with pytest.raises(ValueError):
            train_source_only(small_bench["src_train"].unlabeled(), small_cfg)

    def test_learns_separable_benchmark(self, small_bench, small_cfg):
        cfg = replace(small_cfg, epochs=12, learning_rate=0.02)
        out = train_source_only(small_bench["src_train"], cfg, src_eval=small_bench["src_eval"])
        assert out.result.source_acc > 0.95

    def test_divergence_aborts(self, small_bench, small_cfg):
        # explosion is caught either by the forward finiteness guard or
        # the non-finite-loss detector, never trained through silently
        cfg = replace(small_cfg, learning_rate=1e160, epochs=3)
        with pytest.raises((TrainingCollapseError, FloatingPointError)):
            train_source_only(small_bench["src_train"], cfg)


class TestLambdaZeroReductions:
    def test_dann_reduces_to_source_only(self, small_bench, small_cfg):
        cfg = replace(small_cfg, lambda_fd=0.0)
        base = train_source_only(small_bench["src_train"], cfg)
        out = train_one_stage_dann(small_bench["src_train"], small_bench["tgt_train"], cfg)
        assert models_bitwise_equal(base.model, out.model)

    def test_mm_reduces_to_source_only(self, small_bench, small_cfg):
        cfg = replace(small_cfg, lambda_fd=0.0, fd_loss="moment_matching")
        base = train_source_only(small_bench["src_train"], cfg)
        out = train_one_stage_mm(small_bench["src_train"], small_bench["tgt_train"], cfg)
        assert models_bitwise_equal(base.model, out.model)

    def test_dann_lambda_zero_head_untrained(self, small_bench, small_cfg):
        # with lambda 0 the whole L_fd term vanishes, domain head included
        cfg = replace(small_cfg, lambda_fd=0.0)
        out = train_one_stage_dann(small_bench["src_train"], small_bench["tgt_train"], cfg)
        assert all(row["lambda"] == 0.0 for row in out.history)
        assert all(row["l_total"] == row["l_ce"] for row in out.history)


class TestNoPeeking:
    @pytest.mark.parametrize("trainer", [train_one_stage_dann, train_one_stage_mm, train_two_stage_dann])
    def test_target_labels_unreadable(self, small_bench, small_cfg, trainer):
        if trainer is train_one_stage_mm:
            small_cfg = replace(small_cfg, lambda_fd=0.01, fd_loss="moment_matching")
        labeled = small_bench["tgt_train"]
        stripped = labeled.unlabeled()
        a = trainer(small_bench["src_train"], labeled, small_cfg)
        b = trainer(small_bench["src_train"], stripped, small_cfg)
        assert models_bitwise_equal(a.model, b.model)
        if a.extractor is not None:
            for la, lb in zip(a.extractor.layers, b.extractor.layers):
                assert np.array_equal(la.weights, lb.weights)


class TestOneStageDann:
    def test_eq2_bookkeeping(self, small_bench, small_cfg):
        out = train_one_stage_dann(small_bench["src_train"], small_bench["tgt_train"], small_cfg)
        for row in out.history:
            assert row["l_total"] == pytest.approx(row["l_ce"] + row["lambda"] * row["l_fd"], abs=1e-9)

    def test_domain_accuracy_recorded(self, small_bench, small_cfg):
        out = train_one_stage_dann(small_bench["src_train"], small_bench["tgt_train"], small_cfg)
        assert all(0.0 <= row["domain_acc"] <= 1.0 for row in out.history)

    def test_dimension_mismatch(self, small_bench, small_cfg):
        bad = replace(
            small_bench["tgt_train"],
            features=np.zeros((small_bench["tgt_train"].n, 3), dtype=np.float32),
        )
        with pytest.raises(ValueError):
            train_one_stage_dann(small_bench["src_train"], bad, small_cfg)


class TestOneStageMm:
    def test_moment_grad_matches_finite_differences(self):
        rng = np.random.default_rng(17)
        A, B = rng.normal(size=(6, 4)), rng.normal(size=(5, 4))
        val, g_a, g_b = moment_distance_with_grad(A, B)
        assert val == pytest.approx(moment_distance(A, B), rel=1e-12)
        eps = 1e-6
        for arr, grad in ((A, g_a), (B, g_b)):
            for i in range(arr.shape[0]):
                for j in range(arr.shape[1]):
                    orig = arr[i, j]
                    arr[i, j] = orig + eps
                    fp = moment_distance(A, B)
                    arr[i, j] = orig - eps
                    fm = moment_distance(A, B)
                    arr[i, j] = orig
                    assert grad[i, j] == pytest.approx((fp - fm) / (2 * eps), abs=1e-6)

    def test_fd_loss_decreases(self, small_bench, small_cfg):
        cfg = replace(small_cfg, epochs=10, lambda_fd=0.01, fd_loss="moment_matching")
        out = train_one_stage_mm(small_bench["src_train"], small_bench["tgt_train"], cfg)
        assert out.history[-1]["l_fd"] < out.history[0]["l_fd"]

    def test_no_domain_head(self, small_bench, small_cfg):
        cfg = replace(small_cfg, fd_loss="moment_matching", lambda_fd=0.01)
        out = train_one_stage_mm(small_bench["src_train"], small_bench["tgt_train"], cfg)
        assert all(row["domain_acc"] is None for row in out.history)


class TestTwoStage:
    def test_extractor_identity_at_init(self):
        ext = identity_extractor(8)
        rng = np.random.default_rng(0)
        x = rng.normal(size=(10, 8))
        np.testing.assert_allclose(nn.forward(ext, x).post[-1], x, atol=1e-12)

    def test_stage2_freeze_bitwise(self, small_bench, small_cfg):
        ext_only, _ = train_extractor(small_bench["src_train"], small_bench["tgt_train"], small_cfg)
        out = train_two_stage_dann(small_bench["src_train"], small_bench["tgt_train"], small_cfg)
        for la, lb in zip(ext_only.layers, out.extractor.layers):
            assert np.array_equal(la.weights, lb.weights)
            assert np.array_equal(la.bias, lb.bias)

    def test_histories(self, small_bench, small_cfg):
        out = train_two_stage_dann(small_bench["src_train"], small_bench["tgt_train"], small_cfg)
        assert len(out.history) == small_cfg.epochs
        assert len(out.stage1_history) == small_cfg.epochs
        for row in out.stage1_history:
            assert row["l_total"] == pytest.approx(row["l_ce"] + row["lambda"] * row["l_fd"], abs=1e-9)

    def test_identical_domains_degenerate(self, small_bench, small_cfg):
        cfg = replace(small_cfg, epochs=8)
        src = small_bench["src_train"]
        ext, hist = train_extractor(src, src.unlabeled(), cfg)
        assert hist[-1]["l_ce"] < 1e-3  # MSE anchor stays satisfied
        assert abs(hist[-1]["domain_acc"] - 0.5) <= 0.05

    def test_apply_extractor_identity(self, small_bench):
        ds = small_bench["src_train"]
        out = apply_extractor(ds, identity_extractor(ds.dim))
        np.testing.assert_allclose(out.features, ds.features, atol=1e-5)
        assert out.answers == ds.answers


class TestSupervisedTarget:
    def test_fraction_guard(self, small_bench, small_cfg):
        with pytest.raises(ValueError):
            train_supervised_target(small_bench["tgt_train"], 0.0, "scratch", small_cfg)
        with pytest.raises(ValueError):
            train_supervised_target(small_bench["tgt_train"], 1.2, "scratch", small_cfg)

    def test_unlabeled_rejected(self, small_bench, small_cfg):
        with pytest.raises(ValueError):
            train_supervised_target(small_bench["tgt_train"].unlabeled(), 0.5, "scratch", small_cfg)

    def test_finetune_needs_source_model(self, small_bench, small_cfg):
        with pytest.raises(ValueError):
            train_supervised_target(small_bench["tgt_train"], 0.1, "from_source_model", small_cfg)

    def test_subsample_seeded(self, small_bench, small_cfg):
        a = train_supervised_target(small_bench["tgt_train"], 0.5, "scratch", small_cfg)
        b = train_supervised_target(small_bench["tgt_train"], 0.5, "scratch", small_cfg)
        assert models_bitwise_equal(a.model, b.model)

    def test_full_scratch_close_to_source_procedure(self, small_bench, small_cfg):
        # same procedure on the same data, different sample order only
        cfg = replace(small_cfg, epochs=12, learning_rate=0.02)
        ds = small_bench["src_train"]
        base = train_source_only(ds, cfg, src_eval=small_bench["src_eval"])
        full = train_supervised_target(ds, 1.0, "scratch", cfg, tgt_eval=small_bench["src_eval"])
        assert abs(full.result.target_full - base.result.source_acc) <= 0.02

    def test_finetune_starts_from_source_model(self, small_bench, small_cfg):
        cfg = replace(small_cfg, epochs=0)
        src_out = train_source_only(small_bench["src_train"], replace(small_cfg, epochs=2))
        tuned = train_supervised_target(
            small_bench["tgt_train"], 0.5, "from_source_model", cfg, source_model=src_out.model
        )
        assert models_bitwise_equal(tuned.model, src_out.model)  # zero epochs: unchanged copy
        assert params_of(tuned.model)[0] is not params_of(src_out.model)[0]


class TestDefaultBenchmarkBehavior:
    """Reference-run contracts on the default (alpha=1) benchmark."""

    def test_dann1_domain_accuracy_approaches_half(self, default_seed_runs):
        hist = default_seed_runs[0]["histories"]["dann1"]
        first, last = hist[0]["domain_acc"], hist[-1]["domain_acc"]
        assert abs(last - 0.5) < abs(first - 0.5)

    def test_dann1_no_worse_than_direct_minus_margin(self, default_seed_runs):
        for seed in range(5):
            run = default_seed_runs[seed]
            assert run["dann1"] >= run["direct"] - 0.02, f"seed {seed}"

    def test_mm_moment_distance_shrinks(self, default_matrix):
        hist = default_matrix["outcomes"]["mm"].history
        assert hist[-1]["l_fd"] < hist[0]["l_fd"]

    def test_sup10_finetune_beats_scratch_majority(self, default_seed_runs):
        wins = sum(
            default_seed_runs[s]["sup10_finetune"] >= default_seed_runs[s]["sup10_scratch"]
            for s in range(5)
        )
        assert wins >= 3

    def test_unshifted_benchmark_regime_parity(self):
        from shiftlab.cli import REGIMES, run_matrix
        from conftest import default_benchmark_spec
        from shiftlab.data import generate_benchmark, train_eval_split

        spec = default_benchmark_spec(alpha=0.0, seed=0)
        source, target = generate_benchmark(spec)
        src_train, src_eval = train_eval_split(source, spec.n_train)
        tgt_train, tgt_eval = train_eval_split(target, spec.n_train)
        rows, _ = run_matrix(src_train, src_eval, tgt_train, tgt_eval, nn.TrainConfig(seed=0),
                             regimes=("direct", "dann1", "mm", "dann2", "full"))
        accs = [r["target_acc"] for r in rows]
        assert max(accs) - min(accs) <= 0.03
        direct = next(r for r in rows if r["regime"] == "direct")
        assert abs(direct["target_acc"] - direct["source_acc"]) <= 0.02


class TestCollapseDetector:
    def test_dann_collapse_aborts(self, small_bench, small_cfg):
        from shiftlab import adapt as adapt_mod

        rows = [
            {"epoch": i, "l_ce": 1.0, "l_fd": 0.0, "lambda": 0.3, "l_total": 1.0,
             "domain_acc": 1.0, "src_acc": 0.5}
            for i in range(3)
        ]
        streak = 0
        with pytest.raises(TrainingCollapseError, match="collapsed"):
            for row in rows:
                streak = adapt_mod._check_health(row, dann_like=True, streak=streak)

    def test_nonfinite_aborts(self):
        from shiftlab import adapt as adapt_mod

        row = {"epoch": 0, "l_ce": float("nan"), "l_fd": 0.5, "lambda": 0.3,
               "l_total": float("nan"), "domain_acc": 0.5, "src_acc": 0.5}
        with pytest.raises(TrainingCollapseError, match="non-finite"):
            adapt_mod._check_health(row, dann_like=True, streak=0)
