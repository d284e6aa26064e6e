"""Adaptation regimes: source-only, one-stage DANN, one-stage moment
matching, two-stage DANN, and the supervised target baselines.

Unsupervised regimes take the unlabeled view of the target before
touching it, so target labels are unreadable by those code paths. RNG
streams are split per purpose (model init, source order, target order,
domain head, subsampling), which makes the lambda=0 runs bitwise
identical to source-only training.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import nn
from .data import ToyDataset, split_dataset
from .errors import TrainingCollapseError
from .vqa import (
    ArchConfig,
    TransferResult,
    VqaModel,
    build_shared_vocab,
    build_vqa_model,
    encode_tokens,
    evaluate_accuracy,
    vqa_backward,
    vqa_forward,
)

# SeedSequence stream tags; every consumer owns one stream so adding or
# removing a consumer never perturbs the others.
_S_MODEL, _S_SRC, _S_TGT, _S_HEAD, _S_SUBSAMPLE, _S_STAGE1_SRC, _S_STAGE1_TGT = range(7)

_COLLAPSE_FD = 1e-6
_COLLAPSE_EPOCHS = 3


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, stream]))


@dataclass
class AdaptOutcome:
    model: VqaModel
    extractor: nn.MlpModel | None
    history: list
    stage1_history: list | None
    result: TransferResult


def _task_batches(n: int, batch_size: int, rng: np.random.Generator):
    perm = rng.permutation(n)
    for s in range(n // batch_size):
        yield perm[s * batch_size : (s + 1) * batch_size]


class _BatchCycle:
    """Endless equal-size batches over seeded reshuffles of one dataset."""

    def __init__(self, n: int, batch_size: int, rng: np.random.Generator):
        self.n, self.b, self.rng = n, batch_size, rng
        self.perm = rng.permutation(n)
        self.pos = 0

    def next(self) -> np.ndarray:
        if self.pos + self.b > self.n:
            self.perm = self.rng.permutation(self.n)
            self.pos = 0
        out = self.perm[self.pos : self.pos + self.b]
        self.pos += self.b
        return out


def _progress(epoch: int, epochs: int) -> float:
    return epoch / (epochs - 1) if epochs > 1 else 1.0


@dataclass
class _TaskData:
    feats: np.ndarray  # (n, d) float64
    id_seqs: list
    labels: np.ndarray


def _prep_task(ds: ToyDataset, model: VqaModel) -> _TaskData:
    if ds.answers is None:
        raise ValueError("task training needs a labeled dataset")
    labels = np.array([model.vocab.answer_id(a) for a in ds.answers])
    keep = np.flatnonzero(labels < model.vocab.size)  # unknown answers are unlearnable
    return _TaskData(
        feats=ds.features[keep].astype(np.float64),
        id_seqs=[encode_tokens(model, ds.questions[i]) for i in keep],
        labels=labels[keep],
    )


class _VqaOptimizer:
    def __init__(self, model: VqaModel, cfg: nn.TrainConfig):
        self.cfg = cfg
        self.enc_state = nn.SgdState(model.image_encoder)
        self.fus_state = nn.SgdState(model.fusion_head)
        self.emb_vel = np.zeros_like(model.question_embedding)

    def step(self, model: VqaModel, grads) -> None:
        lr, mom = self.cfg.learning_rate, self.cfg.momentum
        nn.sgd_step(model.image_encoder, grads.encoder, self.enc_state, lr, mom)
        nn.sgd_step(model.fusion_head, grads.fusion, self.fus_state, lr, mom)
        nn.update_array(model.question_embedding, grads.embedding, self.emb_vel, lr, mom)


def _domain_accuracy(encoder: nn.MlpModel, head: nn.MlpModel,
                     src_feats: np.ndarray, tgt_feats: np.ndarray) -> float:
    # heads emit domain logits; logit >= 0 predicts "target"
    z_src = _fwd(head, _fwd(encoder, src_feats).post[-1]).post[-1][:, 0]
    z_tgt = _fwd(head, _fwd(encoder, tgt_feats).post[-1]).post[-1][:, 0]
    correct = float((z_src < 0.0).sum() + (z_tgt >= 0.0).sum())
    return correct / (len(z_src) + len(z_tgt))


def _epoch_row(epoch, l_ce, l_fd, lam, l_total, domain_acc, src_acc) -> dict:
    return {
        "epoch": epoch,
        "l_ce": l_ce,
        "l_fd": l_fd,
        "lambda": lam,
        "l_total": l_total,
        "domain_acc": domain_acc,
        "src_acc": src_acc,
    }


def _check_health(row: dict, dann_like: bool, streak: int) -> int:
    for key in ("l_ce", "l_fd", "l_total"):
        if row[key] is not None and not np.isfinite(row[key]):
            raise TrainingCollapseError(f"non-finite {key} at epoch {row['epoch']}")
    if dann_like and row["lambda"] > 0 and row["l_fd"] < _COLLAPSE_FD:
        streak += 1
        if streak >= _COLLAPSE_EPOCHS:
            raise TrainingCollapseError(
                f"domain loss collapsed to 0 for {streak} consecutive epochs"
            )
        return streak
    return 0


def _step_guard(*losses) -> None:
    if not all(np.isfinite(v) for v in losses):
        raise TrainingCollapseError("non-finite loss during training step")


def _fwd(model: nn.MlpModel, batch) -> nn.ForwardRecord:
    # inside a training run, non-finite activations mean the run collapsed
    try:
        return nn.forward(model, batch)
    except FloatingPointError as exc:
        raise TrainingCollapseError(str(exc)) from exc


def _vqa_fwd(model: VqaModel, feats, id_seqs):
    try:
        return vqa_forward(model, feats, id_seqs)
    except FloatingPointError as exc:
        raise TrainingCollapseError(str(exc)) from exc


def moment_distance_with_grad(A: np.ndarray, B: np.ndarray):
    """moment_distance restricted to two batches, plus its gradients.

    Matches kernels.moment_distance: |dmu|^2 + |dM2|_F^2 over first and
    second raw moments."""
    na, nb = A.shape[0], B.shape[0]
    with np.errstate(over="ignore", invalid="ignore"):  # inf here = collapse, guarded upstream
        dmu = A.mean(axis=0) - B.mean(axis=0)
        dm2 = A.T @ A / na - B.T @ B / nb
        val = float(dmu @ dmu + np.sum(dm2 * dm2))
        g_a = (2.0 / na) * dmu[None, :] + (4.0 / na) * (A @ dm2)
        g_b = -(2.0 / nb) * dmu[None, :] - (4.0 / nb) * (B @ dm2)
    return val, g_a, g_b


def _build_model(src: ToyDataset, cfg: nn.TrainConfig, arch: ArchConfig) -> VqaModel:
    vocab = build_shared_vocab([src], arch.vocab_k)
    return build_vqa_model(src.dim, src.token_vocab, vocab, arch, _rng(cfg.seed, _S_MODEL))


def _fill_result(model: VqaModel, field: str, src_eval, tgt_eval,
                 tgt_transform=None) -> TransferResult:
    res = TransferResult()
    if src_eval is not None:
        res.source_acc = evaluate_accuracy(model, src_eval)
    if tgt_eval is not None:
        ds = tgt_transform(tgt_eval) if tgt_transform is not None else tgt_eval
        setattr(res, field, evaluate_accuracy(model, ds))
    return res


def train_source_only(src: ToyDataset, cfg: nn.TrainConfig,
                      arch: ArchConfig | None = None,
                      src_eval: ToyDataset | None = None,
                      tgt_eval: ToyDataset | None = None) -> AdaptOutcome:
    """Cross-entropy on the source only; the no-adaptation baseline."""
    arch = arch or ArchConfig()
    model = _build_model(src, cfg, arch)
    task = _prep_task(src, model)
    opt = _VqaOptimizer(model, cfg)
    order = _rng(cfg.seed, _S_SRC)
    history = []
    for epoch in range(cfg.epochs):
        ce_sum, steps = 0.0, 0
        for idx in _task_batches(len(task.labels), cfg.batch_size, order):
            probs, tape = _vqa_fwd(model, task.feats[idx], [task.id_seqs[i] for i in idx])
            ce, dp = nn.loss_eval("cross_entropy", probs, task.labels[idx])
            _step_guard(ce)
            opt.step(model, vqa_backward(model, tape, dp))
            ce_sum += ce
            steps += 1
        l_ce = ce_sum / max(steps, 1)
        row = _epoch_row(epoch, l_ce, 0.0, 0.0, l_ce, None, evaluate_accuracy(model, src))
        _check_health(row, dann_like=False, streak=0)
        history.append(row)
    result = _fill_result(model, "target_direct", src_eval, tgt_eval)
    return AdaptOutcome(model, None, history, None, result)


def _train_one_stage(src: ToyDataset, tgt_unlabeled: ToyDataset, cfg: nn.TrainConfig,
                     arch: ArchConfig, kind: str,
                     src_eval, tgt_eval, result_field: str) -> AdaptOutcome:
    tgt = tgt_unlabeled.unlabeled()
    if src.dim != tgt.dim:
        raise ValueError(f"dimension mismatch between domains: {src.dim} vs {tgt.dim}")
    model = _build_model(src, cfg, arch)
    task = _prep_task(src, model)
    opt = _VqaOptimizer(model, cfg)
    order = _rng(cfg.seed, _S_SRC)
    tgt_feats = tgt.features.astype(np.float64)
    tgt_cycle = _BatchCycle(tgt.n, cfg.batch_size, _rng(cfg.seed, _S_TGT))

    dann = kind == "dann"
    head = None
    head_state = None
    grl = nn.GrlNode(1.0)  # Eq. 2's lambda is applied at the loss level
    if dann:
        head = nn.init_mlp([arch.enc_out, 64, 1], "identity", _rng(cfg.seed, _S_HEAD))
        head_state = nn.SgdState(head)

    encoder = model.image_encoder
    history = []
    streak = 0
    for epoch in range(cfg.epochs):
        lam = float(nn.lambda_at(cfg, _progress(epoch, cfg.epochs)))
        ce_sum = fd_sum = total_sum = 0.0
        steps = 0
        for idx in _task_batches(len(task.labels), cfg.batch_size, order):
            probs, tape = _vqa_fwd(model, task.feats[idx], [task.id_seqs[i] for i in idx])
            ce, dp = nn.loss_eval("cross_entropy", probs, task.labels[idx])
            tgt_rec = _fwd(encoder, tgt_feats[tgt_cycle.next()])

            if dann:
                dom_in = np.concatenate([tape.enc_rec.post[-1], tgt_rec.post[-1]])
                dom_rec = _fwd(head, dom_in)
                dom_y = np.concatenate([np.zeros(len(idx)), np.ones(tgt_rec.post[-1].shape[0])])
                fd, dfd = nn.bce_with_logits(dom_rec.post[-1][:, 0], dom_y)
                if lam != 0.0:
                    head_grads, g_in = nn.backward(head, dom_rec, lam * dfd[:, None])
                    g_rev = grl.backward(g_in)
                    grads = vqa_backward(model, tape, dp, extra_enc_out_grad=g_rev[: len(idx)])
                    tgt_enc_grads, _ = nn.backward(encoder, tgt_rec, g_rev[len(idx) :])
                    for i, (dw, db) in enumerate(tgt_enc_grads):
                        grads.encoder[i] = (grads.encoder[i][0] + dw, grads.encoder[i][1] + db)
                    nn.sgd_step(head, head_grads, head_state, cfg.learning_rate, cfg.momentum)
                else:
                    grads = vqa_backward(model, tape, dp)
            else:  # moment matching: no reversal needed
                fd, g_a, g_b = moment_distance_with_grad(tape.enc_rec.post[-1], tgt_rec.post[-1])
                if lam != 0.0:
                    grads = vqa_backward(model, tape, dp, extra_enc_out_grad=lam * g_a)
                    tgt_enc_grads, _ = nn.backward(encoder, tgt_rec, lam * g_b)
                    for i, (dw, db) in enumerate(tgt_enc_grads):
                        grads.encoder[i] = (grads.encoder[i][0] + dw, grads.encoder[i][1] + db)
                else:
                    grads = vqa_backward(model, tape, dp)

            _step_guard(ce, fd)
            opt.step(model, grads)
            ce_sum += ce
            fd_sum += fd
            total_sum += ce + lam * fd
            steps += 1

        s = max(steps, 1)
        domain_acc = (
            _domain_accuracy(encoder, head, task.feats, tgt_feats) if dann else None
        )
        row = _epoch_row(
            epoch, ce_sum / s, fd_sum / s, lam, total_sum / s, domain_acc,
            evaluate_accuracy(model, src),
        )
        streak = _check_health(row, dann_like=dann, streak=streak)
        history.append(row)
    result = _fill_result(model, result_field, src_eval, tgt_eval)
    return AdaptOutcome(model, None, history, None, result)


def train_one_stage_dann(src: ToyDataset, tgt_unlabeled: ToyDataset, cfg: nn.TrainConfig,
                         arch: ArchConfig | None = None,
                         src_eval=None, tgt_eval=None) -> AdaptOutcome:
    """Joint task + adversarial domain loss, reversed into the image
    encoder output. Target answers are never read."""
    return _train_one_stage(
        src, tgt_unlabeled, cfg, arch or ArchConfig(), "dann", src_eval, tgt_eval, "target_dann1"
    )


def train_one_stage_mm(src: ToyDataset, tgt_unlabeled: ToyDataset, cfg: nn.TrainConfig,
                       arch: ArchConfig | None = None,
                       src_eval=None, tgt_eval=None) -> AdaptOutcome:
    """Joint task + first/second raw-moment alignment at the encoder output."""
    return _train_one_stage(
        src, tgt_unlabeled, cfg, arch or ArchConfig(), "moment_matching",
        src_eval, tgt_eval, "target_mm",
    )


def identity_extractor(dim: int) -> nn.MlpModel:
    """relu MLP (d -> 2d -> 2d -> d) that computes the identity map exactly.

    The first layer stacks [I; -I] so relu splits positive and negative
    parts; the last recombines them. Training therefore starts from a
    perfect reconstruction (MSE 0) and moves away only as the
    adversarial term demands.
    """
    eye = np.eye(dim)
    w1 = np.concatenate([eye, -eye], axis=0)
    w2 = np.eye(2 * dim)
    w3 = np.concatenate([eye, -eye], axis=1)
    return nn.MlpModel(
        [
            nn.Layer(w1, np.zeros(2 * dim), "relu"),
            nn.Layer(w2, np.zeros(2 * dim), "relu"),
            nn.Layer(w3, np.zeros(dim), "identity"),
        ]
    )


def apply_extractor(ds: ToyDataset, extractor: nn.MlpModel) -> ToyDataset:
    """Dataset view with image features passed through the extractor."""
    adapted = nn.forward(extractor, ds.features.astype(np.float64)).post[-1]
    return replace(ds, features=adapted.astype(ds.features.dtype))


def train_extractor(src: ToyDataset, tgt_unlabeled: ToyDataset,
                    cfg: nn.TrainConfig):
    """Stage 1 of the two-stage recipe: a domain-invariant feature
    extractor trained with a source MSE anchor plus a reversed domain
    BCE over both domains. Returns (extractor, history)."""
    tgt = tgt_unlabeled.unlabeled()
    if src.dim != tgt.dim:
        raise ValueError(f"dimension mismatch between domains: {src.dim} vs {tgt.dim}")

    extractor = identity_extractor(src.dim)
    ext_state = nn.SgdState(extractor)
    head = nn.init_mlp([src.dim, 64, 1], "identity", _rng(cfg.seed, _S_HEAD))
    head_state = nn.SgdState(head)
    grl = nn.GrlNode(1.0)

    src_feats = src.features.astype(np.float64)
    tgt_feats = tgt.features.astype(np.float64)
    src_cycle = _BatchCycle(src.n, cfg.batch_size, _rng(cfg.seed, _S_STAGE1_SRC))
    tgt_cycle = _BatchCycle(tgt.n, cfg.batch_size, _rng(cfg.seed, _S_STAGE1_TGT))
    steps_per_epoch = min(src.n, tgt.n) // cfg.batch_size

    stage1_history = []
    streak = 0
    for epoch in range(cfg.epochs):
        lam = float(nn.lambda_at(cfg, _progress(epoch, cfg.epochs)))
        mse_sum = fd_sum = total_sum = 0.0
        for _ in range(steps_per_epoch):
            sb = src_feats[src_cycle.next()]
            tb = tgt_feats[tgt_cycle.next()]
            rec_s = _fwd(extractor, sb)
            rec_t = _fwd(extractor, tb)
            mse, dmse = nn.loss_eval("mse", rec_s.post[-1], sb)

            dom_in = np.concatenate([rec_s.post[-1], rec_t.post[-1]])
            dom_rec = _fwd(head, dom_in)
            dom_y = np.concatenate([np.zeros(len(sb)), np.ones(len(tb))])
            fd, dfd = nn.bce_with_logits(dom_rec.post[-1][:, 0], dom_y)
            _step_guard(mse, fd)

            g_src = dmse
            g_tgt = None
            if lam != 0.0:
                head_grads, g_in = nn.backward(head, dom_rec, lam * dfd[:, None])
                g_rev = grl.backward(g_in)
                g_src = dmse + g_rev[: len(sb)]
                g_tgt = g_rev[len(sb) :]
                nn.sgd_step(head, head_grads, head_state, cfg.learning_rate, cfg.momentum)
            ext_grads, _ = nn.backward(extractor, rec_s, g_src)
            if g_tgt is not None:
                tgrads, _ = nn.backward(extractor, rec_t, g_tgt)
                ext_grads = [
                    (gw + tw, gb + tb_) for (gw, gb), (tw, tb_) in zip(ext_grads, tgrads)
                ]
            nn.sgd_step(extractor, ext_grads, ext_state, cfg.learning_rate, cfg.momentum)
            mse_sum += mse
            fd_sum += fd
            total_sum += mse + lam * fd

        s = max(steps_per_epoch, 1)
        ex_src = _fwd(extractor, src_feats).post[-1]
        ex_tgt = _fwd(extractor, tgt_feats).post[-1]
        z_s = _fwd(head, ex_src).post[-1][:, 0]
        z_t = _fwd(head, ex_tgt).post[-1][:, 0]
        domain_acc = float(((z_s < 0.0).sum() + (z_t >= 0.0).sum()) / (len(z_s) + len(z_t)))
        row = _epoch_row(epoch, mse_sum / s, fd_sum / s, lam, total_sum / s, domain_acc, None)
        streak = _check_health(row, dann_like=True, streak=streak)
        stage1_history.append(row)
    return extractor, stage1_history


def train_two_stage_dann(src: ToyDataset, tgt_unlabeled: ToyDataset, cfg: nn.TrainConfig,
                         arch: ArchConfig | None = None,
                         src_eval=None, tgt_eval=None) -> AdaptOutcome:
    """Stage 1 trains a domain-invariant feature extractor (source MSE
    anchor + reversed domain BCE over both domains); stage 2 freezes it
    and trains the task model on extracted source features. Evaluation
    feeds extracted target features to the frozen pipeline."""
    arch = arch or ArchConfig()
    if src.answers is None:
        raise ValueError("source dataset must be labeled")
    extractor, stage1_history = train_extractor(src, tgt_unlabeled, cfg)

    # stage 2: extractor frozen, task training on extracted source features
    src_adapted = apply_extractor(src, extractor)
    stage2 = train_source_only(src_adapted, cfg, arch)
    result = _fill_result(
        stage2.model, "target_dann2", None, tgt_eval,
        tgt_transform=lambda ds: apply_extractor(ds, extractor),
    )
    if src_eval is not None:
        result.source_acc = evaluate_accuracy(stage2.model, apply_extractor(src_eval, extractor))
    return AdaptOutcome(stage2.model, extractor, stage2.history, stage1_history, result)


def train_supervised_target(tgt: ToyDataset, fraction: float, init: str,
                            cfg: nn.TrainConfig, arch: ArchConfig | None = None,
                            source_model: VqaModel | None = None,
                            tgt_eval=None, result_field: str = "target_full") -> AdaptOutcome:
    """Supervised comparison points: a seeded fraction of the labeled
    target, trained from scratch or finetuned from a source model."""
    arch = arch or ArchConfig()
    if tgt.answers is None:
        raise ValueError("supervised target training needs labels")
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must lie in (0, 1], got {fraction}")
    if init not in ("scratch", "from_source_model"):
        raise ValueError(f"unknown init {init!r}")
    sub_seed = int(np.random.SeedSequence([cfg.seed, _S_SUBSAMPLE]).generate_state(1)[0])
    subset = split_dataset(tgt, [fraction], seed=sub_seed)[0]
    if subset.n == 0:
        raise ValueError("subsample is empty; fraction too small for dataset size")

    if init == "scratch":
        model = _build_model(subset, cfg, arch)
    else:
        if source_model is None:
            raise ValueError("finetuning needs a source model")
        model = source_model.copy()
    task = _prep_task(subset, model)
    opt = _VqaOptimizer(model, cfg)
    order = _rng(cfg.seed, _S_SRC)
    history = []
    for epoch in range(cfg.epochs):
        ce_sum, steps = 0.0, 0
        for idx in _task_batches(len(task.labels), cfg.batch_size, order):
            probs, tape = _vqa_fwd(model, task.feats[idx], [task.id_seqs[i] for i in idx])
            ce, dp = nn.loss_eval("cross_entropy", probs, task.labels[idx])
            _step_guard(ce)
            opt.step(model, vqa_backward(model, tape, dp))
            ce_sum += ce
            steps += 1
        l_ce = ce_sum / max(steps, 1)
        row = _epoch_row(epoch, l_ce, 0.0, 0.0, l_ce, None, evaluate_accuracy(model, subset))
        _check_health(row, dann_like=False, streak=0)
        history.append(row)
    result = _fill_result(model, result_field, None, tgt_eval)
    return AdaptOutcome(model, None, history, None, result)
